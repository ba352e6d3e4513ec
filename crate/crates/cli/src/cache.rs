//! On-disk cache of the initial forward and backward NNFs, keyed by a
//! content hash of the (preprocessed) pair and the PatchMatch settings.

use std::path::{Path, PathBuf};

use msgpm::imgcore::{read_flo, write_flo, Image};
use msgpm::patchmatch::{Nnf, PatchMatchConfig};
use sha2::{Digest, Sha256};

use crate::error::CliError;

const KEY_VERSION: &[u8] = b"msgpm-nnf-v1";

fn hash_image(h: &mut Sha256, img: &Image) {
    for d in [img.width(), img.height(), img.channels()] {
        h.update((d as u64).to_le_bytes());
    }
    for v in img.data() {
        h.update(v.to_le_bytes());
    }
}

/// Hex SHA-256 over both images and every PatchMatch setting.
pub fn cache_key(a: &Image, b: &Image, pm: &PatchMatchConfig) -> String {
    let mut h = Sha256::new();
    h.update(KEY_VERSION);
    hash_image(&mut h, a);
    hash_image(&mut h, b);
    h.update((pm.patch_radius as u64).to_le_bytes());
    h.update((pm.iterations as u64).to_le_bytes());
    h.update(pm.search_decay.to_le_bytes());
    h.update(pm.rng_seed.to_le_bytes());
    hex::encode(h.finalize())
}

pub struct NnfCache {
    dir: PathBuf,
}

impl NnfCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    fn paths(&self, key: &str) -> (PathBuf, PathBuf) {
        (self.dir.join(format!("{key}_fwd.flo")), self.dir.join(format!("{key}_bwd.flo")))
    }

    /// Cached NNFs for the pair, with costs recomputed from the images.
    /// Missing or unreadable entries are a miss.
    pub fn load(&self, a: &Image, b: &Image, pm: &PatchMatchConfig) -> Option<(Nnf, Nnf)> {
        let (pf, pb) = self.paths(&cache_key(a, b, pm));
        let f = read_flo(&pf).ok()?;
        let g = read_flo(&pb).ok()?;
        let f = Nnf::from_flow(&f, a, b, pm.patch_radius).ok()?;
        let g = Nnf::from_flow(&g, b, a, pm.patch_radius).ok()?;
        Some((f, g))
    }

    pub fn store(&self, a: &Image, b: &Image, pm: &PatchMatchConfig, nnfs: &(Nnf, Nnf)) -> Result<(), CliError> {
        std::fs::create_dir_all(&self.dir).map_err(|e| CliError::io(&self.dir, e))?;
        let (pf, pb) = self.paths(&cache_key(a, b, pm));
        write_flo(&nnfs.0.to_flow(), &pf)?;
        write_flo(&nnfs.1.to_flow(), &pb)?;
        Ok(())
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }
}
