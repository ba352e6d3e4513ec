//! Run configuration: a flat `key = value` file plus command-line
//! overrides, resolved into the library's configuration structs.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use msgpm::multiscale::LevelOverride;
use msgpm::pipeline::PipelineConfig;

use crate::error::CliError;

/// Every key accepted by [`RunConfig::set`], in manifest order.
/// `level<N>.epsilon` and `level<N>.eta` are accepted in addition.
pub const KEYS: &[&str] = &[
    "img1",
    "img2",
    "gt_flow",
    "gt_occ",
    "out_dir",
    "external_interp",
    "seed",
    "preprocess",
    "interpolator",
    "levels",
    "w_max",
    "dw",
    "beta",
    "reliability_loss",
    "delta_m",
    "theta_occ",
    "epsilon",
    "eta",
    "tau_agree",
    "residual_min",
    "residual_passes",
    "max_pairs",
    "patch_radius",
    "pm_iterations",
    "search_decay",
    "ransac_max_iterations",
    "ransac_inlier_px",
    "ransac_min_inliers",
    "ransac_confidence",
    "ransac_min_sample_area",
    "interp_k",
    "interp_sigma_g",
    "interp_lambda",
];

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunConfig {
    pub img1: Option<PathBuf>,
    pub img2: Option<PathBuf>,
    pub gt_flow: Option<PathBuf>,
    pub gt_occ: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
    pub pipeline: PipelineConfig,
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, CliError> {
    value
        .parse()
        .map_err(|_| CliError::Usage(format!("config: invalid value {value:?} for {key}")))
}

fn parse_auto(key: &str, value: &str) -> Result<Option<f64>, CliError> {
    if value == "auto" {
        Ok(None)
    } else {
        parse(key, value).map(Some)
    }
}

fn path_value(value: &str) -> Option<PathBuf> {
    if value.is_empty() {
        None
    } else {
        Some(PathBuf::from(value))
    }
}

fn show_path(p: &Option<PathBuf>) -> String {
    p.as_ref().map(|p| p.display().to_string()).unwrap_or_default()
}

fn show_auto(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_else(|| "auto".to_string())
}

impl RunConfig {
    /// Sets one key. Unknown keys and unparsable values are usage errors.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        let p = &mut self.pipeline;
        let lvl = &mut p.pyramid.level;
        match key {
            "img1" => self.img1 = path_value(value),
            "img2" => self.img2 = path_value(value),
            "gt_flow" => self.gt_flow = path_value(value),
            "gt_occ" => self.gt_occ = path_value(value),
            "out_dir" => self.out_dir = path_value(value),
            "external_interp" => p.interp.external = path_value(value),
            "seed" => {
                let s: u64 = parse(key, value)?;
                p.seed = s;
                p.patchmatch.rng_seed = s;
            }
            "preprocess" => p.preprocess = value.to_string(),
            "interpolator" => p.interpolator = value.to_string(),
            "levels" => p.pyramid.levels = parse(key, value)?,
            "w_max" => p.pyramid.w_max = parse(key, value)?,
            "dw" => p.pyramid.dw = parse(key, value)?,
            "beta" => p.pyramid.beta = parse(key, value)?,
            "reliability_loss" => p.pyramid.reliability_loss = parse_auto(key, value)?,
            "delta_m" => p.pyramid.delta_m = parse(key, value)?,
            "theta_occ" => p.theta_occ = parse(key, value)?,
            "epsilon" => lvl.epsilon = parse(key, value)?,
            "eta" => lvl.eta = parse(key, value)?,
            "tau_agree" => lvl.tau_agree = parse(key, value)?,
            "residual_min" => lvl.residual_min = parse(key, value)?,
            "residual_passes" => lvl.residual_passes = parse(key, value)?,
            "max_pairs" => lvl.max_pairs = parse(key, value)?,
            "patch_radius" => p.patchmatch.patch_radius = parse(key, value)?,
            "pm_iterations" => p.patchmatch.iterations = parse(key, value)?,
            "search_decay" => p.patchmatch.search_decay = parse(key, value)?,
            "ransac_max_iterations" => lvl.ransac.max_iterations = parse(key, value)?,
            "ransac_inlier_px" => lvl.ransac.inlier_px = parse(key, value)?,
            "ransac_min_inliers" => lvl.ransac.min_inliers = parse(key, value)?,
            "ransac_confidence" => lvl.ransac.confidence = parse(key, value)?,
            "ransac_min_sample_area" => lvl.ransac.min_sample_area = parse_auto(key, value)?,
            "interp_k" => p.interp.k = parse(key, value)?,
            "interp_sigma_g" => p.interp.sigma_g = parse(key, value)?,
            "interp_lambda" => p.interp.lambda = parse(key, value)?,
            _ => return self.set_level_key(key, value),
        }
        Ok(())
    }

    fn set_level_key(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        let unknown = || CliError::Usage(format!("config: unknown key {key:?}"));
        let rest = key.strip_prefix("level").ok_or_else(unknown)?;
        let (n, field) = rest.split_once('.').ok_or_else(unknown)?;
        let level: usize = n.parse().map_err(|_| unknown())?;
        if level == 0 || !matches!(field, "epsilon" | "eta") {
            return Err(unknown());
        }
        let v: f64 = parse(key, value)?;
        let overrides = &mut self.pipeline.pyramid.overrides;
        let idx = match overrides.iter().position(|o| o.level == level) {
            Some(i) => i,
            None => {
                overrides.push(LevelOverride {
                    level,
                    epsilon: None,
                    eta: None,
                });
                overrides.sort_by_key(|o| o.level);
                overrides.iter().position(|o| o.level == level).unwrap()
            }
        };
        if field == "epsilon" {
            overrides[idx].epsilon = Some(v);
        } else {
            overrides[idx].eta = Some(v);
        }
        Ok(())
    }

    /// Applies a config file's contents. Blank lines and `#` comments are
    /// ignored.
    pub fn apply_text(&mut self, text: &str, origin: &str) -> Result<(), CliError> {
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                CliError::Usage(format!("config: {origin}:{}: expected key = value", n + 1))
            })?;
            self.set(k.trim(), v.trim())?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<(), CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        self.apply_text(&text, &path.display().to_string())
    }

    /// Applies `key=value` overrides.
    pub fn apply_overrides(&mut self, sets: &[String]) -> Result<(), CliError> {
        for s in sets {
            let (k, v) = s
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("config: override {s:?} is not key=value")))?;
            self.set(k.trim(), v.trim())?;
        }
        Ok(())
    }

    /// The fully resolved configuration in the file format, readable back
    /// through [`RunConfig::apply_text`].
    pub fn manifest(&self) -> String {
        let p = &self.pipeline;
        let lvl = &p.pyramid.level;
        let mut s = String::new();
        for key in KEYS {
            let v = match *key {
                "img1" => show_path(&self.img1),
                "img2" => show_path(&self.img2),
                "gt_flow" => show_path(&self.gt_flow),
                "gt_occ" => show_path(&self.gt_occ),
                "out_dir" => show_path(&self.out_dir),
                "external_interp" => show_path(&p.interp.external),
                "seed" => p.seed.to_string(),
                "preprocess" => p.preprocess.clone(),
                "interpolator" => p.interpolator.clone(),
                "levels" => p.pyramid.levels.to_string(),
                "w_max" => p.pyramid.w_max.to_string(),
                "dw" => p.pyramid.dw.to_string(),
                "beta" => p.pyramid.beta.to_string(),
                "reliability_loss" => show_auto(p.pyramid.reliability_loss),
                "delta_m" => p.pyramid.delta_m.to_string(),
                "theta_occ" => p.theta_occ.to_string(),
                "epsilon" => lvl.epsilon.to_string(),
                "eta" => lvl.eta.to_string(),
                "tau_agree" => lvl.tau_agree.to_string(),
                "residual_min" => lvl.residual_min.to_string(),
                "residual_passes" => lvl.residual_passes.to_string(),
                "max_pairs" => lvl.max_pairs.to_string(),
                "patch_radius" => p.patchmatch.patch_radius.to_string(),
                "pm_iterations" => p.patchmatch.iterations.to_string(),
                "search_decay" => p.patchmatch.search_decay.to_string(),
                "ransac_max_iterations" => lvl.ransac.max_iterations.to_string(),
                "ransac_inlier_px" => lvl.ransac.inlier_px.to_string(),
                "ransac_min_inliers" => lvl.ransac.min_inliers.to_string(),
                "ransac_confidence" => lvl.ransac.confidence.to_string(),
                "ransac_min_sample_area" => show_auto(lvl.ransac.min_sample_area),
                "interp_k" => p.interp.k.to_string(),
                "interp_sigma_g" => p.interp.sigma_g.to_string(),
                "interp_lambda" => p.interp.lambda.to_string(),
                _ => unreachable!("manifest key {key}"),
            };
            let _ = writeln!(s, "{key} = {v}");
        }
        for o in &p.pyramid.overrides {
            if let Some(e) = o.epsilon {
                let _ = writeln!(s, "level{}.epsilon = {e}", o.level);
            }
            if let Some(e) = o.eta {
                let _ = writeln!(s, "level{}.eta = {e}", o.level);
            }
        }
        s
    }
}
