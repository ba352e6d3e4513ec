//! Image-pair preprocessing applied before matching.

use std::collections::BTreeMap;

use crate::imgcore::{hsv_histogram_equalize, Image, ImageError};

pub trait Preprocessor: Send + Sync {
    fn name(&self) -> &str;

    fn apply(&self, a: &Image, b: &Image) -> Result<(Image, Image), ImageError>;
}

/// Leaves both images unchanged.
pub struct NoPreprocessing;

impl Preprocessor for NoPreprocessing {
    fn name(&self) -> &str {
        "none"
    }

    fn apply(&self, a: &Image, b: &Image) -> Result<(Image, Image), ImageError> {
        Ok((a.clone(), b.clone()))
    }
}

/// Per-image histogram equalization of the HSV value channel.
pub struct HsvEqualize;

impl Preprocessor for HsvEqualize {
    fn name(&self) -> &str {
        "hsv-equalize"
    }

    fn apply(&self, a: &Image, b: &Image) -> Result<(Image, Image), ImageError> {
        hsv_histogram_equalize(a, b)
    }
}

/// Preprocessors by name.
pub struct PreprocessorRegistry {
    entries: BTreeMap<&'static str, fn() -> Box<dyn Preprocessor>>,
}

impl Default for PreprocessorRegistry {
    fn default() -> Self {
        let mut r = Self {
            entries: BTreeMap::new(),
        };
        r.register("none", || Box::new(NoPreprocessing));
        r.register("hsv-equalize", || Box::new(HsvEqualize));
        r
    }
}

impl PreprocessorRegistry {
    pub fn register(&mut self, name: &'static str, make: fn() -> Box<dyn Preprocessor>) {
        self.entries.insert(name, make);
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.entries.keys().copied().collect()
    }

    pub fn get(&self, name: &str) -> Option<Box<dyn Preprocessor>> {
        self.entries.get(name).map(|make| make())
    }
}
