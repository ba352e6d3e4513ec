//! Dense flow fields with per-pixel validity and the Middlebury `.flo` format.

use std::fs;
use std::path::Path;

use nalgebra::Vector2;

use super::FlowIoError;

/// Displacement stored at invalid pixels. Magnitudes above `1e9` are the
/// Middlebury "unknown flow" convention.
pub const UNKNOWN_FLOW: f64 = 1e10;
const UNKNOWN_FLOW_THRESHOLD: f32 = 1e9;
const FLO_MAGIC: &[u8; 4] = b"PIEH";

/// Per-pixel displacement map. Invalid pixels are only reachable through
/// [`FlowField::get`], which returns `None` for them.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowField {
    width: usize,
    height: usize,
    vectors: Vec<Vector2<f64>>,
    valid: Vec<bool>,
}

impl FlowField {
    /// Field with every pixel invalid.
    pub fn invalid(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            vectors: vec![Vector2::repeat(UNKNOWN_FLOW); width * height],
            valid: vec![false; width * height],
        }
    }

    /// Field with the same displacement everywhere.
    pub fn constant(width: usize, height: usize, v: Vector2<f64>) -> Self {
        Self {
            width,
            height,
            vectors: vec![v; width * height],
            valid: vec![true; width * height],
        }
    }

    /// Dense field from `f(x, y)`.
    pub fn from_fn<F>(width: usize, height: usize, mut f: F) -> Self
    where
        F: FnMut(usize, usize) -> Vector2<f64>,
    {
        let mut out = Self::invalid(width, height);
        for y in 0..height {
            for x in 0..width {
                out.set(x, y, f(x, y));
            }
        }
        out
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> Option<Vector2<f64>> {
        self.get_index(y * self.width + x)
    }

    #[inline]
    pub fn get_index(&self, i: usize) -> Option<Vector2<f64>> {
        if self.valid[i] {
            Some(self.vectors[i])
        } else {
            None
        }
    }

    #[inline]
    pub fn is_valid(&self, i: usize) -> bool {
        self.valid[i]
    }

    pub fn set(&mut self, x: usize, y: usize, v: Vector2<f64>) {
        let i = y * self.width + x;
        self.set_index(i, v);
    }

    #[inline]
    pub fn set_index(&mut self, i: usize, v: Vector2<f64>) {
        self.vectors[i] = v;
        self.valid[i] = true;
    }

    pub fn invalidate(&mut self, i: usize) {
        self.vectors[i] = Vector2::repeat(UNKNOWN_FLOW);
        self.valid[i] = false;
    }

    pub fn valid_mask(&self) -> &[bool] {
        &self.valid
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|v| **v).count()
    }

    pub fn is_dense(&self) -> bool {
        self.valid.iter().all(|v| *v)
    }

    /// Iterates `(index, vector)` over valid pixels.
    pub fn iter_valid(&self) -> impl Iterator<Item = (usize, Vector2<f64>)> + '_ {
        self.vectors
            .iter()
            .zip(&self.valid)
            .enumerate()
            .filter(|(_, (_, ok))| **ok)
            .map(|(i, (v, _))| (i, *v))
    }

    /// Serializes to the Middlebury `.flo` byte layout: magic, little-endian
    /// `i32` width and height, then row-major interleaved `f32` `(u, v)`.
    /// Invalid pixels are written as the unknown-flow sentinel.
    pub fn to_flo_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(12 + 8 * self.vectors.len());
        out.extend_from_slice(FLO_MAGIC);
        out.extend_from_slice(&(self.width as i32).to_le_bytes());
        out.extend_from_slice(&(self.height as i32).to_le_bytes());
        for (v, ok) in self.vectors.iter().zip(&self.valid) {
            let (u, w) = if *ok {
                (v.x as f32, v.y as f32)
            } else {
                (UNKNOWN_FLOW as f32, UNKNOWN_FLOW as f32)
            };
            out.extend_from_slice(&u.to_le_bytes());
            out.extend_from_slice(&w.to_le_bytes());
        }
        out
    }

    /// Parses `.flo` bytes. Vectors with a component magnitude above `1e9`
    /// or a non-finite component are marked invalid.
    pub fn from_flo_bytes(bytes: &[u8]) -> Result<Self, FlowIoError> {
        if bytes.len() < 12 {
            return Err(FlowIoError::Truncated {
                expected: 12,
                got: bytes.len(),
            });
        }
        if &bytes[0..4] != FLO_MAGIC {
            return Err(FlowIoError::BadMagic([bytes[0], bytes[1], bytes[2], bytes[3]]));
        }
        let width = i32::from_le_bytes(bytes[4..8].try_into().unwrap());
        let height = i32::from_le_bytes(bytes[8..12].try_into().unwrap());
        if width < 0 || height < 0 || width > 1 << 20 || height > 1 << 20 {
            return Err(FlowIoError::BadDimensions { width, height });
        }
        let (width, height) = (width as usize, height as usize);
        let expected = 12 + width * height * 8;
        if bytes.len() < expected {
            return Err(FlowIoError::Truncated {
                expected,
                got: bytes.len(),
            });
        }
        let mut out = Self::invalid(width, height);
        for (i, chunk) in bytes[12..expected].chunks_exact(8).enumerate() {
            let u = f32::from_le_bytes(chunk[0..4].try_into().unwrap());
            let v = f32::from_le_bytes(chunk[4..8].try_into().unwrap());
            let known = u.is_finite()
                && v.is_finite()
                && u.abs() <= UNKNOWN_FLOW_THRESHOLD
                && v.abs() <= UNKNOWN_FLOW_THRESHOLD;
            if known {
                out.set_index(i, Vector2::new(u as f64, v as f64));
            }
        }
        Ok(out)
    }
}

/// Reads a Middlebury `.flo` file.
pub fn read_flo(path: impl AsRef<Path>) -> Result<FlowField, FlowIoError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| FlowIoError::Io {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    FlowField::from_flo_bytes(&bytes)
}

/// Reads a `.flo` file and checks it against expected dimensions.
pub fn read_flo_sized(
    path: impl AsRef<Path>,
    width: usize,
    height: usize,
) -> Result<FlowField, FlowIoError> {
    let flow = read_flo(path)?;
    if flow.dims() != (width, height) {
        return Err(FlowIoError::DimensionMismatch {
            expected: (width, height),
            got: flow.dims(),
        });
    }
    Ok(flow)
}

/// Writes a Middlebury `.flo` file.
pub fn write_flo(flow: &FlowField, path: impl AsRef<Path>) -> Result<(), FlowIoError> {
    let path = path.as_ref();
    fs::write(path, flow.to_flo_bytes()).map_err(|e| FlowIoError::Io {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_constant() {
        let f = FlowField::constant(3, 3, Vector2::new(1.5, -2.25));
        let back = FlowField::from_flo_bytes(&f.to_flo_bytes()).unwrap();
        assert_eq!(back, f);
    }

    #[test]
    fn hand_assembled_bytes() {
        let mut f = FlowField::invalid(2, 1);
        f.set(0, 0, Vector2::new(0.0, 0.0));
        f.set(1, 0, Vector2::new(5.0, -3.0));
        let mut expected = vec![0x50, 0x49, 0x45, 0x48, 2, 0, 0, 0, 1, 0, 0, 0];
        for x in [0.0f32, 0.0, 5.0, -3.0] {
            expected.extend_from_slice(&x.to_le_bytes());
        }
        assert_eq!(f.to_flo_bytes(), expected);
        // 5.0f32 = 0x40A00000, -3.0f32 = 0xC0400000
        assert_eq!(&expected[20..24], &[0x00, 0x00, 0xA0, 0x40]);
        assert_eq!(&expected[24..28], &[0x00, 0x00, 0x40, 0xC0]);
    }

    #[test]
    fn bad_magic_and_truncation() {
        let mut bytes = FlowField::constant(2, 2, Vector2::zeros()).to_flo_bytes();
        let mut bad = bytes.clone();
        bad[0..4].copy_from_slice(b"XXXX");
        assert!(matches!(
            FlowField::from_flo_bytes(&bad),
            Err(FlowIoError::BadMagic(m)) if &m == b"XXXX"
        ));
        bytes.truncate(bytes.len() - 1);
        assert!(matches!(
            FlowField::from_flo_bytes(&bytes),
            Err(FlowIoError::Truncated { .. })
        ));
    }

    #[test]
    fn sentinel_marks_invalid() {
        let mut f = FlowField::constant(2, 1, Vector2::new(1.0, 1.0));
        f.invalidate(1);
        let back = FlowField::from_flo_bytes(&f.to_flo_bytes()).unwrap();
        assert_eq!(back.get(0, 0), Some(Vector2::new(1.0, 1.0)));
        assert_eq!(back.get(1, 0), None);
    }
}
