//! Volumes, their on-disk formats, synthetic generation and dataset splits.
//!
//! Real and synthetic data flow through the same path: a [`VolumeMeta`]
//! describes where and how the scalars are stored, [`load_volume`] turns them
//! into a normalized [`Volume3D`], and landmark annotations are attached from a
//! JSON sidecar.

mod landmarks;
mod nifti;
mod raw3d;
mod resample;
mod split;
mod synthetic;

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use landmarks::{read_landmarks, write_landmarks, LandmarkFile};
pub use nifti::{encode_nifti1_header, load_nifti, parse_nifti_header, NIFTI1_HEADER_SIZE};
pub use raw3d::{encode_raw3d, load_raw3d, parse_raw3d_header, write_raw3d, RAW3D_HEADER_SIZE, RAW3D_MAGIC};
pub use resample::resample_isotropic;
pub use split::{split_dataset, DatasetSplit};
pub use synthetic::{
    generate_synthetic_volume, generate_synthetic_volume_in_family, LandmarkSpec, MAX_LANDMARKS,
    MIN_SYNTHETIC_DIM,
};

#[derive(Debug, Error)]
pub enum VolumeError {
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("unsupported datatype code {0}")]
    UnsupportedDatatype(i16),
    #[error("unsupported dimensionality: dim[0] = {0}, expected 3")]
    UnsupportedDimensionality(i16),
    #[error("truncated file: need {expected} bytes, found {actual}")]
    TruncatedFile { expected: u64, actual: u64 },
    #[error("i/o failure: {0}")]
    Io(#[from] std::io::Error),
    #[error("invalid dims {0:?}")]
    InvalidDims([usize; 3]),
    #[error("too many landmarks: {0} (at most {MAX_LANDMARKS})")]
    TooManyLandmarks(usize),
    #[error("at least one landmark is required")]
    NoLandmarks,
    #[error("need at least 3 volumes to split, got {0}")]
    TooFewVolumes(usize),
    #[error("landmark {name} at {position:?} lies outside volume of dims {dims:?}")]
    LandmarkOutOfBounds {
        name: String,
        position: [f64; 3],
        dims: [usize; 3],
    },
    #[error("landmark file: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = VolumeError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScalarType {
    Uint8,
    Int16,
    Float32,
}

impl ScalarType {
    /// NIfTI-1 datatype code.
    pub fn nifti_code(self) -> i16 {
        match self {
            ScalarType::Uint8 => 2,
            ScalarType::Int16 => 4,
            ScalarType::Float32 => 16,
        }
    }

    pub fn from_nifti_code(code: i16) -> Result<Self> {
        match code {
            2 => Ok(ScalarType::Uint8),
            4 => Ok(ScalarType::Int16),
            16 => Ok(ScalarType::Float32),
            other => Err(VolumeError::UnsupportedDatatype(other)),
        }
    }

    pub fn size_bytes(self) -> usize {
        match self {
            ScalarType::Uint8 => 1,
            ScalarType::Int16 => 2,
            ScalarType::Float32 => 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Endian {
    Little,
    Big,
}

/// Storage description of a volume file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VolumeMeta {
    pub dims: [usize; 3],
    pub spacing_mm: [f32; 3],
    pub scalar_type: ScalarType,
    pub data_offset_bytes: u64,
    pub endian: Endian,
}

impl VolumeMeta {
    pub fn voxel_count(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn data_len_bytes(&self) -> u64 {
        (self.voxel_count() * self.scalar_type.size_bytes()) as u64
    }

    pub fn is_isotropic_1mm(&self) -> bool {
        self.spacing_mm.iter().all(|&s| s == 1.0)
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if self.dims.iter().any(|&d| d == 0) {
            return Err(VolumeError::InvalidDims(self.dims));
        }
        if self.spacing_mm.iter().any(|&s| !(s > 0.0) || !s.is_finite()) {
            return Err(VolumeError::MalformedHeader(format!(
                "non-positive spacing {:?}",
                self.spacing_mm
            )));
        }
        Ok(())
    }
}

/// A dense scalar grid, x varying fastest, with named landmark annotations in
/// voxel coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Volume3D {
    pub id: String,
    pub meta: VolumeMeta,
    pub voxels: Vec<f32>,
    pub landmarks: BTreeMap<String, [f64; 3]>,
}

impl Volume3D {
    /// An annotation-free volume built from already-normalized voxels.
    pub fn from_voxels(id: impl Into<String>, dims: [usize; 3], spacing_mm: [f32; 3], voxels: Vec<f32>) -> Result<Self> {
        let meta = VolumeMeta {
            dims,
            spacing_mm,
            scalar_type: ScalarType::Float32,
            data_offset_bytes: RAW3D_HEADER_SIZE as u64,
            endian: Endian::Little,
        };
        meta.validate()?;
        if voxels.len() != meta.voxel_count() {
            return Err(VolumeError::InvalidDims(dims));
        }
        Ok(Self {
            id: id.into(),
            meta,
            voxels,
            landmarks: BTreeMap::new(),
        })
    }

    pub fn dims(&self) -> [usize; 3] {
        self.meta.dims
    }

    pub fn spacing(&self) -> [f64; 3] {
        self.meta.spacing_mm.map(f64::from)
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        let [dx, dy, _] = self.meta.dims;
        x + dx * (y + dy * z)
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, z: usize) -> f32 {
        self.voxels[self.index(x, y, z)]
    }

    /// Value at a signed coordinate, zero outside the grid.
    #[inline]
    pub fn get_or_zero(&self, p: [i64; 3]) -> f32 {
        let [dx, dy, dz] = self.meta.dims;
        if p[0] < 0 || p[1] < 0 || p[2] < 0 || p[0] >= dx as i64 || p[1] >= dy as i64 || p[2] >= dz as i64 {
            return 0.0;
        }
        self.get(p[0] as usize, p[1] as usize, p[2] as usize)
    }

    pub fn contains(&self, p: [f64; 3]) -> bool {
        p.iter()
            .zip(self.meta.dims)
            .all(|(&c, d)| c >= 0.0 && c <= (d - 1) as f64)
    }

    pub fn landmark(&self, name: &str) -> Option<[f64; 3]> {
        self.landmarks.get(name).copied()
    }

    /// Attach annotations, rejecting any coordinate outside `[0, dim - 1]`.
    pub fn set_landmarks(&mut self, landmarks: BTreeMap<String, [f64; 3]>) -> Result<()> {
        for (name, &p) in &landmarks {
            if !self.contains(p) {
                return Err(VolumeError::LandmarkOutOfBounds {
                    name: name.clone(),
                    position: p,
                    dims: self.meta.dims,
                });
            }
        }
        self.landmarks = landmarks;
        Ok(())
    }

    pub fn mean_intensity(&self) -> f64 {
        self.voxels.iter().map(|&v| v as f64).sum::<f64>() / self.voxels.len() as f64
    }
}

/// Read scalars described by `meta` from `path`, convert to `f32` and
/// min-max normalize them to `[0, 1]`.
pub fn load_volume(path: impl AsRef<Path>, meta: &VolumeMeta) -> Result<Volume3D> {
    let path = path.as_ref();
    meta.validate()?;
    let bytes = std::fs::read(path)?;
    let expected = meta.data_offset_bytes + meta.data_len_bytes();
    if (bytes.len() as u64) < expected {
        return Err(VolumeError::TruncatedFile {
            expected,
            actual: bytes.len() as u64,
        });
    }
    let data = &bytes[meta.data_offset_bytes as usize..expected as usize];
    let mut voxels = decode_scalars(data, meta.scalar_type, meta.endian);
    normalize_min_max(&mut voxels);
    let id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let meta = VolumeMeta {
        scalar_type: ScalarType::Float32,
        ..meta.clone()
    };
    Ok(Volume3D {
        id,
        meta,
        voxels,
        landmarks: BTreeMap::new(),
    })
}

fn decode_scalars(data: &[u8], ty: ScalarType, endian: Endian) -> Vec<f32> {
    match (ty, endian) {
        (ScalarType::Uint8, _) => data.iter().map(|&b| b as f32).collect(),
        (ScalarType::Int16, Endian::Little) => data
            .chunks_exact(2)
            .map(|c| i16::from_le_bytes([c[0], c[1]]) as f32)
            .collect(),
        (ScalarType::Int16, Endian::Big) => data
            .chunks_exact(2)
            .map(|c| i16::from_be_bytes([c[0], c[1]]) as f32)
            .collect(),
        (ScalarType::Float32, Endian::Little) => data
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect(),
        (ScalarType::Float32, Endian::Big) => data
            .chunks_exact(4)
            .map(|c| f32::from_be_bytes([c[0], c[1], c[2], c[3]]))
            .collect(),
    }
}

/// Rescale to `[0, 1]` in place; a constant volume becomes all zeros.
/// Non-finite values are treated as zero.
pub fn normalize_min_max(voxels: &mut [f32]) {
    for v in voxels.iter_mut() {
        if !v.is_finite() {
            *v = 0.0;
        }
    }
    let (lo, hi) = voxels
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v as f64), hi.max(v as f64))
        });
    let range = hi - lo;
    if !(range > 0.0) {
        voxels.iter_mut().for_each(|v| *v = 0.0);
        return;
    }
    for v in voxels.iter_mut() {
        *v = ((*v as f64 - lo) / range) as f32;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn int16_file(values: &[i16]) -> (tempfile::NamedTempFile, VolumeMeta) {
        let mut bytes = vec![0u8; 4];
        for v in values {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        let f = tempfile::NamedTempFile::new().unwrap();
        std::fs::write(f.path(), &bytes).unwrap();
        let meta = VolumeMeta {
            dims: [2, 2, 2],
            spacing_mm: [1.0; 3],
            scalar_type: ScalarType::Int16,
            data_offset_bytes: 4,
            endian: Endian::Little,
        };
        (f, meta)
    }

    #[test]
    fn int16_ramp_normalizes_to_unit_interval() {
        let (f, meta) = int16_file(&[0, 1, 2, 3, 4, 5, 6, 7]);
        let vol = load_volume(f.path(), &meta).unwrap();
        let expected: Vec<f32> = (0..8).map(|i| (i as f64 / 7.0) as f32).collect();
        assert_eq!(vol.voxels, expected);
        assert_eq!(vol.voxels[0], 0.0);
        assert_eq!(vol.voxels[7], 1.0);
    }

    #[test]
    fn constant_volume_maps_to_zero() {
        let (f, meta) = int16_file(&[5; 8]);
        let vol = load_volume(f.path(), &meta).unwrap();
        assert!(vol.voxels.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn one_byte_short_is_truncated() {
        let (f, meta) = int16_file(&[0, 1, 2, 3, 4, 5, 6, 7]);
        let mut bytes = std::fs::read(f.path()).unwrap();
        bytes.pop();
        std::fs::write(f.path(), &bytes).unwrap();
        match load_volume(f.path(), &meta) {
            Err(VolumeError::TruncatedFile { expected: 20, actual: 19 }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_file_is_io_failure() {
        let meta = VolumeMeta {
            dims: [2, 2, 2],
            spacing_mm: [1.0; 3],
            scalar_type: ScalarType::Uint8,
            data_offset_bytes: 0,
            endian: Endian::Little,
        };
        assert!(matches!(
            load_volume("/nonexistent/volume.raw", &meta),
            Err(VolumeError::Io(_))
        ));
    }

    #[test]
    fn big_endian_float_decodes() {
        let vals = [1.5f32, -2.0, 0.25];
        let bytes: Vec<u8> = vals.iter().flat_map(|v| v.to_be_bytes()).collect();
        assert_eq!(decode_scalars(&bytes, ScalarType::Float32, Endian::Big), vals);
    }

    #[test]
    fn landmarks_outside_grid_rejected() {
        let mut v = Volume3D::from_voxels("v", [4, 4, 4], [1.0; 3], vec![0.0; 64]).unwrap();
        let mut lm = BTreeMap::new();
        lm.insert("A".to_string(), [3.0, 0.0, 1.5]);
        v.set_landmarks(lm.clone()).unwrap();
        lm.insert("B".to_string(), [3.01, 0.0, 0.0]);
        assert!(matches!(
            v.set_landmarks(lm),
            Err(VolumeError::LandmarkOutOfBounds { .. })
        ));
    }
}
