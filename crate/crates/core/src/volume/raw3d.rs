//! RAW3D: the crate's own uncompressed volume container.
//!
//! Layout, all little-endian:
//!
//! | offset | size | field                                   |
//! |-------:|-----:|-----------------------------------------|
//! | 0      | 16   | magic `CMRLRAW3D` padded with NULs      |
//! | 16     | 12   | dims, 3 × u32                           |
//! | 28     | 12   | spacing in mm, 3 × f32                  |
//! | 40     | 2    | scalar type as NIfTI code, i16 (16)     |
//! | 42     | 2    | reserved, zero                          |
//! | 44     | 8    | data offset in bytes, u64 (52)          |
//! | 52     | …    | voxels, f32, x fastest                  |

use std::path::Path;

use super::{load_volume, Endian, Result, ScalarType, Volume3D, VolumeError, VolumeMeta};

pub const RAW3D_MAGIC: &[u8; 16] = b"CMRLRAW3D\0\0\0\0\0\0\0";
pub const RAW3D_HEADER_SIZE: usize = 52;

pub fn parse_raw3d_header(bytes: &[u8]) -> Result<VolumeMeta> {
    if bytes.len() < RAW3D_HEADER_SIZE {
        return Err(VolumeError::TruncatedFile {
            expected: RAW3D_HEADER_SIZE as u64,
            actual: bytes.len() as u64,
        });
    }
    if &bytes[..16] != RAW3D_MAGIC {
        return Err(VolumeError::MalformedHeader("bad RAW3D magic".into()));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let f32_at = |o: usize| f32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let dims = [u32_at(16) as usize, u32_at(20) as usize, u32_at(24) as usize];
    let spacing_mm = [f32_at(28), f32_at(32), f32_at(36)];
    let scalar_type = ScalarType::from_nifti_code(i16::from_le_bytes([bytes[40], bytes[41]]))?;
    let data_offset_bytes = u64::from_le_bytes(bytes[44..52].try_into().unwrap());
    if data_offset_bytes < RAW3D_HEADER_SIZE as u64 {
        return Err(VolumeError::MalformedHeader(format!(
            "data offset {data_offset_bytes} inside header"
        )));
    }
    let meta = VolumeMeta {
        dims,
        spacing_mm,
        scalar_type,
        data_offset_bytes,
        endian: Endian::Little,
    };
    meta.validate()?;
    Ok(meta)
}

pub fn encode_raw3d(volume: &Volume3D) -> Vec<u8> {
    let mut out = Vec::with_capacity(RAW3D_HEADER_SIZE + 4 * volume.voxels.len());
    out.extend_from_slice(RAW3D_MAGIC);
    for d in volume.meta.dims {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for s in volume.meta.spacing_mm {
        out.extend_from_slice(&s.to_le_bytes());
    }
    out.extend_from_slice(&ScalarType::Float32.nifti_code().to_le_bytes());
    out.extend_from_slice(&[0, 0]);
    out.extend_from_slice(&(RAW3D_HEADER_SIZE as u64).to_le_bytes());
    for v in &volume.voxels {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn write_raw3d(path: impl AsRef<Path>, volume: &Volume3D) -> Result<()> {
    std::fs::write(path, encode_raw3d(volume))?;
    Ok(())
}

/// Read a RAW3D file. Voxels go through the same normalization as any other
/// load, which leaves already-normalized data untouched.
pub fn load_raw3d(path: impl AsRef<Path>) -> Result<Volume3D> {
    let path = path.as_ref();
    let mut header = [0u8; RAW3D_HEADER_SIZE];
    {
        use std::io::Read;
        let mut f = std::fs::File::open(path)?;
        let mut read = 0;
        while read < header.len() {
            match f.read(&mut header[read..])? {
                0 => break,
                n => read += n,
            }
        }
        if read < RAW3D_HEADER_SIZE {
            return Err(VolumeError::TruncatedFile {
                expected: RAW3D_HEADER_SIZE as u64,
                actual: read as u64,
            });
        }
    }
    let meta = parse_raw3d_header(&header)?;
    load_volume(path, &meta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volume::{generate_synthetic_volume, LandmarkSpec};

    #[test]
    fn synthetic_volume_round_trips_bitwise() {
        let spec = vec![LandmarkSpec::new("A", 3.0), LandmarkSpec::new("B", 2.0)];
        let vol = generate_synthetic_volume(11, [32, 34, 36], &spec).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("v.raw3d");
        write_raw3d(&path, &vol).unwrap();
        let back = load_raw3d(&path).unwrap();
        assert_eq!(back.meta.dims, vol.meta.dims);
        assert_eq!(back.meta.spacing_mm, vol.meta.spacing_mm);
        let a: Vec<u32> = vol.voxels.iter().map(|v| v.to_bits()).collect();
        let b: Vec<u32> = back.voxels.iter().map(|v| v.to_bits()).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn header_layout() {
        let vol = Volume3D::from_voxels("x", [2, 3, 4], [1.0, 1.0, 2.0], vec![0.5; 24]).unwrap();
        let bytes = encode_raw3d(&vol);
        assert_eq!(bytes.len(), RAW3D_HEADER_SIZE + 24 * 4);
        assert_eq!(&bytes[..9], b"CMRLRAW3D");
        assert_eq!(&bytes[16..20], &2u32.to_le_bytes());
        assert_eq!(&bytes[36..40], &2.0f32.to_le_bytes());
        assert_eq!(&bytes[40..42], &16i16.to_le_bytes());
        let meta = parse_raw3d_header(&bytes).unwrap();
        assert_eq!(meta.dims, [2, 3, 4]);
        assert_eq!(meta.data_offset_bytes, 52);
    }

    #[test]
    fn truncated_voxels_detected() {
        let vol = Volume3D::from_voxels("x", [2, 2, 2], [1.0; 3], vec![0.0; 8]).unwrap();
        let mut bytes = encode_raw3d(&vol);
        bytes.pop();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.raw3d");
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(load_raw3d(&path), Err(VolumeError::TruncatedFile { .. })));
    }

    #[test]
    fn bad_magic() {
        let vol = Volume3D::from_voxels("x", [2, 2, 2], [1.0; 3], vec![0.0; 8]).unwrap();
        let mut bytes = encode_raw3d(&vol);
        bytes[0] = b'X';
        assert!(matches!(parse_raw3d_header(&bytes), Err(VolumeError::MalformedHeader(_))));
    }
}
