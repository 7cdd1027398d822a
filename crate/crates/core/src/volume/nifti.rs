//! Minimal NIfTI-1 header reader: just enough to locate and interpret the
//! voxel block of a single-file `.nii` volume.

use super::{Endian, Result, ScalarType, VolumeError, VolumeMeta};

pub const NIFTI1_HEADER_SIZE: usize = 348;

const OFF_DIM: usize = 40;
const OFF_DATATYPE: usize = 70;
const OFF_PIXDIM: usize = 76;
const OFF_VOX_OFFSET: usize = 108;

struct Fields<'a> {
    bytes: &'a [u8],
    endian: Endian,
}

impl Fields<'_> {
    fn i16_at(&self, off: usize) -> i16 {
        let b = [self.bytes[off], self.bytes[off + 1]];
        match self.endian {
            Endian::Little => i16::from_le_bytes(b),
            Endian::Big => i16::from_be_bytes(b),
        }
    }

    fn f32_at(&self, off: usize) -> f32 {
        let b = [
            self.bytes[off],
            self.bytes[off + 1],
            self.bytes[off + 2],
            self.bytes[off + 3],
        ];
        match self.endian {
            Endian::Little => f32::from_le_bytes(b),
            Endian::Big => f32::from_be_bytes(b),
        }
    }
}

/// Parse the fixed 348-byte NIfTI-1 header. Byte order is detected from the
/// `sizeof_hdr` field.
pub fn parse_nifti_header(bytes: &[u8]) -> Result<VolumeMeta> {
    if bytes.len() < NIFTI1_HEADER_SIZE {
        return Err(VolumeError::MalformedHeader(format!(
            "header is {} bytes, need {NIFTI1_HEADER_SIZE}",
            bytes.len()
        )));
    }
    let raw = [bytes[0], bytes[1], bytes[2], bytes[3]];
    let endian = if i32::from_le_bytes(raw) == NIFTI1_HEADER_SIZE as i32 {
        Endian::Little
    } else if i32::from_be_bytes(raw) == NIFTI1_HEADER_SIZE as i32 {
        Endian::Big
    } else {
        return Err(VolumeError::MalformedHeader(format!(
            "sizeof_hdr is {} (LE) / {} (BE), expected 348",
            i32::from_le_bytes(raw),
            i32::from_be_bytes(raw)
        )));
    };
    let f = Fields { bytes, endian };

    let ndim = f.i16_at(OFF_DIM);
    if ndim != 3 {
        return Err(VolumeError::UnsupportedDimensionality(ndim));
    }
    let mut dims = [0usize; 3];
    for (i, d) in dims.iter_mut().enumerate() {
        let v = f.i16_at(OFF_DIM + 2 * (i + 1));
        if v < 1 {
            return Err(VolumeError::MalformedHeader(format!("dim[{}] = {v}", i + 1)));
        }
        *d = v as usize;
    }

    let scalar_type = ScalarType::from_nifti_code(f.i16_at(OFF_DATATYPE))?;

    let mut spacing_mm = [0f32; 3];
    for (i, s) in spacing_mm.iter_mut().enumerate() {
        let v = f.f32_at(OFF_PIXDIM + 4 * (i + 1)).abs();
        if !(v > 0.0) || !v.is_finite() {
            return Err(VolumeError::MalformedHeader(format!("pixdim[{}] = {v}", i + 1)));
        }
        *s = v;
    }

    let vox_offset = f.f32_at(OFF_VOX_OFFSET);
    if !vox_offset.is_finite() || vox_offset < NIFTI1_HEADER_SIZE as f32 || vox_offset.fract() != 0.0 {
        return Err(VolumeError::MalformedHeader(format!("vox_offset = {vox_offset}")));
    }

    Ok(VolumeMeta {
        dims,
        spacing_mm,
        scalar_type,
        data_offset_bytes: vox_offset as u64,
        endian,
    })
}

/// Encode a minimal single-file NIfTI-1 header (352 bytes including the
/// empty extension flag) describing `meta`. Only the fields read by
/// [`parse_nifti_header`] plus the magic are populated.
pub fn encode_nifti1_header(meta: &VolumeMeta) -> Vec<u8> {
    let big = meta.endian == Endian::Big;
    let mut h = vec![0u8; 352];
    let put = |h: &mut Vec<u8>, off: usize, le: &[u8], be: &[u8]| {
        h[off..off + le.len()].copy_from_slice(if big { be } else { le });
    };
    put(&mut h, 0, &348i32.to_le_bytes(), &348i32.to_be_bytes());
    let mut dim = [1i16; 8];
    dim[0] = 3;
    for i in 0..3 {
        dim[i + 1] = meta.dims[i] as i16;
    }
    for (i, d) in dim.iter().enumerate() {
        put(&mut h, OFF_DIM + 2 * i, &d.to_le_bytes(), &d.to_be_bytes());
    }
    let code = meta.scalar_type.nifti_code();
    put(&mut h, OFF_DATATYPE, &code.to_le_bytes(), &code.to_be_bytes());
    let bitpix = (meta.scalar_type.size_bytes() * 8) as i16;
    put(&mut h, OFF_DATATYPE + 2, &bitpix.to_le_bytes(), &bitpix.to_be_bytes());
    let mut pixdim = [1f32; 8];
    pixdim[1..4].copy_from_slice(&meta.spacing_mm);
    for (i, p) in pixdim.iter().enumerate() {
        put(&mut h, OFF_PIXDIM + 4 * i, &p.to_le_bytes(), &p.to_be_bytes());
    }
    let off = meta.data_offset_bytes as f32;
    put(&mut h, OFF_VOX_OFFSET, &off.to_le_bytes(), &off.to_be_bytes());
    h[344..348].copy_from_slice(b"n+1\0");
    h
}

/// Read a single-file `.nii` volume (header plus voxels).
pub fn load_nifti(path: impl AsRef<std::path::Path>) -> Result<super::Volume3D> {
    use std::io::Read;
    let path = path.as_ref();
    let mut header = vec![0u8; NIFTI1_HEADER_SIZE];
    let mut f = std::fs::File::open(path)?;
    let mut read = 0;
    while read < header.len() {
        match f.read(&mut header[read..])? {
            0 => break,
            n => read += n,
        }
    }
    header.truncate(read);
    let meta = parse_nifti_header(&header)?;
    super::load_volume(path, &meta)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Hand-assembled header; `big` selects byte order.
    pub(crate) fn header(big: bool, dim: [i16; 8], datatype: i16, pixdim: [f32; 8], vox_offset: f32) -> Vec<u8> {
        let mut h = vec![0u8; 352];
        let put16 = |h: &mut Vec<u8>, off: usize, v: i16| {
            let b = if big { v.to_be_bytes() } else { v.to_le_bytes() };
            h[off..off + 2].copy_from_slice(&b);
        };
        let put32 = |h: &mut Vec<u8>, off: usize, b: [u8; 4]| h[off..off + 4].copy_from_slice(&b);
        put32(&mut h, 0, if big { 348i32.to_be_bytes() } else { 348i32.to_le_bytes() });
        for (i, d) in dim.iter().enumerate() {
            put16(&mut h, OFF_DIM + 2 * i, *d);
        }
        put16(&mut h, OFF_DATATYPE, datatype);
        for (i, p) in pixdim.iter().enumerate() {
            put32(&mut h, OFF_PIXDIM + 4 * i, if big { p.to_be_bytes() } else { p.to_le_bytes() });
        }
        put32(
            &mut h,
            OFF_VOX_OFFSET,
            if big { vox_offset.to_be_bytes() } else { vox_offset.to_le_bytes() },
        );
        h[344..348].copy_from_slice(b"n+1\0");
        h
    }

    fn standard(big: bool) -> Vec<u8> {
        header(
            big,
            [3, 64, 64, 64, 1, 1, 1, 1],
            16,
            [1.0, 1.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0],
            352.0,
        )
    }

    #[test]
    fn little_endian_float_header() {
        let meta = parse_nifti_header(&standard(false)).unwrap();
        assert_eq!(meta.dims, [64, 64, 64]);
        assert_eq!(meta.spacing_mm, [1.0, 1.0, 1.0]);
        assert_eq!(meta.scalar_type, ScalarType::Float32);
        assert_eq!(meta.data_offset_bytes, 352);
        assert_eq!(meta.endian, Endian::Little);
    }

    #[test]
    fn byte_swapped_header_detected() {
        let bytes = standard(true);
        // Read natively the size field is 348 byte-swapped.
        assert_eq!(i32::from_le_bytes([bytes[0], bytes[1], bytes[2], bytes[3]]), 1_543_569_408);
        let meta = parse_nifti_header(&bytes).unwrap();
        assert_eq!(meta.endian, Endian::Big);
        let le = parse_nifti_header(&standard(false)).unwrap();
        assert_eq!(
            (meta.dims, meta.spacing_mm, meta.scalar_type, meta.data_offset_bytes),
            (le.dims, le.spacing_mm, le.scalar_type, le.data_offset_bytes)
        );
    }

    #[test]
    fn float64_is_unsupported() {
        let h = header(false, [3, 8, 8, 8, 1, 1, 1, 1], 64, [1.0; 8], 352.0);
        assert!(matches!(parse_nifti_header(&h), Err(VolumeError::UnsupportedDatatype(64))));
    }

    #[test]
    fn four_dimensional_is_rejected() {
        let h = header(false, [4, 8, 8, 8, 2, 1, 1, 1], 4, [1.0; 8], 352.0);
        assert!(matches!(
            parse_nifti_header(&h),
            Err(VolumeError::UnsupportedDimensionality(4))
        ));
    }

    #[test]
    fn bad_sizeof_hdr() {
        let mut h = standard(false);
        h[0] = 0x5d;
        assert!(matches!(parse_nifti_header(&h), Err(VolumeError::MalformedHeader(_))));
        assert!(matches!(parse_nifti_header(&h[..100]), Err(VolumeError::MalformedHeader(_))));
    }

    #[test]
    fn anisotropic_spacing_and_int16() {
        let h = header(true, [3, 10, 20, 30, 1, 1, 1, 1], 4, [1.0, 0.5, 2.0, 3.0, 0.0, 0.0, 0.0, 0.0], 400.0);
        let meta = parse_nifti_header(&h).unwrap();
        assert_eq!(meta.dims, [10, 20, 30]);
        assert_eq!(meta.spacing_mm, [0.5, 2.0, 3.0]);
        assert_eq!(meta.scalar_type, ScalarType::Int16);
        assert_eq!(meta.data_offset_bytes, 400);
    }

    #[test]
    fn encoded_header_parses_back() {
        for endian in [Endian::Little, Endian::Big] {
            let meta = VolumeMeta {
                dims: [7, 9, 11],
                spacing_mm: [0.5, 1.0, 2.5],
                scalar_type: ScalarType::Uint8,
                data_offset_bytes: 352,
                endian,
            };
            assert_eq!(parse_nifti_header(&encode_nifti1_header(&meta)).unwrap(), meta);
        }
    }

    proptest! {
        #[test]
        fn parse_is_total(bytes in proptest::collection::vec(any::<u8>(), 348)) {
            // Must return, never panic.
            let _ = parse_nifti_header(&bytes);
        }

        #[test]
        fn parse_is_total_with_valid_size_field(mut bytes in proptest::collection::vec(any::<u8>(), 348), big in any::<bool>()) {
            let sz = if big { 348i32.to_be_bytes() } else { 348i32.to_le_bytes() };
            bytes[..4].copy_from_slice(&sz);
            if let Ok(meta) = parse_nifti_header(&bytes) {
                prop_assert!(meta.dims.iter().all(|&d| d >= 1));
                prop_assert!(meta.spacing_mm.iter().all(|&s| s > 0.0));
                prop_assert!(meta.data_offset_bytes >= 348);
            }
        }
    }
}
