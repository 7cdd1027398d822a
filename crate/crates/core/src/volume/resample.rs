use std::collections::BTreeMap;

use super::{Result, Volume3D};

/// Nearest-neighbour resampling to 1 mm isotropic voxels.
///
/// Output voxel `i` along an axis with spacing `s` takes source voxel
/// `round(i / s)`, clamped to the grid. Landmarks are scaled to the new grid.
/// Already-isotropic 1 mm volumes are returned unchanged.
pub fn resample_isotropic(volume: &Volume3D) -> Result<Volume3D> {
    if volume.meta.is_isotropic_1mm() {
        return Ok(volume.clone());
    }
    let spacing = volume.spacing();
    let src = volume.dims();
    let dims: [usize; 3] = std::array::from_fn(|a| (((src[a] - 1) as f64 * spacing[a]).round() as usize + 1).max(1));
    let lookup: [Vec<usize>; 3] = std::array::from_fn(|a| {
        (0..dims[a])
            .map(|i| ((i as f64 / spacing[a]).round() as usize).min(src[a] - 1))
            .collect()
    });
    let mut voxels = Vec::with_capacity(dims.iter().product());
    for &z in &lookup[2] {
        for &y in &lookup[1] {
            for &x in &lookup[0] {
                voxels.push(volume.get(x, y, z));
            }
        }
    }
    let mut out = Volume3D::from_voxels(volume.id.clone(), dims, [1.0; 3], voxels)?;
    let landmarks: BTreeMap<String, [f64; 3]> = volume
        .landmarks
        .iter()
        .map(|(k, p)| {
            let q: [f64; 3] = std::array::from_fn(|a| (p[a] * spacing[a]).clamp(0.0, (dims[a] - 1) as f64));
            (k.clone(), q)
        })
        .collect();
    out.set_landmarks(landmarks)?;
    Ok(out)
}
