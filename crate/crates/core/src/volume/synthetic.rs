//! Deterministic synthetic volumes standing in for annotated scans.
//!
//! A *family* fixes where landmarks sit relative to each other and what each
//! one looks like; every volume of the family applies one rigid shift to the
//! whole arrangement (anatomy included) plus a small per-landmark jitter.
//! Each landmark is an anisotropic Gaussian blob with a ridge through it whose
//! orientation is particular to the landmark, on top of a smooth head-like
//! envelope and smoothed noise.

use serde::{Deserialize, Serialize};

use super::{normalize_min_max, Result, Volume3D, VolumeError};
use crate::rng::{hash_str, mix_seed, Rng};

pub const MIN_SYNTHETIC_DIM: usize = 32;
pub const MAX_LANDMARKS: usize = 8;

/// Rigid shift bound as a fraction of the smallest dimension.
const RIGID_SHIFT_FRACTION: f64 = 0.06;
const JITTER_VOXELS: f64 = 1.0;
const NOISE_STD: f64 = 0.06;
const NOISE_SMOOTH_SIGMA: f64 = 1.5;
const HEAD_LEVEL: f64 = 0.25;
const HEAD_RADIUS_FRACTION: f64 = 0.45;
const BLOB_AMPLITUDE: f64 = 1.0;
const RIDGE_AMPLITUDE: f64 = 0.5;
/// Ridge half-length (Gaussian σ along the ridge) in units of the blob σ.
const RIDGE_LENGTH: f64 = 4.0;
const RIDGE_WIDTH: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LandmarkSpec {
    pub name: String,
    /// Blob standard deviation in voxels.
    pub sigma: f64,
}

impl LandmarkSpec {
    pub fn new(name: impl Into<String>, sigma: f64) -> Self {
        Self {
            name: name.into(),
            sigma,
        }
    }
}

struct LandmarkStyle {
    base: [f64; 3],
    anisotropy: [f64; 3],
    ridge_dir: [f64; 3],
}

/// Generate a volume in the family implied by the landmark list itself, so
/// every call with the same `spec` shares one landmark arrangement.
pub fn generate_synthetic_volume(seed: u64, dims: [usize; 3], spec: &[LandmarkSpec]) -> Result<Volume3D> {
    let family = spec
        .iter()
        .fold(0x5EED_u64, |h, l| mix_seed(&[h, hash_str(&l.name), l.sigma.to_bits()]));
    generate_synthetic_volume_in_family(family, seed, dims, spec)
}

pub fn generate_synthetic_volume_in_family(
    family_seed: u64,
    seed: u64,
    dims: [usize; 3],
    spec: &[LandmarkSpec],
) -> Result<Volume3D> {
    if dims.iter().any(|&d| d < MIN_SYNTHETIC_DIM) {
        return Err(VolumeError::InvalidDims(dims));
    }
    if spec.is_empty() {
        return Err(VolumeError::NoLandmarks);
    }
    if spec.len() > MAX_LANDMARKS {
        return Err(VolumeError::TooManyLandmarks(spec.len()));
    }

    let extent: [f64; 3] = dims.map(|d| (d - 1) as f64);
    let inner_lo = extent.map(|e| 0.2 * e);
    let inner_hi = extent.map(|e| 0.8 * e);
    let shift_max = RIGID_SHIFT_FRACTION * *dims.iter().min().unwrap() as f64;
    let margin = shift_max + JITTER_VOXELS;

    let mut family = Rng::seed_from_u64(mix_seed(&[family_seed, 0xFA11]));
    let styles: Vec<LandmarkStyle> = spec
        .iter()
        .map(|_| {
            let base = std::array::from_fn(|a| family.uniform_range(inner_lo[a] + margin, inner_hi[a] - margin));
            let anisotropy = std::array::from_fn(|_| family.uniform_range(0.75, 1.25));
            let ridge_dir = unit_vector(&mut family);
            LandmarkStyle {
                base,
                anisotropy,
                ridge_dir,
            }
        })
        .collect();

    let mut rng = Rng::seed_from_u64(mix_seed(&[family_seed, seed]));
    let shift: [f64; 3] = std::array::from_fn(|_| rng.uniform_range(-shift_max, shift_max));
    let positions: Vec<[f64; 3]> = styles
        .iter()
        .map(|s| {
            std::array::from_fn(|a| {
                let j = rng.uniform_range(-JITTER_VOXELS, JITTER_VOXELS);
                (s.base[a] + shift[a] + j).clamp(inner_lo[a], inner_hi[a])
            })
        })
        .collect();

    let n = dims.iter().product();
    let mut noise: Vec<f64> = (0..n).map(|_| rng.normal()).collect();
    let noise_scale = NOISE_STD / smooth_separable(&mut noise, dims, NOISE_SMOOTH_SIGMA);

    let center: [f64; 3] = std::array::from_fn(|a| 0.5 * extent[a] + shift[a]);
    let radii = extent.map(|e| HEAD_RADIUS_FRACTION * e);

    let mut values = vec![0f32; n];
    let mut idx = 0;
    for z in 0..dims[2] {
        for y in 0..dims[1] {
            for x in 0..dims[0] {
                let p = [x as f64, y as f64, z as f64];
                let rho = (0..3)
                    .map(|a| ((p[a] - center[a]) / radii[a]).powi(2))
                    .sum::<f64>()
                    .sqrt();
                let mut v = noise[idx] * noise_scale + HEAD_LEVEL / (1.0 + libm::exp((rho - 1.0) * 10.0));
                for ((style, pos), ls) in styles.iter().zip(&positions).zip(spec) {
                    v += landmark_intensity(p, *pos, style, ls.sigma);
                }
                values[idx] = v as f32;
                idx += 1;
            }
        }
    }
    normalize_min_max(&mut values);

    let mut vol = Volume3D::from_voxels(format!("synthetic_{seed}"), dims, [1.0; 3], values)?;
    vol.set_landmarks(
        spec.iter()
            .zip(positions)
            .map(|(ls, p)| (ls.name.clone(), p))
            .collect(),
    )?;
    Ok(vol)
}

fn landmark_intensity(p: [f64; 3], center: [f64; 3], style: &LandmarkStyle, sigma: f64) -> f64 {
    let d = [p[0] - center[0], p[1] - center[1], p[2] - center[2]];
    let blob_q: f64 = (0..3).map(|a| (d[a] / (sigma * style.anisotropy[a])).powi(2)).sum();
    let along = d[0] * style.ridge_dir[0] + d[1] * style.ridge_dir[1] + d[2] * style.ridge_dir[2];
    let r2 = d[0] * d[0] + d[1] * d[1] + d[2] * d[2];
    let perp2 = (r2 - along * along).max(0.0);
    let w = RIDGE_WIDTH * sigma;
    let l = RIDGE_LENGTH * sigma;
    let ridge_q = perp2 / (w * w) + along * along / (l * l);
    let mut v = 0.0;
    if blob_q < 60.0 {
        v += BLOB_AMPLITUDE * libm::exp(-0.5 * blob_q);
    }
    if ridge_q < 60.0 {
        v += RIDGE_AMPLITUDE * libm::exp(-0.5 * ridge_q);
    }
    v
}

fn unit_vector(rng: &mut Rng) -> [f64; 3] {
    loop {
        let v = [rng.normal(), rng.normal(), rng.normal()];
        let norm = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if norm > 1e-6 {
            return v.map(|c| c / norm);
        }
    }
}

/// Separable Gaussian blur with zero padding. Returns the standard deviation
/// the blur leaves on unit white noise, `(Σ k²)^(3/2)`.
fn smooth_separable(data: &mut [f64], dims: [usize; 3], sigma: f64) -> f64 {
    let radius = (3.0 * sigma).ceil() as i64;
    let mut kernel: Vec<f64> = (-radius..=radius)
        .map(|i| libm::exp(-0.5 * (i as f64 / sigma).powi(2)))
        .collect();
    let total: f64 = kernel.iter().sum();
    kernel.iter_mut().for_each(|k| *k /= total);
    let stride = [1, dims[0], dims[0] * dims[1]];
    let mut line = Vec::new();
    for axis in 0..3 {
        let len = dims[axis];
        let (o1, o2) = match axis {
            0 => (1, 2),
            1 => (0, 2),
            _ => (0, 1),
        };
        for j in 0..dims[o2] {
            for i in 0..dims[o1] {
                let start = i * stride[o1] + j * stride[o2];
                line.clear();
                line.extend((0..len).map(|t| data[start + t * stride[axis]]));
                for t in 0..len {
                    let mut acc = 0.0;
                    for (ki, k) in kernel.iter().enumerate() {
                        let s = t as i64 + ki as i64 - radius;
                        if s >= 0 && (s as usize) < len {
                            acc += k * line[s as usize];
                        }
                    }
                    data[start + t * stride[axis]] = acc;
                }
            }
        }
    }
    kernel.iter().map(|k| k * k).sum::<f64>().powf(1.5)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec3() -> Vec<LandmarkSpec> {
        vec![
            LandmarkSpec::new("AC", 3.0),
            LandmarkSpec::new("PC", 3.0),
            LandmarkSpec::new("SCC", 3.0),
        ]
    }

    #[test]
    fn deterministic() {
        let a = generate_synthetic_volume(4, [40, 36, 32], &spec3()).unwrap();
        let b = generate_synthetic_volume(4, [40, 36, 32], &spec3()).unwrap();
        let bits = |v: &Volume3D| v.voxels.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));
        assert_eq!(a.landmarks, b.landmarks);
        let c = generate_synthetic_volume(5, [40, 36, 32], &spec3()).unwrap();
        assert_ne!(bits(&a), bits(&c));
    }

    #[test]
    fn landmark_center_brighter_than_mean() {
        for seed in 0..5 {
            let v = generate_synthetic_volume(seed, [48, 48, 48], &spec3()).unwrap();
            // Independent mean by a direct pass over every coordinate.
            let mut sum = 0.0f64;
            for z in 0..48 {
                for y in 0..48 {
                    for x in 0..48 {
                        sum += v.get(x, y, z) as f64;
                    }
                }
            }
            let mean = sum / (48.0 * 48.0 * 48.0);
            for p in v.landmarks.values() {
                let c = p.map(|c| c.round() as usize);
                assert!(v.get(c[0], c[1], c[2]) as f64 > mean);
            }
        }
    }

    #[test]
    fn landmarks_in_inner_sixty_percent() {
        for seed in 0..20 {
            let v = generate_synthetic_volume(seed, [64, 50, 32], &spec3()).unwrap();
            for p in v.landmarks.values() {
                for a in 0..3 {
                    let e = (v.dims()[a] - 1) as f64;
                    assert!(p[a] >= 0.2 * e && p[a] <= 0.8 * e, "{p:?}");
                }
            }
        }
    }

    #[test]
    fn landmarks_move_rigidly_within_family() {
        let a = generate_synthetic_volume(1, [64; 3], &spec3()).unwrap();
        let b = generate_synthetic_volume(2, [64; 3], &spec3()).unwrap();
        // Pairwise offsets agree up to twice the jitter bound per axis.
        let off = |v: &Volume3D, m: &str, n: &str| -> [f64; 3] {
            let (p, q) = (v.landmarks[m], v.landmarks[n]);
            [q[0] - p[0], q[1] - p[1], q[2] - p[2]]
        };
        for (m, n) in [("AC", "PC"), ("PC", "SCC")] {
            let (oa, ob) = (off(&a, m, n), off(&b, m, n));
            for i in 0..3 {
                assert!((oa[i] - ob[i]).abs() <= 4.0 * JITTER_VOXELS + 1e-9);
            }
        }
    }

    #[test]
    fn intensities_span_unit_interval() {
        let v = generate_synthetic_volume(0, [32; 3], &spec3()).unwrap();
        let lo = v.voxels.iter().cloned().fold(f32::INFINITY, f32::min);
        let hi = v.voxels.iter().cloned().fold(f32::NEG_INFINITY, f32::max);
        assert_eq!((lo, hi), (0.0, 1.0));
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(matches!(
            generate_synthetic_volume(0, [31, 64, 64], &spec3()),
            Err(VolumeError::InvalidDims(_))
        ));
        let nine: Vec<_> = (0..9).map(|i| LandmarkSpec::new(format!("L{i}"), 2.0)).collect();
        assert!(matches!(
            generate_synthetic_volume(0, [32; 3], &nine),
            Err(VolumeError::TooManyLandmarks(9))
        ));
        assert!(matches!(generate_synthetic_volume(0, [32; 3], &[]), Err(VolumeError::NoLandmarks)));
    }

    #[test]
    fn smoothing_std_matches_formula() {
        let dims = [24, 24, 24];
        let mut rng = Rng::seed_from_u64(0);
        let mut data: Vec<f64> = (0..24 * 24 * 24).map(|_| rng.normal()).collect();
        let predicted = smooth_separable(&mut data, dims, 1.5);
        // Measure on the interior where padding does not reach.
        let mut vals = Vec::new();
        for z in 6..18 {
            for y in 6..18 {
                for x in 6..18 {
                    vals.push(data[x + 24 * (y + 24 * z)]);
                }
            }
        }
        let m = vals.iter().sum::<f64>() / vals.len() as f64;
        let sd = (vals.iter().map(|v| (v - m).powi(2)).sum::<f64>() / vals.len() as f64).sqrt();
        assert!((sd / predicted - 1.0).abs() < 0.25, "sd {sd} predicted {predicted}");
    }
}
