//! On-disk corpus layout.
//!
//! A dataset directory holds, per volume, `<stem>.raw3d` (or `<stem>.nii`)
//! next to a `<stem>.json` landmark sidecar, plus a `split.json` manifest.
//! Without a manifest the split is recomputed from the sorted ids.

use std::path::{Path, PathBuf};

use cmarl_core::volume::{
    generate_synthetic_volume_in_family, load_nifti, load_raw3d, read_landmarks, resample_isotropic,
    split_dataset, write_landmarks, write_raw3d, DatasetSplit, LandmarkFile,
};
use cmarl_core::{Volume3D, VolumeError};
use thiserror::Error;

use crate::config::RunConfig;

pub const SPLIT_FILE: &str = "split.json";

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{path}: {source}")]
    Volume { path: PathBuf, source: VolumeError },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Manifest { path: PathBuf, source: serde_json::Error },
    #[error("no volume file next to landmark file {0}")]
    MissingVolume(PathBuf),
    #[error("split lists unknown volume {0}")]
    UnknownVolume(String),
    #[error("dataset.synthetic section is required to generate a corpus")]
    NoSyntheticSection,
    #[error("dataset split: {0}")]
    Split(VolumeError),
}

pub type Result<T, E = DatasetError> = std::result::Result<T, E>;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DatasetError + '_ {
    move |source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn vol_err(path: &Path) -> impl FnOnce(VolumeError) -> DatasetError + '_ {
    move |source| DatasetError::Volume {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub split: DatasetSplit,
    pub train: Vec<Volume3D>,
    pub validation: Vec<Volume3D>,
    pub test: Vec<Volume3D>,
}

/// Write the synthetic corpus described by `cfg.dataset`. Returns the files
/// written, manifest last.
pub fn generate(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let syn = cfg.dataset.synthetic.as_ref().ok_or(DatasetError::NoSyntheticSection)?;
    let dir = &cfg.dataset.dir;
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut written = Vec::with_capacity(2 * syn.n_volumes + 1);
    let mut ids = Vec::with_capacity(syn.n_volumes);
    for i in 0..syn.n_volumes {
        let mut vol = generate_synthetic_volume_in_family(syn.seed, i as u64, syn.dims, &syn.landmarks)
            .map_err(vol_err(dir))?;
        vol.id = format!("vol_{i:03}");
        let raw = dir.join(format!("{}.raw3d", vol.id));
        write_raw3d(&raw, &vol).map_err(vol_err(&raw))?;
        let json = dir.join(format!("{}.json", vol.id));
        let sidecar = LandmarkFile {
            volume_id: vol.id.clone(),
            landmarks: vol.landmarks.clone(),
        };
        write_landmarks(&json, &sidecar).map_err(vol_err(&json))?;
        written.extend([raw, json]);
        ids.push(vol.id);
    }
    let split = split_dataset(&ids, cfg.dataset.split_seed).map_err(DatasetError::Split)?;
    let manifest = dir.join(SPLIT_FILE);
    let text = serde_json::to_string_pretty(&split).expect("split serializes");
    std::fs::write(&manifest, text + "\n").map_err(io_err(&manifest))?;
    written.push(manifest);
    Ok(written)
}

/// Volume stems in the directory, sorted: every `*.json` except the manifest.
fn annotated_stems(dir: &Path) -> Result<Vec<String>> {
    let mut stems = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(io_err(dir))? {
        let path = entry.map_err(io_err(dir))?.path();
        if path.extension().is_some_and(|e| e == "json") && path.file_name().is_some_and(|n| n != SPLIT_FILE) {
            stems.push(path.file_stem().unwrap().to_string_lossy().into_owned());
        }
    }
    stems.sort();
    Ok(stems)
}

/// Load one annotated volume, resampled to 1 mm isotropic.
pub fn load_volume(dir: &Path, stem: &str) -> Result<Volume3D> {
    let json = dir.join(format!("{stem}.json"));
    let sidecar = read_landmarks(&json).map_err(vol_err(&json))?;
    let raw = dir.join(format!("{stem}.raw3d"));
    let nii = dir.join(format!("{stem}.nii"));
    let (path, mut vol) = if raw.is_file() {
        let v = load_raw3d(&raw).map_err(vol_err(&raw))?;
        (raw, v)
    } else if nii.is_file() {
        let v = load_nifti(&nii).map_err(vol_err(&nii))?;
        (nii, v)
    } else {
        return Err(DatasetError::MissingVolume(json));
    };
    vol.id = sidecar.volume_id;
    vol.set_landmarks(sidecar.landmarks).map_err(vol_err(&path))?;
    resample_isotropic(&vol).map_err(vol_err(&path))
}

fn read_split(dir: &Path, stems: &[String], seed: u64) -> Result<DatasetSplit> {
    let manifest = dir.join(SPLIT_FILE);
    if manifest.is_file() {
        let text = std::fs::read_to_string(&manifest).map_err(io_err(&manifest))?;
        serde_json::from_str(&text).map_err(|source| DatasetError::Manifest { path: manifest, source })
    } else {
        split_dataset(stems, seed).map_err(DatasetError::Split)
    }
}

/// Load every split of the dataset. Split entries name file stems.
pub fn load(cfg: &RunConfig) -> Result<Dataset> {
    let dir = &cfg.dataset.dir;
    let stems = annotated_stems(dir)?;
    let split = read_split(dir, &stems, cfg.dataset.split_seed)?;
    let load_set = |ids: &[String]| -> Result<Vec<Volume3D>> {
        ids.iter()
            .map(|id| {
                if !stems.contains(id) {
                    return Err(DatasetError::UnknownVolume(id.clone()));
                }
                load_volume(dir, id)
            })
            .collect()
    };
    Ok(Dataset {
        train: load_set(&split.train)?,
        validation: load_set(&split.validation)?,
        test: load_set(&split.test)?,
        split,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::SyntheticConfig;
    use cmarl_core::volume::LandmarkSpec;

    fn cfg(dir: &Path, n: usize) -> RunConfig {
        let mut cfg = RunConfig::from_toml(
            "[env]\nroi_size = 9\n[net]\nroi_size = 9\n[dataset]\ndir = \"d\"\n[experiment]\nlandmarks = [\"A\"]\n",
        )
        .unwrap();
        cfg.dataset.dir = dir.to_path_buf();
        cfg.dataset.synthetic = Some(SyntheticConfig {
            n_volumes: n,
            dims: [32; 3],
            seed: 5,
            landmarks: vec![LandmarkSpec::new("A", 2.0), LandmarkSpec::new("B", 2.0)],
        });
        cfg
    }

    #[test]
    fn generated_corpus_loads_back_identically() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = cfg(dir.path(), 5);
        let files = generate(&cfg).unwrap();
        assert_eq!(files.len(), 11);
        let ds = load(&cfg).unwrap();
        assert_eq!(ds.split.len(), 5);
        let syn = cfg.dataset.synthetic.as_ref().unwrap();
        for v in ds.train.iter().chain(&ds.validation).chain(&ds.test) {
            let i: u64 = v.id.trim_start_matches("vol_").parse().unwrap();
            let fresh = generate_synthetic_volume_in_family(syn.seed, i, syn.dims, &syn.landmarks).unwrap();
            assert_eq!(v.voxels, fresh.voxels);
            assert_eq!(v.landmarks, fresh.landmarks);
        }
    }

    #[test]
    fn split_is_recomputed_without_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = cfg(dir.path(), 4);
        generate(&cfg).unwrap();
        let with = load(&cfg).unwrap().split;
        std::fs::remove_file(dir.path().join(SPLIT_FILE)).unwrap();
        let without = load(&cfg).unwrap().split;
        assert_eq!(with, without);
    }

    #[test]
    fn missing_volume_file_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = cfg(dir.path(), 3);
        generate(&cfg).unwrap();
        std::fs::remove_file(dir.path().join("vol_001.raw3d")).unwrap();
        assert!(matches!(load(&cfg), Err(DatasetError::MissingVolume(_))));
    }
}
