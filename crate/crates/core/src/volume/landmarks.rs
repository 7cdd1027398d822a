use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::Result;

/// Landmark sidecar: `{"volume_id": str, "landmarks": {"<name>": [x, y, z]}}`
/// with real-valued voxel coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LandmarkFile {
    pub volume_id: String,
    pub landmarks: BTreeMap<String, [f64; 3]>,
}

pub fn read_landmarks(path: impl AsRef<Path>) -> Result<LandmarkFile> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

pub fn write_landmarks(path: impl AsRef<Path>, file: &LandmarkFile) -> Result<()> {
    let text = serde_json::to_string_pretty(file)?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_documented_shape() {
        let text = r#"{"volume_id": "subj01", "landmarks": {"AC": [10.5, 20.0, 31.25], "PC": [1, 2, 3]}}"#;
        let f: LandmarkFile = serde_json::from_str(text).unwrap();
        assert_eq!(f.volume_id, "subj01");
        assert_eq!(f.landmarks["AC"], [10.5, 20.0, 31.25]);
        assert_eq!(f.landmarks["PC"], [1.0, 2.0, 3.0]);
    }

    #[test]
    fn write_then_read() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("l.json");
        let mut lm = BTreeMap::new();
        lm.insert("X".to_string(), [0.1, 0.2, 0.3]);
        let f = LandmarkFile {
            volume_id: "v".into(),
            landmarks: lm,
        };
        write_landmarks(&p, &f).unwrap();
        assert_eq!(read_landmarks(&p).unwrap(), f);
    }
}
