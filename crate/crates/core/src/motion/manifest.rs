use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{build_multimodal_index, make_windows, NamedSequence, PoseSequence, WindowDataset};
use crate::error::{Error, Result};

fn default_threshold() -> f64 {
    0.5
}

/// Dataset manifest: motion files (relative to the manifest's directory)
/// plus the window parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub files: Vec<String>,
    pub t_past: usize,
    pub t_future: usize,
    pub stride: usize,
    #[serde(default = "default_threshold")]
    pub multimodal_threshold: f64,
}

impl Manifest {
    pub fn from_json_slice(bytes: &[u8]) -> Result<Self> {
        let m: Manifest = serde_json::from_slice(bytes).map_err(|e| Error::schema_json(&e))?;
        if m.t_past == 0 || m.t_future == 0 || m.stride == 0 {
            return Err(Error::Schema("t_past, t_future and stride must be positive".into()));
        }
        if m.multimodal_threshold.is_nan() || m.multimodal_threshold <= 0.0 {
            return Err(Error::Schema("multimodal_threshold must be positive".into()));
        }
        Ok(m)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<LoadedManifest> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        let manifest = Self::from_json_slice(&bytes)
            .map_err(|e| Error::Schema(format!("{}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(LoadedManifest { manifest, base })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json_string()).map_err(|e| Error::io(path, e))
    }
}

#[derive(Clone, Debug)]
pub struct LoadedManifest {
    pub manifest: Manifest,
    pub base: PathBuf,
}

impl LoadedManifest {
    pub fn load_sequences(&self) -> Result<Vec<NamedSequence>> {
        self.manifest
            .files
            .iter()
            .map(|f| {
                Ok(NamedSequence {
                    id: f.clone(),
                    sequence: PoseSequence::load(self.base.join(f))?,
                })
            })
            .collect()
    }

    /// All windows, grouped for multimodal evaluation.
    pub fn dataset(&self) -> Result<WindowDataset> {
        let m = &self.manifest;
        let ds = make_windows(&self.load_sequences()?, m.t_past, m.t_future, m.stride)?;
        build_multimodal_index(&ds, m.multimodal_threshold)
    }
}
