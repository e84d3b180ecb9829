use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::motion::Skeleton;

const MAX_JOINTS: usize = 256;
const MAX_FRAMES: usize = 1024;
const MAX_WIDTH: usize = 4096;

/// Geometry and latent sizes of a model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Profile {
    pub name: String,
    pub parents: Vec<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub joint_names: Option<Vec<String>>,
    pub fps: u32,
    pub t_past: usize,
    pub t_future: usize,
    /// Retained DCT rows.
    pub n_freq: usize,
    /// Number of latent directions.
    pub m_dirs: usize,
    /// Latent (and feature, and query) width.
    pub c_latent: usize,
}

impl Profile {
    fn from_skeleton(name: &str, sk: &Skeleton, fps: u32, sizes: [usize; 5]) -> Self {
        let [t_past, t_future, n_freq, m_dirs, c_latent] = sizes;
        Self {
            name: name.to_string(),
            parents: sk.parent_indices(),
            joint_names: sk.joint_names().map(<[String]>::to_vec),
            fps,
            t_past,
            t_future,
            n_freq,
            m_dirs,
            c_latent,
        }
    }

    /// 17 joints, 25 past / 100 future frames.
    pub fn standard() -> Self {
        Self::from_skeleton("standard", &Skeleton::body17(), 50, [25, 100, 20, 10, 64])
    }

    /// 5 joints, 8 past / 16 future frames.
    pub fn tiny() -> Self {
        Self::from_skeleton("tiny", &Skeleton::tiny5(), 25, [8, 16, 8, 4, 16])
    }

    /// 2 joints, 4 frames in total; for gradient checks.
    pub fn micro() -> Self {
        Self::from_skeleton("micro", &Skeleton::pair(), 25, [2, 2, 3, 2, 4])
    }

    pub fn named(name: &str) -> Result<Self> {
        match name {
            "standard" => Ok(Self::standard()),
            "tiny" => Ok(Self::tiny()),
            "micro" => Ok(Self::micro()),
            other => Err(Error::Config(format!(
                "unknown profile `{other}` (expected standard, tiny or micro)"
            ))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.joints() > MAX_JOINTS || self.t_past > MAX_FRAMES || self.t_future > MAX_FRAMES || self.c_latent > MAX_WIDTH {
            return Err(Error::Config(format!(
                "profile exceeds supported sizes ({MAX_JOINTS} joints, {MAX_FRAMES} frames per side, width {MAX_WIDTH})"
            )));
        }
        self.skeleton()?;
        let total = self.total_length();
        if self.t_past == 0 || self.t_future == 0 || total < 2 {
            return Err(Error::Config("t_past and t_future must be positive".into()));
        }
        if self.n_freq == 0 || self.n_freq > total {
            return Err(Error::Config(format!(
                "n_freq {} must lie in 1..={total}",
                self.n_freq
            )));
        }
        if self.m_dirs == 0 || self.m_dirs > self.c_latent {
            return Err(Error::Config(format!(
                "m_dirs {} must lie in 1..=c_latent ({})",
                self.m_dirs, self.c_latent
            )));
        }
        Ok(())
    }

    pub fn skeleton(&self) -> Result<Skeleton> {
        Skeleton::from_parent_indices(&self.parents, self.joint_names.clone())
            .map_err(|e| Error::Config(format!("profile skeleton: {e}")))
    }

    pub fn joints(&self) -> usize {
        self.parents.len()
    }

    pub fn total_length(&self) -> usize {
        self.t_past + self.t_future
    }

    /// Channels per joint inside the graph blocks.
    pub fn channels(&self) -> usize {
        3 * self.n_freq
    }
}

/// Which parts of the latent pathway are active.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AblationMode {
    /// Queries go straight into the decoder; no latent directions.
    #[serde(rename = "MQ")]
    Mq,
    /// Coefficients come from the past feature alone; queries are appended
    /// to the latent code afterwards.
    #[serde(rename = "MQ+SLD")]
    MqSld,
    /// Queries are projected onto the latent directions.
    #[default]
    #[serde(rename = "MQ-P+SLD")]
    Full,
}

impl AblationMode {
    pub const ALL: [AblationMode; 3] = [AblationMode::Mq, AblationMode::MqSld, AblationMode::Full];

    pub fn as_str(self) -> &'static str {
        match self {
            AblationMode::Mq => "MQ",
            AblationMode::MqSld => "MQ+SLD",
            AblationMode::Full => "MQ-P+SLD",
        }
    }

    pub fn uses_directions(self) -> bool {
        !matches!(self, AblationMode::Mq)
    }
}

impl fmt::Display for AblationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AblationMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown ablation mode `{s}` (expected MQ, MQ+SLD or MQ-P+SLD)")))
    }
}
