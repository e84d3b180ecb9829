use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::Skeleton;
use crate::error::{Error, Result};
use crate::numkit::Tensor;

/// A pose sequence: `frames` has shape `T × V × 3`.
#[derive(Clone, Debug, PartialEq)]
pub struct PoseSequence {
    skeleton: Skeleton,
    fps: u32,
    frames: Tensor,
}

/// On-disk motion file layout.
#[derive(Debug, Serialize, Deserialize)]
struct MotionFile {
    fps: u32,
    joint_count: usize,
    parents: Vec<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    joint_names: Option<Vec<String>>,
    frames: Vec<Vec<[f64; 3]>>,
}

impl PoseSequence {
    /// Validated constructor: at least one frame, finite values, and
    /// strictly positive bone lengths in every frame.
    pub fn new(skeleton: Skeleton, fps: u32, frames: Tensor) -> Result<Self> {
        let seq = Self::from_parts(skeleton, fps, frames)?;
        if seq.frame_count() == 0 {
            return Err(Error::Schema("sequence has no frames".into()));
        }
        if !seq.frames.all_finite() {
            return Err(Error::Schema("sequence contains non-finite coordinates".into()));
        }
        for t in 0..seq.frame_count() {
            if let Some((c, p)) = seq
                .skeleton
                .bones()
                .into_iter()
                .find(|&(c, p)| seq.distance(t, c, p) <= 0.0)
            {
                return Err(Error::Schema(format!(
                    "frame {t}: bone {p}->{c} has zero length"
                )));
            }
        }
        Ok(seq)
    }

    /// Shape-checked only; used for network outputs, which carry no
    /// bone-length guarantee.
    pub fn from_parts(skeleton: Skeleton, fps: u32, frames: Tensor) -> Result<Self> {
        let v = skeleton.joint_count();
        if frames.rank() != 3 || frames.shape()[1] != v || frames.shape()[2] != 3 {
            return Err(Error::Dimension {
                op: "pose sequence",
                left: vec![0, v, 3],
                right: frames.shape().to_vec(),
            });
        }
        Ok(Self {
            skeleton,
            fps,
            frames,
        })
    }

    pub fn skeleton(&self) -> &Skeleton {
        &self.skeleton
    }

    pub fn fps(&self) -> u32 {
        self.fps
    }

    pub fn frames(&self) -> &Tensor {
        &self.frames
    }

    pub fn frames_mut(&mut self) -> &mut Tensor {
        &mut self.frames
    }

    pub fn frame_count(&self) -> usize {
        self.frames.shape()[0]
    }

    pub fn joint_count(&self) -> usize {
        self.skeleton.joint_count()
    }

    /// Flat `V × 3` slice of frame `t`.
    pub fn frame(&self, t: usize) -> &[f64] {
        let w = self.joint_count() * 3;
        &self.frames.data()[t * w..(t + 1) * w]
    }

    pub fn joint(&self, t: usize, j: usize) -> [f64; 3] {
        let f = self.frame(t);
        [f[j * 3], f[j * 3 + 1], f[j * 3 + 2]]
    }

    fn distance(&self, t: usize, a: usize, b: usize) -> f64 {
        let (pa, pb) = (self.joint(t, a), self.joint(t, b));
        (0..3).map(|i| (pa[i] - pb[i]).powi(2)).sum::<f64>().sqrt()
    }

    /// Bone lengths of frame `t`, ordered as [`Skeleton::bones`].
    pub fn bone_lengths(&self, t: usize) -> Vec<f64> {
        self.skeleton
            .bones()
            .into_iter()
            .map(|(c, p)| self.distance(t, c, p))
            .collect()
    }

    /// Copy of frames `start..end`.
    pub fn slice(&self, start: usize, end: usize) -> Result<PoseSequence> {
        if start >= end || end > self.frame_count() {
            return Err(Error::Argument(format!(
                "frame range {start}..{end} invalid for {} frames",
                self.frame_count()
            )));
        }
        let w = self.joint_count() * 3;
        let data = self.frames.data()[start * w..end * w].to_vec();
        Ok(PoseSequence {
            skeleton: self.skeleton.clone(),
            fps: self.fps,
            frames: Tensor::new(&[end - start, self.joint_count(), 3], data)?,
        })
    }

    /// Frames as nested `T × V × [x, y, z]` arrays.
    pub fn to_nested(&self) -> Vec<Vec<[f64; 3]>> {
        (0..self.frame_count())
            .map(|t| (0..self.joint_count()).map(|j| self.joint(t, j)).collect())
            .collect()
    }

    /// Parses nested frames against a known skeleton.
    pub fn from_nested(skeleton: Skeleton, fps: u32, frames: &[Vec<[f64; 3]>]) -> Result<Self> {
        let v = skeleton.joint_count();
        if let Some((t, f)) = frames.iter().enumerate().find(|(_, f)| f.len() != v) {
            return Err(Error::Schema(format!(
                "frame {t} has {} joints, expected {v}",
                f.len()
            )));
        }
        let data: Vec<f64> = frames.iter().flatten().flatten().copied().collect();
        let tensor = Tensor::new(&[frames.len(), v, 3], data)?;
        Self::new(skeleton, fps, tensor)
    }

    pub fn from_json_slice(bytes: &[u8]) -> Result<Self> {
        let file: MotionFile = serde_json::from_slice(bytes).map_err(|e| Error::schema_json(&e))?;
        if file.parents.len() != file.joint_count {
            return Err(Error::Schema(format!(
                "parents has {} entries but joint_count is {}",
                file.parents.len(),
                file.joint_count
            )));
        }
        let skeleton = Skeleton::from_parent_indices(&file.parents, file.joint_names)?;
        Self::from_nested(skeleton, file.fps, &file.frames)
    }

    pub fn to_json_string(&self) -> String {
        let file = MotionFile {
            fps: self.fps,
            joint_count: self.joint_count(),
            parents: self.skeleton.parent_indices(),
            joint_names: self.skeleton.joint_names().map(<[String]>::to_vec),
            frames: self.to_nested(),
        };
        serde_json::to_string(&file).expect("motion file serializes")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_slice(&bytes).map_err(|e| match e {
            Error::Schema(msg) => Error::Schema(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json_string()).map_err(|e| Error::io(path, e))
    }
}
