use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::params::{layout, ModelParams};
use super::{AblationMode, Model, Profile};
use crate::error::{Error, Result};
use crate::numkit::Tensor;

const MAGIC: &[u8; 8] = b"SLDCKPT\x01";
const FORMAT_VERSION: u32 = 1;
const MAX_HEADER: u64 = 1 << 24;

/// Adam moments saved alongside the parameters so training can resume.
#[derive(Clone, Debug, PartialEq)]
pub struct OptimizerMoments {
    pub step: u64,
    pub first: ModelParams,
    pub second: ModelParams,
}

/// A trained (or partially trained) model plus the bookkeeping needed to
/// resume or audit it.
#[derive(Clone, Debug)]
pub struct Checkpoint {
    pub model: Model,
    pub seed: u64,
    /// Completed epochs.
    pub epoch: usize,
    /// Training configuration, stored verbatim.
    pub config: serde_json::Value,
    pub optimizer: Option<OptimizerMoments>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    format_version: u32,
    profile: Profile,
    ablation_mode: AblationMode,
    k: usize,
    seed: u64,
    epoch: usize,
    config: serde_json::Value,
    blocks: Vec<BlockInfo>,
    optimizer_step: Option<u64>,
    /// SHA-256 of every byte after the header.
    checksum: String,
}

#[derive(Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BlockInfo {
    name: String,
    shape: Vec<usize>,
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Checkpoint(msg.into())
}

fn write_params(out: &mut Vec<u8>, p: &ModelParams) {
    for (_, t) in p.named_tensors() {
        for x in t.data() {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
}

fn read_params(template: &ModelParams, data: &mut &[u8]) -> Result<ModelParams> {
    let mut p = template.clone();
    for (name, t) in p.named_tensors_mut() {
        for x in t.data_mut() {
            let (head, rest) = data.split_at(8);
            *x = f64::from_le_bytes(head.try_into().expect("8 bytes"));
            if !x.is_finite() {
                return Err(bad(format!("non-finite value in block `{name}`")));
            }
            *data = rest;
        }
    }
    Ok(p)
}

impl Checkpoint {
    pub fn profile(&self) -> &Profile {
        self.model.profile()
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let params = self.model.params();
        let mut data = Vec::with_capacity(8 * params.parameter_count());
        write_params(&mut data, params);
        if let Some(opt) = &self.optimizer {
            write_params(&mut data, &opt.first);
            write_params(&mut data, &opt.second);
        }
        let header = Header {
            format_version: FORMAT_VERSION,
            profile: self.model.profile().clone(),
            ablation_mode: self.model.mode(),
            k: self.model.k(),
            seed: self.seed,
            epoch: self.epoch,
            config: self.config.clone(),
            blocks: params
                .named_tensors()
                .into_iter()
                .map(|(name, t)| BlockInfo {
                    name,
                    shape: t.shape().to_vec(),
                })
                .collect(),
            optimizer_step: self.optimizer.as_ref().map(|o| o.step),
            checksum: hex::encode(Sha256::digest(&data)),
        };
        let header = serde_json::to_vec(&header).map_err(|e| bad(e.to_string()))?;
        let mut out = Vec::with_capacity(16 + header.len() + data.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(header.len() as u64).to_le_bytes());
        out.extend_from_slice(&header);
        out.extend_from_slice(&data);
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 16 || &bytes[..8] != MAGIC {
            return Err(bad("not a checkpoint file (bad magic)"));
        }
        let header_len = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes"));
        if header_len > MAX_HEADER || header_len > (bytes.len() - 16) as u64 {
            return Err(bad(format!("header length {header_len} exceeds file size")));
        }
        let (header, mut data) = bytes[16..].split_at(header_len as usize);
        let header: Header = serde_json::from_slice(header).map_err(|e| bad(format!("header: {e}")))?;
        if header.format_version != FORMAT_VERSION {
            return Err(bad(format!("unsupported format version {}", header.format_version)));
        }
        header.profile.validate()?;
        if header.k < 2 {
            return Err(bad(format!("k must be at least 2, got {}", header.k)));
        }
        let expected = layout(&header.profile, header.ablation_mode, header.k);
        let declared: Vec<(String, Vec<usize>)> = header.blocks.iter().map(|b| (b.name.clone(), b.shape.clone())).collect();
        if declared != expected {
            return Err(Error::Geometry(format!(
                "checkpoint blocks do not match profile `{}` in mode {}",
                header.profile.name, header.ablation_mode
            )));
        }
        let count = expected
            .iter()
            .try_fold(0usize, |acc, (_, s)| s.iter().try_fold(1usize, |p, &d| p.checked_mul(d)).and_then(|n| acc.checked_add(n)))
            .ok_or_else(|| bad("parameter count overflows"))?;
        let copies = if header.optimizer_step.is_some() { 3 } else { 1 };
        let expected_len = count.checked_mul(8 * copies).ok_or_else(|| bad("parameter count overflows"))?;
        if data.len() != expected_len {
            return Err(bad(format!(
                "expected {expected_len} parameter bytes, found {}",
                data.len()
            )));
        }
        if hex::encode(Sha256::digest(data)) != header.checksum {
            return Err(bad("checksum mismatch"));
        }

        let template = template_params(&header.profile, header.ablation_mode, header.k)?;
        let params = read_params(&template, &mut data)?;
        let optimizer = match header.optimizer_step {
            Some(step) => Some(OptimizerMoments {
                step,
                first: read_params(&template, &mut data)?,
                second: read_params(&template, &mut data)?,
            }),
            None => None,
        };
        let model = Model::new(header.profile, header.ablation_mode, params)?;
        if let Some(d) = &model.params().directions {
            d.effective().map_err(|e| bad(format!("stored directions: {e}")))?;
        }
        Ok(Self {
            model,
            seed: header.seed,
            epoch: header.epoch,
            config: header.config,
            optimizer,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }

    /// Writes to a sibling temporary file, then renames over `path`.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let bytes = self.to_bytes()?;
        let mut tmp_name = path.file_name().unwrap_or_default().to_os_string();
        tmp_name.push(format!(".tmp{}", std::process::id()));
        let tmp = path.with_file_name(tmp_name);
        let write = || -> std::io::Result<()> {
            let mut f = fs::File::create(&tmp)?;
            f.write_all(&bytes)?;
            f.sync_all()?;
            fs::rename(&tmp, path)
        };
        write().map_err(|e| {
            let _ = fs::remove_file(&tmp);
            Error::io(path, e)
        })
    }
}

/// Zero parameters with the right structure. Directions get a placeholder
/// identity so the template is valid; every value is overwritten on load.
fn template_params(profile: &Profile, mode: AblationMode, k: usize) -> Result<ModelParams> {
    use super::layers::{GraphBlock, Linear};
    use crate::latent::{LatentDirections, MotionQuerySet, Qlp};
    let (v, ch, c, m) = (profile.joints(), profile.channels(), profile.c_latent, profile.m_dirs);
    let block = || GraphBlock {
        adjacency: Tensor::zeros(&[v, v]),
        weight: Tensor::zeros(&[ch, ch]),
        bias: Tensor::zeros(&[ch]),
    };
    let lw = super::latent_width(profile, mode);
    let (qlp, directions) = if mode.uses_directions() {
        let inputs = if mode == AblationMode::Full { 2 * c } else { c };
        (
            Some(Qlp {
                hidden: Linear::zeros(inputs, c),
                residual: Linear::zeros(c, c),
                output: Linear::zeros(c, m),
            }),
            Some(LatentDirections::new(Tensor::from_fn(&[m, c], |i| {
                if i / c == i % c {
                    1.0
                } else {
                    0.0
                }
            }))?),
        )
    } else {
        (None, None)
    };
    Ok(ModelParams {
        encoder: (0..super::GRAPH_BLOCKS).map(|_| block()).collect(),
        encoder_out: Linear::zeros(ch, c),
        qlp,
        directions,
        queries: MotionQuerySet::new(Tensor::from_fn(&[k, c], |i| i as f64))?,
        fusion: Linear::zeros(c + lw, v * ch),
        decoder: (0..super::GRAPH_BLOCKS).map(|_| block()).collect(),
    })
}
