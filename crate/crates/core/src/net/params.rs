use super::layers::{GraphBlock, Linear};
use super::{AblationMode, Profile};
use crate::error::Result;
use crate::latent::{LatentDirections, MotionQuerySet, Qlp};
use crate::numkit::{Rng, Tensor};

pub const GRAPH_BLOCKS: usize = 2;

/// Every learnable tensor of the generator.
///
/// The same struct doubles as the gradient and Adam-moment container; see
/// [`ModelParams::zeros_like`].
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    pub encoder: Vec<GraphBlock>,
    /// Pooled encoder channels to the past feature.
    pub encoder_out: Linear,
    /// Absent in [`AblationMode::Mq`].
    pub qlp: Option<Qlp>,
    /// Absent in [`AblationMode::Mq`].
    pub directions: Option<LatentDirections>,
    pub queries: MotionQuerySet,
    /// `[feature; latent]` to the decoder's initial `V × 3N` state.
    pub fusion: Linear,
    pub decoder: Vec<GraphBlock>,
}

/// Width of the latent input the decoder receives in `mode`.
pub fn latent_width(profile: &Profile, mode: AblationMode) -> usize {
    match mode {
        AblationMode::MqSld => 2 * profile.c_latent,
        AblationMode::Mq | AblationMode::Full => profile.c_latent,
    }
}

fn qlp_inputs(profile: &Profile, mode: AblationMode) -> usize {
    match mode {
        AblationMode::Full => 2 * profile.c_latent,
        _ => profile.c_latent,
    }
}

impl ModelParams {
    pub fn init(profile: &Profile, mode: AblationMode, k: usize, rng: &mut Rng) -> Result<Self> {
        profile.validate()?;
        let links = profile.skeleton()?.adjacency_with_self();
        let (v, ch, c) = (profile.joints(), profile.channels(), profile.c_latent);
        let encoder = (0..GRAPH_BLOCKS)
            .map(|_| GraphBlock::new(rng, &links, ch, 0.5))
            .collect();
        let encoder_out = Linear::random(rng, ch, c, 1.0);
        let (qlp, directions) = if mode.uses_directions() {
            (
                Some(Qlp::new(rng, qlp_inputs(profile, mode), c, profile.m_dirs)),
                Some(LatentDirections::random(rng, profile.m_dirs, c)?),
            )
        } else {
            (None, None)
        };
        let queries = MotionQuerySet::random(rng, k, c)?;
        let fusion = Linear::random(rng, c + latent_width(profile, mode), v * ch, 0.1);
        let decoder = (0..GRAPH_BLOCKS)
            .map(|_| GraphBlock::new(rng, &links, ch, 0.1))
            .collect();
        Ok(Self {
            encoder,
            encoder_out,
            qlp,
            directions,
            queries,
            fusion,
            decoder,
        })
    }

    /// Same structure, all zeros. Used for gradients and optimizer moments.
    pub fn zeros_like(&self) -> Self {
        let mut out = self.clone();
        for (_, t) in out.named_tensors_mut() {
            t.data_mut().fill(0.0);
        }
        out
    }

    /// Tensors in their fixed declaration order (checkpoint block order).
    pub fn named_tensors(&self) -> Vec<(String, &Tensor)> {
        let mut out: Vec<(String, &Tensor)> = Vec::new();
        for (i, b) in self.encoder.iter().enumerate() {
            out.push((format!("encoder.{i}.adjacency"), &b.adjacency));
            out.push((format!("encoder.{i}.weight"), &b.weight));
            out.push((format!("encoder.{i}.bias"), &b.bias));
        }
        out.push(("encoder.out.weight".into(), &self.encoder_out.weight));
        out.push(("encoder.out.bias".into(), &self.encoder_out.bias));
        if let Some(q) = &self.qlp {
            for (name, l) in [("hidden", &q.hidden), ("residual", &q.residual), ("output", &q.output)] {
                out.push((format!("qlp.{name}.weight"), &l.weight));
                out.push((format!("qlp.{name}.bias"), &l.bias));
            }
        }
        if let Some(d) = &self.directions {
            out.push(("directions".into(), &d.raw));
        }
        out.push(("queries".into(), &self.queries.queries));
        out.push(("fusion.weight".into(), &self.fusion.weight));
        out.push(("fusion.bias".into(), &self.fusion.bias));
        for (i, b) in self.decoder.iter().enumerate() {
            out.push((format!("decoder.{i}.adjacency"), &b.adjacency));
            out.push((format!("decoder.{i}.weight"), &b.weight));
            out.push((format!("decoder.{i}.bias"), &b.bias));
        }
        out
    }

    pub fn named_tensors_mut(&mut self) -> Vec<(String, &mut Tensor)> {
        let mut out: Vec<(String, &mut Tensor)> = Vec::new();
        for (i, b) in self.encoder.iter_mut().enumerate() {
            out.push((format!("encoder.{i}.adjacency"), &mut b.adjacency));
            out.push((format!("encoder.{i}.weight"), &mut b.weight));
            out.push((format!("encoder.{i}.bias"), &mut b.bias));
        }
        out.push(("encoder.out.weight".into(), &mut self.encoder_out.weight));
        out.push(("encoder.out.bias".into(), &mut self.encoder_out.bias));
        if let Some(q) = &mut self.qlp {
            for (name, l) in [
                ("hidden", &mut q.hidden),
                ("residual", &mut q.residual),
                ("output", &mut q.output),
            ] {
                out.push((format!("qlp.{name}.weight"), &mut l.weight));
                out.push((format!("qlp.{name}.bias"), &mut l.bias));
            }
        }
        if let Some(d) = &mut self.directions {
            out.push(("directions".into(), &mut d.raw));
        }
        out.push(("queries".into(), &mut self.queries.queries));
        out.push(("fusion.weight".into(), &mut self.fusion.weight));
        out.push(("fusion.bias".into(), &mut self.fusion.bias));
        for (i, b) in self.decoder.iter_mut().enumerate() {
            out.push((format!("decoder.{i}.adjacency"), &mut b.adjacency));
            out.push((format!("decoder.{i}.weight"), &mut b.weight));
            out.push((format!("decoder.{i}.bias"), &mut b.bias));
        }
        out
    }

    pub fn parameter_count(&self) -> usize {
        self.named_tensors().iter().map(|(_, t)| t.len()).sum()
    }

    /// `self += alpha * other`, tensor by tensor.
    pub fn add_scaled(&mut self, alpha: f64, other: &ModelParams) -> Result<()> {
        let theirs = other.named_tensors();
        for ((_, mine), (_, t)) in self.named_tensors_mut().into_iter().zip(theirs) {
            mine.axpy(alpha, t)?;
        }
        Ok(())
    }

    pub fn scale(&mut self, s: f64) {
        for (_, t) in self.named_tensors_mut() {
            t.data_mut().iter_mut().for_each(|x| *x *= s);
        }
    }
}

/// Names and shapes [`ModelParams::init`] produces, computed without
/// allocating the tensors.
pub fn layout(profile: &Profile, mode: AblationMode, k: usize) -> Vec<(String, Vec<usize>)> {
    let (v, ch, c, m) = (profile.joints(), profile.channels(), profile.c_latent, profile.m_dirs);
    let mut out = Vec::new();
    let mut push = |name: String, shape: &[usize]| out.push((name, shape.to_vec()));
    let block = |push: &mut dyn FnMut(String, &[usize]), prefix: &str| {
        for i in 0..GRAPH_BLOCKS {
            push(format!("{prefix}.{i}.adjacency"), &[v, v]);
            push(format!("{prefix}.{i}.weight"), &[ch, ch]);
            push(format!("{prefix}.{i}.bias"), &[ch]);
        }
    };
    block(&mut push, "encoder");
    push("encoder.out.weight".into(), &[c, ch]);
    push("encoder.out.bias".into(), &[c]);
    if mode.uses_directions() {
        let q = qlp_inputs(profile, mode);
        for (name, inputs, outputs) in [("hidden", q, c), ("residual", c, c), ("output", c, m)] {
            push(format!("qlp.{name}.weight"), &[outputs, inputs]);
            push(format!("qlp.{name}.bias"), &[outputs]);
        }
        push("directions".into(), &[m, c]);
    }
    push("queries".into(), &[k, c]);
    push("fusion.weight".into(), &[v * ch, c + latent_width(profile, mode)]);
    push("fusion.bias".into(), &[v * ch]);
    block(&mut push, "decoder");
    out
}

/// Parameter group of a tensor name: `encoder`, `qlp`, `directions`,
/// `queries`, `fusion` or `decoder`.
pub fn group_of(name: &str) -> &str {
    name.split('.').next().unwrap_or(name)
}
