//! Objective terms over one window's `K` decoded samples.
//!
//! Every sample is a full padded-length output `(T_p + T_f) × V × 3` in
//! the window's centered coordinates. Each `*_backward` adds
//! `scale · dL/dsample` into `grads`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Frame layout shared by every sample.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Frames {
    pub t_past: usize,
    pub t_future: usize,
    pub joints: usize,
}

impl Frames {
    fn width(&self) -> usize {
        self.joints * 3
    }

    fn past_len(&self) -> usize {
        self.t_past * self.width()
    }

    fn future<'a>(&self, sample: &'a [f64]) -> &'a [f64] {
        &sample[self.past_len()..]
    }
}

/// Weight of the past-part term relative to the future term.
pub const PAST_WEIGHT: f64 = 0.1;

/// Weight of the seam term inside the constraint loss.
pub const SEAM_WEIGHT: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Reconstruction {
    /// Sample with the lowest future error (lowest index on ties).
    pub best: usize,
    pub future: f64,
    pub past: f64,
}

impl Reconstruction {
    pub fn value(&self) -> f64 {
        self.future + PAST_WEIGHT * self.past
    }
}

fn mse(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.len() as f64
}

/// Best-of-K squared error against the ground-truth `past` and `future`.
pub fn reconstruction(samples: &[Vec<f64>], past: &[f64], future: &[f64], frames: Frames) -> Reconstruction {
    let mut best = 0;
    let mut best_err = f64::INFINITY;
    for (k, s) in samples.iter().enumerate() {
        let err = mse(frames.future(s), future);
        if err < best_err {
            best = k;
            best_err = err;
        }
    }
    Reconstruction {
        best,
        future: best_err,
        past: mse(&samples[best][..frames.past_len()], past),
    }
}

pub fn reconstruction_backward(
    samples: &[Vec<f64>],
    past: &[f64],
    future: &[f64],
    frames: Frames,
    rec: &Reconstruction,
    scale: f64,
    grads: &mut [Vec<f64>],
) {
    let s = &samples[rec.best];
    let g = &mut grads[rec.best];
    let np = frames.past_len();
    let cp = scale * PAST_WEIGHT * 2.0 / np as f64;
    for i in 0..np {
        g[i] += cp * (s[i] - past[i]);
    }
    let cf = scale * 2.0 / future.len() as f64;
    for (i, y) in future.iter().enumerate() {
        g[np + i] += cf * (s[np + i] - y);
    }
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn check_pairs(samples: &[Vec<f64>]) -> Result<f64> {
    let k = samples.len();
    if k < 2 {
        return Err(Error::Config(format!("diversity needs at least 2 samples, got {k}")));
    }
    Ok(2.0 / (k * (k - 1)) as f64)
}

/// Mean of `exp(-‖Ŷi − Ŷj‖ / alpha)` over unordered pairs of future parts.
pub fn diversity(samples: &[Vec<f64>], alpha: f64, frames: Frames) -> Result<f64> {
    let coef = check_pairs(samples)?;
    let mut sum = 0.0;
    for i in 0..samples.len() {
        for j in i + 1..samples.len() {
            sum += (-distance(frames.future(&samples[i]), frames.future(&samples[j])) / alpha).exp();
        }
    }
    Ok(coef * sum)
}

/// Coincident pairs contribute a zero subgradient.
pub fn diversity_backward(
    samples: &[Vec<f64>],
    alpha: f64,
    frames: Frames,
    scale: f64,
    grads: &mut [Vec<f64>],
) -> Result<()> {
    let coef = check_pairs(samples)?;
    let np = frames.past_len();
    for i in 0..samples.len() {
        for j in i + 1..samples.len() {
            let (a, b) = (frames.future(&samples[i]), frames.future(&samples[j]));
            let d = distance(a, b);
            if d == 0.0 {
                continue;
            }
            let c = -scale * coef * (-d / alpha).exp() / (alpha * d);
            for t in 0..a.len() {
                let diff = c * (a[t] - b[t]);
                grads[i][np + t] += diff;
                grads[j][np + t] -= diff;
            }
        }
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Constraint {
    /// Mean squared bone-length deviation over samples, future frames and bones.
    pub bones: f64,
    /// Mean squared jump between the last observed pose and the first
    /// predicted one.
    pub seam: f64,
}

impl Constraint {
    pub fn value(&self) -> f64 {
        self.bones + SEAM_WEIGHT * self.seam
    }
}

fn bone_length(frame: &[f64], child: usize, parent: usize) -> f64 {
    distance(&frame[child * 3..child * 3 + 3], &frame[parent * 3..parent * 3 + 3])
}

/// `bones` are `(child, parent)` pairs; `last_past` is the last observed
/// frame (`V × 3`).
pub fn constraint(samples: &[Vec<f64>], last_past: &[f64], bones: &[(usize, usize)], frames: Frames) -> Constraint {
    let w = frames.width();
    let reference: Vec<f64> = bones.iter().map(|&(c, p)| bone_length(last_past, c, p)).collect();
    let mut bone_sum = 0.0;
    let mut seam_sum = 0.0;
    for s in samples {
        let fut = frames.future(s);
        for frame in fut.chunks(w) {
            for (&(c, p), l0) in bones.iter().zip(&reference) {
                let d = bone_length(frame, c, p) - l0;
                bone_sum += d * d;
            }
        }
        seam_sum += distance(&fut[..w], last_past).powi(2);
    }
    let k = samples.len() as f64;
    let bone_terms = (frames.t_future * bones.len()) as f64 * k;
    Constraint {
        bones: if bones.is_empty() { 0.0 } else { bone_sum / bone_terms },
        seam: seam_sum / k,
    }
}

pub fn constraint_backward(
    samples: &[Vec<f64>],
    last_past: &[f64],
    bones: &[(usize, usize)],
    frames: Frames,
    scale: f64,
    grads: &mut [Vec<f64>],
) {
    let w = frames.width();
    let np = frames.past_len();
    let k = samples.len() as f64;
    let reference: Vec<f64> = bones.iter().map(|&(c, p)| bone_length(last_past, c, p)).collect();
    let cb = if bones.is_empty() {
        0.0
    } else {
        scale * 2.0 / ((frames.t_future * bones.len()) as f64 * k)
    };
    let cs = scale * SEAM_WEIGHT * 2.0 / k;
    for (s, g) in samples.iter().zip(grads.iter_mut()) {
        for t in 0..frames.t_future {
            let off = np + t * w;
            let frame = &s[off..off + w];
            for (&(c, p), l0) in bones.iter().zip(&reference) {
                let l = bone_length(frame, c, p);
                if l == 0.0 {
                    continue;
                }
                let f = cb * (l - l0) / l;
                for a in 0..3 {
                    let d = f * (frame[c * 3 + a] - frame[p * 3 + a]);
                    g[off + c * 3 + a] += d;
                    g[off + p * 3 + a] -= d;
                }
            }
        }
        for i in 0..w {
            g[np + i] += cs * (s[np + i] - last_past[i]);
        }
    }
}

/// Per-term breakdown of the objective.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossTerms {
    pub loss_r: f64,
    pub loss_d: f64,
    pub loss_c: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossWeights {
    pub lambda_r: f64,
    pub lambda_d: f64,
    pub lambda_c: f64,
}

pub fn total_loss(terms: &LossTerms, weights: &LossWeights) -> f64 {
    weights.lambda_r * terms.loss_r + weights.lambda_d * terms.loss_d + weights.lambda_c * terms.loss_c
}
