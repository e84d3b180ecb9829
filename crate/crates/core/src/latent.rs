//! Orthogonal latent directions, motion queries, the query-to-latent
//! projection (QLP) and coefficient editing.
//!
//! A latent code is `z = Σ_m w_m d_m` where the `d_m` are the rows of the
//! orthonormalized direction matrix. Because the rows are orthonormal,
//! editing coefficients by `δ` moves `z` by exactly `‖δ‖`.

use crate::error::{Error, Result};
use crate::net::layers::Linear;
use crate::numkit::{orthonormalize, orthonormalize_cached, GramSchmidtCache, Rng, Tensor};

/// Learnable `M × C` direction matrix; the effective directions are its
/// orthonormalized rows, recomputed from `raw` whenever they are needed.
#[derive(Clone, Debug, PartialEq)]
pub struct LatentDirections {
    pub(crate) raw: Tensor,
}

impl LatentDirections {
    pub fn new(raw: Tensor) -> Result<Self> {
        orthonormalize(&raw)?;
        Ok(Self { raw })
    }

    pub fn random(rng: &mut Rng, m: usize, c: usize) -> Result<Self> {
        Self::new(rng.gaussian(&[m, c]))
    }

    pub fn raw(&self) -> &Tensor {
        &self.raw
    }

    pub fn count(&self) -> usize {
        self.raw.rows()
    }

    pub fn width(&self) -> usize {
        self.raw.cols()
    }

    pub fn effective(&self) -> Result<Tensor> {
        effective_directions(self)
    }

    pub(crate) fn effective_cached(&self) -> Result<GramSchmidtCache> {
        orthonormalize_cached(&self.raw)
    }
}

pub fn effective_directions(d: &LatentDirections) -> Result<Tensor> {
    orthonormalize(&d.raw)
}

/// `K × C_q` learnable motion queries.
#[derive(Clone, Debug, PartialEq)]
pub struct MotionQuerySet {
    pub(crate) queries: Tensor,
}

impl MotionQuerySet {
    pub fn new(queries: Tensor) -> Result<Self> {
        if queries.rank() != 2 || queries.rows() < 2 {
            return Err(Error::Argument(format!(
                "motion queries need shape K×C with K >= 2, got {:?}",
                queries.shape()
            )));
        }
        Ok(Self { queries })
    }

    pub fn random(rng: &mut Rng, k: usize, width: usize) -> Result<Self> {
        Self::new(rng.gaussian(&[k, width]))
    }

    pub fn len(&self) -> usize {
        self.queries.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.queries.rows() == 0
    }

    pub fn width(&self) -> usize {
        self.queries.cols()
    }

    pub fn query(&self, k: usize) -> &[f64] {
        self.queries.row(k)
    }

    pub fn tensor(&self) -> &Tensor {
        &self.queries
    }
}

/// Per-sample coefficients over the latent directions, `K × M`.
#[derive(Clone, Debug, PartialEq)]
pub struct Coefficients {
    pub values: Tensor,
}

impl Coefficients {
    pub fn new(values: Tensor) -> Result<Self> {
        if values.rank() != 2 {
            return Err(Error::Dimension {
                op: "coefficients",
                left: vec![0, 0],
                right: values.shape().to_vec(),
            });
        }
        Ok(Self { values })
    }

    pub fn samples(&self) -> usize {
        self.values.rows()
    }

    pub fn directions(&self) -> usize {
        self.values.cols()
    }

    pub fn row(&self, k: usize) -> &[f64] {
        self.values.row(k)
    }
}

/// `z = wᵀ · directions`.
pub fn combine(w: &[f64], directions: &Tensor) -> Result<Vec<f64>> {
    if directions.rank() != 2 || directions.rows() != w.len() {
        return Err(Error::Dimension {
            op: "combine",
            left: vec![w.len()],
            right: directions.shape().to_vec(),
        });
    }
    let mut z = vec![0.0; directions.cols()];
    for (m, &wm) in w.iter().enumerate() {
        for (zc, dc) in z.iter_mut().zip(directions.row(m)) {
            *zc += wm * dc;
        }
    }
    Ok(z)
}

/// Gradients of [`combine`]: accumulates into `grad_dirs` and returns `dL/dw`.
pub(crate) fn combine_backward(w: &[f64], directions: &Tensor, gz: &[f64], grad_dirs: &mut Tensor) -> Vec<f64> {
    let c = directions.cols();
    for (m, &wm) in w.iter().enumerate() {
        for (g, gzc) in grad_dirs.data_mut()[m * c..(m + 1) * c].iter_mut().zip(gz) {
            *g += wm * gzc;
        }
    }
    (0..w.len())
        .map(|m| directions.row(m).iter().zip(gz).map(|(d, g)| d * g).sum())
        .collect()
}

/// Copy of `base` with `deltas` added to row `sample_index`.
pub fn edit_coefficients(base: &Coefficients, sample_index: usize, deltas: &[f64]) -> Result<Coefficients> {
    if sample_index >= base.samples() {
        return Err(Error::Argument(format!(
            "sample index {sample_index} out of range for {} samples",
            base.samples()
        )));
    }
    if deltas.len() != base.directions() {
        return Err(Error::Argument(format!(
            "expected {} deltas, got {}",
            base.directions(),
            deltas.len()
        )));
    }
    let mut out = base.clone();
    for (v, d) in out.values.row_mut(sample_index).iter_mut().zip(deltas) {
        *v += d;
    }
    Ok(out)
}

/// Query-to-latent projection: three fully connected layers,
/// `h1 = tanh(W1 x + b1)`, `h2 = tanh(W2 h1 + b2) + h1`, `w = W3 h2 + b3`.
/// The output layer starts at zero so every query initially yields `b3`.
#[derive(Clone, Debug, PartialEq)]
pub struct Qlp {
    pub hidden: Linear,
    pub residual: Linear,
    pub output: Linear,
}

#[derive(Clone, Debug)]
pub struct QlpCache {
    input: Vec<f64>,
    h1: Vec<f64>,
    t2: Vec<f64>,
    h2: Vec<f64>,
}

impl Qlp {
    pub fn new(rng: &mut Rng, inputs: usize, width: usize, outputs: usize) -> Self {
        Self {
            hidden: Linear::random(rng, inputs, width, 1.0),
            residual: Linear::random(rng, width, width, 1.0),
            output: Linear::zeros(width, outputs),
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            hidden: Linear::zeros(self.hidden.inputs(), self.hidden.outputs()),
            residual: Linear::zeros(self.residual.inputs(), self.residual.outputs()),
            output: Linear::zeros(self.output.inputs(), self.output.outputs()),
        }
    }

    pub fn forward(&self, input: &[f64]) -> (Vec<f64>, QlpCache) {
        let h1: Vec<f64> = self.hidden.forward(input).into_iter().map(f64::tanh).collect();
        let t2: Vec<f64> = self.residual.forward(&h1).into_iter().map(f64::tanh).collect();
        let h2: Vec<f64> = t2.iter().zip(&h1).map(|(a, b)| a + b).collect();
        let w = self.output.forward(&h2);
        (
            w,
            QlpCache {
                input: input.to_vec(),
                h1,
                t2,
                h2,
            },
        )
    }

    /// Returns `dL/dinput`.
    pub fn backward(&self, cache: &QlpCache, gw: &[f64], grad: &mut Qlp) -> Vec<f64> {
        let gh2 = self.output.backward(&cache.h2, gw, &mut grad.output);
        let ga2: Vec<f64> = gh2.iter().zip(&cache.t2).map(|(g, t)| g * (1.0 - t * t)).collect();
        let mut gh1 = self.residual.backward(&cache.h1, &ga2, &mut grad.residual);
        for (a, b) in gh1.iter_mut().zip(&gh2) {
            *a += b;
        }
        let ga1: Vec<f64> = gh1.iter().zip(&cache.h1).map(|(g, h)| g * (1.0 - h * h)).collect();
        self.hidden.backward(&cache.input, &ga1, &mut grad.hidden)
    }
}

/// Coefficients for one query given the pooled past feature.
pub fn qlp_project(past_feature: &[f64], query: &[f64], qlp: &Qlp) -> Vec<f64> {
    let input: Vec<f64> = past_feature.iter().chain(query).copied().collect();
    qlp.forward(&input).0
}
