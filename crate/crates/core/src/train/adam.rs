use crate::error::{Error, Result};
use crate::net::{group_of, ModelParams, OptimizerMoments};

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-8;

/// Step-decayed learning rate: flat for the first 100 epochs, then linear
/// down to zero at epoch 500.
pub fn lr_schedule(epoch: usize, lr0: f64) -> f64 {
    let decay = epoch.saturating_sub(100) as f64 / 400.0;
    (lr0 * (1.0 - decay)).max(0.0)
}

/// Adam moments, one tensor per parameter tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub step: u64,
    pub first: ModelParams,
    pub second: ModelParams,
}

impl AdamState {
    pub fn new(params: &ModelParams) -> Self {
        Self {
            step: 0,
            first: params.zeros_like(),
            second: params.zeros_like(),
        }
    }

    pub fn from_moments(m: OptimizerMoments) -> Self {
        Self {
            step: m.step,
            first: m.first,
            second: m.second,
        }
    }

    pub fn to_moments(&self) -> OptimizerMoments {
        OptimizerMoments {
            step: self.step,
            first: self.first.clone(),
            second: self.second.clone(),
        }
    }
}

/// Bias-corrected Adam update. Leaves everything untouched and names the
/// first offending parameter group if any gradient is non-finite.
pub fn adam_step(params: &mut ModelParams, state: &mut AdamState, grads: &ModelParams, lr: f64) -> Result<()> {
    let mut bad: Vec<(String, usize)> = Vec::new();
    for (name, g) in grads.named_tensors() {
        let count = g.data().iter().filter(|x| !x.is_finite()).count();
        if count > 0 {
            let group = group_of(&name).to_string();
            match bad.iter_mut().find(|(n, _)| *n == group) {
                Some((_, c)) => *c += count,
                None => bad.push((group, count)),
            }
        }
    }
    if let Some((group, count)) = bad.into_iter().next() {
        return Err(Error::NonFiniteGradient { group, count });
    }

    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - BETA1.powi(t);
    let c2 = 1.0 - BETA2.powi(t);
    let grads = grads.named_tensors();
    let firsts = state.first.named_tensors_mut();
    let seconds = state.second.named_tensors_mut();
    for ((((_, p), (_, g)), (_, m)), (_, v)) in params.named_tensors_mut().into_iter().zip(grads).zip(firsts).zip(seconds) {
        for (((p, &g), m), v) in p
            .data_mut()
            .iter_mut()
            .zip(g.data())
            .zip(m.data_mut())
            .zip(v.data_mut())
        {
            *m = BETA1 * *m + (1.0 - BETA1) * g;
            *v = BETA2 * *v + (1.0 - BETA2) * g * g;
            *p -= lr * (*m / c1) / ((*v / c2).sqrt() + EPSILON);
        }
    }
    Ok(())
}
