//! Sample-set metrics: diversity (APD), best-of-K accuracy (ADE, FDE) and
//! their multimodal variants.
//!
//! All inputs are `T_f × V × 3` future sequences in the same coordinate
//! frame; distances are in raw coordinate units.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::motion::{center_normalize, denormalize_sequence, zero_velocity_baseline, MotionWindow, PoseSequence, WindowDataset};
use crate::net::Model;

fn check_shapes(futures: &[PoseSequence], gt: &PoseSequence) -> Result<()> {
    if futures.is_empty() {
        return Err(Error::Argument("need at least one sample".into()));
    }
    for f in futures {
        if f.frames().shape() != gt.frames().shape() {
            return Err(Error::Dimension {
                op: "metric",
                left: f.frames().shape().to_vec(),
                right: gt.frames().shape().to_vec(),
            });
        }
    }
    Ok(())
}

fn l2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Mean L2 distance over ordered pairs of distinct samples, each sample
/// flattened.
pub fn apd(futures: &[PoseSequence]) -> Result<f64> {
    let k = futures.len();
    if k < 2 {
        return Err(Error::Argument(format!("APD needs at least 2 samples, got {k}")));
    }
    check_shapes(futures, &futures[0])?;
    let mut sum = 0.0;
    for i in 0..k {
        for j in i + 1..k {
            sum += 2.0 * l2(futures[i].frames().data(), futures[j].frames().data());
        }
    }
    Ok(sum / (k * (k - 1)) as f64)
}

fn frame_average_distance(a: &PoseSequence, b: &PoseSequence) -> f64 {
    let t = a.frame_count();
    (0..t).map(|f| l2(a.frame(f), b.frame(f))).sum::<f64>() / t as f64
}

/// Per-frame L2 distance averaged over frames, minimized over samples.
pub fn ade(futures: &[PoseSequence], gt: &PoseSequence) -> Result<f64> {
    check_shapes(futures, gt)?;
    Ok(futures
        .iter()
        .map(|f| frame_average_distance(f, gt))
        .fold(f64::INFINITY, f64::min))
}

/// L2 distance of the final frame, minimized over samples.
pub fn fde(futures: &[PoseSequence], gt: &PoseSequence) -> Result<f64> {
    check_shapes(futures, gt)?;
    let last = gt.frame_count() - 1;
    Ok(futures
        .iter()
        .map(|f| l2(f.frame(last), gt.frame(last)))
        .fold(f64::INFINITY, f64::min))
}

fn check_group(group: &[PoseSequence]) -> Result<()> {
    if group.is_empty() {
        return Err(Error::State("empty multimodal group".into()));
    }
    Ok(())
}

/// [`ade`] averaged over every ground truth in a multimodal group.
pub fn mmade(futures: &[PoseSequence], group: &[PoseSequence]) -> Result<f64> {
    check_group(group)?;
    let mut sum = 0.0;
    for gt in group {
        sum += ade(futures, gt)?;
    }
    Ok(sum / group.len() as f64)
}

/// [`fde`] averaged over every ground truth in a multimodal group.
pub fn mmfde(futures: &[PoseSequence], group: &[PoseSequence]) -> Result<f64> {
    check_group(group)?;
    let mut sum = 0.0;
    for gt in group {
        sum += fde(futures, gt)?;
    }
    Ok(sum / group.len() as f64)
}

/// How each number in a [`MetricsReport`] was computed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Conventions {
    pub ade: String,
    pub fde: String,
    pub apd: String,
    pub multimodal: String,
    pub units: String,
}

impl Default for Conventions {
    fn default() -> Self {
        Self {
            ade: "min over samples of the per-frame L2 joint-position distance averaged over future frames".into(),
            fde: "min over samples of the L2 distance of the final frame".into(),
            apd: "mean flattened L2 distance over ordered pairs of distinct samples".into(),
            multimodal: "ADE/FDE averaged over the window's multimodal ground-truth group, each future taken relative to its own window's last-past root".into(),
            units: "raw coordinate units".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub apd: f64,
    pub ade: f64,
    pub fde: f64,
    pub mmade: f64,
    pub mmfde: f64,
    pub windows: usize,
    pub k: usize,
    pub conventions: Conventions,
}

impl MetricsReport {
    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Averages all five metrics over `dataset`, with `predict` producing the
/// samples for a window (in the window's own coordinates).
pub fn evaluate_with<F>(dataset: &WindowDataset, predict: F) -> Result<MetricsReport>
where
    F: Fn(&MotionWindow) -> Result<Vec<PoseSequence>> + Sync,
{
    if dataset.is_empty() {
        return Err(Error::EmptyDataset("no windows to evaluate".into()));
    }
    if dataset.multimodal_index.len() != dataset.len() {
        return Err(Error::State("multimodal index does not cover the dataset".into()));
    }
    let centered: Vec<(MotionWindow, [f64; 3])> = dataset.windows.iter().map(center_normalize).collect();
    let rows: Vec<([f64; 5], usize)> = (0..dataset.len())
        .into_par_iter()
        .map(|i| {
            let (own, offset) = &centered[i];
            let inv = [-offset[0], -offset[1], -offset[2]];
            let samples: Vec<PoseSequence> = predict(&dataset.windows[i])?
                .iter()
                .map(|s| denormalize_sequence(s, inv))
                .collect();
            let group: Vec<PoseSequence> = dataset.multimodal_index[i]
                .iter()
                .map(|&j| {
                    centered
                        .get(j)
                        .map(|(w, _)| w.future.clone())
                        .ok_or_else(|| Error::State(format!("multimodal index refers to missing window {j}")))
                })
                .collect::<Result<_>>()?;
            let row = [
                apd(&samples)?,
                ade(&samples, &own.future)?,
                fde(&samples, &own.future)?,
                mmade(&samples, &group)?,
                mmfde(&samples, &group)?,
            ];
            Ok((row, samples.len()))
        })
        .collect::<Result<_>>()?;
    let n = rows.len() as f64;
    let mut sums = [0.0; 5];
    for (row, _) in &rows {
        for (s, v) in sums.iter_mut().zip(row) {
            *s += v;
        }
    }
    Ok(MetricsReport {
        apd: sums[0] / n,
        ade: sums[1] / n,
        fde: sums[2] / n,
        mmade: sums[3] / n,
        mmfde: sums[4] / n,
        windows: rows.len(),
        k: rows[0].1,
        conventions: Conventions::default(),
    })
}

/// Runs the model's `K` queries on every window.
pub fn evaluate(model: &Model, dataset: &WindowDataset) -> Result<MetricsReport> {
    let p = model.profile();
    if let Some(w) = dataset.windows.first() {
        if w.t_past() != p.t_past || w.t_future() != p.t_future || w.past.joint_count() != p.joints() {
            return Err(Error::Geometry(format!(
                "windows are {}+{} frames of {} joints; model profile `{}` needs {}+{} frames of {} joints",
                w.t_past(),
                w.t_future(),
                w.past.joint_count(),
                p.name,
                p.t_past,
                p.t_future,
                p.joints()
            )));
        }
    }
    evaluate_with(dataset, |w| Ok(model.predict_k(&w.past)?.futures))
}

/// Zero-velocity baseline repeated as `k` identical samples.
pub fn evaluate_baseline(dataset: &WindowDataset, k: usize) -> Result<MetricsReport> {
    evaluate_with(dataset, |w| Ok(vec![zero_velocity_baseline(w); k]))
}
