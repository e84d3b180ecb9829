use super::PoseSequence;
use crate::error::{Error, Result};
use crate::numkit::Tensor;

/// A sequence with a provenance id (file path or generator index).
#[derive(Clone, Debug)]
pub struct NamedSequence {
    pub id: String,
    pub sequence: PoseSequence,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MotionWindow {
    pub past: PoseSequence,
    pub future: PoseSequence,
    pub source_id: String,
    /// Index of the first past frame in the source sequence.
    pub start: usize,
}

impl MotionWindow {
    pub fn t_past(&self) -> usize {
        self.past.frame_count()
    }

    pub fn t_future(&self) -> usize {
        self.future.frame_count()
    }

    pub fn last_past_frame(&self) -> &[f64] {
        self.past.frame(self.past.frame_count() - 1)
    }
}

/// Translation applied by [`center_normalize`].
pub type Offset = [f64; 3];

fn translate(seq: &mut PoseSequence, delta: [f64; 3], sign: f64) {
    for (i, x) in seq.frames_mut().data_mut().iter_mut().enumerate() {
        *x += sign * delta[i % 3];
    }
}

/// Subtracts the root position of the last past frame from every joint of
/// every frame.
pub fn center_normalize(window: &MotionWindow) -> (MotionWindow, Offset) {
    let root = window.past.skeleton().root();
    let offset = window.past.joint(window.t_past() - 1, root);
    let mut out = window.clone();
    translate(&mut out.past, offset, -1.0);
    translate(&mut out.future, offset, -1.0);
    (out, offset)
}

pub fn denormalize(window: &MotionWindow, offset: Offset) -> MotionWindow {
    let mut out = window.clone();
    translate(&mut out.past, offset, 1.0);
    translate(&mut out.future, offset, 1.0);
    out
}

/// Adds `offset` back onto a sequence produced in centered coordinates.
pub fn denormalize_sequence(seq: &PoseSequence, offset: Offset) -> PoseSequence {
    let mut out = seq.clone();
    translate(&mut out, offset, 1.0);
    out
}

#[derive(Clone, Debug, Default)]
pub struct WindowDataset {
    pub windows: Vec<MotionWindow>,
    /// `multimodal_index[i]` lists the windows whose futures count as
    /// alternative ground truth for window `i` (always including `i`).
    pub multimodal_index: Vec<Vec<usize>>,
}

impl WindowDataset {
    /// Dataset with the trivial (singleton) multimodal grouping.
    pub fn new(windows: Vec<MotionWindow>) -> Self {
        let multimodal_index = (0..windows.len()).map(|i| vec![i]).collect();
        Self {
            windows,
            multimodal_index,
        }
    }

    pub fn len(&self) -> usize {
        self.windows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.windows.is_empty()
    }

    /// Holds out the windows of the last `fraction` of source sequences
    /// (at least one source); a source never straddles the split.
    /// Multimodal groups are restricted to the members on the same side.
    pub fn split_by_source(&self, fraction: f64) -> Result<(WindowDataset, WindowDataset)> {
        let mut sources: Vec<&str> = Vec::new();
        for w in &self.windows {
            if !sources.contains(&w.source_id.as_str()) {
                sources.push(&w.source_id);
            }
        }
        if sources.len() < 2 {
            return Err(Error::EmptyDataset(format!(
                "need at least two source sequences to hold out a split, found {}",
                sources.len()
            )));
        }
        let held = ((sources.len() as f64 * fraction).ceil() as usize).clamp(1, sources.len() - 1);
        let test_sources = &sources[sources.len() - held..];
        let (test, train): (Vec<usize>, Vec<usize>) =
            (0..self.len()).partition(|&i| test_sources.contains(&self.windows[i].source_id.as_str()));
        Ok((self.subset(&train), self.subset(&test)))
    }

    /// The windows at `indices`, in that order, keeping only group members
    /// that are themselves selected.
    pub fn subset(&self, indices: &[usize]) -> WindowDataset {
        let mut new_index = vec![usize::MAX; self.len()];
        for (n, &i) in indices.iter().enumerate() {
            new_index[i] = n;
        }
        let windows = indices.iter().map(|&i| self.windows[i].clone()).collect();
        let multimodal_index = indices
            .iter()
            .map(|&i| {
                let mut g: Vec<usize> = self.multimodal_index[i]
                    .iter()
                    .map(|&j| new_index[j])
                    .filter(|&j| j != usize::MAX)
                    .collect();
                g.sort_unstable();
                g
            })
            .collect();
        WindowDataset {
            windows,
            multimodal_index,
        }
    }
}

/// Sliding windows of `t_past + t_future` frames at `stride`. Sequences
/// that are too short contribute nothing.
pub fn make_windows(seqs: &[NamedSequence], t_past: usize, t_future: usize, stride: usize) -> Result<WindowDataset> {
    if t_past == 0 || t_future == 0 || stride == 0 {
        return Err(Error::Argument(format!(
            "window lengths and stride must be positive (t_past={t_past}, t_future={t_future}, stride={stride})"
        )));
    }
    let total = t_past + t_future;
    let mut windows = Vec::new();
    for named in seqs {
        let seq = &named.sequence;
        if seq.frame_count() < total {
            continue;
        }
        let mut start = 0;
        while start + total <= seq.frame_count() {
            windows.push(MotionWindow {
                past: seq.slice(start, start + t_past)?,
                future: seq.slice(start + t_past, start + total)?,
                source_id: named.id.clone(),
                start,
            });
            start += stride;
        }
    }
    Ok(WindowDataset::new(windows))
}

/// Last past pose of a window after centering, flattened `V × 3`.
fn centered_last_pose(w: &MotionWindow) -> Vec<f64> {
    let (c, _) = center_normalize(w);
    c.last_past_frame().to_vec()
}

/// Groups windows whose centered last past poses lie within `threshold`
/// (Euclidean, over the flattened pose).
pub fn build_multimodal_index(dataset: &WindowDataset, threshold: f64) -> Result<WindowDataset> {
    if threshold.is_nan() || threshold <= 0.0 {
        return Err(Error::Argument(format!("threshold must be positive, got {threshold}")));
    }
    let poses: Vec<Vec<f64>> = dataset.windows.iter().map(centered_last_pose).collect();
    let n = poses.len();
    let mut index = vec![Vec::new(); n];
    for i in 0..n {
        for j in 0..n {
            let d = poses[i]
                .iter()
                .zip(&poses[j])
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt();
            if i == j || d <= threshold {
                index[i].push(j);
            }
        }
    }
    Ok(WindowDataset {
        windows: dataset.windows.clone(),
        multimodal_index: index,
    })
}

/// Repeats the last past frame for `t_future` frames.
pub fn zero_velocity_baseline(window: &MotionWindow) -> PoseSequence {
    let last = window.last_past_frame();
    let tf = window.t_future();
    let v = window.past.joint_count();
    let data: Vec<f64> = (0..tf).flat_map(|_| last.iter().copied()).collect();
    PoseSequence::from_parts(
        window.past.skeleton().clone(),
        window.past.fps(),
        Tensor::new(&[tf, v, 3], data).expect("baseline layout"),
    )
    .expect("baseline shape")
}
