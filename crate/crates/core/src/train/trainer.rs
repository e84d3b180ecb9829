use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::adam::{adam_step, lr_schedule, AdamState};
use super::config::TrainConfig;
use super::loss::{self, Frames, LossTerms};
use crate::error::{Error, Result};
use crate::metrics::{evaluate, MetricsReport};
use crate::motion::{center_normalize, MotionWindow, WindowDataset};
use crate::net::{preprocess, Checkpoint, EffectiveGrads, Model, ModelParams, Prepared, Profile};
use crate::numkit::Rng;

const INIT_STREAM: u64 = 1;
const SHUFFLE_STREAM: u64 = 2;

/// One line of the training log.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub lr: f64,
    pub loss_r: f64,
    pub loss_d: f64,
    pub loss_c: f64,
    pub total: f64,
}

/// Objective and effective gradients for one window.
pub fn window_objective(prep: &Prepared<'_>, window: &MotionWindow, config: &TrainConfig) -> Result<(LossTerms, EffectiveGrads)> {
    let model = prep.model();
    let profile = model.profile();
    let (w, _) = center_normalize(window);
    let freq = preprocess(&w.past, model.basis(), profile.n_freq)?;
    let trace = prep.forward_window(&freq)?;
    let samples: Vec<Vec<f64>> = trace.samples.iter().map(|s| s.output.clone()).collect();
    let frames = Frames {
        t_past: profile.t_past,
        t_future: profile.t_future,
        joints: profile.joints(),
    };
    let past = w.past.frames().data();
    let future = w.future.frames().data();
    let last = w.last_past_frame();
    let bones = model.skeleton().bones();

    let rec = loss::reconstruction(&samples, past, future, frames);
    let terms = LossTerms {
        loss_r: rec.value(),
        loss_d: loss::diversity(&samples, config.alpha_d, frames)?,
        loss_c: loss::constraint(&samples, last, &bones, frames).value(),
    };
    let mut grads = vec![vec![0.0; samples[0].len()]; samples.len()];
    loss::reconstruction_backward(&samples, past, future, frames, &rec, config.lambda_r, &mut grads);
    if config.lambda_d != 0.0 {
        loss::diversity_backward(&samples, config.alpha_d, frames, config.lambda_d, &mut grads)?;
    }
    if config.lambda_c != 0.0 {
        loss::constraint_backward(&samples, last, &bones, frames, config.lambda_c, &mut grads);
    }
    let mut acc = prep.zero_grads();
    prep.backward_window(&trace, &grads, &mut acc)?;
    Ok((terms, acc))
}

/// Mean objective over `windows` and its gradient with respect to the raw
/// parameters. Windows are processed in parallel and reduced in order.
pub fn batch_gradient(model: &Model, windows: &[&MotionWindow], config: &TrainConfig) -> Result<(LossTerms, ModelParams)> {
    if windows.is_empty() {
        return Err(Error::EmptyDataset("batch has no windows".into()));
    }
    let prep = model.prepare()?;
    let parts: Vec<(LossTerms, EffectiveGrads)> = windows
        .par_iter()
        .map(|w| window_objective(&prep, w, config))
        .collect::<Result<_>>()?;
    let n = windows.len() as f64;
    let mut terms = LossTerms::default();
    let mut acc = prep.zero_grads();
    for (t, g) in &parts {
        terms.loss_r += t.loss_r;
        terms.loss_d += t.loss_d;
        terms.loss_c += t.loss_c;
        acc.add(g)?;
    }
    terms.loss_r /= n;
    terms.loss_d /= n;
    terms.loss_c /= n;
    let mut grads = prep.pull_back(acc)?;
    grads.scale(1.0 / n);
    Ok((terms, grads))
}

/// Epoch-at-a-time training driver.
pub struct Trainer {
    config: TrainConfig,
    model: Model,
    adam: AdamState,
    epoch: usize,
    data: WindowDataset,
}

impl Trainer {
    /// Fresh model initialized from the config seed.
    pub fn new(config: TrainConfig, data: WindowDataset) -> Result<Self> {
        config.validate()?;
        let profile = config.profile.resolve()?;
        check_data(&profile, &data)?;
        let mut rng = Rng::new(config.seed).derive(INIT_STREAM);
        let model = Model::init(profile, config.ablation_mode, config.k_samples, &mut rng)?;
        let adam = AdamState::new(model.params());
        Ok(Self {
            config,
            model,
            adam,
            epoch: 0,
            data,
        })
    }

    /// Continues from a checkpoint written by [`Trainer::checkpoint`].
    pub fn resume(config: TrainConfig, data: WindowDataset, checkpoint: Checkpoint) -> Result<Self> {
        config.validate()?;
        let profile = config.profile.resolve()?;
        let m = &checkpoint.model;
        if m.profile() != &profile || m.mode() != config.ablation_mode || m.k() != config.k_samples {
            return Err(Error::Config(
                "checkpoint profile, ablation mode or k_samples differ from the config".into(),
            ));
        }
        if checkpoint.seed != config.seed {
            return Err(Error::Config(format!(
                "checkpoint seed {} differs from config seed {}",
                checkpoint.seed, config.seed
            )));
        }
        check_data(&profile, &data)?;
        let adam = match checkpoint.optimizer {
            Some(m) => AdamState::from_moments(m),
            None => return Err(Error::Checkpoint("no optimizer state to resume from".into())),
        };
        Ok(Self {
            config,
            model: checkpoint.model,
            adam,
            epoch: checkpoint.epoch,
            data,
        })
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    /// Completed epochs.
    pub fn epoch(&self) -> usize {
        self.epoch
    }

    pub fn is_done(&self) -> bool {
        self.epoch >= self.config.epochs
    }

    /// Window visiting order for `epoch`; depends only on seed and epoch.
    fn order(&self, epoch: usize) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.data.len()).collect();
        Rng::new(self.config.seed)
            .derive(SHUFFLE_STREAM)
            .derive(epoch as u64)
            .shuffle(&mut order);
        order
    }

    pub fn run_epoch(&mut self) -> Result<EpochLog> {
        let lr = lr_schedule(self.epoch, self.config.lr0);
        let order = self.order(self.epoch);
        let mut sums = LossTerms::default();
        for batch in order.chunks(self.config.batch_size) {
            let windows: Vec<&MotionWindow> = batch.iter().map(|&i| &self.data.windows[i]).collect();
            let (terms, grads) = batch_gradient(&self.model, &windows, &self.config)?;
            let n = batch.len() as f64;
            sums.loss_r += terms.loss_r * n;
            sums.loss_d += terms.loss_d * n;
            sums.loss_c += terms.loss_c * n;
            adam_step(self.model.params_mut(), &mut self.adam, &grads, lr)?;
            if let Some(d) = &self.model.params().directions {
                d.effective()?;
            }
        }
        let n = self.data.len() as f64;
        let terms = LossTerms {
            loss_r: sums.loss_r / n,
            loss_d: sums.loss_d / n,
            loss_c: sums.loss_c / n,
        };
        let log = EpochLog {
            epoch: self.epoch,
            lr,
            loss_r: terms.loss_r,
            loss_d: terms.loss_d,
            loss_c: terms.loss_c,
            total: loss::total_loss(&terms, &self.config.weights()),
        };
        self.epoch += 1;
        Ok(log)
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            model: self.model.clone(),
            seed: self.config.seed,
            epoch: self.epoch,
            config: serde_json::to_value(&self.config).expect("config serializes"),
            optimizer: Some(self.adam.to_moments()),
        }
    }
}

fn check_data(profile: &Profile, data: &WindowDataset) -> Result<()> {
    let Some(w) = data.windows.first() else {
        return Err(Error::EmptyDataset("no training windows".into()));
    };
    if w.t_past() != profile.t_past || w.t_future() != profile.t_future || w.past.joint_count() != profile.joints() {
        return Err(Error::Geometry(format!(
            "windows are {}+{} frames of {} joints; profile `{}` needs {}+{} frames of {} joints",
            w.t_past(),
            w.t_future(),
            w.past.joint_count(),
            profile.name,
            profile.t_past,
            profile.t_future,
            profile.joints()
        )));
    }
    if w.past.skeleton().parent_indices() != profile.parents {
        return Err(Error::Geometry("dataset skeleton differs from the profile skeleton".into()));
    }
    Ok(())
}

pub struct TrainOutcome {
    pub checkpoint: Checkpoint,
    pub log: Vec<EpochLog>,
    /// Metrics of the final model on the held-out split.
    pub heldout: MetricsReport,
}

/// Splits off the held-out sources, trains for `config.epochs`, and
/// evaluates the final model. `on_epoch` sees the trainer after every
/// epoch (for logging and intermediate checkpoints).
pub fn train(
    config: &TrainConfig,
    dataset: &WindowDataset,
    on_epoch: impl FnMut(&Trainer, &EpochLog) -> Result<()>,
) -> Result<TrainOutcome> {
    train_from(config, dataset, None, on_epoch)
}

/// [`train`], optionally continuing from an intermediate checkpoint; the
/// log then only covers the remaining epochs.
pub fn train_from(
    config: &TrainConfig,
    dataset: &WindowDataset,
    resume: Option<Checkpoint>,
    mut on_epoch: impl FnMut(&Trainer, &EpochLog) -> Result<()>,
) -> Result<TrainOutcome> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset("no windows in dataset".into()));
    }
    let (train_set, test_set) = dataset.split_by_source(config.heldout_fraction)?;
    if train_set.is_empty() || test_set.is_empty() {
        return Err(Error::EmptyDataset("held-out split left one side without windows".into()));
    }
    let mut trainer = match resume {
        Some(ck) => Trainer::resume(config.clone(), train_set, ck)?,
        None => Trainer::new(config.clone(), train_set)?,
    };
    let mut log = Vec::with_capacity(config.epochs.saturating_sub(trainer.epoch()));
    while !trainer.is_done() {
        let entry = trainer.run_epoch()?;
        on_epoch(&trainer, &entry)?;
        log.push(entry);
    }
    let heldout = evaluate(trainer.model(), &test_set)?;
    Ok(TrainOutcome {
        checkpoint: trainer.checkpoint(),
        log,
        heldout,
    })
}
