//! Acceptance checks, one line per criterion. Runs without the libtest
//! harness so the verdict lines are always printed.

use std::panic::{self, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use sld::metrics::{ade, apd, evaluate_baseline, fde, mmade, mmfde, MetricsReport};
use sld::motion::{build_multimodal_index, make_windows, synth_generate, MotionWindow, NamedSequence, PoseSequence, Skeleton, WindowDataset};
use sld::net::{group_of, AblationMode, Checkpoint, Model, Profile};
use sld::numkit::{dct_basis, relative_error, Rng, Tensor};
use sld::train::loss::{diversity, reconstruction, Frames};
use sld::train::{batch_gradient, lr_schedule, total_loss, train, ProfileSpec, TrainConfig, TrainOutcome};
use sld_cli::{route, Session};

/// Outcome of one criterion: pass flag and a one-line summary.
type Verdict = (bool, String);
type Criterion = (&'static str, fn() -> Verdict);

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("dct round trip", dct_round_trip),
        ("orthogonality invariant", orthogonality_invariant),
        ("gradient suite", gradient_suite),
        ("metric oracles", metric_oracles),
        ("lr schedule", lr_values),
        ("best-of-K and diversity", best_of_k_and_diversity),
        ("smoke training", smoke_training),
        ("ablation ordering", ablation_ordering),
        ("edit fidelity", edit_fidelity),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let (pass, detail) = match panic::catch_unwind(AssertUnwindSafe(check)) {
            Ok(v) => v,
            Err(e) => {
                let msg = e
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default();
                (false, format!("panicked: {msg}"))
            }
        };
        if !pass {
            failed += 1;
        }
        println!("{} {name}: {detail}", if pass { "PASS" } else { "FAIL" });
    }
    println!("acceptance: {} passed, {failed} failed", 10 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

// ---------------------------------------------------------------- fixtures

/// 64 one-window synthetic sequences on the tiny skeleton.
fn smoke_dataset() -> WindowDataset {
    let profile = Profile::tiny();
    let seqs: Vec<NamedSequence> = synth_generate(&Rng::new(7), &Skeleton::tiny5(), 64, profile.fps, profile.total_length())
        .into_iter()
        .enumerate()
        .map(|(i, s)| NamedSequence {
            id: format!("s{i:02}"),
            sequence: s.sequence,
        })
        .collect();
    let ds = make_windows(&seqs, profile.t_past, profile.t_future, 4).unwrap();
    build_multimodal_index(&ds, 0.5).unwrap()
}

fn smoke_config(mode: AblationMode, seed: u64) -> TrainConfig {
    TrainConfig {
        profile: ProfileSpec::Named("tiny".into()),
        epochs: 30,
        k_samples: 10,
        batch_size: 4,
        lr0: 0.003,
        alpha_d: 3.0,
        seed,
        ablation_mode: mode,
        ..TrainConfig::default()
    }
}

fn single_core<T: Send>(f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap().install(f)
}

fn heldout_baseline(data: &WindowDataset, cfg: &TrainConfig) -> MetricsReport {
    let (_, test) = data.split_by_source(cfg.heldout_fraction).unwrap();
    evaluate_baseline(&test, cfg.k_samples).unwrap()
}

fn chain(v: usize) -> Skeleton {
    let parents: Vec<i64> = (0..v as i64).map(|j| j - 1).collect();
    Skeleton::from_parent_indices(&parents, None).unwrap()
}

fn random_sequence(rng: &mut Rng, sk: &Skeleton, t: usize) -> PoseSequence {
    PoseSequence::from_parts(sk.clone(), 25, rng.gaussian(&[t, sk.joint_count(), 3])).unwrap()
}

/// Model with every parameter nudged off its initialization, so zero-init
/// layers carry gradient and samples differ.
fn perturbed_model(mode: AblationMode, k: usize, seed: u64) -> Model {
    let mut model = Model::init(Profile::tiny(), mode, k, &mut Rng::new(seed)).unwrap();
    let mut rng = Rng::new(seed).derive(99);
    for (_, t) in model.params_mut().named_tensors_mut() {
        let noise = rng.gaussian(t.shape()).scale(0.1);
        t.axpy(1.0, &noise).unwrap();
    }
    model
}

// ---------------------------------------------------------------- criteria

fn dct_round_trip() -> Verdict {
    let mut rng = Rng::new(11);
    let mut worst = 0.0f64;
    let start = Instant::now();
    for profile in [Profile::standard(), Profile::tiny()] {
        let basis = dct_basis(profile.total_length()).unwrap();
        let width = profile.joints() * 3;
        for _ in 0..100 {
            let x = rng.gaussian(&[profile.total_length(), width]);
            let back = basis.reconstruct(&basis.project(&x, profile.total_length()).unwrap()).unwrap();
            worst = worst.max(back.max_abs_diff(&x));
        }
    }
    let elapsed = start.elapsed();

    // Truncation: reconstruction error never grows as rows are added.
    let mut monotone = true;
    for profile in [Profile::standard(), Profile::tiny()] {
        let l = profile.total_length();
        let basis = dct_basis(l).unwrap();
        for _ in 0..10 {
            let x = rng.gaussian(&[l, profile.joints() * 3]);
            let full = basis.project(&x, l).unwrap();
            let mut prev = f64::INFINITY;
            for n in 1..=l {
                let head = Tensor::new(&[n, full.cols()], full.data()[..n * full.cols()].to_vec()).unwrap();
                let err = basis.reconstruct(&head).unwrap().sub(&x).unwrap().norm();
                monotone &= err <= prev;
                prev = err;
            }
        }
    }
    let pass = worst < 1e-9 && monotone && elapsed < Duration::from_secs(1);
    (
        pass,
        format!("max |F^-1 F x - x| = {worst:.2e} (< 1e-9), truncation monotone = {monotone}, 200 round trips in {elapsed:.2?} (< 1s)"),
    )
}

fn orthogonality_invariant() -> Verdict {
    let data = smoke_dataset();
    let mut worst = 0.0f64;
    let mut epochs = 0;
    train(&smoke_config(AblationMode::Full, 0), &data, |trainer, _| {
        let d = trainer.model().params().directions.as_ref().unwrap().effective()?;
        let gram = d.matmul(&d.transpose()?)?;
        worst = worst.max(gram.max_abs_diff(&Tensor::eye(d.rows())));
        epochs += 1;
        Ok(())
    })
    .unwrap();
    (
        epochs == 30 && worst < 1e-6,
        format!("max |D D^T - I| over {epochs} epochs = {worst:.2e} (< 1e-6)"),
    )
}

fn gradient_suite() -> Verdict {
    const EPS: f64 = 1e-5;
    const COORDS: usize = 8;
    let data = smoke_dataset();
    let windows: Vec<&MotionWindow> = data.windows.iter().step_by(16).collect();
    let start = Instant::now();
    let mut worst: Vec<(String, f64)> = Vec::new();
    let mut strict = 0.0f64;
    let mut checked = 0;
    for seed in 0..5u64 {
        for mode in AblationMode::ALL {
            let cfg = TrainConfig {
                k_samples: 4,
                ..smoke_config(mode, seed)
            };
            let model = perturbed_model(mode, cfg.k_samples, seed);
            let (_, grads) = batch_gradient(&model, &windows, &cfg).unwrap();
            let objective = |m: &Model| total_loss(&batch_gradient(m, &windows, &cfg).unwrap().0, &cfg.weights());
            let names: Vec<String> = model.params().named_tensors().into_iter().map(|(n, _)| n).collect();
            let mut rng = Rng::new(seed).derive(7);
            for (idx, name) in names.iter().enumerate() {
                let len = model.params().named_tensors()[idx].1.len();
                for _ in 0..COORDS.min(len) {
                    let i = rng.below(len);
                    let mut probe = model.clone();
                    let orig = probe.params().named_tensors()[idx].1.data()[i];
                    probe.params_mut().named_tensors_mut()[idx].1.data_mut()[i] = orig + EPS;
                    let plus = objective(&probe);
                    probe.params_mut().named_tensors_mut()[idx].1.data_mut()[i] = orig - EPS;
                    let minus = objective(&probe);
                    let numeric = (plus - minus) / (2.0 * EPS);
                    let analytic = grads.named_tensors()[idx].1.data()[i];
                    let err = relative_error(analytic, numeric);
                    if numeric.abs() > 1e-6 {
                        strict = strict.max((analytic - numeric).abs() / numeric.abs());
                    }
                    let group = format!("{mode}/{}", group_of(name));
                    match worst.iter_mut().find(|(g, _)| *g == group) {
                        Some((_, w)) => *w = w.max(err),
                        None => worst.push((group, err)),
                    }
                    checked += 1;
                }
            }
        }
    }
    let elapsed = start.elapsed();
    let max = worst.iter().map(|(_, e)| *e).fold(0.0, f64::max);
    let (wg, _) = worst.iter().max_by(|a, b| a.1.total_cmp(&b.1)).unwrap();
    let pass = max < 1e-4 && elapsed < Duration::from_secs(120);
    (
        pass,
        format!(
            "{checked} coordinates across {} (mode, group) pairs, 5 seeds: max relative error {max:.2e} in {wg} (< 1e-4; strict |a-n|/|n| {strict:.2e}), {elapsed:.2?}",
            worst.len()
        ),
    )
}

#[allow(clippy::needless_range_loop)]
mod oracle {
    pub type Seq = Vec<Vec<[f64; 3]>>;

    fn frame_dist(a: &[[f64; 3]], b: &[[f64; 3]]) -> f64 {
        let mut s = 0.0;
        for v in 0..a.len() {
            for c in 0..3 {
                s += (a[v][c] - b[v][c]).powi(2);
            }
        }
        s.sqrt()
    }

    pub fn apd(ys: &[Seq]) -> f64 {
        let k = ys.len();
        let mut total = 0.0;
        for i in 0..k {
            for j in 0..k {
                if i != j {
                    let mut s = 0.0;
                    for t in 0..ys[i].len() {
                        s += frame_dist(&ys[i][t], &ys[j][t]).powi(2);
                    }
                    total += s.sqrt();
                }
            }
        }
        total / (k * (k - 1)) as f64
    }

    pub fn ade(ys: &[Seq], gt: &Seq) -> f64 {
        ys.iter()
            .map(|y| (0..gt.len()).map(|t| frame_dist(&y[t], &gt[t])).sum::<f64>() / gt.len() as f64)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn fde(ys: &[Seq], gt: &Seq) -> f64 {
        let last = gt.len() - 1;
        ys.iter().map(|y| frame_dist(&y[last], &gt[last])).fold(f64::INFINITY, f64::min)
    }

    pub fn mmade(ys: &[Seq], group: &[Seq]) -> f64 {
        group.iter().map(|g| ade(ys, g)).sum::<f64>() / group.len() as f64
    }

    pub fn mmfde(ys: &[Seq], group: &[Seq]) -> f64 {
        group.iter().map(|g| fde(ys, g)).sum::<f64>() / group.len() as f64
    }
}

fn metric_oracles() -> Verdict {
    let mut rng = Rng::new(21);
    let mut worst = [0.0f64; 5];
    for _ in 0..100 {
        let k = 2 + rng.below(5);
        let t = 1 + rng.below(8);
        let sk = chain(1 + rng.below(5));
        let ys: Vec<PoseSequence> = (0..k).map(|_| random_sequence(&mut rng, &sk, t)).collect();
        let gt = random_sequence(&mut rng, &sk, t);
        let group: Vec<PoseSequence> = (0..1 + rng.below(4)).map(|_| random_sequence(&mut rng, &sk, t)).collect();
        let nys: Vec<oracle::Seq> = ys.iter().map(PoseSequence::to_nested).collect();
        let ngt = gt.to_nested();
        let ngroup: Vec<oracle::Seq> = group.iter().map(PoseSequence::to_nested).collect();
        let pairs = [
            (apd(&ys).unwrap(), oracle::apd(&nys)),
            (ade(&ys, &gt).unwrap(), oracle::ade(&nys, &ngt)),
            (fde(&ys, &gt).unwrap(), oracle::fde(&nys, &ngt)),
            (mmade(&ys, &group).unwrap(), oracle::mmade(&nys, &ngroup)),
            (mmfde(&ys, &group).unwrap(), oracle::mmfde(&nys, &ngroup)),
        ];
        for (w, (got, want)) in worst.iter_mut().zip(pairs) {
            *w = w.max((got - want).abs());
        }
    }
    let pass = worst.iter().all(|&w| w <= 1e-12);
    (
        pass,
        format!(
            "100 instances, max |impl - oracle|: apd {:.1e} ade {:.1e} fde {:.1e} mmade {:.1e} mmfde {:.1e} (<= 1e-12)",
            worst[0], worst[1], worst[2], worst[3], worst[4]
        ),
    )
}

fn lr_values() -> Verdict {
    let got: Vec<f64> = [0, 100, 300, 500].iter().map(|&e| lr_schedule(e, 0.001)).collect();
    (got == [0.001, 0.001, 0.0005, 0.0], format!("lr(0, 100, 300, 500) = {got:?}"))
}

fn best_of_k_and_diversity() -> Verdict {
    let fr = Frames {
        t_past: 8,
        t_future: 16,
        joints: 5,
    };
    let (p, f) = (fr.t_past * 15, fr.t_future * 15);
    let mut rng = Rng::new(31);
    let past = rng.gaussian(&[p]).into_data();
    let future = rng.gaussian(&[f]).into_data();
    let mut samples: Vec<Vec<f64>> = (0..6).map(|_| rng.gaussian(&[p + f]).into_data()).collect();
    samples[4][p..].copy_from_slice(&future);
    let rec = reconstruction(&samples, &past, &future, fr);
    let gt_zero = rec.best == 4 && rec.future == 0.0;

    let alpha = 3.0;
    let base = rng.gaussian(&[p + f]).into_data();
    let same = vec![base.clone(); 6];
    let identical = diversity(&same, alpha, fr).unwrap();
    let mut decreases = true;
    for i in 0..6 {
        for j in i + 1..6 {
            let mut s = same.clone();
            s[j][p + 3] += 0.05;
            s[i][p + 7] -= 0.05;
            decreases &= diversity(&s, alpha, fr).unwrap() < identical;
        }
    }
    (
        gt_zero && identical == 1.0 && decreases,
        format!(
            "GT sample -> future term {} (best = {}), identical samples -> diversity {identical}, every separated pair strictly lower = {decreases}",
            rec.future, rec.best
        ),
    )
}

fn smoke_training() -> Verdict {
    let data = smoke_dataset();
    let cfg = smoke_config(AblationMode::Full, 0);
    let base = heldout_baseline(&data, &cfg);
    let start = Instant::now();
    let out = single_core(|| train(&cfg, &data, |_, _| Ok(())).unwrap());
    let elapsed = start.elapsed();
    let (first, last) = (out.log[0].loss_r, out.log.last().unwrap().loss_r);
    let pass = data.len() == 64
        && elapsed < Duration::from_secs(120)
        && out.heldout.ade < base.ade
        && out.heldout.apd > 0.0
        && last < first;
    (
        pass,
        format!(
            "{} windows, {} epochs on 1 thread in {elapsed:.2?} (< 2 min); held-out ADE {:.4} vs zero-velocity {:.4}, APD {:.4} (> 0), L_r {first:.4} -> {last:.4}",
            data.len(),
            out.log.len(),
            out.heldout.ade,
            base.ade,
            out.heldout.apd
        ),
    )
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    xs[xs.len() / 2]
}

fn ablation_ordering() -> Verdict {
    let data = smoke_dataset();
    let ades = |mode| -> Vec<f64> {
        (0..3)
            .map(|seed| train(&smoke_config(mode, seed), &data, |_, _| Ok(())).unwrap().heldout.ade)
            .collect()
    };
    let full = ades(AblationMode::Full);
    let mq = ades(AblationMode::Mq);
    let mq_sld = ades(AblationMode::MqSld);
    let (mf, mm, ms) = (median(full.clone()), median(mq.clone()), median(mq_sld.clone()));
    (
        mf <= mm,
        format!("median held-out ADE over seeds 0-2: MQ-P+SLD {mf:.4} <= MQ {mm:.4} (MQ+SLD {ms:.4}; per seed {full:.4?} / {mq:.4?} / {mq_sld:.4?})"),
    )
}

fn edit_fidelity() -> Verdict {
    // HTTP edit with zero deltas against the predict response, byte for byte.
    let model = perturbed_model(AblationMode::Full, 6, 5);
    let session = Session::new(Checkpoint {
        model: model.clone(),
        seed: 5,
        epoch: 0,
        config: serde_json::Value::Null,
        optimizer: None,
    })
    .unwrap();
    let zeros = vec![0.0; model.direction_count()];
    let mut identical = 0;
    let mut total = 0;
    for sample in session.samples() {
        let body = format!(r#"{{"sample_id":"{}"}}"#, sample.id);
        let predicted = route(&session, "POST", "/api/predict", body.as_bytes());
        let p: serde_json::Value = serde_json::from_str(&predicted.body).unwrap();
        for i in 0..model.k() {
            let req = serde_json::json!({ "sample_id": sample.id, "sample_index": i, "deltas": zeros });
            let edited = route(&session, "POST", "/api/edit", req.to_string().as_bytes());
            let e: serde_json::Value = serde_json::from_str(&edited.body).unwrap();
            total += 1;
            let (got, want) = (e["future"].to_string(), p["futures"][i].to_string());
            if edited.status == 200 && got == want {
                identical += 1;
            }
        }
    }

    // Latent displacement equals the delta norm.
    let mut rng = Rng::new(41);
    let mut worst = 0.0f64;
    for mode in [AblationMode::Full, AblationMode::MqSld] {
        let model = perturbed_model(mode, 6, 6);
        let prep = model.prepare().unwrap();
        for _ in 0..200 {
            let k = rng.below(model.k());
            let w: Vec<f64> = (0..model.direction_count()).map(|_| rng.uniform_in(-3.0, 3.0)).collect();
            let delta: Vec<f64> = (0..w.len()).map(|_| rng.uniform_in(-3.0, 3.0)).collect();
            let moved: Vec<f64> = w.iter().zip(&delta).map(|(a, b)| a + b).collect();
            let (z0, z1) = (prep.latent(&w, k).unwrap(), prep.latent(&moved, k).unwrap());
            let shift = z0.iter().zip(&z1).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            let norm = delta.iter().map(|d| d * d).sum::<f64>().sqrt();
            worst = worst.max((shift - norm).abs());
        }
    }
    (
        identical == total && worst < 1e-9,
        format!("zero-delta /api/edit byte-identical to /api/predict in {identical}/{total} cases; max | |dz| - |delta| | = {worst:.2e} (< 1e-9)"),
    )
}

fn determinism() -> Verdict {
    let data = smoke_dataset();
    let cfg = smoke_config(AblationMode::Full, 3);
    let run = || -> (Vec<u8>, String) {
        let TrainOutcome { checkpoint, heldout, .. } = train(&cfg, &data, |_, _| Ok(())).unwrap();
        (checkpoint.to_bytes().unwrap(), heldout.to_json_string())
    };
    let (a, b) = (run(), single_core(run));
    let same_ckpt = a.0 == b.0;
    let same_report = a.1 == b.1;
    (
        same_ckpt && same_report,
        format!(
            "two train+eval runs (default pool, then 1 thread): checkpoints identical = {same_ckpt} ({} bytes), reports identical = {same_report}",
            a.0.len()
        ),
    )
}
