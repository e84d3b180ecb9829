use super::layers::{row_softmax, row_softmax_backward, BlockCache};
use super::params::{layout, ModelParams};
use super::{AblationMode, Profile};
use crate::error::{Error, Result};
use crate::latent::{combine, combine_backward, edit_coefficients, Coefficients, QlpCache};
use crate::motion::{PoseSequence, Skeleton};
use crate::numkit::tensor::{gemm_nn, gemm_tn};
use crate::numkit::{orthonormalize_backward, DctBasis, GramSchmidtCache, Rng, Tensor};

/// DCT coefficients of a padded sequence, `N × V × 3`.
#[derive(Clone, Debug, PartialEq)]
pub struct FrequencyMotion {
    pub coeffs: Tensor,
}

impl FrequencyMotion {
    pub fn retained(&self) -> usize {
        self.coeffs.shape()[0]
    }

    pub fn joints(&self) -> usize {
        self.coeffs.shape()[1]
    }

    /// Joint-major layout `V × (N·3)` consumed by the graph blocks.
    pub fn joint_major(&self) -> Vec<f64> {
        freq_to_joint_major(self.coeffs.data(), self.retained(), self.joints())
    }
}

fn freq_to_joint_major(freq: &[f64], n: usize, v: usize) -> Vec<f64> {
    let ch = 3 * n;
    let mut out = vec![0.0; v * ch];
    for f in 0..n {
        for j in 0..v {
            for c in 0..3 {
                out[j * ch + f * 3 + c] = freq[f * v * 3 + j * 3 + c];
            }
        }
    }
    out
}

fn joint_major_to_freq(h: &[f64], n: usize, v: usize) -> Vec<f64> {
    let ch = 3 * n;
    let mut out = vec![0.0; n * v * 3];
    for f in 0..n {
        for j in 0..v {
            for c in 0..3 {
                out[f * v * 3 + j * 3 + c] = h[j * ch + f * 3 + c];
            }
        }
    }
    out
}

/// Pads `past` to the basis length by repeating its last frame and keeps
/// the first `retained` DCT rows, independently per joint coordinate.
pub fn preprocess(past: &PoseSequence, basis: &DctBasis, retained: usize) -> Result<FrequencyMotion> {
    let t_total = basis.total_length();
    let t_past = past.frame_count();
    if t_past == 0 || t_past > t_total {
        return Err(Error::Argument(format!(
            "past has {t_past} frames; expected 1..={t_total}"
        )));
    }
    let w = past.joint_count() * 3;
    let mut padded = Vec::with_capacity(t_total * w);
    padded.extend_from_slice(&past.frames().data()[..t_past * w]);
    let last = past.frame(t_past - 1);
    for _ in t_past..t_total {
        padded.extend_from_slice(last);
    }
    let coeffs = basis.project(&Tensor::new(&[t_total, w], padded)?, retained)?;
    Ok(FrequencyMotion {
        coeffs: coeffs.reshape(&[retained, past.joint_count(), 3])?,
    })
}

/// Generator: encoder, latent pathway and decoder for one profile.
#[derive(Clone, Debug)]
pub struct Model {
    profile: Profile,
    mode: AblationMode,
    params: ModelParams,
    basis: DctBasis,
    skeleton: Skeleton,
}

/// Futures for one past window, with the coefficients that produced them.
#[derive(Clone, Debug, PartialEq)]
pub struct PredictionSet {
    pub futures: Vec<PoseSequence>,
    /// `K × M`; `K × 0` when the model has no latent directions.
    pub coefficients: Coefficients,
    pub past: PoseSequence,
}

impl Model {
    pub fn new(profile: Profile, mode: AblationMode, params: ModelParams) -> Result<Self> {
        profile.validate()?;
        let skeleton = profile.skeleton()?;
        let basis = DctBasis::new(profile.total_length())?;
        let model = Self {
            profile,
            mode,
            params,
            basis,
            skeleton,
        };
        model.check_shapes()?;
        Ok(model)
    }

    pub fn init(profile: Profile, mode: AblationMode, k: usize, rng: &mut Rng) -> Result<Self> {
        let params = ModelParams::init(&profile, mode, k, rng)?;
        Self::new(profile, mode, params)
    }

    fn check_shapes(&self) -> Result<()> {
        let actual: Vec<(String, Vec<usize>)> = self
            .params
            .named_tensors()
            .into_iter()
            .map(|(n, t)| (n, t.shape().to_vec()))
            .collect();
        if actual != layout(&self.profile, self.mode, self.k()) {
            return Err(Error::Geometry(format!(
                "parameters do not match profile `{}` in mode {}",
                self.profile.name, self.mode
            )));
        }
        Ok(())
    }

    pub fn profile(&self) -> &Profile {
        &self.profile
    }

    pub fn mode(&self) -> AblationMode {
        self.mode
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ModelParams {
        &mut self.params
    }

    pub fn basis(&self) -> &DctBasis {
        &self.basis
    }

    pub fn skeleton(&self) -> &Skeleton {
        &self.skeleton
    }

    /// Number of motion queries (samples per prediction).
    pub fn k(&self) -> usize {
        self.params.queries.len()
    }

    /// Latent directions actually used by the model (0 in MQ mode).
    pub fn direction_count(&self) -> usize {
        if self.mode.uses_directions() {
            self.profile.m_dirs
        } else {
            0
        }
    }

    /// Derived quantities for the current parameter snapshot.
    pub fn prepare(&self) -> Result<Prepared<'_>> {
        let directions = match &self.params.directions {
            Some(d) => Some(d.effective_cached()?),
            None => None,
        };
        Ok(Prepared {
            model: self,
            encoder_adj: self.params.encoder.iter().map(|b| row_softmax(&b.adjacency)).collect(),
            decoder_adj: self.params.decoder.iter().map(|b| row_softmax(&b.adjacency)).collect(),
            directions,
        })
    }

    fn check_past(&self, past: &PoseSequence) -> Result<()> {
        if past.frame_count() != self.profile.t_past {
            return Err(Error::Argument(format!(
                "past has {} frames, model expects {}",
                past.frame_count(),
                self.profile.t_past
            )));
        }
        if past.joint_count() != self.profile.joints() {
            return Err(Error::Geometry(format!(
                "past has {} joints, model expects {}",
                past.joint_count(),
                self.profile.joints()
            )));
        }
        Ok(())
    }

    /// Root of the last past frame; predictions are made relative to it.
    fn anchor(past: &PoseSequence) -> [f64; 3] {
        past.joint(past.frame_count() - 1, past.skeleton().root())
    }

    fn shift(data: &[f64], offset: [f64; 3], sign: f64) -> Vec<f64> {
        data.iter()
            .enumerate()
            .map(|(i, x)| x + sign * offset[i % 3])
            .collect()
    }

    fn centered(&self, past: &PoseSequence) -> Result<(PoseSequence, [f64; 3])> {
        self.check_past(past)?;
        let offset = Self::anchor(past);
        let data = Self::shift(past.frames().data(), offset, -1.0);
        let seq = PoseSequence::from_parts(
            past.skeleton().clone(),
            past.fps(),
            Tensor::new(past.frames().shape(), data)?,
        )?;
        Ok((seq, offset))
    }

    fn future_from_output(&self, past: &PoseSequence, output: &[f64], offset: [f64; 3]) -> Result<PoseSequence> {
        let (tp, tf, v) = (self.profile.t_past, self.profile.t_future, self.profile.joints());
        let data = Self::shift(&output[tp * v * 3..], offset, 1.0);
        PoseSequence::from_parts(past.skeleton().clone(), past.fps(), Tensor::new(&[tf, v, 3], data)?)
    }

    /// `K` futures for a past window in world coordinates.
    pub fn predict_k(&self, past: &PoseSequence) -> Result<PredictionSet> {
        self.predict_first(past, self.k())
    }

    /// Like [`Model::predict_k`] but only for the first `k` queries.
    pub fn predict_first(&self, past: &PoseSequence, k: usize) -> Result<PredictionSet> {
        if k == 0 || k > self.k() {
            return Err(Error::Argument(format!("k must lie in 1..={}, got {k}", self.k())));
        }
        let (centered, offset) = self.centered(past)?;
        let prep = self.prepare()?;
        let enc = prep.encode(&preprocess(&centered, &self.basis, self.profile.n_freq)?);
        let m = self.direction_count();
        let mut coeffs = Tensor::zeros(&[k, m]);
        let mut futures = Vec::with_capacity(k);
        for s in 0..k {
            let (w, _) = prep.coefficients(&enc, s);
            coeffs.row_mut(s).copy_from_slice(&w);
            let (out, _) = prep.decode(&enc, &prep.latent(&w, s)?);
            futures.push(self.future_from_output(past, &out, offset)?);
        }
        Ok(PredictionSet {
            futures,
            coefficients: Coefficients::new(coeffs)?,
            past: past.clone(),
        })
    }

    /// Re-decodes sample `sample_index` of `base` after adding `deltas` to
    /// its coefficients.
    pub fn predict_edited(
        &self,
        past: &PoseSequence,
        base: &PredictionSet,
        sample_index: usize,
        deltas: &[f64],
    ) -> Result<(PoseSequence, Vec<f64>)> {
        if !self.mode.uses_directions() {
            return Err(Error::State(format!(
                "ablation mode {} has no latent directions to edit",
                self.mode
            )));
        }
        let edited = edit_coefficients(&base.coefficients, sample_index, deltas)?;
        let w = edited.row(sample_index).to_vec();
        let (centered, offset) = self.centered(past)?;
        let prep = self.prepare()?;
        let enc = prep.encode(&preprocess(&centered, &self.basis, self.profile.n_freq)?);
        let (out, _) = prep.decode(&enc, &prep.latent(&w, sample_index)?);
        Ok((self.future_from_output(past, &out, offset)?, w))
    }
}

#[derive(Clone, Debug)]
pub struct PastEncoding {
    /// Joint-major DCT coefficients of the padded past.
    pub h0: Vec<f64>,
    pub feature: Vec<f64>,
    block_inputs: Vec<Vec<f64>>,
    block_caches: Vec<BlockCache>,
    pooled: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct DecoderCache {
    fusion_input: Vec<f64>,
    block_inputs: Vec<Vec<f64>>,
    block_caches: Vec<BlockCache>,
}

#[derive(Clone, Debug)]
pub struct SampleTrace {
    pub coefficients: Vec<f64>,
    pub latent: Vec<f64>,
    /// Full padded-length output `T × V × 3` (centered coordinates).
    pub output: Vec<f64>,
    qlp: Option<QlpCache>,
    decoder: DecoderCache,
}

#[derive(Clone, Debug)]
pub struct WindowTrace {
    pub encoding: PastEncoding,
    pub samples: Vec<SampleTrace>,
}

/// A parameter snapshot with its normalized adjacencies and orthonormal
/// directions computed once.
pub struct Prepared<'a> {
    model: &'a Model,
    encoder_adj: Vec<Tensor>,
    decoder_adj: Vec<Tensor>,
    directions: Option<GramSchmidtCache>,
}

impl<'a> Prepared<'a> {
    pub fn model(&self) -> &'a Model {
        self.model
    }

    /// Orthonormal directions (`None` in MQ mode).
    pub fn directions(&self) -> Option<&Tensor> {
        self.directions.as_ref().map(GramSchmidtCache::output)
    }

    pub fn encode(&self, freq: &FrequencyMotion) -> PastEncoding {
        let p = &self.model.params;
        let v = self.model.profile.joints();
        let ch = self.model.profile.channels();
        let h0 = freq.joint_major();
        let mut h = h0.clone();
        let mut block_inputs = Vec::new();
        let mut block_caches = Vec::new();
        for (blk, adj) in p.encoder.iter().zip(&self.encoder_adj) {
            let (out, cache) = blk.forward(adj, &h);
            block_inputs.push(std::mem::replace(&mut h, out));
            block_caches.push(cache);
        }
        let mut pooled = vec![0.0; ch];
        for row in h.chunks(ch) {
            for (a, b) in pooled.iter_mut().zip(row) {
                *a += b;
            }
        }
        pooled.iter_mut().for_each(|x| *x /= v as f64);
        let feature = p.encoder_out.forward(&pooled);
        PastEncoding {
            h0,
            feature,
            block_inputs,
            block_caches,
            pooled,
        }
    }

    /// QLP coefficients for query `k` (empty in MQ mode).
    pub fn coefficients(&self, enc: &PastEncoding, k: usize) -> (Vec<f64>, Option<QlpCache>) {
        let p = &self.model.params;
        let Some(qlp) = &p.qlp else {
            return (Vec::new(), None);
        };
        let input: Vec<f64> = match self.model.mode {
            AblationMode::Full => enc.feature.iter().chain(p.queries.query(k)).copied().collect(),
            _ => enc.feature.clone(),
        };
        let (w, cache) = qlp.forward(&input);
        (w, Some(cache))
    }

    /// Decoder latent input for sample `k` with coefficients `w`.
    pub fn latent(&self, w: &[f64], k: usize) -> Result<Vec<f64>> {
        let q = self.model.params.queries.query(k);
        match (self.model.mode, self.directions()) {
            (AblationMode::Mq, _) => Ok(q.to_vec()),
            (AblationMode::Full, Some(d)) => combine(w, d),
            (AblationMode::MqSld, Some(d)) => {
                let mut z = combine(w, d)?;
                z.extend_from_slice(q);
                Ok(z)
            }
            _ => Err(Error::State("latent directions missing".into())),
        }
    }

    /// Full padded-length output `T × V × 3` for a latent input.
    pub fn decode(&self, enc: &PastEncoding, latent: &[f64]) -> (Vec<f64>, DecoderCache) {
        let profile = &self.model.profile;
        let p = &self.model.params;
        let fusion_input: Vec<f64> = enc.feature.iter().chain(latent).copied().collect();
        let mut h = p.fusion.forward(&fusion_input);
        for (x, r) in h.iter_mut().zip(&enc.h0) {
            *x += r;
        }
        let mut block_inputs = Vec::new();
        let mut block_caches = Vec::new();
        for (blk, adj) in p.decoder.iter().zip(&self.decoder_adj) {
            let (out, cache) = blk.forward(adj, &h);
            block_inputs.push(std::mem::replace(&mut h, out));
            block_caches.push(cache);
        }
        let output = self.to_time(&h);
        debug_assert_eq!(output.len(), profile.total_length() * profile.joints() * 3);
        (
            output,
            DecoderCache {
                fusion_input,
                block_inputs,
                block_caches,
            },
        )
    }

    fn to_time(&self, h: &[f64]) -> Vec<f64> {
        let profile = &self.model.profile;
        let (n, v, t) = (profile.n_freq, profile.joints(), profile.total_length());
        let freq = joint_major_to_freq(h, n, v);
        let mut out = vec![0.0; t * v * 3];
        gemm_tn(&self.model.basis.forward().data()[..n * t], &freq, &mut out, t, n, v * 3);
        out
    }

    fn to_time_backward(&self, g_out: &[f64]) -> Vec<f64> {
        let profile = &self.model.profile;
        let (n, v, t) = (profile.n_freq, profile.joints(), profile.total_length());
        let mut g_freq = vec![0.0; n * v * 3];
        gemm_nn(&self.model.basis.forward().data()[..n * t], g_out, &mut g_freq, n, t, v * 3);
        freq_to_joint_major(&g_freq, n, v)
    }

    /// Encodes once and decodes every query.
    pub fn forward_window(&self, freq: &FrequencyMotion) -> Result<WindowTrace> {
        let encoding = self.encode(freq);
        let samples = (0..self.model.k())
            .map(|k| {
                let (coefficients, qlp) = self.coefficients(&encoding, k);
                let latent = self.latent(&coefficients, k)?;
                let (output, decoder) = self.decode(&encoding, &latent);
                Ok(SampleTrace {
                    coefficients,
                    latent,
                    output,
                    qlp,
                    decoder,
                })
            })
            .collect::<Result<_>>()?;
        Ok(WindowTrace { encoding, samples })
    }

    /// Backpropagates per-sample output gradients through one window,
    /// accumulating into `acc`, an [`EffectiveGrads`] buffer.
    pub fn backward_window(&self, trace: &WindowTrace, grad_outputs: &[Vec<f64>], acc: &mut EffectiveGrads) -> Result<()> {
        let p = &self.model.params;
        let c = self.model.profile.c_latent;
        let ch = self.model.profile.channels();
        let v = self.model.profile.joints();
        let g = &mut acc.0;
        let mut g_feature = vec![0.0; c];
        for (k, (sample, g_out)) in trace.samples.iter().zip(grad_outputs).enumerate() {
            if g_out.iter().all(|&x| x == 0.0) {
                continue;
            }
            // Decoder.
            let mut gh = self.to_time_backward(g_out);
            for i in (0..p.decoder.len()).rev() {
                gh = p.decoder[i].backward(
                    &self.decoder_adj[i],
                    &sample.decoder.block_inputs[i],
                    &sample.decoder.block_caches[i],
                    &gh,
                    &mut g.decoder[i],
                );
            }
            let g_in = p.fusion.backward(&sample.decoder.fusion_input, &gh, &mut g.fusion);
            let (g_feat, g_latent) = g_in.split_at(c);
            add_into(&mut g_feature, g_feat);
            // Latent pathway.
            let q_grad = |g: &mut ModelParams, gq: &[f64]| {
                let width = g.queries.width();
                add_into(&mut g.queries.queries.data_mut()[k * width..(k + 1) * width], gq);
            };
            match self.model.mode {
                AblationMode::Mq => q_grad(g, g_latent),
                mode => {
                    let dirs = self.directions().ok_or_else(|| Error::State("latent directions missing".into()))?;
                    let (g_z, g_q) = g_latent.split_at(c);
                    let gd = &mut g.directions.as_mut().expect("directions present").raw;
                    let g_w = combine_backward(&sample.coefficients, dirs, g_z, gd);
                    let qlp = p.qlp.as_ref().expect("qlp present");
                    let g_qlp = g.qlp.as_mut().expect("qlp grads present");
                    let g_input = qlp.backward(sample.qlp.as_ref().expect("qlp cache"), &g_w, g_qlp);
                    add_into(&mut g_feature, &g_input[..c]);
                    if mode == AblationMode::Full {
                        q_grad(g, &g_input[c..]);
                    } else {
                        q_grad(g, g_q);
                    }
                }
            }
        }
        // Encoder.
        let enc = &trace.encoding;
        let g_pooled = p.encoder_out.backward(&enc.pooled, &g_feature, &mut g.encoder_out);
        let mut gh: Vec<f64> = (0..v).flat_map(|_| g_pooled.iter().map(|x| x / v as f64)).collect();
        debug_assert_eq!(gh.len(), v * ch);
        for i in (0..p.encoder.len()).rev() {
            gh = p.encoder[i].backward(
                &self.encoder_adj[i],
                &enc.block_inputs[i],
                &enc.block_caches[i],
                &gh,
                &mut g.encoder[i],
            );
        }
        Ok(())
    }

    /// Converts accumulated gradients on the normalized adjacencies and
    /// orthonormal directions into gradients on the raw parameters.
    pub fn pull_back(&self, acc: EffectiveGrads) -> Result<ModelParams> {
        let mut g = acc.0;
        for (blk, adj) in g.encoder.iter_mut().zip(&self.encoder_adj) {
            blk.adjacency = row_softmax_backward(adj, &blk.adjacency);
        }
        for (blk, adj) in g.decoder.iter_mut().zip(&self.decoder_adj) {
            blk.adjacency = row_softmax_backward(adj, &blk.adjacency);
        }
        if let (Some(gd), Some(cache)) = (g.directions.as_mut(), &self.directions) {
            gd.raw = orthonormalize_backward(cache, &gd.raw)?;
        }
        Ok(g)
    }

    pub fn zero_grads(&self) -> EffectiveGrads {
        EffectiveGrads(self.model.params.zeros_like())
    }
}

/// Gradient buffer whose adjacency and direction slots hold gradients with
/// respect to the *normalized* adjacency and *orthonormal* directions;
/// turn into raw-parameter gradients with [`Prepared::pull_back`].
#[derive(Clone, Debug)]
pub struct EffectiveGrads(pub(crate) ModelParams);

impl EffectiveGrads {
    pub fn add(&mut self, other: &EffectiveGrads) -> Result<()> {
        self.0.add_scaled(1.0, &other.0)
    }
}

fn add_into(dst: &mut [f64], src: &[f64]) {
    for (a, b) in dst.iter_mut().zip(src) {
        *a += b;
    }
}

#[cfg(test)]
#[allow(clippy::needless_range_loop)]
mod tests {
    use super::*;
    use crate::numkit::grad_check;

    fn jitter(model: &mut Model, seed: u64, scale: f64) {
        let mut rng = Rng::new(seed);
        for (_, t) in model.params_mut().named_tensors_mut() {
            let noise = rng.gaussian(t.shape()).scale(scale);
            t.axpy(1.0, &noise).unwrap();
        }
    }

    fn random_past(profile: &Profile, seed: u64) -> PoseSequence {
        let sk = profile.skeleton().unwrap();
        let frames = Rng::new(seed).gaussian(&[profile.t_past, profile.joints(), 3]).scale(0.3);
        PoseSequence::from_parts(sk, profile.fps, frames).unwrap()
    }

    fn probe_loss(outputs: &[Vec<f64>], probes: &[Tensor]) -> f64 {
        outputs
            .iter()
            .zip(probes)
            .map(|(o, p)| o.iter().zip(p.data()).map(|(a, b)| (a * b).sin()).sum::<f64>())
            .sum()
    }

    fn window_loss(model: &Model, freq: &FrequencyMotion, probes: &[Tensor]) -> f64 {
        let prep = model.prepare().unwrap();
        let trace = prep.forward_window(freq).unwrap();
        let outs: Vec<Vec<f64>> = trace.samples.into_iter().map(|s| s.output).collect();
        probe_loss(&outs, probes)
    }

    fn check_all_gradients(mode: AblationMode) {
        let profile = Profile::micro();
        let mut model = Model::init(profile.clone(), mode, 3, &mut Rng::new(11)).unwrap();
        jitter(&mut model, 12, 0.3);
        let past = random_past(&profile, 13);
        let freq = preprocess(&past, model.basis(), profile.n_freq).unwrap();
        let out_len = profile.total_length() * profile.joints() * 3;
        let mut rng = Rng::new(14);
        let probes: Vec<Tensor> = (0..3).map(|_| rng.gaussian(&[out_len])).collect();

        let prep = model.prepare().unwrap();
        let trace = prep.forward_window(&freq).unwrap();
        let g_out: Vec<Vec<f64>> = trace
            .samples
            .iter()
            .zip(&probes)
            .map(|(s, p)| s.output.iter().zip(p.data()).map(|(a, b)| b * (a * b).cos()).collect())
            .collect();
        let mut acc = prep.zero_grads();
        prep.backward_window(&trace, &g_out, &mut acc).unwrap();
        let grads = prep.pull_back(acc).unwrap();

        let names: Vec<String> = model.params().named_tensors().into_iter().map(|(n, _)| n).collect();
        for (idx, name) in names.iter().enumerate() {
            let analytic = grads.named_tensors()[idx].1.clone();
            let base = model.params().named_tensors()[idx].1.clone();
            let err = grad_check(
                |t| {
                    let mut m = model.clone();
                    *m.params_mut().named_tensors_mut()[idx].1 = t.clone();
                    window_loss(&m, &freq, &probes)
                },
                &analytic,
                &base,
                1e-6,
            )
            .unwrap();
            assert!(err < 1e-6, "{mode} {name}: {err}");
        }
    }

    #[test]
    fn gradients_full_mode() {
        check_all_gradients(AblationMode::Full);
    }

    #[test]
    fn gradients_mq_sld_mode() {
        check_all_gradients(AblationMode::MqSld);
    }

    #[test]
    fn gradients_mq_mode() {
        check_all_gradients(AblationMode::Mq);
    }

    #[test]
    fn static_past_has_only_dc_coefficients() {
        let profile = Profile::tiny();
        let sk = profile.skeleton().unwrap();
        let pose = Rng::new(2).gaussian(&[profile.joints() * 3]);
        let frames: Vec<f64> = (0..profile.t_past).flat_map(|_| pose.data().iter().copied()).collect();
        let past = PoseSequence::from_parts(sk, 25, Tensor::new(&[profile.t_past, profile.joints(), 3], frames).unwrap())
            .unwrap();
        let freq = preprocess(&past, &DctBasis::new(profile.total_length()).unwrap(), profile.n_freq).unwrap();
        let w = profile.joints() * 3;
        assert!(freq.coeffs.data()[..w].iter().any(|x| x.abs() > 1e-3));
        assert!(freq.coeffs.data()[w..].iter().all(|x| x.abs() < 1e-12));
    }

    #[test]
    fn full_rank_preprocess_reconstructs_padded_past() {
        let mut profile = Profile::tiny();
        profile.n_freq = profile.total_length();
        let past = random_past(&profile, 3);
        let basis = DctBasis::new(profile.total_length()).unwrap();
        let freq = preprocess(&past, &basis, profile.n_freq).unwrap();
        let w = profile.joints() * 3;
        let rec = basis
            .reconstruct(&freq.coeffs.reshape(&[profile.n_freq, w]).unwrap())
            .unwrap();
        for t in 0..profile.total_length() {
            let src = past.frame(t.min(profile.t_past - 1));
            for (a, b) in rec.row(t).iter().zip(src) {
                assert!((a - b).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn preprocess_rejects_wrong_length() {
        let model = Model::init(Profile::tiny(), AblationMode::Full, 4, &mut Rng::new(1)).unwrap();
        let long = random_past(&Profile { t_past: 9, ..Profile::tiny() }, 1);
        assert!(matches!(model.predict_k(&long), Err(Error::Argument(_))));
    }

    #[test]
    fn encoder_is_permutation_invariant() {
        // Old joint i becomes new joint perm[i]; the permuted skeleton keeps
        // its root at 0.
        let perm = [0usize, 3, 4, 1, 2];
        let tiny = Profile::tiny();
        let mut parents = vec![0i64; 5];
        for (i, &p) in tiny.parents.iter().enumerate() {
            parents[perm[i]] = if p < 0 { -1 } else { perm[p as usize] as i64 };
        }
        let permuted_profile = Profile {
            parents,
            joint_names: None,
            ..tiny.clone()
        };
        let mut a = Model::init(tiny.clone(), AblationMode::Full, 4, &mut Rng::new(5)).unwrap();
        jitter(&mut a, 6, 0.2);
        let mut params = a.params().clone();
        for (blk, src) in params.encoder.iter_mut().zip(&a.params().encoder) {
            for i in 0..5 {
                for j in 0..5 {
                    blk.adjacency.data_mut()[perm[i] * 5 + perm[j]] = src.adjacency.data()[i * 5 + j];
                }
            }
        }
        let b = Model::new(permuted_profile, AblationMode::Full, params).unwrap();

        let past = random_past(&tiny, 7);
        let fa = preprocess(&past, a.basis(), tiny.n_freq).unwrap();
        let mut fb = fa.clone();
        for n in 0..tiny.n_freq {
            for i in 0..5 {
                for c in 0..3 {
                    fb.coeffs.data_mut()[(n * 5 + perm[i]) * 3 + c] = fa.coeffs.data()[(n * 5 + i) * 3 + c];
                }
            }
        }
        let ea = a.prepare().unwrap().encode(&fa).feature;
        let eb = b.prepare().unwrap().encode(&fb).feature;
        for (x, y) in ea.iter().zip(&eb) {
            assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn decode_depends_on_latent_and_is_continuous() {
        let profile = Profile::tiny();
        let mut model = Model::init(profile.clone(), AblationMode::Full, 4, &mut Rng::new(8)).unwrap();
        jitter(&mut model, 9, 0.1);
        let prep = model.prepare().unwrap();
        let enc = prep.encode(&preprocess(&random_past(&profile, 10), model.basis(), profile.n_freq).unwrap());
        let mut rng = Rng::new(11);
        let z = rng.gaussian(&[profile.c_latent]);
        let dir = rng.gaussian(&[profile.c_latent]);
        let (y0, _) = prep.decode(&enc, z.data());
        let dist = |d: f64| {
            let zz: Vec<f64> = z.data().iter().zip(dir.data()).map(|(a, b)| a + d * b).collect();
            let (y, _) = prep.decode(&enc, &zz);
            y.iter().zip(&y0).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt()
        };
        assert!(dist(1.0) > 0.0);
        let slopes: Vec<f64> = [1e-2, 1e-4, 1e-6].iter().map(|&d| dist(d) / d).collect();
        // Bounded slope: at most the product of layer operator norms, here
        // loosely bounded by the fusion weight's Frobenius norm times the
        // residual gain of two tanh blocks.
        let fusion = model.params().fusion.weight.norm();
        let gain: f64 = model
            .params()
            .decoder
            .iter()
            .map(|b| 1.0 + b.weight.norm())
            .product();
        for s in &slopes {
            assert!(*s <= fusion * gain * dir.norm() + 1e-9);
        }
        assert!(dist(1e-8) < 1e-6);
    }

    #[test]
    fn prediction_shapes_for_all_profiles() {
        for (profile, k) in [(Profile::standard(), 50), (Profile::tiny(), 10), (Profile::micro(), 3)] {
            for mode in AblationMode::ALL {
                let model = Model::init(profile.clone(), mode, k, &mut Rng::new(1)).unwrap();
                let set = model.predict_k(&random_past(&profile, 2)).unwrap();
                assert_eq!(set.futures.len(), k);
                assert_eq!(set.coefficients.samples(), k);
                assert_eq!(set.coefficients.directions(), model.direction_count());
                for f in &set.futures {
                    assert_eq!(f.frames().shape(), &[profile.t_future, profile.joints(), 3]);
                    assert_eq!(f.fps(), profile.fps);
                }
            }
        }
    }

    #[test]
    fn mismatched_params_rejected() {
        let p = ModelParams::init(&Profile::tiny(), AblationMode::Full, 4, &mut Rng::new(1)).unwrap();
        assert!(matches!(
            Model::new(Profile::tiny(), AblationMode::Mq, p.clone()),
            Err(Error::Geometry(_))
        ));
        assert!(Model::new(Profile::micro(), AblationMode::Full, p).is_err());
    }

    #[test]
    fn coefficients_reproduce_futures_and_edits() {
        let profile = Profile::tiny();
        let mut model = Model::init(profile.clone(), AblationMode::Full, 6, &mut Rng::new(3)).unwrap();
        jitter(&mut model, 4, 0.1);
        let past = random_past(&profile, 5);
        let set = model.predict_k(&past).unwrap();
        let again = model.predict_k(&past).unwrap();
        assert_eq!(set, again);
        for i in 0..6 {
            let (f, _) = model.predict_edited(&past, &set, i, &[0.0; 4]).unwrap();
            assert_eq!(f, set.futures[i]);
        }
        let deltas = [0.5, -0.25, 0.0, 1.0];
        let (edited, w) = model.predict_edited(&past, &set, 2, &deltas).unwrap();
        assert_ne!(edited, set.futures[2]);
        let dirs = model.params().directions.as_ref().unwrap().effective().unwrap();
        let z0 = combine(set.coefficients.row(2), &dirs).unwrap();
        let z1 = combine(&w, &dirs).unwrap();
        let shift: f64 = z0.iter().zip(&z1).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let norm: f64 = deltas.iter().map(|d| d * d).sum::<f64>().sqrt();
        assert!((shift - norm).abs() < 1e-12);
        assert!(model.predict_edited(&past, &set, 6, &deltas).is_err());
    }

    #[test]
    fn duplicate_queries_give_identical_futures() {
        let profile = Profile::tiny();
        let mut model = Model::init(profile.clone(), AblationMode::Full, 4, &mut Rng::new(3)).unwrap();
        jitter(&mut model, 4, 0.1);
        let q0 = model.params().queries.query(0).to_vec();
        let width = q0.len();
        model.params_mut().queries.queries.data_mut()[width..2 * width].copy_from_slice(&q0);
        let set = model.predict_k(&random_past(&profile, 1)).unwrap();
        assert_eq!(set.futures[0], set.futures[1]);
        assert_ne!(set.futures[0], set.futures[2]);
    }

    #[test]
    fn mq_mode_has_nothing_to_edit() {
        let profile = Profile::tiny();
        let model = Model::init(profile.clone(), AblationMode::Mq, 4, &mut Rng::new(3)).unwrap();
        let past = random_past(&profile, 1);
        let set = model.predict_k(&past).unwrap();
        assert!(matches!(model.predict_edited(&past, &set, 0, &[]), Err(Error::State(_))));
    }

    #[test]
    fn translation_carries_through() {
        let profile = Profile::tiny();
        let mut model = Model::init(profile.clone(), AblationMode::Full, 4, &mut Rng::new(3)).unwrap();
        jitter(&mut model, 4, 0.1);
        let past = random_past(&profile, 6);
        let offset = [1.5, -0.25, 3.0];
        let moved_data: Vec<f64> = past
            .frames()
            .data()
            .iter()
            .enumerate()
            .map(|(i, x)| x + offset[i % 3])
            .collect();
        let moved = PoseSequence::from_parts(
            past.skeleton().clone(),
            past.fps(),
            Tensor::new(past.frames().shape(), moved_data).unwrap(),
        )
        .unwrap();
        let a = model.predict_k(&past).unwrap();
        let b = model.predict_k(&moved).unwrap();
        for (fa, fb) in a.futures.iter().zip(&b.futures) {
            for (i, (x, y)) in fa.frames().data().iter().zip(fb.frames().data()).enumerate() {
                assert!((x + offset[i % 3] - y).abs() < 1e-12);
            }
        }
    }
}
