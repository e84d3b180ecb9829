use crate::numkit::tensor::{gemm_nn, gemm_nt, gemm_tn};
use crate::numkit::{Rng, Tensor};

/// `y = W x + b`, `W` is `out × in`.
#[derive(Clone, Debug, PartialEq)]
pub struct Linear {
    pub weight: Tensor,
    pub bias: Tensor,
}

impl Linear {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            weight: Tensor::zeros(&[outputs, inputs]),
            bias: Tensor::zeros(&[outputs]),
        }
    }

    /// Gaussian weights with standard deviation `gain / sqrt(inputs)`, zero bias.
    pub fn random(rng: &mut Rng, inputs: usize, outputs: usize, gain: f64) -> Self {
        let std = gain / (inputs.max(1) as f64).sqrt();
        Self {
            weight: rng.gaussian(&[outputs, inputs]).scale(std),
            bias: Tensor::zeros(&[outputs]),
        }
    }

    pub fn inputs(&self) -> usize {
        self.weight.cols()
    }

    pub fn outputs(&self) -> usize {
        self.weight.rows()
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        let mut y = self.bias.data().to_vec();
        gemm_nn(self.weight.data(), x, &mut y, self.outputs(), self.inputs(), 1);
        y
    }

    /// Accumulates parameter gradients into `grad` and returns `dL/dx`.
    pub fn backward(&self, x: &[f64], gy: &[f64], grad: &mut Linear) -> Vec<f64> {
        let (out, inp) = (self.outputs(), self.inputs());
        gemm_nn(gy, x, grad.weight.data_mut(), out, 1, inp);
        for (b, g) in grad.bias.data_mut().iter_mut().zip(gy) {
            *b += g;
        }
        let mut gx = vec![0.0; inp];
        gemm_tn(self.weight.data(), gy, &mut gx, inp, out, 1);
        gx
    }
}

/// Residual spatio-temporal graph block over `V` joints with `ch` channels
/// per joint: `H' = tanh(Â H W + b) + H`, where `Â` is the row softmax of
/// the learnable `adjacency` logits.
#[derive(Clone, Debug, PartialEq)]
pub struct GraphBlock {
    pub adjacency: Tensor,
    pub weight: Tensor,
    pub bias: Tensor,
}

/// Logit given to joint pairs that are not linked in the skeleton.
pub const UNLINKED_LOGIT: f64 = -4.0;

#[derive(Clone, Debug)]
pub struct BlockCache {
    mixed: Vec<f64>,
    activation: Vec<f64>,
}

impl GraphBlock {
    /// Adjacency logits start at 0 on bones and self-links and at
    /// [`UNLINKED_LOGIT`] elsewhere.
    pub fn new(rng: &mut Rng, links: &[Vec<bool>], channels: usize, gain: f64) -> Self {
        let v = links.len();
        let adjacency = Tensor::from_fn(&[v, v], |i| {
            if links[i / v][i % v] {
                0.0
            } else {
                UNLINKED_LOGIT
            }
        });
        Self {
            adjacency,
            weight: rng.gaussian(&[channels, channels]).scale(gain / (channels as f64).sqrt()),
            bias: Tensor::zeros(&[channels]),
        }
    }

    pub fn joints(&self) -> usize {
        self.adjacency.rows()
    }

    pub fn channels(&self) -> usize {
        self.weight.rows()
    }

    /// Row-normalized adjacency `Â`.
    pub fn normalized_adjacency(&self) -> Tensor {
        row_softmax(&self.adjacency)
    }

    pub fn forward(&self, adj: &Tensor, h: &[f64]) -> (Vec<f64>, BlockCache) {
        let (v, ch) = (self.joints(), self.channels());
        let mut mixed = vec![0.0; v * ch];
        gemm_nn(adj.data(), h, &mut mixed, v, v, ch);
        let mut act: Vec<f64> = (0..v).flat_map(|_| self.bias.data().iter().copied()).collect();
        gemm_nn(&mixed, self.weight.data(), &mut act, v, ch, ch);
        act.iter_mut().for_each(|x| *x = x.tanh());
        let out = act.iter().zip(h).map(|(a, x)| a + x).collect();
        (
            out,
            BlockCache {
                mixed,
                activation: act,
            },
        )
    }

    /// Accumulates `dL/dW`, `dL/db` into `grad` and returns `dL/dH`.
    /// `grad.adjacency` receives the gradient with respect to the
    /// *normalized* adjacency; see [`row_softmax_backward`].
    pub fn backward(
        &self,
        adj: &Tensor,
        h: &[f64],
        cache: &BlockCache,
        g_out: &[f64],
        grad: &mut GraphBlock,
    ) -> Vec<f64> {
        let (v, ch) = (self.joints(), self.channels());
        let d_pre: Vec<f64> = g_out
            .iter()
            .zip(&cache.activation)
            .map(|(g, u)| g * (1.0 - u * u))
            .collect();
        gemm_tn(&cache.mixed, &d_pre, grad.weight.data_mut(), ch, v, ch);
        for row in d_pre.chunks(ch) {
            for (b, g) in grad.bias.data_mut().iter_mut().zip(row) {
                *b += g;
            }
        }
        let mut d_mixed = vec![0.0; v * ch];
        gemm_nt(&d_pre, self.weight.data(), &mut d_mixed, v, ch, ch);
        gemm_nt(&d_mixed, h, grad.adjacency.data_mut(), v, ch, v);
        let mut gh = g_out.to_vec();
        gemm_tn(adj.data(), &d_mixed, &mut gh, v, v, ch);
        gh
    }
}

pub fn row_softmax(logits: &Tensor) -> Tensor {
    let mut out = logits.clone();
    let c = logits.cols();
    for row in out.data_mut().chunks_mut(c) {
        let max = row.iter().fold(f64::NEG_INFINITY, |m, &x| m.max(x));
        let mut sum = 0.0;
        for x in row.iter_mut() {
            *x = (*x - max).exp();
            sum += *x;
        }
        row.iter_mut().for_each(|x| *x /= sum);
    }
    out
}

/// Pulls a gradient on softmax rows back to the logits.
pub fn row_softmax_backward(probs: &Tensor, grad: &Tensor) -> Tensor {
    let c = probs.cols();
    let mut out = Tensor::zeros_like(probs);
    for ((o, p), g) in out
        .data_mut()
        .chunks_mut(c)
        .zip(probs.data().chunks(c))
        .zip(grad.data().chunks(c))
    {
        let inner: f64 = p.iter().zip(g).map(|(a, b)| a * b).sum();
        for ((ov, pv), gv) in o.iter_mut().zip(p).zip(g) {
            *ov = pv * (gv - inner);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkit::grad_check;

    fn links(v: usize) -> Vec<Vec<bool>> {
        (0..v)
            .map(|i| (0..v).map(|j| i == j || i + 1 == j || j + 1 == i).collect())
            .collect()
    }

    #[test]
    fn softmax_rows_sum_to_one() {
        let p = row_softmax(&Rng::new(1).gaussian(&[4, 4]));
        for r in 0..4 {
            assert!((p.row(r).iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn linear_gradients() {
        let mut rng = Rng::new(2);
        let lin = Linear::random(&mut rng, 5, 3, 1.0);
        let x = rng.gaussian(&[5]);
        let gy = rng.gaussian(&[3]);
        let mut grad = Linear::zeros(5, 3);
        let gx = lin.backward(x.data(), gy.data(), &mut grad);
        let loss = |xs: &Tensor| -> f64 {
            lin.forward(xs.data()).iter().zip(gy.data()).map(|(a, b)| a * b).sum()
        };
        let gx = Tensor::new(&[5], gx).unwrap();
        assert!(grad_check(loss, &gx, &x, 1e-5).unwrap() < 1e-9);
        let wloss = |w: &Tensor| -> f64 {
            let l = Linear { weight: w.clone(), bias: lin.bias.clone() };
            l.forward(x.data()).iter().zip(gy.data()).map(|(a, b)| a * b).sum()
        };
        assert!(grad_check(wloss, &grad.weight, &lin.weight, 1e-5).unwrap() < 1e-9);
    }

    #[test]
    fn block_gradients() {
        let mut rng = Rng::new(3);
        let (v, ch) = (4, 6);
        let mut blk = GraphBlock::new(&mut rng, &links(v), ch, 1.0);
        blk.adjacency = rng.gaussian(&[v, v]);
        blk.bias = rng.gaussian(&[ch]).scale(0.1);
        let h = rng.gaussian(&[v * ch]);
        let probe = rng.gaussian(&[v * ch]);
        let loss_of = |b: &GraphBlock, hh: &Tensor| -> f64 {
            let (out, _) = b.forward(&b.normalized_adjacency(), hh.data());
            out.iter().zip(probe.data()).map(|(a, p)| (a * p).sin()).sum()
        };
        let adj = blk.normalized_adjacency();
        let (out, cache) = blk.forward(&adj, h.data());
        let g_out: Vec<f64> = out
            .iter()
            .zip(probe.data())
            .map(|(a, p)| p * (a * p).cos())
            .collect();
        let mut grad = GraphBlock {
            adjacency: Tensor::zeros(&[v, v]),
            weight: Tensor::zeros(&[ch, ch]),
            bias: Tensor::zeros(&[ch]),
        };
        let gh = blk.backward(&adj, h.data(), &cache, &g_out, &mut grad);
        let g_logits = row_softmax_backward(&adj, &grad.adjacency);

        let gh = Tensor::new(&[v * ch], gh).unwrap();
        assert!(grad_check(|x| loss_of(&blk, x), &gh, &h, 1e-5).unwrap() < 1e-8);
        let wl = |w: &Tensor| loss_of(&GraphBlock { weight: w.clone(), ..blk.clone() }, &h);
        assert!(grad_check(wl, &grad.weight, &blk.weight, 1e-5).unwrap() < 1e-8);
        let bl = |b: &Tensor| loss_of(&GraphBlock { bias: b.clone(), ..blk.clone() }, &h);
        assert!(grad_check(bl, &grad.bias, &blk.bias, 1e-5).unwrap() < 1e-8);
        let al = |a: &Tensor| loss_of(&GraphBlock { adjacency: a.clone(), ..blk.clone() }, &h);
        assert!(grad_check(al, &g_logits, &blk.adjacency, 1e-5).unwrap() < 1e-8);
    }
}
