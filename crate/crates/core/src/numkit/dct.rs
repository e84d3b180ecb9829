use std::f64::consts::PI;

use super::Tensor;
use crate::error::{Error, Result};

/// Orthonormal DCT-II projection over a fixed sequence length.
///
/// `forward[k][t] = sqrt(2/T) * c_k * cos(pi * (2t + 1) * k / (2T))` with
/// `c_0 = 1/sqrt(2)` and `c_k = 1` otherwise, so `inverse` is the transpose.
#[derive(Clone, Debug)]
pub struct DctBasis {
    total_length: usize,
    forward: Tensor,
    inverse: Tensor,
}

impl DctBasis {
    pub fn new(total_length: usize) -> Result<Self> {
        if total_length < 2 {
            return Err(Error::Argument(format!(
                "DCT length must be at least 2, got {total_length}"
            )));
        }
        let t = total_length as f64;
        let forward = Tensor::from_fn(&[total_length, total_length], |idx| {
            let (k, n) = (idx / total_length, idx % total_length);
            let ck = if k == 0 { 1.0 / 2f64.sqrt() } else { 1.0 };
            (2.0 / t).sqrt() * ck * (PI * (2 * n + 1) as f64 * k as f64 / (2.0 * t)).cos()
        });
        let inverse = forward.transpose()?;
        Ok(Self {
            total_length,
            forward,
            inverse,
        })
    }

    pub fn total_length(&self) -> usize {
        self.total_length
    }

    pub fn forward(&self) -> &Tensor {
        &self.forward
    }

    pub fn inverse(&self) -> &Tensor {
        &self.inverse
    }

    fn check_retained(&self, retained: usize) -> Result<()> {
        if retained == 0 || retained > self.total_length {
            return Err(Error::Argument(format!(
                "retained rows {retained} outside 1..={}",
                self.total_length
            )));
        }
        Ok(())
    }

    /// First `retained` rows of the forward matrix applied to `signal`
    /// (`T × channels`), giving `retained × channels`.
    pub fn project(&self, signal: &Tensor, retained: usize) -> Result<Tensor> {
        self.check_retained(retained)?;
        let (t, ch) = (signal.rows(), signal.cols());
        if signal.rank() != 2 || t != self.total_length {
            return Err(Error::Dimension {
                op: "dct project",
                left: vec![retained, self.total_length],
                right: signal.shape().to_vec(),
            });
        }
        let mut out = vec![0.0; retained * ch];
        super::tensor::gemm_nn(
            &self.forward.data()[..retained * t],
            signal.data(),
            &mut out,
            retained,
            t,
            ch,
        );
        Tensor::new(&[retained, ch], out)
    }

    /// First `coeffs.rows()` columns of the inverse applied to `coeffs`
    /// (`retained × channels`), giving `T × channels`.
    pub fn reconstruct(&self, coeffs: &Tensor) -> Result<Tensor> {
        let (retained, ch) = (coeffs.rows(), coeffs.cols());
        self.check_retained(retained)?;
        if coeffs.rank() != 2 {
            return Err(Error::Dimension {
                op: "dct reconstruct",
                left: vec![self.total_length, retained],
                right: coeffs.shape().to_vec(),
            });
        }
        let t = self.total_length;
        let mut out = vec![0.0; t * ch];
        // inverse[:, :N] · C == forward[:N, :]ᵀ · C
        super::tensor::gemm_tn(
            &self.forward.data()[..retained * t],
            coeffs.data(),
            &mut out,
            t,
            retained,
            ch,
        );
        Tensor::new(&[t, ch], out)
    }
}

pub fn dct_basis(total_length: usize) -> Result<DctBasis> {
    DctBasis::new(total_length)
}
