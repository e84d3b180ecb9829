//! Row orthonormalization by modified Gram-Schmidt, with a reverse-mode
//! rule so that losses on the orthonormal rows can be pulled back onto the
//! raw (unconstrained) rows.

use super::tensor::dot;
use super::Tensor;
use crate::error::{Error, Result};

/// Pivot norms below this are treated as linear dependence.
pub const DEGENERACY_THRESHOLD: f64 = 1e-10;

/// Intermediates of one orthonormalization, kept for the backward pass.
#[derive(Clone, Debug)]
pub struct GramSchmidtCache {
    rows: usize,
    cols: usize,
    q: Tensor,
    norms: Vec<f64>,
    /// `before[i][j]` is row `i`'s working vector just before it is
    /// projected off `q_j`.
    before: Vec<Vec<Vec<f64>>>,
}

impl GramSchmidtCache {
    pub fn output(&self) -> &Tensor {
        &self.q
    }
}

pub fn orthonormalize(d: &Tensor) -> Result<Tensor> {
    orthonormalize_cached(d).map(|c| c.q)
}

pub fn orthonormalize_cached(d: &Tensor) -> Result<GramSchmidtCache> {
    if d.rank() != 2 {
        return Err(Error::Dimension {
            op: "orthonormalize",
            left: d.shape().to_vec(),
            right: vec![],
        });
    }
    let (m, c) = (d.rows(), d.cols());
    if m > c {
        return Err(Error::Argument(format!(
            "cannot orthonormalize {m} rows in {c} dimensions"
        )));
    }
    let mut q = Tensor::zeros(&[m, c]);
    let mut norms = Vec::with_capacity(m);
    let mut before = Vec::with_capacity(m);
    for i in 0..m {
        let mut v = d.row(i).to_vec();
        let mut snapshots = Vec::with_capacity(i);
        for j in 0..i {
            snapshots.push(v.clone());
            let qj = q.row(j);
            let coef = dot(&v, qj);
            for (x, y) in v.iter_mut().zip(qj) {
                *x -= coef * y;
            }
        }
        let norm = dot(&v, &v).sqrt();
        if norm.is_nan() || norm < DEGENERACY_THRESHOLD {
            return Err(Error::Degenerate { row: i, norm });
        }
        for (dst, x) in q.row_mut(i).iter_mut().zip(&v) {
            *dst = x / norm;
        }
        norms.push(norm);
        before.push(snapshots);
    }
    Ok(GramSchmidtCache {
        rows: m,
        cols: c,
        q,
        norms,
        before,
    })
}

/// Pulls `grad_q` (gradient w.r.t. the orthonormal rows) back to the raw rows.
pub fn orthonormalize_backward(cache: &GramSchmidtCache, grad_q: &Tensor) -> Result<Tensor> {
    cache.q.check_same_shape(grad_q, "orthonormalize_backward")?;
    let (m, c) = (cache.rows, cache.cols);
    let mut gq = grad_q.clone();
    let mut grad_raw = Tensor::zeros(&[m, c]);
    for i in (0..m).rev() {
        let qi = cache.q.row(i);
        let gqi = gq.row(i).to_vec();
        let proj = dot(&gqi, qi);
        let mut gv: Vec<f64> = gqi
            .iter()
            .zip(qi)
            .map(|(g, q)| (g - proj * q) / cache.norms[i])
            .collect();
        // Undo `v <- v - <v, q_j> q_j` for j = i-1, ..., 0.
        for j in (0..i).rev() {
            let vb = &cache.before[i][j];
            let qj = cache.q.row(j).to_vec();
            let coef = dot(vb, &qj);
            let g_dot_q = dot(&gv, &qj);
            for ((g, vbk), gqj) in gq.row_mut(j).iter_mut().zip(vb).zip(&gv) {
                *g -= coef * gqj + g_dot_q * vbk;
            }
            for (g, q) in gv.iter_mut().zip(&qj) {
                *g -= g_dot_q * q;
            }
        }
        grad_raw.row_mut(i).copy_from_slice(&gv);
    }
    Ok(grad_raw)
}
