//! Proximal maps and projections used by the bundled problems.
//!
//! All maps return one deterministic element of
//! `argmin_q σ(q) + (t/2)‖q − p‖²`. For indicator functions this is the
//! Euclidean projection and does not depend on `t`.

use std::cmp::Ordering;

use ndarray::{Array2, ArrayView2, Axis};

use crate::blockmodel::Tensor;
use crate::error::{Error, Result};

/// Clamp every entry to `[0, 1]`.
pub fn prox_box01(p: &Tensor) -> Tensor {
    p.mapv(|v| v.clamp(0.0, 1.0))
}

/// Elementwise `max(·, 0)`.
pub fn prox_nonneg(p: &Tensor) -> Tensor {
    p.mapv(|v| v.max(0.0))
}

/// Projection onto `{B ≥ 0, every column has at most s nonzeros}`.
///
/// Each column is clamped at zero and only its `s` largest entries are kept.
/// Ties at the cut-off keep the lower row index.
pub fn prox_l0_nonneg_cols(p: ArrayView2<'_, f64>, s: usize) -> Result<Array2<f64>> {
    let m = p.nrows();
    if s > m {
        return Err(Error::ParameterDomain(format!(
            "sparsity level {s} exceeds column length {m}"
        )));
    }
    let mut out = Array2::zeros(p.raw_dim());
    if s == 0 {
        return Ok(out);
    }
    let mut order: Vec<usize> = Vec::with_capacity(m);
    for (col_in, mut col_out) in p.axis_iter(Axis(1)).zip(out.axis_iter_mut(Axis(1))) {
        order.clear();
        order.extend(0..m);
        // Stable sort on descending value keeps lower indices first among ties.
        order.sort_by(|&a, &b| {
            let va = col_in[a].max(0.0);
            let vb = col_in[b].max(0.0);
            vb.partial_cmp(&va).unwrap_or(Ordering::Equal)
        });
        for &row in order.iter().take(s) {
            col_out[row] = col_in[row].max(0.0);
        }
    }
    Ok(out)
}

/// Euclidean projection of all entries of `p` onto the unit simplex
/// `{b ≥ 0, Σ b = 1}` by sorting and thresholding.
pub fn prox_simplex(p: &Tensor) -> Tensor {
    let n = p.len();
    if n == 0 {
        return p.clone();
    }
    let mut sorted: Vec<f64> = p.iter().copied().collect();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap_or(Ordering::Equal));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (j, &u) in sorted.iter().enumerate() {
        cumsum += u;
        let t = (cumsum - 1.0) / (j + 1) as f64;
        if u - t > 0.0 {
            theta = t;
        }
    }
    p.mapv(|v| (v - theta).max(0.0))
}

/// Soft thresholding `sign(p)·max(|p| − w, 0)`; the prox of `w_0‖·‖₁` at
/// scale `t` uses `w = w_0 / t`.
pub fn prox_l1(p: &Tensor, w: f64) -> Tensor {
    if w == 0.0 {
        return p.clone();
    }
    p.mapv(|v| v.signum() * (v.abs() - w).max(0.0))
}

/// Projection onto `{d : Σ d = 0, ‖d‖₂ ≤ 1}`.
///
/// Mean removal followed by radial scaling is the exact projection onto the
/// intersection: the mean-removed point `c` is the projection onto the
/// hyperplane, and for any feasible `q` we have `⟨p − c, q − P(c)⟩ = 0`
/// (both `q` and `P(c)` are zero-mean and `p − c` is constant), so
/// `‖p − q‖² = ‖p − c‖² + ‖c − q‖²` and minimizing over the ball slice of the
/// hyperplane reduces to projecting `c` onto the ball, which keeps it
/// zero-mean.
pub fn prox_filter_constraint(d: &Tensor) -> Tensor {
    let n = d.len();
    if n == 0 {
        return d.clone();
    }
    let mean = d.sum() / n as f64;
    let mut out = d.mapv(|v| v - mean);
    let norm = out.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 1.0 {
        out.mapv_inplace(|v| v / norm);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{arr1, arr2};

    fn t1(v: &[f64]) -> Tensor {
        arr1(v).into_dyn()
    }

    #[test]
    fn box_cases() {
        assert_eq!(prox_box01(&t1(&[-0.5, 0.3, 1.7])), t1(&[0.0, 0.3, 1.0]));
        let inside = t1(&[0.0, 0.5, 1.0]);
        assert_eq!(prox_box01(&inside), inside);
        assert_eq!(prox_box01(&t1(&[-1.0, -2.0])), t1(&[0.0, 0.0]));
    }

    #[test]
    fn nonneg_cases() {
        assert_eq!(prox_nonneg(&t1(&[-1.0, 2.0])), t1(&[0.0, 2.0]));
        assert_eq!(prox_nonneg(&t1(&[0.0, 3.0])), t1(&[0.0, 3.0]));
    }

    #[test]
    fn l0_cases() {
        let col = arr2(&[[3.0], [-1.0], [2.0]]);
        assert_eq!(
            prox_l0_nonneg_cols(col.view(), 1).unwrap(),
            arr2(&[[3.0], [0.0], [0.0]])
        );
        assert_eq!(
            prox_l0_nonneg_cols(col.view(), 2).unwrap(),
            arr2(&[[3.0], [0.0], [2.0]])
        );
        let pos = arr2(&[[1.0, 0.0], [2.0, 5.0], [0.5, 1.0]]);
        assert_eq!(prox_l0_nonneg_cols(pos.view(), 3).unwrap(), pos);
        assert_eq!(
            prox_l0_nonneg_cols(pos.view(), 0).unwrap(),
            Array2::<f64>::zeros((3, 2))
        );
        assert!(prox_l0_nonneg_cols(pos.view(), 4).is_err());
    }

    #[test]
    fn l0_ties_keep_lower_row() {
        let col = arr2(&[[1.0], [2.0], [2.0], [2.0]]);
        assert_eq!(
            prox_l0_nonneg_cols(col.view(), 2).unwrap(),
            arr2(&[[0.0], [2.0], [2.0], [0.0]])
        );
        let zero = arr2(&[[-1.0], [-3.0], [0.0]]);
        assert_eq!(
            prox_l0_nonneg_cols(zero.view(), 2).unwrap(),
            Array2::<f64>::zeros((3, 1))
        );
    }

    #[test]
    fn simplex_cases() {
        assert_eq!(prox_simplex(&t1(&[0.5, 0.5])), t1(&[0.5, 0.5]));
        assert_eq!(prox_simplex(&t1(&[2.0, 0.0])), t1(&[1.0, 0.0]));
        let q = prox_simplex(&t1(&[-3.0, -3.0, -3.0, -3.0]));
        for v in q.iter() {
            assert!((v - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn l1_cases() {
        let p = t1(&[2.0, -0.5]);
        assert_eq!(prox_l1(&p, 0.0), p);
        assert_eq!(prox_l1(&p, 1.0), t1(&[1.0, 0.0]));
        assert_eq!(prox_l1(&t1(&[0.3, -0.9]), 1.0), t1(&[0.0, 0.0]));
        assert_eq!(prox_l1(&t1(&[-3.0]), 1.0), t1(&[-2.0]));
    }

    #[test]
    fn filter_cases() {
        let z = Tensor::zeros(ndarray::IxDyn(&[3, 3]));
        assert_eq!(prox_filter_constraint(&z), z);
        let c = Tensor::from_elem(ndarray::IxDyn(&[3, 3]), 0.7);
        assert!(prox_filter_constraint(&c).iter().all(|v| v.abs() < 1e-15));
        let d = t1(&[3.0, -1.0, 0.0, 2.0]);
        let q = prox_filter_constraint(&d);
        assert!(q.sum().abs() < 1e-14);
        let n: f64 = q.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((n - 1.0).abs() < 1e-14);
    }
}
