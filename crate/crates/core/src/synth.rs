//! Synthetic desk instances with known ground truth.

use ndarray::{Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::imageops::{circ_conv_centered, gaussian_filter};
use crate::prox::prox_l0_nonneg_cols;

#[derive(Debug, Clone, PartialEq)]
pub struct NmfInstance {
    pub a: Array2<f64>,
    pub b_true: Array2<f64>,
    pub c_true: Array2<f64>,
}

/// `A = B₀C₀` with `B₀` nonnegative and `s`-sparse per column, `C₀`
/// uniform on `[0, 1]`.
pub fn nmf_instance(m: usize, n: usize, r: usize, s: usize, seed: u64) -> Result<NmfInstance> {
    if s > m || r == 0 {
        return Err(Error::ParameterDomain(format!(
            "need 1 <= rank and s <= m (rank {r}, s {s}, m {m})"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dense = Array2::from_shape_fn((m, r), |_| rng.random::<f64>());
    let b_true = prox_l0_nonneg_cols(dense.view(), s)?;
    let c_true = Array2::from_shape_fn((r, n), |_| rng.random::<f64>());
    Ok(NmfInstance {
        a: b_true.dot(&c_true),
        b_true,
        c_true,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BidInstance {
    pub f: Array2<f64>,
    pub u_true: Array2<f64>,
    pub kernel_true: Array2<f64>,
}

/// Piecewise-constant image: a background level plus `rects` overlapping
/// axis-aligned rectangles of random intensity in `[0, 1]`.
pub fn piecewise_constant_image(m: usize, n: usize, rects: usize, seed: u64) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut u = Array2::from_elem((m, n), rng.random_range(0.0..0.3));
    for _ in 0..rects {
        let (i0, j0) = (rng.random_range(0..m), rng.random_range(0..n));
        let h = rng.random_range(m / 8 + 1..=m / 2);
        let w = rng.random_range(n / 8 + 1..=n / 2);
        let level = rng.random::<f64>();
        for i in i0..(i0 + h).min(m) {
            for j in j0..(j0 + w).min(n) {
                u[[i, j]] = level;
            }
        }
    }
    u
}

/// Noise-free blurred observation `f = u_true ∗ kernel_true` of a
/// piecewise-constant image under a Gaussian kernel of width `sigma`.
pub fn bid_instance(size: usize, kernel_size: usize, sigma: f64, seed: u64) -> Result<BidInstance> {
    if kernel_size % 2 == 0 || kernel_size > size || !(sigma > 0.0) {
        return Err(Error::ParameterDomain(format!(
            "need an odd kernel no larger than the image and sigma > 0 (kernel {kernel_size}, image {size}, sigma {sigma})"
        )));
    }
    let u_true = piecewise_constant_image(size, size, 8, seed);
    let kernel_true = gaussian_filter(kernel_size, sigma);
    let f = circ_conv_centered(u_true.view(), kernel_true.view())?.mapv(|v| v.clamp(0.0, 1.0));
    Ok(BidInstance {
        f,
        u_true,
        kernel_true,
    })
}

/// Textured test image for dictionary learning: piecewise-constant patches
/// plus a few sinusoidal stripes, scaled to `[0, 1]`.
pub fn texture_image(m: usize, n: usize, seed: u64) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base = piecewise_constant_image(m, n, 6, seed);
    let (fx, fy, ph) = (
        rng.random_range(0.2..0.9),
        rng.random_range(0.2..0.9),
        rng.random_range(0.0..6.3),
    );
    let mut img = Array2::from_shape_fn((m, n), |(i, j)| {
        base[[i, j]] + 0.3 * (fx * i as f64 + fy * j as f64 + ph).sin()
    });
    let (lo, hi) = img
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    if hi > lo {
        img.mapv_inplace(|v| (v - lo) / (hi - lo));
    }
    img
}

/// Column-wise number of nonzeros, handy for sparsity reports.
pub fn column_nnz(b: &Array2<f64>) -> Vec<usize> {
    b.axis_iter(Axis(1))
        .map(|c| c.iter().filter(|v| **v != 0.0).count())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nmf_instance_structure() {
        let inst = nmf_instance(20, 30, 3, 2, 1).unwrap();
        assert_eq!(inst.a.dim(), (20, 30));
        assert!(column_nnz(&inst.b_true).iter().all(|&k| k <= 2));
        assert!(inst.a.iter().all(|&v| v >= 0.0));
        assert!(nmf_instance(3, 3, 1, 4, 0).is_err());
    }

    #[test]
    fn bid_instance_in_range() {
        let inst = bid_instance(32, 5, 0.8, 2).unwrap();
        assert!(inst.f.iter().all(|v| (0.0..=1.0).contains(v)));
        assert!((inst.kernel_true.sum() - 1.0).abs() < 1e-14);
        assert!(bid_instance(32, 4, 0.8, 0).is_err());
        assert_eq!(inst, bid_instance(32, 5, 0.8, 2).unwrap());
    }
}
