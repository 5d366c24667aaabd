//! Blind image deconvolution
//!
//! ```text
//! min_{u,b}  Σ_p Σ_{i,j} log(1 + θ (∇_p u)²_{i,j}) + (λ/2)‖u ∗ b − f‖²
//!            s.t. u ∈ [0,1]^{m1×m2},  b ∈ unit simplex
//! ```
//!
//! Block 0 is the image `u`, block 1 the kernel `b`. The kernel is applied
//! centered (origin at `(n1/2, n2/2)`), so kernel dimensions must be odd.
//!
//! The image gradient follows the calculus of the penalty,
//! `d/dx log(1 + θx²) = 2θx / (1 + θx²)`; it is checked against central
//! differences in the tests.

use ndarray::{Array2, ArrayView2};

use crate::blockmodel::{BlockVector, Problem, Tensor};
use crate::error::{Error, Result};
use crate::imageops::{
    circ_conv_centered, circ_conv_centered_adjoint_image, circ_conv_centered_adjoint_kernel,
    log_penalty, log_penalty_grad,
};
use crate::problems::{sum_sq, view2};
use crate::prox::{prox_box01, prox_simplex};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BidParams {
    pub lambda: f64,
    pub theta: f64,
    pub kernel_shape: (usize, usize),
    /// Multiplier `c ≥ 1` on the kernel block's step parameter.
    pub kernel_step_scale: f64,
}

impl Default for BidParams {
    fn default() -> Self {
        Self {
            lambda: 1e6,
            theta: 1e4,
            kernel_shape: (31, 31),
            kernel_step_scale: 5.0,
        }
    }
}

impl BidParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0) || !(self.theta > 0.0) {
            return Err(Error::ParameterDomain(format!(
                "lambda and theta must be positive (got {}, {})",
                self.lambda, self.theta
            )));
        }
        if !(self.kernel_step_scale >= 1.0) {
            return Err(Error::ParameterDomain(format!(
                "kernel step scale must be >= 1, got {}",
                self.kernel_step_scale
            )));
        }
        let (n1, n2) = self.kernel_shape;
        if n1 % 2 == 0 || n2 % 2 == 0 {
            return Err(Error::ParameterDomain(format!(
                "kernel dimensions must be odd, got {n1}x{n2}"
            )));
        }
        Ok(())
    }
}

/// `H(u, b)` for the given data.
pub fn bid_smooth(
    u: ArrayView2<'_, f64>,
    b: ArrayView2<'_, f64>,
    f: ArrayView2<'_, f64>,
    params: &BidParams,
) -> Result<f64> {
    let r = circ_conv_centered(u, b)? - f;
    Ok(log_penalty(u, params.theta) + 0.5 * params.lambda * sum_sq(r.iter()))
}

/// `(∇_u H, ∇_b H)`; the kernel gradient covers only the kernel window.
pub fn bid_grads(
    u: ArrayView2<'_, f64>,
    b: ArrayView2<'_, f64>,
    f: ArrayView2<'_, f64>,
    params: &BidParams,
) -> Result<(Array2<f64>, Array2<f64>)> {
    if u.dim() != f.dim() {
        return Err(Error::Shape(format!(
            "image {:?} and data {:?} differ",
            u.dim(),
            f.dim()
        )));
    }
    let r = (circ_conv_centered(u, b)? - f) * params.lambda;
    let gu = log_penalty_grad(u, params.theta) + circ_conv_centered_adjoint_image(r.view(), b)?;
    let gb = circ_conv_centered_adjoint_kernel(r.view(), u, b.dim())?;
    Ok((gu, gb))
}

#[derive(Debug, Clone)]
pub struct BidProblem {
    f: Array2<f64>,
    params: BidParams,
}

impl BidProblem {
    pub fn new(f: Array2<f64>, params: BidParams) -> Result<Self> {
        params.validate()?;
        if let Some(v) = f.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::Data(format!(
                "observed image must lie in [0, 1], found {v}"
            )));
        }
        let (n1, n2) = params.kernel_shape;
        if n1 > f.nrows() || n2 > f.ncols() {
            return Err(Error::Shape(format!(
                "kernel {n1}x{n2} larger than image {:?}",
                f.dim()
            )));
        }
        Ok(Self { f, params })
    }

    pub fn params(&self) -> &BidParams {
        &self.params
    }

    pub fn observed(&self) -> &Array2<f64> {
        &self.f
    }

    /// Image `u = f` and the uniform kernel.
    pub fn default_init(&self) -> BlockVector {
        let (n1, n2) = self.params.kernel_shape;
        let b = Array2::from_elem((n1, n2), 1.0 / (n1 * n2) as f64);
        BlockVector::new(vec![self.f.clone().into_dyn(), b.into_dyn()])
    }

    fn parts<'a>(&self, x: &'a BlockVector) -> (ArrayView2<'a, f64>, ArrayView2<'a, f64>) {
        (
            view2(x.block(0)).expect("image block is a matrix"),
            view2(x.block(1)).expect("kernel block is a matrix"),
        )
    }
}

impl Problem for BidProblem {
    fn num_blocks(&self) -> usize {
        2
    }

    fn eval_smooth(&self, x: &BlockVector) -> f64 {
        let (u, b) = self.parts(x);
        bid_smooth(u, b, self.f.view(), &self.params).expect("shapes fixed at construction")
    }

    fn eval_nonsmooth(&self, block: usize, value: &Tensor) -> f64 {
        let feasible = match block {
            0 => value.iter().all(|v| (0.0..=1.0).contains(v)),
            _ => value.iter().all(|&v| v >= 0.0) && (value.sum() - 1.0).abs() <= 1e-9,
        };
        if feasible {
            0.0
        } else {
            f64::INFINITY
        }
    }

    fn partial_grad(&self, block: usize, x: &BlockVector) -> Tensor {
        let (u, b) = self.parts(x);
        let (gu, gb) = bid_grads(u, b, self.f.view(), &self.params).expect("shapes fixed");
        if block == 0 {
            gu.into_dyn()
        } else {
            gb.into_dyn()
        }
    }

    fn prox(&self, block: usize, _t: f64, p: &Tensor) -> Tensor {
        if block == 0 {
            prox_box01(p)
        } else {
            prox_simplex(p)
        }
    }

    fn is_convex(&self, _block: usize) -> bool {
        true
    }

    fn step_scale(&self, block: usize) -> f64 {
        if block == 1 {
            self.params.kernel_step_scale
        } else {
            1.0
        }
    }

    fn name(&self) -> &str {
        "bid"
    }

    fn initial_point(&self, _seed: u64) -> Result<BlockVector> {
        Ok(self.default_init())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> BidProblem {
        let f = Array2::from_shape_fn((8, 9), |(i, j)| if (i + j) % 5 < 2 { 0.8 } else { 0.2 });
        BidProblem::new(
            f,
            BidParams {
                lambda: 50.0,
                theta: 3.0,
                kernel_shape: (3, 3),
                kernel_step_scale: 5.0,
            },
        )
        .unwrap()
    }

    #[test]
    fn delta_kernel_on_sharp_data_has_zero_residual() {
        let p = small();
        let mut b = Array2::zeros((3, 3));
        b[[1, 1]] = 1.0;
        let x = BlockVector::new(vec![p.observed().clone().into_dyn(), b.into_dyn()]);
        let (u, b) = p.parts(&x);
        let (_, gb) = bid_grads(u, b, p.observed().view(), p.params()).unwrap();
        assert!(gb.iter().all(|v| *v == 0.0));
        let expect = log_penalty(p.observed().view(), 3.0);
        assert_eq!(p.eval_smooth(&x), expect);
    }

    #[test]
    fn init_feasible_and_scaled() {
        let p = small();
        let x = p.initial_point(0).unwrap();
        assert!(p.eval_objective(&x).is_finite());
        assert!(p.eval_objective(&x) >= 0.0);
        assert_eq!(p.step_scale(1), 5.0);
    }

    #[test]
    fn rejects_invalid() {
        let f = Array2::from_elem((8, 8), 0.5);
        let bad = BidParams {
            kernel_shape: (4, 3),
            ..Default::default()
        };
        assert!(BidProblem::new(f.clone(), bad).is_err());
        let big = BidParams {
            kernel_shape: (9, 3),
            ..Default::default()
        };
        assert!(BidProblem::new(f.clone(), big).is_err());
        let mut g = f;
        g[[0, 0]] = 1.5;
        let ok = BidParams {
            kernel_shape: (3, 3),
            ..Default::default()
        };
        assert!(matches!(BidProblem::new(g, ok), Err(Error::Data(_))));
    }
}
