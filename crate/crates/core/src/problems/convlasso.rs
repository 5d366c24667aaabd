//! Convolutional LASSO dictionary learning
//!
//! ```text
//! min_{d,v}  Σ_j λ‖v_j‖₁ + ½‖Σ_j d_j ∗ v_j − f‖²
//!            s.t. Σ d_j = 0, ‖d_j‖ ≤ 1 for the learned filters
//! ```
//!
//! Slot 0 of both stacks is fixed: `d_0` is a normalized Gaussian low-pass
//! filter and `v_0 = f`. The fixed pair is held by the problem as a
//! constant, so the optimization blocks are the `p − 1` free filters
//! (block 0, shape `(p−1)×l×l`) and the `p − 1` free coefficient images
//! (block 1, shape `(p−1)×m×n`). The constant `λ‖f‖₁` is included in the
//! objective.

use ndarray::{s, Array2, Array3, ArrayView2, ArrayView3, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::blockmodel::{BlockVector, Problem, Tensor};
use crate::error::{Error, Result};
use crate::imageops::{
    circ_conv_centered, circ_conv_centered_adjoint_image, circ_conv_centered_adjoint_kernel,
    gaussian_filter,
};
use crate::problems::{sum_sq, view3};
use crate::prox::{prox_filter_constraint, prox_l1};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvLassoParams {
    /// Total number of filters, including the fixed low-pass one.
    pub filters: usize,
    /// Odd filter side length.
    pub size: usize,
    pub lambda: f64,
    /// Standard deviation of the fixed Gaussian; `None` means `size / 4`.
    pub sigma: Option<f64>,
}

impl Default for ConvLassoParams {
    fn default() -> Self {
        Self {
            filters: 81,
            size: 9,
            lambda: 0.2,
            sigma: None,
        }
    }
}

impl ConvLassoParams {
    pub fn validate(&self) -> Result<()> {
        if self.filters < 2 {
            return Err(Error::ParameterDomain(format!(
                "need at least 2 filters, got {}",
                self.filters
            )));
        }
        if self.size % 2 == 0 {
            return Err(Error::ParameterDomain(format!(
                "filter size must be odd, got {}",
                self.size
            )));
        }
        if !(self.lambda >= 0.0) {
            return Err(Error::ParameterDomain(format!(
                "lambda must be >= 0, got {}",
                self.lambda
            )));
        }
        if let Some(s) = self.sigma {
            if !(s > 0.0) {
                return Err(Error::ParameterDomain(format!("sigma must be positive, got {s}")));
            }
        }
        Ok(())
    }

    pub fn sigma(&self) -> f64 {
        self.sigma.unwrap_or(self.size as f64 / 4.0)
    }
}

/// `Σ_j d_j ∗ v_j − f` over full stacks.
pub fn convlasso_residual(
    d: ArrayView3<'_, f64>,
    v: ArrayView3<'_, f64>,
    f: ArrayView2<'_, f64>,
) -> Result<Array2<f64>> {
    if d.len_of(Axis(0)) != v.len_of(Axis(0)) {
        return Err(Error::Shape(format!(
            "{} filters but {} coefficient images",
            d.len_of(Axis(0)),
            v.len_of(Axis(0))
        )));
    }
    if v.shape()[1..] != *f.shape() {
        return Err(Error::Shape(format!(
            "coefficient images {:?} do not match data {:?}",
            &v.shape()[1..],
            f.shape()
        )));
    }
    let mut r = f.mapv(|x| -x);
    for (dj, vj) in d.outer_iter().zip(v.outer_iter()) {
        r += &circ_conv_centered(vj, dj)?;
    }
    Ok(r)
}

/// Objective over full stacks. Slot 0 must hold `g` and `f`.
pub fn convlasso_objective(
    d: ArrayView3<'_, f64>,
    v: ArrayView3<'_, f64>,
    f: ArrayView2<'_, f64>,
    g: ArrayView2<'_, f64>,
    lambda: f64,
) -> Result<f64> {
    check_fixed_slots(d, v, f, g)?;
    let r = convlasso_residual(d, v, f)?;
    let l1: f64 = v.iter().map(|x| x.abs()).sum();
    Ok(lambda * l1 + 0.5 * sum_sq(r.iter()))
}

fn check_fixed_slots(
    d: ArrayView3<'_, f64>,
    v: ArrayView3<'_, f64>,
    f: ArrayView2<'_, f64>,
    g: ArrayView2<'_, f64>,
) -> Result<()> {
    if d.len_of(Axis(0)) == 0 || v.len_of(Axis(0)) == 0 {
        return Err(Error::Shape("stacks must contain the fixed slot".into()));
    }
    if d.index_axis(Axis(0), 0) != g || v.index_axis(Axis(0), 0) != f {
        return Err(Error::Contract(
            "slot 0 must hold the fixed low-pass filter and the data image".into(),
        ));
    }
    Ok(())
}

/// Gradients over full stacks; slot 0 gets zero.
pub fn convlasso_grads(
    d: ArrayView3<'_, f64>,
    v: ArrayView3<'_, f64>,
    f: ArrayView2<'_, f64>,
) -> Result<(Array3<f64>, Array3<f64>)> {
    let r = convlasso_residual(d, v, f)?;
    let mut gd = Array3::zeros(d.raw_dim());
    let mut gv = Array3::zeros(v.raw_dim());
    let kshape = (d.shape()[1], d.shape()[2]);
    for j in 1..d.len_of(Axis(0)) {
        let dj = d.index_axis(Axis(0), j);
        let vj = v.index_axis(Axis(0), j);
        gv.index_axis_mut(Axis(0), j)
            .assign(&circ_conv_centered_adjoint_image(r.view(), dj)?);
        gd.index_axis_mut(Axis(0), j)
            .assign(&circ_conv_centered_adjoint_kernel(r.view(), vj, kshape)?);
    }
    Ok((gd, gv))
}

#[derive(Debug, Clone)]
pub struct ConvLassoProblem {
    f: Array2<f64>,
    g: Array2<f64>,
    /// `g ∗ f − f`, the residual of the fixed pair.
    base: Array2<f64>,
    params: ConvLassoParams,
    f_l1: f64,
}

impl ConvLassoProblem {
    pub fn new(f: Array2<f64>, params: ConvLassoParams) -> Result<Self> {
        params.validate()?;
        if params.size > f.nrows() || params.size > f.ncols() {
            return Err(Error::Shape(format!(
                "filter size {} larger than image {:?}",
                params.size,
                f.dim()
            )));
        }
        if f.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data("image contains non-finite values".into()));
        }
        let g = gaussian_filter(params.size, params.sigma());
        let base = circ_conv_centered(f.view(), g.view())? - &f;
        let f_l1 = f.iter().map(|v| v.abs()).sum();
        Ok(Self {
            f,
            g,
            base,
            params,
            f_l1,
        })
    }

    pub fn params(&self) -> &ConvLassoParams {
        &self.params
    }

    pub fn image(&self) -> &Array2<f64> {
        &self.f
    }

    pub fn lowpass(&self) -> &Array2<f64> {
        &self.g
    }

    /// Free filters drawn i.i.d. normal and projected; coefficients zero.
    pub fn random_init(&self, seed: u64) -> BlockVector {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (p, l) = (self.params.filters - 1, self.params.size);
        let mut d = Array3::zeros((p, l, l));
        for mut dj in d.outer_iter_mut() {
            let raw: Tensor =
                Array2::from_shape_fn((l, l), |_| StandardNormal.sample(&mut rng)).into_dyn();
            dj.assign(
                &prox_filter_constraint(&raw)
                    .into_dimensionality::<ndarray::Ix2>()
                    .expect("2-D filter"),
            );
        }
        let v = Array3::zeros((p, self.f.nrows(), self.f.ncols()));
        BlockVector::new(vec![d.into_dyn(), v.into_dyn()])
    }

    /// Prepends the fixed slot to the free stacks.
    pub fn full_stacks(&self, x: &BlockVector) -> Result<(Array3<f64>, Array3<f64>)> {
        let (d, v) = (view3(x.block(0))?, view3(x.block(1))?);
        let p = d.len_of(Axis(0)) + 1;
        let mut dd = Array3::zeros((p, d.shape()[1], d.shape()[2]));
        dd.index_axis_mut(Axis(0), 0).assign(&self.g);
        dd.slice_mut(s![1.., .., ..]).assign(&d);
        let mut vv = Array3::zeros((p, v.shape()[1], v.shape()[2]));
        vv.index_axis_mut(Axis(0), 0).assign(&self.f);
        vv.slice_mut(s![1.., .., ..]).assign(&v);
        Ok((dd, vv))
    }

    fn residual(&self, d: ArrayView3<'_, f64>, v: ArrayView3<'_, f64>) -> Array2<f64> {
        let mut r = self.base.clone();
        for (dj, vj) in d.outer_iter().zip(v.outer_iter()) {
            r += &circ_conv_centered(vj, dj).expect("shapes fixed at construction");
        }
        r
    }

    fn parts<'a>(&self, x: &'a BlockVector) -> (ArrayView3<'a, f64>, ArrayView3<'a, f64>) {
        (
            view3(x.block(0)).expect("filter block is a 3-D stack"),
            view3(x.block(1)).expect("coefficient block is a 3-D stack"),
        )
    }
}

impl Problem for ConvLassoProblem {
    fn num_blocks(&self) -> usize {
        2
    }

    fn eval_smooth(&self, x: &BlockVector) -> f64 {
        let (d, v) = self.parts(x);
        0.5 * sum_sq(self.residual(d, v).iter())
    }

    fn eval_nonsmooth(&self, block: usize, value: &Tensor) -> f64 {
        if block == 1 {
            return self.params.lambda * (self.f_l1 + value.iter().map(|v| v.abs()).sum::<f64>());
        }
        let ok = value.outer_iter().all(|dj| {
            let n = dj.len() as f64;
            dj.sum().abs() / n <= 1e-10 && sum_sq(dj.iter()).sqrt() <= 1.0 + 1e-10
        });
        if ok {
            0.0
        } else {
            f64::INFINITY
        }
    }

    fn partial_grad(&self, block: usize, x: &BlockVector) -> Tensor {
        let (d, v) = self.parts(x);
        let r = self.residual(d, v);
        let l = self.params.size;
        let mut out = Array3::zeros(if block == 0 { d.raw_dim() } else { v.raw_dim() });
        for (j, mut gj) in out.outer_iter_mut().enumerate() {
            let g = if block == 0 {
                circ_conv_centered_adjoint_kernel(r.view(), v.index_axis(Axis(0), j), (l, l))
            } else {
                circ_conv_centered_adjoint_image(r.view(), d.index_axis(Axis(0), j))
            };
            gj.assign(&g.expect("shapes fixed at construction"));
        }
        out.into_dyn()
    }

    fn prox(&self, block: usize, t: f64, p: &Tensor) -> Tensor {
        if block == 1 {
            return prox_l1(p, self.params.lambda / t);
        }
        let mut out = p.clone();
        for mut dj in out.outer_iter_mut() {
            let q = prox_filter_constraint(&dj.to_owned());
            dj.assign(&q);
        }
        out
    }

    fn is_convex(&self, _block: usize) -> bool {
        true
    }

    fn name(&self) -> &str {
        "convlasso"
    }

    fn initial_point(&self, seed: u64) -> Result<BlockVector> {
        Ok(self.random_init(seed))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn image(m: usize, n: usize) -> Array2<f64> {
        Array2::from_shape_fn((m, n), |(i, j)| ((i * 3 + j * 7) % 11) as f64 / 10.0)
    }

    #[test]
    fn only_fixed_pair_is_constant() {
        let f = image(8, 8);
        let p = ConvLassoProblem::new(
            f.clone(),
            ConvLassoParams {
                filters: 3,
                size: 3,
                lambda: 0.3,
                sigma: None,
            },
        )
        .unwrap();
        let x = p.random_init(1);
        let g = p.lowpass();
        let want = 0.5 * sum_sq((circ_conv_centered(f.view(), g.view()).unwrap() - &f).iter())
            + 0.3 * f.iter().map(|v| v.abs()).sum::<f64>();
        assert!((p.eval_objective(&x) - want).abs() <= 1e-12 * want);
        let (dd, vv) = p.full_stacks(&x).unwrap();
        let full = convlasso_objective(dd.view(), vv.view(), f.view(), g.view(), 0.3).unwrap();
        assert!((full - p.eval_objective(&x)).abs() <= 1e-12 * want);
    }

    #[test]
    fn mutated_slot_is_contract_error() {
        let f = image(8, 8);
        let p = ConvLassoProblem::new(
            f.clone(),
            ConvLassoParams {
                filters: 2,
                size: 3,
                lambda: 0.1,
                sigma: None,
            },
        )
        .unwrap();
        let (dd, mut vv) = p.full_stacks(&p.random_init(0)).unwrap();
        vv[[0, 0, 0]] += 1.0;
        assert!(matches!(
            convlasso_objective(dd.view(), vv.view(), f.view(), p.lowpass().view(), 0.1),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn huge_lambda_kills_coefficients() {
        let p = ConvLassoProblem::new(
            image(8, 8),
            ConvLassoParams {
                filters: 3,
                size: 3,
                lambda: 1e12,
                sigma: None,
            },
        )
        .unwrap();
        let q = Tensor::from_elem(ndarray::IxDyn(&[2, 8, 8]), 3.0);
        assert!(p.prox(1, 1.0, &q).iter().all(|v| *v == 0.0));
    }

    #[test]
    fn init_filters_feasible() {
        let p = ConvLassoProblem::new(
            image(10, 10),
            ConvLassoParams {
                filters: 5,
                size: 5,
                lambda: 0.1,
                sigma: None,
            },
        )
        .unwrap();
        let x = p.random_init(3);
        assert_eq!(p.eval_nonsmooth(0, x.block(0)), 0.0);
        assert_eq!(x.block(0).shape(), &[4, 5, 5]);
        assert_eq!(x.block(1).shape(), &[4, 10, 10]);
    }
}
