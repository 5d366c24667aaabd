//! Sparse nonnegative matrix factorization
//! `min ½‖A − BC‖²  s.t.  B ≥ 0, ‖b_j‖₀ ≤ s per column, C ≥ 0`.
//!
//! Block 0 is `B` (`m×r`), block 1 is `C` (`r×n`).

use ndarray::{Array2, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::blockmodel::{BlockVector, Problem, Tensor};
use crate::error::{Error, Result};
use crate::lipschitz::{spectral_norm, DEFAULT_POWER_MAX_ITER, DEFAULT_POWER_TOL};
use crate::problems::{sum_sq, view2};
use crate::prox::{prox_l0_nonneg_cols, prox_nonneg};

/// Smallest modulus handed to the step rule when a Gram matrix vanishes.
pub const LIPSCHITZ_FLOOR: f64 = 1e-12;

fn check_shapes(a: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>, c: ArrayView2<'_, f64>) -> Result<()> {
    if b.nrows() != a.nrows() || c.ncols() != a.ncols() || b.ncols() != c.nrows() {
        return Err(Error::Shape(format!(
            "A is {:?}, B is {:?}, C is {:?}",
            a.dim(),
            b.dim(),
            c.dim()
        )));
    }
    Ok(())
}

/// `∇_B H = (BC − A)Cᵀ`.
pub fn nmf_grad_b(
    a: ArrayView2<'_, f64>,
    b: ArrayView2<'_, f64>,
    c: ArrayView2<'_, f64>,
) -> Result<Array2<f64>> {
    check_shapes(a, b, c)?;
    Ok((b.dot(&c) - a).dot(&c.t()))
}

/// `∇_C H = Bᵀ(BC − A)`.
pub fn nmf_grad_c(
    a: ArrayView2<'_, f64>,
    b: ArrayView2<'_, f64>,
    c: ArrayView2<'_, f64>,
) -> Result<Array2<f64>> {
    check_shapes(a, b, c)?;
    Ok(b.t().dot(&(b.dot(&c) - a)))
}

/// `L_B = ‖CCᵀ‖₂` for block 0 and `L_C = ‖BᵀB‖₂` for block 1, floored at
/// [`LIPSCHITZ_FLOOR`].
pub fn nmf_lipschitz(block: usize, b: ArrayView2<'_, f64>, c: ArrayView2<'_, f64>) -> Result<f64> {
    let gram = match block {
        0 => c.dot(&c.t()),
        1 => b.t().dot(&b),
        _ => return Err(Error::Shape(format!("NMF has 2 blocks, got block {block}"))),
    };
    let l = spectral_norm(gram.view(), DEFAULT_POWER_TOL, DEFAULT_POWER_MAX_ITER)?;
    Ok(l.max(LIPSCHITZ_FLOOR))
}

#[derive(Debug, Clone)]
pub struct NmfProblem {
    a: Array2<f64>,
    rank: usize,
    s: usize,
}

impl NmfProblem {
    pub fn new(a: Array2<f64>, rank: usize, s: usize) -> Result<Self> {
        if a.is_empty() {
            return Err(Error::Data("data matrix is empty".into()));
        }
        if let Some(v) = a.iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
            return Err(Error::Data(format!(
                "data matrix must be finite and nonnegative, found {v}"
            )));
        }
        if rank == 0 {
            return Err(Error::ParameterDomain("rank must be at least 1".into()));
        }
        if s > a.nrows() {
            return Err(Error::ParameterDomain(format!(
                "sparsity {s} exceeds the number of rows {}",
                a.nrows()
            )));
        }
        Ok(Self { a, rank, s })
    }

    /// Sparsity as a percentage of the column length, rounded up.
    pub fn sparsity_from_percent(rows: usize, percent: f64) -> Result<usize> {
        if !(0.0..=100.0).contains(&percent) {
            return Err(Error::ParameterDomain(format!(
                "sparsity percentage must lie in [0, 100], got {percent}"
            )));
        }
        Ok(((rows as f64) * percent / 100.0).ceil() as usize)
    }

    pub fn data(&self) -> &Array2<f64> {
        &self.a
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn sparsity(&self) -> usize {
        self.s
    }

    fn factors<'a>(&self, x: &'a BlockVector) -> (ArrayView2<'a, f64>, ArrayView2<'a, f64>) {
        let b = view2(x.block(0)).expect("B block is a matrix");
        let c = view2(x.block(1)).expect("C block is a matrix");
        (b, c)
    }

    /// Uniform `[0, 1]` entries scaled by `√(mean(A)/r)`; `B` is then
    /// projected so that the start is feasible.
    pub fn random_init(&self, seed: u64) -> Result<BlockVector> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (m, n) = self.a.dim();
        let scale = (self.a.mean().unwrap_or(0.0) / self.rank as f64).sqrt();
        let b = Array2::from_shape_fn((m, self.rank), |_| rng.random::<f64>() * scale);
        let c = Array2::from_shape_fn((self.rank, n), |_| rng.random::<f64>() * scale);
        let b = prox_l0_nonneg_cols(b.view(), self.s)?;
        Ok(BlockVector::new(vec![b.into_dyn(), c.into_dyn()]))
    }
}

impl Problem for NmfProblem {
    fn num_blocks(&self) -> usize {
        2
    }

    fn eval_smooth(&self, x: &BlockVector) -> f64 {
        let (b, c) = self.factors(x);
        0.5 * sum_sq((&self.a - &b.dot(&c)).iter())
    }

    fn eval_nonsmooth(&self, block: usize, value: &Tensor) -> f64 {
        let feasible = match block {
            0 => view2(value).is_ok_and(|b| {
                b.iter().all(|&v| v >= 0.0)
                    && b.columns()
                        .into_iter()
                        .all(|col| col.iter().filter(|&&v| v != 0.0).count() <= self.s)
            }),
            _ => value.iter().all(|&v| v >= 0.0),
        };
        if feasible {
            0.0
        } else {
            f64::INFINITY
        }
    }

    fn partial_grad(&self, block: usize, x: &BlockVector) -> Tensor {
        let (b, c) = self.factors(x);
        let a = self.a.view();
        match block {
            0 => nmf_grad_b(a, b, c),
            _ => nmf_grad_c(a, b, c),
        }
        .expect("factor shapes are fixed by the starting point")
        .into_dyn()
    }

    fn prox(&self, block: usize, _t: f64, p: &Tensor) -> Tensor {
        match block {
            0 => prox_l0_nonneg_cols(view2(p).expect("B block is a matrix"), self.s)
                .expect("sparsity validated at construction")
                .into_dyn(),
            _ => prox_nonneg(p),
        }
    }

    fn is_convex(&self, block: usize) -> bool {
        block == 1
    }

    fn lipschitz(&self, block: usize, x: &BlockVector) -> Option<Result<f64>> {
        let (b, c) = self.factors(x);
        Some(nmf_lipschitz(block, b, c))
    }

    fn name(&self) -> &str {
        "nmf"
    }

    fn initial_point(&self, seed: u64) -> Result<BlockVector> {
        self.random_init(seed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::arr2;

    #[test]
    fn zero_and_exact_gradients() {
        let a = Array2::<f64>::zeros((3, 4));
        let b = Array2::<f64>::zeros((3, 2));
        let c = Array2::<f64>::zeros((2, 4));
        assert_eq!(nmf_grad_b(a.view(), b.view(), c.view()).unwrap(), b);
        assert_eq!(nmf_grad_c(a.view(), b.view(), c.view()).unwrap(), c);

        let b = arr2(&[[1.0, 0.0], [2.0, 1.0], [0.0, 3.0]]);
        let c = arr2(&[[1.0, 2.0, 0.0, 1.0], [0.0, 1.0, 1.0, 2.0]]);
        let a = b.dot(&c);
        assert!(nmf_grad_b(a.view(), b.view(), c.view()).unwrap().iter().all(|v| *v == 0.0));
        assert!(nmf_grad_c(a.view(), b.view(), c.view()).unwrap().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn shape_mismatch() {
        let a = Array2::<f64>::zeros((3, 4));
        let b = Array2::<f64>::zeros((2, 2));
        let c = Array2::<f64>::zeros((2, 4));
        assert!(nmf_grad_b(a.view(), b.view(), c.view()).is_err());
    }

    #[test]
    fn lipschitz_cases() {
        let c = arr2(&[[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]);
        let b = Array2::<f64>::zeros((4, 2));
        let l = nmf_lipschitz(0, b.view(), c.view()).unwrap();
        assert!((l - 1.0).abs() < 1e-7);
        assert_eq!(nmf_lipschitz(1, b.view(), c.view()).unwrap(), LIPSCHITZ_FLOOR);
    }

    #[test]
    fn rejects_bad_data() {
        assert!(matches!(
            NmfProblem::new(arr2(&[[1.0, -0.1]]), 1, 1),
            Err(Error::Data(_))
        ));
        assert!(NmfProblem::new(arr2(&[[1.0, 0.1]]), 1, 2).is_err());
        assert_eq!(NmfProblem::sparsity_from_percent(100, 33.0).unwrap(), 33);
        assert_eq!(NmfProblem::sparsity_from_percent(10, 33.0).unwrap(), 4);
    }

    #[test]
    fn init_is_feasible() {
        let a = Array2::from_shape_fn((6, 5), |(i, j)| (i + j) as f64);
        let p = NmfProblem::new(a, 3, 2).unwrap();
        let x = p.initial_point(4).unwrap();
        assert!(p.eval_objective(&x).is_finite());
        assert_eq!(x, p.initial_point(4).unwrap());
        assert_ne!(x, p.initial_point(5).unwrap());
    }
}
