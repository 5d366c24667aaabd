//! Plugging in a user-defined objective: nonnegative least squares
//! `min ½‖Mx + Ny − b‖²` over `x ≥ 0` and `‖y‖₁`-regularized `y`, split into
//! two blocks.
//!
//! `cargo run --release --example custom_problem`

use ndarray::{Array1, Array2, Ix1};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ipalm::blockmodel::{BlockVector, Problem, Tensor};
use ipalm::config::RunConfig;
use ipalm::error::Result;
use ipalm::lipschitz::{spectral_norm, DEFAULT_POWER_MAX_ITER, DEFAULT_POWER_TOL};
use ipalm::prox::{prox_l1, prox_nonneg};
use ipalm::solver::run;

struct SplitLeastSquares {
    m: Array2<f64>,
    n: Array2<f64>,
    b: Array1<f64>,
    weight: f64,
}

impl SplitLeastSquares {
    fn residual(&self, x: &BlockVector) -> Array1<f64> {
        let xv = x.block(0).view().into_dimensionality::<Ix1>().unwrap();
        let yv = x.block(1).view().into_dimensionality::<Ix1>().unwrap();
        self.m.dot(&xv) + self.n.dot(&yv) - &self.b
    }

    fn operator(&self, block: usize) -> &Array2<f64> {
        if block == 0 { &self.m } else { &self.n }
    }
}

impl Problem for SplitLeastSquares {
    fn num_blocks(&self) -> usize {
        2
    }

    fn eval_smooth(&self, x: &BlockVector) -> f64 {
        0.5 * self.residual(x).mapv(|v| v * v).sum()
    }

    fn eval_nonsmooth(&self, block: usize, value: &Tensor) -> f64 {
        match block {
            0 if value.iter().any(|&v| v < 0.0) => f64::INFINITY,
            0 => 0.0,
            _ => self.weight * value.iter().map(|v| v.abs()).sum::<f64>(),
        }
    }

    fn partial_grad(&self, block: usize, x: &BlockVector) -> Tensor {
        self.operator(block).t().dot(&self.residual(x)).into_dyn()
    }

    fn prox(&self, block: usize, t: f64, p: &Tensor) -> Tensor {
        match block {
            0 => prox_nonneg(p),
            _ => prox_l1(p, self.weight / t),
        }
    }

    fn is_convex(&self, _block: usize) -> bool {
        true
    }

    fn lipschitz(&self, block: usize, _x: &BlockVector) -> Option<Result<f64>> {
        let a = self.operator(block);
        Some(spectral_norm(a.t().dot(a).view(), DEFAULT_POWER_TOL, DEFAULT_POWER_MAX_ITER))
    }

    fn name(&self) -> &str {
        "split-least-squares"
    }

    fn initial_point(&self, _seed: u64) -> Result<BlockVector> {
        Ok(BlockVector::new(vec![
            Array1::zeros(self.m.ncols()).into_dyn(),
            Array1::zeros(self.n.ncols()).into_dyn(),
        ]))
    }
}

fn main() -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut gauss = |r, c| Array2::from_shape_fn((r, c), |_| rng.random::<f64>() - 0.5);
    let m = gauss(60, 20);
    let n = gauss(60, 30);
    let b = Array1::from_shape_fn(60, |i| (i as f64 * 0.3).sin());
    let problem = SplitLeastSquares { m, n, b, weight: 0.5 };

    let cfg = RunConfig {
        iters: 5000,
        tol: 1e-10,
        ..Default::default()
    }
    .with_inertia(0.5);
    let sol = run(&problem, &cfg)?;
    let y_nnz = sol.x.block(1).iter().filter(|v| **v != 0.0).count();
    println!(
        "F = {:.6} after {} iterations; y has {y_nnz}/30 nonzeros",
        sol.trace.last().unwrap().objective,
        sol.trace.iterations()
    );
    Ok(())
}
