//! Partial Lipschitz moduli: power iteration for Gram matrices and
//! descent-lemma backtracking for everything else.

use ndarray::{Array1, ArrayView2, Zip};

use crate::blockmodel::Tensor;
use crate::error::{Error, Result};

pub const DEFAULT_POWER_TOL: f64 = 1e-9;
pub const DEFAULT_POWER_MAX_ITER: usize = 1000;

/// Largest eigenvalue of a symmetric positive semidefinite matrix.
///
/// Power iteration from the normalized all-ones vector, stopped once the
/// residual `‖Mv − λv‖` falls below `tol·λ`. The Rayleigh quotient is returned inflated by `1 + 10·tol` so that step rules built on
/// it never undershoot the true modulus.
///
/// When the two leading eigenvalues nearly coincide, `max_iter` steps may not
/// suffice; the iteration then continues on `M², M⁴, …` (normalized, up to
/// `M^(2^MAX_SQUARINGS)`), which share the leading eigenvector but separate
/// the spectrum. Convergence is always judged on the Rayleigh quotient of
/// `M` itself.
pub fn spectral_norm(m: ArrayView2<'_, f64>, tol: f64, max_iter: usize) -> Result<f64> {
    let n = m.nrows();
    if n != m.ncols() {
        return Err(Error::Shape(format!(
            "spectral_norm needs a square matrix, got {n}x{}",
            m.ncols()
        )));
    }
    if n == 0 {
        return Ok(0.0);
    }
    if !(tol > 0.0) {
        return Err(Error::ParameterDomain(format!("tol must be positive, got {tol}")));
    }
    let scale = m.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    if scale == 0.0 {
        return Ok(0.0);
    }

    let starts = [
        Array1::from_elem(n, 1.0),
        Array1::from_shape_fn(n, |i| 1.0 + (i as f64 + 1.0).sin()),
    ];
    let mut last_gap = f64::INFINITY;
    for start in starts {
        let mut p = m.to_owned();
        let mut v = &start / start.dot(&start).sqrt();
        let mut lambda;
        let mut collapsed = false;
        for level in 0..=MAX_SQUARINGS {
            if level > 0 {
                let sq = p.dot(&p);
                let pmax = sq.iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
                if !(pmax > 0.0 && pmax.is_finite()) {
                    break;
                }
                p = sq / pmax;
            }
            let pscale = p.iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
            for _ in 0..max_iter {
                let w = p.dot(&v);
                let wn = w.dot(&w).sqrt();
                if wn <= f64::EPSILON * pscale {
                    // start vector orthogonal to the range; try the next one
                    collapsed = true;
                    break;
                }
                v = w / wn;
                let mv = m.dot(&v);
                lambda = v.dot(&mv);
                // residual ‖Mv − λv‖; small residual bounds the Rayleigh error
                // even when the leading eigenvalues are close
                last_gap = (&mv - &(&v * lambda)).dot(&(&mv - &(&v * lambda))).sqrt();
                if last_gap <= tol * lambda.abs() {
                    return Ok(lambda * (1.0 + 10.0 * tol));
                }
            }
            if collapsed {
                break;
            }
        }
        if !collapsed {
            return Err(Error::Estimation {
                message: format!("power iteration did not converge in {max_iter} steps per level"),
                gap: last_gap,
            });
        }
    }
    Err(Error::Estimation {
        message: "power iteration collapsed on every start vector".into(),
        gap: last_gap,
    })
}

/// Number of matrix squarings tried by [`spectral_norm`] before giving up.
pub const MAX_SQUARINGS: usize = 30;

/// Per-block backtracking state, carried across iterations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BacktrackState {
    pub l_current: f64,
    pub growth: f64,
    pub shrink: f64,
    pub max_rounds: usize,
}

impl Default for BacktrackState {
    fn default() -> Self {
        Self {
            l_current: 1.0,
            growth: 2.0,
            shrink: 0.5,
            max_rounds: 60,
        }
    }
}

impl BacktrackState {
    pub fn validate(&self) -> Result<()> {
        if !(self.l_current > 0.0) || !(self.growth > 1.0) || !(self.shrink > 0.0 && self.shrink <= 1.0)
        {
            return Err(Error::ParameterDomain(format!(
                "invalid backtracking state {self:?}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct BacktrackOutcome {
    pub lipschitz: f64,
    pub candidate: Tensor,
    /// Every tested modulus, in order.
    pub tested: Vec<f64>,
}

/// Finds the smallest tested `L = shrink·L_prev·growth^j` for which the
/// candidate `x⁺(L)` satisfies the descent lemma
/// `h(x⁺) ≤ h(x) + ⟨∇h(x), x⁺ − x⟩ + (L/2)‖x⁺ − x‖²`.
///
/// `candidate_of` recomputes the prox-gradient candidate for each tested `L`.
pub fn backtrack_lipschitz<H, C>(
    h_eval: H,
    grad_at_x: &Tensor,
    x: &Tensor,
    mut candidate_of: C,
    state: &mut BacktrackState,
) -> Result<BacktrackOutcome>
where
    H: Fn(&Tensor) -> f64,
    C: FnMut(f64) -> Result<Tensor>,
{
    state.validate()?;
    let hx = h_eval(x);
    let slack = 1e-12 * (1.0 + hx.abs());
    let mut l = state.shrink * state.l_current;
    let mut tested = Vec::new();
    let mut last_gap = f64::INFINITY;
    for _ in 0..=state.max_rounds {
        tested.push(l);
        let cand = candidate_of(l)?;
        let mut lin = 0.0;
        let mut sq = 0.0;
        Zip::from(&cand).and(x).and(grad_at_x).for_each(|&c, &xv, &g| {
            let d = c - xv;
            lin += g * d;
            sq += d * d;
        });
        let upper = hx + lin + 0.5 * l * sq;
        let hc = h_eval(&cand);
        last_gap = hc - upper;
        if hc <= upper + slack {
            state.l_current = l;
            return Ok(BacktrackOutcome {
                lipschitz: l,
                candidate: cand,
                tested,
            });
        }
        l *= state.growth;
    }
    Err(Error::Estimation {
        message: format!(
            "backtracking exceeded {} rounds (gradient or smoothness mismatch?)",
            state.max_rounds
        ),
        gap: last_gap,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{arr1, Array2};

    #[test]
    fn identity_and_diagonal() {
        let i = Array2::<f64>::eye(5);
        let v = spectral_norm(i.view(), 1e-9, 1000).unwrap();
        assert!((v - 1.0).abs() < 1e-7);
        let d = Array2::from_diag(&arr1(&[4.0, 1.0]));
        let v = spectral_norm(d.view(), 1e-9, 1000).unwrap();
        assert!((v - 4.0).abs() < 4e-7);
        assert!(v >= 4.0);
    }

    #[test]
    fn zero_matrix_and_orthogonal_start() {
        let z = Array2::<f64>::zeros((3, 3));
        assert_eq!(spectral_norm(z.view(), 1e-9, 10).unwrap(), 0.0);
        // top eigenvector (1, -1) is orthogonal to the all-ones start
        let m = ndarray::arr2(&[[1.0, -1.0], [-1.0, 1.0]]);
        let v = spectral_norm(m.view(), 1e-9, 1000).unwrap();
        assert!((v - 2.0).abs() < 1e-7);
    }

    #[test]
    fn nearly_repeated_top_eigenvalue() {
        // rotated diag(1, 1 − 1e−5): plain power iteration stalls at 1000 steps
        let (c, s) = (0.6f64, 0.8f64);
        let q = ndarray::arr2(&[[c, -s], [s, c]]);
        let d = Array2::from_diag(&arr1(&[1.0, 1.0 - 1e-5]));
        let m = q.dot(&d).dot(&q.t());
        let v = spectral_norm(m.view(), 1e-12, 1000).unwrap();
        assert!(v >= 1.0 && v - 1.0 < 1e-10, "{v}");
    }

    #[test]
    fn non_square_rejected() {
        let m = Array2::<f64>::zeros((2, 3));
        assert!(matches!(spectral_norm(m.view(), 1e-9, 10), Err(Error::Shape(_))));
    }

    fn quad_setup(l_true: f64) -> (impl Fn(&Tensor) -> f64, Tensor, Tensor) {
        let h = move |x: &Tensor| 0.5 * l_true * x.iter().map(|v| v * v).sum::<f64>();
        let x = arr1(&[1.0, -2.0, 0.5]).into_dyn();
        let g = x.mapv(|v| l_true * v);
        (h, x, g)
    }

    #[test]
    fn quadratic_accepts_immediately_when_large() {
        let l_true = 3.0;
        let (h, x, g) = quad_setup(l_true);
        let mut st = BacktrackState {
            l_current: 8.0,
            ..Default::default()
        };
        let out = backtrack_lipschitz(&h, &g, &x, |l| Ok(&x - &(&g / l)), &mut st).unwrap();
        assert_eq!(out.tested, vec![4.0]);
        assert_eq!(out.lipschitz, 4.0);
        assert_eq!(st.l_current, 4.0);
    }

    #[test]
    fn quadratic_first_power_above_truth() {
        let l_true = 3.0;
        let (h, x, g) = quad_setup(l_true);
        let l0 = l_true / 10.0;
        let mut st = BacktrackState {
            l_current: l0 / 0.5,
            ..Default::default()
        };
        let out = backtrack_lipschitz(&h, &g, &x, |l| Ok(&x - &(&g / l)), &mut st).unwrap();
        // oracle: smallest l0 * 2^j with l0 * 2^j >= l_true
        let mut want = l0;
        while want < l_true * (1.0 - 1e-12) {
            want *= 2.0;
        }
        assert_eq!(out.lipschitz, want);
        assert_eq!(out.tested.len(), 5);
    }

    #[test]
    fn linear_accepts_any_start() {
        let c = arr1(&[1.0, 2.0]).into_dyn();
        let h = |x: &Tensor| x.iter().zip(c.iter()).map(|(a, b)| a * b).sum::<f64>();
        let x = arr1(&[0.3, 0.1]).into_dyn();
        for l0 in [1e-6, 0.1, 10.0] {
            let mut st = BacktrackState {
                l_current: l0,
                ..Default::default()
            };
            let out = backtrack_lipschitz(h, &c, &x, |l| Ok(&x - &(&c / l)), &mut st).unwrap();
            assert_eq!(out.tested.len(), 1);
            assert_eq!(out.lipschitz, 0.5 * l0);
        }
    }

    #[test]
    fn wrong_gradient_exhausts_rounds() {
        let h = |x: &Tensor| x.iter().map(|v| v * v).sum::<f64>();
        let x = arr1(&[1.0]).into_dyn();
        // sign-flipped gradient: candidates move uphill, the test never passes
        let g = arr1(&[-2.0]).into_dyn();
        let mut st = BacktrackState {
            max_rounds: 5,
            ..Default::default()
        };
        let err = backtrack_lipschitz(h, &g, &x, |l| Ok(&x - &(&g / l)), &mut st).unwrap_err();
        assert!(matches!(err, Error::Estimation { .. }));
    }
}
