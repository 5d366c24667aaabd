//! Inertial parameter schedules and the step-parameter rules derived from them.
//!
//! For a block with local Lipschitz modulus `L` and inertial coefficients
//! `(α, β)`, the static rules pick a Lyapunov weight `δ` and then the
//! smallest step parameter `τ` for which the block update still decreases
//! `F + δ·½‖x_k − x_{k−1}‖²`:
//!
//! * nonconvex prox: `δ = (ᾱ + β̄)λ / (1 − ε − 2ᾱ)`,
//!   `τ = ((1 + ε)δ + (1 + β)L) / (1 − α)`;
//! * convex prox: `δ = (ᾱ + 2β̄)λ / (2(1 − ε − ᾱ))`,
//!   `τ = ((1 + ε)δ + (1 + β)L) / (2 − α)`.
//!
//! With `ε = 0` and `λ = L` these collapse to `τ = (1 + 2β)/(1 − 2α)·L` and
//! `τ = (1 + 2β)/(2(1 − α))·L` respectively. The dynamic schedule uses
//! `α_k = β_k = (k − 1)/(k + 2)` with `τ = L`; it has no Lyapunov weight.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScheduleKind {
    StaticNonconvex {
        alpha_bar: f64,
        beta_bar: f64,
        eps: f64,
    },
    StaticConvex {
        alpha_bar: f64,
        beta_bar: f64,
        eps: f64,
    },
    Dynamic,
}

impl ScheduleKind {
    /// Checks the bounds on `ᾱ`, `β̄` and `ε` for this regime.
    pub fn validate(&self) -> Result<()> {
        match *self {
            ScheduleKind::StaticNonconvex {
                alpha_bar,
                beta_bar,
                eps,
            } => {
                check_common(alpha_bar, beta_bar, eps)?;
                if 1.0 - eps - 2.0 * alpha_bar <= 0.0 {
                    return Err(Error::ParameterDomain(format!(
                        "nonconvex block needs alpha_bar < (1 - eps)/2 = {}, got {alpha_bar}",
                        0.5 * (1.0 - eps)
                    )));
                }
                Ok(())
            }
            ScheduleKind::StaticConvex {
                alpha_bar,
                beta_bar,
                eps,
            } => {
                check_common(alpha_bar, beta_bar, eps)?;
                if 1.0 - eps - alpha_bar <= 0.0 {
                    return Err(Error::ParameterDomain(format!(
                        "convex block needs alpha_bar < 1 - eps = {}, got {alpha_bar}",
                        1.0 - eps
                    )));
                }
                Ok(())
            }
            ScheduleKind::Dynamic => Ok(()),
        }
    }

    /// `(α_k, β_k)` for iteration `k ≥ 1`.
    pub fn coefficients(&self, k: usize) -> (f64, f64) {
        match *self {
            ScheduleKind::StaticNonconvex {
                alpha_bar,
                beta_bar,
                ..
            }
            | ScheduleKind::StaticConvex {
                alpha_bar,
                beta_bar,
                ..
            } => (alpha_bar, beta_bar),
            ScheduleKind::Dynamic => {
                let c = dynamic_coeff(k);
                (c, c)
            }
        }
    }

    pub fn eps(&self) -> f64 {
        match *self {
            ScheduleKind::StaticNonconvex { eps, .. } | ScheduleKind::StaticConvex { eps, .. } => {
                eps
            }
            ScheduleKind::Dynamic => 0.0,
        }
    }

    pub fn is_convex_rule(&self) -> bool {
        matches!(self, ScheduleKind::StaticConvex { .. })
    }

    /// Dynamic runs lie outside the convergence guarantees.
    pub fn is_heuristic(&self) -> bool {
        matches!(self, ScheduleKind::Dynamic)
    }

    /// Lyapunov weight fixed from the bounds `(ᾱ, β̄)` and a bound `λ⁺` on
    /// the Lipschitz modulus. `None` for the dynamic schedule.
    pub fn constant_delta(&self, lambda_plus: f64) -> Result<Option<f64>> {
        match *self {
            ScheduleKind::StaticNonconvex {
                alpha_bar,
                beta_bar,
                eps,
            } => delta_star(alpha_bar, beta_bar, eps, lambda_plus, false).map(Some),
            ScheduleKind::StaticConvex {
                alpha_bar,
                beta_bar,
                eps,
            } => delta_star(alpha_bar, beta_bar, eps, lambda_plus, true).map(Some),
            ScheduleKind::Dynamic => Ok(None),
        }
    }
}

fn check_common(alpha_bar: f64, beta_bar: f64, eps: f64) -> Result<()> {
    if !(alpha_bar >= 0.0 && beta_bar >= 0.0 && eps >= 0.0) {
        return Err(Error::ParameterDomain(format!(
            "alpha_bar, beta_bar, eps must be nonnegative (got {alpha_bar}, {beta_bar}, {eps})"
        )));
    }
    if beta_bar > 1.0 {
        return Err(Error::ParameterDomain(format!(
            "beta_bar must lie in [0, 1], got {beta_bar}"
        )));
    }
    Ok(())
}

/// Lyapunov weight `δ*` for the given bounds.
pub fn delta_star(
    alpha_bar: f64,
    beta_bar: f64,
    eps: f64,
    lambda_plus: f64,
    convex: bool,
) -> Result<f64> {
    if !(lambda_plus > 0.0) {
        return Err(Error::ParameterDomain(format!(
            "Lipschitz bound must be positive, got {lambda_plus}"
        )));
    }
    if convex {
        let denom = 1.0 - eps - alpha_bar;
        if denom <= 0.0 {
            return Err(Error::ParameterDomain(format!(
                "convex rule needs alpha < 1 - eps (alpha = {alpha_bar}, eps = {eps})"
            )));
        }
        Ok((alpha_bar + 2.0 * beta_bar) * lambda_plus / (2.0 * denom))
    } else {
        let denom = 1.0 - eps - 2.0 * alpha_bar;
        if denom <= 0.0 {
            return Err(Error::ParameterDomain(format!(
                "nonconvex rule needs alpha < (1 - eps)/2 (alpha = {alpha_bar}, eps = {eps})"
            )));
        }
        Ok((alpha_bar + beta_bar) * lambda_plus / denom)
    }
}

/// `τ = ((1 + ε)δ + (1 + β)L) / (1 − α)` (nonconvex) or `/ (2 − α)` (convex).
pub fn tau_from_delta(alpha: f64, beta: f64, l: f64, delta: f64, eps: f64, convex: bool) -> f64 {
    let num = (1.0 + eps) * delta + (1.0 + beta) * l;
    if convex {
        num / (2.0 - alpha)
    } else {
        num / (1.0 - alpha)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRule {
    pub tau: f64,
    /// `None` under the dynamic schedule.
    pub delta: Option<f64>,
}

/// Step parameter for one block from its instantaneous `(α, β, L)`.
pub fn tau_step(alpha: f64, beta: f64, l: f64, kind: ScheduleKind) -> Result<StepRule> {
    if !(l > 0.0) {
        return Err(Error::ParameterDomain(format!(
            "Lipschitz modulus must be positive, got {l}"
        )));
    }
    match kind {
        ScheduleKind::Dynamic => Ok(StepRule {
            tau: l,
            delta: None,
        }),
        ScheduleKind::StaticNonconvex { eps, .. } => {
            let delta = delta_star(alpha, beta, eps, l, false)?;
            Ok(StepRule {
                tau: tau_from_delta(alpha, beta, l, delta, eps, false),
                delta: Some(delta),
            })
        }
        ScheduleKind::StaticConvex { eps, .. } => {
            let delta = delta_star(alpha, beta, eps, l, true)?;
            Ok(StepRule {
                tau: tau_from_delta(alpha, beta, l, delta, eps, true),
                delta: Some(delta),
            })
        }
    }
}

/// `(k − 1)/(k + 2)`; zero for the first iteration.
pub fn dynamic_coeff(k: usize) -> f64 {
    let k = k.max(1) as f64;
    (k - 1.0) / (k + 2.0)
}

/// `g = τ(1 − α) − (1 + β)L − δ` and `h = δ − τα − Lβ`.
pub fn lemma_gh(alpha: f64, beta: f64, delta: f64, tau: f64, l: f64) -> (f64, f64) {
    (
        tau * (1.0 - alpha) - (1.0 + beta) * l - delta,
        delta - tau * alpha - l * beta,
    )
}

/// Convex-prox counterpart of [`lemma_gh`]: `g = τ(2 − α) − (1 + β)L − δ`,
/// `h` unchanged.
pub fn lemma_gh_convex(alpha: f64, beta: f64, delta: f64, tau: f64, l: f64) -> (f64, f64) {
    (
        tau * (2.0 - alpha) - (1.0 + beta) * l - delta,
        delta - tau * alpha - l * beta,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn nc(eps: f64) -> ScheduleKind {
        ScheduleKind::StaticNonconvex {
            alpha_bar: 0.0,
            beta_bar: 0.0,
            eps,
        }
    }

    fn cv(eps: f64) -> ScheduleKind {
        ScheduleKind::StaticConvex {
            alpha_bar: 0.0,
            beta_bar: 0.0,
            eps,
        }
    }

    #[test]
    fn delta_star_values() {
        assert_eq!(delta_star(0.0, 0.0, 0.3, 1.0, false).unwrap(), 0.0);
        let d = delta_star(0.2, 0.2, 0.0, 1.0, false).unwrap();
        assert!((d - 0.4 / 0.6).abs() < 1e-15);
        let d = delta_star(0.4, 0.4, 0.0, 1.0, true).unwrap();
        assert!((d - 1.0).abs() < 1e-15);
    }

    #[test]
    fn delta_star_domain_errors() {
        assert!(matches!(
            delta_star(0.5, 0.1, 0.0, 1.0, false),
            Err(Error::ParameterDomain(_))
        ));
        assert!(delta_star(0.45, 0.1, 0.1, 1.0, false).is_err());
        assert!(delta_star(0.95, 0.1, 0.1, 1.0, true).is_err());
        assert!(delta_star(0.2, 0.1, 0.0, 0.0, true).is_err());
    }

    #[test]
    fn tau_step_values() {
        let r = tau_step(0.0, 0.0, 3.0, nc(0.0)).unwrap();
        assert_eq!(r.tau, 3.0);
        assert_eq!(r.delta, Some(0.0));
        let r = tau_step(0.4, 0.4, 1.0, nc(0.0)).unwrap();
        assert!((r.tau - 9.0).abs() < 1e-13);
        let r = tau_step(0.4, 0.4, 1.0, cv(0.0)).unwrap();
        assert!((r.tau - 1.5).abs() < 1e-14);
        let r = tau_step(0.7, 0.7, 2.5, ScheduleKind::Dynamic).unwrap();
        assert_eq!(r.tau, 2.5);
        assert_eq!(r.delta, None);
    }

    #[test]
    fn tau_step_rejects_large_alpha() {
        assert!(tau_step(0.5, 0.0, 1.0, nc(0.0)).is_err());
        assert!(tau_step(0.6, 0.0, 1.0, nc(0.0)).is_err());
        assert!(tau_step(0.6, 0.0, 1.0, cv(0.0)).is_ok());
        assert!(tau_step(0.1, 0.0, 0.0, nc(0.0)).is_err());
    }

    #[test]
    fn closed_forms_at_zero_eps() {
        for &a in &[0.0, 0.1, 0.25, 0.45] {
            for &b in &[0.0, 0.3, 1.0] {
                let l = 1.7;
                let t = tau_step(a, b, l, nc(0.0)).unwrap().tau;
                let want = (1.0 + 2.0 * b) / (1.0 - 2.0 * a) * l;
                assert!((t - want).abs() <= 1e-12 * want);
                let t = tau_step(a, b, l, cv(0.0)).unwrap().tau;
                let want = (1.0 + 2.0 * b) / (2.0 * (1.0 - a)) * l;
                assert!((t - want).abs() <= 1e-12 * want);
            }
        }
    }

    #[test]
    fn tau_monotone_in_alpha_and_beta() {
        let l = 1.3;
        for kind in [nc(0.0), cv(0.0), nc(0.05), cv(0.05)] {
            let amax = if kind.is_convex_rule() { 0.9 } else { 0.45 };
            let steps = 40;
            for i in 0..steps {
                let a = amax * i as f64 / steps as f64;
                let a2 = amax * (i + 1) as f64 / steps as f64;
                for j in 0..steps {
                    let b = j as f64 / steps as f64;
                    let b2 = (j + 1) as f64 / steps as f64;
                    let t = tau_step(a, b, l, kind).unwrap().tau;
                    assert!(tau_step(a2, b, l, kind).unwrap().tau >= t);
                    assert!(tau_step(a, b2, l, kind).unwrap().tau >= t);
                }
            }
        }
    }

    #[test]
    fn dynamic_values() {
        assert_eq!(dynamic_coeff(1), 0.0);
        assert_eq!(dynamic_coeff(2), 0.25);
        assert!((dynamic_coeff(8) - 0.7).abs() < 1e-15);
        let mut prev = 0.0;
        for k in 2..1000 {
            let c = dynamic_coeff(k);
            assert!(c > prev && c < 1.0);
            prev = c;
        }
        assert_eq!(ScheduleKind::Dynamic.coefficients(2), (0.25, 0.25));
    }

    #[test]
    fn gh_boundary() {
        assert_eq!(lemma_gh(0.0, 0.0, 0.0, 2.0, 2.0), (0.0, 0.0));
    }

    #[test]
    fn gh_at_star_values() {
        let (ab, bb, eps, lam) = (0.3, 0.5, 0.1, 2.0);
        let d = delta_star(ab, bb, eps, lam, false).unwrap();
        let (a, b, l) = (0.2, 0.4, 1.5);
        let tau = tau_from_delta(a, b, l, d, eps, false);
        let (g, h) = lemma_gh(a, b, d, tau, l);
        assert!((g - eps * d).abs() < 1e-12);
        assert!(h >= eps * d - 1e-12);

        let d = delta_star(0.6, bb, eps, lam, true).unwrap();
        let tau = tau_from_delta(0.6, bb, lam, d, eps, true);
        let (g, h) = lemma_gh_convex(0.6, bb, d, tau, lam);
        assert!((g - eps * d).abs() < 1e-12);
        assert!((h - eps * d).abs() < 1e-12);
    }

    #[test]
    fn validate_bounds() {
        let bad = ScheduleKind::StaticNonconvex {
            alpha_bar: 0.48,
            beta_bar: 0.1,
            eps: 0.05,
        };
        assert!(bad.validate().is_err());
        let ok = ScheduleKind::StaticConvex {
            alpha_bar: 0.8,
            beta_bar: 0.8,
            eps: 0.05,
        };
        assert!(ok.validate().is_ok());
        assert!(ScheduleKind::Dynamic.validate().is_ok());
        assert!(ScheduleKind::Dynamic.is_heuristic());
    }
}
