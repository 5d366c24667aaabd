//! Numerical oracles for the inequalities behind the convergence analysis.
//!
//! Every check returns a [`Report`] whose rows serialize to
//! `check,trial,status,detail`. Checks are deterministic for a given seed.

use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use ndarray::{Array1, Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::blockmodel::{BlockVector, Problem, Tensor};
use crate::error::{Error, Result};
use crate::prox::{prox_box01, prox_l0_nonneg_cols, prox_l1, prox_nonneg};
use crate::schedules::{delta_star, lemma_gh, lemma_gh_convex, tau_from_delta};
use crate::solver::SolverTrace;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
}

impl Status {
    fn as_str(self) -> &'static str {
        match self {
            Status::Pass => "pass",
            Status::Fail => "fail",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub trial: String,
    pub status: Status,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub check: String,
    pub rows: Vec<ReportRow>,
}

impl Report {
    pub fn new(check: &str) -> Self {
        Self {
            check: check.to_string(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, trial: impl ToString, ok: bool, detail: String) {
        self.rows.push(ReportRow {
            trial: trial.to_string(),
            status: if ok { Status::Pass } else { Status::Fail },
            detail,
        });
    }

    pub fn failures(&self) -> impl Iterator<Item = &ReportRow> {
        self.rows.iter().filter(|r| r.status == Status::Fail)
    }

    pub fn passed(&self) -> bool {
        self.failures().next().is_none()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "check,trial,status,detail")?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{},\"{}\"",
                self.check,
                r.trial,
                r.status.as_str(),
                r.detail.replace('"', "'")
            )?;
        }
        Ok(())
    }

    /// Writes `<dir>/<check>.csv` and returns the path.
    pub fn save(&self, dir: &Path) -> Result<PathBuf> {
        std::fs::create_dir_all(dir)?;
        let path = dir.join(format!("{}.csv", self.check));
        self.write_csv(std::io::BufWriter::new(std::fs::File::create(&path)?))?;
        Ok(path)
    }
}

fn normal_vec(rng: &mut ChaCha8Rng, n: usize) -> Array1<f64> {
    Array1::from_shape_fn(n, |_| StandardNormal.sample(rng))
}

fn sq(v: &Array1<f64>) -> f64 {
    v.dot(v)
}

fn vec_str(v: &Array1<f64>) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:e}")).collect();
    format!("[{}]", parts.join(" "))
}

/// Random PSD matrix with a known largest eigenvalue: `Q = Σ d_i q_i q_iᵀ`
/// over an orthonormal basis from Gram–Schmidt.
fn random_quadratic(rng: &mut ChaCha8Rng, n: usize) -> (Array2<f64>, f64) {
    let mut basis: Vec<Array1<f64>> = Vec::with_capacity(n);
    while basis.len() < n {
        let mut v = normal_vec(rng, n);
        for q in &basis {
            let c = q.dot(&v);
            v = v - q * c;
        }
        let norm = sq(&v).sqrt();
        if norm > 1e-8 {
            basis.push(v / norm);
        }
    }
    let diag: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..5.0)).collect();
    let mut q = Array2::zeros((n, n));
    for (d, v) in diag.iter().zip(&basis) {
        let col = v.view().insert_axis(Axis(1));
        q += &(col.dot(&col.t()) * *d);
    }
    let l = diag.iter().cloned().fold(0.0, f64::max);
    (q, l)
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Sigma {
    L1(f64),
    Box01,
    Nonneg,
    L0Nonneg(usize),
}

impl Sigma {
    fn convex(self) -> bool {
        !matches!(self, Sigma::L0Nonneg(_))
    }

    fn value(self, u: &Array1<f64>) -> f64 {
        match self {
            Sigma::L1(w) => w * u.iter().map(|x| x.abs()).sum::<f64>(),
            Sigma::Box01 => indicator(u.iter().all(|x| (0.0..=1.0).contains(x))),
            Sigma::Nonneg => indicator(u.iter().all(|&x| x >= 0.0)),
            Sigma::L0Nonneg(s) => indicator(
                u.iter().all(|&x| x >= 0.0) && u.iter().filter(|&&x| x != 0.0).count() <= s,
            ),
        }
    }

    fn prox(self, t: f64, p: &Array1<f64>) -> Array1<f64> {
        let pt: Tensor = p.clone().into_dyn();
        let out = match self {
            Sigma::L1(w) => prox_l1(&pt, w / t),
            Sigma::Box01 => prox_box01(&pt),
            Sigma::Nonneg => prox_nonneg(&pt),
            Sigma::L0Nonneg(s) => {
                let col = p.view().insert_axis(Axis(1));
                prox_l0_nonneg_cols(col, s)
                    .expect("s drawn within the dimension")
                    .index_axis_move(Axis(1), 0)
                    .into_dyn()
            }
        };
        out.into_dimensionality().expect("1-D")
    }
}

fn indicator(feasible: bool) -> f64 {
    if feasible {
        0.0
    } else {
        f64::INFINITY
    }
}

/// Randomized check of the proximal inequality
///
/// ```text
/// g(u⁺) ≤ g(u) + (L_h + s)/2 ‖u⁺ − u‖² + t/2 ‖u − v‖² − t/2 ‖u⁺ − v‖² + L_h²/(2s) ‖u − w‖²
/// ```
///
/// for `g = h + σ`, `u⁺ ∈ prox_t^σ(v − ∇h(w)/t)`, and of its tightening
/// (`L_h + s` replaced by `L_h + s − t`) when `σ` is convex. `h` is a random
/// convex quadratic with known `L_h`. Each trial uses a random `s` and,
/// when `u⁺ ≠ u`, also the minimizing `s = L_h‖u − w‖/‖u⁺ − u‖`. Slack is
/// `1e−9·(1 + |rhs|)`.
pub fn check_prox_inequality(trials: usize, seed: u64) -> Result<Report> {
    if trials == 0 {
        return Err(Error::ParameterDomain("need at least one trial".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = Report::new("prox_inequality");
    for trial in 0..trials {
        let n = rng.random_range(1..=10usize);
        let (q, l_h) = random_quadratic(&mut rng, n);
        let c = normal_vec(&mut rng, n);
        let sigma = match trial % 4 {
            0 => Sigma::L1(rng.random_range(0.0..2.0)),
            1 => Sigma::Box01,
            2 => Sigma::Nonneg,
            _ => Sigma::L0Nonneg(rng.random_range(0..=n)),
        };
        let t = l_h * rng.random_range(0.05..5.0);
        // u in the domain of σ so that g(u) is finite
        let u = sigma.prox(1.0, &(normal_vec(&mut rng, n) * 0.8 + 0.3));
        let v = normal_vec(&mut rng, n);
        let w = normal_vec(&mut rng, n);
        let h = |x: &Array1<f64>| 0.5 * x.dot(&q.dot(x)) + c.dot(x);
        let grad_w = q.dot(&w) + &c;
        let u_plus = sigma.prox(t, &(&v - &(&grad_w / t)));
        let g = |x: &Array1<f64>| h(x) + sigma.value(x);

        let mut s_values = vec![l_h * rng.random_range(0.05..20.0)];
        let du = sq(&(&u_plus - &u));
        if du > 0.0 {
            let s_star = l_h * sq(&(&u - &w)).sqrt() / du.sqrt();
            if s_star > 0.0 {
                s_values.push(s_star);
            }
        }
        let lhs = g(&u_plus);
        for (k, &s) in s_values.iter().enumerate() {
            let common = g(&u) + 0.5 * t * sq(&(&u - &v)) - 0.5 * t * sq(&(&u_plus - &v))
                + l_h * l_h / (2.0 * s) * sq(&(&u - &w));
            let mut bounds = vec![("basic", common + 0.5 * (l_h + s) * du)];
            if sigma.convex() {
                bounds.push(("convex", common + 0.5 * (l_h + s - t) * du));
            }
            let label = if k == 0 { "random_s" } else { "optimal_s" };
            for (kind, rhs) in bounds {
                let ok = lhs <= rhs + 1e-9 * (1.0 + rhs.abs());
                let mut detail = format!(
                    "{kind} {label} sigma={sigma:?} n={n} margin={:e}",
                    rhs - lhs
                );
                if !ok {
                    let _ = write!(
                        detail,
                        " t={t:e} s={s:e} L_h={l_h:e} u={} v={} w={} u_plus={}",
                        vec_str(&u),
                        vec_str(&v),
                        vec_str(&w),
                        vec_str(&u_plus)
                    );
                }
                report.push(trial, ok, detail);
            }
        }
    }
    Ok(report)
}

/// Checks `g(α, β, δ*, τ, L) = εδ*` and `h(α, β, δ*, τ, L) ≥ εδ*` for the
/// nonconvex and convex step rules over `points` random parameter draws
/// per variant, plus boundary probes at `α = ᾱ`, `β = β̄`, `L = λ⁺`.
///
/// Equality is tested to `1e−12` relative to the magnitude of the terms
/// that make up `g`; the inequality to `1e−12` absolute.
pub fn check_lemma_gh(points: usize, seed: u64) -> Result<Report> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = Report::new("lemma_gh");
    for convex in [false, true] {
        let variant = if convex { "convex" } else { "nonconvex" };
        let mut worst_g = 0.0f64;
        let mut worst_h = f64::INFINITY;
        let mut failures = 0usize;
        for trial in 0..points + 3 {
            let eps = [0.0, 0.01, 0.1][trial % 3];
            let a_max = if convex { 1.0 - eps } else { 0.5 * (1.0 - eps) };
            let alpha_bar = rng.random_range(0.0..a_max * 0.999);
            let beta_bar = rng.random_range(0.0..=1.0);
            let lambda_plus = 10f64.powf(rng.random_range(-3.0..3.0));
            // the last three trials probe the boundary
            let (alpha, beta, l) = if trial >= points {
                (alpha_bar, beta_bar, lambda_plus)
            } else {
                (
                    rng.random_range(0.0..=alpha_bar),
                    rng.random_range(0.0..=beta_bar),
                    lambda_plus * rng.random_range(1e-3..=1.0),
                )
            };
            let delta = delta_star(alpha_bar, beta_bar, eps, lambda_plus, convex)?;
            let tau = tau_from_delta(alpha, beta, l, delta, eps, convex);
            let (g, h) = if convex {
                lemma_gh_convex(alpha, beta, delta, tau, l)
            } else {
                lemma_gh(alpha, beta, delta, tau, l)
            };
            let target = eps * delta;
            let scale = 1.0 + tau.abs() * 2.0 + (1.0 + beta) * l + delta;
            let g_err = (g - target).abs() / scale;
            let h_margin = h - target;
            worst_g = worst_g.max(g_err);
            worst_h = worst_h.min(h_margin);
            let ok = g_err <= 1e-12 && h_margin >= -1e-12;
            if !ok {
                failures += 1;
                report.push(
                    format!("{variant}-{trial}"),
                    false,
                    format!(
                        "alpha_bar={alpha_bar:e} beta_bar={beta_bar:e} eps={eps} lambda_plus={lambda_plus:e} alpha={alpha:e} beta={beta:e} L={l:e} delta={delta:e} tau={tau:e} g={g:e} h={h:e}"
                    ),
                );
            }
        }
        report.push(
            format!("{variant}-all"),
            failures == 0,
            format!(
                "points={} failures={failures} max_rel_g_err={worst_g:e} min_h_margin={worst_h:e}",
                points + 3
            ),
        );
    }
    Ok(report)
}

/// Checks `Ψ(u^k) − Ψ(u^{k+1}) ≥ ρ₁‖u^{k+1} − u^k‖² − 1e−8` along a trace,
/// where `‖u^{k+1} − u^k‖² = ‖x^{k+1} − x^k‖² + ‖x^k − x^{k−1}‖²`.
/// Traces without Lyapunov values (dynamic runs) are rejected.
pub fn check_c1_descent(trace: &SolverTrace, rho1: f64) -> Result<Report> {
    if !(rho1 >= 0.0) {
        return Err(Error::ParameterDomain(format!("rho1 must be >= 0, got {rho1}")));
    }
    let psi: Vec<f64> = trace
        .rows
        .iter()
        .map(|r| r.psi)
        .collect::<Option<_>>()
        .ok_or_else(|| Error::Contract("trace has no Lyapunov values (dynamic schedule?)".into()))?;
    let mut report = Report::new("c1_descent");
    let mut worst = f64::INFINITY;
    let mut bad = Vec::new();
    for k in 0..trace.rows.len().saturating_sub(1) {
        let prev_step = trace.rows[k].step_norm;
        let next_step = trace.rows[k + 1].step_norm;
        let du = next_step * next_step + prev_step * prev_step;
        let margin = psi[k] - psi[k + 1] - rho1 * du;
        worst = worst.min(margin);
        if margin < -1e-8 {
            bad.push(k);
            report.push(
                k,
                false,
                format!(
                    "psi_k={:e} psi_k1={:e} rho1={rho1:e} du={du:e} margin={margin:e}",
                    psi[k],
                    psi[k + 1]
                ),
            );
        }
    }
    report.push(
        "all",
        bad.is_empty(),
        format!(
            "iterations={} violations={} min_margin={worst:e}",
            trace.iterations(),
            bad.len()
        ),
    );
    Ok(report)
}

/// `ρ₁ = (ε/2)·min_i δ_i` for a trace with constant Lyapunov weights.
pub fn rho1_from_trace(trace: &SolverTrace, eps: f64) -> Option<f64> {
    trace
        .lyapunov_weights
        .as_ref()
        .map(|w| 0.5 * eps * w.iter().cloned().fold(f64::INFINITY, f64::min))
}

/// Compares each partial gradient with central differences of `H` along
/// `directions` random unit directions per block (step `1e−6`). A
/// direction passes when the mismatch is within `1e−4` relative or `1e−7`
/// absolute, whichever is looser.
pub fn check_gradients(
    problem: &dyn Problem,
    x: &BlockVector,
    directions: usize,
    seed: u64,
) -> Result<Report> {
    if x.num_blocks() != problem.num_blocks() {
        return Err(Error::Shape("point does not match the problem".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = Report::new(&format!("gradients_{}", problem.name()));
    let h = 1e-6;
    for block in 0..problem.num_blocks() {
        let grad = problem.partial_grad(block, x);
        if grad.shape() != x.block(block).shape() {
            return Err(Error::Shape(format!(
                "gradient of block {block} has shape {:?}, block has {:?}",
                grad.shape(),
                x.block(block).shape()
            )));
        }
        for dir in 0..directions {
            let mut d: Tensor = x.block(block).mapv(|_| StandardNormal.sample(&mut rng));
            let norm = d.iter().map(|v| v * v).sum::<f64>().sqrt();
            d.mapv_inplace(|v| v / norm);
            let mut xp = x.clone();
            xp.set_block(block, x.block(block) + &(&d * h))?;
            let mut xm = x.clone();
            xm.set_block(block, x.block(block) - &(&d * h))?;
            let fd = (problem.eval_smooth(&xp) - problem.eval_smooth(&xm)) / (2.0 * h);
            let an: f64 = grad.iter().zip(d.iter()).map(|(g, v)| g * v).sum();
            let err = (fd - an).abs();
            let tol = (1e-4 * fd.abs().max(an.abs())).max(1e-7);
            report.push(
                format!("block{block}-dir{dir}"),
                err <= tol,
                format!("analytic={an:e} finite_diff={fd:e} abs_err={err:e} tol={tol:e}"),
            );
        }
    }
    Ok(report)
}
