//! The iPALM outer loop.
//!
//! Each iteration sweeps the blocks in order. For block `i`:
//!
//! ```text
//! y_i = x_i^k + α_i (x_i^k − x_i^{k−1})          prox anchor
//! z_i = x_i^k + β_i (x_i^k − x_i^{k−1})          gradient point
//! x_i^{k+1} = prox_{τ_i}^{f_i}( y_i − ∇_i H(x_{<i}^{k+1}, z_i, x_{>i}^k) / τ_i )
//! ```
//!
//! so later blocks see the already-updated earlier blocks. The first
//! iteration uses `x^{−1} = x^0` and is therefore inertia-free.

use std::io::Write;
use std::time::Instant;

use crate::blockmodel::{extrapolate, step_deltas, BlockVector, InertialParams, Problem, Tensor};
use crate::config::{LipschitzMode, RunConfig, ScheduleChoice};
use crate::error::{Error, Result};
use crate::lipschitz::{backtrack_lipschitz, BacktrackState};
use crate::schedules::{tau_from_delta, tau_step, ScheduleKind, StepRule};

/// One trace entry. Row `0` describes the starting point.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub k: usize,
    pub objective: f64,
    /// Lyapunov value; present when every block has a weight δ.
    pub psi: Option<f64>,
    /// `½‖x_i^k − x_i^{k−1}‖²` per block.
    pub half_sq_steps: Vec<f64>,
    /// Empty for row 0.
    pub params: Vec<InertialParams>,
    /// `‖x^k − x^{k−1}‖`.
    pub step_norm: f64,
    pub seconds: f64,
    /// Moduli tried by backtracking, per block (empty when exact).
    pub tested_lipschitz: Vec<Vec<f64>>,
    /// `rhs − lhs` of the proximal inequality per block, when requested and
    /// `β > 0`.
    pub prox_slack: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SolverTrace {
    pub num_blocks: usize,
    pub rows: Vec<TraceRow>,
    /// Set for dynamic runs, which have no convergence guarantee.
    pub heuristic: bool,
    /// Constant Lyapunov weights when the run fixed δ from `λ⁺`.
    pub lyapunov_weights: Option<Vec<f64>>,
}

impl SolverTrace {
    pub fn last(&self) -> Option<&TraceRow> {
        self.rows.last()
    }

    pub fn objective_at(&self, k: usize) -> Option<f64> {
        self.rows.get(k).map(|r| r.objective)
    }

    pub fn iterations(&self) -> usize {
        self.rows.len().saturating_sub(1)
    }

    /// CSV header for `num_blocks` blocks; the two-block case reads
    /// `k,F,Psi,delta1,delta2,L1,L2,tau1,tau2,alpha1,alpha2,beta1,beta2,step_norm,seconds`.
    pub fn csv_header(num_blocks: usize) -> String {
        let mut cols = vec!["k".to_string(), "F".into(), "Psi".into()];
        for name in ["delta", "L", "tau", "alpha", "beta"] {
            cols.extend((1..=num_blocks).map(|i| format!("{name}{i}")));
        }
        cols.push("step_norm".into());
        cols.push("seconds".into());
        cols.join(",")
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{}", Self::csv_header(self.num_blocks))?;
        for row in &self.rows {
            let mut fields = vec![row.k.to_string(), fmt_num(row.objective), fmt_opt(row.psi)];
            let per = |f: &dyn Fn(&InertialParams) -> Option<f64>| -> Vec<String> {
                (0..self.num_blocks)
                    .map(|i| fmt_opt(row.params.get(i).and_then(f)))
                    .collect()
            };
            fields.extend(per(&|p| p.delta));
            fields.extend(per(&|p| Some(p.lipschitz)));
            fields.extend(per(&|p| Some(p.tau)));
            fields.extend(per(&|p| Some(p.alpha)));
            fields.extend(per(&|p| Some(p.beta)));
            fields.push(fmt_num(row.step_norm));
            fields.push(fmt_num(row.seconds));
            writeln!(w, "{}", fields.join(","))?;
        }
        Ok(())
    }
}

/// 17 significant digits.
pub fn fmt_num(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        format!("{v:.16e}")
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_num).unwrap_or_default()
}

pub struct SolverState {
    pub x_cur: BlockVector,
    pub x_prev: BlockVector,
    /// Completed iterations.
    pub k: usize,
    pub schedule: Vec<ScheduleKind>,
    pub backtrack: Vec<Option<BacktrackState>>,
    /// Constant δ per block when fixed from `λ⁺`.
    pub lyapunov_delta: Option<Vec<f64>>,
    pub lambda_plus: Option<Vec<f64>>,
    pub tau_scale: Vec<f64>,
    pub check_prox_inequality: bool,
    pub trace: SolverTrace,
    started: Instant,
}

impl SolverState {
    /// Sets up the run from a feasible starting point.
    pub fn new(problem: &dyn Problem, x0: BlockVector, config: &RunConfig) -> Result<Self> {
        config.validate()?;
        let nb = problem.num_blocks();
        if x0.num_blocks() != nb {
            return Err(Error::Shape(format!(
                "starting point has {} blocks, problem has {nb}",
                x0.num_blocks()
            )));
        }
        let alpha = RunConfig::per_block(&config.alpha_bar, nb, 0.0, "alpha_bar")?;
        let beta = RunConfig::per_block(&config.beta_bar, nb, 0.0, "beta_bar")?;
        let tau_scale = if config.tau_scale.is_empty() {
            (0..nb).map(|i| problem.step_scale(i)).collect()
        } else {
            RunConfig::per_block(&config.tau_scale, nb, 1.0, "tau_scale")?
        };
        let schedule: Vec<ScheduleKind> = (0..nb)
            .map(|i| {
                let (alpha_bar, beta_bar, eps) = (alpha[i], beta[i], config.epsilon);
                match config.schedule {
                    ScheduleChoice::Dynamic => ScheduleKind::Dynamic,
                    ScheduleChoice::StaticConvex if problem.is_convex(i) => {
                        ScheduleKind::StaticConvex {
                            alpha_bar,
                            beta_bar,
                            eps,
                        }
                    }
                    _ => ScheduleKind::StaticNonconvex {
                        alpha_bar,
                        beta_bar,
                        eps,
                    },
                }
            })
            .collect();
        for kind in &schedule {
            kind.validate()?;
        }

        let (lambda_plus, lyapunov_delta) = if config.lambda_plus.is_empty()
            || config.schedule == ScheduleChoice::Dynamic
        {
            (None, None)
        } else {
            let lp = RunConfig::per_block(&config.lambda_plus, nb, 1.0, "lambda_plus")?;
            let deltas = schedule
                .iter()
                .zip(&lp)
                .map(|(kind, &l)| Ok(kind.constant_delta(l)?.unwrap_or(0.0)))
                .collect::<Result<Vec<_>>>()?;
            (Some(lp), Some(deltas))
        };

        let backtrack = (0..nb)
            .map(|i| {
                let exact_available = problem.lipschitz(i, &x0).is_some();
                match config.lipschitz {
                    LipschitzMode::Backtrack => Ok(Some(config.backtrack)),
                    LipschitzMode::Auto if !exact_available => Ok(Some(config.backtrack)),
                    LipschitzMode::Exact if !exact_available => Err(Error::InvalidConfig(format!(
                        "exact Lipschitz moduli requested but block {i} of {} has none",
                        problem.name()
                    ))),
                    _ => Ok(None),
                }
            })
            .collect::<Result<Vec<_>>>()?;

        let f0 = problem.eval_objective(&x0);
        if !f0.is_finite() {
            return Err(Error::Contract(format!(
                "starting point is infeasible or non-finite (F = {f0})"
            )));
        }
        let heuristic = schedule.iter().any(|s| s.is_heuristic());
        let has_weights = !heuristic;
        let trace = SolverTrace {
            num_blocks: nb,
            rows: vec![TraceRow {
                k: 0,
                objective: f0,
                psi: has_weights.then_some(f0),
                half_sq_steps: vec![0.0; nb],
                params: Vec::new(),
                step_norm: 0.0,
                seconds: 0.0,
                tested_lipschitz: vec![Vec::new(); nb],
                prox_slack: vec![None; nb],
            }],
            heuristic,
            lyapunov_weights: lyapunov_delta.clone(),
        };
        Ok(Self {
            x_prev: x0.clone(),
            x_cur: x0,
            k: 0,
            schedule,
            backtrack,
            lyapunov_delta,
            lambda_plus,
            tau_scale,
            check_prox_inequality: config.check_prox_inequality,
            trace,
            started: Instant::now(),
        })
    }

    fn step_rule(&self, i: usize, alpha: f64, beta: f64, l: f64) -> Result<StepRule> {
        let kind = self.schedule[i];
        match (&self.lyapunov_delta, &self.lambda_plus) {
            (Some(deltas), Some(lp)) if !kind.is_heuristic() => {
                if l > lp[i] {
                    return Err(Error::ParameterDomain(format!(
                        "block {i}: Lipschitz modulus {l} exceeds the bound lambda_plus = {}",
                        lp[i]
                    )));
                }
                let delta = deltas[i];
                Ok(StepRule {
                    tau: tau_from_delta(alpha, beta, l, delta, kind.eps(), kind.is_convex_rule()),
                    delta: Some(delta),
                })
            }
            _ => tau_step(alpha, beta, l, kind),
        }
    }
}

fn with_block(x: &BlockVector, i: usize, value: &Tensor) -> BlockVector {
    let mut out = x.clone();
    out.set_block(i, value.clone())
        .expect("block shapes are fixed for the run");
    out
}

fn sq_dist(a: &Tensor, b: &Tensor) -> f64 {
    a.iter().zip(b.iter()).map(|(u, v)| (u - v).powi(2)).sum()
}

fn prox_step(
    problem: &dyn Problem,
    i: usize,
    tau: f64,
    y: &Tensor,
    grad: &Tensor,
) -> Tensor {
    let point = y - &(grad / tau);
    problem.prox(i, tau, &point)
}

/// Performs one full sweep over the blocks and appends a trace row.
pub fn ipalm_iterate(state: &mut SolverState, problem: &dyn Problem) -> Result<()> {
    let k = state.k + 1;
    let nb = problem.num_blocks();
    let mut work = state.x_cur.clone();
    let mut params = Vec::with_capacity(nb);
    let mut tested_all = Vec::with_capacity(nb);
    let mut slacks = Vec::with_capacity(nb);

    for i in 0..nb {
        let (alpha, beta) = state.schedule[i].coefficients(k);
        let y = extrapolate(&state.x_cur, &state.x_prev, alpha, i)?;
        let z = extrapolate(&state.x_cur, &state.x_prev, beta, i)?;
        work.set_block(i, z.clone())?;
        let grad = problem.partial_grad(i, &work);
        let scale = state.tau_scale[i];

        let (lipschitz, rule, x_next, tested) = match state.backtrack[i] {
            None => {
                let l = problem
                    .lipschitz(i, &work)
                    .ok_or_else(|| Error::InvalidConfig(format!("block {i} has no exact modulus")))??;
                let rule = state.step_rule(i, alpha, beta, l)?;
                let x_next = prox_step(problem, i, rule.tau * scale, &y, &grad);
                (l, rule, x_next, Vec::new())
            }
            Some(mut bt) => {
                let mut last_rule = None;
                let outcome = {
                    let st = &*state;
                    let work_ref = &work;
                    backtrack_lipschitz(
                        |t: &Tensor| problem.eval_smooth(&with_block(work_ref, i, t)),
                        &grad,
                        &z,
                        |l| {
                            let rule = st.step_rule(i, alpha, beta, l)?;
                            last_rule = Some(rule);
                            Ok(prox_step(problem, i, rule.tau * scale, &y, &grad))
                        },
                        &mut bt,
                    )?
                };
                state.backtrack[i] = Some(bt);
                let rule = last_rule.expect("backtracking tests at least one modulus");
                (outcome.lipschitz, rule, outcome.candidate, outcome.tested)
            }
        };
        let tau_eff = rule.tau * scale;

        let slack = if state.check_prox_inequality && beta > 0.0 {
            let u = state.x_cur.block(i);
            let s = lipschitz * beta;
            let h = |t: &Tensor| problem.eval_smooth(&with_block(&work, i, t));
            let lhs = h(&x_next) + problem.eval_nonsmooth(i, &x_next);
            let rhs = h(u)
                + problem.eval_nonsmooth(i, u)
                + 0.5 * (lipschitz + s) * sq_dist(&x_next, u)
                + 0.5 * tau_eff * sq_dist(u, &y)
                - 0.5 * tau_eff * sq_dist(&x_next, &y)
                + lipschitz * lipschitz / (2.0 * s) * sq_dist(u, &z);
            Some(rhs - lhs)
        } else {
            None
        };

        work.set_block(i, x_next)?;
        params.push(InertialParams {
            alpha,
            beta,
            tau: tau_eff,
            delta: rule.delta,
            lipschitz,
        });
        tested_all.push(tested);
        slacks.push(slack);
    }

    if !work.is_finite() {
        return Err(Error::Divergence {
            iteration: k,
            trace: Box::new(state.trace.clone()),
        });
    }

    let half_sq = step_deltas(&work, &state.x_cur)?;
    let objective = problem.eval_objective(&work);
    if !objective.is_finite() {
        return Err(Error::Divergence {
            iteration: k,
            trace: Box::new(state.trace.clone()),
        });
    }
    let weights: Option<Vec<f64>> = match &state.lyapunov_delta {
        Some(d) => Some(d.clone()),
        None => params.iter().map(|p| p.delta).collect(),
    };
    let psi = weights.map(|w| {
        objective
            + w.iter()
                .zip(&half_sq)
                .map(|(d, h)| d * h)
                .sum::<f64>()
    });
    let step_norm = (2.0 * half_sq.iter().sum::<f64>()).sqrt();

    state.x_prev = std::mem::replace(&mut state.x_cur, work);
    state.k = k;
    state.trace.rows.push(TraceRow {
        k,
        objective,
        psi,
        half_sq_steps: half_sq,
        params,
        step_norm,
        seconds: state.started.elapsed().as_secs_f64(),
        tested_lipschitz: tested_all,
        prox_slack: slacks,
    });
    Ok(())
}

/// Final iterate and the complete trace of a run.
#[derive(Debug, Clone)]
pub struct Solution {
    pub x: BlockVector,
    pub trace: SolverTrace,
}

/// Runs from `x0` until the budget is spent or
/// `‖x^{k+1} − x^k‖ ≤ tol·(1 + ‖x^k‖)`. `tol = 0` always spends the budget.
pub fn run_from(problem: &dyn Problem, x0: BlockVector, config: &RunConfig) -> Result<Solution> {
    let mut state = SolverState::new(problem, x0, config)?;
    for _ in 0..config.iters {
        let prev_norm = state.x_cur.norm();
        ipalm_iterate(&mut state, problem)?;
        let step = state.trace.last().map(|r| r.step_norm).unwrap_or(0.0);
        if config.tol > 0.0 && step <= config.tol * (1.0 + prev_norm) {
            break;
        }
    }
    Ok(Solution {
        x: state.x_cur,
        trace: state.trace,
    })
}

/// Runs from the problem's own seeded starting point.
pub fn run(problem: &dyn Problem, config: &RunConfig) -> Result<Solution> {
    let x0 = problem.initial_point(config.seed)?;
    run_from(problem, x0, config)
}

/// `F(x_cur) + Σ_i (δ_i/2)‖x_cur_i − x_prev_i‖²`.
pub fn lyapunov_psi(
    x_cur: &BlockVector,
    x_prev: &BlockVector,
    delta: &[f64],
    problem: &dyn Problem,
) -> Result<f64> {
    let half = step_deltas(x_cur, x_prev)?;
    if delta.len() != half.len() {
        return Err(Error::Shape(format!(
            "{} weights for {} blocks",
            delta.len(),
            half.len()
        )));
    }
    if delta.iter().any(|&d| d < 0.0) {
        return Err(Error::ParameterDomain("Lyapunov weights must be >= 0".into()));
    }
    Ok(problem.eval_objective(x_cur) + delta.iter().zip(&half).map(|(d, h)| d * h).sum::<f64>())
}
