//! Command-line driver: problem presets, schedule sweeps, the verification
//! battery and synthetic data generation.

use std::ffi::OsString;
use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use crate::blockmodel::{BlockVector, Problem};
use crate::config::{load_config, LipschitzMode, RunConfig, ScheduleChoice};
use crate::error::{Error, Result};
use crate::io;
use crate::problems::{BidParams, BidProblem, ConvLassoParams, ConvLassoProblem, NmfProblem};
use crate::solver::{fmt_num, run, Solution, SolverTrace};
use crate::synth;
use crate::verify;

/// One cell of a schedule sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SweepSetting {
    Static { alpha: f64, beta: f64 },
    Dynamic,
}

impl FromStr for SweepSetting {
    type Err = String;

    /// `dynamic`, `a` (α = β = a) or `a/b`.
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let s = s.trim();
        if s == "dynamic" {
            return Ok(Self::Dynamic);
        }
        let num = |v: &str| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| format!("bad sweep setting '{s}'"))
        };
        match s.split_once('/') {
            Some((a, b)) => Ok(Self::Static {
                alpha: num(a)?,
                beta: num(b)?,
            }),
            None => {
                let a = num(s)?;
                Ok(Self::Static { alpha: a, beta: a })
            }
        }
    }
}

impl fmt::Display for SweepSetting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Dynamic => f.write_str("dynamic"),
            Self::Static { alpha, beta } if alpha == beta => write!(f, "alpha=beta={alpha}"),
            Self::Static { alpha, beta } => write!(f, "alpha={alpha} beta={beta}"),
        }
    }
}

impl SweepSetting {
    /// The run configuration for this cell. Static cells keep a static
    /// schedule choice from `base` (default `static-c`).
    pub fn apply(&self, base: &RunConfig) -> RunConfig {
        let mut cfg = base.clone();
        match *self {
            Self::Dynamic => cfg.schedule = ScheduleChoice::Dynamic,
            Self::Static { alpha, beta } => {
                if cfg.schedule == ScheduleChoice::Dynamic {
                    cfg.schedule = ScheduleChoice::StaticConvex;
                }
                cfg.alpha_bar = vec![alpha];
                cfg.beta_bar = vec![beta];
            }
        }
        cfg
    }

    fn slug(&self) -> String {
        match self {
            Self::Dynamic => "dynamic".into(),
            Self::Static { alpha, beta } => format!("a{alpha}_b{beta}"),
        }
    }
}

/// Parses a comma-separated grid such as `0,0.2,0.4,0.2/0.4,dynamic`.
pub fn parse_grid(s: &str) -> Result<Vec<SweepSetting>> {
    s.split(',')
        .filter(|p| !p.trim().is_empty())
        .map(|p| p.parse().map_err(Error::InvalidConfig))
        .collect()
}

#[derive(Debug)]
pub struct SweepCell {
    pub setting: SweepSetting,
    pub solution: Result<Solution>,
    pub seconds: f64,
}

/// Runs every grid cell (at most `base.jobs` concurrently) from the
/// problem's seeded starting point; results come back in grid order.
pub fn run_sweep(
    problem: &dyn Problem,
    base: &RunConfig,
    grid: &[SweepSetting],
) -> Result<Vec<SweepCell>> {
    base.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(base.jobs)
        .build()
        .map_err(|e| Error::InvalidConfig(e.to_string()))?;
    Ok(pool.install(|| {
        grid.par_iter()
            .map(|setting| {
                let start = Instant::now();
                let solution = run(problem, &setting.apply(base));
                SweepCell {
                    setting: *setting,
                    solution,
                    seconds: start.elapsed().as_secs_f64(),
                }
            })
            .collect()
    }))
}

/// `F` at each checkpoint, `None` when the run stopped before it.
pub fn checkpoint_values(trace: &SolverTrace, checkpoints: &[usize]) -> Vec<Option<f64>> {
    checkpoints.iter().map(|&k| trace.objective_at(k)).collect()
}

/// Writes `setting,K=…,time_s`; absent values are `NA`.
pub fn write_checkpoint_table<W: Write>(
    mut w: W,
    checkpoints: &[usize],
    rows: &[(String, Vec<Option<f64>>, f64)],
) -> std::io::Result<()> {
    let mut header = vec!["setting".to_string()];
    header.extend(checkpoints.iter().map(|k| format!("K={k}")));
    header.push("time_s".into());
    writeln!(w, "{}", header.join(","))?;
    for (label, values, secs) in rows {
        let mut fields = vec![label.clone()];
        fields.extend(
            values
                .iter()
                .map(|v| v.map(fmt_num).unwrap_or_else(|| "NA".into())),
        );
        fields.push(format!("{secs:.3}"));
        writeln!(w, "{}", fields.join(","))?;
    }
    Ok(())
}

#[derive(Parser, Debug)]
#[command(
    name = "ipalm",
    version,
    about = "Inertial proximal alternating linearized minimization: problem runs, sweeps and checks"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Sparse nonnegative matrix factorization.
    Nmf {
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten)]
        problem: NmfArgs,
    },
    /// Blind image deconvolution.
    Bid {
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten)]
        problem: BidArgs,
    },
    /// Convolutional LASSO dictionary learning.
    Convlasso {
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten)]
        problem: ConvLassoArgs,
    },
    /// Objective values at checkpoints for a grid of inertial settings.
    Sweep {
        /// Comma-separated settings: `a` (alpha = beta = a), `a/b`, or `dynamic`.
        #[arg(long, default_value = "0,0.2,0.4,dynamic")]
        grid: String,
        #[command(flatten)]
        run: RunArgs,
        #[command(subcommand)]
        problem: SweepProblem,
    },
    /// Numerical checks of the inequalities behind the method.
    Verify {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Directory for one report CSV per check.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        #[arg(long, default_value_t = 10_000)]
        points: usize,
    },
    /// Synthetic instances with known ground truth.
    Synth {
        #[command(subcommand)]
        kind: SynthKind,
    },
}

#[derive(Subcommand, Debug)]
pub enum SweepProblem {
    Nmf(NmfArgs),
    Bid(BidArgs),
    Convlasso(ConvLassoArgs),
}

#[derive(Subcommand, Debug)]
pub enum SynthKind {
    /// `A = B₀C₀` with sparse `B₀`; writes A.csv, B_true.csv, C_true.csv.
    Nmf {
        #[arg(long, default_value_t = 20)]
        m: usize,
        #[arg(long, default_value_t = 30)]
        n: usize,
        #[arg(long, default_value_t = 3)]
        rank: usize,
        #[arg(long, default_value_t = 2)]
        s: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Blurred piecewise-constant image; writes f, u_true, kernel_true as CSV and PGM.
    Bid {
        #[arg(long, default_value_t = 64)]
        size: usize,
        #[arg(long, default_value_t = 7)]
        kernel_size: usize,
        #[arg(long, default_value_t = 0.8)]
        blur_sigma: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Solver flags shared by the problem subcommands. Values given here
/// override the `--config` file, which overrides the defaults.
#[derive(Args, Debug, Clone, Default)]
pub struct RunArgs {
    /// key=value configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// static-nc, static-c or dynamic [default: static-c].
    #[arg(long)]
    pub schedule: Option<ScheduleChoice>,
    /// Static alpha, one value or one per block [default: 0].
    #[arg(long, value_delimiter = ',')]
    pub alpha_bar: Option<Vec<f64>>,
    /// Static beta, one value or one per block [default: 0].
    #[arg(long, value_delimiter = ',')]
    pub beta_bar: Option<Vec<f64>>,
    /// Descent margin epsilon [default: 0].
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Iteration budget [default: 1000].
    #[arg(long)]
    pub iters: Option<usize>,
    /// Relative step-norm tolerance; `0` disables, `inf` runs one iteration [default: 1e-9].
    #[arg(long)]
    pub tol: Option<f64>,
    /// Data and initialization seed [default: 0].
    #[arg(long)]
    pub seed: Option<u64>,
    /// Estimate Lipschitz moduli by backtracking on every block.
    #[arg(long, conflicts_with = "exact_lipschitz")]
    pub backtrack: bool,
    /// Require exact Lipschitz moduli.
    #[arg(long)]
    pub exact_lipschitz: bool,
    /// Multiplier on the second block's step parameter.
    #[arg(long)]
    pub kernel_step_scale: Option<f64>,
    /// Per-block Lipschitz bounds; fixes the Lyapunov weights from them.
    #[arg(long, value_delimiter = ',')]
    pub lambda_plus: Option<Vec<f64>>,
    /// Checkpoint iterations [default: 100,500,1000,5000].
    #[arg(long, value_delimiter = ',')]
    pub checkpoints: Option<Vec<usize>>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Concurrent sweep cells [default: 1].
    #[arg(long)]
    pub jobs: Option<usize>,
}

impl RunArgs {
    pub fn to_config(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => load_config(p)?,
            None => RunConfig::default(),
        };
        if let Some(v) = self.schedule {
            cfg.schedule = v;
        }
        if let Some(v) = &self.alpha_bar {
            cfg.alpha_bar = v.clone();
        }
        if let Some(v) = &self.beta_bar {
            cfg.beta_bar = v.clone();
        }
        if let Some(v) = self.epsilon {
            cfg.epsilon = v;
        }
        if let Some(v) = self.iters {
            cfg.iters = v;
        }
        if let Some(v) = self.tol {
            cfg.tol = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if self.backtrack {
            cfg.lipschitz = LipschitzMode::Backtrack;
        }
        if self.exact_lipschitz {
            cfg.lipschitz = LipschitzMode::Exact;
        }
        if let Some(c) = self.kernel_step_scale {
            cfg.tau_scale = vec![1.0, c];
        }
        if let Some(v) = &self.lambda_plus {
            cfg.lambda_plus = v.clone();
        }
        if let Some(v) = &self.checkpoints {
            cfg.checkpoints = v.clone();
        }
        if let Some(v) = &self.out {
            cfg.out = Some(v.clone());
        }
        if let Some(v) = self.jobs {
            cfg.jobs = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args, Debug, Clone)]
pub struct NmfArgs {
    /// Nonnegative data matrix as headerless CSV.
    #[arg(long, conflicts_with = "orl")]
    pub data: Option<PathBuf>,
    /// Directory of same-size PGM face images (one column per image).
    #[arg(long)]
    pub orl: Option<PathBuf>,
    #[arg(long, default_value_t = 3)]
    pub rank: usize,
    /// Nonzeros per basis column.
    #[arg(long, conflicts_with = "s_percent")]
    pub s: Option<usize>,
    /// Nonzeros per basis column as a percentage of its length.
    #[arg(long)]
    pub s_percent: Option<f64>,
    /// Rows of the synthetic instance used when no data is given.
    #[arg(long, default_value_t = 20)]
    pub synth_m: usize,
    /// Columns of the synthetic instance used when no data is given.
    #[arg(long, default_value_t = 30)]
    pub synth_n: usize,
}

#[derive(Args, Debug, Clone)]
pub struct BidArgs {
    /// Observed image (PGM); a synthetic instance is used when absent.
    #[arg(long)]
    pub image: Option<PathBuf>,
    #[arg(long, default_value_t = 1e6)]
    pub lambda: f64,
    #[arg(long, default_value_t = 1e4)]
    pub theta: f64,
    /// Odd kernel side length.
    #[arg(long, default_value_t = 7)]
    pub kernel_size: usize,
    /// Synthetic image side length.
    #[arg(long, default_value_t = 64)]
    pub size: usize,
    /// Width of the synthetic Gaussian blur.
    #[arg(long, default_value_t = 0.8)]
    pub blur_sigma: f64,
}

#[derive(Args, Debug, Clone)]
pub struct ConvLassoArgs {
    /// Image (PGM); a synthetic texture is used when absent.
    #[arg(long)]
    pub image: Option<PathBuf>,
    /// Total filters including the fixed low-pass one.
    #[arg(long, default_value_t = 8)]
    pub filters: usize,
    /// Odd filter side length.
    #[arg(long, default_value_t = 5)]
    pub filter_size: usize,
    #[arg(long, default_value_t = 0.2)]
    pub lambda: f64,
    /// Synthetic image side length.
    #[arg(long, default_value_t = 32)]
    pub size: usize,
}

/// A constructed problem plus whatever the artifact writer needs.
pub enum Preset {
    Nmf {
        problem: NmfProblem,
        faces: Option<(usize, usize)>,
    },
    Bid {
        problem: BidProblem,
        truth: Option<synth::BidInstance>,
    },
    ConvLasso(ConvLassoProblem),
}

impl Preset {
    pub fn problem(&self) -> &dyn Problem {
        match self {
            Preset::Nmf { problem, .. } => problem,
            Preset::Bid { problem, .. } => problem,
            Preset::ConvLasso(p) => p,
        }
    }

    fn notes(&self) -> Vec<String> {
        match self {
            Preset::ConvLasso(p) => {
                let l1: f64 = p.image().iter().map(|v| v.abs()).sum();
                vec![format!(
                    "objective includes the constant lambda*||f||_1 = {}",
                    fmt_num(p.params().lambda * l1)
                )]
            }
            _ => Vec::new(),
        }
    }

    /// Writes problem-specific outputs for a final iterate.
    pub fn write_artifacts(&self, dir: &Path, x: &BlockVector) -> Result<()> {
        let mat = |i: usize| {
            x.block(i)
                .view()
                .into_dimensionality::<ndarray::Ix2>()
                .map_err(|e| Error::Shape(e.to_string()))
        };
        match self {
            Preset::Nmf { faces, .. } => {
                io::write_csv_matrix(&dir.join("B.csv"), mat(0)?)?;
                io::write_csv_matrix(&dir.join("C.csv"), mat(1)?)?;
                if let Some((h, w)) = faces {
                    io::dump_basis_images(&dir.join("basis"), mat(0)?, *h, *w)?;
                }
            }
            Preset::Bid { truth, .. } => {
                io::write_csv_matrix(&dir.join("u.csv"), mat(0)?)?;
                io::write_csv_matrix(&dir.join("kernel.csv"), mat(1)?)?;
                io::write_pgm(&dir.join("u.pgm"), mat(0)?)?;
                io::write_kernel_pgm(&dir.join("kernel.pgm"), mat(1)?)?;
                if let Some(t) = truth {
                    let err: f64 = (&mat(1)? - &t.kernel_true).mapv(f64::abs).sum();
                    std::fs::write(
                        dir.join("kernel_error.txt"),
                        format!("kernel_l1_error={}\n", fmt_num(err)),
                    )?;
                }
            }
            Preset::ConvLasso(p) => {
                let (d, v) = p.full_stacks(x)?;
                io::write_pgm(&dir.join("dictionary.pgm"), io::filter_mosaic(d.view()).view())?;
                io::write_sparsity_report(&dir.join("sparsity.csv"), v.view())?;
            }
        }
        Ok(())
    }
}

pub fn build_nmf(args: &NmfArgs, seed: u64) -> Result<Preset> {
    let (a, faces) = if let Some(path) = &args.data {
        (io::read_csv_matrix(path)?, None)
    } else if let Some(dir) = &args.orl {
        let set = io::load_face_dir(dir)?;
        (set.data, Some((set.height, set.width)))
    } else {
        let s = args.s.unwrap_or(2).min(args.synth_m);
        (
            synth::nmf_instance(args.synth_m, args.synth_n, args.rank, s, seed)?.a,
            None,
        )
    };
    let s = match (args.s, args.s_percent) {
        (Some(s), _) => s,
        (None, Some(p)) => NmfProblem::sparsity_from_percent(a.nrows(), p)?,
        (None, None) => 2.min(a.nrows()),
    };
    Ok(Preset::Nmf {
        problem: NmfProblem::new(a, args.rank, s)?,
        faces,
    })
}

pub fn build_bid(args: &BidArgs, cfg: &RunConfig) -> Result<Preset> {
    let (f, truth) = match &args.image {
        Some(p) => (io::read_pgm(p)?, None),
        None => {
            let inst = synth::bid_instance(args.size, args.kernel_size, args.blur_sigma, cfg.seed)?;
            (inst.f.clone(), Some(inst))
        }
    };
    let params = BidParams {
        lambda: args.lambda,
        theta: args.theta,
        kernel_shape: (args.kernel_size, args.kernel_size),
        kernel_step_scale: cfg.tau_scale.get(1).copied().unwrap_or(5.0),
    };
    Ok(Preset::Bid {
        problem: BidProblem::new(f, params)?,
        truth,
    })
}

pub fn build_convlasso(args: &ConvLassoArgs, seed: u64) -> Result<Preset> {
    let f = match &args.image {
        Some(p) => io::read_pgm(p)?,
        None => synth::texture_image(args.size, args.size, seed),
    };
    let params = ConvLassoParams {
        filters: args.filters,
        size: args.filter_size,
        lambda: args.lambda,
        sigma: None,
    };
    Ok(Preset::ConvLasso(ConvLassoProblem::new(f, params)?))
}

fn write_trace(path: &Path, trace: &SolverTrace) -> Result<()> {
    trace.write_csv(BufWriter::new(File::create(path)?))?;
    Ok(())
}

fn write_run_info(
    path: &Path,
    problem: &dyn Problem,
    cfg: &RunConfig,
    trace: &SolverTrace,
    notes: &[String],
) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    let list = |v: &[f64]| {
        v.iter()
            .map(|x| x.to_string())
            .collect::<Vec<_>>()
            .join(",")
    };
    writeln!(w, "problem={}", problem.name())?;
    writeln!(w, "schedule={}", cfg.schedule)?;
    writeln!(w, "alpha_bar={}", list(&cfg.alpha_bar))?;
    writeln!(w, "beta_bar={}", list(&cfg.beta_bar))?;
    writeln!(w, "epsilon={}", cfg.epsilon)?;
    writeln!(w, "iters_budget={}", cfg.iters)?;
    writeln!(w, "iters_run={}", trace.iterations())?;
    writeln!(w, "tol={}", cfg.tol)?;
    writeln!(w, "seed={}", cfg.seed)?;
    writeln!(w, "lipschitz={:?}", cfg.lipschitz)?;
    writeln!(w, "heuristic={}", trace.heuristic)?;
    if let Some(last) = trace.last() {
        writeln!(w, "final_F={}", fmt_num(last.objective))?;
        writeln!(w, "final_step_norm={}", fmt_num(last.step_norm))?;
    }
    if trace.heuristic {
        writeln!(
            w,
            "note=dynamic schedule: no convergence guarantee applies to this run"
        )?;
    }
    for n in notes {
        writeln!(w, "note={n}")?;
    }
    Ok(())
}

fn out_dir(cfg: &RunConfig) -> Result<PathBuf> {
    let dir = cfg.out.clone().unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn run_single(preset: &Preset, cfg: &RunConfig) -> Result<()> {
    let problem = preset.problem();
    let dir = out_dir(cfg)?;
    let start = Instant::now();
    let sol = match run(problem, cfg) {
        Ok(s) => s,
        Err(Error::Divergence { iteration, trace }) => {
            write_trace(&dir.join("trace.csv"), &trace)?;
            return Err(Error::Divergence { iteration, trace });
        }
        Err(e) => return Err(e),
    };
    let secs = start.elapsed().as_secs_f64();
    write_trace(&dir.join("trace.csv"), &sol.trace)?;
    write_run_info(
        &dir.join("run_info.txt"),
        problem,
        cfg,
        &sol.trace,
        &preset.notes(),
    )?;
    write_checkpoint_table(
        BufWriter::new(File::create(dir.join("checkpoints.csv"))?),
        &cfg.checkpoints,
        &[(
            format!("{}", cfg.schedule),
            checkpoint_values(&sol.trace, &cfg.checkpoints),
            secs,
        )],
    )?;
    preset.write_artifacts(&dir, &sol.x)?;
    let last = sol.trace.last().expect("trace has the initial row");
    println!(
        "{}: {} iterations, F = {}, step = {:e}, {:.2}s -> {}",
        problem.name(),
        sol.trace.iterations(),
        fmt_num(last.objective),
        last.step_norm,
        secs,
        dir.display()
    );
    Ok(())
}

fn run_sweep_cmd(preset: &Preset, cfg: &RunConfig, grid: &str) -> Result<()> {
    let grid = parse_grid(grid)?;
    let problem = preset.problem();
    let dir = out_dir(cfg)?;
    let cells = run_sweep(problem, cfg, &grid)?;
    let mut rows = Vec::new();
    for cell in &cells {
        let values = match &cell.solution {
            Ok(sol) => {
                write_trace(&dir.join(format!("trace_{}.csv", cell.setting.slug())), &sol.trace)?;
                checkpoint_values(&sol.trace, &cfg.checkpoints)
            }
            Err(e) => {
                eprintln!("{}: {e}", cell.setting);
                vec![None; cfg.checkpoints.len()]
            }
        };
        rows.push((cell.setting.to_string(), values, cell.seconds));
    }
    let path = dir.join("checkpoints.csv");
    write_checkpoint_table(BufWriter::new(File::create(&path)?), &cfg.checkpoints, &rows)?;
    write_checkpoint_table(std::io::stdout().lock(), &cfg.checkpoints, &rows)?;
    Ok(())
}

/// Outcome of [`run_verify_battery`].
pub struct Battery {
    pub reports: Vec<verify::Report>,
}

impl Battery {
    pub fn passed(&self) -> bool {
        self.reports.iter().all(|r| r.passed())
    }
}

/// The standalone battery: proximal inequality, step-rule identities,
/// descent along a synthetic NMF run and gradient checks for the three
/// bundled problems.
pub fn run_verify_battery(seed: u64, trials: usize, points: usize) -> Result<Battery> {
    let mut reports = vec![
        verify::check_prox_inequality(trials, seed)?,
        verify::check_lemma_gh(points, seed)?,
    ];

    let inst = synth::nmf_instance(20, 30, 3, 2, seed)?;
    let nmf = NmfProblem::new(inst.a, 3, 2)?;
    let eps = 0.05;
    let mut cfg = RunConfig {
        schedule: ScheduleChoice::StaticNonconvex,
        epsilon: eps,
        iters: 500,
        tol: 0.0,
        seed,
        ..Default::default()
    }
    .with_inertia(0.2);
    let trace = calibrated_run(&nmf, &mut cfg)?.trace;
    let rho1 = verify::rho1_from_trace(&trace, eps).unwrap_or(0.0);
    reports.push(verify::check_c1_descent(&trace, rho1)?);

    let nmf_x = nmf.initial_point(seed)?;
    reports.push(verify::check_gradients(&nmf, &nmf_x, 20, seed)?);

    let bid_inst = synth::bid_instance(16, 5, 0.8, seed)?;
    let bid = BidProblem::new(
        bid_inst.f.clone(),
        BidParams {
            lambda: 1e3,
            theta: 1e2,
            kernel_shape: (5, 5),
            kernel_step_scale: 5.0,
        },
    )?;
    let bid_x = BlockVector::new(vec![
        bid_inst.u_true.into_dyn(),
        bid.default_init().block(1).clone(),
    ]);
    reports.push(verify::check_gradients(&bid, &bid_x, 20, seed)?);

    let cl = ConvLassoProblem::new(
        synth::texture_image(12, 12, seed),
        ConvLassoParams {
            filters: 4,
            size: 3,
            lambda: 0.1,
            sigma: None,
        },
    )?;
    let mut cl_x = cl.random_init(seed);
    let v_shape = cl_x.block(1).raw_dim();
    let v = ndarray::ArrayD::from_shape_fn(v_shape, |idx| {
        ((idx[0] * 7 + idx[1] * 3 + idx[2]) as f64 * 0.37).sin()
    });
    cl_x.set_block(1, v)?;
    reports.push(verify::check_gradients(&cl, &cl_x, 20, seed)?);
    Ok(Battery { reports })
}

/// Runs with `λ⁺` fixed from the moduli seen in an unbounded pilot run,
/// enlarging the bounds by 25% whenever the run meets a larger modulus.
pub fn calibrated_run(problem: &dyn Problem, cfg: &mut RunConfig) -> Result<Solution> {
    let pilot = run(problem, cfg)?;
    let nb = problem.num_blocks();
    cfg.lambda_plus = (0..nb)
        .map(|i| {
            pilot
                .trace
                .rows
                .iter()
                .skip(1)
                .map(|r| r.params[i].lipschitz)
                .fold(f64::MIN_POSITIVE, f64::max)
        })
        .collect();
    for _ in 0..100 {
        match run(problem, cfg) {
            Err(Error::ParameterDomain(msg)) if msg.contains("lambda_plus") => {
                cfg.lambda_plus.iter_mut().for_each(|l| *l *= 1.25);
            }
            other => return other,
        }
    }
    Err(Error::Estimation {
        message: "could not find Lipschitz bounds covering the run".into(),
        gap: f64::NAN,
    })
}

fn run_synth(kind: &SynthKind) -> Result<()> {
    match kind {
        SynthKind::Nmf {
            m,
            n,
            rank,
            s,
            seed,
            out,
        } => {
            std::fs::create_dir_all(out)?;
            let inst = synth::nmf_instance(*m, *n, *rank, *s, *seed)?;
            io::write_csv_matrix(&out.join("A.csv"), inst.a.view())?;
            io::write_csv_matrix(&out.join("B_true.csv"), inst.b_true.view())?;
            io::write_csv_matrix(&out.join("C_true.csv"), inst.c_true.view())?;
        }
        SynthKind::Bid {
            size,
            kernel_size,
            blur_sigma,
            seed,
            out,
        } => {
            std::fs::create_dir_all(out)?;
            let inst = synth::bid_instance(*size, *kernel_size, *blur_sigma, *seed)?;
            for (name, m) in [
                ("f", &inst.f),
                ("u_true", &inst.u_true),
            ] {
                io::write_csv_matrix(&out.join(format!("{name}.csv")), m.view())?;
                io::write_pgm(&out.join(format!("{name}.pgm")), m.view())?;
            }
            io::write_csv_matrix(&out.join("kernel_true.csv"), inst.kernel_true.view())?;
            io::write_kernel_pgm(&out.join("kernel_true.pgm"), inst.kernel_true.view())?;
        }
    }
    Ok(())
}

fn dispatch(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Nmf { run, problem } => {
            let cfg = run.to_config()?;
            run_single(&build_nmf(&problem, cfg.seed)?, &cfg)?;
        }
        Command::Bid { run, problem } => {
            let cfg = run.to_config()?;
            run_single(&build_bid(&problem, &cfg)?, &cfg)?;
        }
        Command::Convlasso { run, problem } => {
            let cfg = run.to_config()?;
            run_single(&build_convlasso(&problem, cfg.seed)?, &cfg)?;
        }
        Command::Sweep { grid, run, problem } => {
            let cfg = run.to_config()?;
            let preset = match &problem {
                SweepProblem::Nmf(a) => build_nmf(a, cfg.seed)?,
                SweepProblem::Bid(a) => build_bid(a, &cfg)?,
                SweepProblem::Convlasso(a) => build_convlasso(a, cfg.seed)?,
            };
            run_sweep_cmd(&preset, &cfg, &grid)?;
        }
        Command::Verify {
            seed,
            out,
            trials,
            points,
        } => {
            let battery = run_verify_battery(seed, trials, points)?;
            for r in &battery.reports {
                if let Some(dir) = &out {
                    r.save(dir)?;
                }
                let failures = r.failures().count();
                println!(
                    "{:<24} {} ({} rows, {failures} failures)",
                    r.check,
                    if failures == 0 { "PASS" } else { "FAIL" },
                    r.rows.len()
                );
            }
            return Ok(if battery.passed() { 0 } else { 1 });
        }
        Command::Synth { kind } => run_synth(&kind)?,
    }
    Ok(0)
}

/// Parses `args` and runs the command. Returns the process exit status.
pub fn cli_main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_parsing() {
        let g = parse_grid("0,0.2/0.4,dynamic").unwrap();
        assert_eq!(
            g,
            vec![
                SweepSetting::Static {
                    alpha: 0.0,
                    beta: 0.0
                },
                SweepSetting::Static {
                    alpha: 0.2,
                    beta: 0.4
                },
                SweepSetting::Dynamic
            ]
        );
        assert!(parse_grid("0,fast").is_err());
    }

    #[test]
    fn checkpoint_table_marks_absent() {
        let mut out = Vec::new();
        write_checkpoint_table(&mut out, &[1, 10], &[("x".into(), vec![Some(1.5), None], 0.25)])
            .unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(
            text,
            "setting,K=1,K=10,time_s\nx,1.5000000000000000e0,NA,0.250\n"
        );
    }

    #[test]
    fn cli_overrides_config() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("run.cfg");
        std::fs::write(&p, "epsilon=0.05\niters=7\n").unwrap();
        let args = RunArgs {
            config: Some(p),
            iters: Some(9),
            ..Default::default()
        };
        let cfg = args.to_config().unwrap();
        assert_eq!(cfg.epsilon, 0.05);
        assert_eq!(cfg.iters, 9);
    }
}
