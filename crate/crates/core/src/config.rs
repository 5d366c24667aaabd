//! Run configuration and its plain-text `key=value` file format.
//!
//! One assignment per line, `#` starts a comment, blank lines are ignored.
//! Unknown keys are rejected. List-valued keys take comma-separated values;
//! a single value applies to every block.
//!
//! | key | default | meaning |
//! |-----|---------|---------|
//! | `schedule` | `static-c` | `static-nc`, `static-c` or `dynamic` |
//! | `alpha_bar` | `0` | static α per block |
//! | `beta_bar` | `0` | static β per block |
//! | `epsilon` | `0` | descent margin ε |
//! | `iters` | `1000` | iteration budget |
//! | `tol` | `1e-9` | relative step-norm stopping tolerance; `0` disables, `inf` stops after one step |
//! | `seed` | `0` | initialization / data seed |
//! | `lipschitz` | `auto` | `auto`, `exact` or `backtrack` |
//! | `tau_scale` | `1` | per-block multiplier on τ |
//! | `kernel_step_scale` | `1` | shorthand for `tau_scale=1,<c>` |
//! | `lambda_plus` | unset | per-block Lipschitz bound; fixes δ from the bounds |
//! | `bt_initial`, `bt_growth`, `bt_shrink`, `bt_max_rounds` | `1, 2, 0.5, 60` | backtracking |
//! | `checkpoints` | `100,500,1000,5000` | iterations reported in checkpoint tables |
//! | `check_prox_inequality` | `false` | record the proximal-inequality slack per block |
//! | `out` | unset | output directory |
//! | `data` | unset | input data path |
//! | `jobs` | `1` | concurrent sweep cells |

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::lipschitz::BacktrackState;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScheduleChoice {
    /// Nonconvex step rule on every block.
    StaticNonconvex,
    /// Convex step rule on blocks whose prox is convex, nonconvex rule elsewhere.
    StaticConvex,
    Dynamic,
}

impl FromStr for ScheduleChoice {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "static-nc" => Ok(Self::StaticNonconvex),
            "static-c" => Ok(Self::StaticConvex),
            "dynamic" => Ok(Self::Dynamic),
            other => Err(format!(
                "unknown schedule '{other}' (expected static-nc, static-c or dynamic)"
            )),
        }
    }
}

impl fmt::Display for ScheduleChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::StaticNonconvex => "static-nc",
            Self::StaticConvex => "static-c",
            Self::Dynamic => "dynamic",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LipschitzMode {
    /// Exact moduli when the problem provides them, backtracking otherwise.
    Auto,
    Exact,
    Backtrack,
}

impl FromStr for LipschitzMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "auto" => Ok(Self::Auto),
            "exact" => Ok(Self::Exact),
            "backtrack" => Ok(Self::Backtrack),
            other => Err(format!(
                "unknown lipschitz mode '{other}' (expected auto, exact or backtrack)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub schedule: ScheduleChoice,
    pub alpha_bar: Vec<f64>,
    pub beta_bar: Vec<f64>,
    pub epsilon: f64,
    pub iters: usize,
    pub tol: f64,
    pub seed: u64,
    pub lipschitz: LipschitzMode,
    pub tau_scale: Vec<f64>,
    pub lambda_plus: Vec<f64>,
    pub backtrack: BacktrackState,
    pub checkpoints: Vec<usize>,
    pub check_prox_inequality: bool,
    pub out: Option<PathBuf>,
    pub data: Option<PathBuf>,
    pub jobs: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            schedule: ScheduleChoice::StaticConvex,
            alpha_bar: vec![0.0],
            beta_bar: vec![0.0],
            epsilon: 0.0,
            iters: 1000,
            tol: 1e-9,
            seed: 0,
            lipschitz: LipschitzMode::Auto,
            tau_scale: Vec::new(),
            lambda_plus: Vec::new(),
            backtrack: BacktrackState::default(),
            checkpoints: vec![100, 500, 1000, 5000],
            check_prox_inequality: false,
            out: None,
            data: None,
            jobs: 1,
        }
    }
}

impl RunConfig {
    /// Static schedule with the same `α = β = inertia` on every block.
    pub fn with_inertia(mut self, inertia: f64) -> Self {
        self.alpha_bar = vec![inertia];
        self.beta_bar = vec![inertia];
        self
    }

    /// Resolves a per-block list: empty means `default`, one value broadcasts.
    pub fn per_block(values: &[f64], blocks: usize, default: f64, key: &str) -> Result<Vec<f64>> {
        match values.len() {
            0 => Ok(vec![default; blocks]),
            1 => Ok(vec![values[0]; blocks]),
            n if n == blocks => Ok(values.to_vec()),
            n => Err(Error::InvalidConfig(format!(
                "{key} has {n} values but the problem has {blocks} blocks"
            ))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.iters == 0 {
            return Err(Error::InvalidConfig("iteration budget must be at least 1".into()));
        }
        if !(self.tol >= 0.0) {
            return Err(Error::InvalidConfig(format!("tol must be >= 0, got {}", self.tol)));
        }
        if self.tau_scale.iter().any(|&c| !(c >= 1.0)) {
            return Err(Error::InvalidConfig("tau_scale entries must be >= 1".into()));
        }
        if self.lambda_plus.iter().any(|&l| !(l > 0.0)) {
            return Err(Error::InvalidConfig("lambda_plus entries must be > 0".into()));
        }
        if self.jobs == 0 {
            return Err(Error::InvalidConfig("jobs must be at least 1".into()));
        }
        self.backtrack.validate()
    }

    /// Applies one `key=value` assignment.
    pub fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        match key {
            "schedule" => self.schedule = value.parse()?,
            "alpha_bar" => self.alpha_bar = parse_list(value)?,
            "beta_bar" => self.beta_bar = parse_list(value)?,
            "epsilon" => self.epsilon = parse_num(value)?,
            "iters" => self.iters = parse_num(value)?,
            "tol" => self.tol = parse_num(value)?,
            "seed" => self.seed = parse_num(value)?,
            "lipschitz" => self.lipschitz = value.parse()?,
            "tau_scale" => self.tau_scale = parse_list(value)?,
            "kernel_step_scale" => self.tau_scale = vec![1.0, parse_num(value)?],
            "lambda_plus" => self.lambda_plus = parse_list(value)?,
            "bt_initial" => self.backtrack.l_current = parse_num(value)?,
            "bt_growth" => self.backtrack.growth = parse_num(value)?,
            "bt_shrink" => self.backtrack.shrink = parse_num(value)?,
            "bt_max_rounds" => self.backtrack.max_rounds = parse_num(value)?,
            "checkpoints" => self.checkpoints = parse_list(value)?,
            "check_prox_inequality" => self.check_prox_inequality = parse_num(value)?,
            "out" => self.out = Some(PathBuf::from(value)),
            "data" => self.data = Some(PathBuf::from(value)),
            "jobs" => self.jobs = parse_num(value)?,
            other => return Err(format!("unknown key '{other}'")),
        }
        Ok(())
    }
}

fn parse_num<T: FromStr>(value: &str) -> std::result::Result<T, String> {
    value
        .trim()
        .parse()
        .map_err(|_| format!("cannot parse '{value}'"))
}

fn parse_list<T: FromStr>(value: &str) -> std::result::Result<Vec<T>, String> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(parse_num)
        .collect()
}

/// Parses a config file body on top of the defaults.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| Error::Config {
            line: line_no,
            message: format!("expected key=value, got '{line}'"),
        })?;
        cfg.set(key.trim(), value.trim())
            .map_err(|message| Error::Config {
                line: line_no,
                message,
            })?;
    }
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_config(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_is_default() {
        assert_eq!(parse_config("").unwrap(), RunConfig::default());
        assert_eq!(
            parse_config("# only a comment\n\n").unwrap(),
            RunConfig::default()
        );
    }

    #[test]
    fn parses_values() {
        let cfg = parse_config(
            "epsilon=0.05\nschedule = dynamic # trailing\nalpha_bar=0.2,0.4\ntol=inf\ncheckpoints=10,20\nkernel_step_scale=5\n",
        )
        .unwrap();
        assert_eq!(cfg.epsilon, 0.05);
        assert_eq!(cfg.schedule, ScheduleChoice::Dynamic);
        assert_eq!(cfg.alpha_bar, vec![0.2, 0.4]);
        assert!(cfg.tol.is_infinite());
        assert_eq!(cfg.checkpoints, vec![10, 20]);
        assert_eq!(cfg.tau_scale, vec![1.0, 5.0]);
    }

    #[test]
    fn malformed_line_names_line() {
        match parse_config("iters=10\nthis is wrong\n") {
            Err(Error::Config { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
        match parse_config("\nbogus=1\n") {
            Err(Error::Config { line, message }) => {
                assert_eq!(line, 2);
                assert!(message.contains("bogus"));
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            parse_config("iters=abc"),
            Err(Error::Config { line: 1, .. })
        ));
    }

    #[test]
    fn validation() {
        let cfg = RunConfig {
            iters: 0,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
        assert!(RunConfig::default().validate().is_ok());
        assert_eq!(
            RunConfig::per_block(&[0.3], 2, 0.0, "x").unwrap(),
            vec![0.3, 0.3]
        );
        assert!(RunConfig::per_block(&[0.3, 0.1, 0.2], 2, 0.0, "x").is_err());
    }
}
