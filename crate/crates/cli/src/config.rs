//! `key=value` run configuration with per-experiment defaults.

use std::fmt;
use std::str::FromStr;

use serre_dg::mesh::Topology;
use serre_dg::quadrature::MAX_DEGREE;

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    /// One traveling-wave run with a diagnostics time series and final errors.
    Run,
    /// Error table and observed rates over a grid of degrees and meshes.
    Converge,
    /// Per-step mass, momentum and energy changes with a fixed step.
    Conserve,
    /// Gaussian hump snapshots.
    Gaussian,
    /// Summation-by-parts residuals of the reference operators.
    SbpCheck,
    /// Boundary-condition admissibility for the given background state.
    ValidateBc,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Run => "run",
            Experiment::Converge => "converge",
            Experiment::Conserve => "conserve",
            Experiment::Gaussian => "gaussian",
            Experiment::SbpCheck => "sbp-check",
            Experiment::ValidateBc => "validate-bc",
        }
    }
}

impl FromStr for Experiment {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s {
            "run" => Experiment::Run,
            "converge" => Experiment::Converge,
            "conserve" => Experiment::Conserve,
            "gaussian" => Experiment::Gaussian,
            "sbp-check" => Experiment::SbpCheck,
            "validate-bc" => Experiment::ValidateBc,
            _ => {
                return Err(format!(
                    "unknown experiment '{s}' (expected run, converge, conserve, gaussian, sbp-check or validate-bc)"
                ))
            }
        })
    }
}

/// Time step given directly or through the CFL rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Step {
    Fixed(f64),
    Cfl(f64),
}

/// Keys recognized in config files and `--set`.
pub const KEYS: &[&str] = &[
    "experiment", "g", "H", "U", "c", "x_L", "x_R", "N", "P", "mode", "alpha", "alpha_h", "alpha_u", "T", "dt",
    "CFL", "bc_alpha", "bc_beta", "out",
];

/// Unresolved settings: whatever was given, in order of appearance.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawConfig {
    entries: Vec<(String, String)>,
}

impl RawConfig {
    /// Parse `key=value` lines. Blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut raw = Self::default();
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            raw.set_line(line).map_err(|e| match e {
                CliError::Config(msg) => CliError::Config(format!("line {}: {msg}", i + 1)),
                other => other,
            })?;
        }
        Ok(raw)
    }

    /// Apply one `key=value` assignment; later assignments win.
    pub fn set_line(&mut self, line: &str) -> Result<(), CliError> {
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("expected key=value, got '{line}'")))?;
        self.set(key.trim(), value.trim())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        if !KEYS.contains(&key) {
            return Err(CliError::Config(format!("unknown key '{key}'")));
        }
        self.entries.retain(|(k, _)| k != key);
        self.entries.push((key.to_string(), value.to_string()));
        Ok(())
    }

    fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    fn parse_value<T: FromStr>(&self, key: &str) -> Result<Option<T>, CliError> {
        self.get(key)
            .map(|v| {
                v.parse::<T>()
                    .map_err(|_| CliError::Config(format!("key '{key}': cannot parse '{v}'")))
            })
            .transpose()
    }

    fn parse_list(&self, key: &str) -> Result<Option<Vec<i64>>, CliError> {
        self.get(key)
            .map(|v| {
                v.split(',')
                    .map(|s| {
                        s.trim()
                            .parse::<i64>()
                            .map_err(|_| CliError::Config(format!("key '{key}': cannot parse '{}'", s.trim())))
                    })
                    .collect()
            })
            .transpose()
    }
}

/// Fully resolved and validated configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub experiment: Experiment,
    pub gravity: f64,
    pub depth: f64,
    pub velocity: f64,
    pub speed: f64,
    /// `None` means the experiment's natural domain.
    pub domain: Option<(f64, f64)>,
    pub elements: Vec<usize>,
    pub degrees: Vec<usize>,
    pub topology: Topology,
    pub alpha_h: f64,
    pub alpha_u: f64,
    pub final_time: f64,
    pub step: Step,
    pub bc_alpha: f64,
    pub bc_beta: f64,
    pub out: String,
}

/// Parse and resolve a config text that names its experiment.
pub fn parse_config(text: &str) -> Result<RunConfig, CliError> {
    RunConfig::resolve(&RawConfig::parse(text)?)
}

fn err<T>(msg: String) -> Result<T, CliError> {
    Err(CliError::Config(msg))
}

impl RunConfig {
    pub fn resolve(raw: &RawConfig) -> Result<Self, CliError> {
        let experiment = match raw.get("experiment") {
            Some(v) => v.parse::<Experiment>().map_err(|e| CliError::Config(format!("key 'experiment': {e}")))?,
            None => return err("no experiment selected (set 'experiment' or pass --experiment)".into()),
        };
        let gaussian = experiment == Experiment::Gaussian;
        let converge = experiment == Experiment::Converge;

        let positive = |key: &str, default: f64| -> Result<f64, CliError> {
            let v = raw.parse_value::<f64>(key)?.unwrap_or(default);
            if !(v.is_finite() && v > 0.0) {
                return err(format!("key '{key}': must be positive, got {v}"));
            }
            Ok(v)
        };
        let finite = |key: &str, default: f64| -> Result<f64, CliError> {
            let v = raw.parse_value::<f64>(key)?.unwrap_or(default);
            if !v.is_finite() {
                return err(format!("key '{key}': must be finite, got {v}"));
            }
            Ok(v)
        };
        let nonneg = |key: &str, default: f64| -> Result<f64, CliError> {
            let v = raw.parse_value::<f64>(key)?.unwrap_or(default);
            if !(v.is_finite() && v >= 0.0) {
                return err(format!("key '{key}': must be nonnegative, got {v}"));
            }
            Ok(v)
        };

        let gravity = positive("g", 9.8)?;
        let depth = positive("H", 1.0)?;
        let velocity = finite("U", if gaussian { 0.2 } else { 0.0 })?;
        let speed = finite("c", 0.5)?;

        let topology = match raw.get("mode") {
            None | Some("periodic") => Topology::Periodic,
            Some("bounded") => Topology::Bounded,
            Some(v) => return err(format!("key 'mode': expected periodic or bounded, got '{v}'")),
        };
        if gaussian && topology == Topology::Bounded {
            return err("key 'mode': the gaussian experiment is periodic only".into());
        }
        if topology == Topology::Bounded && velocity < 0.0 {
            return err(format!("key 'U': bounded domains need U >= 0, got {velocity}"));
        }

        let domain = match (raw.parse_value::<f64>("x_L")?, raw.parse_value::<f64>("x_R")?) {
            (None, None) => None,
            (a, b) => {
                let (a, b) = (a.unwrap_or(0.0), b.unwrap_or(1.0));
                if !(a.is_finite() && b.is_finite() && b > a) {
                    return err(format!("keys 'x_L', 'x_R': need x_L < x_R, got [{a}, {b}]"));
                }
                Some((a, b))
            }
        };

        let (def_n, def_p): (&[i64], &[i64]) = match experiment {
            Experiment::Converge => (&[10, 20, 40, 80], &[1, 2, 3, 4]),
            Experiment::Gaussian => (&[16], &[8]),
            Experiment::SbpCheck => (&[1], &[1, 2, 3, 4, 5, 6, 7, 8]),
            _ => (&[20], &[4]),
        };
        let elements = raw.parse_list("N")?.unwrap_or_else(|| def_n.to_vec());
        let degrees = raw.parse_list("P")?.unwrap_or_else(|| def_p.to_vec());
        if elements.iter().any(|&n| n < 1) {
            return err(format!("key 'N': element counts must be >= 1, got {elements:?}"));
        }
        if degrees.iter().any(|&p| p < 1 || p > MAX_DEGREE as i64) {
            return err(format!("key 'P': degrees must lie in 1..={MAX_DEGREE}, got {degrees:?}"));
        }
        let lists_ok = converge || experiment == Experiment::SbpCheck;
        if !lists_ok && (elements.len() != 1 || degrees.len() != 1) {
            return err(format!("keys 'N', 'P': {} takes a single value each", experiment.name()));
        }
        if converge && elements.len() < 2 {
            return err("key 'N': a convergence study needs at least two element counts".into());
        }

        let alpha = nonneg("alpha", 1.0)?;
        let alpha_h = nonneg("alpha_h", alpha)?;
        let alpha_u = nonneg("alpha_u", alpha)?;

        let default_t = match experiment {
            Experiment::Conserve => 1.0,
            Experiment::Gaussian => 6.0,
            _ => 0.1,
        };
        let final_time = nonneg("T", default_t)?;
        let step = match (raw.get("dt"), raw.get("CFL")) {
            (Some(_), Some(_)) => return err("keys 'dt', 'CFL': give one or the other".into()),
            (Some(_), None) => Step::Fixed(positive("dt", 0.0)?),
            (None, Some(_)) => Step::Cfl(positive("CFL", 0.0)?),
            (None, None) if experiment == Experiment::Conserve => Step::Fixed(1e-3),
            (None, None) => Step::Cfl(0.1),
        };

        let bc_alpha = finite("bc_alpha", 1.0)?;
        let bc_beta = finite("bc_beta", 1.0)?;
        let out = raw.get("out").unwrap_or("out").to_string();

        if matches!(experiment, Experiment::Run | Experiment::Converge | Experiment::Conserve) {
            let rel = speed - velocity;
            let cg = (gravity * depth).sqrt();
            if !(rel > 0.0 && rel < cg) {
                return err(format!("key 'c': must lie in ({velocity}, {}), got {speed}", velocity + cg));
            }
        }

        Ok(Self {
            experiment,
            gravity,
            depth,
            velocity,
            speed,
            domain,
            elements: elements.into_iter().map(|n| n as usize).collect(),
            degrees: degrees.into_iter().map(|p| p as usize).collect(),
            topology,
            alpha_h,
            alpha_u,
            final_time,
            step,
            bc_alpha,
            bc_beta,
            out,
        })
    }
}

fn join<T: fmt::Display>(v: &[T]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

impl fmt::Display for RunConfig {
    /// One-line manifest of every resolved value.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mode = match self.topology {
            Topology::Periodic => "periodic",
            Topology::Bounded => "bounded",
        };
        let domain = match self.domain {
            Some((a, b)) => format!("x_L={a:e} x_R={b:e}"),
            None => "x_L=auto x_R=auto".into(),
        };
        let step = match self.step {
            Step::Fixed(dt) => format!("dt={dt:e}"),
            Step::Cfl(c) => format!("CFL={c:e}"),
        };
        write!(
            f,
            "manifest experiment={} g={:e} H={:e} U={:e} c={:e} {domain} N={} P={} mode={mode} \
             alpha_h={:e} alpha_u={:e} T={:e} {step} bc_alpha={:e} bc_beta={:e} out={}",
            self.experiment.name(),
            self.gravity,
            self.depth,
            self.velocity,
            self.speed,
            join(&self.elements),
            join(&self.degrees),
            self.alpha_h,
            self.alpha_u,
            self.final_time,
            self.bc_alpha,
            self.bc_beta,
            self.out,
        )
    }
}
