//! Experiment dispatch and artifact writing.

use std::fs;
use std::path::{Path, PathBuf};

use serre_dg::diagnostics::{ConvergenceReport, DiagnosticsRecord, ErrorRow, Rate};
use serre_dg::experiments::{gaussian_snapshots_with, run_wave, GaussianCase, WaveCase};
use serre_dg::mesh::Topology;
use serre_dg::model::{check_case1, flow_verdict, FlowCoefficients, PhysicalParams};
use serre_dg::operators::{build_reference_operators, sbp_identity_check, to_physical, DerivativeOrder};
use serre_dg::scheme::PenaltySet;
use serre_dg::timeloop::TimeConfig;
use serre_dg::SolverError;

use crate::config::{Experiment, RunConfig, Step};
use crate::error::CliError;
use crate::output::{fmt_f64, CsvWriter};

pub const TIMESERIES_HEADER: &[&str] = &["t", "mass", "momentum", "energy", "d_mass", "d_momentum", "d_energy"];
pub const ERRORS_HEADER: &[&str] = &["P", "N", "dx", "err_h", "err_u"];
pub const RATES_HEADER: &[&str] = &["P", "rate_h", "rate_u"];
pub const SNAPSHOT_HEADER: &[&str] = &["x", "h", "u"];
pub const SNAPSHOT_TIMES: &[f64] = &[0.0, 1.0, 6.0];

/// Create the output directory, write `manifest.txt` and run the experiment.
/// Returns the manifest line.
pub fn run_experiment(cfg: &RunConfig) -> Result<String, CliError> {
    let dir = PathBuf::from(&cfg.out);
    fs::create_dir_all(&dir).map_err(|source| CliError::Io {
        path: dir.clone(),
        source,
    })?;
    let manifest = cfg.to_string();
    let path = dir.join("manifest.txt");
    fs::write(&path, format!("{manifest}\n")).map_err(|source| CliError::Io { path, source })?;
    match cfg.experiment {
        Experiment::Run => run(cfg, &dir, true)?,
        Experiment::Conserve => {
            if cfg.topology != Topology::Periodic {
                return Err(CliError::Config("key 'mode': conserve needs a periodic domain".into()));
            }
            run(cfg, &dir, false)?
        }
        Experiment::Converge => converge(cfg, &dir)?,
        Experiment::Gaussian => gaussian(cfg, &dir)?,
        Experiment::SbpCheck => sbp_check(cfg, &dir)?,
        Experiment::ValidateBc => validate_bc(cfg, &dir)?,
    }
    Ok(manifest)
}

fn params(cfg: &RunConfig) -> Result<PhysicalParams, CliError> {
    Ok(PhysicalParams::new(cfg.gravity, cfg.depth, cfg.velocity)?)
}

fn wave_case(cfg: &RunConfig, n: usize, p: usize) -> Result<WaveCase, CliError> {
    let domain = match (cfg.domain, cfg.topology) {
        (Some(d), _) => Some(d),
        (None, Topology::Periodic) => None,
        (None, Topology::Bounded) => Some((0.0, 1.0)),
    };
    Ok(WaveCase {
        params: params(cfg)?,
        speed: cfg.speed,
        topology: cfg.topology,
        domain,
        n_elements: n,
        degree: p,
        penalties: PenaltySet::new(cfg.alpha_h, cfg.alpha_u)?,
    })
}

fn time_config(cfg: &RunConfig, dx: f64, p: usize) -> Result<TimeConfig, CliError> {
    Ok(match cfg.step {
        Step::Fixed(dt) => TimeConfig::new(cfg.final_time, dt)?,
        Step::Cfl(c) => TimeConfig::from_cfl(cfg.final_time, dx, p, c)?,
    })
}

fn element_width(case: &WaveCase) -> Result<f64, CliError> {
    let (a, b) = case.domain()?;
    Ok((b - a) / case.n_elements as f64)
}

fn record_row(r: &DiagnosticsRecord) -> Vec<String> {
    [r.t, r.mass, r.momentum, r.energy, r.d_mass, r.d_momentum, r.d_energy]
        .iter()
        .map(|&x| fmt_f64(x))
        .collect()
}

fn error_row(p: usize, row: &ErrorRow) -> Vec<String> {
    vec![
        p.to_string(),
        row.n_elements.to_string(),
        fmt_f64(row.dx),
        fmt_f64(row.err_h),
        fmt_f64(row.err_u),
    ]
}

fn fmt_rate(r: Rate) -> String {
    match r {
        Rate::Finite(x) => fmt_f64(x),
        Rate::Exact => "inf".into(),
    }
}

/// Flush the failure marker into `w` when `result` is a solver failure.
fn mark_failure<T>(w: &mut CsvWriter, result: Result<T, CliError>) -> Result<T, CliError> {
    if let Err(e) = &result {
        w.fail(&e.to_string())?;
    }
    result
}

/// Traveling-wave run; `timeseries.csv` always, `errors.csv` when `errors`.
fn run(cfg: &RunConfig, dir: &Path, errors: bool) -> Result<(), CliError> {
    let (n, p) = (cfg.elements[0], cfg.degrees[0]);
    let case = wave_case(cfg, n, p)?;
    let dx = element_width(&case)?;
    let time = time_config(cfg, dx, p)?;
    let mut ts = CsvWriter::create(dir.join("timeseries.csv"), TIMESERIES_HEADER)?;
    let mut io_error = None;
    let result = run_wave(&case, &time, |r| {
        if io_error.is_none() {
            io_error = ts.row(&record_row(r)).err();
        }
    });
    if let Some(e) = io_error {
        return Err(e);
    }
    let (err_h, err_u) = mark_failure(&mut ts, result.map_err(CliError::from))?;
    ts.flush()?;
    if errors {
        let mut w = CsvWriter::create(dir.join("errors.csv"), ERRORS_HEADER)?;
        w.row(&error_row(
            p,
            &ErrorRow {
                n_elements: n,
                dx,
                err_h,
                err_u,
            },
        ))?;
        w.flush()?;
    }
    Ok(())
}

fn converge(cfg: &RunConfig, dir: &Path) -> Result<(), CliError> {
    let mut errors = CsvWriter::create(dir.join("errors.csv"), ERRORS_HEADER)?;
    let mut rates = CsvWriter::create(dir.join("rates.csv"), RATES_HEADER)?;
    for &p in &cfg.degrees {
        let mut rows = Vec::with_capacity(cfg.elements.len());
        for &n in &cfg.elements {
            let cell = (|| -> Result<ErrorRow, CliError> {
                let case = wave_case(cfg, n, p)?;
                let dx = element_width(&case)?;
                let time = time_config(cfg, dx, p)?;
                let (err_h, err_u) = run_wave(&case, &time, |_| {})?;
                Ok(ErrorRow {
                    n_elements: n,
                    dx,
                    err_h,
                    err_u,
                })
            })();
            if cell.is_err() {
                rates.fail("incomplete sweep")?;
            }
            let row = mark_failure(&mut errors, cell)?;
            errors.row(&error_row(p, &row))?;
            errors.flush()?;
            rows.push(row);
        }
        let report = ConvergenceReport::new(rows)?;
        let (h, u) = report.finest();
        rates.row(&[p.to_string(), fmt_rate(h), fmt_rate(u)])?;
        rates.flush()?;
    }
    Ok(())
}

fn snapshot_name(t: f64) -> String {
    format!("snapshot_{t}.csv")
}

fn gaussian(cfg: &RunConfig, dir: &Path) -> Result<(), CliError> {
    let (n, p) = (cfg.elements[0], cfg.degrees[0]);
    let cfl = match cfg.step {
        Step::Cfl(c) => c,
        Step::Fixed(_) => return Err(CliError::Config("key 'dt': gaussian uses the CFL rule".into())),
    };
    let case = GaussianCase {
        params: params(cfg)?,
        domain: cfg.domain.unwrap_or((-5.0, 5.0)),
        n_elements: n,
        degree: p,
        penalties: PenaltySet::new(cfg.alpha_h, cfg.alpha_u)?,
        cfl,
    };
    let mut times: Vec<f64> = SNAPSHOT_TIMES.iter().copied().filter(|&t| t < cfg.final_time).collect();
    times.push(cfg.final_time);
    let mut io_error = None;
    let mut written = 0;
    let result = gaussian_snapshots_with(&case, &times, |s| {
        if io_error.is_some() {
            return;
        }
        let write = || -> Result<(), CliError> {
            let mut w = CsvWriter::create(dir.join(snapshot_name(s.t)), SNAPSHOT_HEADER)?;
            for i in 0..s.x.len() {
                w.row(&[fmt_f64(s.x[i]), fmt_f64(s.h[i]), fmt_f64(s.u[i])])?;
            }
            w.flush()
        };
        io_error = write().err();
        written += 1;
    });
    if let Some(e) = io_error {
        return Err(e);
    }
    if let Err(e) = result {
        if let Some(&t) = times.get(written) {
            CsvWriter::create(dir.join(snapshot_name(t)), SNAPSHOT_HEADER)?.fail(&e.to_string())?;
        }
        return Err(e.into());
    }
    Ok(())
}

fn sbp_check(cfg: &RunConfig, dir: &Path) -> Result<(), CliError> {
    let mut w = CsvWriter::create(
        dir.join("sbp.csv"),
        &["P", "sbp_defect", "first_residual", "second_residual", "third_residual"],
    )?;
    for &p in &cfg.degrees {
        let reference = build_reference_operators(p)?;
        let (a, b) = cfg.domain.unwrap_or((-1.0, 1.0));
        let ops = to_physical(&reference, b - a)?;
        let xs: Vec<f64> = reference.rule().nodes().iter().map(|&r| a + (r + 1.0) * (b - a) / 2.0).collect();
        let u: Vec<f64> = xs.iter().map(|x| (2.3 * x + 0.4).sin()).collect();
        let v: Vec<f64> = xs.iter().map(|x| (1.7 * x).cos() * (0.3 * x).exp()).collect();
        let mut row = vec![p.to_string(), fmt_f64(reference.sbp_defect())];
        for order in [DerivativeOrder::First, DerivativeOrder::Second, DerivativeOrder::Third] {
            row.push(fmt_f64(sbp_identity_check(&ops, &u, &v, order)?));
        }
        w.row(&row)?;
    }
    w.flush()
}

fn validate_bc(cfg: &RunConfig, dir: &Path) -> Result<(), CliError> {
    let p = params(cfg)?;
    if p.velocity < 0.0 {
        return Err(CliError::Solver(SolverError::Config(
            "boundary conditions are provided for U >= 0 only".into(),
        )));
    }
    let mut w = CsvWriter::create(dir.join("bc.csv"), &["quantity", "value"])?;
    for (i, l) in p.eigenvalues().iter().enumerate() {
        w.row(&[format!("lambda_{}", i + 1), fmt_f64(*l)])?;
    }
    let valid = if p.velocity == 0.0 {
        w.row(&["bc_alpha".into(), fmt_f64(cfg.bc_alpha)])?;
        w.row(&["bc_beta".into(), fmt_f64(cfg.bc_beta)])?;
        check_case1(cfg.bc_alpha, cfg.bc_beta)
    } else {
        let coeffs = FlowCoefficients::standard(&p);
        let verdict = flow_verdict(&coeffs, &p);
        w.row(&["alpha_4".into(), fmt_f64(coeffs.alpha[2])])?;
        w.row(&["beta_4".into(), fmt_f64(coeffs.beta[2])])?;
        for (i, e) in verdict.outflow_eigenvalues.iter().enumerate() {
            w.row(&[format!("outflow_eigenvalue_{}", i + 1), fmt_f64(*e)])?;
        }
        w.row(&["inflow".into(), fmt_f64(verdict.inflow)])?;
        verdict.valid
    };
    w.row(&["valid".into(), valid.to_string()])?;
    w.flush()
}
