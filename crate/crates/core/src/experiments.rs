//! Reusable numerical experiments: traveling-wave runs, conservation
//! histories, convergence sweeps and the Gaussian hump.

use std::sync::Mutex;

use crate::diagnostics::{self, ConvergenceReport, DiagnosticsRecord, ErrorRow};
use crate::error::{config_err, Result};
use crate::mesh::{build_mesh, Topology};
use crate::model::{gaussian_ic, PhysicalParams, TravelingWave};
use crate::scheme::{PenaltySet, SemiDiscreteSystem};
use crate::timeloop::{integrate, TimeConfig};

pub const GRAVITY: f64 = 9.8;
pub const DEPTH: f64 = 1.0;
pub const WAVE_SPEED: f64 = 0.5;

/// Traveling-wave problem on a uniform mesh. The domain is one wavelength
/// `[0, 2 pi / omega]` when periodic unless overridden.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaveCase {
    pub params: PhysicalParams,
    pub speed: f64,
    pub topology: Topology,
    pub domain: Option<(f64, f64)>,
    pub n_elements: usize,
    pub degree: usize,
    pub penalties: PenaltySet,
}

impl WaveCase {
    /// Standard setup: `g = 9.8`, `H = 1`, `c = 0.5`, periodic on one
    /// wavelength or bounded on `[0, 1]`.
    pub fn standard(velocity: f64, topology: Topology, n_elements: usize, degree: usize, alpha: f64) -> Result<Self> {
        let domain = match topology {
            Topology::Periodic => None,
            Topology::Bounded => Some((0.0, 1.0)),
        };
        Ok(Self {
            params: PhysicalParams::new(GRAVITY, DEPTH, velocity)?,
            speed: WAVE_SPEED,
            topology,
            domain,
            n_elements,
            degree,
            penalties: PenaltySet::new(alpha, alpha)?,
        })
    }

    pub fn wave(&self) -> Result<TravelingWave> {
        TravelingWave::new(self.params, self.speed)
    }

    pub fn domain(&self) -> Result<(f64, f64)> {
        match self.domain {
            Some(d) => Ok(d),
            None => Ok((0.0, self.wave()?.wavelength())),
        }
    }

    /// Assembled system (with exact boundary data when bounded) and the
    /// initial perturbation state.
    pub fn setup(&self) -> Result<(SemiDiscreteSystem, TravelingWave, Vec<f64>)> {
        let wave = self.wave()?;
        let (a, b) = self.domain()?;
        let mesh = build_mesh(a, b, self.n_elements, self.degree)?;
        let mut sys = SemiDiscreteSystem::new(mesh, self.topology, self.params, self.penalties)?;
        if self.topology == Topology::Bounded {
            sys = sys.with_boundary_data(Box::new(wave))?;
        }
        let y = sys.sample(|x| wave.perturbation(x, 0.0));
        Ok((sys, wave, y))
    }
}

/// Integrate a traveling-wave case to `time.final_time()`, reporting each
/// diagnostics record as it is produced. Returns the `M`-norm errors at the
/// final time.
pub fn run_wave(
    case: &WaveCase,
    time: &TimeConfig,
    mut on_record: impl FnMut(&DiagnosticsRecord),
) -> Result<(f64, f64)> {
    let (sys, wave, mut y) = case.setup()?;
    let mut prev: Option<DiagnosticsRecord> = None;
    let t_end = integrate(&sys, &mut y, time, |_, t, y| {
        let r = diagnostics::record(&sys, y, t, prev.as_ref()).expect("state length is fixed");
        on_record(&r);
        prev = Some(r);
    })?;
    diagnostics::l2_error(&sys, &y, |x| wave.total(x, t_end))
}

/// Per-step conservation history of the periodic traveling wave.
pub fn conservation_history(case: &WaveCase, time: &TimeConfig) -> Result<Vec<DiagnosticsRecord>> {
    if case.topology != Topology::Periodic {
        return config_err("the conservation test needs a periodic domain");
    }
    let mut out = Vec::with_capacity(time.steps() + 1);
    run_wave(case, time, |r| out.push(*r))?;
    Ok(out)
}

/// Final-time errors of one convergence cell, time step from the CFL rule.
pub fn convergence_cell(case: &WaveCase, final_time: f64, cfl: f64) -> Result<ErrorRow> {
    let (a, b) = case.domain()?;
    let dx = (b - a) / case.n_elements as f64;
    let time = TimeConfig::from_cfl(final_time, dx, case.degree, cfl)?;
    let (err_h, err_u) = run_wave(case, &time, |_| {})?;
    Ok(ErrorRow {
        n_elements: case.n_elements,
        dx,
        err_h,
        err_u,
    })
}

/// One convergence report per degree, over the given element counts. The
/// `base` case supplies everything except `degree` and `n_elements`. Cells
/// run on up to `available_parallelism` threads.
pub fn convergence_sweep(
    base: &WaveCase,
    degrees: &[usize],
    element_counts: &[usize],
    final_time: f64,
    cfl: f64,
) -> Result<Vec<(usize, ConvergenceReport)>> {
    let cells: Vec<(usize, usize)> = degrees
        .iter()
        .flat_map(|&p| element_counts.iter().map(move |&n| (p, n)))
        .collect();
    let results: Vec<Mutex<Option<Result<ErrorRow>>>> = cells.iter().map(|_| Mutex::new(None)).collect();
    let next = Mutex::new(0usize);
    let threads = std::thread::available_parallelism().map_or(1, |n| n.get()).min(cells.len());
    std::thread::scope(|s| {
        for _ in 0..threads {
            s.spawn(|| loop {
                let i = {
                    let mut k = next.lock().unwrap();
                    let i = *k;
                    *k += 1;
                    i
                };
                let Some(&(p, n)) = cells.get(i) else { break };
                let case = WaveCase {
                    degree: p,
                    n_elements: n,
                    ..*base
                };
                *results[i].lock().unwrap() = Some(convergence_cell(&case, final_time, cfl));
            });
        }
    });
    let mut rows: Vec<ErrorRow> = Vec::with_capacity(cells.len());
    for r in results {
        rows.push(r.into_inner().unwrap().expect("every cell runs")?);
    }
    degrees
        .iter()
        .enumerate()
        .map(|(k, &p)| {
            let chunk = rows[k * element_counts.len()..(k + 1) * element_counts.len()].to_vec();
            Ok((p, ConvergenceReport::new(chunk)?))
        })
        .collect()
}

/// Nodal `h` and `u` at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub t: f64,
    pub x: Vec<f64>,
    pub h: Vec<f64>,
    pub u: Vec<f64>,
}

/// Gaussian hump on a periodic domain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianCase {
    pub params: PhysicalParams,
    pub domain: (f64, f64),
    pub n_elements: usize,
    pub degree: usize,
    pub penalties: PenaltySet,
    pub cfl: f64,
}

impl GaussianCase {
    /// `g = 9.8`, `H = 1`, `U = 0.2` on `[-5, 5]` with `CFL = 0.1`.
    pub fn standard(n_elements: usize, degree: usize, alpha: f64) -> Result<Self> {
        Ok(Self {
            params: PhysicalParams::new(GRAVITY, DEPTH, 0.2)?,
            domain: (-5.0, 5.0),
            n_elements,
            degree,
            penalties: PenaltySet::new(alpha, alpha)?,
            cfl: 0.1,
        })
    }
}

/// Snapshots at increasing `times` (the first may be 0). The problem is
/// autonomous, so each segment restarts the clock with the same nominal step
/// and lands exactly on its target time.
pub fn gaussian_snapshots(case: &GaussianCase, times: &[f64]) -> Result<Vec<Snapshot>> {
    let mut out = Vec::with_capacity(times.len());
    gaussian_snapshots_with(case, times, |s| out.push(s))?;
    Ok(out)
}

/// Like [`gaussian_snapshots`], handing each snapshot over as soon as it is
/// reached so earlier ones survive a later failure.
pub fn gaussian_snapshots_with(case: &GaussianCase, times: &[f64], mut on_snapshot: impl FnMut(Snapshot)) -> Result<()> {
    if times.windows(2).any(|w| w[1] < w[0]) || times.first().is_some_and(|&t| t < 0.0) {
        return config_err("snapshot times must be nonnegative and increasing");
    }
    let (a, b) = case.domain;
    let mesh = build_mesh(a, b, case.n_elements, case.degree)?;
    let dt = crate::timeloop::cfl_step(mesh.dx(), case.degree, case.cfl);
    let sys = SemiDiscreteSystem::new(mesh, Topology::Periodic, case.params, case.penalties)?;
    let n = sys.ndof();
    let mut y = sys.sample(gaussian_ic);
    let mut now = 0.0;
    for &t in times {
        if t > now {
            integrate(&sys, &mut y, &TimeConfig::new(t - now, dt)?, |_, _, _| {})?;
            now = t;
        }
        on_snapshot(Snapshot {
            t,
            x: sys.mesh().nodes().to_vec(),
            h: y[..n].to_vec(),
            u: y[n..].to_vec(),
        });
    }
    Ok(())
}
