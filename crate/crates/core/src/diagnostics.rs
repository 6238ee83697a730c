//! Conserved quantities, errors against exact solutions and convergence rates.

use crate::error::{check_len, config_err, Result};
use crate::scheme::SemiDiscreteSystem;

/// Discrete mass, momentum and energy at one time, with the change since the
/// previous record (zero for the first).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagnosticsRecord {
    pub t: f64,
    pub mass: f64,
    pub momentum: f64,
    pub energy: f64,
    pub d_mass: f64,
    pub d_momentum: f64,
    pub d_energy: f64,
}

impl DiagnosticsRecord {
    pub fn is_finite(&self) -> bool {
        [self.t, self.mass, self.momentum, self.energy, self.d_mass, self.d_momentum, self.d_energy]
            .iter()
            .all(|x| x.is_finite())
    }
}

/// Quantities of `y` at time `t`; deltas are taken against `previous`.
pub fn record(
    sys: &SemiDiscreteSystem,
    y: &[f64],
    t: f64,
    previous: Option<&DiagnosticsRecord>,
) -> Result<DiagnosticsRecord> {
    check_len(sys.state_len(), y.len())?;
    let (mass, momentum, energy) = (sys.mass(y), sys.momentum(y), sys.energy(y));
    let (d_mass, d_momentum, d_energy) = match previous {
        Some(p) => (mass - p.mass, momentum - p.momentum, energy - p.energy),
        None => (0.0, 0.0, 0.0),
    };
    Ok(DiagnosticsRecord {
        t,
        mass,
        momentum,
        energy,
        d_mass,
        d_momentum,
        d_energy,
    })
}

/// `M`-norm errors `(e_h, e_u)` of the perturbation state `y` against an
/// exact solution given in total fields. `H` and `U` are added back to the
/// state before comparing.
pub fn l2_error(
    sys: &SemiDiscreteSystem,
    y: &[f64],
    exact_total: impl Fn(f64) -> (f64, f64),
) -> Result<(f64, f64)> {
    check_len(sys.state_len(), y.len())?;
    let n = sys.ndof();
    let p = sys.params();
    let mass = sys.operators().mass();
    let (mut eh, mut eu) = (0.0, 0.0);
    for (i, &x) in sys.mesh().nodes().iter().enumerate() {
        let (h, u) = exact_total(x);
        let dh = p.depth + y[i] - h;
        let du = p.velocity + y[n + i] - u;
        eh += mass[i] * dh * dh;
        eu += mass[i] * du * du;
    }
    Ok((eh.sqrt(), eu.sqrt()))
}

/// Total variation of a nodal sequence in global order.
pub fn total_variation(v: &[f64]) -> f64 {
    v.windows(2).map(|w| (w[1] - w[0]).abs()).sum()
}

/// Observed order between two resolutions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Rate {
    Finite(f64),
    /// The finer error is exactly zero.
    Exact,
}

impl Rate {
    pub fn value(&self) -> f64 {
        match self {
            Rate::Finite(r) => *r,
            Rate::Exact => f64::INFINITY,
        }
    }
}

/// `log(e1 / e2) / log(dx1 / dx2)`.
pub fn rate(dx1: f64, e1: f64, dx2: f64, e2: f64) -> Rate {
    if e2 == 0.0 {
        Rate::Exact
    } else {
        Rate::Finite((e1 / e2).ln() / (dx1 / dx2).ln())
    }
}

/// Errors of one variable on a sequence of meshes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorRow {
    pub n_elements: usize,
    pub dx: f64,
    pub err_h: f64,
    pub err_u: f64,
}

/// Errors on successively refined meshes of one configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    rows: Vec<ErrorRow>,
}

impl ConvergenceReport {
    /// Rows must have distinct element widths and nonnegative finite errors;
    /// they are sorted from coarse to fine.
    pub fn new(mut rows: Vec<ErrorRow>) -> Result<Self> {
        if rows.len() < 2 {
            return config_err("a convergence report needs at least two resolutions");
        }
        for r in &rows {
            let ok = |e: f64| e.is_finite() && e >= 0.0;
            if !(r.dx > 0.0 && ok(r.err_h) && ok(r.err_u)) {
                return config_err(format!("invalid error row {r:?}"));
            }
        }
        rows.sort_by(|a, b| b.dx.total_cmp(&a.dx));
        if rows.windows(2).any(|w| w[0].dx == w[1].dx) {
            return config_err("duplicate element width in convergence report");
        }
        Ok(Self { rows })
    }

    pub fn rows(&self) -> &[ErrorRow] {
        &self.rows
    }

    /// Rates between consecutive rows, `(h, u)`.
    pub fn pairwise(&self) -> Vec<(Rate, Rate)> {
        self.rows
            .windows(2)
            .map(|w| {
                (
                    rate(w[0].dx, w[0].err_h, w[1].dx, w[1].err_h),
                    rate(w[0].dx, w[0].err_u, w[1].dx, w[1].err_u),
                )
            })
            .collect()
    }

    /// Rate between the two finest meshes, `(h, u)`.
    pub fn finest(&self) -> (Rate, Rate) {
        *self.pairwise().last().expect("at least two rows")
    }

    /// Least-squares slope of `log e` against `log dx`, `(h, u)`.
    pub fn slope(&self) -> (Rate, Rate) {
        let fit = |err: &dyn Fn(&ErrorRow) -> f64| {
            if self.rows.iter().any(|r| err(r) == 0.0) {
                return Rate::Exact;
            }
            let pts: Vec<(f64, f64)> = self.rows.iter().map(|r| (r.dx.ln(), err(r).ln())).collect();
            let m = pts.len() as f64;
            let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
            let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
            let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
            let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
            Rate::Finite(sxy / sxx)
        };
        (fit(&|r| r.err_h), fit(&|r| r.err_u))
    }
}
