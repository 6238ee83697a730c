//! Summation-by-parts (SBP) operators on the reference and physical element.
//!
//! The reference operators satisfy `M D + D^T M = B` with `M` the diagonal
//! LGL mass matrix and `B = diag(-1, 0, ..., 0, 1)`. Higher derivatives are
//! always repeated applications of `D_x`.

use crate::error::{check_len, config_err, Result};
use crate::linalg::Matrix;
use crate::quadrature::LglRule;

/// Reference-element SBP operators for degree `P`.
#[derive(Debug, Clone)]
pub struct ReferenceOperators {
    rule: LglRule,
    mass: Vec<f64>,
    stiffness: Matrix,
    diff: Matrix,
    boundary: Vec<f64>,
}

impl ReferenceOperators {
    /// `Q_ij = sum_k w_k l_i(x_k) l_j'(x_k)`, which collapses to
    /// `w_i l_j'(x_i)` at LGL nodes; then `D = M^{-1} Q`.
    pub fn new(rule: LglRule) -> Self {
        let n = rule.len();
        let dl = rule.derivative_at_nodes();
        let w = rule.weights().to_vec();
        let stiffness = Matrix::from_fn(n, n, |i, j| w[i] * dl[i][j]);
        let diff = Matrix::from_fn(n, n, |i, j| stiffness[(i, j)] / w[i]);
        let mut boundary = vec![0.0; n];
        boundary[0] = -1.0;
        boundary[n - 1] = 1.0;
        Self {
            rule,
            mass: w,
            stiffness,
            diff,
            boundary,
        }
    }

    pub fn degree(&self) -> usize {
        self.rule.degree()
    }

    pub fn rule(&self) -> &LglRule {
        &self.rule
    }

    /// Diagonal of `M`.
    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn stiffness(&self) -> &Matrix {
        &self.stiffness
    }

    pub fn diff(&self) -> &Matrix {
        &self.diff
    }

    /// Diagonal of `B`.
    pub fn boundary(&self) -> &[f64] {
        &self.boundary
    }

    /// `max |M D + D^T M - B|`.
    pub fn sbp_defect(&self) -> f64 {
        sbp_defect(&self.mass, &self.diff, &self.boundary)
    }
}

pub fn build_reference_operators(degree: usize) -> Result<ReferenceOperators> {
    Ok(ReferenceOperators::new(LglRule::new(degree)?))
}

fn sbp_defect(mass: &[f64], d: &Matrix, b: &[f64]) -> f64 {
    let n = mass.len();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let bij = if i == j { b[i] } else { 0.0 };
            let v = mass[i] * d[(i, j)] + d[(j, i)] * mass[j] - bij;
            worst = worst.max(v.abs());
        }
    }
    worst
}

/// Element operators `D_x = (2/dx) D`, `M_x = (dx/2) M`.
#[derive(Debug, Clone)]
pub struct PhysicalOperators {
    dx: f64,
    mass: Vec<f64>,
    diff: Matrix,
    boundary: Vec<f64>,
}

impl PhysicalOperators {
    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn len(&self) -> usize {
        self.mass.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mass.is_empty()
    }

    pub fn degree(&self) -> usize {
        self.mass.len() - 1
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn diff(&self) -> &Matrix {
        &self.diff
    }

    pub fn sbp_defect(&self) -> f64 {
        sbp_defect(&self.mass, &self.diff, &self.boundary)
    }

    /// `D_x^l v`.
    pub fn apply_power(&self, v: &[f64], power: usize) -> Vec<f64> {
        let mut out = v.to_vec();
        for _ in 0..power {
            out = self.diff.matvec(&out);
        }
        out
    }

    /// `<u, v>_{M_x}`.
    pub fn inner(&self, u: &[f64], v: &[f64]) -> f64 {
        u.iter().zip(v).zip(&self.mass).map(|((a, b), m)| a * b * m).sum()
    }
}

pub fn to_physical(reference: &ReferenceOperators, dx: f64) -> Result<PhysicalOperators> {
    if !(dx > 0.0 && dx.is_finite()) {
        return config_err(format!("element length must be positive, got {dx}"));
    }
    Ok(PhysicalOperators {
        dx,
        mass: reference.mass.iter().map(|m| m * dx / 2.0).collect(),
        diff: reference.diff.scaled(2.0 / dx),
        boundary: reference.boundary.clone(),
    })
}

/// Which integration-by-parts identity to check.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DerivativeOrder {
    First,
    Second,
    Third,
}

impl DerivativeOrder {
    pub fn as_usize(self) -> usize {
        match self {
            DerivativeOrder::First => 1,
            DerivativeOrder::Second => 2,
            DerivativeOrder::Third => 3,
        }
    }

    pub fn from_usize(l: usize) -> Option<Self> {
        match l {
            1 => Some(DerivativeOrder::First),
            2 => Some(DerivativeOrder::Second),
            3 => Some(DerivativeOrder::Third),
            _ => None,
        }
    }
}

/// Absolute difference between the two sides of the discrete
/// integration-by-parts identity of the given order:
///
/// * first:  `<u, D v> = u_N v_N - u_0 v_0 - <D u, v>`
/// * second: `<u, D^2 v> = u_N (Dv)_N - u_0 (Dv)_0 - <D u, D v>`
/// * third:  `<u, D^3 v> = u_N (D^2 v)_N - u_0 (D^2 v)_0
///            - 1/2 ((Du)_N (Dv)_N - (Du)_0 (Dv)_0)
///            + 1/2 <D^2 u, D v> - 1/2 <D u, D^2 v>`
pub fn sbp_identity_check(
    ops: &PhysicalOperators,
    u: &[f64],
    v: &[f64],
    order: DerivativeOrder,
) -> Result<f64> {
    let n = ops.len();
    check_len(n, u.len())?;
    check_len(n, v.len())?;
    let last = n - 1;
    let du = ops.apply_power(u, 1);
    let dv = ops.apply_power(v, 1);
    let (lhs, rhs) = match order {
        DerivativeOrder::First => (
            ops.inner(u, &dv),
            u[last] * v[last] - u[0] * v[0] - ops.inner(&du, v),
        ),
        DerivativeOrder::Second => {
            let d2v = ops.apply_power(&dv, 1);
            (
                ops.inner(u, &d2v),
                u[last] * dv[last] - u[0] * dv[0] - ops.inner(&du, &dv),
            )
        }
        DerivativeOrder::Third => {
            let d2u = ops.apply_power(&du, 1);
            let d2v = ops.apply_power(&dv, 1);
            let d3v = ops.apply_power(&d2v, 1);
            (
                ops.inner(u, &d3v),
                u[last] * d2v[last] - u[0] * d2v[0]
                    - 0.5 * (du[last] * dv[last] - du[0] * dv[0])
                    + 0.5 * ops.inner(&d2u, &dv)
                    - 0.5 * ops.inner(&du, &d2v),
            )
        }
    };
    Ok((lhs - rhs).abs())
}

/// Outcome of a two-resolution truncation-error probe.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ObservedOrder {
    /// Both errors are at round-off level: the operator is exact on `f`.
    Exact,
    Rate(f64),
}

/// Maximum nodal error of `D_x^l f` against `f^(l)` on `[x0, x0 + dx]`,
/// together with a round-off scale for that evaluation.
fn element_derivative_error(
    ops: &PhysicalOperators,
    reference: &ReferenceOperators,
    x0: f64,
    f: &dyn Fn(f64) -> f64,
    exact: &dyn Fn(f64) -> f64,
    l: usize,
) -> (f64, f64) {
    let xs: Vec<f64> = reference
        .rule()
        .nodes()
        .iter()
        .map(|xi| x0 + ops.dx() / 2.0 * (xi + 1.0))
        .collect();
    let samples: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
    let approx = ops.apply_power(&samples, l);
    let err = xs
        .iter()
        .zip(&approx)
        .map(|(&x, a)| (a - exact(x)).abs())
        .fold(0.0, f64::max);
    let fmax = samples.iter().fold(0.0f64, |m, s| m.max(s.abs()));
    let roundoff = 1e2 * f64::EPSILON * ops.diff().norm_inf().powi(l as i32) * fmax.max(1.0);
    (err, roundoff)
}

/// Observed convergence order of `D_x^l` on one element starting at `x0`,
/// comparing element lengths `dx` and `dx / 2`. Expected `P + 1 - l` for
/// smooth `f`.
pub fn truncation_probe(
    reference: &ReferenceOperators,
    x0: f64,
    dx: f64,
    f: &dyn Fn(f64) -> f64,
    derivative: &dyn Fn(f64) -> f64,
    order: DerivativeOrder,
) -> Result<ObservedOrder> {
    let l = order.as_usize();
    let coarse = to_physical(reference, dx)?;
    let fine = to_physical(reference, dx / 2.0)?;
    let (e1, r1) = element_derivative_error(&coarse, reference, x0, f, derivative, l);
    let (e2, r2) = element_derivative_error(&fine, reference, x0, f, derivative, l);
    if e1 <= r1 && e2 <= r2 {
        return Ok(ObservedOrder::Exact);
    }
    Ok(ObservedOrder::Rate((e1 / e2).log2()))
}
