//! Linearized Serre model: background state, fluxes, boundary-term
//! eigenstructure, boundary-condition checks and analytic solutions.
//!
//! The solver evolves perturbations `(h, u)` about the background depth `H`
//! and velocity `U`.

use crate::error::{check_len, config_err, Result};
use crate::linalg::{symmetric_eigenvalues_3x3, Matrix};

/// Background state of the linearization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalParams {
    pub gravity: f64,
    pub depth: f64,
    pub velocity: f64,
}

impl PhysicalParams {
    pub fn new(gravity: f64, depth: f64, velocity: f64) -> Result<Self> {
        if !(gravity.is_finite() && gravity > 0.0) {
            return config_err(format!("g must be positive, got {gravity}"));
        }
        if !(depth.is_finite() && depth > 0.0) {
            return config_err(format!("H must be positive, got {depth}"));
        }
        if !velocity.is_finite() {
            return config_err(format!("U must be finite, got {velocity}"));
        }
        Ok(Self {
            gravity,
            depth,
            velocity,
        })
    }

    /// Linear gravity wave speed `sqrt(g H)`.
    pub fn gravity_speed(&self) -> f64 {
        (self.gravity * self.depth).sqrt()
    }

    /// `sqrt(4 H^4 + 9 U^2)`.
    fn root(&self) -> f64 {
        let h = self.depth;
        (4.0 * h.powi(4) + 9.0 * self.velocity * self.velocity).sqrt()
    }

    /// Normalization constants `(C+, C-)` of the last two characteristic variables.
    pub fn characteristic_scales(&self) -> (f64, f64) {
        let h4 = 4.0 * self.depth.powi(4);
        let s = self.root();
        let u3 = 3.0 * self.velocity;
        ((h4 + (u3 + s).powi(2)).sqrt(), (h4 + (u3 - s).powi(2)).sqrt())
    }

    /// Eigenvalues `lambda_1..lambda_5` of the boundary quadratic form.
    pub fn eigenvalues(&self) -> [f64; 5] {
        let (g, h, u) = (self.gravity, self.depth, self.velocity);
        let s = self.root();
        [
            0.0,
            -h.powi(3) * u / 6.0,
            -g * u / 2.0,
            -h * u / 4.0 - h * s / 12.0,
            -h * u / 4.0 + h * s / 12.0,
        ]
    }

    /// Symmetric matrix `A` with `BT = v^T A v` for
    /// `v = [h, u, u_x, u_xx, u_xt]`.
    pub fn boundary_matrix(&self) -> Matrix {
        let (g, h, u) = (self.gravity, self.depth, self.velocity);
        let h3 = h.powi(3);
        let mut a = Matrix::zeros(5, 5);
        a[(0, 0)] = -g * u / 2.0;
        a[(0, 1)] = -g * h / 2.0;
        a[(1, 0)] = -g * h / 2.0;
        a[(1, 1)] = -h * u / 2.0;
        a[(1, 3)] = h3 * u / 6.0;
        a[(3, 1)] = h3 * u / 6.0;
        a[(1, 4)] = h3 / 6.0;
        a[(4, 1)] = h3 / 6.0;
        a[(2, 2)] = -h3 * u / 6.0;
        a
    }

    /// Characteristic variables `w_1..w_5` of `v = [h, u, u_x, u_xx, u_xt]`.
    pub fn characteristic_variables(&self, v: &[f64; 5]) -> [f64; 5] {
        let (g, h, u) = (self.gravity, self.depth, self.velocity);
        let [vh, vu, vux, vuxx, vuxt] = *v;
        let s = self.root();
        let (cp, cm) = self.characteristic_scales();
        let common = 2.0 * h * h * u * vuxx + 2.0 * h * h * vuxt - 6.0 * g * vh;
        [
            vuxx,
            vux,
            vh,
            (common - (3.0 * u + s) * vu) / cp,
            (common - (3.0 * u - s) * vu) / cm,
        ]
    }

    /// Continuous boundary term `BT` at a point.
    pub fn boundary_term(&self, v: &[f64; 5]) -> f64 {
        let (g, h, u) = (self.gravity, self.depth, self.velocity);
        let [vh, vu, vux, vuxx, vuxt] = *v;
        let h3 = h.powi(3);
        -g * h * vh * vu - g * u / 2.0 * vh * vh - h * u / 2.0 * vu * vu - h3 * u / 6.0 * vux * vux
            + h3 * u / 3.0 * vu * vuxx
            + h3 / 3.0 * vu * vuxt
    }

    /// Flux of the height equation, `U h + H u`.
    pub fn flux_h(&self, h: f64, u: f64) -> f64 {
        self.velocity * h + self.depth * u
    }

    /// Flux of the velocity equation,
    /// `g h + U u - (H^2 U / 3) u_xx - (H^2 / 3) u_xt`.
    pub fn flux_u(&self, h: f64, u: f64, u_xx: f64, u_xt: f64) -> f64 {
        let h2 = self.depth * self.depth;
        self.gravity * h + self.velocity * u - h2 * self.velocity / 3.0 * u_xx - h2 / 3.0 * u_xt
    }
}

/// `true` iff `-1 <= alpha <= 1` and `-1 <= beta <= 1` (boundary conditions
/// for a still background).
pub fn check_case1(alpha: f64, beta: f64) -> bool {
    (-1.0..=1.0).contains(&alpha) && (-1.0..=1.0).contains(&beta)
}

/// Coefficients of the three inflow and one outflow conditions used when
/// `U > 0`: `w_j(x_L) = alpha_j w_5(x_L)` for `j = 2, 3, 4` and
/// `w_5(x_R) = sum_j beta_j w_j(x_R)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowCoefficients {
    pub alpha: [f64; 3],
    pub beta: [f64; 3],
}

impl FlowCoefficients {
    /// `alpha_4 = C- / C+`, `beta_4 = C+ / C-`, all others zero.
    pub fn standard(params: &PhysicalParams) -> Self {
        let (cp, cm) = params.characteristic_scales();
        Self {
            alpha: [0.0, 0.0, cm / cp],
            beta: [0.0, 0.0, cp / cm],
        }
    }
}

/// Outcome of the `U > 0` boundary-condition check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowVerdict {
    /// Eigenvalues of the outflow matrix `R`, ascending.
    pub outflow_eigenvalues: [f64; 3],
    /// `lambda_2 alpha_2^2 + lambda_3 alpha_3^2 + lambda_4 alpha_4^2 + lambda_5`.
    pub inflow: f64,
    pub valid: bool,
}

/// Outflow matrix `R` for the right-boundary condition.
pub fn outflow_matrix(coeffs: &FlowCoefficients, params: &PhysicalParams) -> [[f64; 3]; 3] {
    let lam = params.eigenvalues();
    let b = coeffs.beta;
    let mut r = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            r[i][j] = b[i] * b[j] * lam[4];
        }
        r[i][i] += lam[i + 1];
    }
    r
}

pub fn flow_verdict(coeffs: &FlowCoefficients, params: &PhysicalParams) -> FlowVerdict {
    let lam = params.eigenvalues();
    let eig = symmetric_eigenvalues_3x3(outflow_matrix(coeffs, params));
    let a = coeffs.alpha;
    let inflow = lam[1] * a[0] * a[0] + lam[2] * a[1] * a[1] + lam[3] * a[2] * a[2] + lam[4];
    // The standard coefficients sit exactly on the boundary of both
    // conditions, so the thresholds are relative to the eigenvalue scale.
    let scale = lam.iter().fold(1.0f64, |m, l| m.max(l.abs()));
    let tol = 1e-12 * scale;
    FlowVerdict {
        outflow_eigenvalues: eig,
        inflow,
        valid: eig[2] <= tol && inflow >= -tol,
    }
}

/// `true` iff the `U > 0` coefficients give a nonpositive boundary term.
pub fn check_case2(coeffs: &FlowCoefficients, params: &PhysicalParams) -> bool {
    flow_verdict(coeffs, params).valid
}

/// Sinusoidal traveling wave of the linearized equations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TravelingWave {
    params: PhysicalParams,
    speed: f64,
    wavenumber: f64,
}

impl TravelingWave {
    /// Requires `U < c < U + sqrt(g H)`.
    pub fn new(params: PhysicalParams, speed: f64) -> Result<Self> {
        let rel = speed - params.velocity;
        if !(rel > 0.0 && rel < params.gravity_speed()) {
            return config_err(format!(
                "wave speed c = {speed} must lie in ({}, {})",
                params.velocity,
                params.velocity + params.gravity_speed()
            ));
        }
        let wavenumber =
            (3.0 * (params.gravity * params.depth - rel * rel)).sqrt() / (rel * params.depth);
        Ok(Self {
            params,
            speed,
            wavenumber,
        })
    }

    pub fn params(&self) -> &PhysicalParams {
        &self.params
    }

    pub fn speed(&self) -> f64 {
        self.speed
    }

    /// Wavenumber `omega`.
    pub fn wavenumber(&self) -> f64 {
        self.wavenumber
    }

    /// Spatial period `2 pi / omega`.
    pub fn wavelength(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.wavenumber
    }

    fn phase(&self, x: f64, t: f64) -> f64 {
        self.wavenumber * (x - self.speed * t)
    }

    fn velocity_amplitude(&self) -> f64 {
        (self.speed - self.params.velocity) / (self.wavenumber * self.params.depth)
    }

    /// Total height and velocity, including the background state.
    pub fn total(&self, x: f64, t: f64) -> (f64, f64) {
        let (h, u) = self.perturbation(x, t);
        (h + self.params.depth, u + self.params.velocity)
    }

    /// Perturbation `(h, u)` evolved by the solver.
    pub fn perturbation(&self, x: f64, t: f64) -> (f64, f64) {
        let s = self.phase(x, t).sin();
        ((1.0 + s) / self.wavenumber, self.velocity_amplitude() * s)
    }

    /// Boundary traces `[h, u, u_x, u_t]` of the perturbation.
    pub fn traces(&self, x: f64, t: f64) -> [f64; 4] {
        let th = self.phase(x, t);
        let (s, c) = th.sin_cos();
        let a = self.velocity_amplitude();
        let ux = a * self.wavenumber * c;
        [(1.0 + s) / self.wavenumber, a * s, ux, -self.speed * ux]
    }

    pub fn dh_dt(&self, x: f64, t: f64) -> f64 {
        -self.speed * self.phase(x, t).cos()
    }

    pub fn du_dt(&self, x: f64, t: f64) -> f64 {
        self.traces(x, t)[3]
    }

    pub fn u_xx(&self, x: f64, t: f64) -> f64 {
        -self.velocity_amplitude() * self.wavenumber.powi(2) * self.phase(x, t).sin()
    }
}

/// Gaussian hump initial perturbation: `h = e^{-25 x^2} / 5`, `u = 0`.
pub fn gaussian_ic(x: f64) -> (f64, f64) {
    (0.2 * (-25.0 * x * x).exp(), 0.0)
}

/// `(g/2)|h|^2 + (H/2)|u|^2 + (H^3/6)|u_x|^2` with diagonal quadrature
/// weights `mass`.
pub fn continuous_energy(
    h: &[f64],
    u: &[f64],
    u_x: &[f64],
    params: &PhysicalParams,
    mass: &[f64],
) -> Result<f64> {
    check_len(mass.len(), h.len())?;
    check_len(mass.len(), u.len())?;
    check_len(mass.len(), u_x.len())?;
    let sq = |v: &[f64]| v.iter().zip(mass).map(|(a, m)| a * a * m).sum::<f64>();
    Ok(params.gravity / 2.0 * sq(h)
        + params.depth / 2.0 * sq(u)
        + params.depth.powi(3) / 6.0 * sq(u_x))
}
