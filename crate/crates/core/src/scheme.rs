//! Semi-discrete DG-SBP system with interface and boundary SATs.
//!
//! The state is `[h; u]` over all global nodes. Interface coupling uses the
//! penalized derivative `D~`. Terms carrying `du/dt` are collected into the
//! time-independent matrix `G`, which is factored once at assembly, so every
//! right-hand side evaluation costs one banded solve.

use crate::error::{check_len, config_err, Result};
use crate::linalg::{BandedLu, DenseLu, Matrix};
use crate::mesh::{assemble_global, GlobalOperators, Mesh, Topology};
use crate::model::{PhysicalParams, TravelingWave};
use crate::operators::{build_reference_operators, to_physical};

/// Pivot magnitude below which the velocity matrix is declared singular.
pub const PIVOT_FLOOR: f64 = 1e-12;

/// Interface penalty table of the raw SAT form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterfacePenalties {
    /// `tau_11, tau_12, tau_21, tau_22`.
    pub tau: [f64; 4],
    /// `gamma_21, gamma_22, gamma_23`.
    pub gamma: [f64; 3],
    /// `sigma_21 .. sigma_27`.
    pub sigma: [f64; 7],
}

impl InterfacePenalties {
    /// The values under which the raw form collapses to the `D~` form.
    pub fn standard() -> Self {
        let (half, sixth, twelfth) = (1.0 / 2.0, 1.0 / 6.0, 1.0 / 12.0);
        Self {
            tau: [half; 4],
            gamma: [-sixth, -sixth, twelfth],
            sigma: [-sixth, -sixth, twelfth, -sixth, twelfth, twelfth, -1.0 / 24.0],
        }
    }

    pub fn get(&self, p: InterfaceParameter) -> f64 {
        match p {
            InterfaceParameter::Tau(i) => self.tau[i],
            InterfaceParameter::Gamma(i) => self.gamma[i],
            InterfaceParameter::Sigma(i) => self.sigma[i],
        }
    }

    /// Copy with one parameter shifted by `delta`.
    pub fn perturbed(&self, p: InterfaceParameter, delta: f64) -> Self {
        let mut out = *self;
        match p {
            InterfaceParameter::Tau(i) => out.tau[i] += delta,
            InterfaceParameter::Gamma(i) => out.gamma[i] += delta,
            InterfaceParameter::Sigma(i) => out.sigma[i] += delta,
        }
        out
    }
}

/// Index into the interface penalty table (0-based within each family).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InterfaceParameter {
    Tau(usize),
    Gamma(usize),
    Sigma(usize),
}

impl InterfaceParameter {
    pub fn all() -> Vec<Self> {
        (0..4)
            .map(Self::Tau)
            .chain((0..3).map(Self::Gamma))
            .chain((0..7).map(Self::Sigma))
            .collect()
    }

    pub fn label(&self) -> String {
        const TAU: [&str; 4] = ["11", "12", "21", "22"];
        match self {
            Self::Tau(i) => format!("tau_{}", TAU[*i]),
            Self::Gamma(i) => format!("gamma_2{}", i + 1),
            Self::Sigma(i) => format!("sigma_2{}", i + 1),
        }
    }
}

/// Penalties of the inflow (left) boundary SAT.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LeftPenalties {
    pub tau: f64,
    pub theta: f64,
    pub gamma: f64,
    pub sigma: f64,
    pub eta: f64,
    pub mu: f64,
    pub rho: f64,
}

impl LeftPenalties {
    pub fn standard() -> Self {
        Self {
            tau: -0.5,
            theta: -1.0,
            gamma: -1.0 / 3.0,
            sigma: -1.0 / 3.0,
            eta: -0.5,
            mu: -1.0 / 6.0,
            rho: 1.0 / 3.0,
        }
    }
}

/// Penalties of the outflow (right) boundary SAT.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RightPenalties {
    pub theta: f64,
    pub gamma: f64,
    pub sigma: f64,
    pub rho: f64,
}

impl RightPenalties {
    pub fn standard() -> Self {
        Self {
            theta: 1.0,
            gamma: 1.0 / 3.0,
            sigma: -1.0 / 3.0,
            rho: -1.0 / 3.0,
        }
    }
}

/// Boundary penalties and upwind jump dissipation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PenaltySet {
    pub left: LeftPenalties,
    pub right: RightPenalties,
    pub alpha_h: f64,
    pub alpha_u: f64,
}

impl PenaltySet {
    pub fn new(alpha_h: f64, alpha_u: f64) -> Result<Self> {
        for (name, a) in [("alpha_h", alpha_h), ("alpha_u", alpha_u)] {
            if !(a.is_finite() && a >= 0.0) {
                return config_err(format!("{name} must be nonnegative, got {a}"));
            }
        }
        Ok(Self {
            left: LeftPenalties::standard(),
            right: RightPenalties::standard(),
            alpha_h,
            alpha_u,
        })
    }

    /// Energy-conserving interfaces (`alpha_h = alpha_u = 0`).
    pub fn conservative() -> Self {
        Self::new(0.0, 0.0).expect("zero upwinding is valid")
    }

    /// Upwind interfaces (`alpha_h = alpha_u = 1`).
    pub fn upwind() -> Self {
        Self::new(1.0, 1.0).expect("unit upwinding is valid")
    }
}

/// Exact traces fed to the boundary SATs.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct BoundaryTraces {
    pub h: f64,
    pub u: f64,
    pub u_x: f64,
    pub u_t: f64,
}

/// Source of boundary data for the perturbation variables.
pub trait BoundaryData: Send + Sync {
    fn traces(&self, x: f64, t: f64) -> BoundaryTraces;
}

impl BoundaryData for TravelingWave {
    fn traces(&self, x: f64, t: f64) -> BoundaryTraces {
        let [h, u, u_x, u_t] = TravelingWave::traces(self, x, t);
        BoundaryTraces { h, u, u_x, u_t }
    }
}

type SparseVec = Vec<(usize, f64)>;

fn sparse(v: &[f64]) -> SparseVec {
    v.iter()
        .enumerate()
        .filter(|(_, x)| **x != 0.0)
        .map(|(i, &x)| (i, x))
        .collect()
}

fn axpy_sparse(s: f64, x: &SparseVec, y: &mut [f64]) {
    for &(i, v) in x {
        y[i] += s * v;
    }
}

/// Boundary lift vectors `M^{-1} D~^T e` and `M^{-1} (D~^T)^2 e`.
#[derive(Debug, Clone)]
struct Lifts {
    first: SparseVec,
    second: SparseVec,
}

impl Lifts {
    fn new(ops: &GlobalOperators, node: usize) -> Self {
        let n = ops.ndof();
        let mut e = vec![0.0; n];
        e[node] = 1.0;
        let mut t1 = vec![0.0; n];
        ops.apply_penalized_transpose(&e, &mut t1);
        let mut t2 = vec![0.0; n];
        ops.apply_penalized_transpose(&t1, &mut t2);
        let minv = ops.mass_inv();
        let first: Vec<f64> = t1.iter().zip(minv).map(|(a, m)| a * m).collect();
        let second: Vec<f64> = t2.iter().zip(minv).map(|(a, m)| a * m).collect();
        Self {
            first: sparse(&first),
            second: sparse(&second),
        }
    }
}

/// Scratch buffers for [`SemiDiscreteSystem::rhs`].
#[derive(Debug, Clone)]
pub struct Workspace {
    flux: Vec<f64>,
    du1: Vec<f64>,
    du2: Vec<f64>,
    r: Vec<f64>,
    scratch: Vec<f64>,
}

impl Workspace {
    pub fn new(ndof: usize) -> Self {
        Self {
            flux: vec![0.0; ndof],
            du1: vec![0.0; ndof],
            du2: vec![0.0; ndof],
            r: vec![0.0; ndof],
            scratch: vec![0.0; ndof],
        }
    }
}

/// Assembled semi-discrete system `d[h; u]/dt = F(t, [h; u])`.
pub struct SemiDiscreteSystem {
    mesh: Mesh,
    ops: GlobalOperators,
    params: PhysicalParams,
    penalties: PenaltySet,
    velocity_lu: BandedLu,
    left: Lifts,
    right: Lifts,
    data: Option<Box<dyn BoundaryData>>,
}

impl std::fmt::Debug for SemiDiscreteSystem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SemiDiscreteSystem")
            .field("topology", &self.ops.topology())
            .field("ndof", &self.ops.ndof())
            .field("params", &self.params)
            .field("penalties", &self.penalties)
            .field("pivots", &self.velocity_lu.pivot_range())
            .field("has_data", &self.data.is_some())
            .finish()
    }
}

impl SemiDiscreteSystem {
    /// Assemble on a uniform mesh. Bounded domains need `U >= 0`.
    pub fn new(
        mesh: Mesh,
        topology: Topology,
        params: PhysicalParams,
        penalties: PenaltySet,
    ) -> Result<Self> {
        if topology == Topology::Bounded && params.velocity < 0.0 {
            return config_err("bounded domains support U >= 0 only");
        }
        let reference = build_reference_operators(mesh.degree())?;
        let ops = assemble_global(&mesh, &reference, topology)?;
        let left = Lifts::new(&ops, ops.left_node());
        let right = Lifts::new(&ops, ops.right_node());
        let n = ops.ndof();
        let mut e = vec![0.0; n];
        let mut tmp = vec![0.0; n];
        let velocity_lu = BandedLu::from_columns(n, ops.band_ordering(), PIVOT_FLOOR, |j, col| {
            e[j] = 1.0;
            apply_velocity_matrix(&ops, &params, &penalties, (&left, &right), &e, col, &mut tmp);
            e[j] = 0.0;
        })?;
        Ok(Self {
            mesh,
            ops,
            params,
            penalties,
            velocity_lu,
            left,
            right,
            data: None,
        })
    }

    /// Attach nonhomogeneous boundary data (bounded domains only).
    pub fn with_boundary_data(mut self, data: Box<dyn BoundaryData>) -> Result<Self> {
        if self.ops.topology() == Topology::Periodic {
            return config_err("boundary data is meaningless on a periodic domain");
        }
        self.data = Some(data);
        Ok(self)
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn operators(&self) -> &GlobalOperators {
        &self.ops
    }

    pub fn params(&self) -> &PhysicalParams {
        &self.params
    }

    pub fn penalties(&self) -> &PenaltySet {
        &self.penalties
    }

    pub fn topology(&self) -> Topology {
        self.ops.topology()
    }

    pub fn ndof(&self) -> usize {
        self.ops.ndof()
    }

    /// Length of the stacked state `[h; u]`.
    pub fn state_len(&self) -> usize {
        2 * self.ops.ndof()
    }

    /// Smallest and largest pivot of the factored velocity matrix.
    pub fn pivot_range(&self) -> (f64, f64) {
        self.velocity_lu.pivot_range()
    }

    pub fn bandwidths(&self) -> (usize, usize) {
        self.velocity_lu.bandwidths()
    }

    pub fn workspace(&self) -> Workspace {
        Workspace::new(self.ndof())
    }

    fn bounded(&self) -> bool {
        self.ops.topology() == Topology::Bounded
    }

    fn apply_velocity(&self, v: &[f64], out: &mut [f64], tmp: &mut [f64]) {
        let lifts = (&self.left, &self.right);
        apply_velocity_matrix(&self.ops, &self.params, &self.penalties, lifts, v, out, tmp);
    }

    /// Dense copy of `G` for inspection.
    pub fn velocity_matrix(&self) -> Matrix {
        let n = self.ndof();
        let mut g = Matrix::zeros(n, n);
        let (mut e, mut col, mut tmp) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
        for j in 0..n {
            e[j] = 1.0;
            self.apply_velocity(&e, &mut col, &mut tmp);
            e[j] = 0.0;
            for i in 0..n {
                g[(i, j)] = col[i];
            }
        }
        g
    }

    fn boundary_traces(&self, t: f64) -> (BoundaryTraces, BoundaryTraces) {
        match &self.data {
            Some(d) => (
                d.traces(self.mesh.x_left(), t),
                d.traces(self.mesh.x_right(), t),
            ),
            None => Default::default(),
        }
    }

    /// Evaluate `dy = F(t, y)` for the stacked state `y = [h; u]`.
    pub fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64], ws: &mut Workspace) {
        let n = self.ndof();
        debug_assert_eq!(y.len(), 2 * n);
        let (h, u) = y.split_at(n);
        let (dh, du) = dy.split_at_mut(n);
        let PhysicalParams {
            gravity: g,
            depth: depth_h,
            velocity: vel,
        } = self.params;
        let pen = &self.penalties;
        let ops = &self.ops;

        for ((f, &hi), &ui) in ws.flux.iter_mut().zip(h).zip(u) {
            *f = depth_h * ui + vel * hi;
        }
        ops.apply_penalized(&ws.flux, dh);
        dh.iter_mut().for_each(|x| *x = -*x);
        if pen.alpha_h != 0.0 {
            ops.add_jump_dissipation(h, -pen.alpha_h, dh);
        }

        ops.apply_penalized(u, &mut ws.du1);
        ops.apply_penalized(&ws.du1, &mut ws.du2);
        let h2u = depth_h * depth_h * vel;
        for (((f, &hi), &ui), &d2) in ws.flux.iter_mut().zip(h).zip(u).zip(&ws.du2) {
            *f = g * hi + vel * ui - h2u / 3.0 * d2;
        }
        ops.apply_penalized(&ws.flux, &mut ws.r);
        ws.r.iter_mut().for_each(|x| *x = -*x);
        if pen.alpha_u != 0.0 {
            ops.add_jump_dissipation(u, -pen.alpha_u, &mut ws.r);
        }

        if self.bounded() {
            let (dl, dr) = self.boundary_traces(t);
            let (l, r) = (pen.left, pen.right);
            let (i0, i_n) = (ops.left_node(), ops.right_node());
            let minv = ops.mass_inv();
            let h2 = depth_h * depth_h;
            let (eh0, eu0, eu_n) = (h[i0] - dl.h, u[i0] - dl.u, u[i_n] - dr.u);

            dh[i0] += (l.tau * vel * eh0 + l.theta * depth_h * eu0) * minv[i0];
            dh[i_n] += r.theta * depth_h * eu_n * minv[i_n];

            let rv = &mut ws.r;
            rv[i0] += l.eta * vel * eu0 * minv[i0];
            axpy_sparse(l.mu * h2u * (ws.du1[i0] - dl.u_x), &self.left.first, rv);
            axpy_sparse(l.rho * h2u * eu0, &self.left.second, rv);
            axpy_sparse(r.rho * h2u * eu_n, &self.right.second, rv);
            // Known u_t data of the implicit penalties moves to the right side.
            axpy_sparse(-l.gamma * h2 * dl.u_t, &self.left.first, rv);
            rv[i0] -= l.sigma * h2 * dl.u_t * minv[i0] * minv[i0];
            axpy_sparse(-r.gamma * h2 * dr.u_t, &self.right.first, rv);
            rv[i_n] -= r.sigma * h2 * dr.u_t * minv[i_n] * minv[i_n];
        }

        self.velocity_lu.solve_into(&ws.r, du, &mut ws.scratch);
    }

    /// Allocating convenience wrapper around [`rhs`](Self::rhs).
    pub fn eval(&self, t: f64, y: &[f64]) -> Result<Vec<f64>> {
        check_len(self.state_len(), y.len())?;
        let mut dy = vec![0.0; y.len()];
        self.rhs(t, y, &mut dy, &mut self.workspace());
        Ok(dy)
    }

    /// `out = D^ u`: `D~` plus the boundary lifts `M^{-1} e_L e_L^T` and
    /// `-M^{-1} e_R e_R^T` on a bounded domain.
    pub fn apply_energy_derivative(&self, u: &[f64], out: &mut [f64]) {
        self.ops.apply_penalized(u, out);
        if self.bounded() {
            let (i0, i_n) = (self.ops.left_node(), self.ops.right_node());
            let minv = self.ops.mass_inv();
            out[i0] += u[i0] * minv[i0];
            out[i_n] -= u[i_n] * minv[i_n];
        }
    }

    /// `g <1, h>_M`.
    pub fn mass(&self, y: &[f64]) -> f64 {
        let h = &y[..self.ndof()];
        self.params.gravity * h.iter().zip(self.ops.mass()).map(|(a, m)| a * m).sum::<f64>()
    }

    /// `H <1, u>_M`.
    pub fn momentum(&self, y: &[f64]) -> f64 {
        let u = &y[self.ndof()..];
        self.params.depth * u.iter().zip(self.ops.mass()).map(|(a, m)| a * m).sum::<f64>()
    }

    /// `(g/2)|h|^2_M + (H/2)|u|^2_M + (H^3/6)|D^ u|^2_M`.
    pub fn energy(&self, y: &[f64]) -> f64 {
        let n = self.ndof();
        let (h, u) = y.split_at(n);
        let mut du = vec![0.0; n];
        self.apply_energy_derivative(u, &mut du);
        let p = &self.params;
        p.gravity / 2.0 * self.ops.inner(h, h)
            + p.depth / 2.0 * self.ops.inner(u, u)
            + p.depth.powi(3) / 6.0 * self.ops.inner(&du, &du)
    }

    /// Instantaneous energy rate `dE/dt` along `dy`.
    pub fn energy_rate(&self, y: &[f64], dy: &[f64]) -> f64 {
        let n = self.ndof();
        let (h, u) = y.split_at(n);
        let (dh, du) = dy.split_at(n);
        let mut a = vec![0.0; n];
        let mut b = vec![0.0; n];
        self.apply_energy_derivative(u, &mut a);
        self.apply_energy_derivative(du, &mut b);
        let p = &self.params;
        p.gravity * self.ops.inner(h, dh)
            + p.depth * self.ops.inner(u, du)
            + p.depth.powi(3) / 3.0 * self.ops.inner(&a, &b)
    }

    /// Stacked nodal samples of `f(x) -> (h, u)`.
    pub fn sample(&self, f: impl Fn(f64) -> (f64, f64)) -> Vec<f64> {
        let n = self.ndof();
        let mut y = vec![0.0; 2 * n];
        for (i, &x) in self.mesh.nodes().iter().enumerate() {
            let (h, u) = f(x);
            y[i] = h;
            y[n + i] = u;
        }
        y
    }
}

/// `out = G v`: identity, the `du/dt` part of the dispersive flux and, on a
/// bounded domain, the implicit boundary penalties.
fn apply_velocity_matrix(
    ops: &GlobalOperators,
    params: &PhysicalParams,
    pen: &PenaltySet,
    (left, right): (&Lifts, &Lifts),
    v: &[f64],
    out: &mut [f64],
    tmp: &mut [f64],
) {
    let h2 = params.depth * params.depth;
    ops.apply_penalized(v, tmp);
    ops.apply_penalized(tmp, out);
    for (o, x) in out.iter_mut().zip(v) {
        *o = x - h2 / 3.0 * *o;
    }
    if ops.topology() == Topology::Bounded {
        let (l, r) = (pen.left, pen.right);
        let (i0, i_n) = (ops.left_node(), ops.right_node());
        let minv = ops.mass_inv();
        axpy_sparse(-h2 * l.gamma * v[i0], &left.first, out);
        out[i0] -= h2 * l.sigma * v[i0] * minv[i0] * minv[i0];
        axpy_sparse(-h2 * r.gamma * v[i_n], &right.first, out);
        out[i_n] -= h2 * r.sigma * v[i_n] * minv[i_n] * minv[i_n];
    }
}

/// Two-element interface system evaluated densely in both the raw penalty
/// form and the penalized-derivative form.
///
/// Elements may have different widths. With equal widths the end masses
/// match and `(M^{-1} B)^2` vanishes, which hides the penalties multiplying
/// it.
#[derive(Debug, Clone)]
pub struct InterfaceAudit {
    params: PhysicalParams,
    alpha_h: f64,
    alpha_u: f64,
    d: Matrix,
    k: Matrix,
    btb: Matrix,
    dt: Matrix,
}

impl InterfaceAudit {
    pub fn new(
        degree: usize,
        widths: (f64, f64),
        params: PhysicalParams,
        alpha_h: f64,
        alpha_u: f64,
    ) -> Result<Self> {
        let reference = build_reference_operators(degree)?;
        let left = to_physical(&reference, widths.0)?;
        let right = to_physical(&reference, widths.1)?;
        let m = degree + 1;
        let n = 2 * m;
        let d = Matrix::from_fn(n, n, |i, j| match (i / m, j / m) {
            (0, 0) => left.diff()[(i, j)],
            (1, 1) => right.diff()[(i - m, j - m)],
            _ => 0.0,
        });
        let mass: Vec<f64> = left.mass().iter().chain(right.mass()).copied().collect();
        let minv = Matrix::from_diagonal(&mass.iter().map(|x| 1.0 / x).collect::<Vec<_>>());
        let mut b = Matrix::zeros(n, n);
        let (a, c) = (m - 1, m);
        b[(a, a)] = 1.0;
        b[(a, c)] = -1.0;
        b[(c, a)] = 1.0;
        b[(c, c)] = -1.0;
        let k = minv.matmul(&b);
        Ok(Self {
            params,
            alpha_h,
            alpha_u,
            dt: d.sub(&k.scaled(0.5)),
            btb: minv.matmul(&b.transpose().matmul(&b)).scaled(0.5),
            k,
            d,
        })
    }

    pub fn ndof(&self) -> usize {
        self.d.rows()
    }

    /// Right-hand side built from `D~`.
    pub fn penalized_rhs(&self, h: &[f64], u: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let n = self.ndof();
        check_len(n, h.len())?;
        check_len(n, u.len())?;
        let PhysicalParams {
            gravity: g,
            depth: hh,
            velocity: vel,
        } = self.params;
        let dt = &self.dt;
        let flux: Vec<f64> = (0..n).map(|i| hh * u[i] + vel * h[i]).collect();
        let jh = self.btb.matvec(h);
        let dh: Vec<f64> = dt.matvec(&flux).iter().zip(&jh).map(|(a, b)| -a - self.alpha_h * b).collect();
        let d2u = dt.matvec(&dt.matvec(u));
        let fu: Vec<f64> = (0..n).map(|i| g * h[i] + vel * u[i] - hh * hh * vel / 3.0 * d2u[i]).collect();
        let ju = self.btb.matvec(u);
        let r: Vec<f64> = dt.matvec(&fu).iter().zip(&ju).map(|(a, b)| -a - self.alpha_u * b).collect();
        let gm = Matrix::identity(n).sub(&dt.matmul(dt).scaled(hh * hh / 3.0));
        let du = DenseLu::factor(&gm, PIVOT_FLOOR)?.solve(&r);
        Ok((dh, du))
    }

    /// Right-hand side of the raw SAT form with an arbitrary penalty table.
    pub fn raw_rhs(
        &self,
        pen: &InterfacePenalties,
        h: &[f64],
        u: &[f64],
    ) -> Result<(Vec<f64>, Vec<f64>)> {
        let n = self.ndof();
        check_len(n, h.len())?;
        check_len(n, u.len())?;
        let PhysicalParams {
            gravity: g,
            depth: hh,
            velocity: vel,
        } = self.params;
        let (d, k) = (&self.d, &self.k);
        let h2 = hh * hh;
        let h2u = h2 * vel;

        let flux: Vec<f64> = (0..n).map(|i| hh * u[i] + vel * h[i]).collect();
        let (dflux, ku, kh, jh) = (d.matvec(&flux), k.matvec(u), k.matvec(h), self.btb.matvec(h));
        let dh: Vec<f64> = (0..n)
            .map(|i| -dflux[i] + pen.tau[0] * hh * ku[i] + pen.tau[1] * vel * kh[i] - self.alpha_h * jh[i])
            .collect();

        let d2 = d.matmul(d);
        let kk = k.matmul(k);
        let gm = Matrix::identity(n)
            .sub(&d2.scaled(h2 / 3.0))
            .sub(&d.matmul(k).scaled(h2 * pen.gamma[0]))
            .sub(&k.matmul(d).scaled(h2 * pen.gamma[1]))
            .sub(&kk.scaled(h2 * pen.gamma[2]));

        let d2u = d2.matvec(u);
        let fu: Vec<f64> = (0..n).map(|i| g * h[i] + vel * u[i] - h2u / 3.0 * d2u[i]).collect();
        let du1 = d.matvec(u);
        let terms = [
            d2.matvec(&ku),
            d.matvec(&k.matvec(&du1)),
            d.matvec(&kk.matvec(u)),
            k.matvec(&d2u),
            k.matvec(&d.matvec(&ku)),
            kk.matvec(&du1),
            kk.matvec(&ku),
        ];
        let dfu = d.matvec(&fu);
        let ju = self.btb.matvec(u);
        let r: Vec<f64> = (0..n)
            .map(|i| {
                let mut s = -dfu[i] + pen.tau[2] * g * kh[i] + pen.tau[3] * vel * ku[i]
                    - self.alpha_u * ju[i];
                for (sig, t) in pen.sigma.iter().zip(&terms) {
                    s += sig * h2u * t[i];
                }
                s
            })
            .collect();
        let du = DenseLu::factor(&gm, PIVOT_FLOOR)?.solve(&r);
        Ok((dh, du))
    }

    /// Largest component-wise disagreement between the two forms over the
    /// given states.
    pub fn max_residual(&self, pen: &InterfacePenalties, states: &[(Vec<f64>, Vec<f64>)]) -> Result<f64> {
        let mut worst = 0.0f64;
        for (h, u) in states {
            let (ph, pu) = self.penalized_rhs(h, u)?;
            let (rh, ru) = self.raw_rhs(pen, h, u)?;
            let diff = ph
                .iter()
                .zip(&rh)
                .chain(pu.iter().zip(&ru))
                .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            worst = worst.max(diff);
        }
        Ok(worst)
    }
}
