//! Fixed-step classical RK4 with a step schedule that lands exactly on the
//! final time.

use crate::error::{check_len, config_err, Result, SolverError};
use crate::scheme::{SemiDiscreteSystem, Workspace};

/// States whose max-norm exceeds this are treated as diverged.
pub const DIVERGENCE_LIMIT: f64 = 1e8;

/// `dt = CFL * (dx / (P + 1))^2`.
pub fn cfl_step(dx: f64, degree: usize, cfl: f64) -> f64 {
    cfl * (dx / (degree as f64 + 1.0)).powi(2)
}

/// Final time and nominal step. The last step is shortened so the run ends
/// exactly at `final_time`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeConfig {
    final_time: f64,
    dt: f64,
}

impl TimeConfig {
    pub fn new(final_time: f64, dt: f64) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return config_err(format!("time step must be positive, got {dt}"));
        }
        if !(final_time.is_finite() && final_time >= 0.0) {
            return config_err(format!("final time must be nonnegative, got {final_time}"));
        }
        Ok(Self { final_time, dt })
    }

    /// Step from the CFL rule on elements of width `dx` and degree `degree`.
    pub fn from_cfl(final_time: f64, dx: f64, degree: usize, cfl: f64) -> Result<Self> {
        if !(dx > 0.0) {
            return config_err(format!("element width must be positive, got {dx}"));
        }
        Self::new(final_time, cfl_step(dx, degree, cfl))
    }

    pub fn final_time(&self) -> f64 {
        self.final_time
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Number of steps, `ceil(T / dt)` ignoring round-off just above an integer.
    pub fn steps(&self) -> usize {
        let ratio = self.final_time / self.dt;
        let k = ratio.round();
        if (ratio - k).abs() <= 1e-9 * k.max(1.0) {
            k as usize
        } else {
            ratio.ceil() as usize
        }
    }

    /// Start time of step `i`.
    pub fn time_at(&self, i: usize) -> f64 {
        if i >= self.steps() {
            self.final_time
        } else {
            i as f64 * self.dt
        }
    }

    /// Length of step `i` (the last one may be shorter).
    pub fn step_size(&self, i: usize) -> f64 {
        self.time_at(i + 1) - self.time_at(i)
    }
}

/// Autonomous or time-dependent first-order system `y' = f(t, y)`.
pub trait OdeSystem {
    type Workspace;

    fn dim(&self) -> usize;

    fn workspace(&self) -> Self::Workspace;

    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64], ws: &mut Self::Workspace);
}

impl OdeSystem for SemiDiscreteSystem {
    type Workspace = Workspace;

    fn dim(&self) -> usize {
        self.state_len()
    }

    fn workspace(&self) -> Workspace {
        SemiDiscreteSystem::workspace(self)
    }

    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64], ws: &mut Workspace) {
        SemiDiscreteSystem::rhs(self, t, y, dy, ws)
    }
}

/// Reusable RK4 stage buffers for one system.
pub struct Rk4<'a, S: OdeSystem> {
    system: &'a S,
    ws: S::Workspace,
    k: [Vec<f64>; 4],
    stage: Vec<f64>,
}

impl<'a, S: OdeSystem> Rk4<'a, S> {
    pub fn new(system: &'a S) -> Self {
        let n = system.dim();
        Self {
            system,
            ws: system.workspace(),
            k: std::array::from_fn(|_| vec![0.0; n]),
            stage: vec![0.0; n],
        }
    }

    /// Advance `y` from `t` to `t + dt` in place.
    pub fn step(&mut self, t: f64, dt: f64, y: &mut [f64]) {
        let sys = self.system;
        let [k1, k2, k3, k4] = &mut self.k;
        sys.rhs(t, y, k1, &mut self.ws);
        for ((s, &yi), &k) in self.stage.iter_mut().zip(y.iter()).zip(k1.iter()) {
            *s = yi + 0.5 * dt * k;
        }
        sys.rhs(t + 0.5 * dt, &self.stage, k2, &mut self.ws);
        for ((s, &yi), &k) in self.stage.iter_mut().zip(y.iter()).zip(k2.iter()) {
            *s = yi + 0.5 * dt * k;
        }
        sys.rhs(t + 0.5 * dt, &self.stage, k3, &mut self.ws);
        for ((s, &yi), &k) in self.stage.iter_mut().zip(y.iter()).zip(k3.iter()) {
            *s = yi + dt * k;
        }
        sys.rhs(t + dt, &self.stage, k4, &mut self.ws);
        let w = dt / 6.0;
        for i in 0..y.len() {
            y[i] += w * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
}

fn diverged(y: &[f64]) -> bool {
    y.iter().any(|x| !(x.abs() <= DIVERGENCE_LIMIT))
}

/// One RK4 step; `step` only labels a divergence error.
pub fn rk4_advance<S: OdeSystem>(system: &S, y: &mut [f64], t: f64, dt: f64, step: usize) -> Result<()> {
    check_len(system.dim(), y.len())?;
    if !(dt > 0.0) {
        return config_err(format!("time step must be positive, got {dt}"));
    }
    Rk4::new(system).step(t, dt, y);
    if diverged(y) {
        return Err(SolverError::Divergence { step, time: t + dt });
    }
    Ok(())
}

/// Integrate from `t = 0` to the final time. `observe(step, t, y)` sees the
/// initial state (step 0) and the state after every step.
pub fn integrate<S: OdeSystem>(
    system: &S,
    y: &mut [f64],
    config: &TimeConfig,
    mut observe: impl FnMut(usize, f64, &[f64]),
) -> Result<f64> {
    check_len(system.dim(), y.len())?;
    let mut rk = Rk4::new(system);
    observe(0, 0.0, y);
    let steps = config.steps();
    for i in 0..steps {
        let t = config.time_at(i);
        rk.step(t, config.step_size(i), y);
        let t_next = config.time_at(i + 1);
        if diverged(y) {
            return Err(SolverError::Divergence {
                step: i + 1,
                time: t_next,
            });
        }
        observe(i + 1, t_next, y);
    }
    Ok(config.time_at(steps))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_mesh, Topology};
    use crate::model::{PhysicalParams, TravelingWave};
    use crate::scheme::PenaltySet;

    /// `y' = A y` for a fixed dense matrix.
    struct Linear(Vec<Vec<f64>>);

    impl OdeSystem for Linear {
        type Workspace = ();

        fn dim(&self) -> usize {
            self.0.len()
        }

        fn workspace(&self) {}

        fn rhs(&self, _t: f64, y: &[f64], dy: &mut [f64], _ws: &mut ()) {
            for (d, row) in dy.iter_mut().zip(&self.0) {
                *d = row.iter().zip(y).map(|(a, b)| a * b).sum();
            }
        }
    }

    #[test]
    fn cfl_examples() {
        assert!((cfl_step(0.1, 1, 0.1) - 2.5e-4).abs() < 1e-18);
        assert!((cfl_step(0.2, 3, 0.1) - 2.5e-4).abs() < 1e-18);
        assert!(TimeConfig::new(1.0, cfl_step(0.1, 1, 0.0)).is_err());
        assert!(TimeConfig::new(1.0, f64::NAN).is_err());
        assert!(TimeConfig::from_cfl(1.0, -0.1, 2, 0.1).is_err());
    }

    #[test]
    fn schedule_lands_on_final_time() {
        let c = TimeConfig::new(1.0, 1e-3).unwrap();
        assert_eq!(c.steps(), 1000);
        assert_eq!(c.time_at(1000), 1.0);
        let c = TimeConfig::new(0.1, 0.03).unwrap();
        assert_eq!(c.steps(), 4);
        assert!((c.step_size(3) - 0.01).abs() < 1e-15);
        let sum: f64 = (0..c.steps()).map(|i| c.step_size(i)).sum();
        assert!((sum - 0.1).abs() <= 1e-14 * 0.1);
        let c = TimeConfig::new(0.0, 0.1).unwrap();
        assert_eq!(c.steps(), 0);
    }

    #[test]
    fn one_step_of_exponential_decay() {
        let sys = Linear(vec![vec![-1.0]]);
        let mut y = vec![1.0];
        rk4_advance(&sys, &mut y, 0.0, 0.1, 1).unwrap();
        let series = 1.0 - 0.1 + 0.01 / 2.0 - 0.001 / 6.0 + 0.0001 / 24.0;
        assert!((y[0] - series).abs() < 1e-15);
        assert!((y[0] - 0.9048375).abs() < 1e-7);
    }

    #[test]
    fn zero_rhs_leaves_state_unchanged() {
        let sys = Linear(vec![vec![0.0; 3]; 3]);
        let mut y = vec![0.3, -1.0, 2.0];
        let c = TimeConfig::new(1.0, 0.1).unwrap();
        let t = integrate(&sys, &mut y, &c, |_, _, _| {}).unwrap();
        assert_eq!(y, vec![0.3, -1.0, 2.0]);
        assert_eq!(t, 1.0);
    }

    #[test]
    fn divergence_is_reported_with_step() {
        let sys = Linear(vec![vec![100.0]]);
        let mut y = vec![1.0];
        let c = TimeConfig::new(10.0, 0.1).unwrap();
        match integrate(&sys, &mut y, &c, |_, _, _| {}) {
            Err(SolverError::Divergence { step, .. }) => assert!(step > 1 && step < 100),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn observer_sees_every_step() {
        let sys = Linear(vec![vec![-1.0]]);
        let mut y = vec![1.0];
        let c = TimeConfig::new(0.25, 0.1).unwrap();
        let mut seen = Vec::new();
        integrate(&sys, &mut y, &c, |i, t, _| seen.push((i, t))).unwrap();
        assert_eq!(seen.len(), 4);
        assert_eq!(seen[3], (3, 0.25));
    }

    #[test]
    fn fourth_order_in_time_on_oscillator() {
        let sys = Linear(vec![vec![0.0, 1.0], vec![-1.0, 0.0]]);
        let err = |dt: f64| {
            let mut y = vec![1.0, 0.0];
            let c = TimeConfig::new(1.0, dt).unwrap();
            integrate(&sys, &mut y, &c, |_, _, _| {}).unwrap();
            ((y[0] - 1f64.cos()).powi(2) + (y[1] + 1f64.sin()).powi(2)).sqrt()
        };
        let ratio = err(0.1) / err(0.05);
        assert!((12.0..=20.0).contains(&ratio), "{ratio}");
    }

    #[test]
    fn fourth_order_in_time_on_traveling_wave() {
        // The CFL step leaves only round-off in time on this mesh, so the
        // probe uses much larger steps against a CFL-step reference.
        let p = PhysicalParams::new(9.8, 1.0, 0.0).unwrap();
        let w = TravelingWave::new(p, 0.5).unwrap();
        let mesh = build_mesh(0.0, w.wavelength(), 4, 3).unwrap();
        let sys = crate::scheme::SemiDiscreteSystem::new(mesh, Topology::Periodic, p, PenaltySet::conservative())
            .unwrap();
        let y0 = sys.sample(|x| w.perturbation(x, 0.0));
        let dt0 = cfl_step(sys.mesh().dx(), 3, 0.1);
        let run = |dt: f64| {
            let mut y = y0.clone();
            let c = TimeConfig::new(0.01, dt).unwrap();
            let t = integrate(&sys, &mut y, &c, |_, _, _| {}).unwrap();
            assert_eq!(t, 0.01);
            y
        };
        let reference = run(dt0);
        let e = |y: Vec<f64>| y.iter().zip(&reference).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        let (e1, e2) = (e(run(64.0 * dt0)), e(run(32.0 * dt0)));
        let ratio = e1 / e2;
        assert!((12.0..=20.0).contains(&ratio), "{e1} {e2} {ratio}");
    }
}
