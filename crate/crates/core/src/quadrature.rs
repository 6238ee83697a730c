//! Legendre–Gauss–Lobatto (LGL) quadrature and Lagrange interpolation on the
//! reference element [-1, 1].
//!
//! Nodes and weights are indexed from zero: node `j` of a degree-`P` rule is
//! `nodes[j]`, `j = 0..=P`, with `nodes[0] = -1` and `nodes[P] = 1`.

use crate::error::{config_err, Result};

pub const MAX_DEGREE: usize = 32;

const NEWTON_TOL: f64 = 1e-14;
const NEWTON_MAX_ITER: usize = 100;

/// LGL nodes and weights for polynomial degree `P`.
#[derive(Debug, Clone, PartialEq)]
pub struct LglRule {
    degree: usize,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    /// Barycentric weights `1 / prod_{k != j} (x_j - x_k)`.
    bary: Vec<f64>,
}

/// Legendre polynomial `L_p(x)` and its derivative, by the three-term
/// recurrence.
pub fn legendre(p: usize, x: f64) -> (f64, f64) {
    if p == 0 {
        return (1.0, 0.0);
    }
    let (mut l_prev, mut l) = (1.0, x);
    let (mut dl_prev, mut dl) = (0.0, 1.0);
    for k in 1..p {
        let kf = k as f64;
        let l_next = ((2.0 * kf + 1.0) * x * l - kf * l_prev) / (kf + 1.0);
        let dl_next = dl_prev + (2.0 * kf + 1.0) * l;
        l_prev = l;
        l = l_next;
        dl_prev = dl;
        dl = dl_next;
    }
    (l, dl)
}

/// `(1 - x^2) L_p'(x)`, whose roots are the LGL nodes.
pub fn lobatto_residual(p: usize, x: f64) -> f64 {
    (1.0 - x * x) * legendre(p, x).1
}

fn newton_root(p: usize, guess: f64) -> Option<f64> {
    let pp1 = (p * (p + 1)) as f64;
    let mut x = guess;
    for _ in 0..NEWTON_MAX_ITER {
        let (l, dl) = legendre(p, x);
        // Legendre ODE: (1 - x^2) L'' = 2x L' - p(p+1) L.
        let d2l = (2.0 * x * dl - pp1 * l) / (1.0 - x * x);
        if d2l == 0.0 || !d2l.is_finite() {
            return None;
        }
        let step = dl / d2l;
        x -= step;
        if !(x > -1.0 && x < 1.0) {
            return None;
        }
        if step.abs() <= NEWTON_TOL {
            return Some(x);
        }
    }
    None
}

fn bisect(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let mut fa = f(a);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        let fm = f(m);
        if fm == 0.0 || (b - a) <= NEWTON_TOL * 0.5 {
            return m;
        }
        if (fa < 0.0) == (fm < 0.0) {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

/// Interior roots of `L_p'` in `(-1, 0]` found by scanning for sign changes.
fn bracketed_roots(p: usize) -> Vec<f64> {
    let f = |x: f64| legendre(p, x).1;
    let samples = 64 * p;
    let mut roots = Vec::new();
    let mut a = -1.0 + 1e-12;
    let mut fa = f(a);
    for s in 1..=samples {
        let b = -1.0 + (s as f64) / (samples as f64) * (1.0 + 1e-9);
        let fb = f(b);
        if fb == 0.0 {
            roots.push(b);
        } else if (fa < 0.0) != (fb < 0.0) {
            roots.push(bisect(f, a, b));
        }
        a = b;
        fa = fb;
    }
    roots
}

impl LglRule {
    pub fn new(degree: usize) -> Result<Self> {
        if !(1..=MAX_DEGREE).contains(&degree) {
            return config_err(format!(
                "LGL degree must lie in 1..={MAX_DEGREE}, got {degree}"
            ));
        }
        let p = degree;
        let mut nodes = vec![0.0; p + 1];
        nodes[0] = -1.0;
        nodes[p] = 1.0;
        // Negative half by Newton from Chebyshev–Gauss–Lobatto guesses;
        // the positive half is mirrored so the rule is exactly symmetric.
        let half = (p - 1) / 2;
        let mut newton_ok = true;
        for j in 1..=half {
            let guess = -(std::f64::consts::PI * j as f64 / p as f64).cos();
            match newton_root(p, guess) {
                Some(x) if x < 0.0 => nodes[j] = x,
                _ => {
                    newton_ok = false;
                    break;
                }
            }
        }
        let strictly_increasing = nodes[..=half].windows(2).all(|w| w[0] < w[1]);
        if !newton_ok || !strictly_increasing {
            let roots = bracketed_roots(p);
            for j in 1..=half {
                nodes[j] = roots[j - 1];
            }
        }
        for j in 1..=half {
            nodes[p - j] = -nodes[j];
        }
        if p % 2 == 0 {
            nodes[p / 2] = 0.0;
        }
        let pp1 = (p * (p + 1)) as f64;
        let weights = nodes
            .iter()
            .map(|&x| {
                let l = legendre(p, x).0;
                2.0 / (pp1 * l * l)
            })
            .collect();
        let bary = (0..=p)
            .map(|j| {
                let prod: f64 = (0..=p)
                    .filter(|&k| k != j)
                    .map(|k| nodes[j] - nodes[k])
                    .product();
                1.0 / prod
            })
            .collect();
        Ok(Self {
            degree,
            nodes,
            weights,
            bary,
        })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn len(&self) -> usize {
        self.degree + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn barycentric_weights(&self) -> &[f64] {
        &self.bary
    }

    /// `sum_j w_j f(x_j)`.
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }

    /// Lagrange cardinal function `l_j(x)` in barycentric form.
    pub fn lagrange_eval(&self, j: usize, x: f64) -> f64 {
        assert!(j <= self.degree, "basis index {j} out of range");
        if let Some(k) = self.nodes.iter().position(|&xk| xk == x) {
            return if k == j { 1.0 } else { 0.0 };
        }
        let denom: f64 = self
            .nodes
            .iter()
            .zip(&self.bary)
            .map(|(&xk, &wk)| wk / (x - xk))
            .sum();
        self.bary[j] / (x - self.nodes[j]) / denom
    }

    /// `l_j'(x_i)` for all node pairs, row `i`, column `j`. The diagonal is
    /// set from the negative row sum so constants differentiate to zero.
    pub fn derivative_at_nodes(&self) -> Vec<Vec<f64>> {
        let n = self.len();
        let mut d = vec![vec![0.0; n]; n];
        for i in 0..n {
            let mut diag = 0.0;
            for j in 0..n {
                if i != j {
                    let v = self.bary[j] / self.bary[i] / (self.nodes[i] - self.nodes[j]);
                    d[i][j] = v;
                    diag -= v;
                }
            }
            d[i][i] = diag;
        }
        d
    }
}

/// Shorthand for [`LglRule::new`].
pub fn lgl_rule(degree: usize) -> Result<LglRule> {
    LglRule::new(degree)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn degree_one_is_endpoints() {
        let r = lgl_rule(1).unwrap();
        assert_eq!(r.nodes(), &[-1.0, 1.0]);
        assert_eq!(r.weights(), &[1.0, 1.0]);
    }

    #[test]
    fn degree_two_matches_moment_solution() {
        // Moment conditions sum w_j x_j^k = int x^k for k = 0..2 on the
        // symmetric stencil {-1, 0, 1}: w_0 = w_2 = 1/3, w_1 = 4/3.
        let r = lgl_rule(2).unwrap();
        assert_eq!(r.nodes(), &[-1.0, 0.0, 1.0]);
        let expect = [1.0 / 3.0, 4.0 / 3.0, 1.0 / 3.0];
        for (w, e) in r.weights().iter().zip(expect) {
            assert!((w - e).abs() < 1e-15);
        }
    }

    #[test]
    fn degree_four_interior_nodes_match_bisection() {
        // Independent oracle: bisection on L_4'(x) = (35x^3 - 15x)/2 directly.
        let dl4 = |x: f64| (35.0 * x.powi(3) - 15.0 * x) / 2.0;
        let root = bisect(dl4, 0.3, 0.9);
        assert!((root - (3.0f64 / 7.0).sqrt()).abs() < 1e-14);
        let r = lgl_rule(4).unwrap();
        assert!((r.nodes()[3] - root).abs() < 1e-14);
        assert!((r.nodes()[1] + root).abs() < 1e-14);
        assert_eq!(r.nodes()[2], 0.0);
    }

    #[test]
    fn rejects_out_of_range_degree() {
        assert!(lgl_rule(0).is_err());
        assert!(lgl_rule(33).is_err());
    }

    #[test]
    fn rule_invariants_hold_up_to_max_degree() {
        for p in 1..=MAX_DEGREE {
            let r = lgl_rule(p).unwrap();
            let x = r.nodes();
            assert_eq!(x[0], -1.0);
            assert_eq!(x[p], 1.0);
            assert!(x.windows(2).all(|w| w[0] < w[1]), "P={p}");
            for j in 0..=p {
                assert!((x[j] + x[p - j]).abs() <= 1e-14);
            }
            assert!(r.weights().iter().all(|&w| w > 0.0));
            let sum: f64 = r.weights().iter().sum();
            assert!((sum - 2.0).abs() <= 1e-13, "P={p}: sum {sum}");
            for &xi in &x[1..p] {
                let res = lobatto_residual(p, xi).abs();
                assert!(res <= 1e-14 * (1.0 + (p * p) as f64), "P={p}: residual {res:e}");
            }
        }
    }

    #[test]
    fn newton_nodes_reach_machine_residual_at_moderate_degree() {
        for p in 1..=12 {
            let r = lgl_rule(p).unwrap();
            for &xi in r.nodes() {
                assert!(lobatto_residual(p, xi).abs() <= 1e-14, "P={p}");
            }
        }
    }

    #[test]
    fn quadrature_exact_to_degree_2p_minus_1() {
        for p in 1..=16 {
            let r = lgl_rule(p).unwrap();
            for k in 0..=(2 * p - 1) {
                let exact = if k % 2 == 1 { 0.0 } else { 2.0 / (k as f64 + 1.0) };
                let q = r.integrate(|x| x.powi(k as i32));
                assert!((q - exact).abs() <= 1e-12, "P={p} k={k}: {q} vs {exact}");
            }
        }
    }

    #[test]
    fn lagrange_examples() {
        let r = lgl_rule(2).unwrap();
        assert_eq!(r.lagrange_eval(1, 0.0), 1.0);
        assert_eq!(r.lagrange_eval(0, 0.0), 0.0);
        // l_1(x) = 1 - x^2 on {-1, 0, 1}.
        assert!((r.lagrange_eval(1, 0.5) - 0.75).abs() < 1e-15);
    }

    #[test]
    fn lagrange_partition_of_unity() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for p in 1..=8 {
            let r = lgl_rule(p).unwrap();
            for _ in 0..20 {
                let x: f64 = rng.gen_range(-1.0..=1.0);
                let s: f64 = (0..=p).map(|j| r.lagrange_eval(j, x)).sum();
                assert!((s - 1.0).abs() <= 1e-13, "P={p} x={x}: {s}");
            }
        }
    }

    #[test]
    fn lagrange_is_cardinal_at_nodes() {
        let r = lgl_rule(6).unwrap();
        for i in 0..=6 {
            for j in 0..=6 {
                let v = r.lagrange_eval(j, r.nodes()[i]);
                assert_eq!(v, if i == j { 1.0 } else { 0.0 });
            }
        }
    }
}
