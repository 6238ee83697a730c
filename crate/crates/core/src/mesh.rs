//! Uniform 1D mesh of LGL spectral elements and the global block operators.
//!
//! Global vectors store element nodes consecutively, so interface nodes are
//! duplicated: the last node of element `k` and the first node of element
//! `k + 1` are separate degrees of freedom. Each interface carries its own
//! jump operator `B_i`, and the penalized derivative is
//! `D~ = D - 1/2 M^{-1} sum_i B_i`.

use crate::error::{check_len, config_err, Result};
use crate::linalg::Matrix;
use crate::operators::{to_physical, PhysicalOperators, ReferenceOperators};
use crate::quadrature::LglRule;

/// Uniform partition of `[x_left, x_right]` into elements with LGL nodes.
#[derive(Debug, Clone)]
pub struct Mesh {
    x_left: f64,
    x_right: f64,
    n_elements: usize,
    degree: usize,
    dx: f64,
    nodes: Vec<f64>,
}

impl Mesh {
    pub fn x_left(&self) -> f64 {
        self.x_left
    }

    pub fn x_right(&self) -> f64 {
        self.x_right
    }

    pub fn n_elements(&self) -> usize {
        self.n_elements
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn nodes_per_element(&self) -> usize {
        self.degree + 1
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn ndof(&self) -> usize {
        self.nodes.len()
    }

    /// Global node coordinates, element by element.
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn element_nodes(&self, k: usize) -> &[f64] {
        let n = self.nodes_per_element();
        &self.nodes[k * n..(k + 1) * n]
    }

    /// Left end `x_k` of element `k` (`k = n_elements` gives `x_right`).
    pub fn element_left(&self, k: usize) -> f64 {
        if k == self.n_elements {
            self.x_right
        } else {
            self.x_left + (self.x_right - self.x_left) * (k as f64) / (self.n_elements as f64)
        }
    }

    pub fn domain_length(&self) -> f64 {
        self.x_right - self.x_left
    }
}

pub fn build_mesh(x_left: f64, x_right: f64, n_elements: usize, degree: usize) -> Result<Mesh> {
    if !(x_left.is_finite() && x_right.is_finite() && x_right > x_left) {
        return config_err(format!("degenerate domain [{x_left}, {x_right}]"));
    }
    if n_elements == 0 {
        return config_err("element count must be at least 1");
    }
    let rule = LglRule::new(degree)?;
    let mut mesh = Mesh {
        x_left,
        x_right,
        n_elements,
        degree,
        dx: (x_right - x_left) / n_elements as f64,
        nodes: Vec::with_capacity(n_elements * (degree + 1)),
    };
    for k in 0..n_elements {
        let (a, b) = (mesh.element_left(k), mesh.element_left(k + 1));
        for (j, &xi) in rule.nodes().iter().enumerate() {
            // Endpoints are pinned so neighbours share the interface coordinate.
            let x = if j == 0 {
                a
            } else if j == degree {
                b
            } else {
                a + (b - a) / 2.0 * (xi + 1.0)
            };
            mesh.nodes.push(x);
        }
    }
    Ok(mesh)
}

/// How the outer ends of the domain are closed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Topology {
    /// The right end of the last element is coupled to the left end of the
    /// first through one extra (wrap) interface.
    Periodic,
    /// Outer ends are left open for boundary SATs.
    Bounded,
}

/// Pair of duplicated degrees of freedom meeting at an interface: `minus` is
/// the last node of the left element, `plus` the first node of the right.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Interface {
    pub minus: usize,
    pub plus: usize,
}

/// Assembled block operators on the whole mesh.
#[derive(Debug, Clone)]
pub struct GlobalOperators {
    topology: Topology,
    n_elements: usize,
    npe: usize,
    element: PhysicalOperators,
    mass: Vec<f64>,
    mass_inv: Vec<f64>,
    interfaces: Vec<Interface>,
}

pub fn assemble_global(
    mesh: &Mesh,
    reference: &ReferenceOperators,
    topology: Topology,
) -> Result<GlobalOperators> {
    if reference.degree() != mesh.degree() {
        return config_err(format!(
            "operator degree {} does not match mesh degree {}",
            reference.degree(),
            mesh.degree()
        ));
    }
    let element = to_physical(reference, mesh.dx())?;
    let npe = mesh.nodes_per_element();
    let n = mesh.n_elements();
    let mass: Vec<f64> = (0..n).flat_map(|_| element.mass().iter().copied()).collect();
    let mass_inv = mass.iter().map(|m| 1.0 / m).collect();
    let mut interfaces: Vec<Interface> = (0..n.saturating_sub(1))
        .map(|k| Interface {
            minus: k * npe + npe - 1,
            plus: (k + 1) * npe,
        })
        .collect();
    if topology == Topology::Periodic {
        interfaces.push(Interface {
            minus: n * npe - 1,
            plus: 0,
        });
    }
    Ok(GlobalOperators {
        topology,
        n_elements: n,
        npe,
        element,
        mass,
        mass_inv,
        interfaces,
    })
}

impl GlobalOperators {
    pub fn topology(&self) -> Topology {
        self.topology
    }

    pub fn ndof(&self) -> usize {
        self.mass.len()
    }

    pub fn n_elements(&self) -> usize {
        self.n_elements
    }

    pub fn nodes_per_element(&self) -> usize {
        self.npe
    }

    pub fn element(&self) -> &PhysicalOperators {
        &self.element
    }

    /// Diagonal of the block mass matrix.
    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn mass_inv(&self) -> &[f64] {
        &self.mass_inv
    }

    pub fn interfaces(&self) -> &[Interface] {
        &self.interfaces
    }

    /// Index of the first global node (left lift `e_L`).
    pub fn left_node(&self) -> usize {
        0
    }

    /// Index of the last global node (right lift `e_R`).
    pub fn right_node(&self) -> usize {
        self.ndof() - 1
    }

    /// `<u, v>_M`.
    pub fn inner(&self, u: &[f64], v: &[f64]) -> f64 {
        u.iter().zip(v).zip(&self.mass).map(|((a, b), m)| a * b * m).sum()
    }

    /// `v+ - v-` at interface `i`.
    pub fn jump(&self, v: &[f64], i: usize) -> f64 {
        let f = self.interfaces[i];
        v[f.plus] - v[f.minus]
    }

    /// `out = D v` with the block-diagonal element derivative.
    pub fn apply_block(&self, v: &[f64], out: &mut [f64]) {
        let n = self.npe;
        let d = self.element.diff();
        for (vin, vout) in v.chunks_exact(n).zip(out.chunks_exact_mut(n)) {
            for (i, o) in vout.iter_mut().enumerate() {
                let row = d.row(i);
                let mut s = 0.0;
                for (a, b) in row.iter().zip(vin) {
                    s += a * b;
                }
                *o = s;
            }
        }
    }

    /// `out = D^T v` (block transpose).
    pub fn apply_block_transpose(&self, v: &[f64], out: &mut [f64]) {
        let n = self.npe;
        let d = self.element.diff();
        for (vin, vout) in v.chunks_exact(n).zip(out.chunks_exact_mut(n)) {
            vout.iter_mut().for_each(|x| *x = 0.0);
            for (i, &vi) in vin.iter().enumerate() {
                for (o, a) in vout.iter_mut().zip(d.row(i)) {
                    *o += a * vi;
                }
            }
        }
    }

    /// `out += s * sum_i B_i v`. Each `B_i` writes `v- - v+` to both slots.
    pub fn add_interface(&self, v: &[f64], s: f64, out: &mut [f64]) {
        for f in &self.interfaces {
            let j = s * (v[f.minus] - v[f.plus]);
            out[f.minus] += j;
            out[f.plus] += j;
        }
    }

    /// `out += s * sum_i B_i^T v`.
    pub fn add_interface_transpose(&self, v: &[f64], s: f64, out: &mut [f64]) {
        for f in &self.interfaces {
            let w = s * (v[f.minus] + v[f.plus]);
            out[f.minus] += w;
            out[f.plus] -= w;
        }
    }

    /// `out = D~ v = D v - 1/2 M^{-1} sum_i B_i v`.
    pub fn apply_penalized(&self, v: &[f64], out: &mut [f64]) {
        self.apply_block(v, out);
        for f in &self.interfaces {
            let j = 0.5 * (v[f.minus] - v[f.plus]);
            out[f.minus] -= j * self.mass_inv[f.minus];
            out[f.plus] -= j * self.mass_inv[f.plus];
        }
    }

    /// `out = D~^T v = D^T v - 1/2 sum_i B_i^T M^{-1} v`.
    pub fn apply_penalized_transpose(&self, v: &[f64], out: &mut [f64]) {
        self.apply_block_transpose(v, out);
        for f in &self.interfaces {
            let w = 0.5 * (v[f.minus] * self.mass_inv[f.minus] + v[f.plus] * self.mass_inv[f.plus]);
            out[f.minus] -= w;
            out[f.plus] += w;
        }
    }

    /// `out += (s/2) M^{-1} sum_i B_i^T B_i v`: the upwind jump dissipation,
    /// scaled so that `<v, out>_M` changes by `s [v]^2` per interface.
    pub fn add_jump_dissipation(&self, v: &[f64], s: f64, out: &mut [f64]) {
        for f in &self.interfaces {
            let j = s * (v[f.minus] - v[f.plus]);
            out[f.minus] += j * self.mass_inv[f.minus];
            out[f.plus] -= j * self.mass_inv[f.plus];
        }
    }

    /// Checked version of [`apply_penalized`](Self::apply_penalized).
    pub fn penalized(&self, v: &[f64]) -> Result<Vec<f64>> {
        check_len(self.ndof(), v.len())?;
        let mut out = vec![0.0; v.len()];
        self.apply_penalized(v, &mut out);
        Ok(out)
    }

    pub fn block_matrix(&self) -> Matrix {
        let n = self.ndof();
        let d = self.element.diff();
        Matrix::from_fn(n, n, |i, j| {
            if i / self.npe == j / self.npe {
                d[(i % self.npe, j % self.npe)]
            } else {
                0.0
            }
        })
    }

    pub fn mass_matrix(&self) -> Matrix {
        Matrix::from_diagonal(&self.mass)
    }

    pub fn mass_inv_matrix(&self) -> Matrix {
        Matrix::from_diagonal(&self.mass_inv)
    }

    /// Dense `B_i` for one interface.
    pub fn interface_matrix(&self, i: usize) -> Matrix {
        let f = self.interfaces[i];
        let mut b = Matrix::zeros(self.ndof(), self.ndof());
        b[(f.minus, f.minus)] += 1.0;
        b[(f.minus, f.plus)] -= 1.0;
        b[(f.plus, f.minus)] += 1.0;
        b[(f.plus, f.plus)] -= 1.0;
        b
    }

    /// Dense `sum_i B_i`.
    pub fn interface_sum_matrix(&self) -> Matrix {
        let mut b = Matrix::zeros(self.ndof(), self.ndof());
        for i in 0..self.interfaces.len() {
            b = b.add(&self.interface_matrix(i));
        }
        b
    }

    pub fn penalized_matrix(&self) -> Matrix {
        self.block_matrix()
            .sub(&self.mass_inv_matrix().matmul(&self.interface_sum_matrix()).scaled(0.5))
    }

    /// Ordering of the degrees of freedom that keeps coupled elements close:
    /// natural order when bounded, alternating ends (0, N-1, 1, N-2, ...)
    /// when periodic so the wrap interface stays inside a narrow band.
    /// Returns `perm[new] = old`.
    pub fn band_ordering(&self) -> Vec<usize> {
        let n = self.n_elements;
        let order: Vec<usize> = match self.topology {
            Topology::Bounded => (0..n).collect(),
            Topology::Periodic => {
                let mut order = Vec::with_capacity(n);
                let (mut lo, mut hi) = (0usize, n - 1);
                loop {
                    order.push(lo);
                    if lo == hi {
                        break;
                    }
                    order.push(hi);
                    lo += 1;
                    if lo > hi - 1 {
                        break;
                    }
                    hi -= 1;
                }
                order
            }
        };
        order
            .into_iter()
            .flat_map(|k| (k * self.npe)..((k + 1) * self.npe))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::norm_inf;
    use crate::operators::build_reference_operators;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn setup(n: usize, p: usize, topology: Topology) -> (Mesh, GlobalOperators) {
        let mesh = build_mesh(0.0, 1.3, n, p).unwrap();
        let r = build_reference_operators(p).unwrap();
        let ops = assemble_global(&mesh, &r, topology).unwrap();
        (mesh, ops)
    }

    fn random(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
    }

    #[test]
    fn linear_two_element_nodes() {
        let mesh = build_mesh(0.0, 1.0, 2, 1).unwrap();
        assert_eq!(mesh.element_nodes(0), &[0.0, 0.5]);
        assert_eq!(mesh.element_nodes(1), &[0.5, 1.0]);
    }

    #[test]
    fn element_length_for_periodic_wave_domain() {
        // omega = sqrt(3 (9.8 - 0.25)) / 0.5 for g = 9.8, H = 1, c = 0.5, U = 0.
        let omega = (3.0f64 * (9.8 - 0.25)).sqrt() / 0.5;
        assert!((omega - 10.70514).abs() < 1e-5);
        let mesh = build_mesh(0.0, 2.0 * std::f64::consts::PI / omega, 20, 4).unwrap();
        assert!((mesh.dx() - 0.0293466).abs() < 1e-7);
        assert!((mesh.dx() - 2.0 * std::f64::consts::PI / (20.0 * omega)).abs() < 1e-15);
    }

    #[test]
    fn gaussian_test_dof_count() {
        let mesh = build_mesh(-5.0, 5.0, 16, 8).unwrap();
        assert_eq!(mesh.ndof(), 144);
    }

    #[test]
    fn rejects_degenerate_domains() {
        assert!(build_mesh(1.0, 1.0, 4, 2).is_err());
        assert!(build_mesh(2.0, 1.0, 4, 2).is_err());
        assert!(build_mesh(0.0, 1.0, 0, 2).is_err());
        assert!(build_mesh(0.0, 1.0, 4, 0).is_err());
    }

    #[test]
    fn affine_map_endpoints_and_shared_interfaces() {
        let mesh = build_mesh(-0.7, 2.3, 7, 5).unwrap();
        for k in 0..7 {
            let nodes = mesh.element_nodes(k);
            let xk = -0.7 + 3.0 * k as f64 / 7.0;
            assert!((nodes[0] - xk).abs() <= 1e-14 * 3.0);
            assert!(nodes.windows(2).all(|w| w[0] < w[1]));
            if k + 1 < 7 {
                assert_eq!(nodes[5], mesh.element_nodes(k + 1)[0]);
            }
        }
        assert_eq!(mesh.nodes()[0], -0.7);
        assert_eq!(*mesh.nodes().last().unwrap(), 2.3);
    }

    #[test]
    fn interface_operator_annihilates_continuous_data() {
        for topology in [Topology::Periodic, Topology::Bounded] {
            let (mesh, ops) = setup(5, 3, topology);
            let period = 2.0 * std::f64::consts::PI / 1.3;
            let v: Vec<f64> = mesh.nodes().iter().map(|x| (period * x).sin()).collect();
            let mut out = vec![0.0; v.len()];
            ops.add_interface(&v, 1.0, &mut out);
            assert!(norm_inf(&out) <= 1e-14);
            let mut block = vec![0.0; v.len()];
            ops.apply_block(&v, &mut block);
            let pen = ops.penalized(&v).unwrap();
            let diff: Vec<f64> = pen.iter().zip(&block).map(|(a, b)| a - b).collect();
            assert!(norm_inf(&diff) <= 1e-12);
        }
    }

    #[test]
    fn penalized_derivative_of_constant_is_zero() {
        for topology in [Topology::Periodic, Topology::Bounded] {
            let (_, ops) = setup(6, 4, topology);
            let out = ops.penalized(&vec![1.0; ops.ndof()]).unwrap();
            assert!(norm_inf(&out) <= 1e-12);
        }
    }

    #[test]
    fn two_element_interface_matches_block_form() {
        // B = [[e_R e_R^T, -e_R e_L^T], [e_L e_R^T, -e_L e_L^T]].
        let (_, ops) = setup(2, 3, Topology::Bounded);
        let n = 4;
        let b = ops.interface_matrix(0);
        let mut expect = Matrix::zeros(2 * n, 2 * n);
        expect[(n - 1, n - 1)] = 1.0;
        expect[(n - 1, n)] = -1.0;
        expect[(n, n - 1)] = 1.0;
        expect[(n, n)] = -1.0;
        assert_eq!(b, expect);
        let dt = ops
            .block_matrix()
            .sub(&ops.mass_inv_matrix().matmul(&expect).scaled(0.5));
        assert_eq!(dt, ops.penalized_matrix());
    }

    #[test]
    fn matrix_free_matches_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for topology in [Topology::Periodic, Topology::Bounded] {
            let (_, ops) = setup(4, 3, topology);
            let dense = ops.penalized_matrix();
            let v = random(&mut rng, ops.ndof());
            let a = dense.matvec(&v);
            let b = ops.penalized(&v).unwrap();
            let mut c = vec![0.0; v.len()];
            ops.apply_penalized_transpose(&v, &mut c);
            let d = dense.transpose().matvec(&v);
            for i in 0..v.len() {
                assert!((a[i] - b[i]).abs() < 1e-12);
                assert!((c[i] - d[i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn jump_is_plus_minus_minus() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let (mesh, ops) = setup(3, 2, Topology::Periodic);
        let smooth: Vec<f64> = mesh.nodes().iter().map(|x| x * x).collect();
        assert_eq!(ops.jump(&smooth, 0), 0.0);
        let step: Vec<f64> = (0..ops.ndof()).map(|i| if i >= 3 { 1.0 } else { 0.0 }).collect();
        assert_eq!(ops.jump(&step, 0), 1.0);
        let v = random(&mut rng, ops.ndof());
        for (i, f) in ops.interfaces().iter().enumerate() {
            assert_eq!(ops.jump(&v, i), v[f.plus] - v[f.minus]);
        }
        // Wrap interface couples the last node to the first.
        assert_eq!(ops.interfaces()[2], Interface { minus: 8, plus: 0 });
    }

    #[test]
    fn jump_dissipation_removes_squared_jumps() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for topology in [Topology::Periodic, Topology::Bounded] {
            let (_, ops) = setup(4, 3, topology);
            let v = random(&mut rng, ops.ndof());
            let mut out = vec![0.0; ops.ndof()];
            ops.add_jump_dissipation(&v, 1.0, &mut out);
            let squared: f64 = (0..ops.interfaces().len()).map(|i| ops.jump(&v, i).powi(2)).sum();
            assert!((ops.inner(&v, &out) - squared).abs() < 1e-12);
            let dense = ops.mass_inv_matrix().matmul(&ops.interface_sum_matrix().transpose().matmul(&ops.interface_sum_matrix()));
            let expected = dense.matvec(&v);
            for (a, b) in out.iter().zip(&expected) {
                assert!((a - 0.5 * b).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn penalized_sbp_property() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for (n, p) in [(1, 3), (2, 2), (5, 4), (8, 1)] {
            for topology in [Topology::Periodic, Topology::Bounded] {
                let (_, ops) = setup(n, p, topology);
                for _ in 0..20 {
                    let u = random(&mut rng, ops.ndof());
                    let v = random(&mut rng, ops.ndof());
                    let du = ops.penalized(&u).unwrap();
                    let dv = ops.penalized(&v).unwrap();
                    let lhs = ops.inner(&u, &dv) + ops.inner(&du, &v);
                    let last = ops.right_node();
                    let rhs = match topology {
                        Topology::Periodic => 0.0,
                        Topology::Bounded => u[last] * v[last] - u[0] * v[0],
                    };
                    assert!((lhs - rhs).abs() <= 1e-10, "N={n} P={p} {topology:?}");
                }
            }
        }
    }

    #[test]
    fn mass_is_positive() {
        let (mesh, ops) = setup(3, 5, Topology::Bounded);
        assert!(ops.mass().iter().all(|&m| m > 0.0));
        let total: f64 = ops.mass().iter().sum();
        assert!((total - mesh.domain_length()).abs() < 1e-13);
    }

    #[test]
    fn band_ordering_is_a_permutation() {
        for n in 1..=7 {
            let (_, ops) = setup(n, 2, Topology::Periodic);
            let mut perm = ops.band_ordering();
            perm.sort_unstable();
            assert_eq!(perm, (0..ops.ndof()).collect::<Vec<_>>());
        }
    }
}
