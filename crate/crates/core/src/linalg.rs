//! Small dense and banded linear algebra used by the operators and the
//! implicit velocity solve.

use std::ops::{Index, IndexMut};

use crate::error::{Result, SolverError};

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|x| x * s).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scaled(-1.0))
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows);
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                let orow = &other.data[k * other.cols..(k + 1) * other.cols];
                let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (d, b) in dst.iter_mut().zip(orow) {
                    *d += a * b;
                }
            }
        }
        out
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.rows];
        self.matvec_into(x, &mut y);
        y
    }

    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.cols);
        assert_eq!(y.len(), self.rows);
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = dot(self.row(i), x);
        }
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    /// Row-sum (infinity) norm.
    pub fn norm_inf(&self) -> f64 {
        (0..self.rows)
            .map(|i| self.row(i).iter().map(|x| x.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Dense LU factorization with partial pivoting.
#[derive(Debug, Clone)]
pub struct DenseLu {
    lu: Matrix,
    perm: Vec<usize>,
}

impl DenseLu {
    pub fn factor(a: &Matrix, min_pivot: f64) -> Result<Self> {
        assert_eq!(a.rows(), a.cols(), "LU needs a square matrix");
        let n = a.rows();
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let (p, pmax) = (k..n)
                .map(|i| (i, lu[(i, k)].abs()))
                .fold((k, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
            if pmax <= min_pivot {
                return Err(SolverError::Singular { row: k, pivot: pmax });
            }
            if p != k {
                perm.swap(p, k);
                for j in 0..n {
                    let tmp = lu[(k, j)];
                    lu[(k, j)] = lu[(p, j)];
                    lu[(p, j)] = tmp;
                }
            }
            let piv = lu[(k, k)];
            for i in k + 1..n {
                let l = lu[(i, k)] / piv;
                lu[(i, k)] = l;
                if l != 0.0 {
                    for j in k + 1..n {
                        let ukj = lu[(k, j)];
                        lu[(i, j)] -= l * ukj;
                    }
                }
            }
        }
        Ok(Self { lu, perm })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.lu.rows();
        assert_eq!(b.len(), n);
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let s: f64 = (0..i).map(|j| self.lu[(i, j)] * x[j]).sum();
            x[i] -= s;
        }
        for i in (0..n).rev() {
            let s: f64 = (i + 1..n).map(|j| self.lu[(i, j)] * x[j]).sum();
            x[i] = (x[i] - s) / self.lu[(i, i)];
        }
        x
    }
}

/// LU factorization of a banded matrix without pivoting, after a symmetric
/// row/column permutation that reduces the bandwidth.
///
/// Only valid for matrices whose leading principal minors are all nonzero
/// (e.g. a positive diagonal scaling of an SPD matrix).
#[derive(Debug, Clone)]
pub struct BandedLu {
    n: usize,
    lower: usize,
    upper: usize,
    /// `perm[new] = old`.
    perm: Vec<usize>,
    /// Row-major band storage, `lower + upper + 1` entries per row; entry
    /// (i, j) lives at `i * width + (j + lower - i)`.
    band: Vec<f64>,
    min_pivot: f64,
    max_pivot: f64,
}

impl BandedLu {
    /// Build from a column oracle: `column(j, out)` writes column `j` of the
    /// unpermuted matrix into `out`.
    pub fn from_columns(
        n: usize,
        perm: Vec<usize>,
        pivot_floor: f64,
        mut column: impl FnMut(usize, &mut [f64]),
    ) -> Result<Self> {
        assert_eq!(perm.len(), n);
        let mut inv = vec![0; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        // First pass: pattern and bandwidths.
        let mut cols: Vec<Vec<(usize, f64)>> = Vec::with_capacity(n);
        let mut buf = vec![0.0; n];
        let (mut lower, mut upper) = (0usize, 0usize);
        for new_j in 0..n {
            buf.iter_mut().for_each(|x| *x = 0.0);
            column(perm[new_j], &mut buf);
            let mut entries = Vec::new();
            for (old_i, &v) in buf.iter().enumerate() {
                if v != 0.0 {
                    let new_i = inv[old_i];
                    if new_i > new_j {
                        lower = lower.max(new_i - new_j);
                    } else {
                        upper = upper.max(new_j - new_i);
                    }
                    entries.push((new_i, v));
                }
            }
            cols.push(entries);
        }
        let width = lower + upper + 1;
        let mut band = vec![0.0; n * width];
        for (j, entries) in cols.iter().enumerate() {
            for &(i, v) in entries {
                band[i * width + (j + lower - i)] = v;
            }
        }
        let mut lu = Self {
            n,
            lower,
            upper,
            perm,
            band,
            min_pivot: f64::INFINITY,
            max_pivot: 0.0,
        };
        lu.factor(pivot_floor)?;
        Ok(lu)
    }

    fn factor(&mut self, pivot_floor: f64) -> Result<()> {
        let (n, kl, ku) = (self.n, self.lower, self.upper);
        let w = kl + ku + 1;
        for k in 0..n {
            let piv = self.band[k * w + kl];
            if !(piv.abs() > pivot_floor) {
                return Err(SolverError::Singular { row: k, pivot: piv.abs() });
            }
            self.min_pivot = self.min_pivot.min(piv.abs());
            self.max_pivot = self.max_pivot.max(piv.abs());
            let jmax = (k + ku).min(n - 1);
            for i in k + 1..=(k + kl).min(n - 1) {
                let idx = i * w + (k + kl - i);
                let l = self.band[idx] / piv;
                self.band[idx] = l;
                if l == 0.0 {
                    continue;
                }
                for j in k + 1..=jmax {
                    let ukj = self.band[k * w + (j + kl - k)];
                    self.band[i * w + (j + kl - i)] -= l * ukj;
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidths(&self) -> (usize, usize) {
        (self.lower, self.upper)
    }

    /// Smallest and largest pivot magnitudes met during factorization.
    pub fn pivot_range(&self) -> (f64, f64) {
        (self.min_pivot, self.max_pivot)
    }

    /// Solve `A x = b`; `scratch` must have length `n`.
    pub fn solve_into(&self, b: &[f64], x: &mut [f64], scratch: &mut [f64]) {
        let (n, kl, ku) = (self.n, self.lower, self.upper);
        let w = kl + ku + 1;
        debug_assert_eq!(b.len(), n);
        for (new, &old) in self.perm.iter().enumerate() {
            scratch[new] = b[old];
        }
        for i in 0..n {
            let j0 = i.saturating_sub(kl);
            let row = &self.band[i * w + j0 + kl - i..i * w + kl];
            let s: f64 = row.iter().zip(&scratch[j0..i]).map(|(a, b)| a * b).sum();
            scratch[i] -= s;
        }
        for i in (0..n).rev() {
            let j1 = (i + ku).min(n - 1);
            let row = &self.band[i * w + kl + 1..i * w + kl + 1 + (j1 - i)];
            let s: f64 = row.iter().zip(&scratch[i + 1..=j1]).map(|(a, b)| a * b).sum();
            scratch[i] = (scratch[i] - s) / self.band[i * w + kl];
        }
        for (new, &old) in self.perm.iter().enumerate() {
            x[old] = scratch[new];
        }
    }
}

/// Eigenvalues of a real symmetric 3x3 matrix in ascending order, from the
/// trigonometric solution of the characteristic cubic.
pub fn symmetric_eigenvalues_3x3(a: [[f64; 3]; 3]) -> [f64; 3] {
    let p1 = a[0][1].powi(2) + a[0][2].powi(2) + a[1][2].powi(2);
    let q = (a[0][0] + a[1][1] + a[2][2]) / 3.0;
    if p1 == 0.0 {
        let mut d = [a[0][0], a[1][1], a[2][2]];
        d.sort_by(|x, y| x.total_cmp(y));
        return d;
    }
    let p2 = (a[0][0] - q).powi(2) + (a[1][1] - q).powi(2) + (a[2][2] - q).powi(2) + 2.0 * p1;
    let p = (p2 / 6.0).sqrt();
    let mut b = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            b[i][j] = (a[i][j] - if i == j { q } else { 0.0 }) / p;
        }
    }
    let det_b = b[0][0] * (b[1][1] * b[2][2] - b[1][2] * b[2][1])
        - b[0][1] * (b[1][0] * b[2][2] - b[1][2] * b[2][0])
        + b[0][2] * (b[1][0] * b[2][1] - b[1][1] * b[2][0]);
    let r = (det_b / 2.0).clamp(-1.0, 1.0);
    let phi = r.acos() / 3.0;
    let largest = q + 2.0 * p * phi.cos();
    let smallest = q + 2.0 * p * (phi + 2.0 * std::f64::consts::PI / 3.0).cos();
    let middle = 3.0 * q - largest - smallest;
    [smallest, middle, largest]
}
