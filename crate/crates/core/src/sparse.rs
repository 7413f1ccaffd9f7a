//! Sparse symmetric matrices and the SPD solver used by every subsystem.

use crate::scalar::Scalar;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("system refused: {0}")]
    Refused(String),
    #[error(
        "conjugate gradients stalled after {iterations} iterations (relative residual {residual:e})"
    )]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("matrix not positive definite (pivot {pivot:e} at row {row})")]
    NotSpd { row: usize, pivot: f64 },
}

/// Compressed sparse row matrix. Patterns are built once per mesh and the
/// value array is refilled on every reassembly.
#[derive(Clone, Debug)]
pub struct CsrMatrix<T> {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<T>,
}

impl<T: Scalar> CsrMatrix<T> {
    /// Build a matrix from a symmetric pattern given as sorted unique column
    /// lists per row; values start at zero.
    pub fn from_pattern(cols_per_row: Vec<Vec<usize>>) -> Self {
        let n = cols_per_row.len();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::new();
        row_ptr.push(0);
        for cols in &cols_per_row {
            debug_assert!(cols.windows(2).all(|w| w[0] < w[1]));
            col_idx.extend_from_slice(cols);
            row_ptr.push(col_idx.len());
        }
        let values = vec![T::zero(); col_idx.len()];
        Self { n, row_ptr, col_idx, values }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: vec![T::one(); n],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn row(&self, i: usize) -> (&[usize], &[T]) {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.col_idx[r.clone()], &self.values[r])
    }

    /// Value slot of entry (i, j), if it is in the pattern.
    pub fn slot(&self, i: usize, j: usize) -> Option<usize> {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[r.clone()]
            .binary_search(&j)
            .ok()
            .map(|k| r.start + k)
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.slot(i, j).map_or(T::zero(), |s| self.values[s])
    }

    pub fn add_at(&mut self, i: usize, j: usize, v: T) {
        let s = self.slot(i, j).expect("entry outside sparsity pattern");
        self.values[s] += v;
    }

    pub fn set_zero(&mut self) {
        for v in &mut self.values {
            *v = T::zero();
        }
    }

    pub fn matvec(&self, x: &[T], y: &mut [T]) {
        debug_assert_eq!(x.len(), self.n);
        for i in 0..self.n {
            let mut acc = T::zero();
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.values[k] * x[self.col_idx[k]];
            }
            y[i] = acc;
        }
    }

    pub fn diagonal(&self) -> Vec<T> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    /// Largest relative asymmetry max |a_ij - a_ji| / max |a_ij|.
    pub fn symmetry_defect(&self) -> T {
        let mut max_entry = T::zero();
        let mut max_gap = T::zero();
        for i in 0..self.n {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let j = self.col_idx[k];
                let a = self.values[k];
                max_entry = max_entry.max(a.abs());
                let b = self.get(j, i);
                max_gap = max_gap.max((a - b).abs());
            }
        }
        if max_entry == T::zero() {
            T::zero()
        } else {
            max_gap / max_entry
        }
    }

    pub fn to_dense(&self) -> Vec<Vec<T>> {
        let mut dense = vec![vec![T::zero(); self.n]; self.n];
        for i in 0..self.n {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                dense[i][self.col_idx[k]] = self.values[k];
            }
        }
        dense
    }

    /// Sum of `alpha * self + beta * other`; both operands must share a pattern.
    pub fn linear_combination(&self, alpha: T, other: &Self, beta: T) -> Self {
        assert_eq!(self.row_ptr, other.row_ptr, "pattern mismatch");
        assert_eq!(self.col_idx, other.col_idx, "pattern mismatch");
        let mut out = self.clone();
        for (o, (&a, &b)) in out
            .values
            .iter_mut()
            .zip(self.values.iter().zip(other.values.iter()))
        {
            *o = alpha * a + beta * b;
        }
        out
    }
}

/// Symmetric system with pointwise constraints kept separate from the matrix,
/// so the same assembled operator serves several boundary conditions.
#[derive(Clone, Debug)]
pub struct SparseSystem<T> {
    pub matrix: CsrMatrix<T>,
    pub rhs: Vec<T>,
    /// (degree of freedom, prescribed value)
    pub constraints: Vec<(usize, T)>,
}

impl<T: Scalar> SparseSystem<T> {
    pub fn unconstrained(matrix: CsrMatrix<T>, rhs: Vec<T>) -> Self {
        Self { matrix, rhs, constraints: Vec::new() }
    }

    /// Eliminate constraints symmetrically: constrained rows/columns become
    /// identity rows with the prescribed value on the right-hand side, and the
    /// coupling moves to the free right-hand side entries.
    pub fn eliminated(&self) -> (CsrMatrix<T>, Vec<T>) {
        let mut a = self.matrix.clone();
        let mut b = self.rhs.clone();
        let n = a.n;
        let mut prescribed = vec![None; n];
        for &(dof, value) in &self.constraints {
            prescribed[dof] = Some(value);
        }
        // move columns to the rhs, then clear rows
        for i in 0..n {
            if prescribed[i].is_some() {
                continue;
            }
            for k in a.row_ptr[i]..a.row_ptr[i + 1] {
                let j = a.col_idx[k];
                if let Some(val) = prescribed[j] {
                    b[i] -= a.values[k] * val;
                    a.values[k] = T::zero();
                }
            }
        }
        for i in 0..n {
            if let Some(val) = prescribed[i] {
                for k in a.row_ptr[i]..a.row_ptr[i + 1] {
                    a.values[k] = if a.col_idx[k] == i { T::one() } else { T::zero() };
                }
                b[i] = val;
            }
        }
        (a, b)
    }
}

/// Solver knobs; the defaults satisfy the library-wide residual contract.
#[derive(Clone, Copy, Debug)]
pub struct SolveOptions<T> {
    /// Target on ||Ax - b|| / ||b||.
    pub rel_tol: T,
    /// Iteration cap as a multiple of the number of unknowns.
    pub max_iter_factor: usize,
}

impl<T: Scalar> Default for SolveOptions<T> {
    fn default() -> Self {
        // 1e-12 in f64; floors at 100 eps so f32 instantiations stay reachable
        let rel_tol = T::cast(1e-12).max(T::epsilon() * T::cast(100.0));
        Self { rel_tol, max_iter_factor: 50 }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct SolveReport<T> {
    pub iterations: usize,
    pub rel_residual: T,
    pub used_dense_fallback: bool,
}

const DENSE_FALLBACK_LIMIT: usize = 3000;

/// Solve a constrained SPD system with Jacobi-preconditioned conjugate
/// gradients; small systems fall back to a dense factorization when the
/// iteration stalls.
pub fn solve_spd<T: Scalar>(
    system: &SparseSystem<T>,
    x0: Option<&[T]>,
    opts: SolveOptions<T>,
) -> Result<(Vec<T>, SolveReport<T>), SolveError> {
    let (a, b) = system.eliminated();
    let n = a.n();
    let mut x = match x0 {
        Some(g) => {
            debug_assert_eq!(g.len(), n);
            let mut x = g.to_vec();
            for &(dof, value) in &system.constraints {
                x[dof] = value;
            }
            x
        }
        None => {
            let mut x = vec![T::zero(); n];
            for &(dof, value) in &system.constraints {
                x[dof] = value;
            }
            x
        }
    };

    match pcg(&a, &b, &mut x, opts) {
        Ok((iters, res)) => Ok((
            x,
            SolveReport { iterations: iters, rel_residual: res, used_dense_fallback: false },
        )),
        Err(err) => {
            if n < DENSE_FALLBACK_LIMIT {
                let x = cholesky_solve(&a.to_dense(), &b)?;
                Ok((
                    x,
                    SolveReport {
                        iterations: 0,
                        rel_residual: T::zero(),
                        used_dense_fallback: true,
                    },
                ))
            } else {
                Err(err)
            }
        }
    }
}

fn pcg<T: Scalar>(
    a: &CsrMatrix<T>,
    b: &[T],
    x: &mut [T],
    opts: SolveOptions<T>,
) -> Result<(usize, T), SolveError> {
    let n = a.n();
    let norm_b = norm2(b);
    if norm_b == T::zero() {
        for xi in x.iter_mut() {
            *xi = T::zero();
        }
        return Ok((0, T::zero()));
    }
    let inv_diag: Vec<T> = a
        .diagonal()
        .iter()
        .map(|&d| {
            if d.abs() > T::zero() {
                T::one() / d
            } else {
                T::one()
            }
        })
        .collect();

    let mut r = vec![T::zero(); n];
    a.matvec(x, &mut r);
    for i in 0..n {
        r[i] = b[i] - r[i];
    }
    let mut z: Vec<T> = r.iter().zip(&inv_diag).map(|(&ri, &di)| ri * di).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![T::zero(); n];

    let target = opts.rel_tol * norm_b;
    let max_iter = opts.max_iter_factor.saturating_mul(n).max(1);
    let mut res = norm2(&r);
    if res <= target {
        return Ok((0, res / norm_b));
    }

    for it in 1..=max_iter {
        a.matvec(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > T::zero()) {
            return Err(SolveError::NoConvergence {
                iterations: it,
                residual: (res / norm_b).to_f64_lossy(),
            });
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        res = norm2(&r);
        if res <= target {
            return Ok((it, res / norm_b));
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_next = dot(&r, &z);
        let beta = rz_next / rz;
        rz = rz_next;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(SolveError::NoConvergence {
        iterations: max_iter,
        residual: (res / norm_b).to_f64_lossy(),
    })
}

/// Dense Cholesky solve; mutating copies, O(n^3).
pub fn cholesky_solve<T: Scalar>(a: &[Vec<T>], b: &[T]) -> Result<Vec<T>, SolveError> {
    let n = b.len();
    let mut l = vec![vec![T::zero(); n]; n];
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a[i][j];
            for k in 0..j {
                sum -= l[i][k] * l[j][k];
            }
            if i == j {
                if !(sum > T::zero()) {
                    return Err(SolveError::NotSpd { row: i, pivot: sum.to_f64_lossy() });
                }
                l[i][i] = sum.sqrt();
            } else {
                l[i][j] = sum / l[j][j];
            }
        }
    }
    // forward then backward substitution
    let mut y = vec![T::zero(); n];
    for i in 0..n {
        let mut sum = b[i];
        for k in 0..i {
            sum -= l[i][k] * y[k];
        }
        y[i] = sum / l[i][i];
    }
    let mut x = vec![T::zero(); n];
    for i in (0..n).rev() {
        let mut sum = y[i];
        for k in i + 1..n {
            sum -= l[k][i] * x[k];
        }
        x[i] = sum / l[i][i];
    }
    Ok(x)
}

pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

pub fn norm2<T: Scalar>(a: &[T]) -> T {
    dot(a, a).sqrt()
}

pub fn norm_inf<T: Scalar>(a: &[T]) -> T {
    a.iter().fold(T::zero(), |m, &x| m.max(x.abs()))
}
