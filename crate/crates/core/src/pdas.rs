//! Primal-dual active set solver for the bilateral obstacle quadratic program
//! of each time step, with a projected Gauss-Seidel oracle.

use crate::scalar::Scalar;
use crate::sparse::{norm_inf, solve_spd, CsrMatrix, SolveError, SolveOptions, SparseSystem};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum QpError {
    #[error("active sets did not settle within {max_outer} outer iterations (KKT violation {violation:e})")]
    MaxOuterExceeded { max_outer: usize, violation: f64 },
    #[error("projected Gauss-Seidel exceeded {0} sweeps")]
    MaxSweepsExceeded(usize),
    #[error(transparent)]
    Solve(#[from] SolveError),
}

/// min (1/2) v^T A v - b^T v subject to lower <= v <= upper, with a fixed
/// index set pinned to the lower bound (the protected boundary band).
#[derive(Clone, Debug)]
pub struct ObstacleQP<T> {
    pub a: CsrMatrix<T>,
    pub b: Vec<T>,
    pub lower: T,
    pub upper: T,
    pub fixed: Vec<usize>,
}

impl<T: Scalar> ObstacleQP<T> {
    pub fn boxed(a: CsrMatrix<T>, b: Vec<T>, fixed: Vec<usize>) -> Self {
        Self { a, b, lower: T::zero(), upper: T::one(), fixed }
    }

    pub fn n(&self) -> usize {
        self.b.len()
    }

    fn is_fixed(&self) -> Vec<bool> {
        let mut f = vec![false; self.n()];
        for &i in &self.fixed {
            f[i] = true;
        }
        f
    }
}

/// KKT data of a candidate solution: multiplier lambda = b - A v, the active
/// sets, and the largest complementarity violation.
#[derive(Clone, Debug)]
pub struct KktCertificate<T> {
    pub v: Vec<T>,
    pub lambda: Vec<T>,
    pub active_lower: Vec<usize>,
    pub active_upper: Vec<usize>,
    pub max_violation: T,
    pub tol: T,
}

impl<T: Scalar> KktCertificate<T> {
    pub fn is_valid(&self) -> bool {
        self.max_violation <= self.tol
    }

    fn build(qp: &ObstacleQP<T>, v: &[T], lower_set: &[bool], upper_set: &[bool], tol: T) -> Self {
        let n = qp.n();
        let fixed = qp.is_fixed();
        let mut av = vec![T::zero(); n];
        qp.a.matvec(v, &mut av);
        let lambda: Vec<T> = qp.b.iter().zip(&av).map(|(&bi, &ai)| bi - ai).collect();
        let mut violation = T::zero();
        for i in 0..n {
            if fixed[i] {
                violation = violation.max((v[i] - qp.lower).abs());
            } else if lower_set[i] {
                // v pinned at the lower bound needs lambda <= 0
                violation = violation.max((v[i] - qp.lower).abs()).max(lambda[i]);
            } else if upper_set[i] {
                // v pinned at the upper bound needs lambda >= 0
                violation = violation.max((v[i] - qp.upper).abs()).max(-lambda[i]);
            } else {
                violation = violation.max(lambda[i].abs());
            }
        }
        Self {
            v: v.to_vec(),
            lambda,
            active_lower: (0..n).filter(|&i| lower_set[i] && !fixed[i]).collect(),
            active_upper: (0..n).filter(|&i| upper_set[i]).collect(),
            max_violation: violation,
            tol,
        }
    }
}

/// Residual-based bilateral active set rule with parameter `c`:
/// lower-active where (A v - b)_i - c (v_i - lower) > 0,
/// upper-active where (A v - b)_i + c (upper - v_i) < 0.
pub fn pdas_solve<T: Scalar>(
    qp: &ObstacleQP<T>,
    c_param: Option<T>,
    v_init: &[T],
    max_outer: usize,
) -> Result<(Vec<T>, KktCertificate<T>, usize), QpError> {
    let n = qp.n();
    assert_eq!(v_init.len(), n);
    let fixed = qp.is_fixed();
    let c = c_param.unwrap_or_else(|| {
        let dmax = qp.a.diagonal().into_iter().fold(T::zero(), |m, d| m.max(d.abs()));
        T::cast(1e2) * dmax
    });
    let kkt_tol = T::cast(1e-10) * norm_inf(&qp.b);

    let mut v = v_init.to_vec();
    for i in 0..n {
        if fixed[i] {
            v[i] = qp.lower;
        } else {
            v[i] = v[i].max(qp.lower).min(qp.upper);
        }
    }
    let mut lower_set = vec![false; n];
    let mut upper_set = vec![false; n];
    let mut residual = vec![T::zero(); n];
    let inner_opts = SolveOptions { rel_tol: T::cast(1e-13), ..Default::default() };

    let mut last: Option<KktCertificate<T>> = None;
    for outer in 1..=max_outer {
        qp.a.matvec(&v, &mut residual);
        let mut next_lower = vec![false; n];
        let mut next_upper = vec![false; n];
        for i in 0..n {
            if fixed[i] {
                continue;
            }
            let r = residual[i] - qp.b[i];
            if r - c * (v[i] - qp.lower) > T::zero() {
                next_lower[i] = true;
            } else if r + c * (qp.upper - v[i]) < T::zero() {
                next_upper[i] = true;
            }
        }

        let mut constraints: Vec<(usize, T)> = Vec::new();
        for i in 0..n {
            if fixed[i] || next_lower[i] {
                constraints.push((i, qp.lower));
            } else if next_upper[i] {
                constraints.push((i, qp.upper));
            }
        }
        let system = SparseSystem { matrix: qp.a.clone(), rhs: qp.b.clone(), constraints };
        let (solution, _) = solve_spd(&system, Some(&v), inner_opts)?;
        v = solution;
        for vi in &mut v {
            *vi = vi.max(qp.lower).min(qp.upper);
        }

        let cert = KktCertificate::build(qp, &v, &next_lower, &next_upper, kkt_tol);
        let settled = next_lower == lower_set && next_upper == upper_set;
        if cert.is_valid() || (settled && outer > 1) {
            debug_assert!(
                cert.is_valid(),
                "active sets settled but KKT violation {:?} exceeds {:?}",
                cert.max_violation,
                cert.tol
            );
            return Ok((v, cert, outer));
        }
        lower_set = next_lower;
        upper_set = next_upper;
        last = Some(cert);
    }
    Err(QpError::MaxOuterExceeded {
        max_outer,
        violation: last.map_or(f64::INFINITY, |c| c.max_violation.to_f64_lossy()),
    })
}

/// Projected Gauss-Seidel sweeps with componentwise clamping; the independent
/// verification oracle for `pdas_solve`.
pub fn projected_gauss_seidel<T: Scalar>(
    qp: &ObstacleQP<T>,
    tol: T,
    max_sweeps: usize,
) -> Result<Vec<T>, QpError> {
    let n = qp.n();
    let fixed = qp.is_fixed();
    let diag = qp.a.diagonal();
    let mut v = vec![T::zero(); n];
    for i in 0..n {
        if fixed[i] {
            v[i] = qp.lower;
        }
    }
    for _ in 0..max_sweeps {
        let mut max_change = T::zero();
        for i in 0..n {
            if fixed[i] {
                continue;
            }
            let (cols, vals) = qp.a.row(i);
            let mut acc = qp.b[i];
            for (&j, &a) in cols.iter().zip(vals) {
                if j != i {
                    acc -= a * v[j];
                }
            }
            let candidate = (acc / diag[i]).max(qp.lower).min(qp.upper);
            max_change = max_change.max((candidate - v[i]).abs());
            v[i] = candidate;
        }
        if max_change <= tol {
            return Ok(v);
        }
    }
    Err(QpError::MaxSweepsExceeded(max_sweeps))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn diagonal_qp(diag: &[f64], b: &[f64]) -> ObstacleQP<f64> {
        let n = diag.len();
        let mut a = CsrMatrix::from_pattern((0..n).map(|i| vec![i]).collect());
        for (i, &d) in diag.iter().enumerate() {
            a.add_at(i, i, d);
        }
        ObstacleQP::boxed(a, b.to_vec(), Vec::new())
    }

    fn tridiagonal_spd(n: usize, rng: &mut ChaCha8Rng) -> CsrMatrix<f64> {
        let cols: Vec<Vec<usize>> = (0..n)
            .map(|i| {
                let mut c = vec![i];
                if i > 0 {
                    c.insert(0, i - 1);
                }
                if i + 1 < n {
                    c.push(i + 1);
                }
                c
            })
            .collect();
        let mut a = CsrMatrix::from_pattern(cols);
        let off: Vec<f64> = (0..n.saturating_sub(1)).map(|_| rng.gen_range(-1.0..1.0)).collect();
        for i in 0..n {
            let mut dominance = 0.1 + rng.gen_range(0.0..1.0);
            if i > 0 {
                a.add_at(i, i - 1, off[i - 1]);
                dominance += off[i - 1].abs();
            }
            if i + 1 < n {
                a.add_at(i, i + 1, off[i]);
                dominance += off[i].abs();
            }
            a.add_at(i, i, dominance);
        }
        a
    }

    #[test]
    fn zero_rhs_gives_zero_solution() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = tridiagonal_spd(40, &mut rng);
        let qp = ObstacleQP::boxed(a, vec![0.0; 40], Vec::new());
        let (v, cert, _) = pdas_solve(&qp, None, &vec![0.3; 40], 100).unwrap();
        assert!(v.iter().all(|&x| x.abs() < 1e-12));
        assert!(cert.is_valid());
    }

    #[test]
    fn separable_qp_clamps_componentwise() {
        let qp = diagonal_qp(&[1.0, 1.0, 1.0], &[-0.5, 0.5, 1.7]);
        let (v, cert, _) = pdas_solve(&qp, None, &[0.0; 3], 100).unwrap();
        assert_eq!(v, vec![0.0, 0.5, 1.0]);
        assert!(cert.is_valid());
        assert_eq!(cert.active_lower, vec![0]);
        assert_eq!(cert.active_upper, vec![2]);

        let pgs = projected_gauss_seidel(&qp, 1e-12, 1000).unwrap();
        assert_eq!(pgs, vec![0.0, 0.5, 1.0]);
    }

    #[test]
    fn pdas_matches_projected_gauss_seidel_on_random_qps() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for case in 0..10 {
            let n = rng.gen_range(20..=200);
            let a = tridiagonal_spd(n, &mut rng);
            let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let fixed: Vec<usize> = (0..n).filter(|_| rng.gen_bool(0.05)).collect();
            let qp = ObstacleQP::boxed(a, b, fixed);
            let init: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
            let (v, cert, outer) = pdas_solve(&qp, None, &init, 100).unwrap();
            assert!(cert.is_valid(), "case {case}: violation {}", cert.max_violation);
            assert!(outer <= 30, "case {case}: {outer} outer iterations");
            let oracle = projected_gauss_seidel(&qp, 1e-13, 1_000_000).unwrap();
            let gap = v
                .iter()
                .zip(&oracle)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0f64, f64::max);
            assert!(gap <= 1e-8, "case {case}: max-norm gap {gap}");
        }
    }

    #[test]
    fn solution_independent_of_initialization() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let a = tridiagonal_spd(120, &mut rng);
        let b: Vec<f64> = (0..120).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let qp = ObstacleQP::boxed(a, b, vec![0, 1, 2]);
        let mut solutions = Vec::new();
        for seed in 0..3 {
            let mut init_rng = ChaCha8Rng::seed_from_u64(seed);
            let init: Vec<f64> = (0..120).map(|_| init_rng.gen_range(0.0..1.0)).collect();
            let (v, _, _) = pdas_solve(&qp, None, &init, 100).unwrap();
            solutions.push(v);
        }
        for v in &solutions[1..] {
            let gap = v
                .iter()
                .zip(&solutions[0])
                .map(|(a, b)| (a - b).abs())
                .fold(0.0f64, f64::max);
            assert!(gap <= 1e-9, "max-norm spread {gap}");
        }
    }

    #[test]
    fn monotone_upper_activity_on_separable_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let n = 50;
        let diag: Vec<f64> = (0..n).map(|_| rng.gen_range(0.5..2.0)).collect();
        let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..3.0)).collect();
        let qp_big = diagonal_qp(&diag, &b);
        let shrunk: Vec<f64> = b.iter().map(|x| x - 0.7).collect();
        let qp_small = diagonal_qp(&diag, &shrunk);
        let (_, cert_big, _) = pdas_solve(&qp_big, None, &vec![0.5; n], 100).unwrap();
        let (_, cert_small, _) = pdas_solve(&qp_small, None, &vec![0.5; n], 100).unwrap();
        let big: std::collections::BTreeSet<_> = cert_big.active_upper.iter().collect();
        for i in &cert_small.active_upper {
            assert!(big.contains(i), "upper set grew after shrinking b");
        }
    }

    #[test]
    fn fixed_indices_stay_pinned() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = tridiagonal_spd(30, &mut rng);
        let b = vec![5.0; 30]; // strong positive drive
        let qp = ObstacleQP::boxed(a, b, vec![4, 5, 6]);
        let (v, cert, _) = pdas_solve(&qp, None, &vec![0.0; 30], 100).unwrap();
        assert_eq!(v[4], 0.0);
        assert_eq!(v[5], 0.0);
        assert_eq!(v[6], 0.0);
        assert!(cert.is_valid());
        // pinned indices are reported as fixed, not as bound-active
        assert!(!cert.active_lower.contains(&5));
    }

    #[test]
    fn max_outer_exceeded_reports_violation() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = tridiagonal_spd(60, &mut rng);
        let b: Vec<f64> = (0..60).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let qp = ObstacleQP::boxed(a, b, Vec::new());
        let (_, _, needed) = pdas_solve(&qp, None, &vec![0.5; 60], 100).unwrap();
        assert!(needed >= 2, "pick a seed whose QP needs several iterations");
        let err = pdas_solve(&qp, None, &vec![0.5; 60], needed - 1).unwrap_err();
        assert!(matches!(err, QpError::MaxOuterExceeded { .. }));
    }
}
