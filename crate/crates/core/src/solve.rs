//! Linear solvers: dense LU, non-restarted GMRES and SVD condition numbers.

use std::time::{Duration, Instant};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::matrix::{norm2, DenseMatrix, SparseComplexMatrix};

/// Largest dimension accepted by [`cond_estimate`].
pub const COND_MAX_N: usize = 6000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolveMethod {
    Direct,
    Gmres,
}

impl SolveMethod {
    pub fn name(self) -> &'static str {
        match self {
            SolveMethod::Direct => "direct",
            SolveMethod::Gmres => "gmres",
        }
    }
}

impl std::str::FromStr for SolveMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "direct" => Ok(SolveMethod::Direct),
            "gmres" => Ok(SolveMethod::Gmres),
            _ => Err(crate::error::invalid("solver", format!("unknown solver `{s}`"))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct SolveReport {
    pub x: Vec<Complex64>,
    pub method: SolveMethod,
    /// GMRES iterations; zero for the direct solver.
    pub iterations: usize,
    /// `‖Mx − b‖ / ‖b‖` recomputed from the returned solution.
    pub residual: f64,
    /// Relative residual estimate after each GMRES iteration.
    pub history: Vec<f64>,
    pub converged: bool,
    pub elapsed: Duration,
}

fn relative_residual(mx: &[Complex64], b: &[Complex64]) -> f64 {
    let nb = norm2(b);
    let r: Vec<Complex64> = mx.iter().zip(b).map(|(u, v)| u - v).collect();
    if nb == 0.0 {
        norm2(&r)
    } else {
        norm2(&r) / nb
    }
}

/// LU with partial pivoting.
pub fn dense_solve(a: &DenseMatrix, b: &[Complex64]) -> Result<SolveReport> {
    let start = Instant::now();
    let n = a.rows();
    if a.cols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: a.cols(),
        });
    }
    if b.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: b.len(),
        });
    }
    if a.as_slice().iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
        return Err(Error::Solver("matrix has non-finite entries".into()));
    }
    let lu = a.to_nalgebra().lu();
    let rhs = nalgebra::DVector::from_column_slice(b);
    let x = lu
        .solve(&rhs)
        .ok_or_else(|| Error::Singular("LU factorisation hit a zero pivot".into()))?;
    let x: Vec<Complex64> = x.iter().copied().collect();
    if x.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
        return Err(Error::Singular("LU solve produced non-finite values".into()));
    }
    let residual = relative_residual(&a.matvec(&x)?, b);
    Ok(SolveReport {
        x,
        method: SolveMethod::Direct,
        iterations: 0,
        residual,
        history: Vec::new(),
        converged: true,
        elapsed: start.elapsed(),
    })
}

fn dot(u: &[Complex64], v: &[Complex64]) -> Complex64 {
    u.iter().zip(v).map(|(a, b)| a.conj() * b).sum()
}

/// Non-restarted GMRES from a zero initial guess.
///
/// Arnoldi uses modified Gram–Schmidt followed by one reorthogonalisation
/// pass. Stops once the relative residual estimate drops to `tol` or after
/// `max_iter` iterations; non-convergence is reported in the result.
pub fn gmres<F>(matvec: F, b: &[Complex64], tol: f64, max_iter: usize) -> Result<SolveReport>
where
    F: Fn(&[Complex64]) -> Result<Vec<Complex64>>,
{
    let start = Instant::now();
    let n = b.len();
    let beta = norm2(b);
    let zero = Complex64::new(0.0, 0.0);
    if beta == 0.0 {
        return Ok(SolveReport {
            x: vec![zero; n],
            method: SolveMethod::Gmres,
            iterations: 0,
            residual: 0.0,
            history: Vec::new(),
            converged: true,
            elapsed: start.elapsed(),
        });
    }
    let max_iter = max_iter.min(n).max(1);
    let mut v: Vec<Vec<Complex64>> = vec![b.iter().map(|x| x / beta).collect()];
    // column j of the Hessenberg matrix, already rotated
    let mut h: Vec<Vec<Complex64>> = Vec::new();
    let mut rot: Vec<(f64, Complex64)> = Vec::new();
    let mut g = vec![Complex64::new(beta, 0.0)];
    let mut history = Vec::new();
    let mut converged = false;

    for j in 0..max_iter {
        let mut w = matvec(&v[j])?;
        if w.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: w.len(),
            });
        }
        let mut col = vec![zero; j + 2];
        for _pass in 0..2 {
            for (i, vi) in v.iter().enumerate() {
                let c = dot(vi, &w);
                col[i] += c;
                for (wk, vk) in w.iter_mut().zip(vi) {
                    *wk -= c * vk;
                }
            }
        }
        let hn = norm2(&w);
        col[j + 1] = Complex64::new(hn, 0.0);
        for (i, &(c, s)) in rot.iter().enumerate() {
            let (a, b2) = (col[i], col[i + 1]);
            col[i] = a * c + s * b2;
            col[i + 1] = -s.conj() * a + b2 * c;
        }
        let (a, b2) = (col[j], col[j + 1]);
        let r = (a.norm_sqr() + b2.norm_sqr()).sqrt();
        let (c, s) = if r == 0.0 {
            (1.0, zero)
        } else if a.norm() == 0.0 {
            (0.0, b2.conj() / b2.norm())
        } else {
            let c = a.norm() / r;
            let s = (a / a.norm()) * b2.conj() / r;
            (c, s)
        };
        col[j] = a * c + s * b2;
        col[j + 1] = zero;
        rot.push((c, s));
        let gj = g[j];
        g[j] = gj * c;
        g.push(-s.conj() * gj);
        h.push(col);

        let est = g[j + 1].norm() / beta;
        history.push(est);
        if est <= tol {
            converged = true;
            break;
        }
        if hn <= 1e-14 * beta {
            // happy breakdown
            converged = true;
            break;
        }
        v.push(w.iter().map(|x| x / hn).collect());
    }

    let m = h.len();
    let mut y = vec![zero; m];
    for i in (0..m).rev() {
        let mut s = g[i];
        for k in i + 1..m {
            s -= h[k][i] * y[k];
        }
        y[i] = s / h[i][i];
    }
    let mut x = vec![zero; n];
    for (vk, yk) in v.iter().zip(&y) {
        for (xi, vi) in x.iter_mut().zip(vk) {
            *xi += yk * vi;
        }
    }
    let residual = relative_residual(&matvec(&x)?, b);
    Ok(SolveReport {
        x,
        method: SolveMethod::Gmres,
        iterations: m,
        residual,
        history,
        converged,
        elapsed: start.elapsed(),
    })
}

/// 2-norm condition number `σ_max / σ_min` from a full SVD.
pub fn cond_estimate(m: &DenseMatrix) -> Result<f64> {
    let n = m.rows().max(m.cols());
    if n > COND_MAX_N {
        return Err(Error::TooLarge(n));
    }
    let sv = m.to_nalgebra().singular_values();
    let max = sv.iter().copied().fold(0.0, f64::max);
    let min = sv.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(if min == 0.0 { f64::INFINITY } else { max / min })
}

/// Condition number of a sparse matrix after densification.
pub fn cond_estimate_sparse(m: &SparseComplexMatrix) -> Result<f64> {
    let n = m.rows().max(m.cols());
    if n > COND_MAX_N {
        return Err(Error::TooLarge(n));
    }
    cond_estimate(&m.to_dense())
}

pub fn sparse_matvec(m: &SparseComplexMatrix, x: &[Complex64]) -> Result<Vec<Complex64>> {
    m.matvec(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_matrix(n: usize, rng: &mut ChaCha8Rng) -> DenseMatrix {
        DenseMatrix::from_fn(n, n, |i, j| {
            let d = if i == j { n as f64 } else { 0.0 };
            c(rng.gen_range(-1.0..1.0) + d, rng.gen_range(-1.0..1.0))
        })
    }

    fn random_vec(n: usize, rng: &mut ChaCha8Rng) -> Vec<Complex64> {
        (0..n).map(|_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect()
    }

    #[test]
    fn direct_identity_and_two_by_two() {
        let b = vec![c(1.0, 2.0), c(-3.0, 0.5)];
        let r = dense_solve(&DenseMatrix::identity(2), &b).unwrap();
        assert_eq!(r.x, b);
        // [[1, i], [2, 1]]^{-1} = 1/(1 - 2i) [[1, -i], [-2, 1]]
        let a = DenseMatrix::from_row_major(2, 2, vec![c(1.0, 0.0), c(0.0, 1.0), c(2.0, 0.0), c(1.0, 0.0)]).unwrap();
        let det = c(1.0, -2.0);
        let expect = [(b[0] - c(0.0, 1.0) * b[1]) / det, (c(-2.0, 0.0) * b[0] + b[1]) / det];
        let r = dense_solve(&a, &b).unwrap();
        for (x, e) in r.x.iter().zip(expect) {
            assert!((x - e).norm() < 1e-14);
        }
    }

    #[test]
    fn direct_random_residual() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = random_matrix(50, &mut rng);
        let b = random_vec(50, &mut rng);
        let r = dense_solve(&a, &b).unwrap();
        assert!(r.residual <= 1e-12);
        let singular = DenseMatrix::zeros(3, 3);
        assert!(dense_solve(&singular, &[c(1.0, 0.0); 3]).is_err());
        assert!(dense_solve(&DenseMatrix::identity(3), &[c(1.0, 0.0); 2]).is_err());
    }

    #[test]
    fn gmres_krylov_exactness() {
        let b = vec![c(1.0, -1.0); 6];
        let r = gmres(|x| Ok(x.to_vec()), &b, 1e-12, 6).unwrap();
        assert_eq!(r.iterations, 1);
        let diag = [2.0, 2.0, 5.0, 5.0, -1.0, -1.0];
        let op = |x: &[Complex64]| Ok(x.iter().zip(diag).map(|(v, d)| v * d).collect());
        let r = gmres(op, &b, 1e-12, 6).unwrap();
        assert!(r.iterations <= 3);
        assert!(r.residual <= 1e-12);
    }

    #[test]
    fn gmres_matches_direct() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = random_matrix(60, &mut rng);
        let b = random_vec(60, &mut rng);
        let tol = 1e-8;
        let it = gmres(|x| a.matvec(x), &b, tol, 60).unwrap();
        let d = dense_solve(&a, &b).unwrap();
        assert!(it.converged);
        assert!(it.residual <= 10.0 * tol);
        let diff: Vec<_> = it.x.iter().zip(&d.x).map(|(u, v)| u - v).collect();
        assert!(norm2(&diff) / norm2(&d.x) <= 10.0 * tol * 60.0);
        for w in it.history.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-12));
        }
    }

    #[test]
    fn gmres_reports_non_convergence() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = DenseMatrix::from_fn(40, 40, |_, _| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        let b = vec![c(1.0, 0.0); 40];
        let r = gmres(|x| a.matvec(x), &b, 1e-14, 3).unwrap();
        assert!(!r.converged);
        assert_eq!(r.iterations, 3);
    }

    #[test]
    fn condition_numbers() {
        assert_relative_eq!(cond_estimate(&DenseMatrix::identity(5)).unwrap(), 1.0, epsilon = 1e-14);
        let d = DenseMatrix::from_fn(3, 3, |i, j| if i == j { c([10.0, 1.0, 0.1][i], 0.0) } else { c(0.0, 0.0) });
        assert_relative_eq!(cond_estimate(&d).unwrap(), 100.0, epsilon = 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let m = random_matrix(20, &mut rng);
        let q = m.to_nalgebra().qr().q();
        let q = DenseMatrix::from_fn(20, 20, |i, j| q[(i, j)]);
        assert_relative_eq!(cond_estimate(&q).unwrap(), 1.0, epsilon = 1e-12);
        let k1 = cond_estimate(&m).unwrap();
        let k2 = cond_estimate(&m.scale(c(-3.0, 0.7))).unwrap();
        assert_relative_eq!(k1, k2, max_relative = 1e-10);
    }

    #[test]
    fn sparse_products() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let n = 30;
        let rows = (0..n)
            .map(|i| {
                let mut row = Vec::new();
                for j in 0..n {
                    if j == i || rng.gen_bool(0.3) {
                        row.push((j, c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))));
                    }
                }
                row
            })
            .collect();
        let s = SparseComplexMatrix::from_rows(n, rows).unwrap();
        let x = random_vec(n, &mut rng);
        let ys = sparse_matvec(&s, &x).unwrap();
        let yd = s.to_dense().matvec(&x).unwrap();
        for (a, b) in ys.iter().zip(&yd) {
            assert!((a - b).norm() <= 1e-14);
        }
        let mut e = vec![c(0.0, 0.0); n];
        e[4] = c(1.0, 0.0);
        let col = sparse_matvec(&s, &e).unwrap();
        for (i, v) in col.iter().enumerate() {
            assert_eq!(*v, s.get(i, 4));
        }
        assert!(sparse_matvec(&s, &x[..3]).is_err());
    }
}
