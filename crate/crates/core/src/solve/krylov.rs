//! Right-preconditioned BiCGStab with a restarted GMRES fallback, both using
//! ILU(0). Everything runs sequentially, so results are bit-reproducible.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math::{self, dot, norm2};
use crate::sparse::{CsrMatrix, Ilu0};

pub const MAX_BICGSTAB_ITERATIONS: usize = 4000;
pub const GMRES_RESTART: usize = 60;
pub const MAX_GMRES_CYCLES: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct KrylovStats {
    pub iterations: usize,
    /// True relative residual `||b - A x|| / ||b||`.
    pub relative_residual: f64,
    pub converged: bool,
}

/// A matrix together with its ILU(0) factorization, reusable across right-hand sides.
#[derive(Debug, Clone)]
pub struct LinearSolver {
    matrix: CsrMatrix,
    ilu: Ilu0,
}

impl LinearSolver {
    pub fn new(matrix: CsrMatrix) -> Result<Self> {
        if let Some(row) = matrix.first_empty_row() {
            return Err(Error::SingularRow(row));
        }
        let ilu = Ilu0::new(&matrix)?;
        Ok(Self { matrix, ilu })
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    pub fn solve(&self, b: &[f64], x0: Option<&[f64]>, tol: f64) -> Result<(Vec<f64>, KrylovStats)> {
        check_tol(tol)?;
        let n = self.matrix.dim();
        if b.len() != n {
            return Err(Error::SizeMismatch { expected: n, found: b.len() });
        }
        let bnorm = norm2(b);
        if bnorm == 0.0 {
            return Ok((alloc::vec![0.0; n], KrylovStats { iterations: 0, relative_residual: 0.0, converged: true }));
        }
        let mut x = match x0 {
            Some(x0) => x0.to_vec(),
            None => alloc::vec![0.0; n],
        };
        let mut iterations = 0;
        // the recurrence residual can drift from the true one; retry a few times
        for _ in 0..3 {
            let (its, ok) = self.bicgstab(b, &mut x, tol, bnorm);
            iterations += its;
            let res = self.true_residual(b, &x) / bnorm;
            if ok && res <= tol {
                return Ok((x, KrylovStats { iterations, relative_residual: res, converged: true }));
            }
            if !ok {
                break;
            }
        }
        let its = self.gmres(b, &mut x, tol, bnorm);
        iterations += its;
        let res = self.true_residual(b, &x) / bnorm;
        Ok((x, KrylovStats { iterations, relative_residual: res, converged: res <= tol }))
    }

    fn true_residual(&self, b: &[f64], x: &[f64]) -> f64 {
        let ax = self.matrix.mul_vec(x);
        math::sqrt(b.iter().zip(&ax).map(|(b, a)| (b - a) * (b - a)).sum())
    }

    fn precondition(&self, r: &[f64], out: &mut [f64]) {
        out.copy_from_slice(r);
        self.ilu.apply(out);
    }

    /// Returns `(iterations, converged-without-breakdown)`.
    fn bicgstab(&self, b: &[f64], x: &mut [f64], tol: f64, bnorm: f64) -> (usize, bool) {
        let n = b.len();
        let a = &self.matrix;
        let mut r = a.mul_vec(x);
        r.iter_mut().zip(b).for_each(|(r, b)| *r = b - *r);
        if norm2(&r) <= tol * bnorm {
            return (0, true);
        }
        let r_hat = r.clone();
        let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
        let mut p = alloc::vec![0.0; n];
        let mut v = alloc::vec![0.0; n];
        let mut p_hat = alloc::vec![0.0; n];
        let mut s_hat = alloc::vec![0.0; n];
        let mut t = alloc::vec![0.0; n];
        let mut s = alloc::vec![0.0; n];

        for it in 1..=MAX_BICGSTAB_ITERATIONS {
            let rho_new = dot(&r_hat, &r);
            if rho_new == 0.0 || !rho_new.is_finite() {
                return (it, false);
            }
            let beta = (rho_new / rho) * (alpha / omega);
            rho = rho_new;
            for i in 0..n {
                p[i] = r[i] + beta * (p[i] - omega * v[i]);
            }
            self.precondition(&p, &mut p_hat);
            a.mul_vec_into(&p_hat, &mut v);
            let denom = dot(&r_hat, &v);
            if denom == 0.0 {
                return (it, false);
            }
            alpha = rho / denom;
            for i in 0..n {
                s[i] = r[i] - alpha * v[i];
            }
            if norm2(&s) <= tol * bnorm {
                for i in 0..n {
                    x[i] += alpha * p_hat[i];
                }
                return (it, true);
            }
            self.precondition(&s, &mut s_hat);
            a.mul_vec_into(&s_hat, &mut t);
            let tt = dot(&t, &t);
            if tt == 0.0 {
                return (it, false);
            }
            omega = dot(&t, &s) / tt;
            for i in 0..n {
                x[i] += alpha * p_hat[i] + omega * s_hat[i];
                r[i] = s[i] - omega * t[i];
            }
            let rn = norm2(&r);
            if !rn.is_finite() || omega == 0.0 {
                return (it, false);
            }
            if rn <= tol * bnorm {
                return (it, true);
            }
        }
        (MAX_BICGSTAB_ITERATIONS, false)
    }

    /// GMRES(m) with Givens rotations; returns the iteration count.
    fn gmres(&self, b: &[f64], x: &mut [f64], tol: f64, bnorm: f64) -> usize {
        let n = b.len();
        let m = GMRES_RESTART.min(n);
        let a = &self.matrix;
        let mut iterations = 0;
        let mut w = alloc::vec![0.0; n];
        let mut z = alloc::vec![0.0; n];
        for _ in 0..MAX_GMRES_CYCLES {
            let mut r = a.mul_vec(x);
            r.iter_mut().zip(b).for_each(|(r, b)| *r = b - *r);
            let beta = norm2(&r);
            if beta <= tol * bnorm {
                break;
            }
            let mut basis: Vec<Vec<f64>> = Vec::with_capacity(m + 1);
            basis.push(r.iter().map(|v| v / beta).collect());
            let mut hess = alloc::vec![alloc::vec![0.0; m]; m + 1];
            let (mut cs, mut sn) = (alloc::vec![0.0; m], alloc::vec![0.0; m]);
            let mut g = alloc::vec![0.0; m + 1];
            g[0] = beta;
            let mut k_used = 0;
            for k in 0..m {
                iterations += 1;
                self.precondition(&basis[k], &mut z);
                a.mul_vec_into(&z, &mut w);
                for (i, q) in basis.iter().enumerate() {
                    let hik = dot(&w, q);
                    hess[i][k] = hik;
                    w.iter_mut().zip(q).for_each(|(w, q)| *w -= hik * q);
                }
                let wn = norm2(&w);
                hess[k + 1][k] = wn;
                for i in 0..k {
                    let t = cs[i] * hess[i][k] + sn[i] * hess[i + 1][k];
                    hess[i + 1][k] = -sn[i] * hess[i][k] + cs[i] * hess[i + 1][k];
                    hess[i][k] = t;
                }
                let d = math::hypot(hess[k][k], hess[k + 1][k]);
                if d == 0.0 {
                    k_used = k;
                    break;
                }
                cs[k] = hess[k][k] / d;
                sn[k] = hess[k + 1][k] / d;
                hess[k][k] = d;
                hess[k + 1][k] = 0.0;
                g[k + 1] = -sn[k] * g[k];
                g[k] *= cs[k];
                k_used = k + 1;
                if math::abs(g[k + 1]) <= tol * bnorm || wn == 0.0 {
                    break;
                }
                basis.push(w.iter().map(|v| v / wn).collect());
            }
            // back substitution for the Krylov coefficients
            let mut y = alloc::vec![0.0; k_used];
            for i in (0..k_used).rev() {
                let mut s = g[i];
                for j in i + 1..k_used {
                    s -= hess[i][j] * y[j];
                }
                y[i] = s / hess[i][i];
            }
            let mut update = alloc::vec![0.0; n];
            for (j, yj) in y.iter().enumerate() {
                update.iter_mut().zip(&basis[j]).for_each(|(u, q)| *u += yj * q);
            }
            self.ilu.apply(&mut update);
            x.iter_mut().zip(&update).for_each(|(x, u)| *x += u);
            if k_used == 0 {
                break;
            }
        }
        iterations
    }
}

pub(crate) fn check_tol(tol: f64) -> Result<()> {
    if !(tol > 0.0 && tol <= 1e-2) {
        return Err(Error::InvalidSolverParameter(alloc::format!("tol = {tol} must lie in (0, 1e-2]")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::RowBuilder;

    fn convection_diffusion(n: usize, peclet: f64) -> CsrMatrix {
        let h = 1.0 / (n + 1) as f64;
        let mut b = RowBuilder::new(n);
        for i in 0..n {
            if i > 0 {
                b.push(i - 1, -1.0 / (h * h) - peclet / (2.0 * h));
            }
            b.push(i, 2.0 / (h * h));
            if i + 1 < n {
                b.push(i + 1, -1.0 / (h * h) + peclet / (2.0 * h));
            }
            b.finish_row();
        }
        b.build()
    }

    #[test]
    fn nonsymmetric_system_converges() {
        let a = convection_diffusion(200, 30.0);
        let x_true: Vec<f64> = (0..200).map(|i| (i as f64 * 0.1).sin()).collect();
        let b = a.mul_vec(&x_true);
        let solver = LinearSolver::new(a).unwrap();
        let (x, stats) = solver.solve(&b, None, 1e-10).unwrap();
        assert!(stats.converged);
        assert!(stats.relative_residual <= 1e-10);
        let err = x.iter().zip(&x_true).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(err < 1e-6);
    }

    #[test]
    fn gmres_fallback_alone_converges() {
        let a = convection_diffusion(150, 80.0);
        let b: Vec<f64> = (0..150).map(|i| 1.0 + (i % 7) as f64).collect();
        let solver = LinearSolver::new(a).unwrap();
        let mut x = alloc::vec![0.0; 150];
        let bn = norm2(&b);
        solver.gmres(&b, &mut x, 1e-10, bn);
        assert!(solver.true_residual(&b, &x) / bn <= 1e-9);
    }

    #[test]
    fn tolerance_bounds_are_enforced() {
        let solver = LinearSolver::new(CsrMatrix::identity(3)).unwrap();
        assert!(solver.solve(&[1.0, 0.0, 0.0], None, 0.0).is_err());
        assert!(solver.solve(&[1.0, 0.0, 0.0], None, 0.05).is_err());
        assert!(solver.solve(&[1.0, 0.0, 0.0], None, 1e-2).is_ok());
    }
}
