//! Linear solvers backing Newton and the time stepper: banded LU with
//! partial pivoting for 1D Jacobians, Thomas elimination for per-species
//! tridiagonal systems, and matrix-free CG / BiCGSTAB with Jacobi
//! preconditioning for 2D.

use crate::error::{Error, Result};
use crate::linalg::{dot, max_norm};

/// Band matrix with `kl` subdiagonals and `ku` superdiagonals, stored
/// with `kl` spare superdiagonals so partial pivoting can fill in place.
#[derive(Debug, Clone)]
pub struct BandMatrix {
    dim: usize,
    kl: usize,
    ku: usize,
    /// Row-major; row `i` stores columns `i-kl ..= i+ku+kl` at offset
    /// `j - i + kl`.
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(dim: usize, kl: usize, ku: usize) -> Self {
        BandMatrix {
            dim,
            kl,
            ku,
            data: vec![0.0; dim * (2 * kl + ku + 1)],
        }
    }

    fn width(&self) -> usize {
        2 * self.kl + self.ku + 1
    }

    fn slot(&self, i: usize, j: usize) -> Option<usize> {
        let lo = i.saturating_sub(self.kl);
        let hi = (i + self.ku + self.kl).min(self.dim - 1);
        (j >= lo && j <= hi).then(|| i * self.width() + (j + self.kl - i))
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.slot(i, j).map_or(0.0, |s| self.data[s])
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let s = self.slot(i, j).unwrap_or_else(|| {
            panic!("entry ({i},{j}) outside band kl={} ku={}", self.kl, self.ku)
        });
        self.data[s] = v;
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let s = self.slot(i, j).unwrap_or_else(|| {
            panic!("entry ({i},{j}) outside band kl={} ku={}", self.kl, self.ku)
        });
        self.data[s] += v;
    }

    /// Factors in place with partial pivoting and solves for one right
    /// hand side. The matrix is consumed; clone first to reuse.
    pub fn solve(mut self, b: &[f64]) -> Result<Vec<f64>> {
        let n = self.dim;
        if b.len() != n {
            return Err(Error::ShapeMismatch("rhs length must match matrix".into()));
        }
        let mut x = b.to_vec();
        let kl = self.kl;
        let fill = self.ku + self.kl;
        for k in 0..n {
            let pmax = (k + kl).min(n - 1);
            let mut piv = k;
            let mut best = self.get(k, k).abs();
            for r in k + 1..=pmax {
                let v = self.get(r, k).abs();
                if v > best {
                    best = v;
                    piv = r;
                }
            }
            if best == 0.0 {
                return Err(Error::SingularJacobian(format!(
                    "zero pivot in banded factorization at column {k}"
                )));
            }
            if piv != k {
                let jmax = (k + fill).min(n - 1);
                for j in k..=jmax {
                    let a = self.get(k, j);
                    let b2 = self.get(piv, j);
                    self.set(k, j, b2);
                    self.set(piv, j, a);
                }
                x.swap(k, piv);
            }
            let pivot = self.get(k, k);
            let jmax = (k + fill).min(n - 1);
            for r in k + 1..=pmax {
                let m = self.get(r, k) / pivot;
                if m != 0.0 {
                    for j in k + 1..=jmax {
                        let v = self.get(r, j) - m * self.get(k, j);
                        self.set(r, j, v);
                    }
                    x[r] -= m * x[k];
                }
                self.set(r, k, 0.0);
            }
        }
        for k in (0..n).rev() {
            let jmax = (k + fill).min(n - 1);
            let mut acc = x[k];
            for j in k + 1..=jmax {
                acc -= self.get(k, j) * x[j];
            }
            x[k] = acc / self.get(k, k);
        }
        Ok(x)
    }
}

/// Solves a tridiagonal system by Thomas elimination without pivoting;
/// requires nonvanishing eliminated pivots, which strict diagonal
/// dominance guarantees.
pub fn solve_tridiagonal(sub: &[f64], diag: &[f64], sup: &[f64], b: &[f64]) -> Result<Vec<f64>> {
    let n = diag.len();
    if sub.len() != n.saturating_sub(1) || sup.len() != n.saturating_sub(1) || b.len() != n {
        return Err(Error::ShapeMismatch("tridiagonal shape mismatch".into()));
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    if diag[0] == 0.0 {
        return Err(Error::SingularJacobian(
            "zero leading tridiagonal pivot".into(),
        ));
    }
    c[0] = if n > 1 { sup[0] / diag[0] } else { 0.0 };
    d[0] = b[0] / diag[0];
    for i in 1..n {
        let denom = diag[i] - sub[i - 1] * c[i - 1];
        if denom == 0.0 {
            return Err(Error::SingularJacobian(format!(
                "zero tridiagonal pivot at row {i}"
            )));
        }
        if i < n - 1 {
            c[i] = sup[i] / denom;
        }
        d[i] = (b[i] - sub[i - 1] * d[i - 1]) / denom;
    }
    let mut x = d;
    for i in (0..n.saturating_sub(1)).rev() {
        x[i] -= c[i] * x[i + 1];
    }
    Ok(x)
}

/// Conjugate gradients with Jacobi preconditioning for SPD operators
/// given as a matvec closure. Converges when the residual max norm drops
/// below `tol`.
pub fn cg<F>(
    apply: F,
    precond_diag: &[f64],
    b: &[f64],
    x0: &[f64],
    tol: f64,
    max_iters: usize,
) -> Result<(Vec<f64>, usize)>
where
    F: Fn(&[f64], &mut [f64]),
{
    let n = b.len();
    let mut x = x0.to_vec();
    let mut ax = vec![0.0; n];
    apply(&x, &mut ax);
    let mut r: Vec<f64> = b.iter().zip(&ax).map(|(bi, axi)| bi - axi).collect();
    if max_norm(&r) < tol {
        return Ok((x, 0));
    }
    let precond =
        |r: &[f64]| -> Vec<f64> { r.iter().zip(precond_diag).map(|(ri, di)| ri / di).collect() };
    let mut z = precond(&r);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    for it in 1..=max_iters {
        apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            return Err(Error::LinearSolveFailure(format!(
                "cg: non-positive curvature {pap:e} at iteration {it}"
            )));
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        if max_norm(&r) < tol {
            return Ok((x, it));
        }
        z = precond(&r);
        let rz_next = dot(&r, &z);
        let beta = rz_next / rz;
        rz = rz_next;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::LinearSolveFailure(format!(
        "cg: no convergence in {max_iters} iterations, residual {:e}",
        max_norm(&r)
    )))
}

/// BiCGSTAB with Jacobi preconditioning for general operators; restarts
/// on scalar breakdown, up to ten times, before reporting failure.
pub fn bicgstab<F>(
    apply: F,
    precond_diag: &[f64],
    b: &[f64],
    x0: &[f64],
    tol: f64,
    max_iters: usize,
) -> Result<(Vec<f64>, usize)>
where
    F: Fn(&[f64], &mut [f64]),
{
    let n = b.len();
    let mut x = x0.to_vec();
    let precond =
        |r: &[f64]| -> Vec<f64> { r.iter().zip(precond_diag).map(|(ri, di)| ri / di).collect() };
    let mut buf = vec![0.0; n];
    let residual_of = |x: &[f64], buf: &mut Vec<f64>| -> Vec<f64> {
        apply(x, buf);
        b.iter().zip(buf.iter()).map(|(bi, axi)| bi - axi).collect()
    };

    let mut total_iters = 0usize;
    for _restart in 0..10 {
        let mut r = residual_of(&x, &mut buf);
        if max_norm(&r) < tol {
            return Ok((x, total_iters));
        }
        let r_hat = r.clone();
        let mut rho = 1.0;
        let mut alpha = 1.0;
        let mut omega = 1.0;
        let mut v = vec![0.0; n];
        let mut p = vec![0.0; n];
        let mut broke = false;
        while total_iters < max_iters {
            total_iters += 1;
            let rho_next = dot(&r_hat, &r);
            if rho_next.abs() < 1e-300 {
                broke = true;
                break;
            }
            let beta = (rho_next / rho) * (alpha / omega);
            rho = rho_next;
            for i in 0..n {
                p[i] = r[i] + beta * (p[i] - omega * v[i]);
            }
            let ph = precond(&p);
            apply(&ph, &mut v);
            let rhv = dot(&r_hat, &v);
            if rhv.abs() < 1e-300 {
                broke = true;
                break;
            }
            alpha = rho / rhv;
            let s: Vec<f64> = r.iter().zip(&v).map(|(ri, vi)| ri - alpha * vi).collect();
            if max_norm(&s) < tol {
                for i in 0..n {
                    x[i] += alpha * ph[i];
                }
                return Ok((x, total_iters));
            }
            let sh = precond(&s);
            apply(&sh, &mut buf);
            let t = buf.clone();
            let tt = dot(&t, &t);
            if tt == 0.0 {
                broke = true;
                break;
            }
            omega = dot(&t, &s) / tt;
            if omega.abs() < 1e-300 {
                broke = true;
                break;
            }
            for i in 0..n {
                x[i] += alpha * ph[i] + omega * sh[i];
                r[i] = s[i] - omega * t[i];
            }
            if max_norm(&r) < tol {
                return Ok((x, total_iters));
            }
        }
        if !broke && total_iters >= max_iters {
            break;
        }
        // Breakdown: recompute the true residual and start a fresh Krylov
        // space from the current iterate.
    }
    let r = residual_of(&x, &mut buf);
    if max_norm(&r) < tol {
        return Ok((x, total_iters));
    }
    Err(Error::LinearSolveFailure(format!(
        "bicgstab: no convergence in {total_iters} iterations, residual {:e}",
        max_norm(&r)
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{solve_dense, Mat};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn random_banded(
        rng: &mut rand_chacha::ChaCha8Rng,
        n: usize,
        kl: usize,
        ku: usize,
    ) -> (BandMatrix, Mat) {
        let mut band = BandMatrix::zeros(n, kl, ku);
        let mut dense = Mat::zeros(n, n);
        for i in 0..n {
            for j in i.saturating_sub(kl)..=(i + ku).min(n - 1) {
                let v = if i == j {
                    // Dominant diagonal keeps the system well conditioned.
                    rng.gen_range(4.0..8.0)
                } else {
                    rng.gen_range(-1.0..1.0)
                };
                band.set(i, j, v);
                dense[(i, j)] = v;
            }
        }
        (band, dense)
    }

    #[test]
    fn banded_matches_dense() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for &(n, kl, ku) in &[(5usize, 1usize, 1usize), (12, 2, 2), (30, 3, 1), (17, 1, 3)] {
            let (band, dense) = random_banded(&mut rng, n, kl, ku);
            let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let x_band = band.solve(&b).unwrap();
            let x_dense = solve_dense(&dense, &b).unwrap();
            for (a, bb) in x_band.iter().zip(&x_dense) {
                assert!((a - bb).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn banded_pivots_through_zero_diagonal() {
        // [[0,1],[1,0]] requires a row swap immediately.
        let mut band = BandMatrix::zeros(2, 1, 1);
        band.set(0, 1, 1.0);
        band.set(1, 0, 1.0);
        let x = band.solve(&[2.0, 3.0]).unwrap();
        assert_eq!(x, vec![3.0, 2.0]);
    }

    #[test]
    fn banded_reports_singularity() {
        let mut band = BandMatrix::zeros(3, 1, 1);
        band.set(0, 0, 1.0);
        band.set(2, 2, 1.0);
        // Row 1 is entirely zero.
        let err = band.solve(&[1.0, 1.0, 1.0]).unwrap_err();
        assert!(matches!(err, Error::SingularJacobian(_)));
    }

    #[test]
    fn tridiagonal_matches_dense() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let n = 25;
        let sub: Vec<f64> = (0..n - 1).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let sup: Vec<f64> = (0..n - 1).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let diag: Vec<f64> = (0..n).map(|_| rng.gen_range(3.0..5.0)).collect();
        let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let mut dense = Mat::zeros(n, n);
        for i in 0..n {
            dense[(i, i)] = diag[i];
            if i + 1 < n {
                dense[(i, i + 1)] = sup[i];
                dense[(i + 1, i)] = sub[i];
            }
        }
        let x = solve_tridiagonal(&sub, &diag, &sup, &b).unwrap();
        let want = solve_dense(&dense, &b).unwrap();
        for (a, w) in x.iter().zip(&want) {
            assert!((a - w).abs() < 1e-11);
        }
    }

    #[test]
    fn tridiagonal_single_row() {
        let x = solve_tridiagonal(&[], &[4.0], &[], &[8.0]).unwrap();
        assert_eq!(x, vec![2.0]);
    }

    #[test]
    fn cg_solves_spd_system() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let n = 40;
        // A = D + small symmetric perturbation, SPD by dominance.
        let mut a = Mat::zeros(n, n);
        for i in 0..n {
            a[(i, i)] = rng.gen_range(5.0..7.0);
        }
        for i in 0..n {
            for j in 0..i {
                let v = rng.gen_range(-0.3..0.3);
                a[(i, j)] = v;
                a[(j, i)] = v;
            }
        }
        let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let diag: Vec<f64> = (0..n).map(|i| a[(i, i)]).collect();
        let apply = |x: &[f64], y: &mut [f64]| y.copy_from_slice(&a.matvec(x));
        let (x, iters) = cg(apply, &diag, &b, &vec![0.0; n], 1e-12, 1000).unwrap();
        assert!(iters > 0);
        let want = solve_dense(&a, &b).unwrap();
        for (xi, wi) in x.iter().zip(&want) {
            assert!((xi - wi).abs() < 1e-9);
        }
    }

    #[test]
    fn cg_rejects_indefinite_system() {
        let a = Mat::from_rows(&[vec![1.0, 0.0], vec![0.0, -1.0]]).unwrap();
        let apply = |x: &[f64], y: &mut [f64]| y.copy_from_slice(&a.matvec(x));
        let err = cg(apply, &[1.0, 1.0], &[0.0, 1.0], &[0.0, 0.0], 1e-12, 100).unwrap_err();
        assert!(matches!(err, Error::LinearSolveFailure(_)));
    }

    #[test]
    fn bicgstab_solves_nonsymmetric_system() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let n = 35;
        let mut a = Mat::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                a[(i, j)] = if i == j {
                    rng.gen_range(6.0..9.0)
                } else {
                    rng.gen_range(-0.4..0.4)
                };
            }
        }
        let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let diag: Vec<f64> = (0..n).map(|i| a[(i, i)]).collect();
        let apply = |x: &[f64], y: &mut [f64]| y.copy_from_slice(&a.matvec(x));
        let (x, _) = bicgstab(apply, &diag, &b, &vec![0.0; n], 1e-12, 2000).unwrap();
        let want = solve_dense(&a, &b).unwrap();
        for (xi, wi) in x.iter().zip(&want) {
            assert!((xi - wi).abs() < 1e-8);
        }
    }

    #[test]
    fn bicgstab_zero_rhs_returns_zero() {
        let a = Mat::from_rows(&[vec![2.0, 1.0], vec![0.0, 2.0]]).unwrap();
        let apply = |x: &[f64], y: &mut [f64]| y.copy_from_slice(&a.matvec(x));
        let (x, iters) =
            bicgstab(apply, &[2.0, 2.0], &[0.0, 0.0], &[0.0, 0.0], 1e-12, 100).unwrap();
        assert_eq!(x, vec![0.0, 0.0]);
        assert_eq!(iters, 0);
    }

    proptest! {
        #[test]
        fn banded_random_systems(seed in 0u64..300) {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let n = rng.gen_range(3usize..24);
            let kl = rng.gen_range(1usize..4).min(n - 1);
            let ku = rng.gen_range(1usize..4).min(n - 1);
            let (band, dense) = random_banded(&mut rng, n, kl, ku);
            let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let x = band.solve(&b).unwrap();
            let want = solve_dense(&dense, &b).unwrap();
            for (a, w) in x.iter().zip(&want) {
                prop_assert!((a - w).abs() < 1e-9);
            }
        }
    }
}
