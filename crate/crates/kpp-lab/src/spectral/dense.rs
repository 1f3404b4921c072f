//! Dense eigenvalue solver for general real matrices: balancing,
//! Householder reduction to Hessenberg form, then Francis double-shift QR
//! with deflation. Values only, no vectors; capped at 400x400. Serves as
//! the brute-force oracle for the iterative paths and as the n x n solve
//! inside the per-mode stability reduction.

use crate::error::{Error, Result};
use crate::linalg::Mat;

/// Largest matrix the dense path accepts.
pub const MAX_DENSE_DIM: usize = 400;

/// All eigenvalues as `(re, im)` pairs, sorted by descending real part,
/// then descending imaginary part.
pub fn eigenvalues(a: &Mat) -> Result<Vec<(f64, f64)>> {
    if !a.is_square() {
        return Err(Error::ShapeMismatch(
            "eigenvalues need a square matrix".into(),
        ));
    }
    let n = a.nrows();
    if n > MAX_DENSE_DIM {
        return Err(Error::InvalidInput(format!(
            "dense eigensolver capped at {MAX_DENSE_DIM}, got {n}"
        )));
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut h = a.clone();
    balance(&mut h);
    hessenberg(&mut h);
    let mut eigs = hqr(&mut h)?;
    eigs.sort_by(|a, b| {
        b.0.partial_cmp(&a.0)
            .unwrap()
            .then(b.1.partial_cmp(&a.1).unwrap())
    });
    Ok(eigs)
}

/// Largest real part in a spectrum.
pub fn rightmost_real_part(eigs: &[(f64, f64)]) -> f64 {
    eigs.iter().map(|e| e.0).fold(f64::NEG_INFINITY, f64::max)
}

/// Smallest real part in a spectrum.
pub fn leftmost_real_part(eigs: &[(f64, f64)]) -> f64 {
    eigs.iter().map(|e| e.0).fold(f64::INFINITY, f64::min)
}

/// Closed-form eigenvalues of `[[a, b], [c, d]]`.
pub fn eigenvalues_2x2(a: f64, b: f64, c: f64, d: f64) -> [(f64, f64); 2] {
    let tr = a + d;
    let det = a * d - b * c;
    let disc = tr * tr / 4.0 - det;
    if disc >= 0.0 {
        let sq = disc.sqrt();
        let mu = tr / 2.0;
        // Larger-magnitude root first, partner via the product, avoiding
        // cancellation.
        let l1 = if mu >= 0.0 { mu + sq } else { mu - sq };
        let l2 = if l1 != 0.0 { det / l1 } else { 0.0 };
        [(l1.max(l2), 0.0), (l1.min(l2), 0.0)]
    } else {
        let im = (-disc).sqrt();
        [(tr / 2.0, im), (tr / 2.0, -im)]
    }
}

/// Similarity scaling by powers of two to even out row and column norms.
fn balance(h: &mut Mat) {
    const RADIX: f64 = 2.0;
    let sqrdx = RADIX * RADIX;
    let n = h.nrows();
    let mut done = false;
    while !done {
        done = true;
        for i in 0..n {
            let mut r = 0.0;
            let mut c = 0.0;
            for j in 0..n {
                if j != i {
                    c += h[(j, i)].abs();
                    r += h[(i, j)].abs();
                }
            }
            if c != 0.0 && r != 0.0 && c.is_finite() && r.is_finite() {
                let mut g = r / RADIX;
                let mut f = 1.0;
                let s = c + r;
                let mut cc = c;
                while cc < g {
                    f *= RADIX;
                    cc *= sqrdx;
                }
                g = r * RADIX;
                while cc > g {
                    f /= RADIX;
                    cc /= sqrdx;
                }
                if (cc + r) / f < 0.95 * s {
                    done = false;
                    let ginv = 1.0 / f;
                    for j in 0..n {
                        h[(i, j)] *= ginv;
                    }
                    for j in 0..n {
                        h[(j, i)] *= f;
                    }
                }
            }
        }
    }
}

/// Householder reduction to upper Hessenberg form, in place.
fn hessenberg(h: &mut Mat) {
    let n = h.nrows();
    if n < 3 {
        return;
    }
    let mut v = vec![0.0; n];
    for k in 0..n - 2 {
        let mut norm2 = 0.0;
        for i in k + 1..n {
            norm2 += h[(i, k)] * h[(i, k)];
        }
        if norm2 == 0.0 {
            continue;
        }
        let x0 = h[(k + 1, k)];
        let alpha = if x0 > 0.0 {
            -norm2.sqrt()
        } else {
            norm2.sqrt()
        };
        v[k + 1] = x0 - alpha;
        for i in k + 2..n {
            v[i] = h[(i, k)];
        }
        let vnorm2: f64 = (k + 1..n).map(|i| v[i] * v[i]).sum();
        if vnorm2 == 0.0 {
            continue;
        }
        let tau = 2.0 / vnorm2;
        // Left reflection on rows k+1..n; columns below k are already zero.
        for j in k..n {
            let mut s = 0.0;
            for i in k + 1..n {
                s += v[i] * h[(i, j)];
            }
            s *= tau;
            for i in k + 1..n {
                h[(i, j)] -= s * v[i];
            }
        }
        // Right reflection on columns k+1..n.
        for i in 0..n {
            let mut s = 0.0;
            for j in k + 1..n {
                s += h[(i, j)] * v[j];
            }
            s *= tau;
            for j in k + 1..n {
                h[(i, j)] -= s * v[j];
            }
        }
        h[(k + 1, k)] = alpha;
        for i in k + 2..n {
            h[(i, k)] = 0.0;
        }
    }
}

/// Francis double-shift QR on an upper Hessenberg matrix; destroys the
/// input. Classic EISPACK/`hqr` structure with exceptional shifts every
/// ten stalled sweeps.
fn hqr(h: &mut Mat) -> Result<Vec<(f64, f64)>> {
    let n = h.nrows();
    let eps = f64::EPSILON;
    let mut eigs = Vec::with_capacity(n);
    let mut anorm = 0.0;
    for i in 0..n {
        for j in i.saturating_sub(1)..n {
            anorm += h[(i, j)].abs();
        }
    }
    if anorm == 0.0 {
        // Zero matrix.
        return Ok(vec![(0.0, 0.0); n]);
    }
    let mut nn = n as isize - 1;
    let mut t = 0.0;
    while nn >= 0 {
        let mut its = 0;
        loop {
            // Look for a negligible subdiagonal to split the matrix.
            let mut l = nn;
            while l >= 1 {
                let s =
                    h[(l as usize - 1, l as usize - 1)].abs() + h[(l as usize, l as usize)].abs();
                let s = if s == 0.0 { anorm } else { s };
                if h[(l as usize, l as usize - 1)].abs() <= eps * s {
                    h[(l as usize, l as usize - 1)] = 0.0;
                    break;
                }
                l -= 1;
            }
            let x = h[(nn as usize, nn as usize)];
            if l == nn {
                eigs.push((x + t, 0.0));
                nn -= 1;
                break;
            }
            let y = h[(nn as usize - 1, nn as usize - 1)];
            let w = h[(nn as usize, nn as usize - 1)] * h[(nn as usize - 1, nn as usize)];
            if l == nn - 1 {
                let p = 0.5 * (y - x);
                let q = p * p + w;
                let z = q.abs().sqrt();
                let x = x + t;
                if q >= 0.0 {
                    let z = p + if p >= 0.0 { z } else { -z };
                    let l1 = x + z;
                    let l2 = if z != 0.0 { x - w / z } else { l1 };
                    eigs.push((l1, 0.0));
                    eigs.push((l2, 0.0));
                } else {
                    eigs.push((x + p, z));
                    eigs.push((x + p, -z));
                }
                nn -= 2;
                break;
            }
            // No small block split off yet: run one double-shift sweep.
            if its == 60 {
                return Err(Error::NonConvergence {
                    iterations: 60,
                    residual: h[(nn as usize, nn as usize - 1)].abs(),
                });
            }
            let (mut x, mut y, mut w) = (x, y, w);
            if its > 0 && its % 10 == 0 {
                // Exceptional shift.
                t += x;
                for i in 0..=nn as usize {
                    h[(i, i)] -= x;
                }
                let s = h[(nn as usize, nn as usize - 1)].abs()
                    + h[(nn as usize - 1, nn as usize - 2)].abs();
                x = 0.75 * s;
                y = x;
                w = -0.4375 * s * s;
            }
            its += 1;
            // Find two consecutive small subdiagonals to start the sweep.
            let mut m = nn - 2;
            let (mut p, mut q, mut r) = (0.0, 0.0, 0.0);
            while m >= l {
                let mu = m as usize;
                let z = h[(mu, mu)];
                let rr = x - z;
                let ss = y - z;
                p = (rr * ss - w) / h[(mu + 1, mu)] + h[(mu, mu + 1)];
                q = h[(mu + 1, mu + 1)] - z - rr - ss;
                r = h[(mu + 2, mu + 1)];
                let scale = p.abs() + q.abs() + r.abs();
                p /= scale;
                q /= scale;
                r /= scale;
                if m == l {
                    break;
                }
                let u = h[(mu, mu - 1)].abs() * (q.abs() + r.abs());
                let v = p.abs() * (h[(mu - 1, mu - 1)].abs() + z.abs() + h[(mu + 1, mu + 1)].abs());
                if u <= eps * v {
                    break;
                }
                m -= 1;
            }
            let m = m.max(l) as usize;
            let nnu = nn as usize;
            let lu = l as usize;
            for i in m..=nnu - 2 {
                h[(i + 2, i)] = 0.0;
                if i != m {
                    h[(i + 2, i - 1)] = 0.0;
                }
            }
            // Bulge chase over rows m..nn.
            for k in m..nnu {
                if k != m {
                    p = h[(k, k - 1)];
                    q = h[(k + 1, k - 1)];
                    r = if k != nnu - 1 { h[(k + 2, k - 1)] } else { 0.0 };
                    x = p.abs() + q.abs() + r.abs();
                    if x != 0.0 {
                        p /= x;
                        q /= x;
                        r /= x;
                    }
                }
                let s = {
                    let mag = (p * p + q * q + r * r).sqrt();
                    if p >= 0.0 {
                        mag
                    } else {
                        -mag
                    }
                };
                if s == 0.0 {
                    continue;
                }
                if k == m {
                    if lu != m {
                        h[(k, k - 1)] = -h[(k, k - 1)];
                    }
                } else {
                    h[(k, k - 1)] = -s * x;
                }
                p += s;
                x = p / s;
                y = q / s;
                let z = r / s;
                q /= p;
                r /= p;
                for j in k..=nnu {
                    let mut pp = h[(k, j)] + q * h[(k + 1, j)];
                    if k != nnu - 1 {
                        pp += r * h[(k + 2, j)];
                        h[(k + 2, j)] -= pp * z;
                    }
                    h[(k + 1, j)] -= pp * y;
                    h[(k, j)] -= pp * x;
                }
                let mmin = nnu.min(k + 3);
                for i in lu..=mmin {
                    let mut pp = x * h[(i, k)] + y * h[(i, k + 1)];
                    if k != nnu - 1 {
                        pp += z * h[(i, k + 2)];
                        h[(i, k + 2)] -= pp * r;
                    }
                    h[(i, k + 1)] -= pp * q;
                    h[(i, k)] -= pp;
                }
            }
        }
    }
    Ok(eigs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn assert_spectrum_close(got: &[(f64, f64)], want: &mut Vec<(f64, f64)>, tol: f64) {
        assert_eq!(got.len(), want.len());
        want.sort_by(|a, b| {
            b.0.partial_cmp(&a.0)
                .unwrap()
                .then(b.1.partial_cmp(&a.1).unwrap())
        });
        for (g, w) in got.iter().zip(want.iter()) {
            assert!(
                (g.0 - w.0).abs() < tol && (g.1 - w.1).abs() < tol,
                "{g:?} vs {w:?}"
            );
        }
    }

    #[test]
    fn diagonal_matrix() {
        let a = Mat::from_rows(&[
            vec![3.0, 0.0, 0.0],
            vec![0.0, -1.0, 0.0],
            vec![0.0, 0.0, 7.0],
        ])
        .unwrap();
        let eigs = eigenvalues(&a).unwrap();
        let mut want = vec![(3.0, 0.0), (-1.0, 0.0), (7.0, 0.0)];
        assert_spectrum_close(&eigs, &mut want, 1e-12);
    }

    #[test]
    fn symmetric_tridiagonal_cosine_spectrum() {
        let n = 10;
        let mut a = Mat::zeros(n, n);
        for i in 0..n {
            a[(i, i)] = 2.0;
            if i + 1 < n {
                a[(i, i + 1)] = -1.0;
                a[(i + 1, i)] = -1.0;
            }
        }
        let eigs = eigenvalues(&a).unwrap();
        let mut want: Vec<(f64, f64)> = (1..=n)
            .map(|k| {
                (
                    2.0 - 2.0 * (k as f64 * std::f64::consts::PI / (n as f64 + 1.0)).cos(),
                    0.0,
                )
            })
            .collect();
        assert_spectrum_close(&eigs, &mut want, 1e-10);
    }

    #[test]
    fn companion_matrix_roots() {
        // x^4 - 10x^3 + 35x^2 - 50x + 24 = (x-1)(x-2)(x-3)(x-4)
        let a = Mat::from_rows(&[
            vec![10.0, -35.0, 50.0, -24.0],
            vec![1.0, 0.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0, 0.0],
            vec![0.0, 0.0, 1.0, 0.0],
        ])
        .unwrap();
        let eigs = eigenvalues(&a).unwrap();
        let mut want = vec![(1.0, 0.0), (2.0, 0.0), (3.0, 0.0), (4.0, 0.0)];
        assert_spectrum_close(&eigs, &mut want, 1e-9);
    }

    #[test]
    fn rotation_matrix_complex_pair() {
        let c = (0.3f64).cos();
        let s = (0.3f64).sin();
        let a = Mat::from_rows(&[vec![c, -s], vec![s, c]]).unwrap();
        let eigs = eigenvalues(&a).unwrap();
        let mut want = vec![(c, s), (c, -s)];
        assert_spectrum_close(&eigs, &mut want, 1e-12);
    }

    #[test]
    fn two_by_two_closed_form() {
        let [l1, l2] = eigenvalues_2x2(-0.3, -0.7, -0.7, -0.3);
        assert!((l1.0 - 0.4).abs() < 1e-15 && l1.1 == 0.0);
        assert!((l2.0 + 1.0).abs() < 1e-15 && l2.1 == 0.0);
        let [c1, c2] = eigenvalues_2x2(0.0, -1.0, 1.0, 0.0);
        assert!((c1.1 - 1.0).abs() < 1e-15 && c1.0.abs() < 1e-15);
        assert!((c2.1 + 1.0).abs() < 1e-15);
    }

    #[test]
    fn counterexample_coupling_spectrum() {
        let a = Mat::from_rows(&[vec![0.8, 0.2], vec![0.2, 0.8]]).unwrap();
        let eigs = eigenvalues(&a).unwrap();
        assert!((eigs[0].0 - 1.0).abs() < 1e-12);
        assert!((eigs[1].0 - 0.6).abs() < 1e-12);
    }

    #[test]
    fn similarity_preserves_known_spectrum() {
        // Q D Q^T with Q from Gram-Schmidt on a random matrix.
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        let n = 50;
        let diag: Vec<f64> = (0..n).map(|i| (i as f64) * 0.37 - 5.0).collect();
        let mut q = Mat::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                q[(i, j)] = rng.gen_range(-1.0..1.0);
            }
        }
        // Orthonormalize columns.
        for j in 0..n {
            for k in 0..j {
                let mut proj = 0.0;
                for i in 0..n {
                    proj += q[(i, j)] * q[(i, k)];
                }
                for i in 0..n {
                    let v = q[(i, k)];
                    q[(i, j)] -= proj * v;
                }
            }
            let norm: f64 = (0..n).map(|i| q[(i, j)] * q[(i, j)]).sum::<f64>().sqrt();
            for i in 0..n {
                q[(i, j)] /= norm;
            }
        }
        let mut a = Mat::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                let mut s = 0.0;
                for k in 0..n {
                    s += q[(i, k)] * diag[k] * q[(j, k)];
                }
                a[(i, j)] = s;
            }
        }
        let eigs = eigenvalues(&a).unwrap();
        let mut want: Vec<(f64, f64)> = diag.iter().map(|&d| (d, 0.0)).collect();
        assert_spectrum_close(&eigs, &mut want, 1e-8);
    }

    #[test]
    fn rejects_oversized_matrix() {
        let a = Mat::zeros(MAX_DENSE_DIM + 1, MAX_DENSE_DIM + 1);
        assert!(eigenvalues(&a).is_err());
    }

    #[test]
    fn zero_matrix() {
        let eigs = eigenvalues(&Mat::zeros(5, 5)).unwrap();
        assert!(eigs.iter().all(|&(re, im)| re == 0.0 && im == 0.0));
    }

    proptest! {
        // Trace and determinant are symmetric functions of the spectrum.
        #[test]
        fn trace_and_determinant_consistent(seed in 0u64..200) {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let n = rng.gen_range(2usize..10);
            let mut a = Mat::zeros(n, n);
            for i in 0..n {
                for j in 0..n {
                    a[(i, j)] = rng.gen_range(-2.0..2.0);
                }
            }
            let eigs = eigenvalues(&a).unwrap();
            let tr: f64 = eigs.iter().map(|e| e.0).sum();
            prop_assert!((tr - a.trace()).abs() < 1e-8 * (1.0 + a.trace().abs()));
            let det_mag: f64 = eigs
                .iter()
                .map(|e| (e.0 * e.0 + e.1 * e.1).sqrt())
                .product();
            let det = a.determinant().abs();
            prop_assert!((det_mag - det).abs() < 1e-6 * (1.0 + det));
            // Complex eigenvalues come in conjugate pairs.
            let im_sum: f64 = eigs.iter().map(|e| e.1).sum();
            prop_assert!(im_sum.abs() < 1e-8);
        }
    }
}
