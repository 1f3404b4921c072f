//! Spectral analysis: the principal eigenvalue of the linearized-at-zero
//! operator via Perron power iteration, and growth-rate classification of
//! steady states.

pub mod dense;

use crate::discretization::{assemble_linearized, residual, BlockOperator};
use crate::error::{Error, Result};
use crate::linalg::{dot, max_norm, Mat};
use crate::model::{DomainGrid, StateField, SystemSpec};
use crate::nonlinearity::b_jacobian;
use serde::Serialize;

pub const DEFAULT_EIG_TOL: f64 = 1e-10;
pub const DEFAULT_EIG_MAX_ITERS: usize = 50_000;
/// Band around zero growth treated as marginal.
pub const MARGINAL_BAND: f64 = 1e-8;
/// Residual bound a field must meet to count as steady.
pub const STEADY_TOL: f64 = 1e-9;
/// Seed for the propagator iteration's start vector. A fixed random
/// start, unlike all-ones, is not orthogonal to any particular
/// eigendirection by accident of symmetry.
pub const PROPAGATOR_SEED: u64 = 0x6b70702d;

/// Principal eigenpair of the linearized operator.
#[derive(Debug, Clone)]
pub struct EigenResult {
    pub lambda1: f64,
    /// Positive eigenfunction, normalized to max entry 1.
    pub eigenfunction: StateField,
    /// `max norm of (L phi - lambda1 phi)` at the normalized function.
    pub residual: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Classification {
    Stable,
    Unstable,
    Marginal { band: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum StabilityMethod {
    PerModeExact,
    PropagatorPowerIteration,
}

/// Growth-rate verdict for a steady state: the rightmost real part of the
/// linearization's spectrum and its sign classification.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct StabilityResult {
    pub leading_growth_rate: f64,
    pub classification: Classification,
    pub method: StabilityMethod,
}

fn classify(growth: f64) -> Classification {
    if growth > MARGINAL_BAND {
        Classification::Unstable
    } else if growth < -MARGINAL_BAND {
        Classification::Stable
    } else {
        Classification::Marginal {
            band: MARGINAL_BAND,
        }
    }
}

/// Computes the principal eigenvalue of `L` by power iteration on the
/// nonnegative irreducible shift `c*I - L`, `c = 1 + max diag(L)`,
/// starting from all-ones. Returns `lambda1 = c - rho(c*I - L)`, the
/// eigenvalue of `L` of smallest real part, with its positive
/// eigenfunction.
///
/// Converges when the Rayleigh estimate stabilizes to relative `tol` and
/// the eigenpair residual drops below `tol`; errors with the last
/// residual otherwise.
pub fn principal_eigenpair(op: &BlockOperator, tol: f64, max_iters: usize) -> Result<EigenResult> {
    let dim = op.dim();
    let c = 1.0 + op.max_diag();
    let apply = |x: &[f64]| -> Result<Vec<f64>> {
        let mut y = vec![0.0; dim];
        op.matvec(x, &mut y);
        for i in 0..dim {
            y[i] = c * x[i] - y[i];
        }
        Ok(y)
    };
    // The dominant eigenvalue of the nonnegative primitive shift is real
    // and simple, so the complex-pair verdict stays off.
    let out = power_iterate(apply, vec![1.0; dim], tol, max_iters, false, false)?;
    let eigenfunction = StateField::new(op.grid().clone(), op.species(), out.vector)?;
    Ok(EigenResult {
        lambda1: c - out.value,
        eigenfunction,
        residual: out.residual,
        iterations: out.iterations,
    })
}

/// Convenience wrapper assembling `L` from a spec.
pub fn principal_eigenvalue(
    spec: &SystemSpec,
    grid: &DomainGrid,
    tol: f64,
    max_iters: usize,
) -> Result<EigenResult> {
    principal_eigenpair(&assemble_linearized(spec, grid), tol, max_iters)
}

/// The n x n growth matrix of one Laplacian mode at a constant state:
/// `J(u) - |mu| diag(d)` with `J = A - Db(u)`.
pub fn constant_state_mode_matrix(spec: &SystemSpec, u_const: &[f64], mode: f64) -> Result<Mat> {
    let a = spec.coupling.constant().ok_or_else(|| {
        Error::InvalidInput("per-mode reduction requires spatially constant coupling".into())
    })?;
    let db = b_jacobian(u_const, &spec.competition);
    let mut j = a.sub(&db);
    for i in 0..spec.n {
        j[(i, i)] -= spec.d[i] * mode.abs();
    }
    Ok(j)
}

fn rightmost_of(m: &Mat) -> Result<f64> {
    if m.nrows() == 2 {
        let [e1, _] = dense::eigenvalues_2x2(m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]);
        Ok(e1.0)
    } else {
        Ok(dense::rightmost_real_part(&dense::eigenvalues(m)?))
    }
}

/// Classifies a constant steady state by exact per-mode reduction: the
/// linearization block-diagonalizes over the Laplacian's cosine modes, so
/// the leading growth rate is the max over modes of the rightmost
/// eigenvalue of [`constant_state_mode_matrix`].
pub fn stability_of_constant_state(
    spec: &SystemSpec,
    grid: &DomainGrid,
    u_const: &[f64],
) -> Result<StabilityResult> {
    if u_const.len() != spec.n {
        return Err(Error::ShapeMismatch(
            "state must have one entry per species".into(),
        ));
    }
    let field = StateField::constant(grid.clone(), u_const);
    let r = residual(spec, grid, &field)?.max_abs();
    if r > STEADY_TOL {
        return Err(Error::NotSteady {
            residual: r,
            tolerance: STEADY_TOL,
        });
    }
    let lap = crate::discretization::assemble_neumann_laplacian(grid);
    let mut growth = f64::NEG_INFINITY;
    for mode in lap.mode_values() {
        let m = constant_state_mode_matrix(spec, u_const, mode)?;
        growth = growth.max(rightmost_of(&m)?);
    }
    Ok(StabilityResult {
        leading_growth_rate: growth,
        classification: classify(growth),
        method: StabilityMethod::PerModeExact,
    })
}

/// Result of [`power_iterate`]: dominant eigenvalue, max-normalized
/// eigenvector, eigenpair residual, iterations used.
struct PowerOutcome {
    value: f64,
    vector: Vec<f64>,
    residual: f64,
    iterations: usize,
}

/// Power iteration with a two-term Krylov safety net.
///
/// Plain Rayleigh estimates converge at the ratio of the top two
/// eigenvalues, which is painfully close to 1 when diffusion dominates
/// the operator norm. Each iterate pair therefore also feeds a 2x2
/// Galerkin reduction of the operator over an orthonormalized basis of
/// `span{x, x_prev}`: on the dominant two-dimensional invariant subspace
/// the reduction is exact and its eigenvalues recover both leading
/// eigenvalues at once. A real dominant root that stays put for three
/// iterations is verified by one fresh application against the deflated
/// vector `w - z2*x` (exactly the dominant eigenvector on that subspace)
/// and accepted with the verified residual.
///
/// Complex roots, once the plain residual has stalled, are the signature
/// of a dominant complex pair: an error when `complex_abort` is set,
/// ignored otherwise (the right choice when the dominant eigenvalue is
/// known real, as for a nonnegative primitive operator).
///
/// `relative_gates` scales the residual tolerances by
/// `max(1, |estimate|)`; leave it off when the caller needs absolute
/// eigenvalue accuracy from a large-norm operator.
fn power_iterate<S>(
    apply: S,
    start: Vec<f64>,
    tol: f64,
    max_iters: usize,
    relative_gates: bool,
    complex_abort: bool,
) -> Result<PowerOutcome>
where
    S: Fn(&[f64]) -> Result<Vec<f64>>,
{
    let dim = start.len();
    let mut x = start;
    let scale = 1.0 / max_norm(&x);
    for v in x.iter_mut() {
        *v *= scale;
    }
    let gate_scale = |e: f64| {
        if relative_gates {
            e.abs().max(1.0)
        } else {
            1.0
        }
    };
    let mut x_prev: Vec<f64> = Vec::new();
    // Normalizing factor mapping x_prev to x: P x_prev = s_last * x.
    let mut s_last = 1.0;
    let mut est_prev = f64::NAN;
    let mut fit_prev = f64::NAN;
    let mut fit_streak = 0usize;
    let mut res = f64::INFINITY;
    let mut best_res = f64::INFINITY;
    let mut best_at = 0usize;
    for it in 1..=max_iters {
        let w = apply(&x)?;
        let g11 = dot(&x, &x);
        let r1 = dot(&x, &w);
        let est = r1 / g11;
        res = (0..dim)
            .map(|i| (w[i] - est * x[i]).abs())
            .fold(0.0, f64::max)
            / max_norm(&x);
        if it > 1 && ((est - est_prev) / est).abs() < tol && res < tol * gate_scale(est) {
            let scale = 1.0 / max_norm(&x);
            let vector: Vec<f64> = x.iter().map(|v| v * scale).collect();
            return Ok(PowerOutcome {
                value: est,
                vector,
                residual: res,
                iterations: it,
            });
        }
        if res < 0.99 * best_res {
            best_res = res;
            best_at = it;
        }
        if it >= 4 && !x_prev.is_empty() {
            // Orthonormalized 2D Galerkin reduction of the operator over
            // span{x, x_prev}, using the exact relation P x_prev = s_last*x.
            // Normal equations on the raw pair lose the fit to roundoff
            // precisely when acceleration is needed: consecutive iterates
            // collapse toward parallel as the plain rate approaches 1.
            let n2x = g11.sqrt();
            let q1: Vec<f64> = x.iter().map(|v| v / n2x).collect();
            let b = dot(&x_prev, &q1);
            let r: Vec<f64> = x_prev.iter().zip(&q1).map(|(xp, q)| xp - b * q).collect();
            let rn = dot(&r, &r).sqrt();
            if rn > 1e-14 * dot(&x_prev, &x_prev).sqrt() {
                let q2: Vec<f64> = r.iter().map(|v| v / rn).collect();
                let w1: Vec<f64> = w.iter().map(|v| v / n2x).collect();
                let w2: Vec<f64> = x
                    .iter()
                    .zip(&w1)
                    .map(|(xi, wi)| (s_last * xi - b * wi) / rn)
                    .collect();
                let h = [
                    [dot(&q1, &w1), dot(&q1, &w2)],
                    [dot(&q2, &w1), dot(&q2, &w2)],
                ];
                let [(e1, im1), (e2, _)] =
                    dense::eigenvalues_2x2(h[0][0], h[0][1], h[1][0], h[1][1]);
                let c1 = dot(&q1, &w);
                let c2 = dot(&q2, &w);
                let fit_res = (0..dim)
                    .map(|i| (w[i] - c1 * q1[i] - c2 * q2[i]).abs())
                    .fold(0.0, f64::max);
                let wnorm = max_norm(&w).max(1e-300);
                if im1 == 0.0 {
                    let (root, other) = if e1.abs() >= e2.abs() {
                        (e1, e2)
                    } else {
                        (e2, e1)
                    };
                    if (root - fit_prev).abs() < tol * root.abs().max(1.0) && fit_res < tol * wnorm
                    {
                        fit_streak += 1;
                        if fit_streak >= 3 {
                            // On the fitted subspace w - other*x is exactly
                            // the dominant eigenvector; verify the deflated
                            // pair with one fresh application.
                            let mut v: Vec<f64> = (0..dim).map(|i| w[i] - other * x[i]).collect();
                            let norm = max_norm(&v);
                            if norm > 1e-300 {
                                let s = 1.0 / norm;
                                for e in v.iter_mut() {
                                    *e *= s;
                                }
                                let pv = apply(&v)?;
                                let rho = dot(&v, &pv) / dot(&v, &v);
                                let res_v = (0..dim)
                                    .map(|i| (pv[i] - rho * v[i]).abs())
                                    .fold(0.0, f64::max);
                                if (rho - root).abs() <= 10.0 * tol * rho.abs().max(1.0)
                                    && res_v <= 10.0 * tol * wnorm.max(1.0)
                                {
                                    return Ok(PowerOutcome {
                                        value: rho,
                                        vector: v,
                                        residual: res_v,
                                        iterations: it,
                                    });
                                }
                            }
                            fit_streak = 0;
                        }
                    } else {
                        fit_streak = 0;
                    }
                    fit_prev = root;
                } else {
                    fit_streak = 0;
                    fit_prev = f64::NAN;
                    let modulus = (e1 * e1 + im1 * im1).sqrt();
                    let stalled = it - best_at > 300;
                    let fit_trustworthy = fit_res < 0.01 * wnorm;
                    let clearly_complex = im1.abs() > 1e-4 * modulus.max(1e-300);
                    if complex_abort && stalled && fit_trustworthy && clearly_complex {
                        return Err(Error::ComplexPair);
                    }
                }
            }
        }
        est_prev = est;
        s_last = max_norm(&w);
        x_prev = std::mem::replace(&mut x, w);
        let scale = 1.0 / s_last;
        for v in x.iter_mut() {
            *v *= scale;
        }
    }
    Err(Error::NonConvergence {
        iterations: max_iters,
        residual: res,
    })
}

/// Power iteration on a propagator given as a solve closure; returns the
/// dominant eigenvalue estimate and iteration count. Propagator spectra
/// sit near 1, so the tolerance gates are relative and a dominant
/// complex pair aborts with [`Error::ComplexPair`].
fn propagator_power<S>(solve: S, dim: usize, tol: f64, max_iters: usize) -> Result<(f64, usize)>
where
    S: Fn(&[f64]) -> Result<Vec<f64>>,
{
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(PROPAGATOR_SEED);
    let start: Vec<f64> = (0..dim).map(|_| rng.gen_range(0.5..1.5)).collect();
    let out = power_iterate(solve, start, tol, max_iters, true, true)?;
    Ok((out.value, out.iterations))
}

/// Classifies any steady state via power iteration on the implicit-Euler
/// propagator `(I - tau*G)^{-1}` of the linearized dynamics
/// `G = -(L + Db(u))`. The dominant propagator eigenvalue `nu` maps to
/// the growth rate `(1 - 1/nu)/tau`.
///
/// The step is sized against the reaction part alone,
/// `tau = 0.1 / max node row/column sum of (A - Db)`: diffusion is
/// dissipative and only pushes real parts left, so by Gershgorin the
/// rightmost eigenvalue of `G` is bounded by the reaction rows and
/// `nu = 1/(1 - tau*lambda)` stays order-preserving; tying tau to the
/// full operator norm instead would cluster the propagator spectrum
/// within `O(h^2)` of 1 and stall the iteration on fine grids.
///
/// Valid when the rightmost eigenvalue of `G` is real; a dominant complex
/// pair is detected through the two-term Krylov fit and reported as
/// [`Error::ComplexPair`].
pub fn stability_of_state(
    spec: &SystemSpec,
    grid: &DomainGrid,
    u: &StateField,
    tol: f64,
) -> Result<StabilityResult> {
    let r = residual(spec, grid, u)?.max_abs();
    if r > tol {
        return Err(Error::NotSteady {
            residual: r,
            tolerance: tol,
        });
    }
    let n = spec.n;
    let nodes = grid.node_count();
    let dim = n * nodes;
    let op = assemble_linearized(spec, grid);
    let db: Vec<Mat> = (0..nodes)
        .map(|p| b_jacobian(&u.node_values(p), &spec.competition))
        .collect();

    let lap = op.laplacian().to_sparse();
    let mut reaction_bound = 0.0f64;
    for p in 0..nodes {
        let a = spec.coupling.at(p);
        for i in 0..n {
            let mut row = 0.0;
            let mut col = 0.0;
            for j in 0..n {
                row += (a[(i, j)] - db[p][(i, j)]).abs();
                col += (a[(j, i)] - db[p][(j, i)]).abs();
            }
            reaction_bound = reaction_bound.max(row).max(col);
        }
    }
    let tau = if reaction_bound > 0.0 {
        0.1 / reaction_bound
    } else {
        1.0
    };

    // I - tau*G = I + tau*(L + Db).
    let eig_tol = 1e-9_f64.min(tol);
    let (nu, iterations) = match grid.dimension() {
        1 => {
            // Node-major ordering keeps the matrix banded with half
            // bandwidth n.
            let band = crate::discretization::linearized_band(spec, grid, &db, 1.0, tau);
            propagator_power(
                |v| {
                    let rhs = crate::discretization::to_node_major(v, n, nodes);
                    let sol = band.clone().solve(&rhs)?;
                    Ok(crate::discretization::to_species_major(&sol, n, nodes))
                },
                dim,
                eig_tol,
                200_000,
            )?
        }
        _ => {
            let apply = |x: &[f64], y: &mut [f64]| {
                op.matvec(x, y);
                for p in 0..nodes {
                    for i in 0..n {
                        let mut reaction = 0.0;
                        for j in 0..n {
                            reaction += db[p][(i, j)] * x[j * nodes + p];
                        }
                        let idx = i * nodes + p;
                        y[idx] = x[idx] + tau * (y[idx] + reaction);
                    }
                }
            };
            let mut diag = vec![0.0; dim];
            for i in 0..n {
                for p in 0..nodes {
                    diag[i * nodes + p] = 1.0
                        + tau
                            * (-spec.d[i] * lap.get(p, p) - spec.coupling.at(p)[(i, i)]
                                + db[p][(i, i)]);
                }
            }
            propagator_power(
                |v| {
                    let (sol, _) = crate::solvers::bicgstab(apply, &diag, v, v, 1e-12, 10_000)?;
                    Ok(sol)
                },
                dim,
                eig_tol,
                200_000,
            )?
        }
    };
    let growth = (1.0 - 1.0 / nu) / tau;
    let _ = iterations;
    Ok(StabilityResult {
        leading_growth_rate: growth,
        classification: classify(growth),
        method: StabilityMethod::PropagatorPowerIteration,
    })
}
