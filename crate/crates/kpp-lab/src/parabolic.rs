//! Time integration of the reaction-diffusion system with implicit
//! diffusion and explicit reaction, plus the probes built on it: basin
//! scans over constant seeds and randomized stability probes.

use crate::discretization::{assemble_neumann_laplacian, residual};
use crate::error::{Error, Result};
use crate::linalg::max_norm_diff;
use crate::model::{DomainGrid, StateField, SystemSpec};
use crate::nonlinearity::b_eval;
use crate::parallel::parallel_map;
use crate::solvers::{cg, solve_tridiagonal};
use serde::Serialize;

/// Final-state duplicates match an archive entry below this distance.
pub const ARCHIVE_MATCH_TOL: f64 = 1e-6;
/// Entries this far below zero abort the integration.
pub const POSITIVITY_ABORT: f64 = -1e-12;

#[derive(Debug, Clone, Copy)]
pub struct IntegrationParams {
    pub dt: f64,
    pub t_max: f64,
    /// Residual below which the trajectory counts as steady.
    pub steady_tol: f64,
    /// Sup-norm below which the trajectory counts as extinct.
    pub extinction_tol: f64,
    /// Sup-norm above which the trajectory counts as divergent.
    pub divergence_threshold: f64,
    /// Smallest allowed step after adaptive halving.
    pub dt_floor: f64,
    /// Steps between residual checks; also the adaptivity window.
    pub check_every: usize,
}

impl Default for IntegrationParams {
    fn default() -> Self {
        IntegrationParams {
            dt: 0.01,
            t_max: 200.0,
            steady_tol: 1e-9,
            extinction_tol: 1e-10,
            divergence_threshold: 1e12,
            dt_floor: 1e-5,
            check_every: 100,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum IntegrationOutcome {
    /// Residual dropped below the steady tolerance; `archive_index` is
    /// the matching archive entry, if any.
    Converged {
        archive_index: Option<usize>,
    },
    Extinction,
    Diverged,
    Timeout,
}

/// Per-species spatial summary of the trajectory at one check point.
#[derive(Debug, Clone, Serialize)]
pub struct TraceRow {
    pub time: f64,
    pub max: Vec<f64>,
    pub min: Vec<f64>,
    pub mean: Vec<f64>,
}

impl TraceRow {
    fn sample(u: &StateField, time: f64) -> TraceRow {
        let species = u.species();
        let mut max = Vec::with_capacity(species);
        let mut min = Vec::with_capacity(species);
        let mut mean = Vec::with_capacity(species);
        for i in 0..species {
            let s = u.species_slice(i);
            max.push(s.iter().fold(f64::NEG_INFINITY, |m, v| m.max(*v)));
            min.push(s.iter().fold(f64::INFINITY, |m, v| m.min(*v)));
            mean.push(s.iter().sum::<f64>() / s.len() as f64);
        }
        TraceRow {
            time,
            max,
            min,
            mean,
        }
    }
}

#[derive(Debug, Clone)]
pub struct IntegrationResult {
    pub outcome: IntegrationOutcome,
    pub final_state: StateField,
    pub time: f64,
    pub steps: usize,
    pub final_dt: f64,
    pub final_residual: f64,
    /// One row per check window, first at t = 0, last at classification.
    pub trace: Vec<TraceRow>,
}

/// One implicit-diffusion, explicit-reaction step:
/// `(I - dt d_i Lap) u_i' = u_i + dt (sum_j a_ij u_j - b_i(u))`.
/// The per-species systems are symmetric positive definite; they are
/// solved directly on line grids and by Jacobi-preconditioned CG
/// otherwise.
pub fn imex_step(
    spec: &SystemSpec,
    grid: &DomainGrid,
    u: &StateField,
    dt: f64,
) -> Result<StateField> {
    if u.species() != spec.n || u.grid() != grid {
        return Err(Error::ShapeMismatch(
            "field must match the spec and grid".into(),
        ));
    }
    if !(dt > 0.0) {
        return Err(Error::InvalidInput("step size must be positive".into()));
    }
    let nodes = grid.node_count();
    let lap = assemble_neumann_laplacian(grid).to_sparse();
    let mut rhs = StateField::zeros(grid.clone(), spec.n);
    for p in 0..nodes {
        let point = u.node_values(p);
        let b = b_eval(&point, &spec.competition);
        let a = spec.coupling.at(p);
        for i in 0..spec.n {
            let mut coupling_sum = 0.0;
            for j in 0..spec.n {
                coupling_sum += a[(i, j)] * point[j];
            }
            rhs.set(i, p, point[i] + dt * (coupling_sum - b[i]));
        }
    }
    let mut out = StateField::zeros(grid.clone(), spec.n);
    for i in 0..spec.n {
        let sigma = dt * spec.d[i];
        let r = rhs.species_slice(i);
        let solved = if grid.dimension() == 1 {
            let mut sub = vec![0.0; nodes.saturating_sub(1)];
            let mut sup = vec![0.0; nodes.saturating_sub(1)];
            let mut diag = vec![0.0; nodes];
            for p in 0..nodes {
                for (q, v) in lap.row_entries(p) {
                    if q == p {
                        diag[p] = 1.0 - sigma * v;
                    } else if q + 1 == p {
                        sub[q] = -sigma * v;
                    } else {
                        sup[p] = -sigma * v;
                    }
                }
            }
            solve_tridiagonal(&sub, &diag, &sup, r)?
        } else {
            let apply = |x: &[f64], y: &mut [f64]| {
                lap.matvec(x, y);
                for p in 0..nodes {
                    y[p] = x[p] - sigma * y[p];
                }
            };
            let precond: Vec<f64> = (0..nodes).map(|p| 1.0 - sigma * lap.get(p, p)).collect();
            let tol = 1e-12 * r.iter().fold(1.0f64, |m, v| m.max(v.abs()));
            let (sol, _) = cg(apply, &precond, r, r, tol, 10 * nodes + 100)?;
            sol
        };
        for (p, v) in solved.into_iter().enumerate() {
            out.set(i, p, v);
        }
    }
    Ok(out)
}

/// Integrates from `u0` until the trajectory settles, dies out,
/// diverges, or times out.
///
/// Every [`IntegrationParams::check_every`] steps the trajectory is
/// classified: divergence and extinction by sup norm, steadiness by the
/// elliptic residual (matched against `archive` on success). A residual
/// that grew over the window halves the step down to the floor.
/// Entries dropping below [`POSITIVITY_ABORT`] abort the run.
pub fn integrate(
    spec: &SystemSpec,
    grid: &DomainGrid,
    u0: &StateField,
    params: &IntegrationParams,
    archive: &[StateField],
) -> Result<IntegrationResult> {
    let mut u = u0.clone();
    let mut t = 0.0;
    let mut dt = params.dt;
    let mut steps = 0usize;
    let mut prev_window_res = f64::INFINITY;
    let mut prev_window_max = f64::INFINITY;
    let mut trace = Vec::new();
    let outcome;
    let final_residual;
    loop {
        trace.push(TraceRow::sample(&u, t));
        let max = u.max_abs();
        if !max.is_finite() || max > params.divergence_threshold {
            outcome = IntegrationOutcome::Diverged;
            final_residual = f64::NAN;
            break;
        }
        if max < params.extinction_tol {
            outcome = IntegrationOutcome::Extinction;
            final_residual = residual(spec, grid, &u)?.max_abs();
            break;
        }
        let res = residual(spec, grid, &u)?.max_abs();
        if res < params.steady_tol {
            // A slow exponential decay settles the residual while the
            // amplitude is still far above `extinction_tol`; a state
            // within the archive-matching distance of zero is
            // convergence to the zero state, which is extinction.
            if max < ARCHIVE_MATCH_TOL {
                outcome = IntegrationOutcome::Extinction;
            } else {
                let archive_index = archive
                    .iter()
                    .position(|k| max_norm_diff(k.values(), u.values()) < ARCHIVE_MATCH_TOL);
                outcome = IntegrationOutcome::Converged { archive_index };
            }
            final_residual = res;
            break;
        }
        if t >= params.t_max {
            outcome = IntegrationOutcome::Timeout;
            final_residual = res;
            break;
        }
        // Halving rescues the run when the explicit reaction over-steps:
        // that failure mode blows the residual up geometrically within a
        // window. Smooth residual growth at bounded amplitude is a
        // trajectory passing a saddle, and a growing sup norm is a
        // runaway; halving in either of those cases only postpones the
        // verdict.
        if res > 4.0 * prev_window_res && max <= 1.01 * prev_window_max {
            dt = (0.5 * dt).max(params.dt_floor);
        }
        prev_window_res = res;
        prev_window_max = max;
        for _ in 0..params.check_every {
            if t >= params.t_max {
                break;
            }
            u = imex_step(spec, grid, &u, dt)?;
            t += dt;
            steps += 1;
            let min = u.min_entry();
            if min < POSITIVITY_ABORT {
                return Err(Error::PositivityLoss { time: t, min });
            }
            let m = u.max_abs();
            if !m.is_finite() || m > params.divergence_threshold {
                break;
            }
        }
    }
    Ok(IntegrationResult {
        outcome,
        final_state: u,
        time: t,
        steps,
        final_dt: dt,
        final_residual,
        trace,
    })
}

/// One probe trajectory of [`stability_probe`].
#[derive(Debug, Clone, Serialize)]
pub struct ProbeRun {
    pub outcome: IntegrationOutcome,
    /// True iff the trajectory settled back onto the probed state.
    pub returned: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ProbeReport {
    pub seed: u64,
    pub amplitude: f64,
    pub runs: Vec<ProbeRun>,
    pub all_returned: bool,
    pub any_escaped: bool,
}

/// Integrates `count` random nonnegative perturbations of `base`
/// (uniform entrywise in `[-amplitude, amplitude]`, clamped at zero) and
/// records whether each settles back onto `base`. The seed is recorded
/// so a probe can be replayed exactly.
pub fn stability_probe(
    spec: &SystemSpec,
    grid: &DomainGrid,
    base: &StateField,
    amplitude: f64,
    count: usize,
    seed: u64,
    params: &IntegrationParams,
) -> Result<ProbeReport> {
    use rand::{Rng, SeedableRng};
    if !(amplitude > 0.0) {
        return Err(Error::InvalidInput(
            "probe amplitude must be positive".into(),
        ));
    }
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut starts = Vec::with_capacity(count);
    for _ in 0..count {
        let mut probe = base.clone();
        for v in probe.values_mut() {
            *v = (*v + rng.gen_range(-amplitude..amplitude)).max(0.0);
        }
        starts.push(probe);
    }
    let archive = [base.clone()];
    let results: Vec<Result<IntegrationResult>> =
        parallel_map(starts, |u0| integrate(spec, grid, &u0, params, &archive));
    let mut runs = Vec::with_capacity(count);
    for r in results {
        let r = r?;
        let returned = matches!(
            r.outcome,
            IntegrationOutcome::Converged {
                archive_index: Some(0)
            }
        );
        runs.push(ProbeRun {
            outcome: r.outcome,
            returned,
        });
    }
    let all_returned = runs.iter().all(|p| p.returned);
    let any_escaped = runs.iter().any(|p| !p.returned);
    Ok(ProbeReport {
        seed,
        amplitude,
        runs,
        all_returned,
        any_escaped,
    })
}

/// One cell of a [`basin_scan`].
#[derive(Debug, Clone, Serialize)]
pub struct BasinCell {
    pub seed: Vec<f64>,
    pub outcome: IntegrationOutcome,
    /// Constant final values when the settled state is spatially
    /// constant.
    pub final_values: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct BasinScan {
    pub cells: Vec<BasinCell>,
}

/// Integrates every constant seed of a `(lattice+1)^n` grid over
/// `[0, bounds]` (zero included) and records where each lands relative
/// to `archive`.
pub fn basin_scan(
    spec: &SystemSpec,
    grid: &DomainGrid,
    bounds: &[f64],
    lattice: usize,
    params: &IntegrationParams,
    archive: &[StateField],
) -> Result<BasinScan> {
    if bounds.len() != spec.n {
        return Err(Error::ShapeMismatch(
            "scan bounds must have one entry per species".into(),
        ));
    }
    let per_axis = lattice + 1;
    let total = per_axis
        .checked_pow(spec.n as u32)
        .filter(|t| *t <= 20_000)
        .ok_or_else(|| {
            Error::InvalidInput("seed lattice too large; lower the lattice resolution".into())
        })?;
    let seeds: Vec<Vec<f64>> = (0..total)
        .map(|flat| {
            let mut seed = vec![0.0; spec.n];
            let mut rest = flat;
            for i in 0..spec.n {
                seed[i] = bounds[i] * (rest % per_axis) as f64 / lattice.max(1) as f64;
                rest /= per_axis;
            }
            seed
        })
        .collect();
    let results = parallel_map(seeds, |seed| {
        let u0 = StateField::constant(grid.clone(), &seed);
        integrate(spec, grid, &u0, params, archive).map(|r| (seed, r))
    });
    let mut cells = Vec::with_capacity(total);
    for r in results {
        let (seed, r) = r?;
        let final_values = r.final_state.as_constant(1e-6);
        cells.push(BasinCell {
            seed,
            outcome: r.outcome,
            final_values,
        });
    }
    Ok(BasinScan { cells })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Mat;
    use crate::scenario;

    fn asym_pair() -> (f64, f64) {
        let q = (15.0f64 / 2.0).sqrt();
        (3.0 - q, 3.0 + q)
    }

    fn archive_of_constants(grid: &DomainGrid, states: &[Vec<f64>]) -> Vec<StateField> {
        states
            .iter()
            .map(|u| StateField::constant(grid.clone(), u))
            .collect()
    }

    fn counterexample_archive(grid: &DomainGrid) -> Vec<StateField> {
        let (lo, hi) = asym_pair();
        archive_of_constants(
            grid,
            &[vec![0.0, 0.0], vec![lo, hi], vec![1.0, 1.0], vec![hi, lo]],
        )
    }

    #[test]
    fn constant_steady_state_is_a_fixed_point() {
        let s = scenario::counterexample();
        let grid = DomainGrid::line(1.0, 16).unwrap();
        let u = StateField::constant(grid.clone(), &[1.0, 1.0]);
        let stepped = imex_step(&s.spec, &grid, &u, 0.01).unwrap();
        assert!(max_norm_diff(stepped.values(), u.values()) < 1e-14);
    }

    #[test]
    fn pure_diffusion_conserves_mass_and_decays() {
        let spec = SystemSpec::lotka_volterra(
            vec![1.0],
            Mat::from_rows(&[vec![0.0]]).unwrap(),
            Mat::from_rows(&[vec![0.0]]).unwrap(),
        );
        let grid = DomainGrid::line(1.0, 32).unwrap();
        let mut u = StateField::zeros(grid.clone(), 1);
        for p in 0..grid.node_count() {
            let x = grid.coords(p)[0];
            u.set(0, p, 1.0 + 0.5 * (std::f64::consts::PI * x).cos());
        }
        let mean_before: f64 = u.values().iter().sum::<f64>() / grid.node_count() as f64;
        let mut v = u.clone();
        for _ in 0..50 {
            v = imex_step(&spec, &grid, &v, 0.01).unwrap();
        }
        let mean_after: f64 = v.values().iter().sum::<f64>() / grid.node_count() as f64;
        assert!((mean_before - mean_after).abs() < 1e-12);
        let amp_before = u.max_entry() - 1.0;
        let amp_after = v.max_entry() - mean_after;
        assert!(amp_after < 0.05 * amp_before, "{amp_after} vs {amp_before}");
    }

    #[test]
    fn diagonal_seed_settles_on_symmetric_state() {
        let s = scenario::counterexample();
        let grid = DomainGrid::line(1.0, 8).unwrap();
        let archive = counterexample_archive(&grid);
        let u0 = StateField::constant(grid.clone(), &[2.0, 2.0]);
        let r = integrate(&s.spec, &grid, &u0, &IntegrationParams::default(), &archive).unwrap();
        assert_eq!(
            r.outcome,
            IntegrationOutcome::Converged {
                archive_index: Some(2)
            },
            "{:?}",
            r.outcome
        );
        assert!(r.final_residual < 1e-9);
    }

    #[test]
    fn off_diagonal_seed_settles_on_asymmetric_state() {
        let s = scenario::counterexample();
        let grid = DomainGrid::line(1.0, 8).unwrap();
        let archive = counterexample_archive(&grid);
        let u0 = StateField::constant(grid.clone(), &[2.0, 0.5]);
        let r = integrate(&s.spec, &grid, &u0, &IntegrationParams::default(), &archive).unwrap();
        assert_eq!(
            r.outcome,
            IntegrationOutcome::Converged {
                archive_index: Some(3)
            },
            "{:?}",
            r.outcome
        );
    }

    #[test]
    fn zero_seed_is_extinction() {
        let s = scenario::counterexample();
        let grid = DomainGrid::line(1.0, 8).unwrap();
        let archive = counterexample_archive(&grid);
        let u0 = StateField::zeros(grid.clone(), 2);
        let r = integrate(&s.spec, &grid, &u0, &IntegrationParams::default(), &archive).unwrap();
        assert_eq!(r.outcome, IntegrationOutcome::Extinction);
        assert_eq!(r.steps, 0);
    }

    #[test]
    fn unbounded_growth_is_flagged_divergent() {
        let spec = SystemSpec::lotka_volterra(
            vec![1.0],
            Mat::from_rows(&[vec![2.0]]).unwrap(),
            Mat::from_rows(&[vec![0.0]]).unwrap(),
        );
        let grid = DomainGrid::line(1.0, 4).unwrap();
        let u0 = StateField::constant(grid.clone(), &[1.0]);
        let params = IntegrationParams {
            t_max: 50.0,
            ..Default::default()
        };
        let r = integrate(&spec, &grid, &u0, &params, &[]).unwrap();
        assert_eq!(r.outcome, IntegrationOutcome::Diverged);
    }

    #[test]
    fn short_horizon_times_out() {
        let s = scenario::counterexample();
        let grid = DomainGrid::line(1.0, 8).unwrap();
        let u0 = StateField::constant(grid.clone(), &[2.0, 0.5]);
        let params = IntegrationParams {
            t_max: 0.05,
            ..Default::default()
        };
        let r = integrate(&s.spec, &grid, &u0, &params, &[]).unwrap();
        assert_eq!(r.outcome, IntegrationOutcome::Timeout);
        assert!(r.time >= 0.05);
    }

    #[test]
    fn negative_entries_abort() {
        let s = scenario::counterexample();
        let grid = DomainGrid::line(1.0, 8).unwrap();
        let u0 = StateField::constant(grid.clone(), &[-0.1, 0.5]);
        let err = integrate(&s.spec, &grid, &u0, &IntegrationParams::default(), &[]).unwrap_err();
        assert!(matches!(err, Error::PositivityLoss { .. }), "{err:?}");
    }

    #[test]
    fn probes_return_to_stable_state_and_escape_unstable_one() {
        let s = scenario::counterexample();
        let grid = DomainGrid::line(1.0, 8).unwrap();
        let (lo, hi) = asym_pair();
        let params = IntegrationParams::default();
        let stable = StateField::constant(grid.clone(), &[hi, lo]);
        let report = stability_probe(&s.spec, &grid, &stable, 1e-2, 3, 0xfeed, &params).unwrap();
        assert!(report.all_returned, "{report:?}");
        let saddle = StateField::constant(grid.clone(), &[1.0, 1.0]);
        let report = stability_probe(&s.spec, &grid, &saddle, 1e-2, 3, 0xfeed, &params).unwrap();
        assert!(report.any_escaped, "{report:?}");
        assert_eq!(report.seed, 0xfeed);
    }

    #[test]
    fn basin_scan_splits_along_the_diagonal() {
        let s = scenario::counterexample();
        let grid = DomainGrid::line(1.0, 8).unwrap();
        let archive = counterexample_archive(&grid);
        let scan = basin_scan(
            &s.spec,
            &grid,
            &[3.0, 3.0],
            3,
            &IntegrationParams::default(),
            &archive,
        )
        .unwrap();
        assert_eq!(scan.cells.len(), 16);
        for cell in &scan.cells {
            let (s1, s2) = (cell.seed[0], cell.seed[1]);
            let want = if s1 == 0.0 && s2 == 0.0 {
                None
            } else if s1 == s2 {
                Some(2)
            } else if s1 > s2 {
                Some(3)
            } else {
                Some(1)
            };
            match want {
                None => assert_eq!(cell.outcome, IntegrationOutcome::Extinction),
                Some(idx) => assert_eq!(
                    cell.outcome,
                    IntegrationOutcome::Converged {
                        archive_index: Some(idx)
                    },
                    "seed {:?}",
                    cell.seed
                ),
            }
        }
    }
}
