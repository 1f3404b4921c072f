//! Steady states: constant-state root finding, damped Newton on the full
//! discretized system, multistart search, and the coexistence
//! counter-example verification built from those pieces.

use crate::discretization::{linearized_band, residual, to_node_major, to_species_major};
use crate::error::{Error, Result};
use crate::linalg::{max_norm, max_norm_diff, solve_dense, Mat};
use crate::model::{
    compare_values, DomainGrid, OrderRelation, StateField, SystemSpec, EQUALITY_TOL,
};
use crate::nonlinearity::{b_eval, b_jacobian};
use crate::parallel::parallel_map;
use crate::spectral::{stability_of_constant_state, Classification, StabilityResult};
use serde::Serialize;

pub const DEFAULT_NEWTON_TOL: f64 = 1e-10;
pub const DEFAULT_NEWTON_MAX_ITERS: usize = 50;
/// Line-search halvings before a step counts as divergent.
pub const MAX_HALVINGS: usize = 30;
/// Entries above this are strictly positive; entries below its negation
/// disqualify a state.
pub const POSITIVITY_THRESHOLD: f64 = 1e-8;
/// Constant-state duplicates are merged below this max-norm distance.
pub const CONSTANT_DEDUP_TOL: f64 = 1e-8;
/// Field duplicates are merged below this max-norm distance.
pub const FIELD_DEDUP_TOL: f64 = 1e-6;

/// A converged steady state with its achieved residual.
#[derive(Debug, Clone)]
pub struct SteadyState {
    pub state: StateField,
    pub residual: f64,
    pub iterations: usize,
}

impl SteadyState {
    /// Per-species values when the state is spatially constant.
    pub fn constant_values(&self, tol: f64) -> Option<Vec<f64>> {
        self.state.as_constant(tol)
    }
}

/// Per-species search bound `2 * max_i sum_j a_ij / c_ii`: any
/// steady state of the spatially constant system satisfies
/// `c_ii u_i <= sum_j a_ij` at its own maximum, so doubling that bound
/// gives the lattice generous margin.
pub fn default_search_box(spec: &SystemSpec) -> Vec<f64> {
    let mats: Vec<&Mat> = match &spec.coupling {
        crate::model::CouplingField::Constant(m) => vec![m],
        crate::model::CouplingField::PerNode(ms) => ms.iter().collect(),
    };
    let mut max_row = 0.0f64;
    for a in mats {
        for i in 0..spec.n {
            let row: f64 = (0..spec.n).map(|j| a[(i, j)]).sum();
            max_row = max_row.max(row);
        }
    }
    (0..spec.n)
        .map(|i| {
            let cii = spec.competition[(i, i)];
            if cii > 0.0 {
                2.0 * max_row / cii
            } else {
                1.0
            }
        })
        .collect()
}

fn algebraic_residual(a: &Mat, c: &Mat, u: &[f64]) -> Vec<f64> {
    let au = a.matvec(u);
    let b = b_eval(u, c);
    au.iter().zip(&b).map(|(x, y)| x - y).collect()
}

/// Damped Newton on the spatially constant system `Au = b(u)`.
fn newton_algebraic(
    a: &Mat,
    c: &Mat,
    seed: &[f64],
    tol: f64,
    max_iters: usize,
) -> Result<(Vec<f64>, usize)> {
    let mut u = seed.to_vec();
    let mut r = algebraic_residual(a, c, &u);
    let mut rn = max_norm(&r);
    for it in 0..max_iters {
        if rn <= tol {
            return Ok((u, it));
        }
        let j = a.sub(&b_jacobian(&u, c));
        let rhs: Vec<f64> = r.iter().map(|v| -v).collect();
        let delta = solve_dense(&j, &rhs)?;
        let mut s = 1.0;
        let mut accepted = false;
        for _ in 0..=MAX_HALVINGS {
            let u_try: Vec<f64> = u.iter().zip(&delta).map(|(x, d)| x + s * d).collect();
            let r_try = algebraic_residual(a, c, &u_try);
            let rn_try = max_norm(&r_try);
            if rn_try.is_finite() && rn_try < rn {
                u = u_try;
                r = r_try;
                rn = rn_try;
                accepted = true;
                break;
            }
            s *= 0.5;
        }
        if !accepted {
            return Err(Error::Divergence {
                halvings: MAX_HALVINGS,
            });
        }
    }
    if rn <= tol {
        Ok((u, max_iters))
    } else {
        Err(Error::NonConvergence {
            iterations: max_iters,
            residual: rn,
        })
    }
}

/// All nonnegative constant steady states found by Newton from a
/// `(lattice+1)^n` seed grid over `[0, bounds]`, deduplicated and sorted
/// lexicographically by species values.
///
/// Requires spatially constant coupling; seeds whose iteration fails or
/// leaves the nonnegative cone are dropped silently.
pub fn find_constant_states(
    spec: &SystemSpec,
    bounds: &[f64],
    lattice: usize,
    tol: f64,
) -> Result<Vec<Vec<f64>>> {
    let a = spec.coupling.constant().ok_or_else(|| {
        Error::InvalidInput("constant-state search requires spatially constant coupling".into())
    })?;
    if bounds.len() != spec.n {
        return Err(Error::ShapeMismatch(
            "search bounds must have one entry per species".into(),
        ));
    }
    let per_axis = lattice + 1;
    let total = per_axis
        .checked_pow(spec.n as u32)
        .filter(|t| *t <= 200_000)
        .ok_or_else(|| {
            Error::InvalidInput("seed lattice too large; lower the lattice resolution".into())
        })?;
    let c = &spec.competition;
    let mut found: Vec<Vec<f64>> = Vec::new();
    for flat in 0..total {
        let mut seed = vec![0.0; spec.n];
        let mut rest = flat;
        for i in 0..spec.n {
            seed[i] = bounds[i] * (rest % per_axis) as f64 / lattice.max(1) as f64;
            rest /= per_axis;
        }
        let Ok((mut root, _)) = newton_algebraic(a, c, &seed, tol, 100) else {
            continue;
        };
        if root.iter().any(|v| *v < -POSITIVITY_THRESHOLD) {
            continue;
        }
        for v in root.iter_mut() {
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        if !found
            .iter()
            .any(|k| max_norm_diff(k, &root) < CONSTANT_DEDUP_TOL)
        {
            found.push(root);
        }
    }
    found.sort_by(|x, y| {
        x.iter()
            .zip(y)
            .map(|(a, b)| a.total_cmp(b))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    Ok(found)
}

/// Damped Newton on the full discretized system from an arbitrary field.
/// The linearization is solved directly on line grids (banded LU in
/// node-major ordering) and by preconditioned BiCGSTAB otherwise; steps
/// halve until the residual decreases, and a step that cannot decrease it
/// within [`MAX_HALVINGS`] halvings reports divergence.
pub fn newton_steady(
    spec: &SystemSpec,
    grid: &DomainGrid,
    u0: &StateField,
    tol: f64,
    max_iters: usize,
) -> Result<SteadyState> {
    if u0.species() != spec.n || u0.grid() != grid {
        return Err(Error::ShapeMismatch(
            "initial field must match the spec and grid".into(),
        ));
    }
    let n = spec.n;
    let nodes = grid.node_count();
    let dim = n * nodes;
    let mut u = u0.clone();
    let mut r = residual(spec, grid, &u)?;
    let mut rn = r.max_abs();
    for it in 0..max_iters {
        if rn <= tol {
            return Ok(SteadyState {
                state: u,
                residual: rn,
                iterations: it,
            });
        }
        let db: Vec<Mat> = (0..nodes)
            .map(|p| b_jacobian(&u.node_values(p), &spec.competition))
            .collect();
        let rhs: Vec<f64> = r.values().iter().map(|v| -v).collect();
        let delta = if grid.dimension() == 1 {
            let band = linearized_band(spec, grid, &db, 0.0, 1.0);
            let sol = band.solve(&to_node_major(&rhs, n, nodes))?;
            to_species_major(&sol, n, nodes)
        } else {
            let op = crate::discretization::assemble_linearized(spec, grid);
            let lap = op.laplacian().to_sparse();
            let apply = |x: &[f64], y: &mut [f64]| {
                op.matvec(x, y);
                for p in 0..nodes {
                    for i in 0..n {
                        let mut reaction = 0.0;
                        for j in 0..n {
                            reaction += db[p][(i, j)] * x[j * nodes + p];
                        }
                        y[i * nodes + p] += reaction;
                    }
                }
            };
            let mut diag = vec![0.0; dim];
            for i in 0..n {
                for p in 0..nodes {
                    diag[i * nodes + p] =
                        -spec.d[i] * lap.get(p, p) - spec.coupling.at(p)[(i, i)] + db[p][(i, i)];
                }
            }
            let lin_tol = 1e-12 * rn.max(1.0);
            let (sol, _) =
                crate::solvers::bicgstab(apply, &diag, &rhs, &vec![0.0; dim], lin_tol, 20_000)?;
            sol
        };
        let mut s = 1.0;
        let mut accepted = false;
        for _ in 0..=MAX_HALVINGS {
            let mut u_try = u.clone();
            for (x, d) in u_try.values_mut().iter_mut().zip(&delta) {
                *x += s * d;
            }
            let r_try = residual(spec, grid, &u_try)?;
            let rn_try = r_try.max_abs();
            if rn_try.is_finite() && rn_try < rn {
                u = u_try;
                r = r_try;
                rn = rn_try;
                accepted = true;
                break;
            }
            s *= 0.5;
        }
        if !accepted {
            return Err(Error::Divergence {
                halvings: MAX_HALVINGS,
            });
        }
    }
    if rn <= tol {
        Ok(SteadyState {
            state: u,
            residual: rn,
            iterations: max_iters,
        })
    } else {
        Err(Error::NonConvergence {
            iterations: max_iters,
            residual: rn,
        })
    }
}

/// Runs [`newton_steady`] from every constant seed on a
/// `(lattice+1)^n` grid over `[0, bounds]` (zero included, so the
/// trivial state is always probed), keeps converged nonnegative states,
/// merges duplicates, and orders results by species values at node 0.
pub fn multistart_search(
    spec: &SystemSpec,
    grid: &DomainGrid,
    bounds: &[f64],
    lattice: usize,
    tol: f64,
) -> Result<Vec<SteadyState>> {
    if bounds.len() != spec.n {
        return Err(Error::ShapeMismatch(
            "search bounds must have one entry per species".into(),
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
    let runs = parallel_map(seeds, |seed| {
        let u0 = StateField::constant(grid.clone(), &seed);
        newton_steady(spec, grid, &u0, tol, DEFAULT_NEWTON_MAX_ITERS).ok()
    });
    let mut kept: Vec<SteadyState> = Vec::new();
    for state in runs.into_iter().flatten() {
        if state.state.min_entry() < -POSITIVITY_THRESHOLD {
            continue;
        }
        if !kept
            .iter()
            .any(|k| max_norm_diff(k.state.values(), state.state.values()) < FIELD_DEDUP_TOL)
        {
            kept.push(state);
        }
    }
    kept.sort_by(|x, y| {
        let a = x.state.node_values(0);
        let b = y.state.node_values(0);
        a.iter()
            .zip(&b)
            .map(|(p, q)| p.total_cmp(q))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    Ok(kept)
}

/// Pairwise componentwise order relations between constant states.
pub fn comparability_matrix(states: &[Vec<f64>], tol: f64) -> Vec<Vec<OrderRelation>> {
    states
        .iter()
        .map(|u| states.iter().map(|v| compare_values(u, v, tol)).collect())
        .collect()
}

/// Outcome of checking the multiple-coexistence counter-example on a
/// given spec and grid.
#[derive(Debug, Clone, Serialize)]
pub struct CounterexampleReport {
    /// Strictly positive constant states, sorted lexicographically.
    pub positive_states: Vec<Vec<f64>>,
    /// Full discretized residual of each state on the given grid.
    pub residuals: Vec<f64>,
    pub stability: Vec<StabilityResult>,
    pub comparability: Vec<Vec<OrderRelation>>,
    pub distinct: bool,
    pub all_incomparable: bool,
    pub stable_count: usize,
    pub unstable_count: usize,
    /// Residual bound the states were checked against.
    pub residual_tolerance: f64,
    /// True iff at least three distinct positive states exist, pairwise
    /// incomparable, at least two of them stable: the configuration that
    /// rules out both uniqueness and order-based selection arguments.
    pub pass: bool,
}

/// Residual bound a verified counter-example state must meet.
pub const COUNTEREXAMPLE_RESIDUAL_TOL: f64 = 1e-11;

/// Finds the positive constant states of `spec`, checks them to
/// [`COUNTEREXAMPLE_RESIDUAL_TOL`] on `grid`, classifies their
/// stability, and tests pairwise order relations.
pub fn verify_counterexample(spec: &SystemSpec, grid: &DomainGrid) -> Result<CounterexampleReport> {
    let bounds = default_search_box(spec);
    let all = find_constant_states(spec, &bounds, 12, 1e-12)?;
    let positive_states: Vec<Vec<f64>> = all
        .into_iter()
        .filter(|u| u.iter().all(|v| *v > POSITIVITY_THRESHOLD))
        .collect();
    let mut residuals = Vec::new();
    let mut stability = Vec::new();
    for u in &positive_states {
        let field = StateField::constant(grid.clone(), u);
        residuals.push(residual(spec, grid, &field)?.max_abs());
        stability.push(stability_of_constant_state(spec, grid, u)?);
    }
    let comparability = comparability_matrix(&positive_states, EQUALITY_TOL);
    let k = positive_states.len();
    let mut distinct = true;
    let mut all_incomparable = true;
    for i in 0..k {
        for j in 0..k {
            if i == j {
                continue;
            }
            if max_norm_diff(&positive_states[i], &positive_states[j]) < FIELD_DEDUP_TOL {
                distinct = false;
            }
            if comparability[i][j] != OrderRelation::Incomparable {
                all_incomparable = false;
            }
        }
    }
    let stable_count = stability
        .iter()
        .filter(|s| s.classification == Classification::Stable)
        .count();
    let unstable_count = stability
        .iter()
        .filter(|s| s.classification == Classification::Unstable)
        .count();
    let residual_ok = residuals.iter().all(|r| *r <= COUNTEREXAMPLE_RESIDUAL_TOL);
    let pass = k >= 3 && distinct && all_incomparable && residual_ok && stable_count >= 2;
    Ok(CounterexampleReport {
        positive_states,
        residuals,
        stability,
        comparability,
        distinct,
        all_incomparable,
        stable_count,
        unstable_count,
        residual_tolerance: COUNTEREXAMPLE_RESIDUAL_TOL,
        pass,
    })
}

/// One continuation step of a mutation branch.
#[derive(Debug, Clone, Serialize)]
pub struct MutationStep {
    pub epsilon: f64,
    pub state: Vec<f64>,
    pub growth_rate: f64,
    pub classification: Classification,
    pub strictly_positive: bool,
}

/// A branch continued from one semi-trivial state of the decoupled
/// system.
#[derive(Debug, Clone, Serialize)]
pub struct MutationBranch {
    pub origin: Vec<f64>,
    pub origin_stability: StabilityResult,
    pub steps: Vec<MutationStep>,
}

#[derive(Debug, Clone, Serialize)]
pub struct MutationReport {
    pub branches: Vec<MutationBranch>,
    /// True iff every continued state on every branch is strictly
    /// positive and stable.
    pub all_steps_stable_positive: bool,
}

/// Default cross-coupling path: twenty uniform steps up to 0.2.
pub fn default_mutation_epsilons() -> Vec<f64> {
    (1..=20).map(|k| k as f64 * 0.01).collect()
}

/// Continues the two semi-trivial states `(a11/c11, 0)` and
/// `(0, a22/c22)` of the decoupled system along the cross-coupling path
/// `A(eps) = [[a11, eps], [eps, a22]]`, classifying stability and
/// positivity at every step. Demonstrates how single-species branches
/// mutate into coexistence states as weak cross-coupling switches on.
pub fn mutation_continuation(
    spec: &SystemSpec,
    grid: &DomainGrid,
    epsilons: &[f64],
) -> Result<MutationReport> {
    if spec.n != 2 {
        return Err(Error::InvalidInput(
            "mutation continuation is defined for two-species systems".into(),
        ));
    }
    let a = spec.coupling.constant().ok_or_else(|| {
        Error::InvalidInput("mutation continuation requires spatially constant coupling".into())
    })?;
    if epsilons.iter().any(|e| *e <= 0.0) || epsilons.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidInput(
            "epsilon path must be strictly positive and increasing".into(),
        ));
    }
    let c = &spec.competition;
    let (a11, a22) = (a[(0, 0)], a[(1, 1)]);
    let decoupled = SystemSpec::lotka_volterra(
        spec.d.clone(),
        Mat::from_rows(&[vec![a11, 0.0], vec![0.0, a22]])?,
        c.clone(),
    );
    let origins = [vec![a11 / c[(0, 0)], 0.0], vec![0.0, a22 / c[(1, 1)]]];
    let mut branches = Vec::new();
    let mut all_ok = true;
    for origin in origins {
        let origin_stability = stability_of_constant_state(&decoupled, grid, &origin)?;
        let mut current = origin.clone();
        let mut steps = Vec::new();
        for &eps in epsilons {
            let spec_eps = SystemSpec::lotka_volterra(
                spec.d.clone(),
                Mat::from_rows(&[vec![a11, eps], vec![eps, a22]])?,
                c.clone(),
            );
            let a_eps = spec_eps
                .coupling
                .constant()
                .expect("constant by construction");
            let (state, _) = newton_algebraic(a_eps, c, &current, 1e-12, 100)?;
            let stab = stability_of_constant_state(&spec_eps, grid, &state)?;
            let strictly_positive = state.iter().all(|v| *v > POSITIVITY_THRESHOLD);
            if !(strictly_positive && stab.classification == Classification::Stable) {
                all_ok = false;
            }
            steps.push(MutationStep {
                epsilon: eps,
                state: state.clone(),
                growth_rate: stab.leading_growth_rate,
                classification: stab.classification,
                strictly_positive,
            });
            current = state;
        }
        branches.push(MutationBranch {
            origin,
            origin_stability,
            steps,
        });
    }
    Ok(MutationReport {
        branches,
        all_steps_stable_positive: all_ok,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario;
    use crate::spectral::constant_state_mode_matrix;
    use proptest::prelude::*;

    fn asym_pair() -> (f64, f64) {
        let q = (15.0f64 / 2.0).sqrt();
        (3.0 - q, 3.0 + q)
    }

    #[test]
    fn counterexample_has_exactly_four_nonnegative_states() {
        let s = scenario::counterexample();
        let states = find_constant_states(&s.spec, &[20.0, 20.0], 12, 1e-12).unwrap();
        let (lo, hi) = asym_pair();
        let expected = [vec![0.0, 0.0], vec![lo, hi], vec![1.0, 1.0], vec![hi, lo]];
        assert_eq!(states.len(), 4, "{states:?}");
        for (got, want) in states.iter().zip(&expected) {
            assert!(max_norm_diff(got, want) < 1e-9, "{got:?} vs {want:?}");
        }
        let a = s.spec.coupling.constant().unwrap();
        for u in &states {
            assert!(max_norm(&algebraic_residual(a, &s.spec.competition, u)) <= 1e-12);
        }
    }

    #[test]
    fn diagonal_competition_has_unique_positive_state() {
        let s = scenario::diagonal_competition();
        let bounds = default_search_box(&s.spec);
        let states = find_constant_states(&s.spec, &bounds, 12, 1e-12).unwrap();
        assert_eq!(states.len(), 2, "{states:?}");
        assert!(max_norm(&states[0]) == 0.0);
        let v = 1.0 / 10.9;
        assert!(max_norm_diff(&states[1], &[v, v]) < 1e-9);
    }

    #[test]
    fn single_logistic_states() {
        let s = scenario::single_logistic();
        let states = find_constant_states(&s.spec, &[20.0], 10, 1e-12).unwrap();
        assert_eq!(states.len(), 2);
        assert!(states[0][0].abs() < 1e-12);
        assert!((states[1][0] - 10.0).abs() < 1e-9);
    }

    #[test]
    fn default_box_for_counterexample() {
        let s = scenario::counterexample();
        let b = default_search_box(&s.spec);
        assert_eq!(b, vec![20.0, 20.0]);
    }

    #[test]
    fn newton_converges_from_wavy_seed() {
        let s = scenario::counterexample();
        let grid = DomainGrid::line(1.0, 16).unwrap();
        let mut u0 = StateField::zeros(grid.clone(), 2);
        for p in 0..grid.node_count() {
            let x = grid.coords(p)[0];
            u0.set(0, p, 4.0 + 2.0 * (std::f64::consts::PI * x).cos());
            u0.set(1, p, 0.5);
        }
        let out = newton_steady(&s.spec, &grid, &u0, 1e-12, 50).unwrap();
        assert!(out.residual <= 1e-12);
        let values = out
            .constant_values(1e-8)
            .expect("steady states here are constant");
        assert!(values.iter().all(|v| *v >= 0.0));
    }

    #[test]
    fn newton_reports_nonconvergence_when_starved() {
        let s = scenario::counterexample();
        let grid = DomainGrid::line(1.0, 8).unwrap();
        let u0 = StateField::constant(grid.clone(), &[10.0, 10.0]);
        let err = newton_steady(&s.spec, &grid, &u0, 1e-12, 1).unwrap_err();
        assert!(matches!(err, Error::NonConvergence { .. }), "{err:?}");
    }

    #[test]
    fn multistart_finds_all_four_states() {
        let s = scenario::counterexample();
        let grid = DomainGrid::line(1.0, 8).unwrap();
        let bounds = default_search_box(&s.spec);
        let states = multistart_search(&s.spec, &grid, &bounds, 6, 1e-11).unwrap();
        assert_eq!(states.len(), 4, "{:?}", states.len());
        let (lo, hi) = asym_pair();
        let firsts: Vec<f64> = states.iter().map(|st| st.state.node_values(0)[0]).collect();
        let expected = [0.0, lo, 1.0, hi];
        for (got, want) in firsts.iter().zip(&expected) {
            assert!((got - want).abs() < 1e-8, "{firsts:?}");
        }
        for st in &states {
            assert!(st.constant_values(1e-7).is_some());
        }
    }

    #[test]
    fn verify_counterexample_passes() {
        let s = scenario::counterexample();
        let grid = DomainGrid::line(1.0, 32).unwrap();
        let report = verify_counterexample(&s.spec, &grid).unwrap();
        assert!(report.pass);
        assert_eq!(report.positive_states.len(), 3);
        assert_eq!(report.stable_count, 2);
        assert_eq!(report.unstable_count, 1);
        assert!(report.residuals.iter().all(|r| *r <= 1e-11));
        assert!(report.distinct && report.all_incomparable);
    }

    #[test]
    fn comparability_of_positive_triple() {
        let (lo, hi) = asym_pair();
        let states = vec![vec![lo, hi], vec![1.0, 1.0], vec![hi, lo]];
        let m = comparability_matrix(&states, EQUALITY_TOL);
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j {
                    OrderRelation::Equal
                } else {
                    OrderRelation::Incomparable
                };
                assert_eq!(m[i][j], want, "({i},{j})");
            }
        }
    }

    #[test]
    fn semi_trivial_jacobian_matches_closed_form() {
        let s = scenario::counterexample();
        let c = &s.spec.competition;
        let decoupled = SystemSpec::lotka_volterra(
            s.spec.d.clone(),
            Mat::from_rows(&[vec![0.8, 0.0], vec![0.0, 0.8]]).unwrap(),
            c.clone(),
        );
        let j = constant_state_mode_matrix(&decoupled, &[8.0, 0.0], 0.0).unwrap();
        let want = [[-0.8, -7.2], [0.0, -6.4]];
        for i in 0..2 {
            for k in 0..2 {
                assert!(
                    (j[(i, k)] - want[i][k]).abs() < 1e-12,
                    "({i},{k}) = {}",
                    j[(i, k)]
                );
            }
        }
    }

    #[test]
    fn mutation_continuation_reaches_coexistence() {
        let s = scenario::counterexample();
        let grid = DomainGrid::line(1.0, 8).unwrap();
        let eps = default_mutation_epsilons();
        let report = mutation_continuation(&s.spec, &grid, &eps).unwrap();
        assert!(report.all_steps_stable_positive);
        assert_eq!(report.branches.len(), 2);
        let (lo, hi) = asym_pair();
        for branch in &report.branches {
            assert_eq!(
                branch.origin_stability.classification,
                Classification::Stable
            );
            let last = branch.steps.last().unwrap();
            assert!((last.epsilon - 0.2).abs() < 1e-15);
            let matches_either = max_norm_diff(&last.state, &[lo, hi]) < 1e-6
                || max_norm_diff(&last.state, &[hi, lo]) < 1e-6;
            assert!(matches_either, "{:?}", last.state);
        }
        let finals: Vec<&Vec<f64>> = report
            .branches
            .iter()
            .map(|b| &b.steps.last().unwrap().state)
            .collect();
        assert!(max_norm_diff(finals[0], finals[1]) > 1.0);
    }

    #[test]
    fn mutation_rejects_bad_epsilon_path() {
        let s = scenario::counterexample();
        let grid = DomainGrid::line(1.0, 4).unwrap();
        assert!(mutation_continuation(&s.spec, &grid, &[0.1, 0.05]).is_err());
        assert!(mutation_continuation(&s.spec, &grid, &[0.0, 0.1]).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn constant_state_search_invariants(
            a11 in 0.3f64..1.2, a22 in 0.3f64..1.2,
            a12 in 0.01f64..0.5, a21 in 0.01f64..0.5,
            c11 in 0.05f64..1.0, c22 in 0.05f64..1.0,
            c12 in 0.0f64..1.0, c21 in 0.0f64..1.0,
        ) {
            let spec = SystemSpec::lotka_volterra(
                vec![1.0, 1.0],
                Mat::from_rows(&[vec![a11, a12], vec![a21, a22]]).unwrap(),
                Mat::from_rows(&[vec![c11, c12], vec![c21, c22]]).unwrap(),
            );
            let bounds = default_search_box(&spec);
            let states = find_constant_states(&spec, &bounds, 5, 1e-10).unwrap();
            let a = spec.coupling.constant().unwrap();
            prop_assert!(!states.is_empty());
            prop_assert!(max_norm(&states[0]) < 1e-9, "trivial state missing: {:?}", states);
            for u in &states {
                prop_assert!(u.iter().all(|v| *v >= 0.0));
                prop_assert!(max_norm(&algebraic_residual(a, &spec.competition, u)) <= 1e-9);
            }
            for w in states.windows(2) {
                prop_assert!(max_norm_diff(&w[0], &w[1]) >= CONSTANT_DEDUP_TOL);
            }
        }
    }
}
