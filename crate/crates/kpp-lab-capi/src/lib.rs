//! C ABI for the kpp-lab numerical laboratory.
//!
//! Every entry point is panic-safe, reports failures through [`KppStatus`]
//! codes, and stores a human-readable message retrievable with
//! [`kpp_last_error`]. Scenarios are opaque handles created by
//! [`kpp_scenario_open`] and released by [`kpp_scenario_free`]; all other
//! calls borrow the handle and never take ownership.
//!
//! Buffer protocol: functions that fill caller-owned arrays take a
//! capacity and report the required length. When the capacity is too
//! small they write nothing, set the length output, and return
//! `BufferTooSmall`, so a first call with capacity zero sizes the
//! allocation.

use std::cell::RefCell;
use std::os::raw::c_char;
use std::panic::{catch_unwind, AssertUnwindSafe};

use kpp_lab::model::{DomainGrid, StateField};
use kpp_lab::parabolic::{self, IntegrationOutcome, IntegrationParams};
use kpp_lab::scenario::{self, Scenario};
use kpp_lab::spectral::{self, Classification, DEFAULT_EIG_MAX_ITERS, DEFAULT_EIG_TOL};
use kpp_lab::{nonlinearity, steady, Error};

/// Status code returned by every fallible entry point.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KppStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullArgument = 1,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 2,
    InvalidInput = 3,
    ShapeMismatch = 4,
    /// An iteration hit its cap; see `kpp_last_error` for residuals.
    NonConvergence = 5,
    /// The dominant eigenvalue is a complex pair.
    ComplexPair = 6,
    /// The queried state is not steady to the required tolerance.
    NotSteady = 7,
    /// A nonlinear or linear solver failed.
    SolverFailure = 8,
    /// The scenario could not be resolved or parsed.
    Scenario = 9,
    Io = 10,
    /// An output buffer was too small; the length output holds the
    /// required size.
    BufferTooSmall = 11,
    /// An internal invariant was violated. Always a bug; please report.
    Panic = 12,
}

/// Stability classification of a steady state.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KppClassification {
    Stable = 0,
    Unstable = 1,
    /// Leading growth rate within the marginal band around zero.
    Marginal = 2,
}

/// Terminal classification of a parabolic trajectory.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KppSimOutcome {
    /// Residual dropped below the steady tolerance.
    Converged = 0,
    Extinction = 1,
    Diverged = 2,
    /// Reached the time horizon without settling.
    Timeout = 3,
}

/// Shape summary of an open scenario.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct KppScenarioInfo {
    pub species: usize,
    /// Spatial dimension of the domain.
    pub dimension: usize,
    /// Grid nodes per species.
    pub node_count: usize,
}

/// Principal eigenvalue result.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct KppEigenInfo {
    pub lambda1: f64,
    /// Max-norm eigenpair residual at the normalized eigenfunction.
    pub residual: f64,
    pub iterations: usize,
}

/// Stability result for a constant steady state.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct KppStabilityInfo {
    /// Rightmost spectral growth rate of the linearization.
    pub growth: f64,
    pub classification: KppClassification,
}

/// Where and how uniform monotonicity fails; indices are 1-based.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct KppMonotonicityInfo {
    /// Species axis along which the probe moved.
    pub direction: usize,
    /// Component whose reaction rate decreased.
    pub component: usize,
    /// Probe step size.
    pub epsilon: f64,
    /// Negative directional difference certifying the failure.
    pub value: f64,
}

/// Terminal report of a parabolic run from a constant start.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct KppSimulationInfo {
    pub outcome: KppSimOutcome,
    /// Index of the matching archived steady state, or -1.
    pub archive_index: isize,
    /// Time reached at classification.
    pub time: f64,
    pub steps: usize,
    /// Step size after adaptive halving.
    pub final_dt: f64,
    pub final_residual: f64,
}

/// Opaque scenario handle: system, grid and provenance.
pub struct KppScenario {
    inner: Scenario,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_last_error(msg: &str) {
    LAST_ERROR.with(|e| msg.clone_into(&mut e.borrow_mut()));
}

fn fail(e: &Error) -> KppStatus {
    set_last_error(&e.to_string());
    match e {
        Error::ShapeMismatch(_) => KppStatus::ShapeMismatch,
        Error::InvalidInput(_) => KppStatus::InvalidInput,
        Error::NonConvergence { .. } => KppStatus::NonConvergence,
        Error::ComplexPair => KppStatus::ComplexPair,
        Error::NotSteady { .. } => KppStatus::NotSteady,
        Error::Divergence { .. }
        | Error::SingularJacobian(_)
        | Error::LinearSolveFailure(_)
        | Error::NotBistable(_)
        | Error::PositivityLoss { .. } => KppStatus::SolverFailure,
        Error::Scenario(_) | Error::Parse(_) => KppStatus::Scenario,
        Error::Io(_) => KppStatus::Io,
    }
}

fn null_arg(name: &str) -> KppStatus {
    set_last_error(&format!("argument '{name}' must not be null"));
    KppStatus::NullArgument
}

fn too_small(needed: usize, cap: usize) -> KppStatus {
    set_last_error(&format!(
        "output buffer holds {cap} values but {needed} are required"
    ));
    KppStatus::BufferTooSmall
}

/// Runs a closure with panics converted to `KppStatus::Panic`.
fn guarded<F: FnOnce() -> KppStatus>(f: F) -> KppStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => {
            set_last_error("internal panic; this is a bug in kpp-lab");
            KppStatus::Panic
        }
    }
}

/// Copies `text` into `buf` as a NUL-terminated C string, truncating to
/// the capacity; returns the size a complete copy needs, NUL included.
unsafe fn copy_string(text: &str, buf: *mut c_char, cap: usize) -> usize {
    let bytes = text.as_bytes();
    if !buf.is_null() && cap > 0 {
        let n = bytes.len().min(cap - 1);
        std::ptr::copy_nonoverlapping(bytes.as_ptr(), buf.cast::<u8>(), n);
        *buf.add(n) = 0;
    }
    bytes.len() + 1
}

unsafe fn scenario_ref<'a>(s: *const KppScenario) -> Option<&'a Scenario> {
    s.as_ref().map(|h| &h.inner)
}

unsafe fn utf8_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, KppStatus> {
    if p.is_null() {
        return Err(null_arg(name));
    }
    std::ffi::CStr::from_ptr(p).to_str().map_err(|_| {
        set_last_error(&format!("argument '{name}' is not valid UTF-8"));
        KppStatus::InvalidUtf8
    })
}

/// Crate version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn kpp_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies the calling thread's last error message into `buf`; returns
/// the size a complete copy needs, NUL included. Empty when the last
/// call on this thread succeeded.
///
/// # Safety
/// `buf` must be null or point to `cap` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn kpp_last_error(buf: *mut c_char, cap: usize) -> usize {
    LAST_ERROR.with(|e| copy_string(&e.borrow(), buf, cap))
}

/// Opens a scenario from a builtin name or a TOML file path and stores
/// the new handle in `*out`. The handle must be released with
/// [`kpp_scenario_free`].
///
/// # Safety
/// `name_or_path` must be a NUL-terminated string; `out` must be a valid
/// pointer.
#[no_mangle]
pub unsafe extern "C" fn kpp_scenario_open(
    name_or_path: *const c_char,
    out: *mut *mut KppScenario,
) -> KppStatus {
    guarded(|| {
        if out.is_null() {
            return null_arg("out");
        }
        let text = match utf8_arg(name_or_path, "name_or_path") {
            Ok(t) => t,
            Err(status) => return status,
        };
        match scenario::resolve(text) {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(KppScenario { inner }));
                KppStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Releases a scenario handle. Null is a no-op.
///
/// # Safety
/// `s` must be null or a handle from [`kpp_scenario_open`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn kpp_scenario_free(s: *mut KppScenario) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// Copies the scenario's name into `buf`; returns the size a complete
/// copy needs, NUL included, or 0 when `s` is null.
///
/// # Safety
/// `s` must be a valid handle; `buf` null or `cap` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn kpp_scenario_name(
    s: *const KppScenario,
    buf: *mut c_char,
    cap: usize,
) -> usize {
    match scenario_ref(s) {
        Some(sc) => copy_string(&sc.name, buf, cap),
        None => 0,
    }
}

/// Fills `out` with the scenario's shape summary.
///
/// # Safety
/// `s` must be a valid handle; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn kpp_scenario_info(
    s: *const KppScenario,
    out: *mut KppScenarioInfo,
) -> KppStatus {
    guarded(|| {
        let Some(sc) = scenario_ref(s) else {
            return null_arg("s");
        };
        if out.is_null() {
            return null_arg("out");
        }
        *out = KppScenarioInfo {
            species: sc.spec.n,
            dimension: sc.grid.dimension(),
            node_count: sc.grid.node_count(),
        };
        KppStatus::Ok
    })
}

/// Replaces the grid with one of `len` axes of `cells[i]` cells over the
/// same extent. `len` must match the scenario's dimension.
///
/// # Safety
/// `s` must be a valid handle; `cells` must point to `len` entries.
#[no_mangle]
pub unsafe extern "C" fn kpp_scenario_set_grid(
    s: *mut KppScenario,
    cells: *const usize,
    len: usize,
) -> KppStatus {
    guarded(|| {
        let Some(handle) = s.as_mut() else {
            return null_arg("s");
        };
        if cells.is_null() {
            return null_arg("cells");
        }
        let cells = std::slice::from_raw_parts(cells, len);
        if len != handle.inner.grid.dimension() {
            set_last_error(&format!(
                "grid has {} axes but {len} cell counts were given",
                handle.inner.grid.dimension()
            ));
            return KppStatus::ShapeMismatch;
        }
        match DomainGrid::new(handle.inner.grid.extent().to_vec(), cells.to_vec()) {
            Ok(grid) => {
                handle.inner.grid = grid;
                KppStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Writes the default steady-state search box's upper corner, one entry
/// per species.
///
/// # Safety
/// `s` must be a valid handle; `out_upper` must point to `len` entries.
#[no_mangle]
pub unsafe extern "C" fn kpp_default_search_box(
    s: *const KppScenario,
    out_upper: *mut f64,
    len: usize,
) -> KppStatus {
    guarded(|| {
        let Some(sc) = scenario_ref(s) else {
            return null_arg("s");
        };
        if out_upper.is_null() {
            return null_arg("out_upper");
        }
        if len != sc.spec.n {
            return too_small(sc.spec.n, len);
        }
        let upper = steady::default_search_box(&sc.spec);
        std::slice::from_raw_parts_mut(out_upper, len).copy_from_slice(&upper);
        KppStatus::Ok
    })
}

/// Computes the principal eigenvalue of the linearization at zero.
/// `tol <= 0` and `max_iters == 0` select the defaults. `out_info` and
/// `out_values` may each be null to skip them; on success `out_values`
/// holds the positive eigenfunction, species-major, and requires
/// `species * node_count` entries (written to `*out_values_len` when
/// that pointer is given).
///
/// # Safety
/// Non-null pointers must be valid; `out_values` must hold `values_cap`
/// entries.
#[no_mangle]
pub unsafe extern "C" fn kpp_principal_eigenpair(
    s: *const KppScenario,
    tol: f64,
    max_iters: usize,
    out_info: *mut KppEigenInfo,
    out_values: *mut f64,
    values_cap: usize,
    out_values_len: *mut usize,
) -> KppStatus {
    guarded(|| {
        let Some(sc) = scenario_ref(s) else {
            return null_arg("s");
        };
        let tol = if tol > 0.0 { tol } else { DEFAULT_EIG_TOL };
        let max_iters = if max_iters > 0 {
            max_iters
        } else {
            DEFAULT_EIG_MAX_ITERS
        };
        let needed = sc.spec.n * sc.grid.node_count();
        if !out_values_len.is_null() {
            *out_values_len = needed;
        }
        if !out_values.is_null() && values_cap < needed {
            return too_small(needed, values_cap);
        }
        match spectral::principal_eigenvalue(&sc.spec, &sc.grid, tol, max_iters) {
            Ok(r) => {
                if !out_info.is_null() {
                    *out_info = KppEigenInfo {
                        lambda1: r.lambda1,
                        residual: r.residual,
                        iterations: r.iterations,
                    };
                }
                if !out_values.is_null() {
                    std::slice::from_raw_parts_mut(out_values, needed)
                        .copy_from_slice(r.eigenfunction.values());
                }
                KppStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Finds all constant steady states in a box by Newton iteration from a
/// lattice of seeds. `upper` is the box's upper corner (one entry per
/// species) or null for the default search box; `lattice == 0` and
/// `tol <= 0` select the defaults. States are written row-major, one row
/// of `species` entries each; `*out_count` receives the number of states
/// found even when the buffer is too small.
///
/// # Safety
/// Non-null pointers must be valid; `upper` must hold `species` entries
/// when given; `out_states` must hold `states_cap` entries.
#[no_mangle]
pub unsafe extern "C" fn kpp_constant_states(
    s: *const KppScenario,
    upper: *const f64,
    lattice: usize,
    tol: f64,
    positive_only: bool,
    out_states: *mut f64,
    states_cap: usize,
    out_count: *mut usize,
) -> KppStatus {
    guarded(|| {
        let Some(sc) = scenario_ref(s) else {
            return null_arg("s");
        };
        if out_count.is_null() {
            return null_arg("out_count");
        }
        let n = sc.spec.n;
        let bounds = if upper.is_null() {
            steady::default_search_box(&sc.spec)
        } else {
            std::slice::from_raw_parts(upper, n).to_vec()
        };
        let lattice = if lattice > 0 { lattice } else { 12 };
        let tol = if tol > 0.0 {
            tol
        } else {
            steady::DEFAULT_NEWTON_TOL
        };
        let states = match steady::find_constant_states(&sc.spec, &bounds, lattice, tol) {
            Ok(all) if positive_only => all
                .into_iter()
                .filter(|u| u.iter().all(|v| *v > steady::POSITIVITY_THRESHOLD))
                .collect(),
            Ok(all) => all,
            Err(e) => return fail(&e),
        };
        *out_count = states.len();
        let needed = states.len() * n;
        if needed > states_cap {
            return too_small(needed, states_cap);
        }
        let out = std::slice::from_raw_parts_mut(out_states, needed);
        for (row, state) in states.iter().enumerate() {
            out[row * n..(row + 1) * n].copy_from_slice(state);
        }
        KppStatus::Ok
    })
}

/// Classifies a constant steady state by the exact per-mode reduction of
/// the linearization. Fails with `NotSteady` when `u` does not satisfy
/// the steady equations on the scenario's grid.
///
/// # Safety
/// `s` must be a valid handle; `u` must point to `len` entries; `out`
/// must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn kpp_stability_of_constant(
    s: *const KppScenario,
    u: *const f64,
    len: usize,
    out: *mut KppStabilityInfo,
) -> KppStatus {
    guarded(|| {
        let Some(sc) = scenario_ref(s) else {
            return null_arg("s");
        };
        if u.is_null() {
            return null_arg("u");
        }
        if out.is_null() {
            return null_arg("out");
        }
        let u = std::slice::from_raw_parts(u, len);
        match spectral::stability_of_constant_state(&sc.spec, &sc.grid, u) {
            Ok(r) => {
                *out = KppStabilityInfo {
                    growth: r.leading_growth_rate,
                    classification: match r.classification {
                        Classification::Stable => KppClassification::Stable,
                        Classification::Unstable => KppClassification::Unstable,
                        Classification::Marginal { .. } => KppClassification::Marginal,
                    },
                };
                KppStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Checks cooperativity of the reaction term on the box `[0, upper]`.
/// Sets `*out_cooperative` and, when `out_corner` is non-null, writes
/// the largest cooperative box's upper corner (one entry per species).
///
/// # Safety
/// `s` must be a valid handle; `upper` (and `out_corner` when non-null)
/// must point to `len` entries; `out_cooperative` must be valid.
#[no_mangle]
pub unsafe extern "C" fn kpp_cooperativity(
    s: *const KppScenario,
    upper: *const f64,
    len: usize,
    out_corner: *mut f64,
    out_cooperative: *mut bool,
) -> KppStatus {
    guarded(|| {
        let Some(sc) = scenario_ref(s) else {
            return null_arg("s");
        };
        if upper.is_null() {
            return null_arg("upper");
        }
        if out_cooperative.is_null() {
            return null_arg("out_cooperative");
        }
        if len != sc.spec.n {
            set_last_error(&format!(
                "box has {len} entries but the system has {} species",
                sc.spec.n
            ));
            return KppStatus::ShapeMismatch;
        }
        let upper = std::slice::from_raw_parts(upper, len);
        match nonlinearity::cooperativity_box(&sc.spec, upper) {
            Ok(report) => {
                *out_cooperative = matches!(
                    report.verdict,
                    nonlinearity::CooperativityVerdict::CooperativeOnBox
                );
                if !out_corner.is_null() {
                    std::slice::from_raw_parts_mut(out_corner, len)
                        .copy_from_slice(&report.cooperative_box);
                }
                KppStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Searches the box `[lower, upper]` for a counterexample to uniform
/// monotonicity of the reaction term. Sets `*out_found`; when found and
/// the pointers are non-null, fills `out` and writes the base point to
/// `out_point` (one entry per species).
///
/// # Safety
/// `s` must be a valid handle; `lower` and `upper` (and `out_point` when
/// non-null) must point to `len` entries; `out_found` must be valid.
#[no_mangle]
pub unsafe extern "C" fn kpp_falsify_monotonicity(
    s: *const KppScenario,
    lower: *const f64,
    upper: *const f64,
    len: usize,
    out: *mut KppMonotonicityInfo,
    out_point: *mut f64,
    out_found: *mut bool,
) -> KppStatus {
    guarded(|| {
        let Some(sc) = scenario_ref(s) else {
            return null_arg("s");
        };
        if lower.is_null() {
            return null_arg("lower");
        }
        if upper.is_null() {
            return null_arg("upper");
        }
        if out_found.is_null() {
            return null_arg("out_found");
        }
        let lower = std::slice::from_raw_parts(lower, len);
        let upper = std::slice::from_raw_parts(upper, len);
        match nonlinearity::falsify_uniform_monotonicity(&sc.spec, lower, upper) {
            Ok(None) => {
                *out_found = false;
                KppStatus::Ok
            }
            Ok(Some(cx)) => {
                *out_found = true;
                if !out.is_null() {
                    *out = KppMonotonicityInfo {
                        direction: cx.direction,
                        component: cx.component,
                        epsilon: cx.epsilon,
                        value: cx.value,
                    };
                }
                if !out_point.is_null() {
                    std::slice::from_raw_parts_mut(out_point, len).copy_from_slice(&cx.base_point);
                }
                KppStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Integrates the parabolic system from the constant start `u0` until it
/// converges, goes extinct, diverges or times out; the terminal report
/// includes the index of the matching constant steady state, if any.
/// `dt <= 0` and `t_max <= 0` select the defaults. A timeout is a
/// normal outcome, not an error.
///
/// # Safety
/// `s` must be a valid handle; `u0` must point to `len` entries; `out`
/// must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn kpp_simulate_constant(
    s: *const KppScenario,
    u0: *const f64,
    len: usize,
    dt: f64,
    t_max: f64,
    out: *mut KppSimulationInfo,
) -> KppStatus {
    guarded(|| {
        let Some(sc) = scenario_ref(s) else {
            return null_arg("s");
        };
        if u0.is_null() {
            return null_arg("u0");
        }
        if out.is_null() {
            return null_arg("out");
        }
        if len != sc.spec.n {
            set_last_error(&format!(
                "start has {len} entries but the system has {} species",
                sc.spec.n
            ));
            return KppStatus::ShapeMismatch;
        }
        let u0 = std::slice::from_raw_parts(u0, len);
        let defaults = IntegrationParams::default();
        let params = IntegrationParams {
            dt: if dt > 0.0 { dt } else { defaults.dt },
            t_max: if t_max > 0.0 { t_max } else { defaults.t_max },
            ..defaults
        };
        let archive: Vec<StateField> = steady::find_constant_states(
            &sc.spec,
            &steady::default_search_box(&sc.spec),
            12,
            1e-12,
        )
        .unwrap_or_default()
        .iter()
        .map(|vals| StateField::constant(sc.grid.clone(), vals))
        .collect();
        let start = StateField::constant(sc.grid.clone(), u0);
        match parabolic::integrate(&sc.spec, &sc.grid, &start, &params, &archive) {
            Ok(r) => {
                let (outcome, archive_index) = match r.outcome {
                    IntegrationOutcome::Converged { archive_index } => (
                        KppSimOutcome::Converged,
                        archive_index.map_or(-1, |i| i as isize),
                    ),
                    IntegrationOutcome::Extinction => (KppSimOutcome::Extinction, -1),
                    IntegrationOutcome::Diverged => (KppSimOutcome::Diverged, -1),
                    IntegrationOutcome::Timeout => (KppSimOutcome::Timeout, -1),
                };
                *out = KppSimulationInfo {
                    outcome,
                    archive_index,
                    time: r.time,
                    steps: r.steps,
                    final_dt: r.final_dt,
                    final_residual: r.final_residual,
                };
                KppStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}
