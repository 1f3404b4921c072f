/* C interface to the kpp-lab reaction-diffusion laboratory. */

#ifndef KPP_LAB_H
#define KPP_LAB_H

/* Generated by cbindgen from the kpp-lab-capi crate; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Stability classification of a steady state.
typedef enum KppClassification {
  KPP_CLASSIFICATION_STABLE = 0,
  KPP_CLASSIFICATION_UNSTABLE = 1,
  // Leading growth rate within the marginal band around zero.
  KPP_CLASSIFICATION_MARGINAL = 2,
} KppClassification;

// Terminal classification of a parabolic trajectory.
typedef enum KppSimOutcome {
  // Residual dropped below the steady tolerance.
  KPP_SIM_OUTCOME_CONVERGED = 0,
  KPP_SIM_OUTCOME_EXTINCTION = 1,
  KPP_SIM_OUTCOME_DIVERGED = 2,
  // Reached the time horizon without settling.
  KPP_SIM_OUTCOME_TIMEOUT = 3,
} KppSimOutcome;

// Status code returned by every fallible entry point.
typedef enum KppStatus {
  KPP_STATUS_OK = 0,
  // A required pointer argument was null.
  KPP_STATUS_NULL_ARGUMENT = 1,
  // A string argument was not valid UTF-8.
  KPP_STATUS_INVALID_UTF8 = 2,
  KPP_STATUS_INVALID_INPUT = 3,
  KPP_STATUS_SHAPE_MISMATCH = 4,
  // An iteration hit its cap; see `kpp_last_error` for residuals.
  KPP_STATUS_NON_CONVERGENCE = 5,
  // The dominant eigenvalue is a complex pair.
  KPP_STATUS_COMPLEX_PAIR = 6,
  // The queried state is not steady to the required tolerance.
  KPP_STATUS_NOT_STEADY = 7,
  // A nonlinear or linear solver failed.
  KPP_STATUS_SOLVER_FAILURE = 8,
  // The scenario could not be resolved or parsed.
  KPP_STATUS_SCENARIO = 9,
  KPP_STATUS_IO = 10,
  // An output buffer was too small; the length output holds the
  // required size.
  KPP_STATUS_BUFFER_TOO_SMALL = 11,
  // An internal invariant was violated. Always a bug; please report.
  KPP_STATUS_PANIC = 12,
} KppStatus;

// Opaque scenario handle: system, grid and provenance.
typedef struct KppScenario KppScenario;

// Shape summary of an open scenario.
typedef struct KppScenarioInfo {
  size_t species;
  // Spatial dimension of the domain.
  size_t dimension;
  // Grid nodes per species.
  size_t node_count;
} KppScenarioInfo;

// Principal eigenvalue result.
typedef struct KppEigenInfo {
  double lambda1;
  // Max-norm eigenpair residual at the normalized eigenfunction.
  double residual;
  size_t iterations;
} KppEigenInfo;

// Stability result for a constant steady state.
typedef struct KppStabilityInfo {
  // Rightmost spectral growth rate of the linearization.
  double growth;
  enum KppClassification classification;
} KppStabilityInfo;

// Where and how uniform monotonicity fails; indices are 1-based.
typedef struct KppMonotonicityInfo {
  // Species axis along which the probe moved.
  size_t direction;
  // Component whose reaction rate decreased.
  size_t component;
  // Probe step size.
  double epsilon;
  // Negative directional difference certifying the failure.
  double value;
} KppMonotonicityInfo;

// Terminal report of a parabolic run from a constant start.
typedef struct KppSimulationInfo {
  enum KppSimOutcome outcome;
  // Index of the matching archived steady state, or -1.
  ptrdiff_t archive_index;
  // Time reached at classification.
  double time;
  size_t steps;
  // Step size after adaptive halving.
  double final_dt;
  double final_residual;
} KppSimulationInfo;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Crate version as a static NUL-terminated string.
const char *kpp_version(void);

// Copies the calling thread's last error message into `buf`; returns
// the size a complete copy needs, NUL included. Empty when the last
// call on this thread succeeded.
//
// # Safety
// `buf` must be null or point to `cap` writable bytes.
size_t kpp_last_error(char *buf, size_t cap);

// Opens a scenario from a builtin name or a TOML file path and stores
// the new handle in `*out`. The handle must be released with
// [`kpp_scenario_free`].
//
// # Safety
// `name_or_path` must be a NUL-terminated string; `out` must be a valid
// pointer.
enum KppStatus kpp_scenario_open(const char *name_or_path, struct KppScenario **out);

// Releases a scenario handle. Null is a no-op.
//
// # Safety
// `s` must be null or a handle from [`kpp_scenario_open`] not yet freed.
void kpp_scenario_free(struct KppScenario *s);

// Copies the scenario's name into `buf`; returns the size a complete
// copy needs, NUL included, or 0 when `s` is null.
//
// # Safety
// `s` must be a valid handle; `buf` null or `cap` writable bytes.
size_t kpp_scenario_name(const struct KppScenario *s, char *buf, size_t cap);

// Fills `out` with the scenario's shape summary.
//
// # Safety
// `s` must be a valid handle; `out` a valid pointer.
enum KppStatus kpp_scenario_info(const struct KppScenario *s, struct KppScenarioInfo *out);

// Replaces the grid with one of `len` axes of `cells[i]` cells over the
// same extent. `len` must match the scenario's dimension.
//
// # Safety
// `s` must be a valid handle; `cells` must point to `len` entries.
enum KppStatus kpp_scenario_set_grid(struct KppScenario *s, const size_t *cells, size_t len);

// Writes the default steady-state search box's upper corner, one entry
// per species.
//
// # Safety
// `s` must be a valid handle; `out_upper` must point to `len` entries.
enum KppStatus kpp_default_search_box(const struct KppScenario *s, double *out_upper, size_t len);

// Computes the principal eigenvalue of the linearization at zero.
// `tol <= 0` and `max_iters == 0` select the defaults. `out_info` and
// `out_values` may each be null to skip them; on success `out_values`
// holds the positive eigenfunction, species-major, and requires
// `species * node_count` entries (written to `*out_values_len` when
// that pointer is given).
//
// # Safety
// Non-null pointers must be valid; `out_values` must hold `values_cap`
// entries.
enum KppStatus kpp_principal_eigenpair(const struct KppScenario *s,
                                       double tol,
                                       size_t max_iters,
                                       struct KppEigenInfo *out_info,
                                       double *out_values,
                                       size_t values_cap,
                                       size_t *out_values_len);

// Finds all constant steady states in a box by Newton iteration from a
// lattice of seeds. `upper` is the box's upper corner (one entry per
// species) or null for the default search box; `lattice == 0` and
// `tol <= 0` select the defaults. States are written row-major, one row
// of `species` entries each; `*out_count` receives the number of states
// found even when the buffer is too small.
//
// # Safety
// Non-null pointers must be valid; `upper` must hold `species` entries
// when given; `out_states` must hold `states_cap` entries.
enum KppStatus kpp_constant_states(const struct KppScenario *s,
                                   const double *upper,
                                   size_t lattice,
                                   double tol,
                                   bool positive_only,
                                   double *out_states,
                                   size_t states_cap,
                                   size_t *out_count);

// Classifies a constant steady state by the exact per-mode reduction of
// the linearization. Fails with `NotSteady` when `u` does not satisfy
// the steady equations on the scenario's grid.
//
// # Safety
// `s` must be a valid handle; `u` must point to `len` entries; `out`
// must be a valid pointer.
enum KppStatus kpp_stability_of_constant(const struct KppScenario *s,
                                         const double *u,
                                         size_t len,
                                         struct KppStabilityInfo *out);

// Checks cooperativity of the reaction term on the box `[0, upper]`.
// Sets `*out_cooperative` and, when `out_corner` is non-null, writes
// the largest cooperative box's upper corner (one entry per species).
//
// # Safety
// `s` must be a valid handle; `upper` (and `out_corner` when non-null)
// must point to `len` entries; `out_cooperative` must be valid.
enum KppStatus kpp_cooperativity(const struct KppScenario *s,
                                 const double *upper,
                                 size_t len,
                                 double *out_corner,
                                 bool *out_cooperative);

// Searches the box `[lower, upper]` for a counterexample to uniform
// monotonicity of the reaction term. Sets `*out_found`; when found and
// the pointers are non-null, fills `out` and writes the base point to
// `out_point` (one entry per species).
//
// # Safety
// `s` must be a valid handle; `lower` and `upper` (and `out_point` when
// non-null) must point to `len` entries; `out_found` must be valid.
enum KppStatus kpp_falsify_monotonicity(const struct KppScenario *s,
                                        const double *lower,
                                        const double *upper,
                                        size_t len,
                                        struct KppMonotonicityInfo *out,
                                        double *out_point,
                                        bool *out_found);

// Integrates the parabolic system from the constant start `u0` until it
// converges, goes extinct, diverges or times out; the terminal report
// includes the index of the matching constant steady state, if any.
// `dt <= 0` and `t_max <= 0` select the defaults. A timeout is a
// normal outcome, not an error.
//
// # Safety
// `s` must be a valid handle; `u0` must point to `len` entries; `out`
// must be a valid pointer.
enum KppStatus kpp_simulate_constant(const struct KppScenario *s,
                                     const double *u0,
                                     size_t len,
                                     double dt,
                                     double t_max,
                                     struct KppSimulationInfo *out);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* KPP_LAB_H */
