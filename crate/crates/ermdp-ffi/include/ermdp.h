#ifndef ERMDP_H
#define ERMDP_H

/* Generated by cbindgen from ermdp-ffi; edit src/lib.rs, not this file. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status code returned by every fallible call.
 */
typedef enum {
  ERMDP_STATUS_OK = 0,
  /**
   * A pointer was null, a dimension did not match, or a numeric setting
   * was outside its documented range.
   */
  ERMDP_STATUS_INVALID_ARGUMENT = 1,
  /**
   * The iteration budget ran out before the tolerance was met.
   */
  ERMDP_STATUS_NON_CONVERGENCE = 2,
  /**
   * An iterate left the representable range (step size too large).
   */
  ERMDP_STATUS_NUMERICAL_DIVERGENCE = 3,
  /**
   * File or serialization failure.
   */
  ERMDP_STATUS_IO = 4,
  /**
   * Internal invariant violation; report these.
   */
  ERMDP_STATUS_INTERNAL = 5,
} ErmdpStatus;

/**
 * Solver family selector.
 */
typedef enum {
  /**
   * Diagonal-metric ascent-descent (NGAD).
   */
  ERMDP_VARIANT_NGAD = 0,
  /**
   * Interpolating-metric variant (INGAD); uses the `c` option.
   */
  ERMDP_VARIANT_INGAD = 1,
} ErmdpVariant;

/**
 * Opaque finite MDP model handle.
 */
typedef struct ErmdpMdp ErmdpMdp;

/**
 * Opaque ground-truth solution handle (optimal value, policy, and duals).
 */
typedef struct ErmdpOracle ErmdpOracle;

/**
 * Opaque solver run handle: final iterate plus the recorded trace.
 */
typedef struct ErmdpTrace ErmdpTrace;

/**
 * Plain-data mirror of the solver configuration.
 *
 * Obtain defaults from [`ermdp_solver_options_default`] and override fields
 * as needed. `eps_tol` of zero disables the convergence test so the run
 * always uses the full budget.
 */
typedef struct {
  double alpha;
  double tau;
  double eta;
  /**
   * Interpolation weight in [0, 1); only read by the INGAD variant.
   */
  double c;
  double eps_tol;
  size_t max_iter;
  size_t record_every;
} ErmdpSolverOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the most recent failure on this thread.
 *
 * Empty string if nothing failed yet. The pointer stays valid until the next
 * failing call on the same thread.
 *
 * # Safety
 * The returned pointer must not be freed or used after a later failing call
 * on this thread.
 */
const char *ermdp_last_error_message(void);

/**
 * Builds a random instance: `support_size` uniformly drawn successor states
 * per state-action pair with Dirichlet-like weights, rewards uniform in
 * [0, 1], reproducible in `seed`.
 *
 * # Safety
 * `out` must be a valid pointer to a pointer slot.
 */
ErmdpStatus ermdp_mdp_random(size_t num_states,
                             size_t num_actions,
                             size_t support_size,
                             double discount,
                             uint64_t seed,
                             ErmdpMdp **out);

/**
 * Loads a model from the JSON layout used by the CLI.
 *
 * # Safety
 * `path` must be a valid NUL-terminated string and `out` a valid slot.
 */
ErmdpStatus ermdp_mdp_load_json(const char *path, ErmdpMdp **out);

/**
 * Writes the model to `path` in the CLI JSON layout.
 *
 * # Safety
 * `mdp` must be a live handle and `path` a valid NUL-terminated string.
 */
ErmdpStatus ermdp_mdp_save_json(const ErmdpMdp *mdp, const char *path);

/**
 * Number of states; 0 on a null handle.
 *
 * # Safety
 * `mdp` must be null or a live handle.
 */
size_t ermdp_mdp_num_states(const ErmdpMdp *mdp);

/**
 * Number of actions; 0 on a null handle.
 *
 * # Safety
 * `mdp` must be null or a live handle.
 */
size_t ermdp_mdp_num_actions(const ErmdpMdp *mdp);

/**
 * Discount factor; NaN on a null handle.
 *
 * # Safety
 * `mdp` must be null or a live handle.
 */
double ermdp_mdp_discount(const ErmdpMdp *mdp);

/**
 * Releases a model handle; null is a no-op.
 *
 * # Safety
 * `mdp` must be null or a pointer obtained from a constructor here, freed at
 * most once.
 */
void ermdp_mdp_free(ErmdpMdp *mdp);

/**
 * Computes ground truth by soft value iteration at temperature `tau`, then
 * backs out the duals for curvature `alpha`. `tol <= 0` selects the library
 * default tolerance.
 *
 * # Safety
 * `mdp` must be a live handle and `out` a valid slot.
 */
ErmdpStatus ermdp_oracle_compute(const ErmdpMdp *mdp,
                                 double tau,
                                 double alpha,
                                 double tol,
                                 size_t max_iter,
                                 ErmdpOracle **out);

/**
 * Copies the optimal value function into `out` (`len` must equal the state
 * count).
 *
 * # Safety
 * `oracle` must be a live handle and `out` must point to `len` doubles.
 */
ErmdpStatus ermdp_oracle_value(const ErmdpOracle *oracle, double *out, size_t len);

/**
 * Copies the optimal policy into `out`, row-major over [states][actions]
 * (`len` must equal states * actions).
 *
 * # Safety
 * `oracle` must be a live handle and `out` must point to `len` doubles.
 */
ErmdpStatus ermdp_oracle_policy(const ErmdpOracle *oracle, double *out, size_t len);

/**
 * Releases an oracle handle; null is a no-op.
 *
 * # Safety
 * `oracle` must be null or a pointer from [`ermdp_oracle_compute`], freed at
 * most once.
 */
void ermdp_oracle_free(ErmdpOracle *oracle);

/**
 * Library-default solver options.
 */
ErmdpSolverOptions ermdp_solver_options_default(void);

/**
 * Runs the selected dynamics from the zero initialization.
 *
 * Passing an oracle handle enables the per-record diagnostics (Lyapunov
 * value and errors against ground truth) in the trace; passing null skips
 * them. A positive `eps_tol` demands convergence: if the budget ends first
 * the call fails with `NonConvergence`. With `eps_tol` of zero the full
 * budget always runs and the call succeeds. On `NonConvergence` and
 * `NumericalDivergence` no trace is returned.
 *
 * # Safety
 * `mdp` must be a live handle, `options` a valid pointer, `oracle` null or a
 * live handle, and `out` a valid slot.
 */
ErmdpStatus ermdp_solve(const ErmdpMdp *mdp,
                        ErmdpVariant variant,
                        const ErmdpSolverOptions *options,
                        const ErmdpOracle *oracle,
                        ErmdpTrace **out);

/**
 * Iterations actually run; 0 on a null handle.
 *
 * # Safety
 * `trace` must be null or a live handle.
 */
size_t ermdp_trace_iterations(const ErmdpTrace *trace);

/**
 * Whether the tolerance was met within the budget; false on a null handle.
 *
 * # Safety
 * `trace` must be null or a live handle.
 */
bool ermdp_trace_converged(const ErmdpTrace *trace);

/**
 * Relative change of the final iteration; NaN on a null handle.
 *
 * # Safety
 * `trace` must be null or a live handle.
 */
double ermdp_trace_final_change(const ErmdpTrace *trace);

/**
 * Copies the final value iterate into `out` (`len` must equal the state
 * count).
 *
 * # Safety
 * `trace` must be a live handle and `out` must point to `len` doubles.
 */
ErmdpStatus ermdp_trace_value(const ErmdpTrace *trace, double *out, size_t len);

/**
 * Copies the final policy into `out`, row-major over [states][actions]
 * (`len` must equal states * actions).
 *
 * # Safety
 * `trace` must be a live handle and `out` must point to `len` doubles.
 */
ErmdpStatus ermdp_trace_policy(const ErmdpTrace *trace, double *out, size_t len);

/**
 * Writes the recorded trace as CSV to `path` (same layout as the CLI).
 *
 * # Safety
 * `trace` must be a live handle and `path` a valid NUL-terminated string.
 */
ErmdpStatus ermdp_trace_write_csv(const ErmdpTrace *trace, const char *path);

/**
 * Releases a trace handle; null is a no-op.
 *
 * # Safety
 * `trace` must be null or a pointer from [`ermdp_solve`], freed at most
 * once.
 */
void ermdp_trace_free(ErmdpTrace *trace);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ERMDP_H */
