#ifndef MVPLAB_H
#define MVPLAB_H

/* Generated by cbindgen from mvplab-ffi; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every fallible call.
 */
typedef enum MvplabStatus {
  MVPLAB_STATUS_OK = 0,
  /**
   * A required pointer argument was NULL.
   */
  MVPLAB_STATUS_NULL_ARGUMENT = 1,
  /**
   * A string argument was not valid UTF-8.
   */
  MVPLAB_STATUS_INVALID_UTF8 = 2,
  /**
   * JSON could not be parsed.
   */
  MVPLAB_STATUS_PARSE_ERROR = 3,
  /**
   * Structural validation failed (invalid MDP or generator spec).
   */
  MVPLAB_STATUS_VALIDATION_ERROR = 4,
  /**
   * A domain precondition failed (no gaps, bad parameters, ...).
   */
  MVPLAB_STATUS_DOMAIN_ERROR = 5,
  /**
   * A policy enumeration exceeded its cap.
   */
  MVPLAB_STATUS_TOO_LARGE = 6,
} MvplabStatus;

/**
 * Opaque MDP handle.
 */
typedef struct MvplabMdp MvplabMdp;

/**
 * Opaque solved-instance handle: the MDP together with its optimal solution
 * and variance profile.
 */
typedef struct MvplabSolved MvplabSolved;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Returns a copy of the last error message recorded on this thread, or NULL
 * when none exists. Release it with [`mvplab_string_free`].
 */
char *mvplab_last_error_message(void);

/**
 * Releases a string previously returned by this library.
 *
 * # Safety
 * `s` must be NULL or a pointer obtained from an mvplab function that hands
 * ownership to the caller, not yet freed.
 */
void mvplab_string_free(char *s);

/**
 * Parses an MDP from its JSON form and validates it.
 *
 * # Safety
 * `json` must be a NUL-terminated string; `out` must be a valid pointer.
 */
enum MvplabStatus mvplab_mdp_from_json(const char *json, struct MvplabMdp **out);

/**
 * Serializes an MDP to pretty JSON.
 *
 * # Safety
 * `mdp` must be a live handle; `out` must be a valid pointer.
 */
enum MvplabStatus mvplab_mdp_to_json(const struct MvplabMdp *mdp, char **out);

/**
 * Builds the single-state chain fixture.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum MvplabStatus mvplab_mdp_chain(uintptr_t horizon, struct MvplabMdp **out);

/**
 * Builds a random sparse instance.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum MvplabStatus mvplab_mdp_random(uintptr_t num_states,
                                    uintptr_t num_actions,
                                    uintptr_t horizon,
                                    double sparsity,
                                    uint64_t seed,
                                    struct MvplabMdp **out);

/**
 * Builds a lower-bound family instance from `gaps` (length
 * `bandit_states·num_actions·horizon`) and, when `out_meta_json` is not
 * NULL, also returns the sidecar construction data (sigma, p_table,
 * d_table) as JSON.
 *
 * # Safety
 * `gaps` must point to `gaps_len` readable doubles; `out_mdp` must be a
 * valid pointer; `out_meta_json` may be NULL.
 */
enum MvplabStatus mvplab_mdp_lower_bound(uintptr_t bandit_states,
                                         uintptr_t num_actions,
                                         uintptr_t horizon,
                                         double target_variance,
                                         const double *gaps,
                                         uintptr_t gaps_len,
                                         struct MvplabMdp **out_mdp,
                                         char **out_meta_json);

/**
 * Writes the validation report (a JSON array of violations) and the number
 * of violations found; a valid MDP yields `[]` and 0.
 *
 * # Safety
 * `mdp` must be a live handle; out-pointers may be NULL to skip them.
 */
enum MvplabStatus mvplab_mdp_validate(const struct MvplabMdp *mdp,
                                      char **out_report_json,
                                      uintptr_t *out_violation_count);

/**
 * Releases an MDP handle.
 *
 * # Safety
 * `mdp` must be NULL or a live handle, not yet freed.
 */
void mvplab_mdp_free(struct MvplabMdp *mdp);

/**
 * Solves an MDP exactly. The conditional-variance enumeration oracle runs
 * only when `attempt_exact` is set and the policy count fits under
 * `enum_cap`.
 *
 * # Safety
 * `mdp` must be a live handle; `out` must be a valid pointer.
 */
enum MvplabStatus mvplab_solve(const struct MvplabMdp *mdp,
                               uint64_t enum_cap,
                               bool attempt_exact,
                               struct MvplabSolved **out);

/**
 * Optimal initial value of a solved instance.
 *
 * # Safety
 * `solved` must be a live handle; `out` must be a valid pointer.
 */
enum MvplabStatus mvplab_solved_v0_star(const struct MvplabSolved *solved, double *out);

/**
 * Serializes the full solve report (solution + variance profile), matching
 * the `mvplab solve` output format.
 *
 * # Safety
 * `solved` must be a live handle; `out` must be a valid pointer.
 */
enum MvplabStatus mvplab_solved_report_json(const struct MvplabSolved *solved, char **out);

/**
 * Releases a solved-instance handle.
 *
 * # Safety
 * `solved` must be NULL or a live handle, not yet freed.
 */
void mvplab_solved_free(struct MvplabSolved *solved);

/**
 * Runs one seeded MVP experiment and returns the per-episode trace as CSV
 * (header `k,instant_regret,cum_regret,opt_violations,min_q_slack,
 * max_surplus`).
 *
 * # Safety
 * `solved` must be a live handle; `out_csv` must be a valid pointer.
 */
enum MvplabStatus mvplab_run_experiment(const struct MvplabSolved *solved,
                                        uint64_t episodes,
                                        double delta,
                                        uint64_t seed,
                                        char **out_csv);

/**
 * Evaluates the constant-free lower-bound envelope `Σ (L/Δ)·log K` over the
 * positive entries of `gaps`.
 *
 * # Safety
 * `gaps` must point to `gaps_len` readable doubles; `out` must be a valid
 * pointer.
 */
enum MvplabStatus mvplab_lower_bound_value(const double *gaps,
                                           uintptr_t gaps_len,
                                           double target_variance,
                                           double episodes,
                                           double *out);

/**
 * Evaluates the four-term regret upper bound for a solved instance and
 * returns the breakdown as JSON. `full_constants` selects the stated
 * prefactors instead of the constant-free leading form; `use_exact_var_max_c`
 * requires the enumeration oracle to have run during `mvplab_solve`.
 *
 * # Safety
 * `solved` must be a live handle; `out_json` must be a valid pointer.
 */
enum MvplabStatus mvplab_upper_bound(const struct MvplabSolved *solved,
                                     uint64_t episodes,
                                     double delta,
                                     bool full_constants,
                                     bool use_exact_var_max_c,
                                     char **out_json);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MVPLAB_H */
