#ifndef QCLAB_H
#define QCLAB_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum QclabStatus {
  QCLAB_STATUS_OK = 0,
  QCLAB_STATUS_NULL_POINTER = 1,
  QCLAB_STATUS_INVALID_ARGUMENT = 2,
  QCLAB_STATUS_INVALID_MODEL = 3,
  QCLAB_STATUS_CONFIG = 4,
  /**
   * Squeeze bound unbounded, covariance outside the window, epsilon
   * below its floor.
   */
  QCLAB_STATUS_PRECONDITION = 5,
  QCLAB_STATUS_GRID_COVERAGE = 6,
  /**
   * A monitored invariant failed during integration.
   */
  QCLAB_STATUS_NUMERICAL = 7,
  QCLAB_STATUS_IO = 8,
  QCLAB_STATUS_OUT_OF_RANGE = 9,
  QCLAB_STATUS_PANIC = 10,
} QclabStatus;

/**
 * Results of a full three-way comparison.
 */
typedef struct QclabComparison QclabComparison;

/**
 * A validated experiment.
 */
typedef struct QclabExperiment QclabExperiment;

/**
 * A Gaussian-mixture trajectory.
 */
typedef struct QclabMixture QclabMixture;

/**
 * Scale constants. Infinite values are reported as `INFINITY`.
 */
typedef struct QclabScales {
  double hbar;
  double d_x;
  double d_p;
  double tau_h;
  double a_h;
  double s_h;
  double x_h;
  double p_h;
  double d0;
  double z;
} QclabScales;

typedef struct QclabPhysicalExample {
  double time_s;
  double time_years;
  double ehrenfest_s;
  double correspondence_s;
} QclabPhysicalExample;

typedef struct QclabMixtureSummary {
  double time;
  size_t particles;
  double total_weight;
  double max_squeeze;
  double min_eigenvalue;
  double max_eigenvalue;
  double max_defect_after_projection;
} QclabMixtureSummary;

typedef struct QclabComparisonRow {
  double time;
  double t_over_tau;
  double epsilon;
  double trace_distance;
  double l1_distance;
  bool pass;
  size_t particles;
  double max_squeeze;
} QclabComparisonRow;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread; empty if none. Valid until
 * the next failing call on the same thread.
 */
const char *qclab_last_error(void);

/**
 * Scales of a one-dimensional built-in potential on `[lo, hi]`.
 *
 * # Safety
 * `potential` must be a NUL-terminated string, `params` must point to
 * `n_params` values (or be null when `n_params == 0`) and `out` must be
 * writable.
 */
enum QclabStatus qclab_scales_compute(const char *potential,
                                      const double *params,
                                      size_t n_params,
                                      double mass,
                                      double lo,
                                      double hi,
                                      double hbar,
                                      double d_x,
                                      double d_p,
                                      struct QclabScales *out);

/**
 * `lambda^-1 ln(s / hbar)`.
 *
 * # Safety
 * `out` must be writable.
 */
enum QclabStatus qclab_ehrenfest_time(double lyapunov, double action, double hbar, double *out);

/**
 * Correspondence time of a grain of `mass` kg at `velocity` m/s in a
 * potential varying over `length` m, with localization rate `rate`.
 *
 * # Safety
 * `out` must be writable.
 */
enum QclabStatus qclab_physical_example(double mass,
                                        double velocity,
                                        double length,
                                        double rate,
                                        struct QclabPhysicalExample *out);

/**
 * Parses an experiment from TOML text.
 *
 * # Safety
 * `toml` must be NUL-terminated and `out` writable. On success `*out`
 * owns a handle to release with [`qclab_experiment_free`].
 */
enum QclabStatus qclab_experiment_from_toml(const char *toml, struct QclabExperiment **out);

/**
 * Loads an experiment file.
 *
 * # Safety
 * As [`qclab_experiment_from_toml`], with `path` a file path.
 */
enum QclabStatus qclab_experiment_load(const char *path, struct QclabExperiment **out);

/**
 * # Safety
 * `exp` must come from this library and not be used afterwards. Null is
 * ignored.
 */
void qclab_experiment_free(struct QclabExperiment *exp);

/**
 * # Safety
 * `exp` must be a live handle and `out` writable.
 */
enum QclabStatus qclab_experiment_scales(const struct QclabExperiment *exp,
                                         struct QclabScales *out);

/**
 * Error budget `epsilon(t)`; `t` in physical units.
 *
 * # Safety
 * `exp` must be a live handle and `out` writable.
 */
enum QclabStatus qclab_experiment_epsilon(const struct QclabExperiment *exp, double t, double *out);

/**
 * Number of snapshot times; they are written to `times` when it is not
 * null and `capacity` suffices.
 *
 * # Safety
 * `exp` must be a live handle, `times` null or valid for `capacity`
 * values, `count` writable.
 */
enum QclabStatus qclab_experiment_times(const struct QclabExperiment *exp,
                                        double *times,
                                        size_t capacity,
                                        size_t *count);

/**
 * Starts the mixture from the experiment's initial state.
 *
 * # Safety
 * `exp` must be a live handle and `out` writable. The mixture does not
 * borrow `exp`.
 */
enum QclabStatus qclab_mixture_new(const struct QclabExperiment *exp, struct QclabMixture **out);

/**
 * # Safety
 * `mix` must come from this library and not be used afterwards. Null is
 * ignored.
 */
void qclab_mixture_free(struct QclabMixture *mix);

/**
 * Advances by `span` (physical time) with the experiment's step size.
 *
 * # Safety
 * `mix` must be a live handle.
 */
enum QclabStatus qclab_mixture_advance(struct QclabMixture *mix, double span);

/**
 * # Safety
 * `mix` must be a live handle and `out` writable.
 */
enum QclabStatus qclab_mixture_summary(const struct QclabMixture *mix,
                                       struct QclabMixtureSummary *out);

/**
 * Particle `index`: weight, centroid (`2d` values, positions first) and
 * covariance (`2d x 2d`, row-major).
 *
 * # Safety
 * `mix` must be a live handle; `alpha` and `cov` must hold `alpha_len`
 * and `cov_len` values.
 */
enum QclabStatus qclab_mixture_particle(const struct QclabMixture *mix,
                                        size_t index,
                                        double *weight,
                                        double *alpha,
                                        size_t alpha_len,
                                        double *cov,
                                        size_t cov_len);

/**
 * Runs the quantum, classical and mixture dynamics (one-dimensional
 * models only).
 *
 * # Safety
 * `exp` must be a live handle and `out` writable.
 */
enum QclabStatus qclab_run_comparison(const struct QclabExperiment *exp,
                                      struct QclabComparison **out);

/**
 * # Safety
 * `cmp` must come from this library and not be used afterwards. Null is
 * ignored.
 */
void qclab_comparison_free(struct QclabComparison *cmp);

/**
 * Number of snapshots, and whether every one passed.
 *
 * # Safety
 * `cmp` must be a live handle; `len` and `passed` writable.
 */
enum QclabStatus qclab_comparison_info(const struct QclabComparison *cmp,
                                       size_t *len,
                                       bool *passed);

/**
 * # Safety
 * `cmp` must be a live handle and `out` writable.
 */
enum QclabStatus qclab_comparison_row(const struct QclabComparison *cmp,
                                      size_t index,
                                      struct QclabComparisonRow *out);

/**
 * Library version as a static NUL-terminated string.
 */
const char *qclab_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* QCLAB_H */
