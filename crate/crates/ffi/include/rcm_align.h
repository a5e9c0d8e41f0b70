#ifndef RCM_ALIGN_H
#define RCM_ALIGN_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum RcmStatus {
  RCM_STATUS_OK = 0,
  RCM_STATUS_NULL_POINTER = 1,
  RCM_STATUS_INVALID_ARGUMENT = 2,
  RCM_STATUS_SINGULAR = 3,
  RCM_STATUS_INSUFFICIENT_EXCITATION = 4,
  RCM_STATUS_EMPTY_ACCEPTANCE = 5,
  RCM_STATUS_EMPTY_INTERSECTION = 6,
  RCM_STATUS_IO = 7,
  RCM_STATUS_PARSE = 8,
  RCM_STATUS_NOT_FREE_SPACE = 9,
  RCM_STATUS_PANIC = 10,
} RcmStatus;

/**
 * Loaded joint-state dataset.
 */
typedef struct RcmDataset RcmDataset;

/**
 * Trained free-space torque model.
 */
typedef struct RcmModel RcmModel;

typedef struct RcmPhase2Result {
  double d_hat;
  double cost;
  size_t samples_used;
  size_t samples_rejected;
} RcmPhase2Result;

typedef struct RcmStiffness {
  double lower;
  double upper;
  double k_hat;
} RcmStiffness;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null. Valid until the
 * next failing call on the same thread.
 */
const char *rcm_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *rcm_version(void);

/**
 * Incision point for distance `d` (m). Writes 3 values to `out`.
 *
 * # Safety
 * `out` must point to 3 writable doubles.
 */
enum RcmStatus rcm_dh_forward(double q1, double q2, double q3, double d, double *out);

/**
 * Incision Jacobian, row-major, 9 values.
 *
 * # Safety
 * `out` must point to 9 writable doubles.
 */
enum RcmStatus rcm_incision_jacobian(double q1, double q2, double q3, double d, double *out);

/**
 * # Safety
 * `out` must point to a writable double.
 */
enum RcmStatus rcm_pivot_angle(double q1, double q2, double *out);

/**
 * Loads a dataset CSV.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum RcmStatus rcm_dataset_load(const char *path, struct RcmDataset **out);

/**
 * Synthesizes a teleoperation dataset with the default rig.
 *
 * # Safety
 * `out` must be writable.
 */
enum RcmStatus rcm_dataset_simulate_teleop(double d_true,
                                           double k_true,
                                           double duration,
                                           uint64_t seed,
                                           bool noise_free,
                                           struct RcmDataset **out);

/**
 * # Safety
 * `dataset` must come from this library; `out` must be writable.
 */
enum RcmStatus rcm_dataset_len(const struct RcmDataset *dataset, size_t *out);

/**
 * Releases a dataset. Null is ignored.
 *
 * # Safety
 * `dataset` must come from this library and not be used afterwards.
 */
void rcm_dataset_free(struct RcmDataset *dataset);

/**
 * Loads a model JSON written by `rcm-align train`.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum RcmStatus rcm_model_load(const char *path, struct RcmModel **out);

/**
 * Releases a model. Null is ignored.
 *
 * # Safety
 * `model` must come from this library and not be used afterwards.
 */
void rcm_model_free(struct RcmModel *model);

/**
 * Incision force at sample `index` for distance `d`. A null `model` uses
 * the recorded free-space torque columns.
 *
 * # Safety
 * Handles must come from this library; `out` must point to 3 doubles.
 */
enum RcmStatus rcm_estimate_force(const struct RcmModel *model,
                                  const struct RcmDataset *dataset,
                                  size_t index,
                                  double d,
                                  double *out);

/**
 * Estimates the misalignment at stiffness `k_hat` with default bounds and
 * filters, except `f_min`. With `use_true_forces` the recorded forces are
 * fitted and `model` is ignored; otherwise a null `model` uses the recorded
 * free-space torque.
 *
 * # Safety
 * Handles must come from this library; `out` must be writable.
 */
enum RcmStatus rcm_phase2_optimize_d(const struct RcmDataset *dataset,
                                     const struct RcmModel *model,
                                     bool use_true_forces,
                                     double k_hat,
                                     double f_min,
                                     struct RcmPhase2Result *out);

/**
 * Intersects `n` stiffness ranges and takes the midpoint.
 *
 * # Safety
 * `lower` and `upper` must point to `n` doubles each; `out` must be writable.
 */
enum RcmStatus rcm_fuse_k(const double *lower,
                          const double *upper,
                          size_t n,
                          struct RcmStiffness *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RCM_ALIGN_H */
