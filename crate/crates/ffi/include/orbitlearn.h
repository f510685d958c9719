#ifndef ORBITLEARN_H
#define ORBITLEARN_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum OlStatus {
  OL_STATUS_OK = 0,
  OL_STATUS_NULL_POINTER = 1,
  OL_STATUS_INVALID_ARGUMENT = 2,
  OL_STATUS_DOMAIN = 3,
  OL_STATUS_NOT_FOUND = 4,
  OL_STATUS_UNSUPPORTED_ORBIT = 5,
  OL_STATUS_INTEGRATION = 6,
  OL_STATUS_CONFIG = 7,
  OL_STATUS_INSTABILITY = 8,
  OL_STATUS_IO = 9,
  OL_STATUS_PARSE = 10,
  OL_STATUS_PANIC = 11,
  OL_STATUS_OTHER = 12,
} OlStatus;

typedef struct OlField OlField;

typedef struct OlModel OlModel;

typedef struct OlTrajectory OlTrajectory;

// Classical elements; angles in radians.
typedef struct OlElements {
  double semi_major;
  double eccentricity;
  double inclination;
  double raan;
  double arg_periapsis;
  double true_anomaly;
} OlElements;

typedef struct OlState {
  double position[3];
  double velocity[3];
} OlState;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the most recent failure on this thread, or an empty string.
// The pointer stays valid until the next library call on this thread.
const char *ol_last_error_message(void);

// Library version as a static NUL-terminated string.
const char *ol_version(void);

// Builds a zonal field from `count` (degree, normalized coefficient) pairs.
//
// # Safety
// `degrees` and `coefficients` must point to `count` elements (or be null
// when `count` is 0); `out` must be writable.
enum OlStatus ol_field_new(double mu,
                           double reference_radius,
                           const uint32_t *degrees,
                           const double *coefficients,
                           size_t count,
                           struct OlField **out_field);

// Bennu in normalized units (`mu = 1`, reference radius 1).
//
// # Safety
// `out` must be writable.
enum OlStatus ol_field_bennu_normalized(struct OlField **out_field);

// Bennu in SI units.
//
// # Safety
// `out` must be writable.
enum OlStatus ol_field_bennu_physical(struct OlField **out_field);

// # Safety
// `field` must come from an `ol_field_*` constructor and not be freed yet.
void ol_field_free(struct OlField *field);

// # Safety
// `position` must point to 3 doubles.
enum OlStatus ol_field_potential(const struct OlField *field,
                                 const double *position,
                                 double *out_value);

// # Safety
// `position` must point to 3 doubles and `out_accel` to 3 writable doubles.
enum OlStatus ol_field_acceleration(const struct OlField *field,
                                    const double *position,
                                    double *out_accel);

// Radius beyond which the degree-`degree` term stays below
// `fraction * mu / hill_radius`. `*found` is false where `P_n` vanishes.
//
// # Safety
// Output pointers must be writable.
enum OlStatus ol_influence_radius(const struct OlField *field,
                                  uint32_t degree,
                                  double colatitude,
                                  double fraction,
                                  double hill_radius,
                                  double *out_radius,
                                  bool *found);

// # Safety
// Pointers must be valid.
enum OlStatus ol_elements_to_state(const struct OlElements *elements,
                                   double mu,
                                   struct OlState *out_state);

// # Safety
// Pointers must be valid.
enum OlStatus ol_state_to_elements(const struct OlState *state,
                                   double mu,
                                   struct OlElements *out_elements);

// Propagates with RK4 and samples evenly in time.
//
// # Safety
// Pointers must be valid; the trajectory must be released with
// [`ol_trajectory_free`].
enum OlStatus ol_propagate(const struct OlField *field,
                           const struct OlState *state,
                           double n_periods,
                           uint32_t samples_per_period,
                           uint32_t steps_per_period,
                           struct OlTrajectory **out_trajectory);

// # Safety
// `trajectory` must be a live handle.
size_t ol_trajectory_len(const struct OlTrajectory *trajectory);

// Reads sample `index`: time, state and truth acceleration (unscaled).
//
// # Safety
// `out_accel` must point to 3 writable doubles.
enum OlStatus ol_trajectory_sample(const struct OlTrajectory *trajectory,
                                   size_t index,
                                   double *out_time,
                                   struct OlState *out_state,
                                   double *out_accel);

// # Safety
// `trajectory` must come from [`ol_propagate`] and not be freed yet.
void ol_trajectory_free(struct OlTrajectory *trajectory);

// True if the orbit enters the sphere of `radius` within `periods`
// Keplerian periods.
//
// # Safety
// Pointers must be valid.
enum OlStatus ol_classify_collision(const struct OlField *field,
                                    const struct OlState *state,
                                    double periods,
                                    double radius,
                                    uint32_t steps_per_period,
                                    bool *out_collides);

// `|a_true - a_pred| / |a_true|`; fails with `OL_STATUS_DOMAIN` when the
// true acceleration is zero.
//
// # Safety
// Both inputs must point to 3 doubles.
enum OlStatus ol_fractional_error(const double *a_true, const double *a_pred, double *out_value);

// Runs one characterization from a config file and writes its outputs
// (report, samples, model, datasets) into `out_dir`. `ics_path` may be null
// to use the list named in the config.
//
// # Safety
// String arguments must be NUL-terminated UTF-8.
enum OlStatus ol_run_single(const char *config_path,
                            const char *ics_path,
                            size_t ic_index,
                            const char *out_dir);

// Loads a model written by a run.
//
// # Safety
// `path` must be NUL-terminated UTF-8; release with [`ol_model_free`].
enum OlStatus ol_model_load(const char *path, struct OlModel **out_model);

// Predicts scaled accelerations for `count` positions laid out as
// `x0 y0 z0 x1 y1 z1 ...`.
//
// # Safety
// `positions` and `out_accel` must each hold `3 * count` doubles.
enum OlStatus ol_model_predict(const struct OlModel *model,
                               const double *positions,
                               size_t count,
                               double *out_accel);

// Whether training reported a numerical instability.
//
// # Safety
// `model` must be a live handle.
bool ol_model_unstable(const struct OlModel *model);

// # Safety
// `model` must come from [`ol_model_load`] and not be freed yet.
void ol_model_free(struct OlModel *model);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ORBITLEARN_H */
