#ifndef COMOVE_H
#define COMOVE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

#define COMOVE_SIDE_LEFT 0

#define COMOVE_SIDE_RIGHT 1

typedef enum ComoveStatus {
  COMOVE_STATUS_OK = 0,
  COMOVE_STATUS_NULL_POINTER = 1,
  COMOVE_STATUS_INVALID_ARGUMENT = 2,
  /**
   * Degenerate geometry: point on the principal plane, parallel rays,
   * vanishing depth denominator.
   */
  COMOVE_STATUS_DEGENERATE = 3,
  /**
   * Time outside the stage log span.
   */
  COMOVE_STATUS_OUT_OF_RANGE = 4,
  COMOVE_STATUS_NO_CONVERGENCE = 5,
  /**
   * Any other computation failure.
   */
  COMOVE_STATUS_FAILED = 6,
  /**
   * A Rust panic was caught at the boundary.
   */
  COMOVE_STATUS_INTERNAL = 99,
} ComoveStatus;

/**
 * Opaque stereo rig.
 */
typedef struct ComoveRig ComoveRig;

/**
 * Opaque stage angle log.
 */
typedef struct ComoveStageLog ComoveStageLog;

/**
 * Intrinsics and home pose of one camera.
 */
typedef struct ComoveCameraParams {
  double focal_px;
  /**
   * Principal point offset from the image center.
   */
  double center_x_px;
  double center_y_px;
  double k1;
  double sensor_width_px;
  double sensor_height_px;
  double yaw_rad;
  double pitch_rad;
  double roll_rad;
} ComoveCameraParams;

/**
 * Inputs of the first-order error model.
 */
typedef struct ComoveErrorModel {
  double focal_px;
  double baseline_m;
  /**
   * Relative yaw of the cameras, right minus left.
   */
  double psi_rad;
  double delta_baseline_m;
  double delta_focal_px;
  double delta_psi_rad;
  double zbar_m;
  /**
   * Relative rotational speed, rad/s.
   */
  double speed_rad_s;
} ComoveErrorModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *comove_version(void);

/**
 * Message of the last failed call on this thread; empty after a success.
 * The pointer stays valid until the next `comove_*` call on the same thread.
 */
const char *comove_last_error_message(void);

/**
 * Create a rig. Camera centers are at `(-d/2, 0, 0)` and `(d/2, 0, 0)`.
 *
 * # Safety
 * `left`, `right` and `out` must be null or valid for reads/writes.
 */
enum ComoveStatus comove_rig_new(double baseline_m,
                                 const struct ComoveCameraParams *left,
                                 const struct ComoveCameraParams *right,
                                 struct ComoveRig **out);

/**
 * # Safety
 * `rig` must be null or a handle from `comove_rig_new` not yet freed.
 */
void comove_rig_free(struct ComoveRig *rig);

/**
 * Project a world point with camera `side` at stage angle `stage_angle_rad`.
 * Distortion is not applied.
 *
 * # Safety
 * `point` must point to 3 doubles and `out_px` to 2 writable doubles.
 */
enum ComoveStatus comove_rig_project(const struct ComoveRig *rig,
                                     uint32_t side,
                                     double stage_angle_rad,
                                     const double *point,
                                     double *out_px);

/**
 * Triangulate one target from undistorted pixels in both cameras.
 *
 * # Safety
 * `left_px` and `right_px` must point to 2 doubles, `out_point` to 3 writable doubles.
 */
enum ComoveStatus comove_rig_triangulate(const struct ComoveRig *rig,
                                         double stage_angle_left_rad,
                                         double stage_angle_right_rad,
                                         const double *left_px,
                                         const double *right_px,
                                         double *out_point);

/**
 * Create a stage log; sample `k` of `angles` has index `first_index + k`
 * and time `(first_index + k) / rate_hz` on the stage clock.
 *
 * # Safety
 * `angles` must point to `len` doubles; `out` must be writable.
 */
enum ComoveStatus comove_stage_log_new(int64_t first_index,
                                       const double *angles,
                                       size_t len,
                                       double rate_hz,
                                       struct ComoveStageLog **out);

/**
 * # Safety
 * `log` must be null or a handle from `comove_stage_log_new` not yet freed.
 */
void comove_stage_log_free(struct ComoveStageLog *log);

/**
 * Linearly interpolated stage angle at stage-clock time `t_s`.
 *
 * # Safety
 * `log` must be a live handle; `out_angle_rad` must be writable.
 */
enum ComoveStatus comove_stage_log_angle_at(const struct ComoveStageLog *log,
                                            double t_s,
                                            double *out_angle_rad);

/**
 * Closed-form depth `Z = Omega d / (s - (alpha + phi) Omega)` for a rig
 * with zero pitch and roll.
 *
 * # Safety
 * `out_z_m` must be writable.
 */
enum ComoveStatus comove_z_closed_form(double focal_px,
                                       double baseline_m,
                                       double disparity_px,
                                       double alpha_rad,
                                       double phi_rad,
                                       double *out_z_m);

/**
 * Predicted relative distance error at mean depth `model.zbar_m`.
 *
 * # Safety
 * `model` must be readable and `out` writable.
 */
enum ComoveStatus comove_predict_rel_error(const struct ComoveErrorModel *model, double *out);

/**
 * Predicted depth drift rate, m/s, of a still target at depth `z_m`.
 *
 * # Safety
 * `model` must be readable and `out` writable.
 */
enum ComoveStatus comove_predict_z_drift(const struct ComoveErrorModel *model,
                                         double z_m,
                                         double *out);

/**
 * Best rotation angle taking `reference` onto `current` after centering.
 * Both arrays hold `n` interleaved `(x, y)` pairs.
 *
 * # Safety
 * `reference` and `current` must point to `2 n` doubles; outputs must be
 * writable (`out_rmsd` may be null).
 */
enum ComoveStatus comove_kabsch_angle(const double *reference,
                                      const double *current,
                                      size_t n,
                                      double *out_angle_rad,
                                      double *out_rmsd);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* COMOVE_H */
