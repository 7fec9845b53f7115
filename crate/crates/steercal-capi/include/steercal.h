/* C interface of the steercal calibration toolkit.
 *
 * Poses are flat arrays of n_joints * 2 doubles (x, y interleaved) in
 * pose-centric units, with one visibility byte per joint (nonzero =
 * visible). Rotations are 3-component Rodrigues vectors (axis * angle,
 * radians). Every fallible call returns ScStatus; on failure,
 * sc_last_error() holds a message valid until the next failing call on
 * the same thread.
 */

#ifndef STEERCAL_H
#define STEERCAL_H

#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum ScStatus {
  SC_STATUS_OK = 0,
  SC_STATUS_INVALID_ARGUMENT = 1,
  SC_STATUS_IO_ERROR = 2,
  SC_STATUS_FORMAT_ERROR = 3,
  SC_STATUS_DEGENERATE_INPUT = 4,
  SC_STATUS_CALIBRATION_FAILED = 5,
  SC_STATUS_INTERNAL_ERROR = 6,
} ScStatus;

/* Opaque handle to a loaded model checkpoint. */
typedef struct ScModel ScModel;

typedef struct ScPairSummary {
  uint8_t success;
  uint32_t attempts_used;
  double median_reproj_px;
  double rotation_rodrigues[3];
  double translation_direction[3];
} ScPairSummary;

/* Library version string (static storage). */
const char *sc_version(void);

/* Last error message on this thread (static storage per thread). */
const char *sc_last_error(void);

/* Loads a checkpoint file; release the handle with sc_model_free. */
ScStatus sc_model_load(const char *path, ScModel **out_model);

/* Releases a model handle; null is a no-op. */
void sc_model_free(ScModel *model);

/* Joint count the model expects (0 for a null handle). */
uint32_t sc_model_n_joints(const ScModel *model);

/* Steers a pose by a rotation. out_coords receives n_joints * 2 values. */
ScStatus sc_model_steer(const ScModel *model, const double *coords,
                        const uint8_t *visible, const double *rodrigues,
                        double *out_coords);

/* Fills occluded joints (identity-rotation steering). keep_visible nonzero
 * copies visible input joints verbatim. */
ScStatus sc_model_complete(const ScModel *model, const double *coords,
                           const uint8_t *visible, uint8_t keep_visible,
                           double *out_coords);

/* Calibrates two views of a detections file. config_json may be null for
 * defaults; report_path may be null to skip the report file. Returns
 * SC_STATUS_CALIBRATION_FAILED when the reprojection gate is not reached;
 * out_summary then holds the best attempt. */
ScStatus sc_calibrate_pair_file(const ScModel *model,
                                const char *detections_path, uint32_t view_a,
                                uint32_t view_b, const char *config_json,
                                const char *report_path,
                                ScPairSummary *out_summary);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* STEERCAL_H */
