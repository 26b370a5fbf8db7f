#ifndef RUBBLE_FORGE_H
#define RUBBLE_FORGE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum RfStatus {
  RF_STATUS_OK = 0,
  RF_STATUS_NULL_POINTER = 1,
  RF_STATUS_INVALID_UTF8 = 2,
  /**
   * Malformed JSON.
   */
  RF_STATUS_PARSE = 3,
  /**
   * Well-formed but invalid input (unknown names, overlaps, bad values).
   */
  RF_STATUS_SEMANTIC = 4,
  RF_STATUS_FRACTURE = 5,
  RF_STATUS_PHYSICS = 6,
  RF_STATUS_OUT_OF_RANGE = 7,
  RF_STATUS_IO = 8,
  RF_STATUS_PANIC = 9,
} RfStatus;

/**
 * Opaque rendered frame handle.
 */
typedef struct RfFrame RfFrame;

/**
 * Opaque world handle.
 */
typedef struct RfWorld RfWorld;

/**
 * Camera pose and intrinsics. `rotation` is a unit quaternion `[w, x, y, z]`;
 * the camera looks along its local −Z with +Y up.
 */
typedef struct RfCamera {
  double translation[3];
  double rotation[4];
  uint32_t width;
  uint32_t height;
  double horizontal_fov;
  double near;
  double far;
} RfCamera;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message describing the last failure on this thread; empty after a
 * successful call. Valid until the next call on the same thread.
 */
const char *rf_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *rf_version(void);

/**
 * Parses a scene document and instantiates its world (events are not run).
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` a valid pointer.
 */
enum RfStatus rf_world_from_scene_json(const char *json, struct RfWorld **out);

/**
 * # Safety
 * `world` must come from [`rf_world_from_scene_json`] and not be used again.
 */
void rf_world_free(struct RfWorld *world);

/**
 * # Safety
 * `world` must be null or a live handle.
 */
size_t rf_world_fragment_count(const struct RfWorld *world);

/**
 * # Safety
 * `world` must be null or a live handle.
 */
size_t rf_world_joint_count(const struct RfWorld *world);

/**
 * # Safety
 * `world` must be null or a live handle.
 */
size_t rf_world_released_count(const struct RfWorld *world);

/**
 * Number of cameras declared by the world's scene.
 *
 * # Safety
 * `world` must be null or a live handle.
 */
size_t rf_world_camera_count(const struct RfWorld *world);

/**
 * Runs one destruction event (JSON object with a `type` tag) to completion.
 * `out_released` may be null; otherwise it receives the number of fragments
 * the event released.
 *
 * # Safety
 * `world` must be a live handle, `json` a NUL-terminated string.
 */
enum RfStatus rf_world_apply_event_json(struct RfWorld *world,
                                        const char *json,
                                        size_t *out_released);

/**
 * Advances physics by `n` fixed steps.
 *
 * # Safety
 * `world` must be a live handle.
 */
enum RfStatus rf_world_step(struct RfWorld *world, uint64_t n);

/**
 * Steps until the rubble comes to rest. `out_steps` may be null.
 *
 * # Safety
 * `world` must be a live handle.
 */
enum RfStatus rf_world_settle(struct RfWorld *world, size_t *out_steps);

/**
 * Renders scene camera `camera_index`.
 *
 * # Safety
 * `world` must be a live handle and `out` a valid pointer.
 */
enum RfStatus rf_world_render(const struct RfWorld *world,
                              size_t camera_index,
                              struct RfFrame **out);

/**
 * Renders from an arbitrary camera.
 *
 * # Safety
 * `world`, `camera` and `out` must be valid pointers.
 */
enum RfStatus rf_world_render_camera(const struct RfWorld *world,
                                     const struct RfCamera *camera,
                                     struct RfFrame **out);

/**
 * # Safety
 * `frame` must be null or a live handle.
 */
uint32_t rf_frame_width(const struct RfFrame *frame);

/**
 * # Safety
 * `frame` must be null or a live handle.
 */
uint32_t rf_frame_height(const struct RfFrame *frame);

/**
 * Row-major RGB bytes (`3·width·height`). Borrowed from the frame.
 *
 * # Safety
 * `frame` must be null or a live handle; `len` may be null.
 */
const uint8_t *rf_frame_color(const struct RfFrame *frame, size_t *len);

/**
 * Depth in meters along the optical axis; `+inf` where nothing was hit.
 *
 * # Safety
 * `frame` must be null or a live handle; `len` may be null.
 */
const float *rf_frame_depth(const struct RfFrame *frame, size_t *len);

/**
 * Semantic labels; 0 is background.
 *
 * # Safety
 * `frame` must be null or a live handle; `len` may be null.
 */
const uint16_t *rf_frame_segmentation(const struct RfFrame *frame, size_t *len);

/**
 * Writes the frame's image triple and sidecar into `directory`.
 *
 * # Safety
 * `frame` must be a live handle, `directory` a NUL-terminated string.
 */
enum RfStatus rf_frame_export(const struct RfFrame *frame, const char *directory, size_t index);

/**
 * # Safety
 * `frame` must come from a render call and not be used again.
 */
void rf_frame_free(struct RfFrame *frame);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RUBBLE_FORGE_H */
