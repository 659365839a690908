#ifndef BOXPOSE_H
#define BOXPOSE_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Bumped whenever a signature or struct layout changes.
 */
#define BP_ABI_VERSION 1

typedef enum BpStatus {
  BP_STATUS_OK = 0,
  BP_STATUS_NULL_POINTER = 1,
  BP_STATUS_INVALID_ARGUMENT = 2,
  BP_STATUS_FULLY_BEHIND_CAMERA = 3,
  BP_STATUS_NON_POSITIVE_DEPTH = 4,
  BP_STATUS_DIMENSION_MISMATCH = 5,
  BP_STATUS_TOO_FEW_SAMPLES = 6,
  BP_STATUS_BUFFER_TOO_SMALL = 7,
  BP_STATUS_INTERNAL = 8,
  BP_STATUS_PANIC = 9,
} BpStatus;

/**
 * Conditioning variants that produce an image.
 */
typedef enum BpVariant {
  BP_VARIANT_POSE_MAP = 0,
  BP_VARIANT_SIX_CHANNEL = 1,
  BP_VARIANT_FACES = 2,
  BP_VARIANT_BOX_DEPTH = 3,
} BpVariant;

typedef struct BpBox BpBox;

typedef struct BpCamera BpCamera;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

uint32_t bp_abi_version(void);

/**
 * Copies the calling thread's last error message into `buf` (NUL-terminated, truncated
 * to `len - 1` bytes) and returns the full message length in bytes.
 *
 * # Safety
 * `buf` must be null or point to `len` writable bytes.
 */
size_t bp_last_error_message(char *buf, size_t len);

/**
 * Creates a camera from intrinsics and a world-to-camera pose (`rotation` as `w, x, y, z`).
 *
 * # Safety
 * `rotation` must point to 4 doubles, `translation` to 3, `out` to a writable handle slot.
 */
enum BpStatus bp_camera_new(double fx,
                            double fy,
                            double cx,
                            double cy,
                            uint32_t width,
                            uint32_t height,
                            const double *rotation,
                            const double *translation,
                            struct BpCamera **out);

/**
 * # Safety
 * `camera` must be null or a handle from [`bp_camera_new`] not yet freed.
 */
void bp_camera_free(struct BpCamera *camera);

/**
 * Creates a yaw-only box from its center, size `(w, l, h)` and yaw.
 *
 * # Safety
 * `center` must point to 3 doubles and `out` to a writable handle slot.
 */
enum BpStatus bp_box_new(const double *center,
                         double w,
                         double l,
                         double h,
                         double yaw,
                         struct BpBox **out);

/**
 * # Safety
 * `b` must be null or a handle from [`bp_box_new`] not yet freed.
 */
void bp_box_free(struct BpBox *b);

/**
 * Writes the 8 world-frame corners as 24 doubles, corner-major.
 *
 * # Safety
 * `b` must be a live handle and `out` must point to `out_len` writable doubles.
 */
enum BpStatus bp_box_corners(const struct BpBox *b, double *out, size_t out_len);

/**
 * Channels produced by a variant, or 0 for an unknown value.
 */
size_t bp_variant_channels(uint32_t variant);

/**
 * Renders a conditioning map of `width x height` into `out` (channel-last f32, RGB values
 * in `[0, 1]`, depth in meters with 0 for background). `variant` takes a [`BpVariant`]
 * value.
 *
 * # Safety
 * Handles must be live; `out` must point to `out_len` writable floats and `channels`, if
 * not null, to a writable size.
 */
enum BpStatus bp_render(const struct BpCamera *camera,
                        const struct BpBox *b,
                        uint32_t variant,
                        uint32_t width,
                        uint32_t height,
                        float *out,
                        size_t out_len,
                        size_t *channels);

/**
 * Writes the convex-hull inpainting mask as `width * height` bytes of 0 or 255.
 *
 * # Safety
 * Handles must be live; `out` must point to `out_len` writable bytes.
 */
enum BpStatus bp_hull_mask(const struct BpCamera *camera,
                           const struct BpBox *b,
                           uint32_t width,
                           uint32_t height,
                           uint8_t *out,
                           size_t out_len);

/**
 * 16 values: normalized `(u, v)` of each corner.
 *
 * # Safety
 * Handles must be live; `out` must point to `out_len` writable doubles.
 */
enum BpStatus bp_encode_corners_2d(const struct BpCamera *camera,
                                   const struct BpBox *b,
                                   double *out,
                                   size_t out_len);

/**
 * 24 values: normalized `(u, v)` and camera depth of each corner.
 *
 * # Safety
 * Handles must be live; `out` must point to `out_len` writable doubles.
 */
enum BpStatus bp_encode_corners_25d(const struct BpCamera *camera,
                                    const struct BpBox *b,
                                    double *out,
                                    size_t out_len);

/**
 * Sinusoidal embedding with `2 * bands` outputs per input value.
 *
 * # Safety
 * `values` must point to `n` doubles and `out` to `out_len` writable doubles.
 */
enum BpStatus bp_fourier_embed(const double *values,
                               size_t n,
                               uint32_t bands,
                               double *out,
                               size_t out_len);

/**
 * # Safety
 * `out` must point to a writable double.
 */
enum BpStatus bp_yaw_error(double a, double b, double *out);

/**
 * # Safety
 * `out` must point to a writable bool.
 */
enum BpStatus bp_is_flipped(double aoe, bool *out);

/**
 * Fréchet distance between two row-major feature matrices of `n_a x dim` and `n_b x dim`.
 *
 * # Safety
 * `a` and `b` must point to `n_a * dim` and `n_b * dim` floats; `out` to a writable double.
 */
enum BpStatus bp_frechet_distance(const float *a,
                                  size_t n_a,
                                  const float *b,
                                  size_t n_b,
                                  size_t dim,
                                  double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* BOXPOSE_H */
