#ifndef ROADGRIP_H
#define ROADGRIP_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdbool.h>
#include <stddef.h>

/**
 * Number of class probabilities per pixel.
 */
#define RG_CLASS_COUNT 5

/**
 * Values per pixel in a summary buffer: mean, median, p05, p95, sigma_low, sigma_high.
 */
#define RG_SUMMARY_CHANNELS 6

typedef enum RgStatus {
  RG_STATUS_OK = 0,
  RG_STATUS_NULL_POINTER = 1,
  RG_STATUS_INVALID_INPUT = 2,
  RG_STATUS_NUMERICAL = 3,
  RG_STATUS_IO = 4,
  RG_STATUS_FORMAT = 5,
  RG_STATUS_PANIC = 6,
} RgStatus;

/**
 * Opaque piecewise-linear density.
 */
typedef struct RgDensity RgDensity;

/**
 * Opaque mixture table over the five surface state classes.
 */
typedef struct RgMixtureTable RgMixtureTable;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL if none.
 * The pointer stays valid until the next failing call on the same thread.
 */
const char *rg_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *rg_version(void);

/**
 * Builds a continuous density from `n` knots and pdf values.
 *
 * # Safety
 * `class_name` must be a NUL-terminated string; `knots` and `values` must point
 * to `n` readable doubles; `out` must be writable.
 */
enum RgStatus rg_density_new(const char *class_name,
                             const double *knots,
                             const double *values,
                             size_t n,
                             bool auto_normalize,
                             struct RgDensity **out);

/**
 * # Safety
 * `d` must be NULL or a handle from [`rg_density_new`] not yet freed.
 */
void rg_density_free(struct RgDensity *d);

/**
 * pdf at `g`; NaN for a NULL handle.
 *
 * # Safety
 * `d` must be NULL or a live density handle.
 */
double rg_density_pdf(const struct RgDensity *d, double g);

/**
 * cdf at `g`; NaN for a NULL handle.
 *
 * # Safety
 * `d` must be NULL or a live density handle.
 */
double rg_density_cdf(const struct RgDensity *d, double g);

/**
 * # Safety
 * `d` must be NULL or a live density handle.
 */
double rg_density_mean(const struct RgDensity *d);

/**
 * # Safety
 * `d` must be NULL or a live density handle.
 */
double rg_density_median(const struct RgDensity *d);

/**
 * # Safety
 * `d` must be NULL or a live density handle.
 */
double rg_density_std_dev(const struct RgDensity *d);

/**
 * Smallest grip value with cdf ≥ `p`.
 *
 * # Safety
 * `d` must be a live density handle and `out` writable.
 */
enum RgStatus rg_density_quantile(const struct RgDensity *d, double p, double *out);

/**
 * Mixture table from `n` density handles, one per class name.
 * The handles are copied; the caller keeps ownership.
 *
 * # Safety
 * `densities` must point to `n` live density handles; `out` must be writable.
 */
enum RgStatus rg_table_from_densities(const struct RgDensity *const *densities,
                                      size_t n,
                                      struct RgMixtureTable **out);

/**
 * Mixture table from a `class,knot_x,density` CSV file.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum RgStatus rg_table_from_csv(const char *path, struct RgMixtureTable **out);

/**
 * # Safety
 * `t` must be NULL or a table handle not yet freed.
 */
void rg_table_free(struct RgMixtureTable *t);

/**
 * Summary of one pixel: `probs` holds 5 class probabilities in state-code
 * order, `out` receives 6 values.
 *
 * # Safety
 * `t` must be a live table; `probs` readable for 5 doubles; `out` writable for 6.
 */
enum RgStatus rg_table_summarize(const struct RgMixtureTable *t, const double *probs, double *out);

/**
 * Fuses a row-major `height × width × 5` probability buffer into a
 * `height × width × 6` summary buffer using `workers` threads (0 or 1 runs
 * on the calling thread). Output does not depend on `workers`.
 *
 * # Safety
 * `probs` must be readable for `height*width*5` doubles and `out` writable
 * for `height*width*6` doubles.
 */
enum RgStatus rg_table_fuse_raster(const struct RgMixtureTable *t,
                                   const double *probs,
                                   size_t height,
                                   size_t width,
                                   size_t workers,
                                   double *out);

/**
 * Inverse standard normal cdf for `p` in (0, 1).
 *
 * # Safety
 * `out` must be writable.
 */
enum RgStatus rg_normal_quantile(double p, double *out);

/**
 * Pinball loss of prediction `yhat` for target `y` at level `alpha`.
 */
double rg_pinball(double y, double yhat, double alpha);

/**
 * Focal loss of one pixel and its derivative with respect to the true
 * class probability.
 *
 * # Safety
 * `probs` must be readable for `k` doubles; `loss` and `grad` writable.
 */
enum RgStatus rg_focal_loss(const double *probs,
                            size_t k,
                            size_t y,
                            double gamma,
                            double weight,
                            double *loss,
                            double *grad);

/**
 * Interval clamping applied before coverage evaluation.
 *
 * # Safety
 * `lo_out` and `hi_out` must be writable.
 */
enum RgStatus rg_clamp_interval(double lo, double hi, double *lo_out, double *hi_out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ROADGRIP_H */
