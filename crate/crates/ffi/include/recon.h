#ifndef RECON_H
#define RECON_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum ReconStatus {
  RECON_STATUS_OK = 0,
  RECON_STATUS_NULL_POINTER = 1,
  RECON_STATUS_INVALID_ARGUMENT = 2,
  RECON_STATUS_DIMENSION = 3,
  RECON_STATUS_BUFFER_TOO_SMALL = 4,
  RECON_STATUS_NUMERICAL = 5,
  RECON_STATUS_DIVERGED = 6,
  RECON_STATUS_DEGENERATE_SAMPLING = 7,
  RECON_STATUS_CALIBRATION = 8,
  RECON_STATUS_PARSE = 9,
  RECON_STATUS_IO = 10,
  RECON_STATUS_PANIC = 99,
} ReconStatus;

/**
 * Iteration variants accepted by [`recon_reconstruct`].
 */
typedef enum ReconMode {
  RECON_MODE_PLAIN = 0,
  RECON_MODE_RELAXED = 1,
  RECON_MODE_MULTIPLIERLESS = 2,
} ReconMode;

/**
 * A family of sampling kernels.
 */
typedef struct ReconFamily ReconFamily;

/**
 * The sampling operator of a kernel family on the band-limited space.
 */
typedef struct ReconOperator ReconOperator;

/**
 * A (possibly multi-channel) periodic signal on a uniform grid.
 */
typedef struct ReconSignal ReconSignal;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null. The pointer is
 * valid until the next call into the library on the same thread.
 */
const char *recon_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *recon_version(void);

/**
 * Random real band-limited single-channel signal with a flat spectrum.
 *
 * # Safety
 * `out` must be a valid pointer to writable handle storage.
 */
enum ReconStatus recon_signal_random(size_t period,
                                     size_t rate,
                                     uint64_t seed,
                                     struct ReconSignal **out);

/**
 * Signal from channel-major grid values, `channels · period · rate` of them.
 *
 * # Safety
 * `values` must point to `len` readable doubles; `out` must be writable.
 */
enum ReconStatus recon_signal_from_values(size_t period,
                                          size_t rate,
                                          size_t channels,
                                          const double *values,
                                          size_t len,
                                          struct ReconSignal **out);

/**
 * Grid points per channel.
 *
 * # Safety
 * `signal` must be a live handle or null.
 */
size_t recon_signal_len(const struct ReconSignal *signal);

/**
 * # Safety
 * `signal` must be a live handle or null.
 */
size_t recon_signal_channels(const struct ReconSignal *signal);

/**
 * Copies one channel's grid values into `out` (`len` must equal the grid
 * length).
 *
 * # Safety
 * `signal` must be a live handle; `out` must point to `len` writable doubles.
 */
enum ReconStatus recon_signal_values(const struct ReconSignal *signal,
                                     size_t channel,
                                     double *out,
                                     size_t len);

/**
 * `‖a − b‖² / ‖b‖²`.
 *
 * # Safety
 * Both handles must be live.
 */
enum ReconStatus recon_signal_rel_error(const struct ReconSignal *a,
                                        const struct ReconSignal *b,
                                        double *out);

/**
 * # Safety
 * `signal` must come from this library and not be used afterwards.
 */
void recon_signal_free(struct ReconSignal *signal);

/**
 * Integrate-and-fire encoding of a single-channel signal over one period.
 *
 * Writes the `n + 1` spike times (starting with the reset at 0) and the `n`
 * interval samples. With `times_cap` or `samples_cap` too small, returns
 * `RECON_STATUS_BUFFER_TOO_SMALL` and still stores the interval count `n`
 * in `count`.
 *
 * # Safety
 * Buffers must hold their stated capacities; `count` must be writable.
 */
enum ReconStatus recon_encode_if(const struct ReconSignal *signal,
                                 double bias,
                                 double threshold,
                                 double *times,
                                 size_t times_cap,
                                 double *samples,
                                 size_t samples_cap,
                                 size_t *count);

/**
 * Integrate-and-fire kernels on the consecutive intervals of the strictly
 * increasing `partition` (`len ≥ 2` boundaries), with leak `alpha ≥ 0`.
 *
 * # Safety
 * `partition` must point to `len` doubles; `out` must be writable.
 */
enum ReconStatus recon_family_integrate_fire(size_t period,
                                             size_t rate,
                                             const double *partition,
                                             size_t len,
                                             double alpha,
                                             struct ReconFamily **out);

/**
 * Point-sampling kernels at `times`.
 *
 * # Safety
 * `times` must point to `len` doubles; `out` must be writable.
 */
enum ReconStatus recon_family_point(size_t period,
                                    size_t rate,
                                    const double *times,
                                    size_t len,
                                    struct ReconFamily **out);

/**
 * # Safety
 * `family` must be a live handle or null.
 */
size_t recon_family_len(const struct ReconFamily *family);

/**
 * # Safety
 * `family` must come from this library and not be used afterwards.
 */
void recon_family_free(struct ReconFamily *family);

/**
 * Samples `⟨x, h_k⟩`; `raw` and `normalized` (either may be null) receive
 * `s_k` and `s_k/‖h_k‖`, each `len = family length` long.
 *
 * # Safety
 * Handles must be live; non-null buffers must hold `len` doubles.
 */
enum ReconStatus recon_sample(const struct ReconSignal *signal,
                              const struct ReconFamily *family,
                              double *raw,
                              double *normalized,
                              size_t len);

/**
 * Sampling operator of an orthogonal family on the band-limited space of
 * its channel count.
 *
 * # Safety
 * `family` must be live; `out` must be writable.
 */
enum ReconStatus recon_operator_new(const struct ReconFamily *family, struct ReconOperator **out);

/**
 * # Safety
 * `op` must come from this library and not be used afterwards.
 */
void recon_operator_free(struct ReconOperator *op);

/**
 * Runs `iterations` updates of the discrete-time iteration from zero on the
 * normalized samples and synthesizes the estimate. `lambda` is used by
 * `RECON_MODE_RELAXED` only and must lie in `(0, 2)`.
 *
 * # Safety
 * `op` must be live; `s_hat` must hold `len` doubles; `out` must be writable.
 */
enum ReconStatus recon_reconstruct(const struct ReconOperator *op,
                                   const double *s_hat,
                                   size_t len,
                                   size_t iterations,
                                   enum ReconMode mode,
                                   double lambda,
                                   struct ReconSignal **out);

/**
 * Minimum-norm least-squares solution `Ŝ†ŝ` by thresholded SVD
 * (`rel_threshold` relative to the largest singular value).
 *
 * # Safety
 * `op` must be live; `s_hat` must hold `len` doubles; `out` must be writable.
 */
enum ReconStatus recon_pinv_solve(const struct ReconOperator *op,
                                  const double *s_hat,
                                  size_t len,
                                  double rel_threshold,
                                  struct ReconSignal **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RECON_H */
