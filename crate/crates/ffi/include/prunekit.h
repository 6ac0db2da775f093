#ifndef PRUNEKIT_H
#define PRUNEKIT_H

/* Generated by cbindgen from crates/ffi; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Return code of every fallible function.
 */
typedef enum PrunekitStatus {
  PRUNEKIT_STATUS_OK = 0,
  PRUNEKIT_STATUS_NULL_POINTER = 1,
  PRUNEKIT_STATUS_INVALID_ARGUMENT = 2,
  PRUNEKIT_STATUS_OUT_OF_RANGE = 3,
  PRUNEKIT_STATUS_IO = 4,
  PRUNEKIT_STATUS_FORMAT = 5,
  PRUNEKIT_STATUS_BUFFER_TOO_SMALL = 6,
  PRUNEKIT_STATUS_RUNTIME = 7,
  PRUNEKIT_STATUS_PANIC = 8,
} PrunekitStatus;

/**
 * Opaque handle to a pruning mask.
 */
typedef struct PrunekitMask PrunekitMask;

/**
 * Opaque handle to a set of named tensors.
 */
typedef struct PrunekitStore PrunekitStore;

typedef struct PrunekitYinParams {
  size_t frame;
  size_t hop;
  double fmin;
  double fmax;
  double threshold;
} PrunekitYinParams;

typedef struct PrunekitMwu {
  double u;
  double z;
  double p_two_sided;
  bool degenerate;
} PrunekitMwu;

typedef struct PrunekitZTest {
  double proportion;
  double z;
  double p;
  bool significant;
} PrunekitZTest;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * NUL-terminated crate version.
 */
const char *prunekit_version(void);

/**
 * Message of the most recent failure on the calling thread, or NULL.
 *
 * The pointer stays valid until the next failing call on this thread.
 */
const char *prunekit_last_error_message(void);

/**
 * Static, NUL-terminated description of a status code.
 */
const char *prunekit_status_string(enum PrunekitStatus status);

/**
 * Levenshtein distance between two token sequences.
 *
 * # Safety
 * Each pointer must address `len` readable elements (or be NULL when `len` is 0).
 */
enum PrunekitStatus prunekit_edit_distance(const uint32_t *reference,
                                           size_t reference_len,
                                           const uint32_t *hypothesis,
                                           size_t hypothesis_len,
                                           size_t *out);

/**
 * Word error rate: edit distance over reference length (nonempty reference).
 *
 * # Safety
 * As for `prunekit_edit_distance`.
 */
enum PrunekitStatus prunekit_wer(const uint32_t *reference,
                                 size_t reference_len,
                                 const uint32_t *hypothesis,
                                 size_t hypothesis_len,
                                 double *out);

struct PrunekitYinParams prunekit_yin_default_params(void);

/**
 * Frame-wise f0 of a mono signal; unvoiced frames are written as 0.
 *
 * On success `*out_frames` receives the frame count. When that exceeds
 * `capacity`, the count is still reported, nothing is written to
 * `f0_out` and the call returns
 * `PRUNEKIT_STATUS_BUFFER_TOO_SMALL`. `params` may be NULL for defaults.
 *
 * # Safety
 * `samples` must address `len` doubles, `f0_out` `capacity` doubles.
 */
enum PrunekitStatus prunekit_yin_f0(const double *samples,
                                    size_t len,
                                    uint32_t sample_rate,
                                    const struct PrunekitYinParams *params,
                                    double *f0_out,
                                    size_t capacity,
                                    size_t *out_frames);

/**
 * Mann-Whitney U test, normal approximation with tie and continuity correction.
 *
 * # Safety
 * `x` and `y` must address `nx` and `ny` doubles; `out` must be writable.
 */
enum PrunekitStatus prunekit_mann_whitney_u(const double *x,
                                            size_t nx,
                                            const double *y,
                                            size_t ny,
                                            struct PrunekitMwu *out);

/**
 * Exact two-sided Mann-Whitney p by enumeration (small samples only).
 *
 * # Safety
 * As for `prunekit_mann_whitney_u`.
 */
enum PrunekitStatus prunekit_exact_mwu_p(const double *x,
                                         size_t nx,
                                         const double *y,
                                         size_t ny,
                                         double *out);

/**
 * z-test of an A/B preference proportion `wins / n` against 0.5.
 *
 * # Safety
 * `out` must be writable.
 */
enum PrunekitStatus prunekit_pairwise_z(uint64_t wins,
                                        uint64_t n,
                                        double alpha,
                                        bool two_sided,
                                        struct PrunekitZTest *out);

/**
 * Loads a checkpoint. On success `*out` owns a new handle; release it with
 * `prunekit_store_free`.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a writable pointer.
 */
enum PrunekitStatus prunekit_store_load(const char *path, struct PrunekitStore **out);

/**
 * # Safety
 * `store` must be NULL or a handle from `prunekit_store_load`, freed at most once.
 */
void prunekit_store_free(struct PrunekitStore *store);

/**
 * # Safety
 * `store` must be a live handle and `path` a NUL-terminated string.
 */
enum PrunekitStatus prunekit_store_save(const struct PrunekitStore *store, const char *path);

/**
 * Number of prunable coordinates.
 *
 * # Safety
 * `store` must be a live handle and `out` writable.
 */
enum PrunekitStatus prunekit_store_prunable_len(const struct PrunekitStore *store, size_t *out);

/**
 * Number of coordinates across all tensors.
 *
 * # Safety
 * `store` must be a live handle and `out` writable.
 */
enum PrunekitStatus prunekit_store_total_len(const struct PrunekitStore *store, size_t *out);

/**
 * Global magnitude pruning: masks the `round(sparsity * d)` smallest
 * prunable weights. `*out` receives a new mask handle.
 *
 * # Safety
 * `store` must be a live handle and `out` writable.
 */
enum PrunekitStatus prunekit_store_ump(const struct PrunekitStore *store,
                                       double sparsity,
                                       struct PrunekitMask **out);

/**
 * Zeroes the masked coordinates of `store` in place.
 *
 * # Safety
 * `store` and `mask` must be live handles.
 */
enum PrunekitStatus prunekit_store_apply_mask(struct PrunekitStore *store,
                                              const struct PrunekitMask *mask);

/**
 * # Safety
 * `path` must be a NUL-terminated string and `out` writable.
 */
enum PrunekitStatus prunekit_mask_load(const char *path, struct PrunekitMask **out);

/**
 * # Safety
 * `mask` must be a live handle and `path` a NUL-terminated string.
 */
enum PrunekitStatus prunekit_mask_save(const struct PrunekitMask *mask, const char *path);

/**
 * # Safety
 * `mask` must be NULL or a mask handle, freed at most once.
 */
void prunekit_mask_free(struct PrunekitMask *mask);

/**
 * Fraction of masked coordinates.
 *
 * # Safety
 * `mask` must be a live handle and `out` writable.
 */
enum PrunekitStatus prunekit_mask_sparsity(const struct PrunekitMask *mask, double *out);

/**
 * # Safety
 * `mask` must be a live handle and `out` writable.
 */
enum PrunekitStatus prunekit_mask_zero_count(const struct PrunekitMask *mask, size_t *out);

/**
 * Intersection over union of the two masks' pruned sets (1 when both are empty).
 *
 * # Safety
 * `a` and `b` must be live handles and `out` writable.
 */
enum PrunekitStatus prunekit_mask_overlap(const struct PrunekitMask *a,
                                          const struct PrunekitMask *b,
                                          double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PRUNEKIT_H */
