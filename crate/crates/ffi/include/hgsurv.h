#ifndef HGSURV_H
#define HGSURV_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum HgsStatus {
  HGS_STATUS_OK = 0,
  HGS_STATUS_INVALID_ARGUMENT = 1,
  HGS_STATUS_NULL_POINTER = 2,
  HGS_STATUS_IO = 3,
  HGS_STATUS_PARSE = 4,
  HGS_STATUS_RUNTIME = 5,
  HGS_STATUS_PANIC = 6,
} HgsStatus;

/**
 * Which modality to withhold in [`hgs_model_predict`].
 */
typedef enum HgsMissing {
  HGS_MISSING_NONE = 0,
  HGS_MISSING_PATH = 1,
  HGS_MISSING_GENE = 2,
} HgsMissing;

/**
 * Opaque cohort handle.
 */
typedef struct HgsCohort HgsCohort;

/**
 * Opaque trained model: parameters, training config and optional bank.
 */
typedef struct HgsModel HgsModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the most recent failure on this thread, or null. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *hgs_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *hgs_version(void);

/**
 * Harrell's C-index. `events[i]` is nonzero when the event was observed.
 *
 * # Safety
 * Each array must hold `n` elements; `out` must be writable.
 */
enum HgsStatus hgs_c_index(const double *times,
                           const uint8_t *events,
                           const double *risks,
                           size_t n,
                           double *out);

/**
 * Two-group log-rank test; writes the chi-square statistic and p-value.
 *
 * # Safety
 * Each array must hold the stated number of elements; outputs must be writable.
 */
enum HgsStatus hgs_logrank(const double *times_a,
                           const uint8_t *events_a,
                           size_t n_a,
                           const double *times_b,
                           const uint8_t *events_b,
                           size_t n_b,
                           double *statistic,
                           double *p_value);

/**
 * Read a cohort directory.
 *
 * # Safety
 * `dir` must be a NUL-terminated string; `out` must be writable.
 */
enum HgsStatus hgs_cohort_load(const char *dir, struct HgsCohort **out);

/**
 * Synthetic cohort with default settings apart from the given ones.
 *
 * # Safety
 * `out` must be writable.
 */
enum HgsStatus hgs_cohort_generate(size_t n_patients,
                                   uint64_t seed,
                                   double signal_strength,
                                   double censor_rate,
                                   struct HgsCohort **out);

/**
 * Write a cohort directory.
 *
 * # Safety
 * `cohort` must come from this library; `dir` must be NUL-terminated.
 */
enum HgsStatus hgs_cohort_write(const struct HgsCohort *cohort, const char *dir);

/**
 * Number of patients; 0 for a null handle.
 *
 * # Safety
 * `cohort` must be null or come from this library.
 */
size_t hgs_cohort_len(const struct HgsCohort *cohort);

/**
 * Copy survival times and event flags into caller buffers of length `len`.
 *
 * # Safety
 * `cohort` must come from this library; buffers must hold `len` elements.
 */
enum HgsStatus hgs_cohort_labels(const struct HgsCohort *cohort,
                                 double *times,
                                 uint8_t *events,
                                 size_t len);

/**
 * # Safety
 * `cohort` must be null or come from this library, and not be used again.
 */
void hgs_cohort_free(struct HgsCohort *cohort);

/**
 * Load a checkpoint and, when `bank_path` is non-null, its memory bank.
 *
 * # Safety
 * Paths must be NUL-terminated (or null for the bank); `out` must be writable.
 */
enum HgsStatus hgs_model_load(const char *checkpoint_path,
                              const char *bank_path,
                              struct HgsModel **out);

/**
 * # Safety
 * `model` must be null or come from this library, and not be used again.
 */
void hgs_model_free(struct HgsModel *model);

/**
 * Risk score of every patient in `cohort`, in cohort order, with `missing`
 * withheld. Withholding a modality requires a model loaded with a bank.
 *
 * # Safety
 * Handles must come from this library; `risks` must hold `len` elements.
 */
enum HgsStatus hgs_model_predict(const struct HgsModel *model,
                                 const struct HgsCohort *cohort,
                                 enum HgsMissing missing,
                                 double *risks,
                                 size_t len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HGSURV_H */
