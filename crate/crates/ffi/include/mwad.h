#ifndef MWAD_H
#define MWAD_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result of every call.
typedef enum MwadStatus {
  MWAD_STATUS_OK = 0,
  MWAD_STATUS_NULL_POINTER = 1,
  MWAD_STATUS_INVALID_ARGUMENT = 2,
  MWAD_STATUS_IO = 3,
  MWAD_STATUS_FORMAT = 4,
  MWAD_STATUS_INCOMPATIBLE = 5,
  MWAD_STATUS_DIMENSION = 6,
  MWAD_STATUS_INSUFFICIENT_LENGTH = 7,
  MWAD_STATUS_BUFFER_TOO_SMALL = 8,
  MWAD_STATUS_RUNTIME = 9,
  MWAD_STATUS_PANIC = 10,
} MwadStatus;

// A loaded checkpoint ready to score raw rows.
typedef struct MwadDetector MwadDetector;

typedef struct MwadThresholdRange {
  double min;
  double max;
  double mean;
  double slide_step;
  double lower;
  double upper;
  size_t candidate_count;
  // 1 when every score is equal.
  uint8_t degenerate;
} MwadThresholdRange;

typedef struct MwadMetrics {
  double accuracy;
  double precision;
  double recall;
  double f1;
  uint64_t tp;
  uint64_t fp;
  uint64_t tn;
  uint64_t fn_;
} MwadMetrics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *mwad_version(void);

// Message of the last failed call on this thread; empty after a success.
// Valid until the next call on the same thread.
const char *mwad_last_error_message(void);

// Loads a checkpoint file into a new detector.
//
// # Safety
// `path` must be a NUL-terminated string and `out` a valid pointer.
enum MwadStatus mwad_detector_load(const char *path, struct MwadDetector **out);

// Releases a detector. Null is ignored.
//
// # Safety
// `det` must come from [`mwad_detector_load`] and not be used afterwards.
void mwad_detector_free(struct MwadDetector *det);

// Number of feature columns the detector expects.
//
// # Safety
// Pointers must be valid.
enum MwadStatus mwad_detector_feature_count(const struct MwadDetector *det, size_t *out);

// Rows at the start of every scored block that receive no score.
//
// # Safety
// Pointers must be valid.
enum MwadStatus mwad_detector_unscored_prefix(const struct MwadDetector *det, size_t *out);

// Scores raw (unnormalized) rows given row-major as `n_rows × n_cols`.
// Writes `n_rows − prefix` scores into `scores` (capacity `scores_len`);
// score `i` belongs to row `prefix + i`. `written` receives the count, or
// the required capacity on `BufferTooSmall`.
//
// # Safety
// `rows` must hold `n_rows·n_cols` values and `scores` `scores_len`.
enum MwadStatus mwad_detector_score(const struct MwadDetector *det,
                                    const double *rows,
                                    size_t n_rows,
                                    size_t n_cols,
                                    double *scores,
                                    size_t scores_len,
                                    size_t *written);

// Threshold search range of a score vector.
//
// # Safety
// `scores` must hold `len` values; `out` must be valid.
enum MwadStatus mwad_threshold_range(const double *scores,
                                     size_t len,
                                     struct MwadThresholdRange *out);

// `out[i] = 1` when `scores[i] > threshold`, else 0.
//
// # Safety
// `scores` and `out` must each hold `len` elements.
enum MwadStatus mwad_classify(const double *scores, size_t len, double threshold, uint8_t *out);

// Confusion counts and metrics of 0/1 predictions against 0/1 labels.
//
// # Safety
// `predicted` and `actual` must each hold `len` elements; `out` must be valid.
enum MwadStatus mwad_metrics(const uint8_t *predicted,
                             const uint8_t *actual,
                             size_t len,
                             struct MwadMetrics *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MWAD_H */
