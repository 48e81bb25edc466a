#ifndef LTDPS_H
#define LTDPS_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result code of every fallible call.
typedef enum LtdpsStatus {
  LTDPS_STATUS_OK = 0,
  LTDPS_STATUS_NULL_POINTER = 1,
  LTDPS_STATUS_INVALID_ARGUMENT = 2,
  LTDPS_STATUS_OUT_OF_BOUNDS = 3,
  LTDPS_STATUS_PARSE = 4,
  LTDPS_STATUS_BUFFER_TOO_SMALL = 5,
  LTDPS_STATUS_EMPTY_CANDIDATES = 6,
  LTDPS_STATUS_IO = 7,
  LTDPS_STATUS_RUNTIME = 8,
  LTDPS_STATUS_PANIC = 9,
} LtdpsStatus;

// Block cipher used for MIC computation.
typedef enum LtdpsCipher {
  LTDPS_CIPHER_SUBSTITUTION = 0,
  LTDPS_CIPHER_XOR = 1,
} LtdpsCipher;

// AP and region lattice. Opaque.
typedef struct LtdpsGrid LtdpsGrid;

// Pattern database bound to a grid. Opaque.
typedef struct LtdpsPredictor LtdpsPredictor;

// Mean accuracies, in percent, of one seeded experiment.
typedef struct LtdpsAccuracy {
  double ltdps;
  double tm;
  double ip;
} LtdpsAccuracy;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Static description of a status code. Never null.
const char *ltdps_status_str(enum LtdpsStatus status);

// Message of the latest failure on this thread; empty if none. Valid until
// the next failing call on the same thread.
const char *ltdps_last_error(void);

// # Safety
// `out` must be valid for one pointer write.
enum LtdpsStatus ltdps_grid_new(size_t ap_rows, size_t ap_cols, struct LtdpsGrid **out);

// # Safety
// `grid` must come from [`ltdps_grid_new`] and not be used afterwards.
// Null is ignored.
void ltdps_grid_free(struct LtdpsGrid *grid);

// # Safety
// `grid` must be a live handle or null (which yields 0).
size_t ltdps_grid_ap_count(const struct LtdpsGrid *grid);

// # Safety
// `grid` must be a live handle or null (which yields 0).
size_t ltdps_grid_region_count(const struct LtdpsGrid *grid);

// APs bordering `region`, ascending.
//
// # Safety
// `grid` must be a live handle; `out` must hold `cap` elements.
enum LtdpsStatus ltdps_grid_region_aps(const struct LtdpsGrid *grid,
                                       uint16_t region,
                                       uint16_t *out,
                                       size_t cap,
                                       size_t *out_len);

// Candidate set `S` for a node at `current` entering `next_region`.
//
// # Safety
// `grid` must be a live handle; `out` must hold `cap` elements.
enum LtdpsStatus ltdps_grid_candidates(const struct LtdpsGrid *grid,
                                       uint16_t current,
                                       uint16_t next_region,
                                       uint16_t *out,
                                       size_t cap,
                                       size_t *out_len);

// Empty predictor over a copy of `grid`.
//
// # Safety
// `grid` must be a live handle; `out` must be valid for one pointer write.
enum LtdpsStatus ltdps_predictor_new(const struct LtdpsGrid *grid, struct LtdpsPredictor **out);

// # Safety
// `predictor` must come from [`ltdps_predictor_new`] and not be used
// afterwards. Null is ignored.
void ltdps_predictor_free(struct LtdpsPredictor *predictor);

// Weight of indirect counts when three or more APs compete.
//
// # Safety
// `predictor` must be a live handle.
enum LtdpsStatus ltdps_predictor_set_corruption_factor(struct LtdpsPredictor *predictor,
                                                       double factor);

// Records one path written as `ap(region),ap(region),...`.
//
// # Safety
// `predictor` must be a live handle and `path` a NUL-terminated string.
enum LtdpsStatus ltdps_predictor_add_path(struct LtdpsPredictor *predictor, const char *path);

// Records every path of a history file, one per line. On error nothing
// is recorded.
//
// # Safety
// `predictor` must be a live handle and `file` a NUL-terminated path.
enum LtdpsStatus ltdps_predictor_load_history(struct LtdpsPredictor *predictor, const char *file);

// # Safety
// `predictor` must be a live handle or null (which yields 0).
uint64_t ltdps_predictor_path_count(const struct LtdpsPredictor *predictor);

// Predicts the AP a node at `current` attaches to on entering
// `next_region`. `out_score` may be null.
//
// # Safety
// `predictor` must be a live handle; `out_ap` must be valid for a write.
enum LtdpsStatus ltdps_predictor_predict(const struct LtdpsPredictor *predictor,
                                         uint16_t current,
                                         uint16_t next_region,
                                         uint16_t *out_ap,
                                         double *out_score);

// CBC residue of `message` under `key`; writes one cipher block.
//
// # Safety
// `key` must hold `key_len` bytes, `message` `message_len` bytes (it may
// be null when the length is 0) and `out` `cap` bytes.
enum LtdpsStatus ltdps_compute_mic(enum LtdpsCipher cipher,
                                   const uint8_t *key,
                                   size_t key_len,
                                   const uint8_t *message,
                                   size_t message_len,
                                   uint8_t *out,
                                   size_t cap,
                                   size_t *out_len);

// Runs one seeded experiment with the default path parameters and all
// three schemes.
//
// # Safety
// `out` must be valid for one write.
enum LtdpsStatus ltdps_run_experiment(uint64_t seed,
                                      size_t history_size,
                                      size_t test_paths,
                                      struct LtdpsAccuracy *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LTDPS_H */
