#ifndef FEDFRESH_H
#define FEDFRESH_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum FfStatus {
  FF_STATUS_OK = 0,
  FF_STATUS_NULL_POINTER = 1,
  FF_STATUS_INVALID_INPUT = 2,
  FF_STATUS_INVALID_CONFIG = 3,
  FF_STATUS_NON_FINITE = 4,
  FF_STATUS_IO = 5,
  FF_STATUS_MISSING_ARTIFACTS = 6,
  /**
   * The quantity is mathematically undefined for these inputs.
   */
  FF_STATUS_UNDEFINED = 7,
  FF_STATUS_BUFFER_TOO_SMALL = 8,
  FF_STATUS_PANIC = 9,
} FfStatus;

/**
 * Opaque model parameters (`V x F` weights followed by `V` biases).
 */
typedef struct FfModel FfModel;

/**
 * Substitution, insertion and deletion counts of one alignment.
 */
typedef struct FfWerBreakdown {
  size_t substitutions;
  size_t insertions;
  size_t deletions;
  size_t ref_tokens;
  double wer;
} FfWerBreakdown;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *ff_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *ff_version(void);

/**
 * Releases a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must come from this library and not have been freed.
 */
void ff_string_free(char *s);

/**
 * All-zero model of shape `vocab x dim`.
 *
 * # Safety
 * `out` must be valid for a pointer write.
 */
enum FfStatus ff_model_zeros(size_t vocab, size_t dim, struct FfModel **out);

/**
 * Model from `len == vocab * dim + vocab` values.
 *
 * # Safety
 * `values` must point to `len` readable doubles; `out` must be writable.
 */
enum FfStatus ff_model_from_values(size_t vocab,
                                   size_t dim,
                                   const double *values,
                                   size_t len,
                                   struct FfModel **out);

/**
 * Reads a checkpoint file.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum FfStatus ff_model_load(const char *path, struct FfModel **out);

/**
 * Writes a checkpoint file.
 *
 * # Safety
 * `model` must be a live handle and `path` a NUL-terminated string.
 */
enum FfStatus ff_model_save(const struct FfModel *model, const char *path);

/**
 * Releases a model handle. Null is ignored.
 *
 * # Safety
 * `model` must come from this library and not have been freed.
 */
void ff_model_free(struct FfModel *model);

/**
 * Vocabulary size, 0 for null.
 *
 * # Safety
 * `model` must be null or a live handle.
 */
size_t ff_model_vocab(const struct FfModel *model);

/**
 * Feature dimension, 0 for null.
 *
 * # Safety
 * `model` must be null or a live handle.
 */
size_t ff_model_dim(const struct FfModel *model);

/**
 * Number of parameters, 0 for null.
 *
 * # Safety
 * `model` must be null or a live handle.
 */
size_t ff_model_len(const struct FfModel *model);

/**
 * Copies the parameters into `out`, which must hold `ff_model_len` doubles.
 *
 * # Safety
 * `model` must be a live handle and `out` writable for `len` doubles.
 */
enum FfStatus ff_model_values(const struct FfModel *model, double *out, size_t len);

/**
 * `alpha * theta_0 + (1 - alpha) * theta_t` as a new handle.
 *
 * # Safety
 * Both models must be live handles; `out` must be writable.
 */
enum FfStatus ff_average_checkpoints(const struct FfModel *theta_0,
                                     const struct FfModel *theta_t,
                                     double alpha,
                                     struct FfModel **out);

/**
 * N-best decode of one utterance.
 *
 * `frames` is row-major `n_frames x dim`. On success `out_words` holds
 * `out_count` hypotheses of `n_frames` word ids each, best first, and
 * `out_log_probs` their sequence log-probabilities. Buffers must hold `n`
 * hypotheses.
 *
 * # Safety
 * `frames` must hold `n_frames * dim` doubles, `out_words` room for
 * `n * n_frames` ids, `out_log_probs` room for `n` doubles.
 */
enum FfStatus ff_decode_nbest(const struct FfModel *model,
                              const double *frames,
                              size_t n_frames,
                              size_t n,
                              size_t beam,
                              size_t *out_words,
                              double *out_log_probs,
                              size_t *out_count);

/**
 * Levenshtein alignment counts of `hyp` against a non-empty `reference`.
 *
 * # Safety
 * The id arrays must hold the given lengths; `out` must be writable.
 */
enum FfStatus ff_edit_distance(const size_t *reference,
                               size_t ref_len,
                               const size_t *hyp,
                               size_t hyp_len,
                               struct FfWerBreakdown *out);

/**
 * Share of baseline errors on a word that the new model fixes.
 * Returns `Undefined` when the baseline was already perfect.
 *
 * # Safety
 * `out` must be writable.
 */
enum FfStatus ff_error_correction_percent(double acc_base, double acc_exp, double *out);

/**
 * JSON config of a named preset; free the result with [`ff_string_free`].
 *
 * # Safety
 * `name` must be a NUL-terminated string; `out` must be writable.
 */
enum FfStatus ff_preset_json(const char *name, uint64_t seed, char **out);

/**
 * Runs a scenario given as JSON and writes its artifacts under `out_dir`.
 *
 * # Safety
 * Both arguments must be NUL-terminated strings.
 */
enum FfStatus ff_run_scenario(const char *config_json, const char *out_dir);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FEDFRESH_H */
