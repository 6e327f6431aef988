#ifndef ASREC_H
#define ASREC_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every call.
 */
typedef enum AsrecStatus {
  ASREC_STATUS_OK = 0,
  ASREC_STATUS_NULL_POINTER = 1,
  ASREC_STATUS_INVALID_UTF8 = 2,
  ASREC_STATUS_INVALID_ARGUMENT = 3,
  ASREC_STATUS_PARSE = 4,
  ASREC_STATUS_LATTICE = 5,
  ASREC_STATUS_SCORER = 6,
  ASREC_STATUS_INTERNAL = 7,
} AsrecStatus;

/**
 * Text normalization flavour.
 */
typedef enum AsrecNormMode {
  /**
   * Lowercase words; punctuation separates words, inner apostrophes stay.
   */
  ASREC_NORM_MODE_EVAL = 0,
  /**
   * ASCII letters and digits only; hyphens split words.
   */
  ASREC_NORM_MODE_STATS = 1,
} AsrecNormMode;

/**
 * Token lattice.
 */
typedef struct AsrecLattice AsrecLattice;

/**
 * Ranked hypothesis list.
 */
typedef struct AsrecNBest AsrecNBest;

/**
 * Correction-model scorer.
 */
typedef struct AsrecScorer AsrecScorer;

/**
 * Decoding knobs. Obtain defaults from [`asrec_config_default`].
 */
typedef struct AsrecConfig {
  /**
   * Weight on the correction-model score, in `[0, 1]`.
   */
  double lambda;
  size_t beam_width;
  /**
   * Hypotheses fed to the scorer context.
   */
  size_t n_input;
  bool length_norm;
} AsrecConfig;

/**
 * Word alignment counts.
 */
typedef struct AsrecCounts {
  size_t cor;
  size_t sub;
  size_t del;
  size_t ins;
  size_t ref_len;
} AsrecCounts;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null when the last
 * call succeeded. Valid until the next call on the same thread.
 */
const char *asrec_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *asrec_version(void);

/**
 * Releases a string returned by this library.
 *
 * # Safety
 * `s` must be null or a pointer obtained from this library that has not
 * been freed.
 */
void asrec_string_free(char *s);

/**
 * Default decoding knobs.
 */
struct AsrecConfig asrec_config_default(void);

/**
 * Normalizes `text` into a newly allocated string.
 *
 * # Safety
 * `text` must be a NUL-terminated string and `out` a writable pointer.
 */
enum AsrecStatus asrec_normalize(const char *text, enum AsrecNormMode mode, char **out);

/**
 * Word alignment of `hyp` against `reference` after eval normalization.
 *
 * # Safety
 * `reference` and `hyp` must be NUL-terminated strings and `out` a
 * writable pointer.
 */
enum AsrecStatus asrec_align(const char *reference, const char *hyp, struct AsrecCounts *out);

/**
 * Relative error-rate reduction in percent.
 *
 * # Safety
 * `out` must be a writable pointer.
 */
enum AsrecStatus asrec_werr(double baseline_wer, double system_wer, double *out);

/**
 * Builds a list from `count` texts and log-scores. The list is re-ranked
 * by descending score.
 *
 * # Safety
 * `texts` and `scores` must point to `count` elements; every text must be
 * a NUL-terminated string. `out` must be a writable pointer.
 */
enum AsrecStatus asrec_nbest_new(const char *const *texts,
                                 const double *scores,
                                 size_t count,
                                 struct AsrecNBest **out);

/**
 * Number of hypotheses in `nbest`, or 0 when null.
 *
 * # Safety
 * `nbest` must be null or a live handle.
 */
size_t asrec_nbest_len(const struct AsrecNBest *nbest);

/**
 * Text of the hypothesis at 1-based `rank`.
 *
 * # Safety
 * `nbest` must be a live handle and `out` a writable pointer.
 */
enum AsrecStatus asrec_nbest_text(const struct AsrecNBest *nbest, size_t rank, char **out);

/**
 * Releases an N-best handle.
 *
 * # Safety
 * `nbest` must be null or a live handle that is not used afterwards.
 */
void asrec_nbest_free(struct AsrecNBest *nbest);

/**
 * Parses a lattice from its JSON form.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` a writable pointer.
 */
enum AsrecStatus asrec_lattice_from_json(const char *json, struct AsrecLattice **out);

/**
 * Lattice whose paths are exactly the texts of `nbest`.
 *
 * # Safety
 * `nbest` must be a live handle and `out` a writable pointer.
 */
enum AsrecStatus asrec_lattice_from_nbest(const struct AsrecNBest *nbest,
                                          struct AsrecLattice **out);

/**
 * Serializes a lattice to JSON.
 *
 * # Safety
 * `lattice` must be a live handle and `out` a writable pointer.
 */
enum AsrecStatus asrec_lattice_to_json(const struct AsrecLattice *lattice, char **out);

/**
 * Number of start-to-end paths, saturating at `UINT64_MAX`.
 *
 * # Safety
 * `lattice` must be null or a live handle.
 */
uint64_t asrec_lattice_num_paths(const struct AsrecLattice *lattice);

/**
 * Releases a lattice handle.
 *
 * # Safety
 * `lattice` must be null or a live handle that is not used afterwards.
 */
void asrec_lattice_free(struct AsrecLattice *lattice);

/**
 * Built-in character bigram scorer. `marker` is null or empty for whole
 * words, otherwise `continuation:@@` or `word-start:▁`.
 *
 * # Safety
 * `marker` must be null or a NUL-terminated string and `out` a writable
 * pointer.
 */
enum AsrecStatus asrec_scorer_new_toy(const char *marker, struct AsrecScorer **out);

/**
 * Client for a remote scoring service at `base_url`. `retries` counts
 * attempts after the first.
 *
 * # Safety
 * `base_url` must be a NUL-terminated string, `marker` null or a
 * NUL-terminated string, and `out` a writable pointer.
 */
enum AsrecStatus asrec_scorer_new_http(const char *base_url,
                                       const char *marker,
                                       uint32_t retries,
                                       uint64_t timeout_ms,
                                       size_t max_in_flight,
                                       uint64_t seed,
                                       struct AsrecScorer **out);

/**
 * Releases a scorer handle.
 *
 * # Safety
 * `scorer` must be null or a live handle that is not used afterwards.
 */
void asrec_scorer_free(struct AsrecScorer *scorer);

/**
 * Picks the best of the top `n_input` hypotheses under the interpolated
 * score, with `n_input` capped at the list length. Writes the 1-based rank
 * and the score.
 *
 * # Safety
 * `nbest`, `scorer` and `config` must be live; `rank_out` and `score_out`
 * must be writable pointers.
 */
enum AsrecStatus asrec_select_constrained(const struct AsrecNBest *nbest,
                                          const struct AsrecScorer *scorer,
                                          const struct AsrecConfig *config,
                                          size_t *rank_out,
                                          double *score_out);

/**
 * The top-`n` hypothesis nearest to `output` in word edit distance.
 * Writes its 1-based rank and the distance.
 *
 * # Safety
 * `output` must be a NUL-terminated string, `nbest` live, and `rank_out`
 * and `distance_out` writable pointers.
 */
enum AsrecStatus asrec_closest_map(const char *output,
                                   const struct AsrecNBest *nbest,
                                   size_t n,
                                   size_t *rank_out,
                                   size_t *distance_out);

/**
 * Beam search over `lattice`. The scorer context is built from the top
 * `n_input` hypotheses of `context`, or is empty when `context` is null.
 * Writes the decoded text in the scorer's marker convention.
 *
 * # Safety
 * `lattice`, `scorer` and `config` must be live; `context` null or live;
 * `text_out` and `score_out` writable pointers.
 */
enum AsrecStatus asrec_lattice_decode(const struct AsrecLattice *lattice,
                                      const struct AsrecScorer *scorer,
                                      const struct AsrecNBest *context,
                                      const struct AsrecConfig *config,
                                      char **text_out,
                                      double *score_out);

/**
 * Word-level voting over `count` system outputs with per-system weights.
 *
 * # Safety
 * `texts` and `weights` must point to `count` elements; every text must be
 * a NUL-terminated string. `out` must be a writable pointer.
 */
enum AsrecStatus asrec_rover(const char *const *texts,
                             const double *weights,
                             size_t count,
                             char **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ASREC_H */
