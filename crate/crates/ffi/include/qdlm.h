#ifndef QDLM_H
#define QDLM_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum QdlmStatus {
  QDLM_STATUS_OK = 0,
  QDLM_STATUS_NULL_POINTER = 1,
  QDLM_STATUS_INVALID_UTF8 = 2,
  QDLM_STATUS_IO = 3,
  QDLM_STATUS_PARSE = 4,
  QDLM_STATUS_MODEL = 5,
  QDLM_STATUS_INVALID_ARGUMENT = 6,
  QDLM_STATUS_PANIC = 7,
} QdlmStatus;

/**
 * A loaded model bundle plus the lexicon new sessions match against.
 */
typedef struct QdlmModel QdlmModel;

/**
 * One conversation.
 */
typedef struct QdlmSession QdlmSession;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread. Valid until the next
 * call on the same thread; never null.
 */
const char *qdlm_last_error_message(void);

/**
 * Library version as a static string.
 */
const char *qdlm_version(void);

/**
 * # Safety
 * `s` must come from this library and not have been freed.
 */
void qdlm_string_free(char *s);

/**
 * Load a model bundle from a JSON file.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum QdlmStatus qdlm_model_load(const char *path, struct QdlmModel **out);

/**
 * # Safety
 * `model` must come from [`qdlm_model_load`] and not have been freed.
 * Sessions created from it stay valid.
 */
void qdlm_model_free(struct QdlmModel *model);

/**
 * Add the entities of a knowledge-base file to the lexicon used by
 * sessions created afterwards.
 *
 * # Safety
 * `model` must be a live handle; `kb_path` a NUL-terminated string.
 */
enum QdlmStatus qdlm_model_load_kb(struct QdlmModel *model, const char *kb_path);

/**
 * Number of utterance clusters in the model.
 *
 * # Safety
 * `model` must be a live handle.
 */
enum QdlmStatus qdlm_model_cluster_count(const struct QdlmModel *model, size_t *out);

/**
 * # Safety
 * `model` must be a live handle; `out` writable.
 */
enum QdlmStatus qdlm_session_new(const struct QdlmModel *model, struct QdlmSession **out);

/**
 * # Safety
 * `session` must come from [`qdlm_session_new`] and not have been freed.
 */
void qdlm_session_free(struct QdlmSession *session);

/**
 * Feed a user turn; `<SILENCE>` marks an empty one.
 *
 * # Safety
 * `session` must be a live handle; `utterance` a NUL-terminated string.
 */
enum QdlmStatus qdlm_session_user(struct QdlmSession *session, const char *utterance);

/**
 * Feed a system turn that was actually said.
 *
 * # Safety
 * `session` must be a live handle; `utterance` a NUL-terminated string.
 */
enum QdlmStatus qdlm_session_system(struct QdlmSession *session, const char *utterance);

/**
 * Feed api_call results as `<restaurant> <property> <value>` lines.
 *
 * # Safety
 * `session` must be a live handle; `lines` a NUL-terminated string.
 */
enum QdlmStatus qdlm_session_results(struct QdlmSession *session, const char *lines);

/**
 * Rank `n` candidates for the next system turn without changing the
 * session. `out_score` may be null.
 *
 * # Safety
 * `candidates` must point to `n` NUL-terminated strings.
 */
enum QdlmStatus qdlm_session_select(const struct QdlmSession *session,
                                    const char *const *candidates,
                                    size_t n,
                                    size_t *out_index,
                                    double *out_score);

/**
 * Like [`qdlm_session_select`], then records the chosen candidate as the
 * system turn.
 *
 * # Safety
 * `candidates` must point to `n` NUL-terminated strings.
 */
enum QdlmStatus qdlm_session_respond(struct QdlmSession *session,
                                     const char *const *candidates,
                                     size_t n,
                                     size_t *out_index,
                                     double *out_score);

/**
 * The api_call the current state implies.
 *
 * # Safety
 * `session` must be a live handle; `out` writable. Free the result with
 * [`qdlm_string_free`].
 */
enum QdlmStatus qdlm_session_api_call(const struct QdlmSession *session, char **out);

/**
 * Filled slots as a JSON object.
 *
 * # Safety
 * `session` must be a live handle; `out` writable. Free the result with
 * [`qdlm_string_free`].
 */
enum QdlmStatus qdlm_session_state_json(const struct QdlmSession *session, char **out);

/**
 * Rank the candidates of one JSON evaluation record from its context.
 *
 * # Safety
 * `model` must be a live handle; `record_json` a NUL-terminated string.
 * `out_score` may be null.
 */
enum QdlmStatus qdlm_predict_record(const struct QdlmModel *model,
                                    const char *record_json,
                                    size_t *out_index,
                                    double *out_score);

/**
 * Word-level edit distance between two utterances.
 *
 * # Safety
 * `a` and `b` must be NUL-terminated strings; `out` writable.
 */
enum QdlmStatus qdlm_word_levenshtein(const char *a, const char *b, size_t *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* QDLM_H */
