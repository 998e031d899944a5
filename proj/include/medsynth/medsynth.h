/* medsynth: synthetic biomedical NER/RE data pipeline, C interface.
 *
 * Every function returns a medsynth_status. On failure, medsynth_last_error()
 * returns "<ErrorClass>: <message>" for the calling thread until its next
 * call into the library. Strings returned through char** out-parameters are
 * heap-allocated and must be released with medsynth_string_free().
 */
#ifndef MEDSYNTH_H
#define MEDSYNTH_H

#ifdef __cplusplus
extern "C" {
#endif

#if defined(__GNUC__)
#define MEDSYNTH_API __attribute__((visibility("default")))
#else
#define MEDSYNTH_API
#endif

typedef enum medsynth_status {
  MEDSYNTH_OK = 0,
  MEDSYNTH_E_INVALID_ARGUMENT = 1,
  MEDSYNTH_E_IO = 2,
  MEDSYNTH_E_CONFIG = 3,
  MEDSYNTH_E_MALFORMED_LINE = 4,
  MEDSYNTH_E_UNKNOWN_TAG = 5,
  MEDSYNTH_E_EMPTY_INPUT = 6,
  MEDSYNTH_E_ORPHAN_INSIDE_TAG = 7,
  MEDSYNTH_E_OVERLAPPING_SPANS = 8,
  MEDSYNTH_E_SPAN_OUT_OF_RANGE = 9,
  MEDSYNTH_E_MISSING_PLACEHOLDER = 10,
  MEDSYNTH_E_BAD_LABEL = 11,
  MEDSYNTH_E_RATE_LIMITED = 12,
  MEDSYNTH_E_TRANSPORT = 13,
  MEDSYNTH_E_PROVIDER = 14,
  MEDSYNTH_E_MISSING_API_KEY = 15,
  MEDSYNTH_E_UNBOUND_PLACEHOLDER = 16,
  MEDSYNTH_E_UNKNOWN_PLACEHOLDER = 17,
  MEDSYNTH_E_CANDIDATE_COUNT_MISMATCH = 18,
  MEDSYNTH_E_UNPARSEABLE_REPLY = 19,
  MEDSYNTH_E_INVALID_SELECTION = 20,
  MEDSYNTH_E_ROUND_NOT_READY = 21,
  MEDSYNTH_E_EMPTY_REPLY = 22,
  MEDSYNTH_E_POOL_TOO_SMALL = 23,
  MEDSYNTH_E_TASK_MISMATCH = 24,
  MEDSYNTH_E_SHAPE_MISMATCH = 25,
  MEDSYNTH_E_LENGTH_MISMATCH = 26,
  MEDSYNTH_E_EMPTY_CORPUS = 27,
  MEDSYNTH_E_DIMENSION_MISMATCH = 28,
  MEDSYNTH_E_DEGENERATE_INPUT = 29,
  MEDSYNTH_E_RUN_LOCKED = 30,
  MEDSYNTH_E_CONFLICT = 31,
  MEDSYNTH_E_NOT_FOUND = 32,
  MEDSYNTH_E_INTERNAL = 33
} medsynth_status;

typedef struct medsynth_session medsynth_session;
typedef struct medsynth_review_server medsynth_review_server;

MEDSYNTH_API const char* medsynth_version(void);
MEDSYNTH_API const char* medsynth_last_error(void);
/* Error class name, e.g. "MalformedLine"; "Ok" for MEDSYNTH_OK. */
MEDSYNTH_API const char* medsynth_status_name(medsynth_status status);
MEDSYNTH_API void medsynth_string_free(char* s);

/* Sessions hold a parsed run configuration plus overrides. */
MEDSYNTH_API medsynth_status medsynth_session_open(const char* config_path, medsynth_session** out);
/* base_dir resolves relative paths in the text; NULL means ".". */
MEDSYNTH_API medsynth_status medsynth_session_open_text(const char* config_text, const char* base_dir,
                                                        medsynth_session** out);
MEDSYNTH_API void medsynth_session_close(medsynth_session* session);
/* key is "section.key". */
MEDSYNTH_API medsynth_status medsynth_session_set(medsynth_session* session, const char* key, const char* value);
MEDSYNTH_API medsynth_status medsynth_session_config_hash(const medsynth_session* session, char** out_hex);

/* Subcommands. Each writes a run directory and returns a JSON summary. */
MEDSYNTH_API medsynth_status medsynth_ingest(medsynth_session* session, char** out_json);
MEDSYNTH_API medsynth_status medsynth_gen(medsynth_session* session, char** out_json);
MEDSYNTH_API medsynth_status medsynth_bench(medsynth_session* session, char** out_json);
MEDSYNTH_API medsynth_status medsynth_score(medsynth_session* session, const char* predictions_path, char** out_json);
MEDSYNTH_API medsynth_status medsynth_curve(medsynth_session* session, char** out_json);
/* Embedding paths may both be NULL (hashed bag-of-words vectors are used). */
MEDSYNTH_API medsynth_status medsynth_shift(medsynth_session* session, const char* synthetic_path,
                                            const char* original_embeddings, const char* synthetic_embeddings,
                                            char** out_json);
/* selection <= 0 reports or opens the session without selecting. */
MEDSYNTH_API medsynth_status medsynth_forge(medsynth_session* session, int selection, const char* rationale,
                                            char** out_json);

/* Review server on 127.0.0.1. gen_run_dir, scatter_path, static_dir may be NULL. */
MEDSYNTH_API medsynth_status medsynth_review_start(medsynth_session* session, const char* gen_run_dir,
                                                   const char* scatter_path, const char* static_dir,
                                                   medsynth_review_server** out);
MEDSYNTH_API int medsynth_review_port(const medsynth_review_server* server);
MEDSYNTH_API void medsynth_review_stop(medsynth_review_server* server);

/* Utilities. */
/* JSON array of token strings. */
MEDSYNTH_API medsynth_status medsynth_tokenize(const char* text, char** out_json);
/* JSON array of IOB tags marking every occurrence of surface in sentence. */
MEDSYNTH_API medsynth_status medsynth_annotate(const char* sentence, const char* surface, const char* entity_type,
                                               char** out_json);
/* request_json: {"model", "temperature", "max_tokens", "messages": [{"role", "content"}]}. */
MEDSYNTH_API medsynth_status medsynth_cache_key(const char* request_json, char** out_hex);

#ifdef __cplusplus
}
#endif

#endif /* MEDSYNTH_H */
