/*
 * C interface to the cascaded deraining + detection pipeline. All entry
 * points return a status code; cdrn_last_error() describes the most recent
 * failure on the calling thread. Sessions are opaque and not thread-safe;
 * use one per thread.
 */
#ifndef CDRN_H
#define CDRN_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum cdrn_status {
    CDRN_OK = 0,
    CDRN_ERROR_INVALID_ARGUMENT = 1,
    CDRN_ERROR_IO = 2,
    CDRN_ERROR_CONFIG = 3,
    CDRN_ERROR_PREREQUISITE = 4,
    CDRN_ERROR_RUNTIME = 5
} cdrn_status;

typedef struct cdrn_session cdrn_session;

const char* cdrn_version(void);

/* Thread-local message for the last failing call; empty string otherwise. */
const char* cdrn_last_error(void);

/* config_path may be NULL for the built-in desk-scale defaults. */
cdrn_status cdrn_session_open(const char* config_path, cdrn_session** out);
cdrn_status cdrn_session_open_json(const char* json_text, cdrn_session** out);
void cdrn_session_close(cdrn_session* session);

cdrn_status cdrn_session_set_seed(cdrn_session* session, uint64_t seed);
cdrn_status cdrn_session_set_output_dir(cdrn_session* session, const char* dir);
cdrn_status cdrn_session_set_dataset_dir(cdrn_session* session, const char* dir);

/* Resolved configuration as JSON. Writes up to cap bytes (NUL-terminated
 * when cap > 0) and reports the full length via needed. */
cdrn_status cdrn_session_config_json(cdrn_session* session, char* buf, size_t cap, size_t* needed);

/* Builds the paired dataset under the session's dataset directory. */
cdrn_status cdrn_synth(cdrn_session* session);

/* Runs training stage 1, 2 or 3, or 0 for all three in order. Checkpoints
 * and per-epoch logs land in the output directory. */
cdrn_status cdrn_train(cdrn_session* session, int stage);

/* Evaluates a checkpoint over the dataset's test split and writes
 * report.md / report.csv / metrics.jsonl to the output directory. */
cdrn_status cdrn_eval(cdrn_session* session, const char* checkpoint_path);

/* Derains one PNG and detects on the result; writes <prefix>_derained.png,
 * <prefix>_detections.json and <prefix>_overlay.png. */
cdrn_status cdrn_infer(cdrn_session* session, const char* checkpoint_path, const char* image_path,
                       const char* output_prefix);

/* Runs the finite-difference verification suite. Returns CDRN_OK only when
 * every check passes; a human-readable report is written to the buffer when
 * provided. failed_count may be NULL. */
cdrn_status cdrn_gradcheck(uint64_t seed, char* report_buf, size_t report_cap, int* failed_count);

#ifdef __cplusplus
}
#endif

#endif /* CDRN_H */
