#ifndef PLOTPATH_PLOTPATH_H
#define PLOTPATH_PLOTPATH_H

/*
 * plotpath C API.
 *
 * Handles are opaque. Every function returning pp_status leaves a message for
 * the calling thread in pp_last_error() when it fails. Strings handed out by
 * the library are owned by the caller and released with pp_string_free().
 */

#include <stddef.h>

#if defined(_WIN32)
#define PP_API __declspec(dllexport)
#else
#define PP_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum pp_status {
    PP_OK = 0,
    PP_E_INVALID_ARGUMENT = 1,
    PP_E_CONFIG = 2,
    PP_E_PROVIDER = 3,
    PP_E_CASSETTE_MISS = 4,
    PP_E_NO_RULE = 5,
    PP_E_PARSE_FAILURE = 6,
    PP_E_EMPTY_CODE = 7,
    PP_E_TRANSPORT_UNAVAILABLE = 8,
    PP_E_STORAGE_UNAVAILABLE = 9,
    PP_E_CORRUPT_RECORD = 10,
    PP_E_SUITE = 11,
    PP_E_SCORING_FAILURE = 12,
    PP_E_BUDGET_EXCEEDED = 13,
    /* the run finished with status failed; the record is still returned */
    PP_E_RUN_FAILED = 14,
    PP_E_INTERNAL = 99
} pp_status;

typedef struct pp_engine pp_engine;
typedef struct pp_record pp_record;

PP_API const char* pp_version(void);
PP_API const char* pp_status_string(pp_status status);
/* Message of the last failure on this thread, "" if none. */
PP_API const char* pp_last_error(void);
PP_API void pp_string_free(char* s);

/*
 * Engine configuration, all keys optional:
 *   {
 *     "pipeline":   {"k", "mode", "gen_temperature", "judge_temperature",
 *                    "exec_timeout", "max_error_chars", "parallelism",
 *                    "run_budget", "models": {"mpa","code","fb","syn","judge","baseline"}},
 *     "backend":    {"mode": "live"|"record"|"replay"|"scripted",
 *                    "cassette": path, "rules": path, "inner": "live"|"scripted"},
 *     "transport":  {"kind": "process"|"stub", "runner": [argv...]},
 *     "retry":      {"max_attempts", "base_delay_ms"},
 *     "prompts_dir": path,
 *     "work_dir":   path,
 *     "bench":      {"parallelism", "correctness_check"}
 *   }
 * Writes a JSON array of problems to *errors_json (empty array when usable).
 */
PP_API pp_status pp_validate_config(const char* config_json, char** errors_json);

PP_API pp_status pp_engine_create(const char* config_json, pp_engine** out);
PP_API void pp_engine_destroy(pp_engine* engine);

/*
 * Runs one task {"task_id","query","dataset_description","data_files":[{"name","path"}]}.
 * When out_dir is non-NULL the record is persisted there. *out receives the
 * record for PP_OK and PP_E_RUN_FAILED.
 */
PP_API pp_status pp_engine_run(pp_engine* engine, const char* task_json, const char* out_dir, pp_record** out);

/* Runs a suite file; writes the scorecard JSON to *scorecard_json. */
PP_API pp_status pp_engine_bench(pp_engine* engine, const char* suite_path, const char* out_dir, int resume,
                                 const char* strategy_label, char** scorecard_json);

/* One suite run per k; writes the sweep rows as a JSON array. */
PP_API pp_status pp_engine_sweep(pp_engine* engine, const char* suite_path, const int* k_values, size_t k_count,
                                 const char* out_dir, int resume, char** rows_json);

PP_API pp_status pp_record_load(const char* dir, pp_record** out);
PP_API void pp_record_destroy(pp_record* record);
PP_API int pp_record_final_ok(const pp_record* record);
/* Canonical JSON (timings and timestamps excluded). */
PP_API pp_status pp_record_to_json(const pp_record* record, char** json);
/* Human-readable summary with the ledger and per-stage timings. */
PP_API pp_status pp_record_summary(const pp_record* record, char** text);

/* {"entries": n, "roles": {"mpa": n, ...}} */
PP_API pp_status pp_cassette_info(const char* path, char** info_json);
/* Checks every line parses and fingerprints are unique. */
PP_API pp_status pp_cassette_verify(const char* path, char** report_json);

#ifdef __cplusplus
}
#endif

#endif
