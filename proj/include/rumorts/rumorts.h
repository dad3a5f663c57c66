/* C interface to the rumour time-series pipeline.
 *
 * Every fallible call returns an rts_status; on failure rts_last_error()
 * holds a message for the calling thread. Strings returned through char**
 * are owned by the caller and released with rts_string_free(). */
#ifndef RUMORTS_RUMORTS_H
#define RUMORTS_RUMORTS_H

#include <stddef.h>
#include <stdint.h>

#if defined(RUMORTS_BUILDING_LIBRARY)
#define RTS_API __attribute__((visibility("default")))
#else
#define RTS_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum rts_status {
  RTS_OK = 0,
  RTS_ERR_USAGE = 1,
  RTS_ERR_DATA = 2,
  RTS_ERR_TRAINING = 3,
  RTS_ERR_INTERNAL = 4
} rts_status;

typedef struct rts_dataset rts_dataset; /* conversations grouped by event */
typedef struct rts_vectors rts_vectors; /* reaction-count matrix for one interval */
typedef struct rts_config rts_config;   /* run configuration */
typedef struct rts_report rts_report;   /* leave-one-event-out results */

RTS_API const char* rts_version(void);
RTS_API const char* rts_last_error(void);
RTS_API void rts_string_free(char* s);

/* Datasets. events_csv may be NULL to load every event except the default
 * exclusions. */
RTS_API rts_status rts_dataset_load(const char* root, const char* events_csv, rts_dataset** out);
/* spec_json: object with any of the synthetic generator fields; NULL for defaults. */
RTS_API rts_status rts_dataset_synthesize(const char* spec_json, rts_dataset** out);
RTS_API rts_status rts_dataset_write(const rts_dataset* ds, const char* root);
RTS_API rts_status rts_dataset_summary_json(const rts_dataset* ds, char** out);
RTS_API rts_status rts_dataset_inspect(const rts_dataset* ds, char** out);
RTS_API rts_status rts_dataset_stats(const rts_dataset* ds, size_t* n_conversations, size_t* n_events,
                                     uint64_t* hash);
RTS_API void rts_dataset_free(rts_dataset* ds);

/* Time-series vectors. */
RTS_API rts_status rts_vectors_build(const rts_dataset* ds, int64_t interval_seconds, rts_vectors** out);
RTS_API rts_status rts_vectors_load_cache(const char* path, rts_vectors** out);
RTS_API rts_status rts_vectors_save_cache(const rts_vectors* v, const char* path);
/* comment may be NULL; otherwise each line is written as a "# " line. */
RTS_API rts_status rts_vectors_write_csv(const rts_vectors* v, const char* path, const char* comment);
RTS_API rts_status rts_vectors_info(const rts_vectors* v, size_t* n_samples, size_t* seq_len, double* sparsity);
/* *matches = 1 when the cache at path was built from ds with this interval. */
RTS_API rts_status rts_vectors_cache_matches(const char* path, const rts_dataset* ds, int64_t interval_seconds,
                                             int* matches);
RTS_API void rts_vectors_free(rts_vectors* v);

/* Configuration. Keys match the CLI flags without dashes, e.g. "lr",
 * "interval-min", "fit-on-all". */
RTS_API rts_status rts_config_create(rts_config** out);
RTS_API rts_status rts_config_set(rts_config* cfg, const char* key, const char* value);
RTS_API rts_status rts_config_load_file(rts_config* cfg, const char* path);
RTS_API rts_status rts_config_json(const rts_config* cfg, char** out);
RTS_API void rts_config_free(rts_config* cfg);

/* Evaluation. */
RTS_API rts_status rts_evaluate(const rts_vectors* v, const rts_config* cfg, rts_report** out);
RTS_API rts_status rts_report_json(const rts_report* r, char** out);
RTS_API rts_status rts_report_csv(const rts_report* r, char** out);
RTS_API rts_status rts_report_means(const rts_report* r, double* micro_f1, double* macro_f1, size_t* folds_used);
RTS_API void rts_report_free(rts_report* r);

/* Small helpers. */
RTS_API rts_status rts_parse_timestamp(const char* text, int64_t* out);
/* Returns 1, 0, or -1 if votes is NULL, empty, or holds values other than 0/1. */
RTS_API int rts_majority_vote(const int* votes, size_t n);
RTS_API rts_status rts_class_weights(const int* labels, size_t n, double out[2]);

#ifdef __cplusplus
}
#endif

#endif
