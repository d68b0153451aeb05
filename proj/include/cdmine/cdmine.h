#ifndef CDMINE_CDMINE_H
#define CDMINE_CDMINE_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#if defined(CDMINE_BUILDING_LIBRARY)
#define CDM_API __declspec(dllexport)
#else
#define CDM_API __declspec(dllimport)
#endif
#else
#define CDM_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Status codes. Every fallible call returns one; CDM_OK is zero. */
typedef enum cdm_status {
  CDM_OK = 0,
  CDM_E_INVALID_ARGUMENT = 1,
  CDM_E_INPUT = 2,
  CDM_E_SCHEMA = 3,
  CDM_E_ROW = 4,
  CDM_E_CONFIG = 5,
  CDM_E_CONTRACT = 6,
  CDM_E_DEGENERATE_RANGE = 7,
  CDM_E_BINNING = 8,
  CDM_E_TRAINING = 9,
  CDM_E_PREDICTION = 10,
  CDM_E_CONTEXT = 11,
  CDM_E_STATE = 12,
  CDM_E_SYNC = 13,
  CDM_E_RUN = 14,
  CDM_E_METRIC = 15,
  CDM_E_IO = 16,
  CDM_E_INTERNAL = 17
} cdm_status;

typedef enum cdm_log_level { CDM_LOG_INFO = 0, CDM_LOG_WARNING = 1 } cdm_log_level;
typedef void (*cdm_log_fn)(void* user, int level, const char* message);

typedef struct cdm_context cdm_context;
typedef struct cdm_model cdm_model;
typedef struct cdm_state cdm_state;

typedef struct cdm_report_row {
  int batch;
  double accuracy;
  double precision;
  double recall;
  double f_score;
  double offline_seconds;
  double online_seconds;
} cdm_report_row;

typedef struct cdm_risk_record {
  int64_t account;
  double r_offline;
  double last_r_total;
  int last_batch;
  int64_t last_ordinal;
} cdm_risk_record;

CDM_API const char* cdm_version(void);
/* Symbolic name of a status code, e.g. "config". */
CDM_API const char* cdm_status_name(int status);
/* Message of the last failed call on this thread; "" when none. */
CDM_API const char* cdm_last_error(void);

/* Context: configuration plus the commands. */
CDM_API int cdm_context_create(cdm_context** out);
CDM_API void cdm_context_destroy(cdm_context* ctx);
/* Loads a JSON config file; relative paths resolve against its directory. */
CDM_API int cdm_context_load_config(cdm_context* ctx, const char* path);
/* Dotted-key override, e.g. ("trees.n_trees", "50"). Applied on top of the
   loaded config and kept across later loads. */
CDM_API int cdm_context_set(cdm_context* ctx, const char* key, const char* value);
CDM_API void cdm_context_set_log(cdm_context* ctx, cdm_log_fn fn, void* user);
/* Effective configuration as JSON; the buffer lives until the next call on ctx. */
CDM_API int cdm_context_dump_config(cdm_context* ctx, const char** out);

CDM_API int cdm_synth(cdm_context* ctx);
CDM_API int cdm_decompose(cdm_context* ctx);
CDM_API int cdm_train(cdm_context* ctx);
/* rows/capacity may be NULL/0; *count receives the number of batches. */
CDM_API int cdm_run(cdm_context* ctx, cdm_report_row* rows, size_t capacity, size_t* count);
CDM_API int cdm_bench(cdm_context* ctx, double* slope, double* intercept, double* r2);

/* Trained models. */
CDM_API int cdm_model_load(const char* path, cdm_model** out);
CDM_API int cdm_model_save(const cdm_model* model, const char* path);
CDM_API void cdm_model_free(cdm_model* model);
CDM_API size_t cdm_model_feature_count(const cdm_model* model);
CDM_API int cdm_model_importances(const cdm_model* model, double* out, size_t n);
/* Default probability for one feature row of cdm_model_feature_count values. */
CDM_API int cdm_model_predict(const cdm_model* model, const double* features, size_t n, double* probability);

/* Saved risk state. */
CDM_API int cdm_state_load(const char* path, cdm_state** out);
CDM_API void cdm_state_free(cdm_state* state);
CDM_API size_t cdm_state_count(const cdm_state* state);
CDM_API int cdm_state_get(const cdm_state* state, int64_t account, cdm_risk_record* out);

/* Scoring primitives. */
/* 1 - sum(w in X) / sum(w in Y); 1 when Y is empty. */
CDM_API int cdm_r_online_score(const double* weights, const unsigned char* in_x, const unsigned char* in_y, size_t n,
                               double* out);
CDM_API int cdm_combine(double r_online, double r_offline, double lambda, double* out);
CDM_API int cdm_rescale(double v, double min1, double max1, double min2, double max2, double* out);

#ifdef __cplusplus
}
#endif

#endif
