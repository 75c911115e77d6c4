/*
 * C interface to the refmi library. All objects are opaque handles owned by
 * the caller and released with the matching *_free function. Every call that
 * can fail returns a refmi_status; on failure refmi_last_error() describes
 * the problem (thread-local, valid until the next failing call on the same
 * thread). Strings returned through char** are released with
 * refmi_string_free.
 */
#ifndef REFMI_REFMI_H
#define REFMI_REFMI_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define REFMI_API __declspec(dllexport)
#else
#define REFMI_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum refmi_status {
  REFMI_OK = 0,
  REFMI_ERR_ARGUMENT = 1, /* caller error: bad flag, bad config, null pointer */
  REFMI_ERR_IO = 2,       /* file could not be read or written */
  REFMI_ERR_DATA = 3,     /* malformed or unusable dataset */
  REFMI_ERR_NUMERIC = 4,  /* singular or non positive definite model */
  REFMI_ERR_INTERNAL = 5
} refmi_status;

typedef enum refmi_strategy { REFMI_STRATEGY_MAR = 0, REFMI_STRATEGY_J2R = 1 } refmi_strategy;

typedef enum refmi_analysis { REFMI_ANALYSIS_DIFF_MEANS = 0, REFMI_ANALYSIS_ANCOVA = 1 } refmi_analysis;

typedef struct refmi_dataset refmi_dataset;
typedef struct refmi_imputations refmi_imputations;

typedef struct refmi_dataset_info {
  size_t patients;
  size_t active;
  size_t reference;
  size_t incomplete;
  int last_visit;
  int has_baseline;
} refmi_dataset_info;

REFMI_API const char* refmi_version(void);
REFMI_API const char* refmi_last_error(void);
REFMI_API const char* refmi_status_name(refmi_status status);
REFMI_API void refmi_string_free(char* s);

/* Datasets: CSV with header id,arm,y0,...,yJ (or id,arm,y1,...,yJ). */
REFMI_API refmi_status refmi_dataset_load_csv(const char* path, refmi_dataset** out);
REFMI_API refmi_status refmi_dataset_parse_csv(const char* text, size_t length, refmi_dataset** out);
REFMI_API refmi_status refmi_dataset_write_csv(const refmi_dataset* data, const char* path);
REFMI_API refmi_status refmi_dataset_info_get(const refmi_dataset* data, refmi_dataset_info* out);
REFMI_API void refmi_dataset_free(refmi_dataset* data);

/* Multiple imputation. proper != 0 draws model parameters per imputation. */
REFMI_API refmi_status refmi_impute(const refmi_dataset* data, refmi_strategy strategy, int imputations,
                                    int proper, uint64_t seed, refmi_imputations** out);
REFMI_API size_t refmi_imputations_count(const refmi_imputations* imps);
/* Borrowed pointer, valid while imps lives. */
REFMI_API const refmi_dataset* refmi_imputations_get(const refmi_imputations* imps, size_t index);
/* Writes <prefix>_imp<m>.csv for m = 1..count. */
REFMI_API refmi_status refmi_imputations_write(const refmi_imputations* imps, const char* prefix);
REFMI_API void refmi_imputations_free(refmi_imputations* imps);

/* Rubin's rules over completed datasets; JSON result in *json_out. */
REFMI_API refmi_status refmi_pool_rubin(const refmi_dataset* const* completed, size_t count,
                                        refmi_analysis analysis, double alpha, char** json_out);
REFMI_API refmi_status refmi_imputations_pool_rubin(const refmi_imputations* imps, refmi_analysis analysis,
                                                    double alpha, char** json_out);

/* Bootstrap-then-impute with random-intercepts pooling. grid_csv may be NULL. */
REFMI_API refmi_status refmi_bootstrap(const refmi_dataset* data, refmi_strategy strategy,
                                       refmi_analysis analysis, int bootstraps, int imputations, double alpha,
                                       uint64_t seed, int threads, const char* grid_csv, char** json_out);

/* Monte-Carlo study from a JSON scenario. seed_override may be NULL. */
REFMI_API refmi_status refmi_simulate(const char* scenario_json, int threads, const uint64_t* seed_override,
                                      int include_runtime, char** json_out);

#ifdef __cplusplus
}
#endif

#endif /* REFMI_REFMI_H */
