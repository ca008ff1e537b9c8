#ifndef HINFTUNE_H
#define HINFTUNE_H

#include <stddef.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(HT_BUILDING_LIBRARY)
#define HT_API __attribute__((visibility("default")))
#else
#define HT_API
#endif

typedef enum ht_status {
  HT_OK = 0,
  HT_ERR_ARG = 1,      /* null pointer, bad size, out-of-range index */
  HT_ERR_CONFIG = 2,   /* malformed or inconsistent configuration */
  HT_ERR_NUMERIC = 3,  /* instability, non-convergence, singular data */
  HT_ERR_IO = 4,       /* file system failures */
  HT_ERR_INTERNAL = 5
} ht_status;

typedef enum ht_log_level {
  HT_LOG_TRACE = 0,
  HT_LOG_DEBUG = 1,
  HT_LOG_INFO = 2,
  HT_LOG_WARN = 3,
  HT_LOG_ERROR = 4,
  HT_LOG_OFF = 6
} ht_log_level;

typedef struct ht_context ht_context;
typedef struct ht_system ht_system;
typedef struct ht_model ht_model;

HT_API const char* ht_version(void);
HT_API const char* ht_status_string(ht_status status);

/* Context: carries the last error message of calls made through it. */
HT_API ht_context* ht_context_create(void);
HT_API void ht_context_destroy(ht_context* ctx);
HT_API const char* ht_last_error(const ht_context* ctx);
HT_API ht_status ht_set_threads(ht_context* ctx, int threads);
HT_API ht_status ht_set_log_level(ht_context* ctx, ht_log_level level);

/* Pipelines. Outputs go to out_dir, created if missing. */
HT_API ht_status ht_analyze(ht_context* ctx, const char* config_path, const char* out_dir);
HT_API ht_status ht_tune(ht_context* ctx, const char* config_path, const char* out_dir);
HT_API ht_status ht_simulate(ht_context* ctx, const char* config_path, const char* out_dir);

/* State-space system from row-major arrays; a, b, c may be null when their
   size is zero. */
HT_API ht_status ht_system_create(ht_context* ctx, size_t nx, size_t nw, size_t ny,
                                  const double* a, const double* b, const double* c,
                                  const double* d, ht_system** out);
HT_API void ht_system_destroy(ht_system* sys);
/* norm is +inf for unstable systems; peak_omega may be null. */
HT_API ht_status ht_system_hinf_norm(ht_context* ctx, const ht_system* sys, double tol,
                                     double* norm, double* peak_omega);
/* Writes up to capacity poles; count receives the total number. */
HT_API ht_status ht_system_poles(ht_context* ctx, const ht_system* sys, double* re, double* im,
                                 size_t capacity, size_t* count);
HT_API ht_status ht_system_sigma_max(ht_context* ctx, const ht_system* sys, const double* omegas,
                                     size_t n, double* sigma);

/* Parameterized model of the first scenario of a configuration file. */
HT_API ht_status ht_model_load(ht_context* ctx, const char* config_path, ht_model** out);
HT_API void ht_model_destroy(ht_model* model);
HT_API size_t ht_model_parameter_count(const ht_model* model);
HT_API const char* ht_model_parameter_name(const ht_model* model, size_t index);
/* Writes the initial parameter vector and its bounds; any pointer may be null. */
HT_API ht_status ht_model_parameters(ht_context* ctx, const ht_model* model, double* initial,
                                     double* lower, double* upper);
HT_API ht_status ht_model_evaluate(ht_context* ctx, const ht_model* model, const double* k,
                                   ht_system** out);

#ifdef __cplusplus
}
#endif

#endif
