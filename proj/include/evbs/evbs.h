/* C interface to the EVBS regression library. */
#ifndef EVBS_H
#define EVBS_H

#include <stddef.h>
#include <stdint.h>

#if defined(EVBS_BUILDING_LIBRARY)
#define EVBS_API __attribute__((visibility("default")))
#else
#define EVBS_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum evbs_status {
  EVBS_OK = 0,
  EVBS_E_INVALID_ARGUMENT = 1,
  EVBS_E_IO = 2,
  EVBS_E_PARSE = 3,
  EVBS_E_DOMAIN = 4,
  EVBS_E_INFEASIBLE = 5,
  EVBS_E_NOT_CONVERGED = 6,
  EVBS_E_NUMERIC = 7,
  EVBS_E_UNSUPPORTED = 8,
  EVBS_E_NOT_AT_MAXIMUM = 9,
  EVBS_E_INTERNAL = 99
} evbs_status;

typedef struct evbs_dataset evbs_dataset;
typedef struct evbs_fit evbs_fit;

EVBS_API const char* evbs_version(void);
/* Message of the last failed call on this thread; "" if none. */
EVBS_API const char* evbs_last_error(void);
EVBS_API const char* evbs_status_name(evbs_status status);
/* Strings returned through char** out-parameters are released with this. */
EVBS_API void evbs_string_free(char* s);

/* y has n entries, x is n x p row-major and must include the intercept column. */
EVBS_API evbs_status evbs_dataset_create(const double* y, const double* x, size_t n, size_t p,
                                         evbs_dataset** out);
/* options_json may be NULL: keys date_column, response_column, covariate_columns,
   log_response, positive_response, bounds. */
EVBS_API evbs_status evbs_dataset_load_csv(const char* path, const char* options_json, evbs_dataset** out);
EVBS_API void evbs_dataset_free(evbs_dataset* d);
EVBS_API size_t evbs_dataset_rows(const evbs_dataset* d);
EVBS_API size_t evbs_dataset_cols(const evbs_dataset* d);
/* Descriptive statistics of the raw response (before any log transform). */
EVBS_API evbs_status evbs_dataset_describe_json(const evbs_dataset* d, char** json);

/* options_json may be NULL: keys max_iterations, gradient_tolerance, alpha_max,
   gamma_min, gamma_max, allow_gamma_zero_submodel, gamma_zero_threshold, fix_gamma_zero. */
EVBS_API evbs_status evbs_fit_create(const evbs_dataset* d, const char* options_json, evbs_fit** out);
EVBS_API void evbs_fit_free(evbs_fit* f);
EVBS_API int evbs_fit_converged(const evbs_fit* f);
/* (beta..., alpha, gamma). *count receives p + 2 even when capacity is short. */
EVBS_API evbs_status evbs_fit_params(const evbs_fit* f, double* out, size_t capacity, size_t* count);
/* Same order; gamma's entry is NaN in the gamma = 0 submodel. */
EVBS_API evbs_status evbs_fit_std_errors(const evbs_fit* f, double* out, size_t capacity, size_t* count);
EVBS_API evbs_status evbs_fit_json(const evbs_fit* f, char** json);

/* options_json may be NULL: scheme ("case-weights" | "response" | "covariate"),
   scale, covariate (column name), q, all (include every eigenvalue and contribution). */
EVBS_API evbs_status evbs_influence_json(const evbs_dataset* d, const evbs_fit* f, const char* options_json,
                                         char** json);
/* options_json may be NULL: envelope_sims (0 = none, default 100), level, seed. */
EVBS_API evbs_status evbs_residuals_json(const evbs_dataset* d, const evbs_fit* f, const char* options_json,
                                         char** json);
/* index is 1-based. */
EVBS_API evbs_status evbs_deletion_json(const evbs_dataset* d, const evbs_fit* f, size_t index, char** json);

/* config_text uses the scenario key = value format. Output is CSV, or the
   aligned text tables when as_text != 0. */
EVBS_API evbs_status evbs_simulate(const char* config_text, int as_text, char** out);

/* Full analysis from a JSON config; *report_json receives report.json's content. */
EVBS_API evbs_status evbs_run_pipeline(const char* config_json, char** report_json);

EVBS_API evbs_status evbs_logevbs_pdf(double y, double alpha, double eta, double gamma, double* out);
EVBS_API evbs_status evbs_logevbs_cdf(double y, double alpha, double eta, double gamma, double* out);
EVBS_API evbs_status evbs_logevbs_quantile(double u, double alpha, double eta, double gamma, double* out);

#ifdef __cplusplus
}
#endif

#endif
