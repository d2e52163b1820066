/*
 * C interface to the slice admission Markov toolkit.
 *
 * All objects are opaque handles created by sm_*_create / sm_*_build style
 * functions and released with the matching sm_*_destroy. Every fallible call
 * returns an sm_status; on failure a description is available from
 * sm_last_error() on the same thread until the next failing call.
 *
 * Handles are immutable after creation and may be shared between threads,
 * except sm_experiment, whose setters must not race with sm_experiment_run.
 */
#ifndef SLICEMK_SLICEMK_H
#define SLICEMK_SLICEMK_H

#include <stddef.h>
#include <stdint.h>

#if defined(SLICEMK_BUILDING_LIBRARY)
#define SM_API __attribute__((visibility("default")))
#else
#define SM_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Values 2..4 double as the command-line exit codes. */
typedef enum sm_status {
    SM_OK = 0,
    SM_ERR_INTERNAL = 1,
    SM_ERR_CONFIG = 2,
    SM_ERR_MODEL = 3,
    SM_ERR_GUARD = 4,
    SM_ERR_ARGUMENT = 5,
    SM_ERR_CONVERGENCE = 6
} sm_status;

typedef struct sm_model sm_model;           /* resource model with its admissibility region */
typedef struct sm_strategy sm_strategy;
typedef struct sm_strategy_list sm_strategy_list;
typedef struct sm_matrix sm_matrix;         /* analytical transition matrix */
typedef struct sm_empirical sm_empirical;   /* simulated transition counts */
typedef struct sm_experiment sm_experiment; /* loaded experiment configuration */

SM_API const char* sm_last_error(void);
SM_API const char* sm_version(void);

/* ---- arrival statistics ------------------------------------------------ */

SM_API sm_status sm_creation_pmf(double lambda, int k, double* out);
SM_API sm_status sm_release_pmf(double mu, int active, int k, double* out);

/* ---- model and region -------------------------------------------------- */

/* cost is row-major by resource: cost[m * num_types + n]. */
SM_API sm_status sm_model_create(const double* pool, size_t num_resources, const double* cost, size_t num_types,
                                 sm_model** out);
SM_API void sm_model_destroy(sm_model* model);
SM_API size_t sm_model_num_types(const sm_model* model);
SM_API size_t sm_region_size(const sm_model* model);
/* Writes num_types counts of region state `index`. */
SM_API sm_status sm_region_state(const sm_model* model, size_t index, int* counts, size_t num_types);
SM_API sm_status sm_region_index(const sm_model* model, const int* counts, size_t num_types, size_t* index);
SM_API sm_status sm_check_feasible(const sm_model* model, const int* counts, size_t num_types, int* feasible);

/* ---- strategies -------------------------------------------------------- */

SM_API sm_status sm_strategy_always_accept(const sm_model* model, sm_strategy** out);
SM_API sm_status sm_strategy_decline_all(const sm_model* model, sm_strategy** out);
/* accept has region_size * num_types entries, state-major; nonzero = accept. */
SM_API sm_status sm_strategy_from_table(const sm_model* model, const unsigned char* accept, size_t len,
                                        sm_strategy** out);
SM_API void sm_strategy_destroy(sm_strategy* strategy);
SM_API sm_status sm_strategy_is_valid(const sm_model* model, const sm_strategy* strategy, int* valid);
/* NUL-terminated '0'/'1' table; `len` includes the terminator. */
SM_API sm_status sm_strategy_table(const sm_strategy* strategy, char* buf, size_t len);

/* cap = 0 selects the default cap of 2^20 scanned tables. */
SM_API sm_status sm_strategy_enumerate(const sm_model* model, uint64_t cap, sm_strategy_list** out);
SM_API void sm_strategy_list_destroy(sm_strategy_list* list);
SM_API size_t sm_strategy_list_size(const sm_strategy_list* list);
/* Borrowed pointer, valid while the list lives. */
SM_API const sm_strategy* sm_strategy_list_get(const sm_strategy_list* list, size_t index);

/* ---- analytical chain -------------------------------------------------- */

/* lambda and mu have num_types entries. workers = 0 uses all cores. */
SM_API sm_status sm_matrix_build(const sm_model* model, const sm_strategy* strategy, const double* lambda,
                                 const double* mu, int q_plus_max, int renormalize, unsigned workers,
                                 sm_matrix** out);
SM_API sm_status sm_matrix_brute_force(const sm_model* model, const sm_strategy* strategy, const double* lambda,
                                       const double* mu, int q_plus_max, sm_matrix** out);
SM_API void sm_matrix_destroy(sm_matrix* matrix);
SM_API size_t sm_matrix_size(const sm_matrix* matrix);
/* Out-of-range indices or a NULL handle give NaN. */
SM_API double sm_matrix_get(const sm_matrix* matrix, size_t row, size_t col);
SM_API double sm_matrix_deficit(const sm_matrix* matrix, size_t row);
SM_API int sm_matrix_renormalized(const sm_matrix* matrix);
/* out has sm_matrix_size entries. */
SM_API sm_status sm_distribution_after(const sm_matrix* matrix, size_t start, int periods, double* out, size_t len);
SM_API sm_status sm_stationary_distribution(const sm_matrix* matrix, double* out, size_t len);

/* ---- simulation -------------------------------------------------------- */

/* initial_state = NULL draws each run's start uniformly over the region. */
SM_API sm_status sm_simulate(const sm_model* model, const sm_strategy* strategy, const double* lambda,
                             const double* mu, size_t num_runs, size_t periods, uint64_t seed,
                             const int* initial_state, unsigned workers, sm_empirical** out);
SM_API void sm_empirical_destroy(sm_empirical* empirical);
/* NaN for out-of-range indices. */
SM_API double sm_empirical_get(const sm_empirical* empirical, size_t row, size_t col);
SM_API uint64_t sm_empirical_visits(const sm_empirical* empirical, size_t row);
SM_API sm_status sm_rmse(const sm_matrix* analytical, const sm_empirical* empirical, double* out);

/* ---- experiments ------------------------------------------------------- */

SM_API sm_status sm_experiment_load_file(const char* path, sm_experiment** out);
SM_API sm_status sm_experiment_load_json(const char* text, sm_experiment** out);
SM_API sm_status sm_experiment_load_default(sm_experiment** out);
SM_API void sm_experiment_destroy(sm_experiment* experiment);
SM_API sm_status sm_experiment_set_seed(sm_experiment* experiment, uint64_t seed);
SM_API sm_status sm_experiment_set_renormalize(sm_experiment* experiment, int renormalize);
/* "csv" or "json" */
SM_API sm_status sm_experiment_set_format(sm_experiment* experiment, const char* format);
SM_API sm_status sm_experiment_config_hash(const sm_experiment* experiment, char* buf, size_t len);
/* command: region | strategies | matrix | simulate | figure2 | figure3.
 * out_dir = NULL uses the configured directory (and keeps region and
 * strategy listings on standard output only). */
SM_API sm_status sm_experiment_run(const sm_experiment* experiment, const char* command, const char* out_dir,
                                   unsigned workers);

#ifdef __cplusplus
}
#endif

#endif /* SLICEMK_SLICEMK_H */
