#ifndef GTLATTICE_H
#define GTLATTICE_H

/* C interface to the Bayesian group testing engine.
 *
 * The engine classifies N subjects as positive or negative from pooled test
 * responses. Hypotheses ("states") are n-bit integers whose set bits mark
 * negative subjects; the posterior over all 2^n states lives behind the
 * opaque gt_lattice handle. Pool selection picks the state whose posterior
 * up-set mass is closest to one half.
 *
 * All functions return gt_status; on failure gt_last_error() holds a
 * thread-local message. Strings returned through char** are owned by the
 * caller and must be released with gt_string_free().
 */

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define GT_API __declspec(dllexport)
#else
#define GT_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum gt_status {
  GT_OK = 0,
  GT_ERROR_INVALID_ARGUMENT = 1,
  GT_ERROR_INACTIVE_SUBJECT = 2,
  GT_ERROR_IMPOSSIBLE_RESPONSE = 3,
  GT_ERROR_CONFIG = 4,
  GT_ERROR_SCALE_GUARD = 5,
  GT_ERROR_INTERNAL = 6
} gt_status;

typedef enum gt_response {
  GT_RESPONSE_NEGATIVE = 0,
  GT_RESPONSE_POSITIVE = 1
} gt_response;

typedef enum gt_decision {
  GT_DECISION_UNCLASSIFIED = 0,
  GT_DECISION_NEGATIVE = 1,
  GT_DECISION_POSITIVE = 2
} gt_decision;

typedef enum gt_algorithm {
  GT_ALGORITHM_BHA = 0,        /* exhaustive halving */
  GT_ALGORITHM_OPBHA = 1,      /* checklist-skipping halving */
  GT_ALGORITHM_OPBHA_PAR = 2   /* staged parallel variant */
} gt_algorithm;

typedef struct gt_lattice gt_lattice;

typedef struct gt_response_model {
  double sensitivity;
  double specificity;
  double dilution_exponent;
} gt_response_model;

typedef struct gt_selection {
  uint64_t pool;        /* state of the current (possibly shrunk) lattice */
  double pool_mass;
  uint64_t evaluated_states;
  uint64_t skipped_states;
} gt_selection;

typedef struct gt_commit {
  int subject_id;
  gt_decision decision;
  double residual_error;
} gt_commit;

GT_API const char* gt_version(void);
GT_API const char* gt_status_name(gt_status status);

/* Thread-local message describing the most recent failure. */
GT_API const char* gt_last_error(void);
GT_API void gt_string_free(char* text);

/* --- lattice handles ----------------------------------------------------- */

/* risks[i] is the prior probability that subject i is positive, in (0,1).
 * Subject ids are 0..count-1; subject 0 owns the highest state bit. */
GT_API gt_status gt_lattice_create(const double* risks, size_t count,
                                   gt_lattice** out);
GT_API gt_status gt_lattice_clone(const gt_lattice* lattice, gt_lattice** out);
GT_API void gt_lattice_free(gt_lattice* lattice);

GT_API gt_status gt_lattice_active_count(const gt_lattice* lattice, int* out);
GT_API gt_status gt_lattice_state_count(const gt_lattice* lattice,
                                        uint64_t* out);
GT_API gt_status gt_lattice_mass(const gt_lattice* lattice, uint64_t state,
                                 double* out);
GT_API gt_status gt_lattice_marginal(const gt_lattice* lattice, int subject_id,
                                     double* out);

GT_API gt_status gt_lattice_update(gt_lattice* lattice, uint64_t pool,
                                   gt_response response,
                                   const gt_response_model* model);

/* Commits every subject whose marginal crossed a threshold, shrinking the
 * lattice; writes up to capacity commits and the total count. */
GT_API gt_status gt_lattice_classify_and_shrink(gt_lattice* lattice,
                                                double upper_eps,
                                                double lower_eps, int stage,
                                                gt_commit* commits,
                                                size_t capacity,
                                                size_t* out_count);

/* worker_count and chunk_size apply to the parallel algorithm only;
 * 0 means hardware concurrency / default chunk. */
GT_API gt_status gt_lattice_select(const gt_lattice* lattice,
                                   gt_algorithm algorithm, int worker_count,
                                   uint64_t chunk_size, gt_selection* out);

/* --- command-level JSON interface (the CLI surface) ---------------------- */

/* config_json / history_json carry the documented file formats.
 * workers_override < 0 keeps the config's worker_count. */
GT_API gt_status gt_run_select(const char* config_json,
                               const char* history_json, int workers_override,
                               char** result_json);

GT_API gt_status gt_run_analyze(const char* config_json, int workers_override,
                                char** report_json, char** per_subject_csv);

/* algos_csv: comma-separated subset of bha,opbha,opbha_par. */
GT_API gt_status gt_run_bench(const char* config_json, const char* algos_csv,
                              int trials, char** table_csv);

#ifdef __cplusplus
}
#endif

#endif /* GTLATTICE_H */
