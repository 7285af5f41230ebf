/* C interface to the baryloc shared library.
 *
 * Every call returns a baryloc_status. On failure the message of the most
 * recent error on the calling thread is available from baryloc_last_error().
 * Strings are copied out with the (buf, cap, needed) convention: *needed is
 * always set to the full length including the terminator, and the copy is
 * made only when cap is large enough.
 */
#ifndef BARYLOC_H
#define BARYLOC_H

#include <stddef.h>
#include <stdint.h>

#if defined(BARYLOC_BUILDING_LIBRARY)
#define BARYLOC_API __attribute__((visibility("default")))
#else
#define BARYLOC_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum baryloc_status {
  BARYLOC_OK = 0,
  BARYLOC_INVALID_INPUT = 1,
  BARYLOC_PRECONDITION_VIOLATED = 2,
  BARYLOC_NEGATIVE_SQUARED_VOLUME = 3,
  BARYLOC_DEGENERATE_ANCHORS = 4,
  BARYLOC_INCONSISTENT_RANGES = 5,
  BARYLOC_INCOMPLETE_TRIANGULATION = 6,
  BARYLOC_NOT_ABSORBING = 7,
  BARYLOC_NUMERICAL_FAILURE = 8,
  BARYLOC_SCHEDULE_REJECTED = 9,
  BARYLOC_DEGENERATE_MEASUREMENT = 10,
  BARYLOC_CONFIG_ERROR = 11,
  BARYLOC_IO_ERROR = 12,
  BARYLOC_BUFFER_TOO_SMALL = 13,
  BARYLOC_INTERNAL_ERROR = 14
} baryloc_status;

typedef struct baryloc_experiment baryloc_experiment;

BARYLOC_API const char* baryloc_version(void);
/* Stable name of a status, e.g. "ConfigError". */
BARYLOC_API const char* baryloc_status_string(baryloc_status status);
/* Message of the last failure on this thread; "" if none. */
BARYLOC_API const char* baryloc_last_error(void);

/* Experiments. */
BARYLOC_API baryloc_status baryloc_experiment_load(const char* config_path, baryloc_experiment** out);
BARYLOC_API baryloc_status baryloc_experiment_create(const char* config_json, baryloc_experiment** out);
BARYLOC_API void baryloc_experiment_destroy(baryloc_experiment* exp);

BARYLOC_API baryloc_status baryloc_experiment_set_seed(baryloc_experiment* exp, uint64_t seed);
BARYLOC_API baryloc_status baryloc_experiment_set_replicates(baryloc_experiment* exp, int replicates);
/* Sets a dotted config path (e.g. "mobile.epsilon") to a JSON value. */
BARYLOC_API baryloc_status baryloc_experiment_set_param(baryloc_experiment* exp, const char* path,
                                                        const char* json_value);
BARYLOC_API baryloc_status baryloc_experiment_config_json(const baryloc_experiment* exp, char* buf,
                                                          size_t cap, size_t* needed);

BARYLOC_API baryloc_status baryloc_experiment_run(baryloc_experiment* exp);
/* The following need a completed run. */
BARYLOC_API baryloc_status baryloc_experiment_write_outputs(const baryloc_experiment* exp, const char* dir);
BARYLOC_API baryloc_status baryloc_experiment_summary_json(const baryloc_experiment* exp, char* buf,
                                                           size_t cap, size_t* needed);
BARYLOC_API baryloc_status baryloc_experiment_trace_csv(const baryloc_experiment* exp, char* buf, size_t cap,
                                                        size_t* needed);
/* Error norms of one replicate for k = 0..steps; *count receives steps + 1. */
BARYLOC_API baryloc_status baryloc_experiment_error_trace(const baryloc_experiment* exp, int replicate,
                                                          double* out, size_t cap, size_t* count);

/* Geometry. Matrices are row-major. */
/* Hypervolume of the (n-1)-simplex with n x n squared-distance matrix d2. */
BARYLOC_API baryloc_status baryloc_simplex_hypervolume(const double* d2, int n, double* volume);
/* Barycentric weights of a point with distances i_dists to the m+1 vertices
 * of a simplex with squared-distance matrix d2 ((m+1) x (m+1)). Fails with
 * BARYLOC_PRECONDITION_VIOLATED when the point is not strictly inside. */
BARYLOC_API baryloc_status baryloc_barycentric_weights(const double* d2, int m, const double* i_dists,
                                                       double tol_rel, double* weights, double* relative_error);
/* anchors: (m+1) x m; ranges: m+1; position: m. */
BARYLOC_API baryloc_status baryloc_trilaterate(const double* anchors, int m, const double* ranges,
                                               double* position);

/* Necessary anchor-count conditions for tracking mobile agents. failed_mask
 * bit 0: no anchor; bit 1: too few nodes; bit 2: too few anchors for the
 * motion dimensions. */
BARYLOC_API baryloc_status baryloc_feasibility_check(int anchors, int agents, int dim, int agent_motion_dim,
                                                     int anchor_motion_dim, int* feasible,
                                                     unsigned* failed_mask);

typedef struct baryloc_geometry_report {
  long samples;
  long volume_checked;
  long volume_passed;
  double max_volume_rel_error;
  long inclusion_checked;
  long inclusion_agreed;
  long band_skipped;
  long degenerate_skipped; /* near-flat draws that were redrawn */
} baryloc_geometry_report;

/* Random-simplex property suite; *passed is 1 when every check agrees. */
BARYLOC_API baryloc_status baryloc_validate_geometry(long samples, uint64_t seed, baryloc_geometry_report* report,
                                                     int* passed);

#ifdef __cplusplus
}
#endif

#endif /* BARYLOC_H */
