/* C interface to the crowd simulator and environment optimizer.
 *
 * All quantities crossing this boundary are in physical units (m, s, ped).
 * Functions return a crowd_status; on failure crowd_last_error() describes the
 * problem for the calling thread. Handles are opaque and owned by the caller.
 */
#ifndef CROWD_CROWD_H
#define CROWD_CROWD_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(_WIN32)
#define CROWD_API __declspec(dllexport)
#else
#define CROWD_API __attribute__((visibility("default")))
#endif

typedef enum crowd_status {
    CROWD_OK = 0,
    CROWD_ERR_INPUT = 2,
    CROWD_ERR_INFEASIBLE = 3,
    CROWD_ERR_NUMERIC = 4,
    CROWD_ERR_INTERNAL = 5
} crowd_status;

typedef enum crowd_behavior_kind {
    CROWD_BASIC = 0,
    CROWD_RATIONAL = 1,
    CROWD_THETA = 2,
    CROWD_HIGHLY_RATIONAL = 3
} crowd_behavior_kind;

typedef enum crowd_cost_kind { CROWD_DELTA1 = 1, CROWD_DELTA2 = 2, CROWD_DELTA3 = 3 } crowd_cost_kind;

typedef struct crowd_scenario crowd_scenario;
typedef struct crowd_metrics crowd_metrics;
typedef struct crowd_search crowd_search;

typedef struct crowd_behavior {
    int kind;          /* crowd_behavior_kind */
    double theta;      /* s */
    int replan_every;  /* transport steps */
    int fp_max_iter;
    double fp_tol;
    double fp_damping;
    double T_max;      /* s, 0 = automatic */
} crowd_behavior;

typedef struct crowd_obstacle {
    double x, y; /* barycenter */
    double w, h;
} crowd_obstacle;

typedef struct crowd_scenario_info {
    double width, height;
    int nx, ny;
    double cell; /* m */
    size_t exits;
    size_t entrances;
    double F, R, alpha_deg;
} crowd_scenario_info;

typedef struct crowd_metrics_summary {
    double t_evac;
    double rho_max;
    int used_exits;
    size_t exits;
    int aborted;
    int fp_converged;
    int fp_iterations;
    double fp_residual;
    int horizon_warning;
    size_t unreachable_cells;
    size_t steps;
} crowd_metrics_summary;

typedef struct crowd_compass_params {
    int max_steps;
    int stall_limit;
    int anneal;      /* 0 disables simulated annealing */
    double T0;       /* negative = 0.1 x starting cost */
    double cooling;
    uint64_t seed;
} crowd_compass_params;

/* Density in ped/m^2, row-major with x fastest, nx * ny values. */
typedef void (*crowd_snapshot_fn)(void* user, size_t step, double t, int nx, int ny, double cell,
                                  const double* rho);

CROWD_API const char* crowd_version(void);
CROWD_API const char* crowd_last_error(void);
/* Built-in numerical defaults as a JSON object, for provenance records. */
CROWD_API const char* crowd_defaults_json(void);

CROWD_API crowd_status crowd_scenario_load(const char* path, crowd_scenario** out);
CROWD_API crowd_status crowd_scenario_parse(const char* json_text, crowd_scenario** out);
CROWD_API void crowd_scenario_free(crowd_scenario* s);
CROWD_API crowd_status crowd_scenario_info_get(const crowd_scenario* s, crowd_scenario_info* out);
/* FNV-1a 64 of the scenario source text. */
CROWD_API uint64_t crowd_scenario_hash(const crowd_scenario* s);
CROWD_API crowd_status crowd_scenario_exit_id(const crowd_scenario* s, size_t index, const char** out);
/* Copy of the scenario with the interaction strength replaced. */
CROWD_API crowd_status crowd_scenario_with_F(const crowd_scenario* s, double F, crowd_scenario** out);
CROWD_API crowd_status crowd_admissible(const crowd_scenario* s, const crowd_obstacle* lambda, int* out);

CROWD_API crowd_status crowd_behavior_parse(const char* name, int* kind);
CROWD_API const char* crowd_behavior_name(int kind);
CROWD_API crowd_status crowd_behavior_defaults(int kind, crowd_behavior* out);

/* lambda may be NULL. snapshot_every = 0 disables the callback. */
CROWD_API crowd_status crowd_simulate(const crowd_scenario* s, const crowd_behavior* b, const crowd_obstacle* lambda,
                                      crowd_snapshot_fn fn, void* user, size_t snapshot_every,
                                      crowd_metrics** out);
CROWD_API void crowd_metrics_free(crowd_metrics* m);
CROWD_API crowd_status crowd_metrics_summary_get(const crowd_metrics* m, crowd_metrics_summary* out);
CROWD_API crowd_status crowd_metrics_exit_mass(const crowd_metrics* m, size_t exit, double* out);
CROWD_API size_t crowd_metrics_history_size(const crowd_metrics* m);
CROWD_API crowd_status crowd_metrics_history_at(const crowd_metrics* m, size_t k, double* t, double* mass);

CROWD_API crowd_status crowd_cost_parse(const char* name, int* kind);
CROWD_API const char* crowd_cost_name(int kind);
CROWD_API crowd_status crowd_cost(int kind, const crowd_metrics* target, const crowd_metrics* controlled, double* out);

CROWD_API crowd_status crowd_compass_defaults(crowd_compass_params* out);

/* Natural behavior `natural` against precomputed `target` metrics. */
CROWD_API crowd_status crowd_optimize_exhaustive(const crowd_scenario* s, const crowd_behavior* natural,
                                                 const crowd_metrics* target, int cost, double w, double h,
                                                 int stride, int jobs, crowd_search** out);
CROWD_API crowd_status crowd_optimize_compass(const crowd_scenario* s, const crowd_behavior* natural,
                                              const crowd_metrics* target, int cost, const crowd_obstacle* lambda0,
                                              const crowd_compass_params* params, crowd_search** out);
CROWD_API void crowd_search_free(crowd_search* r);
CROWD_API crowd_status crowd_search_best(const crowd_search* r, crowd_obstacle* lambda, double* delta_star,
                                         double* delta_uncontrolled, size_t* simulations);
/* Rows in physical units. `header` (may be NULL) is written verbatim first. */
CROWD_API crowd_status crowd_search_write_delta_map(const crowd_search* r, const char* path, const char* header);
CROWD_API crowd_status crowd_search_write_evaluations(const crowd_search* r, const char* path, const char* header);

#ifdef __cplusplus
}
#endif

#endif
