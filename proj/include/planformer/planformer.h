/* planformer C interface: environments, imitation datasets, the transformer
 * sampler model, RRT* planning, benchmarks and the dynamic-obstacle simulation.
 *
 * Every object is an opaque handle released with its *_free function. Functions
 * return PF_OK or an error code; pf_last_error_message() describes the most
 * recent failure on the calling thread. Strings returned by accessors are owned
 * by the handle and stay valid until it is freed.
 */
#ifndef PLANFORMER_H
#define PLANFORMER_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define PF_API __declspec(dllexport)
#else
#define PF_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum pf_status {
  PF_OK = 0,
  PF_ERR_INVALID_ARGUMENT = 1,
  PF_ERR_IO = 2,
  PF_ERR_FORMAT = 3,
  PF_ERR_DIMENSION_MISMATCH = 4,
  PF_ERR_PRECONDITION = 5,
  PF_ERR_GENERATION_FAILED = 6,
  PF_ERR_MISSING_MODEL = 7,
  PF_ERR_NOT_FOUND = 8,
  PF_ERR_INTERNAL = 9
} pf_status;

PF_API const char* pf_last_error_message(void);
PF_API const char* pf_status_name(pf_status status);
PF_API const char* pf_version(void);

typedef struct pf_env pf_env;
typedef struct pf_dataset pf_dataset;
typedef struct pf_model pf_model;
typedef struct pf_plan_result pf_plan_result;
typedef struct pf_report pf_report;
typedef struct pf_sim_result pf_sim_result;

/* ---- environments ------------------------------------------------------ */

/* Random environment with the standard obstacle distribution for `dim`
 * (100x100 with 16-20 circles, or 50^3 with 6-10 spheres). corner_fraction 0
 * places start and goal uniformly; f > 0 draws them from opposite corner boxes. */
PF_API pf_status pf_env_generate(int dim, uint64_t seed, double corner_fraction, pf_env** out);
/* Environment `index` of the benchmark sequence derived from `seed`. */
PF_API pf_status pf_env_trial(int dim, uint64_t seed, int index, double corner_fraction, pf_env** out);
PF_API pf_status pf_env_load(const char* path, pf_env** out);
PF_API pf_status pf_env_save(const pf_env* env, const char* path);
PF_API pf_status pf_env_info(const pf_env* env, int* dim, size_t* obstacle_count, uint64_t* seed);
PF_API void pf_env_free(pf_env* env);

/* ---- datasets ---------------------------------------------------------- */

typedef struct pf_dataset_config {
  int env_count;
  int dim;
  uint64_t seed;
  int waypoint_stride;
  int jobs;
  double corner_fraction;
} pf_dataset_config;

PF_API void pf_dataset_config_default(pf_dataset_config* config);
PF_API pf_status pf_dataset_build(const pf_dataset_config* config, pf_dataset** out);
PF_API pf_status pf_dataset_load(const char* path, pf_dataset** out);
PF_API pf_status pf_dataset_save(const pf_dataset* dataset, const char* path);
PF_API pf_status pf_dataset_info(const pf_dataset* dataset, int* dim, size_t* env_count, size_t* sample_count);
PF_API void pf_dataset_free(pf_dataset* dataset);

/* ---- model ------------------------------------------------------------- */

/* Fresh model sized for the standard workspace of `dim`. */
PF_API pf_status pf_model_create(int dim, uint64_t seed, pf_model** out);
/* expected_dim 0 accepts either dimensionality. */
PF_API pf_status pf_model_load(const char* path, int expected_dim, pf_model** out);
PF_API pf_status pf_model_save(const pf_model* model, const char* path);
PF_API int pf_model_dim(const pf_model* model);
PF_API size_t pf_model_parameter_count(const pf_model* model);
PF_API void pf_model_free(pf_model* model);

/* ---- training ---------------------------------------------------------- */

typedef struct pf_train_config {
  int batch_size; /* 0: 256 in 2D, 128 in 3D */
  int epochs;
  double lr;
  uint64_t seed;
  double validation_fraction;
  int keep_best; /* restore the best-validation epoch at the end */
} pf_train_config;

typedef struct pf_train_summary {
  double initial_validation_mse;
  int best_epoch;
  double best_validation_mse;
  double final_train_mse;
  int epochs_run;
} pf_train_summary;

typedef void (*pf_epoch_callback)(int epoch, double train_mse, double validation_mse, double seconds, void* user);

PF_API void pf_train_config_default(pf_train_config* config);
PF_API pf_status pf_train(pf_model* model, const pf_dataset* dataset, const pf_train_config* config,
                          pf_epoch_callback on_epoch, void* user, pf_train_summary* out);

typedef struct pf_eval_result {
  double mse;
  double mean_error;
  double copy_last_error;
  double copy_last_mse;
  size_t count;
} pf_eval_result;

/* Evaluates on the validation split defined by (validation_fraction, split_seed),
 * or on every sample when validation_fraction is 0. */
PF_API pf_status pf_evaluate(const pf_model* model, const pf_dataset* dataset, double validation_fraction,
                             uint64_t split_seed, pf_eval_result* out);

/* ---- planning ---------------------------------------------------------- */

typedef struct pf_planner_config {
  double step_size;
  double rewire_radius;
  double goal_bias;
  double goal_threshold;
  int max_iterations;
  int optimization_iterations;
  double optimization_seconds;
} pf_planner_config;

typedef struct pf_plan_metrics {
  int success;
  int nodes;
  int iterations;
  int total_iterations;
  double time_to_first;
  double initial_cost;
  double final_cost;
  size_t path_points;
  size_t tree_size;
} pf_plan_metrics;

PF_API void pf_planner_config_default(pf_planner_config* config);

/* method: "rrt_star" or "rrt_star_former" (needs model). context: "best_branch",
 * "insertion_order" or NULL for the default. alpha is ignored for rrt_star. */
PF_API pf_status pf_plan(const pf_env* env, const pf_model* model, const char* method, double alpha,
                         const char* context, const pf_planner_config* config, uint64_t rng_seed,
                         pf_plan_result** out);
PF_API pf_status pf_plan_metrics_get(const pf_plan_result* result, pf_plan_metrics* out);
/* Copies up to `capacity` points (dim doubles each) into coords. */
PF_API pf_status pf_plan_path(const pf_plan_result* result, double* coords, size_t capacity, size_t* points);
PF_API const char* pf_plan_csv_header(void);
PF_API const char* pf_plan_csv_row(pf_plan_result* result, const char* method, uint64_t env_seed, uint64_t rng_seed);
PF_API pf_status pf_plan_write_svg(const pf_plan_result* result, const pf_env* env, const char* path);
PF_API void pf_plan_result_free(pf_plan_result* result);

/* ---- benchmarks -------------------------------------------------------- */

typedef struct pf_bench_config {
  int dim;
  int env_count;
  uint64_t seed;
  int jobs;
  double corner_fraction;
  const char* context; /* NULL for the default */
  pf_planner_config planner;
} pf_bench_config;

typedef struct pf_method_summary {
  char method[64];
  int trials;
  int successes;
  double success_rate;
  double mean_nodes;
  double mean_iterations;
  double mean_time;
  double mean_initial_cost;
  double mean_final_cost;
} pf_method_summary;

PF_API void pf_bench_config_default(pf_bench_config* config);
/* methods: comma-separated list of rrt_star / rrt_star_former. */
PF_API pf_status pf_bench_compare(const pf_bench_config* config, const pf_model* model, const char* methods,
                                  double alpha, pf_report** out);
PF_API pf_status pf_bench_ablate(const pf_bench_config* config, const pf_model* model, const double* alphas,
                                 size_t alpha_count, pf_report** out);
PF_API size_t pf_report_method_count(const pf_report* report);
PF_API pf_status pf_report_method(const pf_report* report, size_t index, pf_method_summary* out);
PF_API size_t pf_report_trial_count(const pf_report* report);
PF_API const char* pf_report_csv(pf_report* report, int include_time);
PF_API const char* pf_report_summary(pf_report* report);
PF_API void pf_report_free(pf_report* report);

/* ---- dynamic simulation ------------------------------------------------ */

typedef enum pf_sim_outcome { PF_SIM_REACHED = 0, PF_SIM_COLLIDED = 1, PF_SIM_TIMEOUT = 2 } pf_sim_outcome;

/* Writes the built-in scripted scenario as JSON. */
PF_API pf_status pf_scenario_write_default(const char* path);
/* scenario_path NULL runs the built-in scenario; model NULL plans with RRT*.
 * max_steps > 0 overrides the scenario's step limit. */
PF_API pf_status pf_simulate(const char* scenario_path, const pf_model* model, uint64_t seed, double alpha,
                             int max_steps, pf_sim_result** out);
PF_API pf_status pf_sim_info(const pf_sim_result* result, pf_sim_outcome* outcome, int* steps, int* plans,
                             int* collision_free);
PF_API const char* pf_sim_outcome_name(pf_sim_outcome outcome);
PF_API pf_status pf_sim_write_trace(const pf_sim_result* result, const char* path);
PF_API void pf_sim_result_free(pf_sim_result* result);

#ifdef __cplusplus
}
#endif

#endif /* PLANFORMER_H */
