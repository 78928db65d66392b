#include "planformer/planformer.h"

#include <cstring>
#include <fstream>
#include <memory>
#include <new>
#include <sstream>
#include <string>

#include "bench.hpp"
#include "train.hpp"

using namespace planformer;

struct pf_env {
  Environment env;
};
struct pf_dataset {
  Dataset ds;
};
struct pf_model {
  std::shared_ptr<SamplerModel> model;
};
struct pf_plan_result {
  PlanResult result;
  int dim = 2;
  std::string row;
};
struct pf_report {
  AggregateReport report;
  std::string csv;
  std::string summary;
};
struct pf_sim_result {
  SimResult result;
};

namespace {

thread_local std::string g_last_error;

pf_status set_error(pf_status status, const std::string& message) {
  g_last_error = message;
  return status;
}

template <typename F>
pf_status guarded(F&& f) {
  try {
    f();
    g_last_error.clear();
    return PF_OK;
  } catch (const Error& e) {
    return set_error(static_cast<pf_status>(static_cast<int>(e.code())), e.what());
  } catch (const std::bad_alloc&) {
    return set_error(PF_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return set_error(PF_ERR_INTERNAL, e.what());
  } catch (...) {
    return set_error(PF_ERR_INTERNAL, "unknown error");
  }
}

void require(const void* p, const char* what) {
  if (!p) fail(ErrorCode::kInvalidArgument, std::string(what) + " must not be NULL");
}

EnvGenSpec spec_for(int dim) {
  if (dim == 2) return EnvGenSpec::standard_2d();
  if (dim == 3) return EnvGenSpec::standard_3d();
  fail(ErrorCode::kInvalidArgument, "dim must be 2 or 3, got " + std::to_string(dim));
}

Workspace workspace_for(int dim) {
  const EnvGenSpec spec = spec_for(dim);
  Workspace ws;
  ws.dim = dim;
  ws.size = spec.size;
  if (dim == 2) ws.size[2] = 0.0;
  return ws;
}

PlannerConfig to_planner(const pf_planner_config& c) {
  PlannerConfig p;
  p.step_size = c.step_size;
  p.rewire_radius = c.rewire_radius;
  p.goal_bias = c.goal_bias;
  p.goal_threshold = c.goal_threshold;
  p.max_iterations = c.max_iterations;
  p.optimization_iterations = c.optimization_iterations;
  p.optimization_seconds = c.optimization_seconds;
  return p;
}

BenchConfig to_bench(const pf_bench_config& c, const pf_model* model) {
  BenchConfig b;
  b.dim = c.dim;
  b.env_count = c.env_count;
  b.seed = c.seed;
  b.jobs = c.jobs;
  b.corner_fraction = c.corner_fraction;
  if (c.context) b.context = context_mode_from_string(c.context);
  b.planner = to_planner(c.planner);
  if (model) b.model = model->model;
  return b;
}

}  // namespace

extern "C" {

const char* pf_last_error_message(void) { return g_last_error.c_str(); }

const char* pf_status_name(pf_status status) {
  switch (status) {
    case PF_OK: return "ok";
    case PF_ERR_INVALID_ARGUMENT: return "invalid argument";
    case PF_ERR_IO: return "i/o error";
    case PF_ERR_FORMAT: return "malformed file";
    case PF_ERR_DIMENSION_MISMATCH: return "dimension mismatch";
    case PF_ERR_PRECONDITION: return "precondition violated";
    case PF_ERR_GENERATION_FAILED: return "generation failed";
    case PF_ERR_MISSING_MODEL: return "missing model";
    case PF_ERR_NOT_FOUND: return "not found";
    case PF_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

const char* pf_version(void) { return "1.0.0"; }

// ---- environments

pf_status pf_env_generate(int dim, uint64_t seed, double corner_fraction, pf_env** out) {
  return guarded([&] {
    require(out, "out");
    EnvGenSpec spec = spec_for(dim);
    spec.corner_fraction = corner_fraction;
    *out = new pf_env{generate_random_env(spec, seed)};
  });
}

pf_status pf_env_trial(int dim, uint64_t seed, int index, double corner_fraction, pf_env** out) {
  return guarded([&] {
    require(out, "out");
    if (index < 0) fail(ErrorCode::kInvalidArgument, "environment index must be >= 0");
    spec_for(dim);
    BenchConfig c;
    c.dim = dim;
    c.seed = seed;
    c.corner_fraction = corner_fraction;
    *out = new pf_env{trial_environment(c, index)};
  });
}

pf_status pf_env_load(const char* path, pf_env** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = new pf_env{load_env(path)};
  });
}

pf_status pf_env_save(const pf_env* env, const char* path) {
  return guarded([&] {
    require(env, "env");
    require(path, "path");
    save_env(env->env, path);
  });
}

pf_status pf_env_info(const pf_env* env, int* dim, size_t* obstacle_count, uint64_t* seed) {
  return guarded([&] {
    require(env, "env");
    if (dim) *dim = env->env.dim();
    if (obstacle_count) *obstacle_count = env->env.obstacles.size();
    if (seed) *seed = env->env.seed;
  });
}

void pf_env_free(pf_env* env) { delete env; }

// ---- datasets

void pf_dataset_config_default(pf_dataset_config* config) {
  if (!config) return;
  const DatasetConfig d;
  *config = pf_dataset_config{d.env_count, d.dim, d.seed, d.waypoint_stride, d.jobs, d.corner_fraction};
}

pf_status pf_dataset_build(const pf_dataset_config* config, pf_dataset** out) {
  return guarded([&] {
    require(config, "config");
    require(out, "out");
    DatasetConfig d;
    d.env_count = config->env_count;
    d.dim = config->dim;
    d.seed = config->seed;
    d.waypoint_stride = config->waypoint_stride;
    d.jobs = config->jobs;
    d.corner_fraction = config->corner_fraction;
    *out = new pf_dataset{build_dataset(d)};
  });
}

pf_status pf_dataset_load(const char* path, pf_dataset** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = new pf_dataset{load_dataset(path)};
  });
}

pf_status pf_dataset_save(const pf_dataset* dataset, const char* path) {
  return guarded([&] {
    require(dataset, "dataset");
    require(path, "path");
    save_dataset(dataset->ds, path);
  });
}

pf_status pf_dataset_info(const pf_dataset* dataset, int* dim, size_t* env_count, size_t* sample_count) {
  return guarded([&] {
    require(dataset, "dataset");
    if (dim) *dim = dataset->ds.dim;
    if (env_count) *env_count = dataset->ds.envs.size();
    if (sample_count) *sample_count = dataset->ds.samples.size();
  });
}

void pf_dataset_free(pf_dataset* dataset) { delete dataset; }

// ---- model

pf_status pf_model_create(int dim, uint64_t seed, pf_model** out) {
  return guarded([&] {
    require(out, "out");
    const ModelHyper h = ModelHyper::for_workspace(workspace_for(dim));
    *out = new pf_model{std::make_shared<SamplerModel>(SamplerModel::create(h, seed))};
  });
}

pf_status pf_model_load(const char* path, int expected_dim, pf_model** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = new pf_model{std::make_shared<SamplerModel>(SamplerModel::load(path, expected_dim))};
  });
}

pf_status pf_model_save(const pf_model* model, const char* path) {
  return guarded([&] {
    require(model, "model");
    require(path, "path");
    model->model->save(path);
  });
}

int pf_model_dim(const pf_model* model) { return model ? model->model->dim() : 0; }

size_t pf_model_parameter_count(const pf_model* model) { return model ? model->model->parameter_count() : 0; }

void pf_model_free(pf_model* model) { delete model; }

// ---- training

void pf_train_config_default(pf_train_config* config) {
  if (!config) return;
  const TrainConfig t;
  *config = pf_train_config{t.batch_size, t.epochs, t.lr, t.seed, t.validation_fraction, t.keep_best ? 1 : 0};
}

pf_status pf_train(pf_model* model, const pf_dataset* dataset, const pf_train_config* config,
                   pf_epoch_callback on_epoch, void* user, pf_train_summary* out) {
  return guarded([&] {
    require(model, "model");
    require(dataset, "dataset");
    require(config, "config");
    TrainConfig t;
    t.batch_size = config->batch_size;
    t.epochs = config->epochs;
    t.lr = config->lr;
    t.seed = config->seed;
    t.validation_fraction = config->validation_fraction;
    t.keep_best = config->keep_best != 0;
    EpochCallback cb;
    if (on_epoch) {
      cb = [&](const EpochStats& s) { on_epoch(s.epoch, s.train_mse, s.validation_mse, s.seconds, user); };
    }
    const TrainReport r = train(dataset->ds, *model->model, t, cb);
    if (out) {
      out->initial_validation_mse = r.initial_validation_mse;
      out->best_epoch = r.best_epoch;
      out->best_validation_mse = r.best_validation_mse;
      out->final_train_mse = r.epochs.empty() ? 0.0 : r.epochs.back().train_mse;
      out->epochs_run = static_cast<int>(r.epochs.size());
    }
  });
}

pf_status pf_evaluate(const pf_model* model, const pf_dataset* dataset, double validation_fraction,
                      uint64_t split_seed, pf_eval_result* out) {
  return guarded([&] {
    require(model, "model");
    require(dataset, "dataset");
    require(out, "out");
    std::vector<int> idx;
    if (validation_fraction > 0.0) {
      idx = split_dataset(dataset->ds, validation_fraction, split_seed).validation;
      if (idx.empty()) fail(ErrorCode::kPrecondition, "validation split is empty");
    }
    const EvalResult r = evaluate(dataset->ds, *model->model, idx);
    *out = pf_eval_result{r.mse, r.mean_error, r.copy_last_error, r.copy_last_mse, r.count};
  });
}

// ---- planning

void pf_planner_config_default(pf_planner_config* config) {
  if (!config) return;
  const PlannerConfig p;
  *config = pf_planner_config{p.step_size,      p.rewire_radius,           p.goal_bias,           p.goal_threshold,
                              p.max_iterations, p.optimization_iterations, p.optimization_seconds};
}

pf_status pf_plan(const pf_env* env, const pf_model* model, const char* method, double alpha, const char* context,
                  const pf_planner_config* config, uint64_t rng_seed, pf_plan_result** out) {
  return guarded([&] {
    require(env, "env");
    require(method, "method");
    require(config, "config");
    require(out, "out");
    BenchConfig b;
    b.dim = env->env.dim();
    b.planner = to_planner(*config);
    if (model) b.model = model->model;
    if (context) b.context = context_mode_from_string(context);
    auto r = std::make_unique<pf_plan_result>();
    r->dim = env->env.dim();
    run_trial(MethodSpec{method, alpha, ""}, b, env->env, env->env.seed, rng_seed, &r->result);
    *out = r.release();
  });
}

pf_status pf_plan_metrics_get(const pf_plan_result* result, pf_plan_metrics* out) {
  return guarded([&] {
    require(result, "result");
    require(out, "out");
    const PlanResult& r = result->result;
    *out = pf_plan_metrics{r.success ? 1 : 0, r.nodes_explored, r.iterations,     r.total_iterations, r.time_to_first,
                           r.initial_cost,    r.final_cost,     r.path.size(), r.tree.size()};
  });
}

pf_status pf_plan_path(const pf_plan_result* result, double* coords, size_t capacity, size_t* points) {
  return guarded([&] {
    require(result, "result");
    const auto& path = result->result.path;
    if (points) *points = path.size();
    if (!coords) return;
    const std::size_t n = std::min(capacity, path.size());
    for (std::size_t i = 0; i < n; ++i) {
      for (int a = 0; a < result->dim; ++a) coords[i * static_cast<std::size_t>(result->dim) + static_cast<std::size_t>(a)] = path[i][a];
    }
  });
}

const char* pf_plan_csv_header(void) {
  static const std::string header = plan_csv_header();
  return header.c_str();
}

const char* pf_plan_csv_row(pf_plan_result* result, const char* method, uint64_t env_seed, uint64_t rng_seed) {
  if (!result || !method) return "";
  result->row = plan_csv_row(method, env_seed, rng_seed, result->result);
  return result->row.c_str();
}

pf_status pf_plan_write_svg(const pf_plan_result* result, const pf_env* env, const char* path) {
  return guarded([&] {
    require(result, "result");
    require(env, "env");
    require(path, "path");
    write_svg(path, env->env, &result->result.tree, result->result.path);
  });
}

void pf_plan_result_free(pf_plan_result* result) { delete result; }

// ---- benchmarks

void pf_bench_config_default(pf_bench_config* config) {
  if (!config) return;
  const BenchConfig b;
  config->dim = b.dim;
  config->env_count = b.env_count;
  config->seed = b.seed;
  config->jobs = b.jobs;
  config->corner_fraction = b.corner_fraction;
  config->context = nullptr;
  pf_planner_config_default(&config->planner);
}

pf_status pf_bench_compare(const pf_bench_config* config, const pf_model* model, const char* methods, double alpha,
                           pf_report** out) {
  return guarded([&] {
    require(config, "config");
    require(methods, "methods");
    require(out, "out");
    std::vector<std::string> list;
    std::stringstream ss(methods);
    for (std::string m; std::getline(ss, m, ',');) {
      if (!m.empty()) list.push_back(m);
    }
    *out = new pf_report{compare_methods(list, to_bench(*config, model), alpha), {}, {}};
  });
}

pf_status pf_bench_ablate(const pf_bench_config* config, const pf_model* model, const double* alphas,
                          size_t alpha_count, pf_report** out) {
  return guarded([&] {
    require(config, "config");
    require(alphas, "alphas");
    require(out, "out");
    for (std::size_t i = 0; i < alpha_count; ++i) {
      if (!(alphas[i] >= 0.0 && alphas[i] <= 1.0)) fail(ErrorCode::kInvalidArgument, "alpha values must lie in [0, 1]");
    }
    *out = new pf_report{run_ablation({alphas, alphas + alpha_count}, to_bench(*config, model)), {}, {}};
  });
}

size_t pf_report_method_count(const pf_report* report) { return report ? report->report.methods.size() : 0; }

pf_status pf_report_method(const pf_report* report, size_t index, pf_method_summary* out) {
  return guarded([&] {
    require(report, "report");
    require(out, "out");
    if (index >= report->report.methods.size()) fail(ErrorCode::kNotFound, "method index out of range");
    const MethodSummary& m = report->report.methods[index];
    std::memset(out, 0, sizeof *out);
    std::strncpy(out->method, m.method.c_str(), sizeof out->method - 1);
    out->trials = m.trials;
    out->successes = m.successes;
    out->success_rate = m.success_rate;
    out->mean_nodes = m.mean_nodes;
    out->mean_iterations = m.mean_iterations;
    out->mean_time = m.mean_time;
    out->mean_initial_cost = m.mean_initial_cost;
    out->mean_final_cost = m.mean_final_cost;
  });
}

size_t pf_report_trial_count(const pf_report* report) { return report ? report->report.trials.size() : 0; }

const char* pf_report_csv(pf_report* report, int include_time) {
  if (!report) return "";
  report->csv = metrics_csv(report->report.trials, include_time != 0);
  return report->csv.c_str();
}

const char* pf_report_summary(pf_report* report) {
  if (!report) return "";
  report->summary = summary_text(report->report);
  return report->summary.c_str();
}

void pf_report_free(pf_report* report) { delete report; }

// ---- simulation

pf_status pf_scenario_write_default(const char* path) {
  return guarded([&] {
    require(path, "path");
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorCode::kIo, std::string("cannot open '") + path + "' for writing");
    out << scenario_to_json(scripted_scenario());
    if (!out) fail(ErrorCode::kIo, std::string("write failed for '") + path + "'");
  });
}

pf_status pf_simulate(const char* scenario_path, const pf_model* model, uint64_t seed, double alpha, int max_steps,
                      pf_sim_result** out) {
  return guarded([&] {
    require(out, "out");
    Scenario s = scripted_scenario();
    if (scenario_path) {
      std::ifstream in(scenario_path, std::ios::binary);
      if (!in) fail(ErrorCode::kIo, std::string("cannot open scenario '") + scenario_path + "'");
      std::stringstream buf;
      buf << in.rdbuf();
      const PlannerConfig planner = s.planner;
      s = scenario_from_json(buf.str());
      s.planner = planner;
    }
    if (max_steps > 0) s.max_steps = max_steps;
    std::shared_ptr<const SamplerModel> m;
    if (model) m = model->model;
    *out = new pf_sim_result{dynamic_sim(s, m, seed, alpha)};
  });
}

pf_status pf_sim_info(const pf_sim_result* result, pf_sim_outcome* outcome, int* steps, int* plans,
                      int* collision_free) {
  return guarded([&] {
    require(result, "result");
    const SimResult& r = result->result;
    if (outcome) *outcome = static_cast<pf_sim_outcome>(static_cast<int>(r.outcome));
    if (steps) *steps = r.steps;
    if (plans) *plans = r.plans;
    if (collision_free) {
      *collision_free = 1;
      for (const auto& s : r.trace) {
        if (!s.collision_free) *collision_free = 0;
      }
    }
  });
}

const char* pf_sim_outcome_name(pf_sim_outcome outcome) {
  switch (outcome) {
    case PF_SIM_REACHED: return "reached";
    case PF_SIM_COLLIDED: return "collided";
    case PF_SIM_TIMEOUT: return "timeout";
  }
  return "unknown";
}

pf_status pf_sim_write_trace(const pf_sim_result* result, const char* path) {
  return guarded([&] {
    require(result, "result");
    require(path, "path");
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorCode::kIo, std::string("cannot open '") + path + "' for writing");
    out << trace_json(result->result);
    if (!out) fail(ErrorCode::kIo, std::string("write failed for '") + path + "'");
  });
}

void pf_sim_result_free(pf_sim_result* result) { delete result; }

}  // extern "C"
