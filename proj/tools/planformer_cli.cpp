// planformer command-line front end. Talks to the library through the C API only.
#include <CLI11.hpp>

#include <cerrno>
#include <cinttypes>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "planformer/planformer.h"

namespace fs = std::filesystem;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitStatusBase = 10;  // exit code = 10 + pf_status

struct CliError {
  pf_status status;
  std::string message;
};

void check(pf_status s, const std::string& what) {
  if (s != PF_OK) throw CliError{s, what + ": " + pf_last_error_message()};
}

template <typename T, void (*Free)(T*)>
struct Deleter {
  void operator()(T* p) const { Free(p); }
};
using EnvPtr = std::unique_ptr<pf_env, Deleter<pf_env, pf_env_free>>;
using DatasetPtr = std::unique_ptr<pf_dataset, Deleter<pf_dataset, pf_dataset_free>>;
using ModelPtr = std::unique_ptr<pf_model, Deleter<pf_model, pf_model_free>>;
using PlanPtr = std::unique_ptr<pf_plan_result, Deleter<pf_plan_result, pf_plan_result_free>>;
using ReportPtr = std::unique_ptr<pf_report, Deleter<pf_report, pf_report_free>>;
using SimPtr = std::unique_ptr<pf_sim_result, Deleter<pf_sim_result, pf_sim_result_free>>;

struct Common {
  std::uint64_t seed = 0;
  bool seed_given = false;
  int dim = 2;
  std::string out = "out";
  std::string model_path;
  int jobs = 1;
  double corner_fraction = 0.0;
};

struct Options {
  Common common;
  // gen-envs / gen-dataset / train / bench
  int count = 3;
  int envs = 0;
  int stride = 3;
  std::string dataset;
  int epochs = 20;
  int batch_size = 0;
  double lr = 1e-4;
  double validation_fraction = 0.1;
  // planning
  std::string env_path;
  int env_index = 0;
  std::string method = "rrt_star_former";
  double alpha = 0.5;
  std::string context = "best_branch";
  std::string methods = "rrt_star,rrt_star_former";
  std::string alphas = "0,0.5,1";
  pf_planner_config planner{};
  bool include_time = true;
  // simulate
  std::string scenario;
  int steps = 0;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--seed", c.seed, "master seed (default: $PLANFORMER_SEED or 0)")
      ->each([&c](const std::string&) { c.seed_given = true; });
  app->add_option("--dim", c.dim, "workspace dimensionality")->check(CLI::IsMember({2, 3}));
  app->add_option("--out", c.out, "output directory");
  app->add_option("--model-path", c.model_path, "model weight file");
  app->add_option("--jobs", c.jobs, "worker threads")->check(CLI::PositiveNumber);
  app->add_option("--corner-fraction", c.corner_fraction, "start/goal corner box fraction (0: uniform)")
      ->check(CLI::Range(0.0, 0.5));
}

void add_planner(CLI::App* app, pf_planner_config& p) {
  app->add_option("--step-size", p.step_size, "steering step");
  app->add_option("--rewire-radius", p.rewire_radius, "RRT* rewiring radius (0: no rewiring)");
  app->add_option("--goal-bias", p.goal_bias, "goal-bias probability of the rrt_star sampler");
  app->add_option("--goal-threshold", p.goal_threshold, "goal connection threshold");
  app->add_option("--max-iterations", p.max_iterations, "iteration budget before a first solution");
  app->add_option("--opt-iterations", p.optimization_iterations, "iterations after the first solution");
  app->add_option("--opt-seconds", p.optimization_seconds, "wall-clock optimization budget (overrides iterations)");
}

void resolve_seed(Common& c) {
  if (c.seed_given) return;
  if (const char* env = std::getenv("PLANFORMER_SEED"); env && *env) {
    char* end = nullptr;
    errno = 0;
    const unsigned long long v = std::strtoull(env, &end, 10);
    if (errno != 0 || *end != '\0' || env[0] == '-') {
      throw CliError{PF_ERR_INVALID_ARGUMENT, std::string("PLANFORMER_SEED is not an unsigned integer: '") + env + "'"};
    }
    c.seed = v;
  }
}

void print_config(const std::string& cmd, const std::vector<std::pair<std::string, std::string>>& kv) {
  std::cout << "[config] command=" << cmd;
  for (const auto& [k, v] : kv) std::cout << ' ' << k << '=' << v;
  std::cout << '\n';
}

std::vector<std::pair<std::string, std::string>> common_kv(const Common& c) {
  return {{"seed", std::to_string(c.seed)},
          {"dim", std::to_string(c.dim)},
          {"out", c.out},
          {"model-path", c.model_path.empty() ? "-" : c.model_path},
          {"jobs", std::to_string(c.jobs)},
          {"corner-fraction", std::to_string(c.corner_fraction)}};
}

std::vector<std::pair<std::string, std::string>> planner_kv(const pf_planner_config& p) {
  return {{"step-size", std::to_string(p.step_size)},
          {"rewire-radius", std::to_string(p.rewire_radius)},
          {"goal-bias", std::to_string(p.goal_bias)},
          {"goal-threshold", std::to_string(p.goal_threshold)},
          {"max-iterations", std::to_string(p.max_iterations)},
          {"opt-iterations", std::to_string(p.optimization_iterations)},
          {"opt-seconds", std::to_string(p.optimization_seconds)}};
}

fs::path out_dir(const Common& c) {
  std::error_code ec;
  fs::create_directories(c.out, ec);
  if (ec) throw CliError{PF_ERR_IO, "cannot create output directory '" + c.out + "': " + ec.message()};
  return fs::path(c.out);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  os << text;
  os.close();
  if (!os) throw CliError{PF_ERR_IO, "cannot write '" + path.string() + "'"};
}

ModelPtr load_model(const Common& c, bool required) {
  if (c.model_path.empty()) {
    if (required) throw CliError{PF_ERR_MISSING_MODEL, "this command needs --model-path"};
    return nullptr;
  }
  if (!fs::exists(c.model_path)) throw CliError{PF_ERR_MISSING_MODEL, "model file '" + c.model_path + "' does not exist"};
  pf_model* m = nullptr;
  check(pf_model_load(c.model_path.c_str(), c.dim, &m), "loading model '" + c.model_path + "'");
  return ModelPtr(m);
}

std::string env_file_name(int i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "env_%04d.json", i);
  return buf;
}

int cmd_gen_envs(Options& o) {
  if (o.count < 1) throw CliError{PF_ERR_INVALID_ARGUMENT, "--count must be >= 1"};
  auto kv = common_kv(o.common);
  kv.emplace_back("count", std::to_string(o.count));
  print_config("gen-envs", kv);
  const fs::path dir = out_dir(o.common);
  for (int i = 0; i < o.count; ++i) {
    pf_env* e = nullptr;
    check(pf_env_trial(o.common.dim, o.common.seed, i, o.common.corner_fraction, &e), "generating environment");
    EnvPtr env(e);
    const fs::path file = dir / env_file_name(i);
    check(pf_env_save(env.get(), file.string().c_str()), "saving environment");
  }
  std::cout << "wrote " << o.count << " environments to " << dir.string() << '\n';
  return 0;
}

DatasetPtr build_dataset(const Options& o, int env_count) {
  pf_dataset_config dc;
  pf_dataset_config_default(&dc);
  dc.env_count = env_count;
  dc.dim = o.common.dim;
  dc.seed = o.common.seed;
  dc.waypoint_stride = o.stride;
  dc.jobs = o.common.jobs;
  dc.corner_fraction = o.common.corner_fraction;
  pf_dataset* d = nullptr;
  check(pf_dataset_build(&dc, &d), "building dataset");
  return DatasetPtr(d);
}

void print_dataset(const pf_dataset* d) {
  int dim = 0;
  size_t envs = 0, samples = 0;
  check(pf_dataset_info(d, &dim, &envs, &samples), "dataset info");
  std::cout << "dataset: dim " << dim << ", " << envs << " environments, " << samples << " samples\n";
}

int cmd_gen_dataset(Options& o) {
  const int envs = o.envs > 0 ? o.envs : 500;
  auto kv = common_kv(o.common);
  kv.emplace_back("envs", std::to_string(envs));
  kv.emplace_back("stride", std::to_string(o.stride));
  print_config("gen-dataset", kv);
  const fs::path dir = out_dir(o.common);
  DatasetPtr ds = build_dataset(o, envs);
  const fs::path file = o.dataset.empty() ? dir / "dataset.ds" : fs::path(o.dataset);
  check(pf_dataset_save(ds.get(), file.string().c_str()), "saving dataset");
  print_dataset(ds.get());
  std::cout << "wrote " << file.string() << '\n';
  return 0;
}

struct LossLog {
  std::ostringstream csv;
};

void on_epoch(int epoch, double train_mse, double val_mse, double seconds, void* user) {
  auto* log = static_cast<LossLog*>(user);
  log->csv << epoch << ',' << train_mse << ',' << val_mse << ',' << seconds << '\n';
  std::printf("epoch %d train %.6g val %.6g (%.1fs)\n", epoch, train_mse, val_mse, seconds);
  std::fflush(stdout);
}

int cmd_train(Options& o) {
  if (o.dataset.empty() && o.envs <= 0) throw CliError{PF_ERR_INVALID_ARGUMENT, "train needs --dataset or --envs"};
  auto kv = common_kv(o.common);
  kv.emplace_back("dataset", o.dataset.empty() ? "-" : o.dataset);
  kv.emplace_back("envs", std::to_string(o.envs));
  kv.emplace_back("stride", std::to_string(o.stride));
  kv.emplace_back("epochs", std::to_string(o.epochs));
  kv.emplace_back("batch-size", std::to_string(o.batch_size));
  kv.emplace_back("lr", std::to_string(o.lr));
  kv.emplace_back("validation-fraction", std::to_string(o.validation_fraction));
  print_config("train", kv);
  const fs::path dir = out_dir(o.common);

  DatasetPtr ds;
  if (!o.dataset.empty()) {
    if (!fs::exists(o.dataset)) throw CliError{PF_ERR_NOT_FOUND, "dataset file '" + o.dataset + "' does not exist"};
    pf_dataset* d = nullptr;
    check(pf_dataset_load(o.dataset.c_str(), &d), "loading dataset '" + o.dataset + "'");
    ds.reset(d);
    int dim = 0;
    check(pf_dataset_info(d, &dim, nullptr, nullptr), "dataset info");
    if (dim != o.common.dim) {
      throw CliError{PF_ERR_DIMENSION_MISMATCH, "dataset is " + std::to_string(dim) + "-D but --dim is " +
                                                    std::to_string(o.common.dim)};
    }
  } else {
    ds = build_dataset(o, o.envs);
  }
  print_dataset(ds.get());

  pf_model* m = nullptr;
  if (!o.common.model_path.empty() && fs::exists(o.common.model_path)) {
    check(pf_model_load(o.common.model_path.c_str(), o.common.dim, &m), "loading model '" + o.common.model_path + "'");
    std::cout << "continuing from " << o.common.model_path << '\n';
  } else {
    check(pf_model_create(o.common.dim, o.common.seed, &m), "creating model");
  }
  ModelPtr model(m);
  std::cout << "parameters: " << pf_model_parameter_count(model.get()) << '\n';

  pf_train_config tc;
  pf_train_config_default(&tc);
  tc.batch_size = o.batch_size;
  tc.epochs = o.epochs;
  tc.lr = o.lr;
  tc.seed = o.common.seed;
  tc.validation_fraction = o.validation_fraction;
  LossLog log;
  log.csv << "epoch,train_mse,validation_mse,seconds\n";
  pf_train_summary summary{};
  check(pf_train(model.get(), ds.get(), &tc, on_epoch, &log, &summary), "training");

  const fs::path model_file = o.common.model_path.empty() ? dir / "model.bin" : fs::path(o.common.model_path);
  check(pf_model_save(model.get(), model_file.string().c_str()), "saving model");
  write_text(dir / "loss.csv", log.csv.str());
  std::printf("initial validation mse %.6g, best %.6g at epoch %d, final train mse %.6g\n",
              summary.initial_validation_mse, summary.best_validation_mse, summary.best_epoch,
              summary.final_train_mse);
  std::cout << "wrote " << model_file.string() << " and " << (dir / "loss.csv").string() << '\n';
  return 0;
}

int cmd_plan(Options& o, bool alpha_given) {
  const bool former = o.method == "rrt_star_former";
  if (!former && o.method != "rrt_star") {
    throw CliError{PF_ERR_INVALID_ARGUMENT, "unknown method '" + o.method + "' (rrt_star or rrt_star_former)"};
  }
  if (!former && alpha_given) std::cerr << "warning: --alpha applies only to rrt_star_former; ignored\n";
  auto kv = common_kv(o.common);
  kv.emplace_back("method", o.method);
  kv.emplace_back("alpha", former ? std::to_string(o.alpha) : "-");
  kv.emplace_back("context", o.context);
  kv.emplace_back("env", o.env_path.empty() ? "trial " + std::to_string(o.env_index) : o.env_path);
  for (auto& p : planner_kv(o.planner)) kv.push_back(p);
  print_config("plan", kv);
  const fs::path dir = out_dir(o.common);

  pf_env* e = nullptr;
  if (!o.env_path.empty()) {
    if (!fs::exists(o.env_path)) throw CliError{PF_ERR_NOT_FOUND, "environment file '" + o.env_path + "' does not exist"};
    check(pf_env_load(o.env_path.c_str(), &e), "loading environment '" + o.env_path + "'");
  } else {
    check(pf_env_trial(o.common.dim, o.common.seed, o.env_index, o.common.corner_fraction, &e), "generating environment");
  }
  EnvPtr env(e);
  int env_dim = 0;
  uint64_t env_seed = 0;
  check(pf_env_info(env.get(), &env_dim, nullptr, &env_seed), "environment info");
  if (env_dim != o.common.dim) {
    throw CliError{PF_ERR_DIMENSION_MISMATCH, "environment is " + std::to_string(env_dim) + "-D but --dim is " +
                                                  std::to_string(o.common.dim)};
  }
  ModelPtr model = load_model(o.common, former);

  pf_plan_result* r = nullptr;
  check(pf_plan(env.get(), model.get(), o.method.c_str(), o.alpha, o.context.c_str(), &o.planner, o.common.seed, &r),
        "planning");
  PlanPtr plan(r);
  pf_plan_metrics m{};
  check(pf_plan_metrics_get(plan.get(), &m), "plan metrics");
  check(pf_plan_write_svg(plan.get(), env.get(), (dir / "plan.svg").string().c_str()), "writing SVG");
  const std::string row = pf_plan_csv_row(plan.get(), o.method.c_str(), env_seed, o.common.seed);
  write_text(dir / "plan.csv", std::string(pf_plan_csv_header()) + "\n" + row + "\n");
  std::printf("success %d, nodes %d, iterations %d, initial cost %.3f, final cost %.3f\n", m.success, m.nodes,
              m.iterations, m.initial_cost, m.final_cost);
  std::cout << "wrote " << (dir / "plan.svg").string() << " and " << (dir / "plan.csv").string() << '\n';
  return 0;
}

pf_bench_config bench_config(const Options& o, int env_count) {
  pf_bench_config bc;
  pf_bench_config_default(&bc);
  bc.dim = o.common.dim;
  bc.env_count = env_count;
  bc.seed = o.common.seed;
  bc.jobs = o.common.jobs;
  bc.corner_fraction = o.common.corner_fraction;
  bc.context = o.context.c_str();
  bc.planner = o.planner;
  return bc;
}

void write_report(pf_report* report, const fs::path& dir, const std::string& stem, bool include_time) {
  write_text(dir / (stem + ".csv"), pf_report_csv(report, include_time ? 1 : 0));
  const std::string summary = pf_report_summary(report);
  write_text(dir / (stem + "_summary.txt"), summary);
  std::cout << summary;
  std::cout << "wrote " << (dir / (stem + ".csv")).string() << " (" << pf_report_trial_count(report) << " rows) and "
            << (dir / (stem + "_summary.txt")).string() << '\n';
}

int cmd_bench(Options& o) {
  const int envs = o.envs > 0 ? o.envs : 100;
  auto kv = common_kv(o.common);
  kv.emplace_back("methods", o.methods);
  kv.emplace_back("envs", std::to_string(envs));
  kv.emplace_back("alpha", std::to_string(o.alpha));
  kv.emplace_back("context", o.context);
  kv.emplace_back("include-time", o.include_time ? "1" : "0");
  for (auto& p : planner_kv(o.planner)) kv.push_back(p);
  print_config("bench", kv);
  const fs::path dir = out_dir(o.common);
  const bool former = o.methods.find("rrt_star_former") != std::string::npos;
  ModelPtr model = load_model(o.common, former);
  const pf_bench_config bc = bench_config(o, envs);
  pf_report* r = nullptr;
  check(pf_bench_compare(&bc, model.get(), o.methods.c_str(), o.alpha, &r), "benchmark");
  ReportPtr report(r);
  write_report(report.get(), dir, "bench", o.include_time);
  return 0;
}

std::vector<double> parse_alphas(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  for (std::string tok; std::getline(ss, tok, ',');) {
    if (tok.empty()) continue;
    try {
      std::size_t used = 0;
      out.push_back(std::stod(tok, &used));
      if (used != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw CliError{PF_ERR_INVALID_ARGUMENT, "bad alpha value '" + tok + "'"};
    }
  }
  if (out.empty()) throw CliError{PF_ERR_INVALID_ARGUMENT, "--alphas is empty"};
  return out;
}

int cmd_ablate(Options& o) {
  const int envs = o.envs > 0 ? o.envs : 100;
  const std::vector<double> alphas = parse_alphas(o.alphas);
  auto kv = common_kv(o.common);
  kv.emplace_back("alphas", o.alphas);
  kv.emplace_back("envs", std::to_string(envs));
  kv.emplace_back("context", o.context);
  kv.emplace_back("include-time", o.include_time ? "1" : "0");
  for (auto& p : planner_kv(o.planner)) kv.push_back(p);
  print_config("ablate", kv);
  const fs::path dir = out_dir(o.common);
  ModelPtr model = load_model(o.common, true);
  const pf_bench_config bc = bench_config(o, envs);
  pf_report* r = nullptr;
  check(pf_bench_ablate(&bc, model.get(), alphas.data(), alphas.size(), &r), "ablation");
  ReportPtr report(r);
  write_report(report.get(), dir, "ablation", o.include_time);
  return 0;
}

int cmd_simulate(Options& o) {
  auto kv = common_kv(o.common);
  kv.emplace_back("scenario", o.scenario.empty() ? "built-in" : o.scenario);
  kv.emplace_back("alpha", std::to_string(o.alpha));
  kv.emplace_back("steps", o.steps > 0 ? std::to_string(o.steps) : "scenario");
  print_config("simulate", kv);
  if (o.common.dim != 2) throw CliError{PF_ERR_INVALID_ARGUMENT, "simulate supports --dim 2 only"};
  if (!o.scenario.empty() && !fs::exists(o.scenario)) {
    throw CliError{PF_ERR_NOT_FOUND, "scenario file '" + o.scenario + "' does not exist"};
  }
  const fs::path dir = out_dir(o.common);
  ModelPtr model = load_model(o.common, false);
  if (!model) std::cout << "no --model-path given: replanning with plain RRT*\n";
  pf_sim_result* r = nullptr;
  check(pf_simulate(o.scenario.empty() ? nullptr : o.scenario.c_str(), model.get(), o.common.seed, o.alpha, o.steps, &r),
        "simulation");
  SimPtr sim(r);
  pf_sim_outcome outcome{};
  int steps = 0, plans = 0, clean = 0;
  check(pf_sim_info(sim.get(), &outcome, &steps, &plans, &clean), "simulation info");
  check(pf_sim_write_trace(sim.get(), (dir / "trace.json").string().c_str()), "writing trace");
  if (o.scenario.empty()) check(pf_scenario_write_default((dir / "scenario.json").string().c_str()), "writing scenario");
  std::printf("outcome %s after %d steps, %d plans, collision-free trace: %s\n", pf_sim_outcome_name(outcome), steps,
              plans, clean ? "yes" : "no");
  std::cout << "wrote " << (dir / "trace.json").string() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"planformer: RRT* with a transformer-guided sampler"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(pf_version()));
  Options o;
  pf_planner_config_default(&o.planner);

  auto* gen_envs = app.add_subcommand("gen-envs", "write random environments as env-v1 files");
  add_common(gen_envs, o.common);
  gen_envs->add_option("--count", o.count, "number of environments")->check(CLI::PositiveNumber);

  auto* gen_dataset = app.add_subcommand("gen-dataset", "build an imitation dataset from A* demonstrations");
  add_common(gen_dataset, o.common);
  gen_dataset->add_option("--envs", o.envs, "number of environments (default 500)")->check(CLI::PositiveNumber);
  gen_dataset->add_option("--stride", o.stride, "waypoint downsampling stride")->check(CLI::PositiveNumber);
  gen_dataset->add_option("--dataset", o.dataset, "output file (default <out>/dataset.ds)");

  auto* train = app.add_subcommand("train", "train the sampler model");
  add_common(train, o.common);
  train->add_option("--dataset", o.dataset, "dataset file from gen-dataset");
  train->add_option("--envs", o.envs, "build a dataset of this many environments instead")->check(CLI::PositiveNumber);
  train->add_option("--stride", o.stride, "waypoint stride when building with --envs")->check(CLI::PositiveNumber);
  train->add_option("--epochs", o.epochs, "training epochs")->check(CLI::PositiveNumber);
  train->add_option("--batch-size", o.batch_size, "batch size (0: 256 in 2D, 128 in 3D)")->check(CLI::NonNegativeNumber);
  train->add_option("--lr", o.lr, "Adam learning rate")->check(CLI::PositiveNumber);
  train->add_option("--validation-fraction", o.validation_fraction, "held-out environment fraction")
      ->check(CLI::Range(0.0, 0.9));

  auto* plan = app.add_subcommand("plan", "solve one query, writing an SVG and a CSV row");
  add_common(plan, o.common);
  plan->add_option("--env", o.env_path, "env-v1 file (default: benchmark environment --env-index)");
  plan->add_option("--env-index", o.env_index, "benchmark environment index")->check(CLI::NonNegativeNumber);
  plan->add_option("--method", o.method, "rrt_star or rrt_star_former");
  auto* alpha_opt = plan->add_option("--alpha", o.alpha, "uniform-sampling ratio")->check(CLI::Range(0.0, 1.0));
  plan->add_option("--context", o.context, "model context: best_branch or insertion_order");
  add_planner(plan, o.planner);

  auto* bench = app.add_subcommand("bench", "paired benchmark of planners");
  add_common(bench, o.common);
  bench->add_option("--methods", o.methods, "comma-separated methods");
  bench->add_option("--envs", o.envs, "number of environments (default 100)")->check(CLI::PositiveNumber);
  bench->add_option("--alpha", o.alpha, "uniform-sampling ratio of rrt_star_former")->check(CLI::Range(0.0, 1.0));
  bench->add_option("--context", o.context, "model context: best_branch or insertion_order");
  bench->add_option("--include-time", o.include_time, "write the time_s column");
  add_planner(bench, o.planner);

  auto* ablate = app.add_subcommand("ablate", "sweep the uniform-sampling ratio");
  add_common(ablate, o.common);
  ablate->add_option("--alphas", o.alphas, "comma-separated ratios");
  ablate->add_option("--envs", o.envs, "number of environments (default 100)")->check(CLI::PositiveNumber);
  ablate->add_option("--context", o.context, "model context: best_branch or insertion_order");
  ablate->add_option("--include-time", o.include_time, "write the time_s column");
  add_planner(ablate, o.planner);

  auto* simulate = app.add_subcommand("simulate", "dynamic-obstacle simulation with limited sensing");
  add_common(simulate, o.common);
  simulate->add_option("--scenario", o.scenario, "scenario file (default: built-in scenario)");
  simulate->add_option("--alpha", o.alpha, "uniform-sampling ratio")->check(CLI::Range(0.0, 1.0));
  simulate->add_option("--steps", o.steps, "step limit override")->check(CLI::NonNegativeNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitUsage;
  }

  try {
    resolve_seed(o.common);
    if (gen_envs->parsed()) return cmd_gen_envs(o);
    if (gen_dataset->parsed()) return cmd_gen_dataset(o);
    if (train->parsed()) return cmd_train(o);
    if (plan->parsed()) return cmd_plan(o, alpha_opt->count() > 0);
    if (bench->parsed()) return cmd_bench(o);
    if (ablate->parsed()) return cmd_ablate(o);
    if (simulate->parsed()) return cmd_simulate(o);
  } catch (const CliError& e) {
    std::cerr << "error: " << e.message << '\n';
    return kExitStatusBase + static_cast<int>(e.status);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitStatusBase + static_cast<int>(PF_ERR_INTERNAL);
  }
  return kExitUsage;
}
