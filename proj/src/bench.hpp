#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "env.hpp"
#include "model.hpp"
#include "planner.hpp"

namespace planformer {

struct TrialMetrics {
  std::string method;
  std::uint64_t env_seed = 0;
  std::uint64_t rng_seed = 0;
  bool success = false;
  double time_to_first = 0.0;
  int nodes = 0;
  int iterations = 0;
  double initial_cost = 0.0;  // NaN on failure
  double final_cost = 0.0;    // NaN on failure
};

struct MethodSummary {
  std::string method;
  int trials = 0;
  int successes = 0;
  double success_rate = 0.0;  // percent
  double mean_nodes = 0.0;    // over all trials
  double mean_iterations = 0.0;
  double mean_time = 0.0;
  double mean_initial_cost = 0.0;  // over successful trials, NaN when none
  double mean_final_cost = 0.0;
};

struct AggregateReport {
  std::vector<TrialMetrics> trials;   // ordered by environment, then method
  std::vector<MethodSummary> methods; // in request order
  const MethodSummary& summary(const std::string& method) const;
};

/// A sampler configuration under test. "rrt_star" uses goal-bias sampling,
/// "rrt_star_former" the hybrid sampler with the given alpha.
struct MethodSpec {
  std::string kind;
  double alpha = 0.5;
  std::string label;  // reported method name; defaults to kind

  std::string name() const { return label.empty() ? kind : label; }
};

struct BenchConfig {
  int dim = 2;
  int env_count = 100;
  std::uint64_t seed = 0;
  PlannerConfig planner;
  int jobs = 1;
  std::shared_ptr<const SamplerModel> model;
  ContextMode context = ContextMode::kBestBranch;
  double corner_fraction = 0.0;  // start/goal placement, see EnvGenSpec
};

/// Seeds of trial i; every method sees the same pair. The environment's own
/// seed differs from trial_env_seed only when that map had to be replaced.
std::uint64_t trial_env_seed(std::uint64_t seed, int i);
std::uint64_t trial_rng_seed(std::uint64_t seed, int i);
Environment trial_environment(const BenchConfig& config, int i);

std::unique_ptr<Sampler> make_sampler(const MethodSpec& method, const BenchConfig& config);

/// One planning run; the path is re-validated before metrics are recorded.
TrialMetrics run_trial(const MethodSpec& method, const BenchConfig& config, const Environment& env,
                       std::uint64_t env_seed, std::uint64_t rng_seed, PlanResult* result_out = nullptr);

AggregateReport run_methods(const std::vector<MethodSpec>& methods, const BenchConfig& config);
AggregateReport compare_methods(const std::vector<std::string>& methods, const BenchConfig& config, double alpha = 0.5);
AggregateReport run_ablation(const std::vector<double>& alphas, const BenchConfig& config);

std::vector<MethodSummary> summarize(const std::vector<TrialMetrics>& trials, const std::vector<std::string>& order);

std::string metrics_csv(const std::vector<TrialMetrics>& trials, bool include_time = true);
std::string summary_text(const AggregateReport& report);

/// 2-D drawing at map scale (3-D environments are projected onto x-y).
std::string render_svg(const Environment& env, const Tree* tree, const std::vector<Point>& path);
void write_svg(const std::string& path, const Environment& env, const Tree* tree, const std::vector<Point>& plan_path);

// ---------------------------------------------------------------------------
// Dynamic obstacles with limited sensing.

struct Scenario {
  Environment truth;  // obstacles flagged hidden are unknown until sensed
  double sensing_radius = 15.0;
  double robot_speed = 1.0;
  int max_steps = 300;
  /// Periodic replanning interval while moving obstacles are known.
  int replan_every = 5;
  /// Extra radius given to known moving obstacles when planning.
  double moving_margin = 3.0;
  PlannerConfig planner;

  void validate() const;
};

enum class SimOutcome { kReached, kCollided, kTimeout };
std::string to_string(SimOutcome outcome);

struct SimStep {
  int t = 0;
  Point pose;
  bool replanned = false;
  bool collision_free = true;
  std::vector<Point> obstacle_centers;
  std::vector<Point> path;  // remaining planned path from pose
};

struct SimResult {
  SimOutcome outcome = SimOutcome::kTimeout;
  int steps = 0;
  int plans = 0;
  std::vector<SimStep> trace;
};

/// The scripted scenario: four static obstacles between start and goal and one
/// hidden obstacle crossing the route, sensed within a finite radius.
Scenario scripted_scenario();

Scenario scenario_from_json(const std::string& text);
std::string scenario_to_json(const Scenario& s);

/// Planner hybrid sampler when model is set, goal-bias sampling otherwise.
SimResult dynamic_sim(const Scenario& scenario, std::shared_ptr<const SamplerModel> model, std::uint64_t seed,
                      double alpha = 0.5);

std::string trace_json(const SimResult& result);

}  // namespace planformer
