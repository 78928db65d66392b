#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "env.hpp"

namespace planformer {

inline constexpr std::size_t kNoParent = static_cast<std::size_t>(-1);

/// RRT* search tree. Node 0 is the root; insertion order is preserved and nodes
/// are never removed, so a node index is stable for the life of the tree.
class Tree {
 public:
  explicit Tree(const Point& root);

  std::size_t size() const noexcept { return points_.size(); }
  const Point& point(std::size_t i) const { return points_[i]; }
  std::span<const Point> points() const noexcept { return points_; }
  std::size_t parent(std::size_t i) const { return parent_[i]; }
  double cost(std::size_t i) const { return cost_[i]; }
  const std::vector<std::size_t>& children(std::size_t i) const { return children_[i]; }

  std::size_t add(const Point& p, std::size_t parent);

  /// Moves `node` under `new_parent` and recomputes costs of its whole subtree.
  void reparent(std::size_t node, std::size_t new_parent);

 private:
  std::vector<Point> points_;
  std::vector<std::size_t> parent_;
  std::vector<double> cost_;
  std::vector<std::vector<std::size_t>> children_;
};

struct PlannerConfig {
  double step_size = 4.0;
  double rewire_radius = 0.0;
  double goal_bias = 0.05;
  double goal_threshold = 4.0;
  int max_iterations = 2000;
  /// Iterations run after the first solution to improve it.
  int optimization_iterations = 5000;
  /// When > 0, the optimization phase is bounded by wall-clock seconds instead.
  double optimization_seconds = 0.0;

  void validate() const;
};

double path_cost(std::span<const Point> path);
std::size_t nearest(const Tree& tree, const Point& x);
Point steer(const Point& x_rand, const Point& x_nearest, double step);
std::vector<std::size_t> nearby(const Tree& tree, const Point& x, double radius);

/// Inserts x_next under the cheapest collision-free parent among the nearby set
/// and the nearest node, then rewires nearby nodes through it when strictly
/// cheaper. Returns the new node index, or nullopt when no free connection exists.
std::optional<std::size_t> extend_and_rewire(Tree& tree, const Point& x_next, const Environment& env, double radius);

/// Root-to-node point sequence.
std::vector<Point> extract_path(const Tree& tree, std::size_t node);

/// Closed-threshold goal test.
bool should_stop(const Point& x_new, const Point& goal, double threshold) noexcept;

Point uniform_sample(const Workspace& ws, Rng& rng);
Point goal_bias_sample(const Environment& env, double p, Rng& rng);

struct PlanStreams {
  Rng uniform;
  Rng branch;

  explicit PlanStreams(std::uint64_t rng_seed);
};

struct SampleRequest {
  const Environment& env;
  const Tree& tree;
  bool goal_connected = false;
  int iteration = 0;
};

class Sampler {
 public:
  virtual ~Sampler() = default;
  virtual Point sample(const SampleRequest& request, PlanStreams& streams) = 0;
  /// Called at the start of a plan and whenever the known environment changes.
  virtual void reset(const Environment& /*env*/) {}
  virtual std::string name() const = 0;
};

class GoalBiasSampler final : public Sampler {
 public:
  explicit GoalBiasSampler(double goal_bias = 0.05);
  Point sample(const SampleRequest& request, PlanStreams& streams) override;
  std::string name() const override { return "rrt_star"; }

 private:
  double goal_bias_;
};

struct PlanResult {
  std::vector<Point> path;
  double initial_cost = 0.0;
  double final_cost = 0.0;
  int nodes_explored = 0;
  int iterations = 0;
  int total_iterations = 0;
  double time_to_first = 0.0;
  bool success = false;
  Tree tree{Point(0.0, 0.0)};
  std::optional<std::size_t> goal_node;
};

class PlanObserver {
 public:
  virtual ~PlanObserver() = default;
  virtual void on_iteration(const Tree& tree, int iteration, std::optional<std::size_t> goal_node) = 0;
};

/// Sensor hook run at the top of every iteration; returns the updated known
/// environment when the obstacle set changed.
using KnowledgeUpdate = std::function<std::optional<Environment>(int iteration, const Tree& tree)>;

struct PlanHooks {
  PlanObserver* observer = nullptr;
  KnowledgeUpdate update;
};

PlanResult plan(const Environment& env, Sampler& sampler, const PlannerConfig& config, std::uint64_t rng_seed,
                const PlanHooks& hooks = {});

/// True iff the path starts at env.start, ends at env.goal, and every point and
/// segment lies in free space.
bool path_is_feasible(const Environment& env, std::span<const Point> path);

std::string plan_csv_header();
std::string plan_csv_row(const std::string& method, std::uint64_t env_seed, std::uint64_t rng_seed,
                         const PlanResult& result);

}  // namespace planformer
