#include "planner.hpp"

#include <algorithm>
#include <chrono>
#include <deque>
#include <limits>
#include <sstream>

namespace planformer {

Tree::Tree(const Point& root) : points_{root}, parent_{kNoParent}, cost_{0.0}, children_(1) {}

std::size_t Tree::add(const Point& p, std::size_t parent) {
  const std::size_t id = points_.size();
  points_.push_back(p);
  parent_.push_back(parent);
  cost_.push_back(cost_[parent] + distance(points_[parent], p));
  children_.emplace_back();
  children_[parent].push_back(id);
  return id;
}

void Tree::reparent(std::size_t node, std::size_t new_parent) {
  auto& siblings = children_[parent_[node]];
  siblings.erase(std::find(siblings.begin(), siblings.end(), node));
  parent_[node] = new_parent;
  children_[new_parent].push_back(node);
  std::deque<std::size_t> queue{node};
  while (!queue.empty()) {
    const std::size_t n = queue.front();
    queue.pop_front();
    cost_[n] = cost_[parent_[n]] + distance(points_[parent_[n]], points_[n]);
    for (const std::size_t c : children_[n]) queue.push_back(c);
  }
}

void PlannerConfig::validate() const {
  if (!(step_size > 0.0)) fail(ErrorCode::kInvalidArgument, "step size must be > 0");
  if (!(rewire_radius >= 0.0)) fail(ErrorCode::kInvalidArgument, "rewire radius must be >= 0");
  if (!(goal_bias >= 0.0 && goal_bias <= 1.0)) fail(ErrorCode::kInvalidArgument, "goal bias must be in [0, 1]");
  if (!(goal_threshold > 0.0)) fail(ErrorCode::kInvalidArgument, "goal threshold must be > 0");
  if (max_iterations < 1) fail(ErrorCode::kInvalidArgument, "max_iterations must be >= 1");
  if (optimization_iterations < 0) fail(ErrorCode::kInvalidArgument, "optimization_iterations must be >= 0");
}

double path_cost(std::span<const Point> path) {
  if (path.empty()) fail(ErrorCode::kInvalidArgument, "path_cost of an empty path");
  double c = 0.0;
  for (std::size_t i = 1; i < path.size(); ++i) c += distance(path[i - 1], path[i]);
  return c;
}

std::size_t nearest(const Tree& tree, const Point& x) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  const auto pts = tree.points();
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const double d = squared_distance(pts[i], x);
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

Point steer(const Point& x_rand, const Point& x_nearest, double step) {
  const double d = distance(x_rand, x_nearest);
  if (d <= step) return x_rand;
  return x_nearest + (x_rand - x_nearest) * (step / d);
}

std::vector<std::size_t> nearby(const Tree& tree, const Point& x, double radius) {
  std::vector<std::size_t> out;
  if (!(radius > 0.0)) return out;
  const double r2 = radius * radius;
  const auto pts = tree.points();
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (squared_distance(pts[i], x) <= r2) out.push_back(i);
  }
  return out;
}

std::optional<std::size_t> extend_and_rewire(Tree& tree, const Point& x_next, const Environment& env,
                                             double radius) {
  const std::size_t near = nearest(tree, x_next);
  std::vector<std::size_t> candidates = nearby(tree, x_next, radius);
  if (std::find(candidates.begin(), candidates.end(), near) == candidates.end()) candidates.push_back(near);

  std::size_t parent = kNoParent;
  double best = std::numeric_limits<double>::infinity();
  for (const std::size_t c : candidates) {
    const double via = tree.cost(c) + distance(tree.point(c), x_next);
    if (via < best && is_free_segment(env, tree.point(c), x_next)) {
      best = via;
      parent = c;
    }
  }
  if (parent == kNoParent) return std::nullopt;
  const std::size_t id = tree.add(x_next, parent);

  for (const std::size_t c : candidates) {
    if (c == parent) continue;
    const double via = tree.cost(id) + distance(x_next, tree.point(c));
    if (via < tree.cost(c) && is_free_segment(env, x_next, tree.point(c))) tree.reparent(c, id);
  }
  return id;
}

std::vector<Point> extract_path(const Tree& tree, std::size_t node) {
  if (node >= tree.size()) fail(ErrorCode::kNotFound, "goal node is not in the tree");
  std::vector<Point> path;
  for (std::size_t at = node; at != kNoParent; at = tree.parent(at)) path.push_back(tree.point(at));
  std::reverse(path.begin(), path.end());
  return path;
}

bool should_stop(const Point& x_new, const Point& goal, double threshold) noexcept {
  return squared_distance(x_new, goal) <= threshold * threshold;
}

Point uniform_sample(const Workspace& ws, Rng& rng) {
  Point p = Point::zeros(ws.dim);
  for (int i = 0; i < ws.dim; ++i) p[i] = rng.uniform(0.0, ws.size[static_cast<std::size_t>(i)]);
  return p;
}

Point goal_bias_sample(const Environment& env, double p, Rng& rng) {
  if (rng.uniform() < p) return env.goal;
  return uniform_sample(env.workspace, rng);
}

PlanStreams::PlanStreams(std::uint64_t rng_seed)
    : uniform(derive_seed(rng_seed, "sample")), branch(derive_seed(rng_seed, "branch")) {}

GoalBiasSampler::GoalBiasSampler(double goal_bias) : goal_bias_(goal_bias) {
  if (!(goal_bias >= 0.0 && goal_bias <= 1.0)) fail(ErrorCode::kInvalidArgument, "goal bias must be in [0, 1]");
}

Point GoalBiasSampler::sample(const SampleRequest& request, PlanStreams& streams) {
  return goal_bias_sample(request.env, goal_bias_, streams.uniform);
}

PlanResult plan(const Environment& env_in, Sampler& sampler, const PlannerConfig& config, std::uint64_t rng_seed,
                const PlanHooks& hooks) {
  config.validate();
  validate_query(env_in);
  using Clock = std::chrono::steady_clock;
  const auto t0 = Clock::now();

  Environment env = env_in;
  PlanStreams streams(rng_seed);
  sampler.reset(env);

  PlanResult result;
  result.tree = Tree(env.start);
  Tree& tree = result.tree;
  std::optional<std::size_t>& goal = result.goal_node;

  int opt_iterations = 0;
  auto done = [&] {
    if (!goal) return result.total_iterations >= config.max_iterations;
    if (config.optimization_seconds > 0.0) {
      return std::chrono::duration<double>(Clock::now() - t0).count() - result.time_to_first >=
             config.optimization_seconds;
    }
    return opt_iterations >= config.optimization_iterations;
  };

  while (!done()) {
    const int iteration = result.total_iterations++;
    if (goal) ++opt_iterations;

    if (hooks.update) {
      if (auto updated = hooks.update(iteration, tree)) {
        env = std::move(*updated);
        sampler.reset(env);
      }
    }

    const Point x_rand = sampler.sample(SampleRequest{env, tree, goal.has_value(), iteration}, streams);
    const std::size_t near = nearest(tree, x_rand);
    const Point x_next = steer(x_rand, tree.point(near), config.step_size);
    std::optional<std::size_t> added;
    if (!(x_next == tree.point(near)) && is_free_point(env, x_next)) {
      added = extend_and_rewire(tree, x_next, env, config.rewire_radius);
    }

    if (added) {
      if (!goal) ++result.nodes_explored;
      const std::size_t v = *added;
      const Point& xv = tree.point(v);
      if (should_stop(xv, env.goal, config.goal_threshold) && is_free_segment(env, xv, env.goal)) {
        if (!goal) {
          goal = xv == env.goal ? v : tree.add(env.goal, v);
          result.iterations = result.total_iterations;
          result.initial_cost = tree.cost(*goal);
          result.time_to_first = std::chrono::duration<double>(Clock::now() - t0).count();
          result.success = true;
        } else if (v != *goal && tree.cost(v) + distance(xv, env.goal) < tree.cost(*goal)) {
          tree.reparent(*goal, v);
        }
      }
    }
    if (hooks.observer) hooks.observer->on_iteration(tree, iteration, goal);
  }

  if (goal) {
    result.final_cost = tree.cost(*goal);
    result.path = extract_path(tree, *goal);
  } else {
    result.iterations = result.total_iterations;
    result.time_to_first = std::chrono::duration<double>(Clock::now() - t0).count();
    result.initial_cost = result.final_cost = std::numeric_limits<double>::quiet_NaN();
  }
  return result;
}

bool path_is_feasible(const Environment& env, std::span<const Point> path) {
  if (path.empty() || !(path.front() == env.start) || !(path.back() == env.goal)) return false;
  for (const auto& p : path) {
    if (!is_free_point(env, p)) return false;
  }
  for (std::size_t i = 1; i < path.size(); ++i) {
    if (!is_free_segment(env, path[i - 1], path[i])) return false;
  }
  return true;
}

std::string plan_csv_header() {
  return "method,env_seed,rng_seed,success,time_s,nodes,iterations,initial_cost,final_cost";
}

std::string plan_csv_row(const std::string& method, std::uint64_t env_seed, std::uint64_t rng_seed,
                         const PlanResult& r) {
  std::ostringstream os;
  os.precision(10);
  os << method << ',' << env_seed << ',' << rng_seed << ',' << (r.success ? 1 : 0) << ',' << r.time_to_first << ','
     << r.nodes_explored << ',' << r.iterations << ',';
  if (r.success) os << r.initial_cost << ',' << r.final_cost;
  else os << "nan,nan";
  return os.str();
}

}  // namespace planformer
