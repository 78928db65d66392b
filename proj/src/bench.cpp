#include "bench.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>

#include "json.hpp"

namespace planformer {

const MethodSummary& AggregateReport::summary(const std::string& method) const {
  for (const auto& m : methods) {
    if (m.method == method) return m;
  }
  fail(ErrorCode::kNotFound, "no results for method '" + method + "'");
}

std::uint64_t trial_env_seed(std::uint64_t seed, int i) { return derive_seed(seed, "env", static_cast<std::uint64_t>(i)); }
std::uint64_t trial_rng_seed(std::uint64_t seed, int i) { return derive_seed(seed, "rng", static_cast<std::uint64_t>(i)); }

Environment trial_environment(const BenchConfig& config, int i) {
  EnvGenSpec spec = config.dim == 3 ? EnvGenSpec::standard_3d() : EnvGenSpec::standard_2d();
  spec.corner_fraction = config.corner_fraction;
  const std::uint64_t base = trial_env_seed(config.seed, i);
  // A map whose start/goal regions are blocked is replaced by a derived one.
  for (std::uint64_t k = 0;; ++k) {
    try {
      return generate_random_env(spec, k == 0 ? base : derive_seed(base, "retry", k));
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kGenerationFailed || k >= 100) throw;
    }
  }
}

std::unique_ptr<Sampler> make_sampler(const MethodSpec& method, const BenchConfig& config) {
  if (method.kind == "rrt_star") return std::make_unique<GoalBiasSampler>(config.planner.goal_bias);
  if (method.kind == "rrt_star_former") {
    if (!config.model) fail(ErrorCode::kMissingModel, "rrt_star_former needs a trained model (--model-path)");
    if (config.model->dim() != config.dim) {
      fail(ErrorCode::kDimensionMismatch, "model is " + std::to_string(config.model->dim()) + "-D but the benchmark is " +
                                              std::to_string(config.dim) + "-D");
    }
    return std::make_unique<HybridSampler>(config.model, method.alpha, config.planner.goal_threshold, config.context);
  }
  fail(ErrorCode::kInvalidArgument, "unknown method '" + method.kind + "' (expected rrt_star or rrt_star_former)");
}

TrialMetrics run_trial(const MethodSpec& method, const BenchConfig& config, const Environment& env,
                       std::uint64_t env_seed, std::uint64_t rng_seed, PlanResult* result_out) {
  auto sampler = make_sampler(method, config);
  PlanResult r = plan(env, *sampler, config.planner, rng_seed);
  if (r.success && !path_is_feasible(env, r.path)) {
    fail(ErrorCode::kPrecondition, "planner returned an infeasible path for env seed " + std::to_string(env_seed));
  }
  TrialMetrics m;
  m.method = method.name();
  m.env_seed = env_seed;
  m.rng_seed = rng_seed;
  m.success = r.success;
  m.time_to_first = r.time_to_first;
  m.nodes = r.nodes_explored;
  m.iterations = r.iterations;
  m.initial_cost = r.initial_cost;
  m.final_cost = r.final_cost;
  if (result_out) *result_out = std::move(r);
  return m;
}

AggregateReport run_methods(const std::vector<MethodSpec>& methods, const BenchConfig& config) {
  if (methods.empty()) fail(ErrorCode::kInvalidArgument, "no methods requested");
  if (config.env_count < 1) fail(ErrorCode::kInvalidArgument, "env_count must be >= 1");
  if (config.jobs < 1) fail(ErrorCode::kInvalidArgument, "jobs must be >= 1");
  config.planner.validate();
  for (const auto& m : methods) make_sampler(m, config);  // fail fast on a missing model

  const std::size_t per_env = methods.size();
  std::vector<TrialMetrics> trials(static_cast<std::size_t>(config.env_count) * per_env);
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (int i = next++; i < config.env_count; i = next++) {
      try {
        const Environment env = trial_environment(config, i);
        const auto env_seed = env.seed;
        const auto rng_seed = trial_rng_seed(config.seed, i);
        for (std::size_t k = 0; k < per_env; ++k) {
          trials[static_cast<std::size_t>(i) * per_env + k] = run_trial(methods[k], config, env, env_seed, rng_seed);
        }
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    }
  };
  std::vector<std::thread> threads;
  for (int t = 1; t < std::min(config.jobs, config.env_count); ++t) threads.emplace_back(worker);
  worker();
  for (auto& t : threads) t.join();
  if (error) std::rethrow_exception(error);

  AggregateReport report;
  std::vector<std::string> order;
  for (const auto& m : methods) order.push_back(m.name());
  report.methods = summarize(trials, order);
  report.trials = std::move(trials);
  return report;
}

AggregateReport compare_methods(const std::vector<std::string>& methods, const BenchConfig& config, double alpha) {
  std::vector<MethodSpec> specs;
  for (const auto& m : methods) specs.push_back(MethodSpec{m, alpha, ""});
  return run_methods(specs, config);
}

AggregateReport run_ablation(const std::vector<double>& alphas, const BenchConfig& config) {
  std::vector<MethodSpec> specs;
  for (const double a : alphas) {
    std::ostringstream label;
    label << "rrt_star_former(alpha=" << a << ")";
    specs.push_back(MethodSpec{"rrt_star_former", a, label.str()});
  }
  return run_methods(specs, config);
}

std::vector<MethodSummary> summarize(const std::vector<TrialMetrics>& trials, const std::vector<std::string>& order) {
  std::vector<MethodSummary> out;
  for (const auto& name : order) {
    MethodSummary s;
    s.method = name;
    double nodes = 0.0, iters = 0.0, time = 0.0, init = 0.0, fin = 0.0;
    for (const auto& t : trials) {
      if (t.method != name) continue;
      ++s.trials;
      nodes += t.nodes;
      iters += t.iterations;
      time += t.time_to_first;
      if (t.success) {
        ++s.successes;
        init += t.initial_cost;
        fin += t.final_cost;
      }
    }
    const double nan = std::numeric_limits<double>::quiet_NaN();
    const double n = s.trials;
    s.success_rate = s.trials ? 100.0 * s.successes / n : 0.0;
    s.mean_nodes = s.trials ? nodes / n : nan;
    s.mean_iterations = s.trials ? iters / n : nan;
    s.mean_time = s.trials ? time / n : nan;
    s.mean_initial_cost = s.successes ? init / s.successes : nan;
    s.mean_final_cost = s.successes ? fin / s.successes : nan;
    out.push_back(s);
  }
  return out;
}

std::string metrics_csv(const std::vector<TrialMetrics>& trials, bool include_time) {
  std::ostringstream os;
  os.precision(10);
  os << (include_time ? plan_csv_header() : "method,env_seed,rng_seed,success,nodes,iterations,initial_cost,final_cost")
     << '\n';
  for (const auto& t : trials) {
    os << t.method << ',' << t.env_seed << ',' << t.rng_seed << ',' << (t.success ? 1 : 0) << ',';
    if (include_time) os << t.time_to_first << ',';
    os << t.nodes << ',' << t.iterations << ',';
    if (t.success) os << t.initial_cost << ',' << t.final_cost;
    else os << "nan,nan";
    os << '\n';
  }
  return os.str();
}

std::string summary_text(const AggregateReport& report) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(2);
  os << std::left << std::setw(34) << "method" << std::right << std::setw(8) << "trials" << std::setw(10) << "success%"
     << std::setw(10) << "nodes" << std::setw(12) << "iterations" << std::setw(10) << "time_s" << std::setw(13)
     << "initial_cost" << std::setw(12) << "final_cost" << '\n';
  for (const auto& m : report.methods) {
    os << std::left << std::setw(34) << m.method << std::right << std::setw(8) << m.trials << std::setw(10)
       << m.success_rate << std::setw(10) << m.mean_nodes << std::setw(12) << m.mean_iterations << std::setw(10)
       << std::setprecision(4) << m.mean_time << std::setprecision(2) << std::setw(13) << m.mean_initial_cost
       << std::setw(12) << m.mean_final_cost << '\n';
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// SVG

namespace {

std::string fmt(double v) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(3) << v;
  return os.str();
}

}  // namespace

std::string render_svg(const Environment& env, const Tree* tree, const std::vector<Point>& path) {
  const double w = env.workspace.size[0], h = env.workspace.size[1];
  const double scale = 6.0;
  // y grows upward in map coordinates.
  auto X = [&](double x) { return fmt(x * scale); };
  auto Y = [&](double y) { return fmt((h - y) * scale); };
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fmt(w * scale) << "\" height=\"" << fmt(h * scale)
     << "\" viewBox=\"0 0 " << fmt(w * scale) << ' ' << fmt(h * scale) << "\">\n";
  os << "<rect class=\"workspace\" x=\"0\" y=\"0\" width=\"" << fmt(w * scale) << "\" height=\"" << fmt(h * scale)
     << "\" fill=\"white\" stroke=\"black\"/>\n";
  for (const auto& o : env.obstacles) {
    os << "<circle class=\"obstacle\" cx=\"" << X(o.center[0]) << "\" cy=\"" << Y(o.center[1]) << "\" r=\""
       << fmt(o.radius * scale) << "\" fill=\"" << (o.moving() ? "#d08080" : "#808080") << "\"/>\n";
  }
  if (tree) {
    for (std::size_t i = 1; i < tree->size(); ++i) {
      const Point& a = tree->point(tree->parent(i));
      const Point& b = tree->point(i);
      os << "<line class=\"tree\" x1=\"" << X(a[0]) << "\" y1=\"" << Y(a[1]) << "\" x2=\"" << X(b[0]) << "\" y2=\""
         << Y(b[1]) << "\" stroke=\"#4a90d9\" stroke-width=\"1\"/>\n";
    }
  }
  if (path.size() >= 2) {
    os << "<polyline class=\"path\" fill=\"none\" stroke=\"#d62728\" stroke-width=\"3\" points=\"";
    for (std::size_t i = 0; i < path.size(); ++i) os << (i ? " " : "") << X(path[i][0]) << ',' << Y(path[i][1]);
    os << "\"/>\n";
  }
  os << "<circle class=\"start\" cx=\"" << X(env.start[0]) << "\" cy=\"" << Y(env.start[1])
     << "\" r=\"9\" fill=\"#2ca02c\"/>\n";
  os << "<circle class=\"goal\" cx=\"" << X(env.goal[0]) << "\" cy=\"" << Y(env.goal[1])
     << "\" r=\"9\" fill=\"#ff7f0e\"/>\n";
  os << "</svg>\n";
  return os.str();
}

void write_svg(const std::string& path, const Environment& env, const Tree* tree, const std::vector<Point>& plan_path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::kIo, "cannot open '" + path + "' for writing");
  out << render_svg(env, tree, plan_path);
  if (!out) fail(ErrorCode::kIo, "write failed for '" + path + "'");
}

// ---------------------------------------------------------------------------
// Dynamic simulation

void Scenario::validate() const {
  // A covered goal is a legitimate scenario (it ends in a timeout); everything else must be a valid query.
  Environment q = truth;
  std::erase_if(q.obstacles, [&](const Obstacle& o) { return squared_distance(o.center, q.goal) <= o.radius * o.radius; });
  validate_query(q);
  if (!(sensing_radius > 0.0)) fail(ErrorCode::kInvalidArgument, "sensing_radius must be positive");
  if (!(robot_speed > 0.0)) fail(ErrorCode::kInvalidArgument, "robot_speed must be positive");
  if (max_steps < 1) fail(ErrorCode::kInvalidArgument, "max_steps must be >= 1");
  if (replan_every < 1) fail(ErrorCode::kInvalidArgument, "replan_every must be >= 1");
  if (!(moving_margin >= 0.0)) fail(ErrorCode::kInvalidArgument, "moving_margin must be >= 0");
  planner.validate();
}

std::string to_string(SimOutcome outcome) {
  switch (outcome) {
    case SimOutcome::kReached: return "reached";
    case SimOutcome::kCollided: return "collided";
    case SimOutcome::kTimeout: return "timeout";
  }
  return "unknown";
}

Scenario scripted_scenario() {
  Scenario s;
  Environment& e = s.truth;
  e.workspace = Workspace{2, {100.0, 100.0, 0.0}};
  e.start = Point(10.0, 50.0);
  e.goal = Point(90.0, 50.0);
  e.seed = 0;
  auto add = [&](int id, Point c, double r) {
    Obstacle o;
    o.id = id;
    o.center = c;
    o.radius = r;
    e.obstacles.push_back(o);
  };
  add(0, Point(28.0, 62.0), 9.0);
  add(1, Point(30.0, 32.0), 8.0);
  add(2, Point(68.0, 66.0), 8.0);
  add(3, Point(70.0, 36.0), 9.0);
  // Crosses the corridor between the two pairs, unseen until inside the sensing range.
  Obstacle mover;
  mover.id = 4;
  mover.center = Point(50.0, 88.0);
  mover.radius = 5.0;
  mover.velocity = Point(0.0, -1.0);
  mover.hidden = true;
  e.obstacles.push_back(mover);
  s.sensing_radius = 15.0;
  s.robot_speed = 1.0;
  s.max_steps = 300;
  s.planner.optimization_iterations = 300;
  return s;
}

Scenario scenario_from_json(const std::string& text) {
  Scenario s;
  try {
    const auto j = nlohmann::json::parse(text);
    s.truth = env_from_json(text);
    s.sensing_radius = j.value("sensing_radius", s.sensing_radius);
    s.robot_speed = j.value("robot_speed", s.robot_speed);
    s.max_steps = j.value("max_steps", s.max_steps);
    s.replan_every = j.value("replan_every", s.replan_every);
    s.moving_margin = j.value("moving_margin", s.moving_margin);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kFormat, std::string("bad scenario file: ") + e.what());
  }
  s.validate();
  return s;
}

std::string scenario_to_json(const Scenario& s) {
  auto j = nlohmann::json::parse(env_to_json(s.truth));
  j["sensing_radius"] = s.sensing_radius;
  j["robot_speed"] = s.robot_speed;
  j["max_steps"] = s.max_steps;
  j["replan_every"] = s.replan_every;
  j["moving_margin"] = s.moving_margin;
  return j.dump(2) + "\n";
}

namespace {

Environment planning_view(const Environment& known, double margin) {
  Environment out = known;
  for (auto& o : out.obstacles) {
    if (o.moving()) o.radius += margin;
  }
  return out;
}

bool path_blocked(const Environment& env, const Point& pose, const std::vector<Point>& path) {
  Point prev = pose;
  for (const auto& p : path) {
    if (!is_free_segment(env, prev, p)) return true;
    prev = p;
  }
  return false;
}

// Moves along the polyline by up to `dist`; consumed waypoints are removed.
Point advance(const Point& pose, std::vector<Point>& path, double dist) {
  Point x = pose;
  while (!path.empty() && dist > 0.0) {
    const double d = distance(x, path.front());
    if (d <= dist) {
      x = path.front();
      path.erase(path.begin());
      dist -= d;
    } else {
      x = x + (path.front() - x) * (dist / d);
      dist = 0.0;
    }
  }
  return x;
}

}  // namespace

SimResult dynamic_sim(const Scenario& scenario, std::shared_ptr<const SamplerModel> model, std::uint64_t seed,
                      double alpha) {
  scenario.validate();
  Environment truth = scenario.truth;
  Environment known = truth;
  std::erase_if(known.obstacles, [](const Obstacle& o) { return o.hidden; });

  SimResult result;
  Point pose = truth.start;
  std::vector<Point> path;  // remaining waypoints after pose
  int since_plan = 0;

  for (int t = 0; t < scenario.max_steps; ++t) {
    truth = step_dynamic(truth, 1);
    const ObstacleDelta delta = sense_update(truth, known, pose, t, scenario.sensing_radius);
    known = apply_delta(known, delta);
    const bool dynamic_known = std::any_of(known.obstacles.begin(), known.obstacles.end(),
                                           [](const Obstacle& o) { return o.moving(); });
    Environment view = planning_view(known, scenario.moving_margin);

    SimStep step;
    step.t = t;
    const bool periodic = dynamic_known && since_plan >= scenario.replan_every;
    const bool invalid = path.empty() || path_blocked(view, pose, path);
    if (invalid || !delta.revealed.empty() || periodic) {
      Environment query = view;
      query.start = pose;
      query.goal = truth.goal;
      if (!is_free_point(query, pose)) {
        // Inside a margin: plan against the bare obstacles to get out.
        query = known;
        query.start = pose;
        query.goal = truth.goal;
      }
      if (is_free_point(query, pose) && is_free_point(query, query.goal)) {
        std::unique_ptr<Sampler> sampler;
        if (model) sampler = std::make_unique<HybridSampler>(model, alpha, scenario.planner.goal_threshold);
        else sampler = std::make_unique<GoalBiasSampler>(scenario.planner.goal_bias);
        const PlanResult r = plan(query, *sampler, scenario.planner, derive_seed(seed, "replan", static_cast<std::uint64_t>(result.plans)));
        ++result.plans;
        step.replanned = true;
        since_plan = 0;
        if (r.success) {
          path.assign(r.path.begin() + 1, r.path.end());
        } else if (invalid) {
          path.clear();  // wait in place
        }
      } else if (invalid) {
        path.clear();
      }
    }
    ++since_plan;

    const Point next = advance(pose, path, scenario.robot_speed);
    step.collision_free = is_free_segment(truth, pose, next);
    pose = next;
    step.pose = pose;
    for (const auto& o : truth.obstacles) step.obstacle_centers.push_back(o.center);
    step.path = path;
    result.trace.push_back(std::move(step));
    result.steps = t + 1;
    if (!result.trace.back().collision_free) {
      result.outcome = SimOutcome::kCollided;
      return result;
    }
    if (path.empty() && pose == truth.goal) {
      result.outcome = SimOutcome::kReached;
      return result;
    }
  }
  result.outcome = SimOutcome::kTimeout;
  return result;
}

std::string trace_json(const SimResult& result) {
  auto pt = [](const Point& p) {
    nlohmann::json a = nlohmann::json::array();
    for (int i = 0; i < p.dim(); ++i) a.push_back(p[i]);
    return a;
  };
  nlohmann::json steps = nlohmann::json::array();
  for (const auto& s : result.trace) {
    nlohmann::json obstacles = nlohmann::json::array();
    for (const auto& c : s.obstacle_centers) obstacles.push_back(pt(c));
    nlohmann::json path = nlohmann::json::array();
    for (const auto& p : s.path) path.push_back(pt(p));
    steps.push_back({{"t", s.t}, {"pose", pt(s.pose)}, {"replanned", s.replanned},
                     {"collision_free", s.collision_free}, {"obstacles", obstacles}, {"path", path}});
  }
  return nlohmann::json{{"outcome", to_string(result.outcome)}, {"steps", result.steps}, {"plans", result.plans},
                        {"trace", steps}}
             .dump(1) + "\n";
}

}  // namespace planformer
