#include <doctest.h>

#include <cmath>
#include <limits>

#include "planner.hpp"
#include "support.hpp"

using namespace planformer;
using planformer::test::circle;
using planformer::test::env2d;

namespace {

// Brute-force cost of a node: walk parents and sum edge lengths.
double walked_cost(const Tree& t, std::size_t i) {
  double c = 0.0;
  std::size_t steps = 0;
  while (i != 0) {
    const std::size_t p = t.parent(i);
    c += distance(t.point(i), t.point(p));
    i = p;
    if (++steps > t.size()) return std::numeric_limits<double>::infinity();
  }
  return c;
}

void check_tree(const Tree& t) {
  REQUIRE(t.parent(0) == kNoParent);
  for (std::size_t i = 1; i < t.size(); ++i) {
    const double walked = walked_cost(t, i);
    REQUIRE(std::isfinite(walked));
    REQUIRE(std::abs(walked - t.cost(i)) <= 1e-9);
  }
}

struct Recorder : PlanObserver {
  int calls = 0;
  double last_goal_cost = std::numeric_limits<double>::infinity();
  bool monotone = true;
  void on_iteration(const Tree& tree, int, std::optional<std::size_t> goal) override {
    if (++calls % 20 == 0) check_tree(tree);
    if (goal) {
      const double c = tree.cost(*goal);
      if (c > last_goal_cost + 1e-12) monotone = false;
      last_goal_cost = c;
    }
  }
};

}  // namespace

TEST_CASE("path_cost") {
  const std::vector<Point> a{Point(0, 0), Point(3, 4)};
  CHECK(path_cost(a) == 5.0);
  const std::vector<Point> b{Point(0, 0)};
  CHECK(path_cost(b) == 0.0);
  const std::vector<Point> c{Point(0, 0), Point(1, 0), Point(1, 1)};
  CHECK(path_cost(c) == 2.0);
  CHECK_THROWS_AS(path_cost(std::vector<Point>{}), Error);
}

TEST_CASE("nearest with lowest-index tie breaking") {
  Tree t(Point(0, 0));
  CHECK(nearest(t, Point(9, 9)) == 0);
  t.add(Point(10, 0), 0);
  CHECK(nearest(t, Point(4, 0)) == 0);
  Tree u(Point(0, 0));
  u.add(Point(2, 0), 0);
  CHECK(nearest(u, Point(1, 0)) == 0);
  CHECK(nearest(u, Point(1.1, 0)) == 1);
}

TEST_CASE("steer") {
  CHECK(steer(Point(10, 0), Point(0, 0), 4) == Point(4, 0));
  CHECK(steer(Point(1, 1), Point(0, 0), 4) == Point(1, 1));
  const Point s = steer(Point(3, 4), Point(0, 0), 2.5);
  CHECK(s[0] == doctest::Approx(1.5));
  CHECK(s[1] == doctest::Approx(2.0));
  CHECK(steer(Point(2, 2), Point(2, 2), 4) == Point(2, 2));
}

TEST_CASE("nearby") {
  Tree t(Point(0, 0));
  t.add(Point(3, 0), 0);
  t.add(Point(10, 0), 1);
  CHECK(nearby(t, Point(0, 0), 0.0).empty());
  CHECK(nearby(t, Point(0, 0), 5.0) == std::vector<std::size_t>{0, 1});
  CHECK(nearby(t, Point(0, 0), std::numeric_limits<double>::infinity()).size() == 3);
}

TEST_CASE("extend_and_rewire") {
  const Environment empty = env2d(100, 100);
  SUBCASE("empty nearby set parents to the nearest node") {
    Tree t(Point(0, 0));
    t.add(Point(4, 0), 0);
    const auto i = extend_and_rewire(t, Point(7, 0), empty, 0.0);
    REQUIRE(i);
    CHECK(t.parent(*i) == 1);
    CHECK(t.cost(*i) == doctest::Approx(7.0));
  }
  SUBCASE("node at cost 10 one unit from a new cost-5 node is re-parented at cost 6") {
    Tree t(Point(0, 0));
    const std::size_t q = t.add(Point(3, 4), 0);  // cost 5
    const std::size_t a = t.add(Point(6, 0), q);  // cost 10
    const std::size_t child = t.add(Point(8, 0), a);
    CHECK(t.cost(a) == doctest::Approx(10.0));
    const auto i = extend_and_rewire(t, Point(5, 0), empty, 5.0);
    REQUIRE(i);
    CHECK(t.parent(*i) == 0);
    CHECK(t.cost(*i) == doctest::Approx(5.0));
    CHECK(t.parent(a) == *i);
    CHECK(t.cost(a) == doctest::Approx(6.0));
    CHECK(t.cost(child) == doctest::Approx(8.0));
    CHECK(t.parent(q) == 0);
    check_tree(t);
  }
  SUBCASE("blocked connecting segment prevents re-parenting") {
    const Environment wall = env2d(100, 100, {circle(0, Point(5.75, 0.6), 0.3)});
    Tree t(Point(0, 0));
    t.add(Point(5, 0), 0);
    const std::size_t q = t.add(Point(5, 5), 0);
    const std::size_t a = t.add(Point(6, 1.2), q);
    const double before = t.cost(a);
    const auto i = extend_and_rewire(t, Point(5.5, 0), wall, 2.0);
    REQUIRE(i);
    CHECK(t.parent(a) == q);
    CHECK(t.cost(a) == before);
  }
  SUBCASE("no free connection rejects the extension") {
    const Environment wall = env2d(100, 100, {circle(0, Point(2, 0), 0.5)});
    Tree t(Point(0, 0));
    CHECK_FALSE(extend_and_rewire(t, Point(4, 0), wall, 0.0));
    CHECK(t.size() == 1);
  }
  SUBCASE("radius 0 is plain RRT attachment") {
    Rng rng(3);
    Tree a(Point(50, 50)), b(Point(50, 50));
    for (int k = 0; k < 300; ++k) {
      const Point x = steer(Point(rng.uniform(0, 100), rng.uniform(0, 100)), Point(50, 50), 1e9);
      const Point next = steer(x, a.point(nearest(a, x)), 4.0);
      const std::size_t n = nearest(b, next);
      const auto i = extend_and_rewire(a, next, empty, 0.0);
      REQUIRE(i);
      b.add(next, n);
      CHECK(a.parent(*i) == b.parent(*i));
    }
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a.cost(i) == b.cost(i));
  }
}

TEST_CASE("extract_path") {
  Tree t(Point(0, 0));
  const std::size_t a = t.add(Point(1, 0), 0);
  const std::size_t g = t.add(Point(2, 0), a);
  CHECK(extract_path(t, g) == std::vector<Point>{Point(0, 0), Point(1, 0), Point(2, 0)});
  CHECK(extract_path(t, 0) == std::vector<Point>{Point(0, 0)});
  const std::size_t b = t.add(Point(1.5, 0.1), 0);
  t.reparent(g, b);
  const auto path = extract_path(t, g);
  CHECK(path == std::vector<Point>{Point(0, 0), Point(1.5, 0.1), Point(2, 0)});
  CHECK(path_cost(path) == doctest::Approx(t.cost(g)));
  CHECK_THROWS_AS(extract_path(t, 99), Error);
}

TEST_CASE("should_stop is a closed threshold") {
  CHECK(should_stop(Point(5, 5), Point(5, 5), 4));
  CHECK(should_stop(Point(1, 5), Point(5, 5), 4));
  CHECK_FALSE(should_stop(Point(1 - 1e-9, 5), Point(5, 5), 4));
}

TEST_CASE("goal_bias_sample statistics") {
  const Environment env = env2d(100, 100, {}, Point(1, 1), Point(90, 80));
  Rng rng(17);
  for (int i = 0; i < 1000; ++i) CHECK(goal_bias_sample(env, 1.0, rng) == env.goal);
  const int n = 100000;
  double sx = 0.0, sy = 0.0;
  for (int i = 0; i < n; ++i) {
    const Point p = goal_bias_sample(env, 0.0, rng);
    sx += p[0];
    sy += p[1];
  }
  const double sigma = 100.0 / std::sqrt(12.0) / std::sqrt(static_cast<double>(n));
  CHECK(std::abs(sx / n - 50.0) <= 3 * sigma);
  CHECK(std::abs(sy / n - 50.0) <= 3 * sigma);
  int goals = 0;
  for (int i = 0; i < n; ++i) goals += goal_bias_sample(env, 0.05, rng) == env.goal;
  const double sd = std::sqrt(n * 0.05 * 0.95);
  CHECK(std::abs(goals - n * 0.05) <= 2.576 * sd);
}

TEST_CASE("plan on an empty map") {
  Environment env = env2d(100, 100, {}, Point(10, 10), Point(90, 90));
  GoalBiasSampler sampler(0.05);
  PlannerConfig cfg;
  cfg.optimization_iterations = 300;
  const PlanResult r = plan(env, sampler, cfg, 1);
  REQUIRE(r.success);
  CHECK(r.initial_cost >= distance(env.start, env.goal) - 1e-9);
  CHECK(r.final_cost <= r.initial_cost);
  CHECK(path_is_feasible(env, r.path));
  CHECK(r.path.front() == env.start);
  CHECK(r.path.back() == env.goal);
  CHECK(r.nodes_explored <= r.iterations);
  CHECK(r.total_iterations == r.iterations + 300);
}

TEST_CASE("plan rejects a goal inside an obstacle") {
  Environment env = env2d(100, 100, {circle(0, Point(90, 90), 3)}, Point(10, 10), Point(90, 90));
  GoalBiasSampler sampler;
  try {
    plan(env, sampler, PlannerConfig{}, 1);
    FAIL("expected failure");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kPrecondition);
  }
}

TEST_CASE("plan reports failure when the budget runs out") {
  // Goal enclosed by a ring of obstacles.
  std::vector<Obstacle> ring;
  for (int k = 0; k < 36; ++k) {
    const double a = k * M_PI / 18.0;
    ring.push_back(circle(k, Point(80 + 10 * std::cos(a), 80 + 10 * std::sin(a)), 2.0));
  }
  Environment env = env2d(100, 100, ring, Point(10, 10), Point(80, 80));
  GoalBiasSampler sampler;
  PlannerConfig cfg;
  cfg.max_iterations = 200;
  const PlanResult r = plan(env, sampler, cfg, 1);
  CHECK_FALSE(r.success);
  CHECK(r.iterations == 200);
  CHECK(r.path.empty());
}

TEST_CASE("plan keeps tree invariants and monotone goal cost") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Environment env = generate_random_env(EnvGenSpec::standard_2d(), seed);
    for (double radius : {0.0, 8.0}) {
      GoalBiasSampler sampler;
      PlannerConfig cfg;
      cfg.rewire_radius = radius;
      cfg.optimization_iterations = 400;
      Recorder rec;
      PlanHooks hooks;
      hooks.observer = &rec;
      const PlanResult r = plan(env, sampler, cfg, seed, hooks);
      check_tree(r.tree);
      CHECK(rec.monotone);
      if (r.success) {
        CHECK(path_is_feasible(env, r.path));
        CHECK(path_cost(r.path) == doctest::Approx(r.final_cost));
        CHECK(r.final_cost <= r.initial_cost + 1e-12);
      }
    }
  }
}

TEST_CASE("plan is reproducible per seed") {
  const Environment env = generate_random_env(EnvGenSpec::standard_2d(), 21);
  PlannerConfig cfg;
  cfg.optimization_iterations = 200;
  GoalBiasSampler s1, s2;
  const PlanResult a = plan(env, s1, cfg, 99);
  const PlanResult b = plan(env, s2, cfg, 99);
  CHECK(a.path == b.path);
  CHECK(a.nodes_explored == b.nodes_explored);
  CHECK(a.iterations == b.iterations);
  CHECK(a.final_cost == b.final_cost);
  CHECK(a.tree.points().size() == b.tree.points().size());
}

TEST_CASE("knowledge updates are applied during planning") {
  Environment env = env2d(100, 100, {}, Point(10, 50), Point(90, 50));
  const Obstacle wall = circle(0, Point(50, 50), 20);
  GoalBiasSampler sampler;
  PlannerConfig cfg;
  cfg.optimization_iterations = 100;
  PlanHooks hooks;
  hooks.update = [&](int iteration, const Tree&) -> std::optional<Environment> {
    if (iteration != 0) return std::nullopt;
    Environment e = env;
    e.obstacles.push_back(wall);
    return e;
  };
  const PlanResult r = plan(env, sampler, cfg, 4, hooks);
  REQUIRE(r.success);
  Environment known = env;
  known.obstacles.push_back(wall);
  CHECK(path_is_feasible(known, r.path));
}

TEST_CASE("path_is_feasible checks every condition") {
  const Environment env = env2d(100, 100, {circle(0, Point(50, 50), 5)}, Point(10, 50), Point(90, 50));
  CHECK(path_is_feasible(env, std::vector<Point>{Point(10, 50), Point(50, 60), Point(90, 50)}));
  CHECK_FALSE(path_is_feasible(env, std::vector<Point>{Point(10, 50), Point(90, 50)}));
  CHECK_FALSE(path_is_feasible(env, std::vector<Point>{Point(11, 50), Point(50, 60), Point(90, 50)}));
  CHECK_FALSE(path_is_feasible(env, std::vector<Point>{Point(10, 50), Point(50, 60)}));
  CHECK_FALSE(path_is_feasible(env, std::vector<Point>{}));
}

TEST_CASE("plan CSV row") {
  CHECK(plan_csv_header() == "method,env_seed,rng_seed,success,time_s,nodes,iterations,initial_cost,final_cost");
  PlanResult r;
  r.success = false;
  const std::string row = plan_csv_row("rrt_star", 3, 4, r);
  CHECK(row.rfind("rrt_star,3,4,0,", 0) == 0);
}

TEST_CASE("planner config validation") {
  PlannerConfig c;
  c.step_size = 0;
  CHECK_THROWS_AS(c.validate(), Error);
  c = PlannerConfig{};
  c.goal_bias = 1.5;
  CHECK_THROWS_AS(c.validate(), Error);
  c = PlannerConfig{};
  c.goal_threshold = 0;
  CHECK_THROWS_AS(c.validate(), Error);
  CHECK_THROWS_AS(GoalBiasSampler(-0.1), Error);
}
