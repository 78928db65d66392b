#include <doctest.h>

#include <cmath>
#include <sstream>

#include "env.hpp"
#include "support.hpp"

using namespace planformer;
using planformer::test::circle;
using planformer::test::env2d;
using planformer::test::env3d;

TEST_CASE("generate_random_env draws counts and radii from the ranges") {
  const EnvGenSpec spec = EnvGenSpec::standard_2d();
  for (std::uint64_t seed : {7u, 8u, 9u, 10u}) {
    const Environment env = generate_random_env(spec, seed);
    CHECK(env.obstacles.size() >= 16);
    CHECK(env.obstacles.size() <= 20);
    for (const auto& o : env.obstacles) {
      CHECK(o.radius >= 0.0);
      CHECK(o.radius <= 12.0);
      CHECK(env.workspace.contains(o.center));
    }
    CHECK(is_free_point(env, env.start));
    CHECK(is_free_point(env, env.goal));
    CHECK_FALSE(env.start == env.goal);
    CHECK(env.seed == seed);
  }
}

TEST_CASE("generate_random_env in 3-D uses spheres in a 50^3 box") {
  const Environment env = generate_random_env(EnvGenSpec::standard_3d(), 3);
  CHECK(env.dim() == 3);
  CHECK(env.obstacles.size() >= 6);
  CHECK(env.obstacles.size() <= 10);
  CHECK(env.workspace.size[2] == 50.0);
  CHECK(env.start.dim() == 3);
}

TEST_CASE("generate_random_env with no obstacles") {
  EnvGenSpec spec = EnvGenSpec::standard_2d();
  spec.min_obstacles = spec.max_obstacles = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Environment env = generate_random_env(spec, seed);
    CHECK(env.obstacles.empty());
    CHECK(is_free_point(env, env.start));
    CHECK(is_free_point(env, env.goal));
  }
}

TEST_CASE("generate_random_env is a pure function of spec and seed") {
  const EnvGenSpec spec = EnvGenSpec::standard_2d();
  CHECK(env_to_json(generate_random_env(spec, 42)) == env_to_json(generate_random_env(spec, 42)));
  CHECK(env_to_json(generate_random_env(spec, 42)) != env_to_json(generate_random_env(spec, 43)));
}

TEST_CASE("corner placement puts start and goal in opposite corner boxes") {
  EnvGenSpec spec = EnvGenSpec::standard_2d();
  spec.corner_fraction = 0.1;
  spec.min_obstacles = spec.max_obstacles = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Environment env = generate_random_env(spec, seed);
    for (int a = 0; a < 2; ++a) {
      CHECK(env.start[a] <= 10.0);
      CHECK(env.goal[a] >= 90.0);
    }
  }
  spec.corner_fraction = 0.6;
  CHECK_THROWS_AS(generate_random_env(spec, 1), Error);
}

TEST_CASE("generation fails when free space is too small") {
  EnvGenSpec spec = EnvGenSpec::standard_2d();
  spec.min_obstacles = spec.max_obstacles = 1;
  spec.min_radius = spec.max_radius = 500.0;
  spec.max_attempts = 20;
  try {
    generate_random_env(spec, 1);
    FAIL("expected failure");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kGenerationFailed);
  }
}

TEST_CASE("is_free_point uses closed obstacles") {
  const Environment env = env2d(10, 10, {circle(0, Point(5, 5), 2)});
  CHECK_FALSE(is_free_point(env, Point(5, 5)));
  CHECK(is_free_point(env, Point(0, 0)));
  CHECK_FALSE(is_free_point(env, Point(7, 5)));
  CHECK(is_free_point(env, Point(7.0001, 5)));
  CHECK_FALSE(is_free_point(env, Point(-0.1, 5)));
  CHECK_FALSE(is_free_point(env, Point(5, 10.1)));
}

TEST_CASE("is_free_segment examples") {
  const Environment a = env2d(20, 20, {circle(0, Point(5, 1), 0.5)});
  CHECK(is_free_segment(a, Point(0, 0), Point(10, 0)));
  CHECK(planformer::test::sampled_segment_free(a, Point(0, 0), Point(10, 0)));

  const Environment b = env2d(20, 20, {circle(0, Point(5, 0.4), 0.5)});
  CHECK_FALSE(is_free_segment(b, Point(0, 0), Point(10, 0)));
  CHECK_FALSE(planformer::test::sampled_segment_free(b, Point(0, 0), Point(10, 0)));

  CHECK(is_free_segment(a, Point(8, 8), Point(8, 8)));
  CHECK_FALSE(is_free_segment(a, Point(5, 1), Point(5, 1)));
}

TEST_CASE("is_free_segment is symmetric and agrees with dense sampling") {
  Rng rng(5);
  int disagreements = 0, cases = 0;
  for (int trial = 0; trial < 300; ++trial) {
    const Environment env = generate_random_env(EnvGenSpec::standard_2d(), static_cast<std::uint64_t>(trial % 20));
    const Point p(rng.uniform(0, 100), rng.uniform(0, 100));
    const Point q(rng.uniform(0, 100), rng.uniform(0, 100));
    const bool ab = is_free_segment(env, p, q);
    CHECK(ab == is_free_segment(env, q, p));
    // Sampling can miss a grazing contact but never reports a collision the analytic test misses.
    const bool sampled = planformer::test::sampled_segment_free(env, p, q);
    if (ab) CHECK(sampled);
    disagreements += ab != sampled;
    ++cases;
  }
  CHECK(disagreements <= cases / 100);
}

TEST_CASE("squared_distance_to_segment") {
  CHECK(squared_distance_to_segment(Point(5, 1), Point(0, 0), Point(10, 0)) == doctest::Approx(1.0));
  CHECK(squared_distance_to_segment(Point(-3, 4), Point(0, 0), Point(10, 0)) == doctest::Approx(25.0));
  CHECK(squared_distance_to_segment(Point(1, 1), Point(0, 0), Point(0, 0)) == doctest::Approx(2.0));
}

TEST_CASE("rasterize examples") {
  const CostMap empty = rasterize(env2d(4, 4));
  CHECK(empty.cells.size() == 16);
  for (auto c : empty.cells) CHECK(c == 0);

  const CostMap full = rasterize(env2d(4, 4, {circle(0, Point(2, 2), 10)}));
  for (auto c : full.cells) CHECK(c == 1);

  const CostMap disk = rasterize(env2d(100, 100, {circle(0, Point(50, 50), 10)}));
  long count = 0;
  for (auto c : disk.cells) count += c;
  // Independent count: cell centers strictly outside the closed disk are free.
  long oracle = 0;
  for (int i = 0; i < 100; ++i) {
    for (int j = 0; j < 100; ++j) {
      const double dx = i + 0.5 - 50.0, dy = j + 0.5 - 50.0;
      oracle += dx * dx + dy * dy <= 100.0;
    }
  }
  CHECK(count == oracle);
  CHECK(std::abs(count - M_PI * 100.0) <= 0.04 * M_PI * 100.0);
}

TEST_CASE("rasterize agrees with is_free_point at every cell center") {
  for (std::uint64_t seed : {1u, 2u}) {
    const Environment env = generate_random_env(EnvGenSpec::standard_2d(), seed);
    const CostMap map = rasterize(env);
    for (int i = 0; i < 100; ++i) {
      for (int j = 0; j < 100; ++j) {
        REQUIRE(map.occupied(i, j) == !is_free_point(env, Point(i + 0.5, j + 0.5)));
      }
    }
  }
  const Environment env = generate_random_env(EnvGenSpec::standard_3d(), 4);
  const CostMap map = rasterize(env);
  CHECK(map.cell_count() == 50u * 50u * 50u);
  for (int i = 0; i < 50; ++i) {
    for (int j = 0; j < 50; ++j) {
      for (int k = 0; k < 50; ++k) {
        REQUIRE(map.occupied(i, j, k) == !is_free_point(env, Point(i + 0.5, j + 0.5, k + 0.5)));
      }
    }
  }
}

TEST_CASE("cell_of floors and clamps") {
  const CostMap map = rasterize(env2d(10, 10));
  CHECK(cell_of(map, Point(3.7, 9.99)).c == std::array<int, 3>{3, 9, 0});
  CHECK(cell_of(map, Point(10.0, 0.0)).c == std::array<int, 3>{9, 0, 0});
  CHECK(cell_center(2, Cell{{3, 4, 0}}) == Point(3.5, 4.5));
}

TEST_CASE("sense_update") {
  Environment truth = env2d(100, 100, {circle(0, Point(20, 20), 3)});
  SUBCASE("fully known static environment gives an empty delta") {
    CHECK(sense_update(truth, truth, Point(20, 30), 0, 15).empty());
  }
  Obstacle hidden = circle(1, Point(50, 50), 4);
  hidden.hidden = true;
  truth.obstacles.push_back(hidden);
  Environment known = truth;
  known.obstacles.pop_back();
  SUBCASE("out of range stays hidden") {
    CHECK(sense_update(truth, known, Point(50, 30.9), 0, 15).empty());
  }
  SUBCASE("surface inside the sensing ball is revealed") {
    const ObstacleDelta d = sense_update(truth, known, Point(50, 31), 0, 15);
    REQUIRE(d.revealed.size() == 1);
    CHECK(d.revealed[0].id == 1);
    CHECK_FALSE(d.revealed[0].hidden);
    const Environment after = apply_delta(known, d);
    CHECK(after.obstacles.size() == 2);
    CHECK(sense_update(truth, after, Point(50, 31), 0, 15).empty());
  }
  SUBCASE("a known obstacle that moved is reported") {
    Environment moved = truth;
    moved.obstacles[0].center = Point(22, 20);
    const ObstacleDelta d = sense_update(moved, truth, Point(20, 30), 1, 15);
    REQUIRE(d.moved.size() == 1);
    CHECK(d.moved[0].first == 0);
    CHECK(apply_delta(truth, d).obstacles[0].center == Point(22, 20));
  }
}

TEST_CASE("step_dynamic") {
  Obstacle still = circle(0, Point(5, 5), 1);
  still.velocity = Point(0, 0);
  Environment env = env2d(100, 100, {still});
  CHECK(env_to_json(step_dynamic(env, 10)) == env_to_json(env));

  Obstacle m = circle(0, Point(5, 5), 1);
  m.velocity = Point(1, 0);
  env.obstacles = {m};
  CHECK(step_dynamic(env, 3).obstacles[0].center == Point(8, 5));

  m.center = Point(99, 5);
  m.velocity = Point(2, 0);
  env.obstacles = {m};
  const Environment r = step_dynamic(env, 1);
  CHECK(r.obstacles[0].center[0] == doctest::Approx(98.0));
  CHECK(r.obstacles[0].center[1] == doctest::Approx(5.0));
  CHECK((*r.obstacles[0].velocity)[0] == doctest::Approx(-2.0));

  // Stepping in pieces equals stepping at once when the reflected velocity is carried.
  m.center = Point(90, 40);
  m.velocity = Point(3, -2);
  env.obstacles = {m};
  const Environment once = step_dynamic(env, 17);
  const Environment twice = step_dynamic(step_dynamic(env, 9), 8);
  CHECK(once.obstacles[0].center[0] == doctest::Approx(twice.obstacles[0].center[0]));
  CHECK(once.obstacles[0].center[1] == doctest::Approx(twice.obstacles[0].center[1]));
  CHECK_THROWS_AS(step_dynamic(env, -1), Error);
}

TEST_CASE("env-v1 round trip") {
  Environment env = generate_random_env(EnvGenSpec::standard_2d(), 11);
  env.obstacles[0].velocity = Point(0.5, -1);
  const std::string text = env_to_json(env);
  CHECK(text.find("\"env-v1\"") != std::string::npos);
  const Environment back = env_from_json(text);
  CHECK(env_to_json(back) == text);
  CHECK(back.obstacles.size() == env.obstacles.size());
  CHECK(back.start == env.start);

  const Environment e3 = generate_random_env(EnvGenSpec::standard_3d(), 2);
  CHECK(env_to_json(env_from_json(env_to_json(e3))) == env_to_json(e3));

  CHECK_THROWS_AS(env_from_json("{\"version\":\"env-v2\"}"), Error);
  CHECK_THROWS_AS(env_from_json("not json"), Error);
  try {
    load_env("/nonexistent/env.json");
    FAIL("expected failure");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kIo);
  }
}

TEST_CASE("costmap v1 format") {
  const CostMap map = rasterize(env2d(3, 2, {circle(0, Point(0.5, 0.5), 0.1)}));
  std::ostringstream os;
  write_costmap(map, os);
  const std::string s = os.str();
  CHECK(s.rfind("COSTMAP v1 2 3 2\n", 0) == 0);
  CHECK(s.size() == std::string("COSTMAP v1 2 3 2\n").size() + 6);
  std::istringstream is(s);
  const CostMap back = read_costmap(is);
  CHECK(back.cells == map.cells);
  CHECK(back.dims == map.dims);

  const CostMap m3 = rasterize(env3d(4));
  std::ostringstream os3;
  write_costmap(m3, os3);
  CHECK(os3.str().rfind("COSTMAP v1 3 4 4 4\n", 0) == 0);
}

TEST_CASE("validate_query") {
  const Environment env = env2d(10, 10, {circle(0, Point(5, 5), 2)}, Point(1, 1), Point(5, 5));
  CHECK_THROWS_AS(validate_query(env), Error);
  CHECK_NOTHROW(validate_query(env2d(10, 10, {}, Point(1, 1), Point(9, 9))));
}
