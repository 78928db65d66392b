#pragma once

#include <initializer_list>
#include <vector>

#include "env.hpp"

namespace planformer::test {

inline Obstacle circle(int id, Point center, double radius) {
  Obstacle o;
  o.id = id;
  o.center = center;
  o.radius = radius;
  return o;
}

/// 2-D environment of the given size with the given obstacles.
inline Environment env2d(double w, double h, std::vector<Obstacle> obstacles = {}, Point start = Point(1.0, 1.0),
                         Point goal = Point(2.0, 2.0)) {
  Environment env;
  env.workspace.dim = 2;
  env.workspace.size = {w, h, 0.0};
  env.obstacles = std::move(obstacles);
  env.start = start;
  env.goal = goal;
  return env;
}

inline Environment env3d(double s, std::vector<Obstacle> obstacles = {}, Point start = Point(1.0, 1.0, 1.0),
                         Point goal = Point(2.0, 2.0, 2.0)) {
  Environment env;
  env.workspace.dim = 3;
  env.workspace.size = {s, s, s};
  env.obstacles = std::move(obstacles);
  env.start = start;
  env.goal = goal;
  return env;
}

/// Segment test by dense point sampling.
inline bool sampled_segment_free(const Environment& env, const Point& a, const Point& b, double step = 0.01) {
  const double len = distance(a, b);
  const int n = static_cast<int>(len / step) + 1;
  for (int i = 0; i <= n; ++i) {
    const double t = static_cast<double>(i) / n;
    if (!is_free_point(env, a + (b - a) * t)) return false;
  }
  return true;
}

}  // namespace planformer::test
