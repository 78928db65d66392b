#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "common.hpp"

namespace planformer {

/// Axis-aligned box [0, size[i]] per axis.
struct Workspace {
  int dim = 2;
  std::array<double, 3> size{100.0, 100.0, 0.0};

  bool contains(const Point& x) const noexcept;
  Point clamp(Point x) const noexcept;
  Point center() const noexcept;
};

/// Circle (2D) or sphere (3D). Closed set: boundary points collide.
struct Obstacle {
  int id = 0;
  Point center;
  double radius = 0.0;
  std::optional<Point> velocity;  // map units per step
  bool hidden = false;            // unknown until sensed (simulation scenarios only)

  bool moving() const noexcept;
};

struct Environment {
  Workspace workspace;
  std::vector<Obstacle> obstacles;
  Point start;
  Point goal;
  std::uint64_t seed = 0;

  int dim() const noexcept { return workspace.dim; }
};

/// Binary occupancy grid at one cell per map unit; row-major with the last axis fastest.
struct CostMap {
  int dim = 2;
  std::array<int, 3> dims{0, 0, 1};
  std::vector<std::uint8_t> cells;

  std::size_t cell_count() const noexcept;
  std::size_t index(int i, int j, int k = 0) const noexcept {
    return (static_cast<std::size_t>(i) * dims[1] + j) * (dim == 3 ? dims[2] : 1) + (dim == 3 ? k : 0);
  }
  bool in_bounds(int i, int j, int k = 0) const noexcept;
  bool occupied(int i, int j, int k = 0) const noexcept { return cells[index(i, j, k)] != 0; }
};

struct Cell {
  std::array<int, 3> c{0, 0, 0};
  friend bool operator==(const Cell&, const Cell&) = default;
};

/// Grid cell containing a point (floor of coordinates, clamped to the grid).
Cell cell_of(const CostMap& map, const Point& x) noexcept;
Point cell_center(int dim, const Cell& cell) noexcept;

struct EnvGenSpec {
  int dim = 2;
  std::array<double, 3> size{100.0, 100.0, 0.0};
  int min_obstacles = 16;
  int max_obstacles = 20;
  double min_radius = 0.0;
  double max_radius = 12.0;
  /// Resample start/goal until a grid path between them exists.
  bool require_connected = true;
  int max_attempts = 1000;
  /// 0 draws start and goal uniformly. f > 0 draws the start from the box
  /// [0, f*size] and the goal from [(1-f)*size, size] on every axis.
  double corner_fraction = 0.0;

  static EnvGenSpec standard_2d();
  static EnvGenSpec standard_3d();
};

struct ObstacleDelta {
  std::vector<Obstacle> revealed;
  std::vector<std::pair<int, Point>> moved;  // obstacle id, new center

  bool empty() const noexcept { return revealed.empty() && moved.empty(); }
};

Environment generate_random_env(const EnvGenSpec& spec, std::uint64_t seed);

bool is_free_point(const Environment& env, const Point& x) noexcept;
bool is_free_segment(const Environment& env, const Point& a, const Point& b) noexcept;

/// Squared distance from c to the closed segment [a, b].
double squared_distance_to_segment(const Point& c, const Point& a, const Point& b) noexcept;

CostMap rasterize(const Environment& env);

ObstacleDelta sense_update(const Environment& truth, const Environment& known, const Point& x_t, int t,
                           double sensing_radius);
Environment apply_delta(Environment known, const ObstacleDelta& delta);

/// State at step t of an environment given at step 0. Moving obstacles translate with
/// constant velocity and reflect off the cell-center band [0.5, size - 0.5].
Environment step_dynamic(const Environment& env, int t);

/// Throws kPrecondition when start or goal is not free.
void validate_query(const Environment& env);

// env-v1 structured-text format.
std::string env_to_json(const Environment& env);
Environment env_from_json(const std::string& text);
void save_env(const Environment& env, const std::string& path);
Environment load_env(const std::string& path);

// COSTMAP v1 format.
void write_costmap(const CostMap& map, std::ostream& os);
CostMap read_costmap(std::istream& is);
void save_costmap(const CostMap& map, const std::string& path);
CostMap load_costmap(const std::string& path);

}  // namespace planformer
