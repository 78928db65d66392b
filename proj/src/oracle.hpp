#pragma once

#include <optional>
#include <vector>

#include "env.hpp"

namespace planformer {

/// 8-connected (2D) / 26-connected (3D) grid path. Diagonal moves may not cut
/// corners: every axis-subset of the move must also land on a free cell.
struct GridPath {
  std::vector<Cell> cells;
  double cost = 0.0;
};

std::optional<GridPath> astar(const CostMap& map, const Cell& start, const Cell& goal);
std::optional<GridPath> dijkstra(const CostMap& map, const Cell& start, const Cell& goal);

/// Cell centers in map units: cell (i, j) maps to (i + 0.5, j + 0.5).
std::vector<Point> to_waypoints(const GridPath& path, int dim);

}  // namespace planformer
