#include "oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>

namespace planformer {

namespace {

struct Move {
  std::array<int, 3> d{};
  int order = 1;  // number of nonzero components
};

std::vector<Move> moves_for(int dim) {
  std::vector<Move> moves;
  const int kr = dim == 3 ? 1 : 0;
  for (int di = -1; di <= 1; ++di) {
    for (int dj = -1; dj <= 1; ++dj) {
      for (int dk = -kr; dk <= kr; ++dk) {
        const int order = (di != 0) + (dj != 0) + (dk != 0);
        if (order == 0) continue;
        moves.push_back(Move{{di, dj, dk}, order});
      }
    }
  }
  return moves;
}

// Path cost is kept as exact move counts per order so that every optimal path
// yields the same floating-point value regardless of move order.
struct CostCounts {
  std::array<int, 3> n{};
  double value() const noexcept {
    return static_cast<double>(n[0]) + static_cast<double>(n[1]) * std::sqrt(2.0) +
           static_cast<double>(n[2]) * std::sqrt(3.0);
  }
};

bool free_cell(const CostMap& map, int i, int j, int k) {
  return map.in_bounds(i, j, k) && !map.occupied(i, j, k);
}

// All axis-subsets of the move must be free (no corner cutting).
bool move_allowed(const CostMap& map, const Cell& from, const Move& m) {
  const auto& c = from.c;
  if (!free_cell(map, c[0] + m.d[0], c[1] + m.d[1], c[2] + m.d[2])) return false;
  for (int mask = 1; mask < 7; ++mask) {
    std::array<int, 3> s{};
    int order = 0;
    bool subset = true;
    for (std::size_t a = 0; a < 3; ++a) {
      if (!((mask >> a) & 1)) continue;
      if (m.d[a] == 0) subset = false;
      s[a] = m.d[a];
      ++order;
    }
    if (!subset || order >= m.order) continue;
    if (!free_cell(map, c[0] + s[0], c[1] + s[1], c[2] + s[2])) return false;
  }
  return true;
}

double euclid(const Cell& a, const Cell& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < 3; ++i) {
    const double d = a.c[i] - b.c[i];
    s += d * d;
  }
  return std::sqrt(s);
}

struct QueueEntry {
  double f;
  double h;
  std::uint64_t seq;
  std::size_t node;
};

struct Later {
  bool operator()(const QueueEntry& a, const QueueEntry& b) const {
    if (a.f != b.f) return a.f > b.f;
    if (a.h != b.h) return a.h > b.h;
    return a.seq > b.seq;
  }
};

std::optional<GridPath> search(const CostMap& map, const Cell& start, const Cell& goal, bool heuristic) {
  const auto& s = start.c;
  const auto& g = goal.c;
  if (!free_cell(map, s[0], s[1], s[2]) || !free_cell(map, g[0], g[1], g[2])) {
    fail(ErrorCode::kPrecondition, "grid search endpoints must be free cells");
  }
  const std::size_t n = map.cell_count();
  const auto moves = moves_for(map.dim);
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> best(n, kInf);
  std::vector<CostCounts> counts(n);
  std::vector<std::int64_t> parent(n, -1);
  std::vector<char> closed(n, 0);
  const int nk = map.dim == 3 ? map.dims[2] : 1;
  auto decode = [&](std::size_t idx) {
    Cell c;
    c.c[2] = static_cast<int>(idx % static_cast<std::size_t>(nk));
    idx /= static_cast<std::size_t>(nk);
    c.c[1] = static_cast<int>(idx % static_cast<std::size_t>(map.dims[1]));
    c.c[0] = static_cast<int>(idx / static_cast<std::size_t>(map.dims[1]));
    return c;
  };

  std::priority_queue<QueueEntry, std::vector<QueueEntry>, Later> open;
  std::uint64_t seq = 0;
  const std::size_t si = map.index(s[0], s[1], s[2]);
  const std::size_t gi = map.index(g[0], g[1], g[2]);
  best[si] = 0.0;
  const double h0 = heuristic ? euclid(start, goal) : 0.0;
  open.push({h0, h0, seq++, si});

  while (!open.empty()) {
    const QueueEntry top = open.top();
    open.pop();
    if (closed[top.node]) continue;
    closed[top.node] = 1;
    if (top.node == gi) break;
    const Cell cur = decode(top.node);
    for (const auto& m : moves) {
      if (!move_allowed(map, cur, m)) continue;
      const std::size_t ni = map.index(cur.c[0] + m.d[0], cur.c[1] + m.d[1], cur.c[2] + m.d[2]);
      if (closed[ni]) continue;
      CostCounts cc = counts[top.node];
      ++cc.n[static_cast<std::size_t>(m.order - 1)];
      const double gval = cc.value();
      if (gval < best[ni]) {
        best[ni] = gval;
        counts[ni] = cc;
        parent[ni] = static_cast<std::int64_t>(top.node);
        const double h = heuristic ? euclid(decode(ni), goal) : 0.0;
        open.push({gval + h, h, seq++, ni});
      }
    }
  }
  if (!closed[gi]) return std::nullopt;

  GridPath path;
  path.cost = best[gi];
  for (std::int64_t at = static_cast<std::int64_t>(gi); at >= 0; at = parent[static_cast<std::size_t>(at)]) {
    path.cells.push_back(decode(static_cast<std::size_t>(at)));
  }
  std::reverse(path.cells.begin(), path.cells.end());
  return path;
}

}  // namespace

std::optional<GridPath> astar(const CostMap& map, const Cell& start, const Cell& goal) {
  return search(map, start, goal, true);
}

std::optional<GridPath> dijkstra(const CostMap& map, const Cell& start, const Cell& goal) {
  return search(map, start, goal, false);
}

std::vector<Point> to_waypoints(const GridPath& path, int dim) {
  std::vector<Point> out;
  out.reserve(path.cells.size());
  for (const auto& c : path.cells) out.push_back(cell_center(dim, c));
  return out;
}

}  // namespace planformer
