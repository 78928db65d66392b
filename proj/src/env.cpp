#include "env.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "oracle.hpp"

namespace planformer {

bool Workspace::contains(const Point& x) const noexcept {
  for (int i = 0; i < dim; ++i) {
    if (!(x[i] >= 0.0 && x[i] <= size[static_cast<std::size_t>(i)])) return false;
  }
  return true;
}

Point Workspace::clamp(Point x) const noexcept {
  for (int i = 0; i < dim; ++i) x[i] = std::clamp(x[i], 0.0, size[static_cast<std::size_t>(i)]);
  return x;
}

Point Workspace::center() const noexcept {
  Point c = Point::zeros(dim);
  for (int i = 0; i < dim; ++i) c[i] = 0.5 * size[static_cast<std::size_t>(i)];
  return c;
}

bool Obstacle::moving() const noexcept {
  if (!velocity) return false;
  for (int i = 0; i < velocity->dim(); ++i) {
    if ((*velocity)[i] != 0.0) return true;
  }
  return false;
}

std::size_t CostMap::cell_count() const noexcept {
  std::size_t n = 1;
  for (int i = 0; i < dim; ++i) n *= static_cast<std::size_t>(dims[static_cast<std::size_t>(i)]);
  return n;
}

bool CostMap::in_bounds(int i, int j, int k) const noexcept {
  if (i < 0 || j < 0 || i >= dims[0] || j >= dims[1]) return false;
  if (dim == 3) return k >= 0 && k < dims[2];
  return k == 0;
}

Cell cell_of(const CostMap& map, const Point& x) noexcept {
  Cell cell;
  for (int a = 0; a < map.dim; ++a) {
    const int hi = map.dims[static_cast<std::size_t>(a)] - 1;
    cell.c[static_cast<std::size_t>(a)] = std::clamp(static_cast<int>(std::floor(x[a])), 0, hi);
  }
  return cell;
}

Point cell_center(int dim, const Cell& cell) noexcept {
  Point p = Point::zeros(dim);
  for (int a = 0; a < dim; ++a) p[a] = cell.c[static_cast<std::size_t>(a)] + 0.5;
  return p;
}

EnvGenSpec EnvGenSpec::standard_2d() { return EnvGenSpec{}; }

EnvGenSpec EnvGenSpec::standard_3d() {
  EnvGenSpec spec;
  spec.dim = 3;
  spec.size = {50.0, 50.0, 50.0};
  spec.min_obstacles = 6;
  spec.max_obstacles = 10;
  return spec;
}

namespace {

Point uniform_point(const Workspace& ws, Rng& rng) {
  Point p = Point::zeros(ws.dim);
  for (int i = 0; i < ws.dim; ++i) p[i] = rng.uniform(0.0, ws.size[static_cast<std::size_t>(i)]);
  return p;
}

void check_spec(const EnvGenSpec& spec) {
  if (spec.dim != 2 && spec.dim != 3) fail(ErrorCode::kInvalidArgument, "dim must be 2 or 3");
  for (int i = 0; i < spec.dim; ++i) {
    if (!(spec.size[static_cast<std::size_t>(i)] > 0.0)) fail(ErrorCode::kInvalidArgument, "workspace extent must be > 0");
  }
  if (spec.min_obstacles < 0 || spec.max_obstacles < spec.min_obstacles) {
    fail(ErrorCode::kInvalidArgument, "obstacle count range is empty");
  }
  if (spec.min_radius < 0.0 || spec.max_radius < spec.min_radius) {
    fail(ErrorCode::kInvalidArgument, "obstacle radius range is empty");
  }
  if (spec.max_attempts < 1) fail(ErrorCode::kInvalidArgument, "max_attempts must be >= 1");
  if (!(spec.corner_fraction >= 0.0 && spec.corner_fraction <= 0.5)) {
    fail(ErrorCode::kInvalidArgument, "corner_fraction must lie in [0, 0.5]");
  }
}

}  // namespace

Environment generate_random_env(const EnvGenSpec& spec, std::uint64_t seed) {
  check_spec(spec);
  Environment env;
  env.workspace.dim = spec.dim;
  env.workspace.size = spec.size;
  if (spec.dim == 2) env.workspace.size[2] = 0.0;
  env.seed = seed;

  Rng rng(derive_seed(seed, "env"));
  const auto count = static_cast<int>(rng.uniform_int(spec.min_obstacles, spec.max_obstacles));
  env.obstacles.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    Obstacle o;
    o.id = i;
    o.center = uniform_point(env.workspace, rng);
    o.radius = rng.uniform(spec.min_radius, spec.max_radius);
    env.obstacles.push_back(o);
  }

  std::optional<CostMap> map;
  if (spec.require_connected) map = rasterize(env);

  for (int attempt = 0; attempt < spec.max_attempts; ++attempt) {
    Point s = uniform_point(env.workspace, rng);
    Point g = uniform_point(env.workspace, rng);
    if (spec.corner_fraction > 0.0) {
      for (int a = 0; a < spec.dim; ++a) {
        const double size = env.workspace.size[static_cast<std::size_t>(a)];
        s[a] *= spec.corner_fraction;
        g[a] = size - g[a] * spec.corner_fraction;
      }
    }
    if (s == g || !is_free_point(env, s) || !is_free_point(env, g)) continue;
    if (map) {
      const Cell cs = cell_of(*map, s);
      const Cell cg = cell_of(*map, g);
      if (map->occupied(cs.c[0], cs.c[1], cs.c[2]) || map->occupied(cg.c[0], cg.c[1], cg.c[2])) continue;
      if (!astar(*map, cs, cg)) continue;
    }
    env.start = s;
    env.goal = g;
    return env;
  }
  fail(ErrorCode::kGenerationFailed,
       "could not place a free start/goal pair after " + std::to_string(spec.max_attempts) + " attempts");
}

bool is_free_point(const Environment& env, const Point& x) noexcept {
  if (x.dim() != env.dim() || !env.workspace.contains(x)) return false;
  for (const auto& o : env.obstacles) {
    if (squared_distance(x, o.center) <= o.radius * o.radius) return false;
  }
  return true;
}

double squared_distance_to_segment(const Point& c, const Point& a, const Point& b) noexcept {
  const Point ab = b - a;
  const double len2 = dot(ab, ab);
  if (len2 == 0.0) return squared_distance(c, a);
  const double t = std::clamp(dot(c - a, ab) / len2, 0.0, 1.0);
  return squared_distance(c, a + ab * t);
}

bool is_free_segment(const Environment& env, const Point& a, const Point& b) noexcept {
  if (a.dim() != env.dim() || b.dim() != env.dim()) return false;
  if (!env.workspace.contains(a) || !env.workspace.contains(b)) return false;
  for (const auto& o : env.obstacles) {
    if (squared_distance_to_segment(o.center, a, b) <= o.radius * o.radius) return false;
  }
  return true;
}

CostMap rasterize(const Environment& env) {
  CostMap map;
  map.dim = env.dim();
  for (int a = 0; a < map.dim; ++a) {
    map.dims[static_cast<std::size_t>(a)] =
        static_cast<int>(std::lround(env.workspace.size[static_cast<std::size_t>(a)]));
  }
  if (map.dim == 2) map.dims[2] = 1;
  map.cells.assign(map.cell_count(), 0);
  const int nk = map.dim == 3 ? map.dims[2] : 1;
  for (int i = 0; i < map.dims[0]; ++i) {
    for (int j = 0; j < map.dims[1]; ++j) {
      for (int k = 0; k < nk; ++k) {
        const Point c = cell_center(map.dim, Cell{{i, j, k}});
        map.cells[map.index(i, j, k)] = is_free_point(env, c) ? 0 : 1;
      }
    }
  }
  return map;
}

ObstacleDelta sense_update(const Environment& truth, const Environment& known, const Point& x_t, int /*t*/,
                           double sensing_radius) {
  ObstacleDelta delta;
  for (const auto& o : truth.obstacles) {
    const double reach = sensing_radius + o.radius;
    if (squared_distance(x_t, o.center) > reach * reach) continue;
    const auto it = std::find_if(known.obstacles.begin(), known.obstacles.end(),
                                 [&](const Obstacle& k) { return k.id == o.id; });
    if (it == known.obstacles.end()) {
      Obstacle seen = o;
      seen.hidden = false;
      delta.revealed.push_back(seen);
    } else if (!(it->center == o.center)) {
      delta.moved.emplace_back(o.id, o.center);
    }
  }
  return delta;
}

Environment apply_delta(Environment known, const ObstacleDelta& delta) {
  for (const auto& o : delta.revealed) known.obstacles.push_back(o);
  for (const auto& [id, center] : delta.moved) {
    for (auto& o : known.obstacles) {
      if (o.id == id) o.center = center;
    }
  }
  return known;
}

Environment step_dynamic(const Environment& env, int t) {
  if (t < 0) fail(ErrorCode::kInvalidArgument, "step_dynamic requires t >= 0");
  Environment out = env;
  for (auto& o : out.obstacles) {
    if (!o.moving()) continue;
    Point v = *o.velocity;
    for (int step = 0; step < t; ++step) {
      for (int a = 0; a < out.dim(); ++a) {
        const double lo = 0.5;
        const double hi = out.workspace.size[static_cast<std::size_t>(a)] - 0.5;
        double x = o.center[a] + v[a];
        if (x > hi) {
          x = 2.0 * hi - x;
          v[a] = -v[a];
        } else if (x < lo) {
          x = 2.0 * lo - x;
          v[a] = -v[a];
        }
        o.center[a] = x;
      }
    }
    o.velocity = v;
  }
  return out;
}

void validate_query(const Environment& env) {
  if (!is_free_point(env, env.start)) fail(ErrorCode::kPrecondition, "start " + to_string(env.start) + " is not free");
  if (!is_free_point(env, env.goal)) fail(ErrorCode::kPrecondition, "goal " + to_string(env.goal) + " is not free");
  if (env.start == env.goal) fail(ErrorCode::kPrecondition, "start and goal coincide");
}

// ---------------------------------------------------------------------------
// env-v1

namespace {

using nlohmann::json;

json point_json(const Point& p) {
  json a = json::array();
  for (int i = 0; i < p.dim(); ++i) a.push_back(p[i]);
  return a;
}

Point point_from(const json& a, int dim, const char* field) {
  if (!a.is_array() || static_cast<int>(a.size()) != dim) {
    fail(ErrorCode::kFormat, std::string("field '") + field + "' must be an array of " + std::to_string(dim) + " numbers");
  }
  Point p = Point::zeros(dim);
  for (int i = 0; i < dim; ++i) p[i] = a[static_cast<std::size_t>(i)].get<double>();
  return p;
}

}  // namespace

std::string env_to_json(const Environment& env) {
  json j;
  j["version"] = "env-v1";
  j["dim"] = env.dim();
  json size = json::array();
  for (int i = 0; i < env.dim(); ++i) size.push_back(env.workspace.size[static_cast<std::size_t>(i)]);
  j["size"] = size;
  json obs = json::array();
  for (const auto& o : env.obstacles) {
    json jo;
    jo["id"] = o.id;
    jo["center"] = point_json(o.center);
    jo["radius"] = o.radius;
    if (o.velocity) jo["velocity"] = point_json(*o.velocity);
    if (o.hidden) jo["hidden"] = true;
    obs.push_back(jo);
  }
  j["obstacles"] = obs;
  j["start"] = point_json(env.start);
  j["goal"] = point_json(env.goal);
  j["seed"] = env.seed;
  return j.dump(2) + "\n";
}

Environment env_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    fail(ErrorCode::kFormat, std::string("malformed environment document: ") + e.what());
  }
  try {
    if (j.value("version", "") != "env-v1") fail(ErrorCode::kFormat, "environment version must be env-v1");
    Environment env;
    env.workspace.dim = j.at("dim").get<int>();
    if (env.dim() != 2 && env.dim() != 3) fail(ErrorCode::kFormat, "environment dim must be 2 or 3");
    const auto& size = j.at("size");
    if (!size.is_array() || static_cast<int>(size.size()) != env.dim()) fail(ErrorCode::kFormat, "size must match dim");
    env.workspace.size = {0.0, 0.0, 0.0};
    for (int i = 0; i < env.dim(); ++i) {
      env.workspace.size[static_cast<std::size_t>(i)] = size[static_cast<std::size_t>(i)].get<double>();
      if (!(env.workspace.size[static_cast<std::size_t>(i)] > 0.0)) fail(ErrorCode::kFormat, "size must be positive");
    }
    int next_id = 0;
    for (const auto& jo : j.at("obstacles")) {
      Obstacle o;
      o.id = jo.value("id", next_id);
      next_id = o.id + 1;
      o.center = point_from(jo.at("center"), env.dim(), "center");
      o.radius = jo.at("radius").get<double>();
      if (o.radius < 0.0) fail(ErrorCode::kFormat, "obstacle radius must be >= 0");
      if (jo.contains("velocity")) o.velocity = point_from(jo.at("velocity"), env.dim(), "velocity");
      o.hidden = jo.value("hidden", false);
      env.obstacles.push_back(o);
    }
    env.start = point_from(j.at("start"), env.dim(), "start");
    env.goal = point_from(j.at("goal"), env.dim(), "goal");
    env.seed = j.value("seed", std::uint64_t{0});
    return env;
  } catch (const json::exception& e) {
    fail(ErrorCode::kFormat, std::string("invalid environment document: ") + e.what());
  }
}

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, "cannot open '" + path + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

void save_env(const Environment& env, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::kIo, "cannot open '" + path + "' for writing");
  out << env_to_json(env);
  if (!out) fail(ErrorCode::kIo, "write failed for '" + path + "'");
}

Environment load_env(const std::string& path) { return env_from_json(read_file(path)); }

// ---------------------------------------------------------------------------
// COSTMAP v1

void write_costmap(const CostMap& map, std::ostream& os) {
  os << "COSTMAP v1 " << map.dim << ' ' << map.dims[0] << ' ' << map.dims[1];
  if (map.dim == 3) os << ' ' << map.dims[2];
  os << '\n';
  os.write(reinterpret_cast<const char*>(map.cells.data()), static_cast<std::streamsize>(map.cells.size()));
}

CostMap read_costmap(std::istream& is) {
  std::string header;
  if (!std::getline(is, header)) fail(ErrorCode::kFormat, "missing COSTMAP header");
  std::istringstream hs(header);
  std::string magic, version;
  CostMap map;
  hs >> magic >> version >> map.dim;
  if (magic != "COSTMAP" || version != "v1" || (map.dim != 2 && map.dim != 3)) {
    fail(ErrorCode::kFormat, "bad COSTMAP header: '" + header + "'");
  }
  hs >> map.dims[0] >> map.dims[1];
  if (map.dim == 3) hs >> map.dims[2];
  else map.dims[2] = 1;
  if (!hs || map.dims[0] <= 0 || map.dims[1] <= 0 || map.dims[2] <= 0) {
    fail(ErrorCode::kFormat, "bad COSTMAP dimensions: '" + header + "'");
  }
  std::string bytes(map.cell_count(), '\0');
  is.read(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (static_cast<std::size_t>(is.gcount()) != bytes.size()) fail(ErrorCode::kFormat, "truncated COSTMAP body");
  map.cells.resize(bytes.size());
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    const auto v = static_cast<std::uint8_t>(bytes[i]);
    if (v > 1) fail(ErrorCode::kFormat, "COSTMAP cells must be 0 or 1");
    map.cells[i] = v;
  }
  return map;
}

void save_costmap(const CostMap& map, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::kIo, "cannot open '" + path + "' for writing");
  write_costmap(map, out);
  if (!out) fail(ErrorCode::kIo, "write failed for '" + path + "'");
}

CostMap load_costmap(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, "cannot open '" + path + "' for reading");
  return read_costmap(in);
}

}  // namespace planformer
