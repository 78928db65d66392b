#include "train.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>
#include <mutex>
#include <thread>

#include "json.hpp"
#include "nn/adam.hpp"
#include "oracle.hpp"

namespace planformer {

void DatasetConfig::validate() const {
  if (env_count < 1) fail(ErrorCode::kInvalidArgument, "env_count must be >= 1");
  if (dim != 2 && dim != 3) fail(ErrorCode::kInvalidArgument, "dim must be 2 or 3");
  if (waypoint_stride < 1) fail(ErrorCode::kInvalidArgument, "waypoint_stride must be >= 1");
  if (jobs < 1) fail(ErrorCode::kInvalidArgument, "jobs must be >= 1");
  if (max_attempts < 1) fail(ErrorCode::kInvalidArgument, "max_attempts must be >= 1");
}

void TrainConfig::validate() const {
  if (batch_size < 0) fail(ErrorCode::kInvalidArgument, "batch_size must be >= 1");
  if (epochs < 0) fail(ErrorCode::kInvalidArgument, "epochs must be >= 0");
  if (!(lr >= 0.0)) fail(ErrorCode::kInvalidArgument, "lr must be >= 0");
  if (!(validation_fraction >= 0.0 && validation_fraction < 1.0)) {
    fail(ErrorCode::kInvalidArgument, "validation_fraction must lie in [0, 1)");
  }
}

std::vector<Point> demonstration_path(const Environment& env, const std::vector<Point>& cell_waypoints, int stride) {
  if (cell_waypoints.empty()) return {};
  std::vector<Point> w = cell_waypoints;
  w.front() = env.start;
  if (w.size() == 1) {
    w.push_back(env.goal);
  } else {
    w.back() = env.goal;
  }
  std::vector<Point> out{w.front()};
  std::size_t i = 0;
  while (i + 1 < w.size()) {
    std::size_t j = std::min(i + static_cast<std::size_t>(stride), w.size() - 1);
    while (j > i && !is_free_segment(env, w[i], w[j])) --j;
    if (j == i) return {};
    out.push_back(w[j]);
    i = j;
  }
  return out;
}

std::vector<TrainingSample> samples_from_path(int env_id, const std::vector<Point>& waypoints) {
  std::vector<TrainingSample> out;
  for (std::size_t n = 1; n < waypoints.size(); ++n) {
    TrainingSample s;
    s.env_id = env_id;
    s.n = static_cast<int>(n);
    s.prefix.assign(waypoints.begin(), waypoints.begin() + static_cast<std::ptrdiff_t>(n));
    s.target = waypoints[n];
    out.push_back(std::move(s));
  }
  return out;
}

namespace {

struct EnvBuild {
  DemoEnv env;
  std::vector<TrainingSample> samples;
};

EnvBuild build_one(const DatasetConfig& config, int id) {
  EnvGenSpec spec = config.dim == 3 ? EnvGenSpec::standard_3d() : EnvGenSpec::standard_2d();
  spec.corner_fraction = config.corner_fraction;
  const std::uint64_t base = derive_seed(config.seed, "dataset", static_cast<std::uint64_t>(id));
  for (int attempt = 0; attempt < config.max_attempts; ++attempt) {
    const std::uint64_t seed = attempt == 0 ? base : derive_seed(base, "retry", static_cast<std::uint64_t>(attempt));
    Environment env;
    try {
      env = generate_random_env(spec, seed);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::kGenerationFailed) continue;
      throw;
    }
    CostMap map = rasterize(env);
    const auto grid = astar(map, cell_of(map, env.start), cell_of(map, env.goal));
    if (!grid) continue;
    const auto path = demonstration_path(env, to_waypoints(*grid, env.dim()), config.waypoint_stride);
    if (path.size() < 2) continue;
    EnvBuild b;
    b.env = DemoEnv{id, seed, env.start, env.goal, std::move(map)};
    b.samples = samples_from_path(id, path);
    return b;
  }
  fail(ErrorCode::kGenerationFailed,
       "no solvable environment for dataset entry " + std::to_string(id) + " after " +
           std::to_string(config.max_attempts) + " attempts");
}

}  // namespace

Dataset build_dataset(const DatasetConfig& config) {
  config.validate();
  std::vector<EnvBuild> built(static_cast<std::size_t>(config.env_count));
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (int i = next++; i < config.env_count; i = next++) {
      try {
        built[static_cast<std::size_t>(i)] = build_one(config, i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    }
  };
  const int jobs = std::min(config.jobs, config.env_count);
  std::vector<std::thread> threads;
  for (int t = 1; t < jobs; ++t) threads.emplace_back(worker);
  worker();
  for (auto& t : threads) t.join();
  if (error) std::rethrow_exception(error);

  Dataset ds;
  ds.dim = config.dim;
  for (auto& b : built) {
    ds.map_dims = b.env.map.dims;
    ds.envs.push_back(std::move(b.env));
    for (auto& s : b.samples) ds.samples.push_back(std::move(s));
  }
  return ds;
}

// ---------------------------------------------------------------------------
// ds-v1 file: JSON header line, then per environment an "ENV" line followed by a
// COSTMAP v1 block, then one "S" line per sample.

namespace {

void put_number(std::ostream& os, double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  os.write(buf, r.ptr - buf);
}

void put_point(std::ostream& os, const Point& p) {
  for (int a = 0; a < p.dim(); ++a) {
    os << ' ';
    put_number(os, p[a]);
  }
}

Point get_point(std::istream& is, int dim) {
  Point p = Point::zeros(dim);
  for (int a = 0; a < dim; ++a) is >> p[a];
  return p;
}

}  // namespace

void write_dataset(const Dataset& ds, std::ostream& os) {
  const nlohmann::json header{{"version", "ds-v1"},
                              {"dim", ds.dim},
                              {"map_dims", ds.map_dims},
                              {"env_count", ds.envs.size()},
                              {"sample_count", ds.samples.size()}};
  os << header.dump() << '\n';
  for (const auto& e : ds.envs) {
    os << "ENV " << e.id << ' ' << e.seed;
    put_point(os, e.start);
    put_point(os, e.goal);
    os << '\n';
    write_costmap(e.map, os);
    os << '\n';
  }
  for (const auto& s : ds.samples) {
    os << "S " << s.env_id << ' ' << s.n;
    put_point(os, s.target);
    for (const auto& p : s.prefix) put_point(os, p);
    os << '\n';
  }
}

Dataset read_dataset(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) fail(ErrorCode::kFormat, "empty dataset file");
  Dataset ds;
  std::size_t env_count = 0, sample_count = 0;
  try {
    const auto header = nlohmann::json::parse(line);
    if (header.at("version") != "ds-v1") fail(ErrorCode::kFormat, "unsupported dataset version");
    ds.dim = header.at("dim").get<int>();
    ds.map_dims = header.at("map_dims").get<std::array<int, 3>>();
    env_count = header.at("env_count").get<std::size_t>();
    sample_count = header.at("sample_count").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kFormat, std::string("bad dataset header: ") + e.what());
  }
  if (ds.dim != 2 && ds.dim != 3) fail(ErrorCode::kFormat, "dataset dim must be 2 or 3");

  for (std::size_t i = 0; i < env_count; ++i) {
    if (!std::getline(is, line)) fail(ErrorCode::kFormat, "truncated dataset: missing environment record");
    std::istringstream ls(line);
    std::string tag;
    DemoEnv e;
    ls >> tag >> e.id >> e.seed;
    e.start = get_point(ls, ds.dim);
    e.goal = get_point(ls, ds.dim);
    if (tag != "ENV" || !ls || e.id != static_cast<int>(i)) fail(ErrorCode::kFormat, "bad environment record: " + line);
    e.map = read_costmap(is);
    if (e.map.dim != ds.dim || e.map.dims != ds.map_dims) fail(ErrorCode::kFormat, "cost map does not match dataset header");
    if (is.get() != '\n') fail(ErrorCode::kFormat, "malformed cost map terminator");
    ds.envs.push_back(std::move(e));
  }
  ds.samples.reserve(sample_count);
  for (std::size_t i = 0; i < sample_count; ++i) {
    if (!std::getline(is, line)) fail(ErrorCode::kFormat, "truncated dataset: missing sample record");
    std::istringstream ls(line);
    std::string tag;
    TrainingSample s;
    ls >> tag >> s.env_id >> s.n;
    s.target = get_point(ls, ds.dim);
    if (tag != "S" || !ls || s.n < 1 || s.env_id < 0 || static_cast<std::size_t>(s.env_id) >= env_count) {
      fail(ErrorCode::kFormat, "bad sample record " + std::to_string(i));
    }
    for (int k = 0; k < s.n; ++k) s.prefix.push_back(get_point(ls, ds.dim));
    if (!ls) fail(ErrorCode::kFormat, "short prefix in sample record " + std::to_string(i));
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

void save_dataset(const Dataset& ds, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::kIo, "cannot open '" + path + "' for writing");
  write_dataset(ds, out);
  if (!out) fail(ErrorCode::kIo, "write failed for '" + path + "'");
}

Dataset load_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, "cannot open dataset '" + path + "'");
  return read_dataset(in);
}

// ---------------------------------------------------------------------------

namespace {

void shuffle(std::vector<int>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i) - 1));
    std::swap(v[i - 1], v[j]);
  }
}

void check_compatible(const Dataset& ds, const SamplerModel& model) {
  const auto& md = model.hyper().map_dims;
  if (ds.dim != model.dim() || ds.map_dims[0] != md[0] || ds.map_dims[1] != md[1] ||
      (ds.dim == 3 && ds.map_dims[2] != md[2])) {
    fail(ErrorCode::kDimensionMismatch, "dataset is " + std::to_string(ds.dim) + "-D but the model is " +
                                            std::to_string(model.dim()) + "-D or has different map dimensions");
  }
}

SequenceInput make_input(const Dataset& ds, const TrainingSample& s, int max_seq_len) {
  const DemoEnv& e = ds.envs[static_cast<std::size_t>(s.env_id)];
  const int len = static_cast<int>(std::min<std::size_t>(s.prefix.size(), static_cast<std::size_t>(max_seq_len - 2))) + 2;
  return SequenceInput{&e.map, nullptr, build_sequence(e.goal, e.start, s.prefix, max_seq_len, len)};
}

nn::Tensor normalized_targets(const Dataset& ds, const std::vector<int>& idx, std::size_t begin, std::size_t end) {
  std::vector<double> t;
  for (std::size_t i = begin; i < end; ++i) {
    const auto& s = ds.samples[static_cast<std::size_t>(idx[i])];
    for (int a = 0; a < ds.dim; ++a) t.push_back(s.target[a] / ds.map_dims[static_cast<std::size_t>(a)]);
  }
  return nn::Tensor::from({static_cast<int>(end - begin), ds.dim}, std::move(t));
}

std::vector<nn::Tensor> snapshot(const SamplerModel& model) {
  std::vector<nn::Tensor> out;
  for (const auto& p : model.parameters()) out.push_back(p.clone());
  return out;
}

void restore(SamplerModel& model, const std::vector<nn::Tensor>& saved) {
  auto& params = model.parameters();
  for (std::size_t i = 0; i < params.size(); ++i) {
    std::copy(saved[i].data().begin(), saved[i].data().end(), params[i].data().begin());
  }
}

}  // namespace

Split split_dataset(const Dataset& ds, double validation_fraction, std::uint64_t seed) {
  const int n_env = static_cast<int>(ds.envs.size());
  std::vector<int> order(static_cast<std::size_t>(n_env));
  for (int i = 0; i < n_env; ++i) order[static_cast<std::size_t>(i)] = i;
  Rng rng(derive_seed(seed, "split"));
  shuffle(order, rng);
  int n_val = static_cast<int>(std::lround(validation_fraction * n_env));
  if (validation_fraction > 0.0 && n_env >= 2) n_val = std::clamp(n_val, 1, n_env - 1);
  std::vector<std::uint8_t> is_val(static_cast<std::size_t>(n_env), 0);
  for (int i = 0; i < n_val; ++i) is_val[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])] = 1;
  Split split;
  for (std::size_t i = 0; i < ds.samples.size(); ++i) {
    (is_val[static_cast<std::size_t>(ds.samples[i].env_id)] ? split.validation : split.train).push_back(static_cast<int>(i));
  }
  return split;
}

EvalResult evaluate(const Dataset& ds, const SamplerModel& model, const std::vector<int>& indices) {
  check_compatible(ds, model);
  std::vector<int> idx = indices;
  if (idx.empty()) {
    idx.resize(ds.samples.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<int>(i);
  }
  EvalResult r;
  r.count = idx.size();
  if (idx.empty()) return r;
  nn::NoGradGuard guard;
  constexpr std::size_t kChunk = 256;
  double sq = 0.0, err = 0.0, base_err = 0.0, base_sq = 0.0;
  for (std::size_t b = 0; b < idx.size(); b += kChunk) {
    const std::size_t e = std::min(idx.size(), b + kChunk);
    std::vector<SequenceInput> batch;
    for (std::size_t i = b; i < e; ++i) {
      batch.push_back(make_input(ds, ds.samples[static_cast<std::size_t>(idx[i])], model.hyper().max_seq_len));
    }
    const nn::Tensor pred = model.forward(batch);
    const auto out = pred.data();
    for (std::size_t i = b; i < e; ++i) {
      const auto& s = ds.samples[static_cast<std::size_t>(idx[i])];
      double d2 = 0.0, b2 = 0.0, nb2 = 0.0;
      for (int a = 0; a < ds.dim; ++a) {
        const double scale = ds.map_dims[static_cast<std::size_t>(a)];
        const double pn = out[(i - b) * static_cast<std::size_t>(ds.dim) + static_cast<std::size_t>(a)];
        const double tn = s.target[a] / scale;
        const double ln = s.prefix.back()[a] / scale;
        sq += (pn - tn) * (pn - tn);
        nb2 += (ln - tn) * (ln - tn);
        d2 += (pn - tn) * (pn - tn) * scale * scale;
        b2 += (ln - tn) * (ln - tn) * scale * scale;
      }
      base_sq += nb2;
      err += std::sqrt(d2);
      base_err += std::sqrt(b2);
    }
  }
  const double n = static_cast<double>(idx.size());
  r.mse = sq / (n * ds.dim);
  r.copy_last_mse = base_sq / (n * ds.dim);
  r.mean_error = err / n;
  r.copy_last_error = base_err / n;
  return r;
}

TrainReport train(const Dataset& ds, SamplerModel& model, const TrainConfig& config, const EpochCallback& on_epoch) {
  config.validate();
  check_compatible(ds, model);
  if (ds.samples.empty()) fail(ErrorCode::kPrecondition, "cannot train on an empty dataset");
  const Split split = split_dataset(ds, config.validation_fraction, config.seed);
  const std::vector<int>& val = split.validation;
  const int batch_size = config.effective_batch_size(ds.dim);
  const int max_len = model.hyper().max_seq_len;

  TrainReport report;
  report.initial_validation_mse = val.empty() ? 0.0 : evaluate(ds, model, val).mse;
  report.best_validation_mse = report.initial_validation_mse;
  std::vector<nn::Tensor> best = snapshot(model);

  nn::AdamState adam;
  adam.lr = config.lr;
  auto& params = model.parameters();
  std::vector<int> order = split.train;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    Rng rng(derive_seed(config.seed, "shuffle", static_cast<std::uint64_t>(epoch)));
    shuffle(order, rng);
    double loss_sum = 0.0;
    for (std::size_t b = 0; b < order.size(); b += static_cast<std::size_t>(batch_size)) {
      const std::size_t e = std::min(order.size(), b + static_cast<std::size_t>(batch_size));
      std::vector<SequenceInput> batch;
      for (std::size_t i = b; i < e; ++i) batch.push_back(make_input(ds, ds.samples[static_cast<std::size_t>(order[i])], max_len));
      for (auto& p : params) p.zero_grad();
      const nn::Tensor loss = nn::mse_loss(model.forward(batch), normalized_targets(ds, order, b, e));
      nn::backward(loss);
      nn::adam_step(params, adam);
      loss_sum += loss.item() * static_cast<double>(e - b);
    }
    EpochStats st;
    st.epoch = epoch;
    st.train_mse = order.empty() ? 0.0 : loss_sum / static_cast<double>(order.size());
    st.validation_mse = val.empty() ? st.train_mse : evaluate(ds, model, val).mse;
    st.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    report.epochs.push_back(st);
    if (report.best_epoch == 0 || st.validation_mse < report.best_validation_mse) {
      report.best_epoch = epoch;
      report.best_validation_mse = st.validation_mse;
      if (config.keep_best) best = snapshot(model);
    }
    if (on_epoch) on_epoch(st);
  }
  if (config.keep_best && !report.epochs.empty()) restore(model, best);
  return report;
}

}  // namespace planformer
