#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "env.hpp"
#include "model.hpp"

namespace planformer {

/// Next-waypoint example: the first n demonstration waypoints and waypoint n+1.
struct TrainingSample {
  int env_id = 0;
  int n = 0;
  std::vector<Point> prefix;
  Point target;
};

struct DemoEnv {
  int id = 0;
  std::uint64_t seed = 0;
  Point start;
  Point goal;
  CostMap map;
};

struct Dataset {
  int dim = 2;
  std::array<int, 3> map_dims{1, 1, 1};
  std::vector<DemoEnv> envs;
  std::vector<TrainingSample> samples;
};

struct DatasetConfig {
  int env_count = 500;
  int dim = 2;
  std::uint64_t seed = 0;
  /// Keep every k-th waypoint (line of sight permitting); 1 keeps the full A* path.
  int waypoint_stride = 1;
  int jobs = 1;
  int max_attempts = 1000;
  double corner_fraction = 0.0;  // start/goal placement, see EnvGenSpec

  void validate() const;
};

/// Converts an A* cell path into a continuous demonstration from env.start to
/// env.goal with free segments; empty when some segment is blocked.
std::vector<Point> demonstration_path(const Environment& env, const std::vector<Point>& cell_waypoints, int stride);

/// One sample per successor waypoint: prefixes [w0], [w0,w1], ... with targets w1, w2, ...
std::vector<TrainingSample> samples_from_path(int env_id, const std::vector<Point>& waypoints);

Dataset build_dataset(const DatasetConfig& config);

void write_dataset(const Dataset& ds, std::ostream& os);
Dataset read_dataset(std::istream& is);
void save_dataset(const Dataset& ds, const std::string& path);
Dataset load_dataset(const std::string& path);

struct TrainConfig {
  int batch_size = 0;  // 0 selects 256 in 2D and 128 in 3D
  int epochs = 20;
  double lr = 1e-4;
  std::uint64_t seed = 0;
  double validation_fraction = 0.1;
  /// Restore the parameters of the epoch with the lowest validation MSE.
  bool keep_best = true;

  void validate() const;
  int effective_batch_size(int dim) const { return batch_size > 0 ? batch_size : (dim == 3 ? 128 : 256); }
};

/// Environment-level split; no environment contributes to both sides.
struct Split {
  std::vector<int> train;       // sample indices
  std::vector<int> validation;  // sample indices
};

Split split_dataset(const Dataset& ds, double validation_fraction, std::uint64_t seed);

struct EpochStats {
  int epoch = 0;
  double train_mse = 0.0;
  double validation_mse = 0.0;
  double seconds = 0.0;
};

struct TrainReport {
  double initial_validation_mse = 0.0;
  std::vector<EpochStats> epochs;
  int best_epoch = 0;
  double best_validation_mse = 0.0;
};

using EpochCallback = std::function<void(const EpochStats&)>;

TrainReport train(const Dataset& ds, SamplerModel& model, const TrainConfig& config, const EpochCallback& on_epoch = {});

struct EvalResult {
  double mse = 0.0;             // normalized coordinates, as in training
  double mean_error = 0.0;      // Euclidean, map units
  double copy_last_error = 0.0; // baseline predicting the prefix's last node
  double copy_last_mse = 0.0;
  std::size_t count = 0;
};

/// Evaluates `model` on the given sample indices (all samples when empty).
EvalResult evaluate(const Dataset& ds, const SamplerModel& model, const std::vector<int>& indices = {});

}  // namespace planformer
