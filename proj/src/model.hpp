#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "env.hpp"
#include "nn/ops.hpp"
#include "planner.hpp"

namespace planformer {

struct ModelHyper {
  int dim = 2;
  int d_model = 64;
  int n_head = 6;
  int head_dim = 16;
  int layers = 6;
  int ffn_dim = 448;
  int max_seq_len = 256;
  std::array<int, 3> conv_channels{16, 32, 64};  // last entry equals d_model
  std::array<int, 3> map_dims{100, 100, 1};
  /// Output head predicts an offset from the read-out node instead of an absolute position.
  bool residual_head = true;

  static ModelHyper for_workspace(const Workspace& ws);
  void validate() const;
  friend bool operator==(const ModelHyper&, const ModelHyper&) = default;
};

enum class TokenRole : int { kGoal = 0, kStart = 1, kNode = 2 };

/// One encoder input sequence: goal token, start token, then tree nodes.
struct TokenSequence {
  std::vector<Point> points;
  std::vector<TokenRole> roles;
  int pad_to = 0;  // total length including masked zero padding (>= points.size())
};

/// Builds the sequence for a sampling context, keeping the most recent
/// max_seq_len - 2 tree nodes. pad_to = 0 pads to max_seq_len.
TokenSequence build_sequence(const Point& goal, const Point& start, std::span<const Point> tree_nodes,
                             int max_seq_len, int pad_to = 0);

/// Sinusoidal code: even index 2i -> sin(x / 10000^(2i/d)), odd 2i+1 -> cos(y / 10000^(2i/d)).
/// In 3D the encoded axis cycles x, y, z with the index.
std::vector<double> positional_encoding(const Point& p, int d_model);

class SamplerModel;

/// Lazily computed per-cell feature vectors for one cost map. Equal to
/// extract_features() at each cell; computed from local receptive-field patches.
class FeatureCache {
 public:
  FeatureCache(const SamplerModel& model, const CostMap& map);
  /// Feature rows for `cells`, row-major [cells.size(), d_model].
  std::vector<double> lookup(const std::vector<Cell>& cells);
  const CostMap& map() const { return *map_; }
  std::size_t cached() const { return cache_.size(); }

 private:
  const SamplerModel* model_;
  const CostMap* map_;
  std::unordered_map<std::size_t, std::vector<double>> cache_;
};

struct SequenceInput {
  const CostMap* map = nullptr;
  FeatureCache* cache = nullptr;  // when set, features come from the cache without gradients
  TokenSequence tokens;
};

class SamplerModel {
 public:
  SamplerModel() = default;
  static SamplerModel create(const ModelHyper& hyper, std::uint64_t seed);

  const ModelHyper& hyper() const { return hyper_; }
  int dim() const { return hyper_.dim; }
  std::size_t parameter_count() const;
  std::vector<nn::Tensor>& parameters() { return params_; }
  const std::vector<nn::Tensor>& parameters() const { return params_; }
  const std::vector<std::string>& parameter_names() const { return names_; }
  nn::Tensor& parameter(const std::string& name);
  const nn::Tensor& parameter(const std::string& name) const;

  /// Full feature map [d_model, *map dims] from the convolution stack.
  nn::Tensor extract_features(const CostMap& map) const;

  /// Feature rows for cells computed from patches, differentiable in the conv weights.
  nn::Tensor patch_features(const CostMap& map, const std::vector<Cell>& cells) const;

  /// Batched forward pass; returns normalized predictions [batch, dim].
  nn::Tensor forward(const std::vector<SequenceInput>& batch) const;

  /// Encoder input tokens [sum of pad_to, d_model] and the key mask, for inspection.
  nn::Tensor embed_tokens(const std::vector<SequenceInput>& batch, std::vector<std::uint8_t>* key_masked) const;

  /// Attention probabilities of one head in one layer for a single sequence.
  std::vector<double> attention_probabilities(const SequenceInput& seq, int layer, int head) const;

  Point denormalize(std::span<const double> normalized, const Workspace& ws) const;

  void round_to_float32();
  void save(const std::string& path) const;
  /// expected_dim = 0 accepts either dimensionality.
  static SamplerModel load(const std::string& path, int expected_dim = 0);

 private:
  struct Layer {
    nn::MultiHeadParams attn;
    nn::Tensor ln1_g, ln1_b, ff1_w, ff1_b, ff2_w, ff2_b, ln2_g, ln2_b;
  };

  void bind();
  void add_param(const std::string& name, const nn::Shape& shape);
  nn::Tensor conv_stack_patches(const std::vector<std::pair<const CostMap*, Cell>>& cells) const;
  nn::Tensor encode(nn::Tensor x, const nn::AttentionLayout& layout, int stop_layer = -1) const;

  ModelHyper hyper_;
  std::vector<nn::Tensor> params_;
  std::vector<std::string> names_;
  std::vector<nn::Tensor> conv_w_, conv_b_;
  nn::Tensor embed_w_, embed_b_, role_, head_w_, head_b_;
  std::vector<Layer> layers_;
};

/// Next-sample prediction after the given node sequence, in map units and clamped to the workspace.
Point predict_next(const SamplerModel& model, FeatureCache& cache, const Environment& env,
                   std::span<const Point> nodes);

/// Which tree nodes form the model's input sequence.
enum class ContextMode {
  kInsertionOrder,  // every tree node in insertion order
  kBestBranch,      // root-to-node path of the node closest to the goal
};

std::string to_string(ContextMode mode);
ContextMode context_mode_from_string(const std::string& name);

/// Input node sequence for a tree under the given mode.
std::vector<Point> context_nodes(const Tree& tree, const Point& goal, ContextMode mode);

/// Mixed sampler: uniform with probability alpha, otherwise the model's
/// prediction (goal substituted when the prediction lands within the goal
/// threshold). Once the goal is connected the model stops and sampling is uniform.
class HybridSampler final : public Sampler {
 public:
  HybridSampler(std::shared_ptr<const SamplerModel> model, double alpha, double goal_threshold,
                ContextMode context = ContextMode::kBestBranch);

  Point sample(const SampleRequest& request, PlanStreams& streams) override;
  void reset(const Environment& env) override;
  std::string name() const override { return "rrt_star_former"; }

  long uniform_draws() const { return uniform_draws_; }
  long model_draws() const { return model_draws_; }
  bool last_was_uniform() const { return last_uniform_; }

 private:
  std::shared_ptr<const SamplerModel> model_;
  double alpha_;
  double goal_threshold_;
  ContextMode context_;
  GoalBiasSampler uniform_{0.0};
  std::unique_ptr<CostMap> map_;
  std::unique_ptr<FeatureCache> cache_;
  std::size_t cached_tree_size_ = 0;
  Point cached_prediction_;
  long uniform_draws_ = 0;
  long model_draws_ = 0;
  bool last_uniform_ = false;
};

}  // namespace planformer
