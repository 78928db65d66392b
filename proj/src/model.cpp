#include "model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <map>

#include "json.hpp"

namespace planformer {

using nn::Tensor;

// Three 3x3 convolutions see a 7-cell window per axis.
constexpr int kReceptiveRadius = 3;

ModelHyper ModelHyper::for_workspace(const Workspace& ws) {
  ModelHyper h;
  h.dim = ws.dim;
  for (int a = 0; a < 3; ++a) {
    h.map_dims[static_cast<std::size_t>(a)] =
        a < ws.dim ? static_cast<int>(std::lround(ws.size[static_cast<std::size_t>(a)])) : 1;
  }
  return h;
}

void ModelHyper::validate() const {
  if (dim != 2 && dim != 3) fail(ErrorCode::kInvalidArgument, "model dim must be 2 or 3");
  if (d_model < 1 || n_head < 1 || head_dim < 1 || layers < 1 || ffn_dim < 1) {
    fail(ErrorCode::kInvalidArgument, "model sizes must be positive");
  }
  if (conv_channels[2] != d_model) fail(ErrorCode::kInvalidArgument, "last conv width must equal d_model");
  if (max_seq_len < 3) fail(ErrorCode::kInvalidArgument, "max_seq_len must be >= 3");
  for (int a = 0; a < 3; ++a) {
    if (map_dims[static_cast<std::size_t>(a)] < 1) fail(ErrorCode::kInvalidArgument, "map dims must be positive");
  }
}

TokenSequence build_sequence(const Point& goal, const Point& start, std::span<const Point> tree_nodes,
                             int max_seq_len, int pad_to) {
  TokenSequence seq;
  const std::size_t keep = std::min(tree_nodes.size(), static_cast<std::size_t>(max_seq_len - 2));
  seq.points.reserve(keep + 2);
  seq.points.push_back(goal);
  seq.roles.push_back(TokenRole::kGoal);
  seq.points.push_back(start);
  seq.roles.push_back(TokenRole::kStart);
  for (std::size_t i = tree_nodes.size() - keep; i < tree_nodes.size(); ++i) {
    seq.points.push_back(tree_nodes[i]);
    seq.roles.push_back(TokenRole::kNode);
  }
  seq.pad_to = pad_to == 0 ? max_seq_len : pad_to;
  if (seq.pad_to < static_cast<int>(seq.points.size()) || seq.pad_to > max_seq_len) {
    fail(ErrorCode::kInvalidArgument, "pad length " + std::to_string(seq.pad_to) + " outside [" +
                                          std::to_string(seq.points.size()) + ", " + std::to_string(max_seq_len) + "]");
  }
  return seq;
}

std::vector<double> positional_encoding(const Point& p, int d_model) {
  std::vector<double> pe(static_cast<std::size_t>(d_model));
  const int dim = p.dim();
  for (int k = 0; k < d_model; ++k) {
    const int i2 = k - (k % 2);  // 2i
    const double freq = std::pow(10000.0, static_cast<double>(i2) / d_model);
    const double coord = p[k % dim];
    pe[static_cast<std::size_t>(k)] = (k % 2 == 0) ? std::sin(coord / freq) : std::cos(coord / freq);
  }
  return pe;
}

// ---------------------------------------------------------------------------
// FeatureCache

FeatureCache::FeatureCache(const SamplerModel& model, const CostMap& map) : model_(&model), map_(&map) {
  const auto& md = model.hyper().map_dims;
  if (map.dim != model.dim() || map.dims[0] != md[0] || map.dims[1] != md[1] ||
      (map.dim == 3 && map.dims[2] != md[2])) {
    fail(ErrorCode::kDimensionMismatch, "cost map dimensions do not match the model's training dimensions");
  }
}

std::vector<double> FeatureCache::lookup(const std::vector<Cell>& cells) {
  const int d = model_->hyper().d_model;
  std::vector<Cell> missing;
  for (const auto& c : cells) {
    const std::size_t key = map_->index(c.c[0], c.c[1], c.c[2]);
    if (!cache_.contains(key) &&
        std::none_of(missing.begin(), missing.end(), [&](const Cell& m) { return m == c; })) {
      missing.push_back(c);
    }
  }
  if (!missing.empty()) {
    nn::NoGradGuard guard;
    const Tensor f = model_->patch_features(*map_, missing);
    for (std::size_t i = 0; i < missing.size(); ++i) {
      const auto& c = missing[i];
      const auto row = f.data().subspan(i * static_cast<std::size_t>(d), static_cast<std::size_t>(d));
      cache_.emplace(map_->index(c.c[0], c.c[1], c.c[2]), std::vector<double>(row.begin(), row.end()));
    }
  }
  std::vector<double> out;
  out.reserve(cells.size() * static_cast<std::size_t>(d));
  for (const auto& c : cells) {
    const auto& row = cache_.at(map_->index(c.c[0], c.c[1], c.c[2]));
    out.insert(out.end(), row.begin(), row.end());
  }
  return out;
}

// ---------------------------------------------------------------------------
// SamplerModel

void SamplerModel::add_param(const std::string& name, const nn::Shape& shape) {
  names_.push_back(name);
  params_.push_back(Tensor::zeros(shape, true));
}

Tensor& SamplerModel::parameter(const std::string& name) {
  const auto it = std::find(names_.begin(), names_.end(), name);
  if (it == names_.end()) fail(ErrorCode::kNotFound, "no parameter named '" + name + "'");
  return params_[static_cast<std::size_t>(it - names_.begin())];
}

const Tensor& SamplerModel::parameter(const std::string& name) const {
  return const_cast<SamplerModel*>(this)->parameter(name);
}

namespace {

nn::Shape conv_kernel_shape(int dim, int out, int in) {
  return dim == 3 ? nn::Shape{out, in, 3, 3, 3} : nn::Shape{out, in, 3, 3};
}

std::vector<std::pair<std::string, nn::Shape>> parameter_layout(const ModelHyper& h) {
  std::vector<std::pair<std::string, nn::Shape>> out;
  int in = 1;
  for (int i = 0; i < 3; ++i) {
    const int c = h.conv_channels[static_cast<std::size_t>(i)];
    out.emplace_back("conv" + std::to_string(i + 1) + ".w", conv_kernel_shape(h.dim, c, in));
    out.emplace_back("conv" + std::to_string(i + 1) + ".b", nn::Shape{c});
    in = c;
  }
  const int d = h.d_model, hw = h.n_head * h.head_dim;
  out.emplace_back("embed.w", nn::Shape{h.dim, d});
  out.emplace_back("embed.b", nn::Shape{d});
  out.emplace_back("role", nn::Shape{3, d});
  for (int l = 0; l < h.layers; ++l) {
    const std::string p = "layer" + std::to_string(l) + ".";
    for (const char* m : {"q", "k", "v"}) {
      out.emplace_back(p + "attn.w" + m, nn::Shape{d, hw});
      out.emplace_back(p + "attn.b" + m, nn::Shape{hw});
    }
    out.emplace_back(p + "attn.wo", nn::Shape{hw, d});
    out.emplace_back(p + "attn.bo", nn::Shape{d});
    out.emplace_back(p + "ln1.g", nn::Shape{d});
    out.emplace_back(p + "ln1.b", nn::Shape{d});
    out.emplace_back(p + "ff1.w", nn::Shape{d, h.ffn_dim});
    out.emplace_back(p + "ff1.b", nn::Shape{h.ffn_dim});
    out.emplace_back(p + "ff2.w", nn::Shape{h.ffn_dim, d});
    out.emplace_back(p + "ff2.b", nn::Shape{d});
    out.emplace_back(p + "ln2.g", nn::Shape{d});
    out.emplace_back(p + "ln2.b", nn::Shape{d});
  }
  out.emplace_back("head.w", nn::Shape{d, h.dim});
  out.emplace_back("head.b", nn::Shape{h.dim});
  return out;
}

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

}  // namespace

SamplerModel SamplerModel::create(const ModelHyper& hyper, std::uint64_t seed) {
  hyper.validate();
  SamplerModel m;
  m.hyper_ = hyper;
  for (const auto& [name, shape] : parameter_layout(hyper)) m.add_param(name, shape);

  Rng rng(derive_seed(seed, "model-init"));
  for (std::size_t i = 0; i < m.params_.size(); ++i) {
    const std::string& name = m.names_[i];
    auto& t = m.params_[i];
    auto v = t.data();
    if (ends_with(name, ".g")) {
      std::fill(v.begin(), v.end(), 1.0);
    } else if (name == "role") {
      for (double& x : v) x = 0.02 * rng.normal();
    } else if (name.rfind("head.", 0) == 0) {
      // Small output head: an untrained model starts near the identity offset.
      if (ends_with(name, ".w")) {
        for (double& x : v) x = rng.uniform(-1.0, 1.0) * 1e-3;
      }
    } else if (ends_with(name, ".b") || ends_with(name, ".bq") || ends_with(name, ".bk") ||
               ends_with(name, ".bv") || ends_with(name, ".bo")) {
      // zero bias
    } else {
      const auto& s = t.shape();
      const std::size_t fan_in = s.size() == 2 ? static_cast<std::size_t>(s[0]) : t.size() / static_cast<std::size_t>(s[0]);
      const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
      for (double& x : v) x = rng.uniform(-bound, bound);
    }
  }
  m.bind();
  return m;
}

void SamplerModel::bind() {
  conv_w_.clear();
  conv_b_.clear();
  for (int i = 1; i <= 3; ++i) {
    conv_w_.push_back(parameter("conv" + std::to_string(i) + ".w"));
    conv_b_.push_back(parameter("conv" + std::to_string(i) + ".b"));
  }
  embed_w_ = parameter("embed.w");
  embed_b_ = parameter("embed.b");
  role_ = parameter("role");
  head_w_ = parameter("head.w");
  head_b_ = parameter("head.b");
  layers_.clear();
  for (int l = 0; l < hyper_.layers; ++l) {
    const std::string p = "layer" + std::to_string(l) + ".";
    Layer L;
    L.attn = nn::MultiHeadParams{parameter(p + "attn.wq"), parameter(p + "attn.bq"), parameter(p + "attn.wk"),
                                 parameter(p + "attn.bk"), parameter(p + "attn.wv"), parameter(p + "attn.bv"),
                                 parameter(p + "attn.wo"), parameter(p + "attn.bo")};
    L.ln1_g = parameter(p + "ln1.g");
    L.ln1_b = parameter(p + "ln1.b");
    L.ff1_w = parameter(p + "ff1.w");
    L.ff1_b = parameter(p + "ff1.b");
    L.ff2_w = parameter(p + "ff2.w");
    L.ff2_b = parameter(p + "ff2.b");
    L.ln2_g = parameter(p + "ln2.g");
    L.ln2_b = parameter(p + "ln2.b");
    layers_.push_back(L);
  }
}

std::size_t SamplerModel::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.size();
  return n;
}

Tensor SamplerModel::extract_features(const CostMap& map) const {
  const auto& md = hyper_.map_dims;
  if (map.dim != dim() || map.dims[0] != md[0] || map.dims[1] != md[1] || (dim() == 3 && map.dims[2] != md[2])) {
    fail(ErrorCode::kDimensionMismatch, "cost map dimensions do not match the model's training dimensions");
  }
  nn::Shape shape{1, 1, map.dims[0], map.dims[1]};
  if (dim() == 3) shape.push_back(map.dims[2]);
  std::vector<double> cells(map.cells.begin(), map.cells.end());
  Tensor x = Tensor::from(shape, std::move(cells));
  for (int i = 0; i < 3; ++i) x = nn::relu(nn::conv(x, conv_w_[static_cast<std::size_t>(i)], conv_b_[static_cast<std::size_t>(i)], 1));
  nn::Shape out(x.shape().begin() + 1, x.shape().end());
  return nn::reshape(x, out);
}

Tensor SamplerModel::patch_features(const CostMap& map, const std::vector<Cell>& cells) const {
  std::vector<std::pair<const CostMap*, Cell>> tagged;
  tagged.reserve(cells.size());
  for (const auto& c : cells) tagged.emplace_back(&map, c);
  return conv_stack_patches(tagged);
}

// Valid convolutions over a (2R+1)-wide window around each cell. After each layer,
// positions outside the map are zeroed, which reproduces the zero padding of the
// full-map convolution exactly.
Tensor SamplerModel::conv_stack_patches(const std::vector<std::pair<const CostMap*, Cell>>& cells) const {
  const int dim = hyper_.dim;
  const int side = 2 * kReceptiveRadius + 1;
  const int p = static_cast<int>(cells.size());
  const int depth = dim == 3 ? side : 1;
  const std::size_t per = static_cast<std::size_t>(side) * side * depth;
  std::vector<double> patches(per * static_cast<std::size_t>(p), 0.0);
  for (int n = 0; n < p; ++n) {
    const CostMap& map = *cells[static_cast<std::size_t>(n)].first;
    const auto& c = cells[static_cast<std::size_t>(n)].second.c;
    std::size_t idx = static_cast<std::size_t>(n) * per;
    for (int a = -kReceptiveRadius; a <= kReceptiveRadius; ++a) {
      for (int b = -kReceptiveRadius; b <= kReceptiveRadius; ++b) {
        for (int e = (dim == 3 ? -kReceptiveRadius : 0); e <= (dim == 3 ? kReceptiveRadius : 0); ++e, ++idx) {
          const int i = c[0] + a, j = c[1] + b, k = c[2] + e;
          if (map.in_bounds(i, j, k)) patches[idx] = map.occupied(i, j, k) ? 1.0 : 0.0;
        }
      }
    }
  }
  nn::Shape shape{p, 1, side, side};
  if (dim == 3) shape.push_back(side);
  Tensor x = Tensor::from(shape, std::move(patches));

  for (int layer = 0; layer < 3; ++layer) {
    x = nn::relu(nn::conv(x, conv_w_[static_cast<std::size_t>(layer)], conv_b_[static_cast<std::size_t>(layer)], 0));
    const int r = kReceptiveRadius - layer - 1;
    if (r == 0) break;
    const int w = 2 * r + 1;
    const std::size_t per_out = static_cast<std::size_t>(w) * w * (dim == 3 ? w : 1);
    std::vector<double> mask(per_out * static_cast<std::size_t>(p));
    bool any_outside = false;
    for (int n = 0; n < p; ++n) {
      const CostMap& map = *cells[static_cast<std::size_t>(n)].first;
      const auto& c = cells[static_cast<std::size_t>(n)].second.c;
      std::size_t idx = static_cast<std::size_t>(n) * per_out;
      for (int a = -r; a <= r; ++a) {
        for (int b = -r; b <= r; ++b) {
          for (int e = (dim == 3 ? -r : 0); e <= (dim == 3 ? r : 0); ++e, ++idx) {
            const bool inside = map.in_bounds(c[0] + a, c[1] + b, c[2] + e);
            mask[idx] = inside ? 1.0 : 0.0;
            any_outside |= !inside;
          }
        }
      }
    }
    if (any_outside) x = nn::mask_channels(x, mask);
  }
  return nn::reshape(x, {p, hyper_.d_model});
}

Tensor SamplerModel::embed_tokens(const std::vector<SequenceInput>& batch, std::vector<std::uint8_t>* key_masked) const {
  const int d = hyper_.d_model;
  const int sd = hyper_.dim;
  int total = 0;
  for (const auto& s : batch) {
    if (s.tokens.points.size() != s.tokens.roles.size()) fail(ErrorCode::kInvalidArgument, "token roles/points mismatch");
    if (s.tokens.points.empty()) fail(ErrorCode::kInvalidArgument, "empty token sequence");
    total += std::max(s.tokens.pad_to, static_cast<int>(s.tokens.points.size()));
  }
  const bool cached = !batch.empty() && batch.front().cache != nullptr;
  std::vector<double> coords(static_cast<std::size_t>(total) * sd, 0.0);
  std::vector<double> pe(static_cast<std::size_t>(total) * d, 0.0);
  std::vector<double> row_mask(static_cast<std::size_t>(total) * d, 1.0);
  std::vector<double> cached_features;
  if (cached) cached_features.assign(static_cast<std::size_t>(total) * d, 0.0);
  std::vector<int> roles(static_cast<std::size_t>(total), 0);
  std::vector<int> feature_row(static_cast<std::size_t>(total), 0);
  key_masked->assign(static_cast<std::size_t>(total), 0);

  // Distinct (map, cell) pairs; each is convolved once.
  std::map<std::pair<const CostMap*, std::size_t>, int> unique;
  std::vector<std::pair<const CostMap*, Cell>> unique_cells;
  bool padded = false;

  int offset = 0;
  for (const auto& s : batch) {
    if (!s.map) fail(ErrorCode::kInvalidArgument, "sequence without a cost map");
    if ((s.cache != nullptr) != cached) fail(ErrorCode::kInvalidArgument, "mixed cached and differentiable features");
    if (s.map->dim != sd) fail(ErrorCode::kDimensionMismatch, "sequence dimensionality does not match the model");
    const auto& pts = s.tokens.points;
    const int len = std::max(s.tokens.pad_to, static_cast<int>(pts.size()));
    std::vector<Cell> cells;
    cells.reserve(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) {
      const std::size_t row = static_cast<std::size_t>(offset) + i;
      for (int a = 0; a < sd; ++a) {
        coords[row * sd + static_cast<std::size_t>(a)] = pts[i][a] / hyper_.map_dims[static_cast<std::size_t>(a)];
      }
      const auto code = positional_encoding(pts[i], d);
      std::copy(code.begin(), code.end(), pe.begin() + static_cast<std::ptrdiff_t>(row * d));
      roles[row] = static_cast<int>(s.tokens.roles[i]);
      const Cell cell = cell_of(*s.map, pts[i]);
      cells.push_back(cell);
      if (!cached) {
        const auto key = std::make_pair(s.map, s.map->index(cell.c[0], cell.c[1], cell.c[2]));
        auto [it, inserted] = unique.emplace(key, static_cast<int>(unique_cells.size()));
        if (inserted) unique_cells.emplace_back(s.map, cell);
        feature_row[row] = it->second;
      }
    }
    if (cached) {
      const auto rows = s.cache->lookup(cells);
      std::copy(rows.begin(), rows.end(), cached_features.begin() + static_cast<std::ptrdiff_t>(offset) * d);
    }
    for (int i = static_cast<int>(pts.size()); i < len; ++i) {
      const std::size_t row = static_cast<std::size_t>(offset + i);
      (*key_masked)[row] = 1;
      std::fill_n(row_mask.begin() + static_cast<std::ptrdiff_t>(row * d), d, 0.0);
      padded = true;
    }
    offset += len;
  }

  Tensor features;
  if (cached) {
    features = Tensor::from({total, d}, std::move(cached_features));
  } else {
    features = nn::gather_rows(conv_stack_patches(unique_cells), feature_row);
  }

  Tensor x = nn::linear(Tensor::from({total, sd}, coords), embed_w_, embed_b_);
  x = nn::add(x, nn::gather_rows(role_, roles));
  x = nn::add(x, features);
  x = nn::add(x, Tensor::from({total, d}, std::move(pe)));
  if (padded) x = nn::mul(x, Tensor::from({total, d}, std::move(row_mask)));
  return x;
}
Tensor SamplerModel::encode(Tensor x, const nn::AttentionLayout& layout, int stop_layer) const {
  const int n = stop_layer < 0 ? hyper_.layers : stop_layer;
  for (int l = 0; l < n; ++l) {
    const Layer& L = layers_[static_cast<std::size_t>(l)];
    const Tensor a = nn::multi_head_attention(x, x, L.attn, hyper_.n_head, hyper_.head_dim, layout);
    x = nn::layer_norm(nn::add(x, a), L.ln1_g, L.ln1_b);
    const Tensor f = nn::linear(nn::relu(nn::linear(x, L.ff1_w, L.ff1_b)), L.ff2_w, L.ff2_b);
    x = nn::layer_norm(nn::add(x, f), L.ln2_g, L.ln2_b);
  }
  return x;
}

namespace {

nn::AttentionLayout packed_layout(const std::vector<SequenceInput>& batch, std::vector<std::uint8_t> key_masked,
                                  std::vector<int>* readout) {
  std::vector<nn::SeqSpan> spans;
  int offset = 0;
  for (const auto& s : batch) {
    const int len = std::max(s.tokens.pad_to, static_cast<int>(s.tokens.points.size()));
    spans.push_back({offset, len});
    if (readout) readout->push_back(offset + static_cast<int>(s.tokens.points.size()) - 1);
    offset += len;
  }
  return nn::AttentionLayout::self(spans, std::move(key_masked));
}

}  // namespace

Tensor SamplerModel::forward(const std::vector<SequenceInput>& batch) const {
  if (batch.empty()) fail(ErrorCode::kInvalidArgument, "empty batch");
  std::vector<std::uint8_t> key_masked;
  Tensor x = embed_tokens(batch, &key_masked);
  std::vector<int> readout;
  const auto layout = packed_layout(batch, std::move(key_masked), &readout);
  x = encode(x, layout);
  Tensor out = nn::linear(nn::gather_rows(x, readout), head_w_, head_b_);
  if (hyper_.residual_head) {
    const int sd = hyper_.dim;
    std::vector<double> base;
    base.reserve(batch.size() * static_cast<std::size_t>(sd));
    for (const auto& s : batch) {
      const Point& last = s.tokens.points.back();
      for (int a = 0; a < sd; ++a) base.push_back(last[a] / hyper_.map_dims[static_cast<std::size_t>(a)]);
    }
    out = nn::add(out, Tensor::from({static_cast<int>(batch.size()), sd}, std::move(base)));
  }
  return out;
}

std::vector<double> SamplerModel::attention_probabilities(const SequenceInput& seq, int layer, int head) const {
  if (layer < 0 || layer >= hyper_.layers) fail(ErrorCode::kInvalidArgument, "layer index out of range");
  if (head < 0 || head >= hyper_.n_head) fail(ErrorCode::kInvalidArgument, "head index out of range");
  nn::NoGradGuard guard;
  const std::vector<SequenceInput> batch{seq};
  std::vector<std::uint8_t> key_masked;
  Tensor x = embed_tokens(batch, &key_masked);
  const auto layout = packed_layout(batch, std::move(key_masked), nullptr);
  x = encode(x, layout, layer);
  const auto& p = layers_[static_cast<std::size_t>(layer)].attn;
  return nn::attention_weights(nn::linear(x, p.wq, p.bq), nn::linear(x, p.wk, p.bk), layout, hyper_.n_head, head, 0);
}

Point SamplerModel::denormalize(std::span<const double> normalized, const Workspace& ws) const {
  if (static_cast<int>(normalized.size()) != ws.dim || ws.dim != dim()) {
    fail(ErrorCode::kDimensionMismatch, "prediction dimensionality does not match the workspace");
  }
  Point p = Point::zeros(ws.dim);
  for (int a = 0; a < ws.dim; ++a) {
    const double size = ws.size[static_cast<std::size_t>(a)];
    p[a] = std::clamp(normalized[static_cast<std::size_t>(a)] * size, 0.0, size);
  }
  return p;
}

void SamplerModel::round_to_float32() {
  for (auto& t : params_) {
    for (double& v : t.data()) v = static_cast<double>(static_cast<float>(v));
  }
}

namespace {

constexpr const char* kWeightsMagic = "PLANFORMER-WEIGHTS v1";

nlohmann::json hyper_to_json(const ModelHyper& h) {
  return {{"dim", h.dim},           {"d_model", h.d_model},     {"n_head", h.n_head},
          {"head_dim", h.head_dim}, {"layers", h.layers},       {"ffn_dim", h.ffn_dim},
          {"max_seq_len", h.max_seq_len}, {"conv_channels", h.conv_channels}, {"map_dims", h.map_dims},
          {"residual_head", h.residual_head}};
}

ModelHyper hyper_from_json(const nlohmann::json& j) {
  ModelHyper h;
  h.dim = j.at("dim").get<int>();
  h.d_model = j.at("d_model").get<int>();
  h.n_head = j.at("n_head").get<int>();
  h.head_dim = j.at("head_dim").get<int>();
  h.layers = j.at("layers").get<int>();
  h.ffn_dim = j.at("ffn_dim").get<int>();
  h.max_seq_len = j.at("max_seq_len").get<int>();
  h.conv_channels = j.at("conv_channels").get<std::array<int, 3>>();
  h.map_dims = j.at("map_dims").get<std::array<int, 3>>();
  h.residual_head = j.at("residual_head").get<bool>();
  return h;
}

static_assert(std::endian::native == std::endian::little, "weight files are little-endian float32");

}  // namespace

void SamplerModel::save(const std::string& path) const {
  nlohmann::json tensors = nlohmann::json::array();
  std::size_t offset = 0;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    tensors.push_back({{"name", names_[i]}, {"shape", params_[i].shape()}, {"offset", offset},
                       {"count", params_[i].size()}});
    offset += params_[i].size();
  }
  const std::string manifest = nlohmann::json{{"hyper", hyper_to_json(hyper_)}, {"tensors", tensors}}.dump();
  std::vector<float> blob;
  blob.reserve(offset);
  for (const auto& t : params_) {
    for (const double v : t.data()) blob.push_back(static_cast<float>(v));
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::kIo, "cannot open '" + path + "' for writing");
  out << kWeightsMagic << '\n' << manifest.size() << '\n' << manifest;
  out.write(reinterpret_cast<const char*>(blob.data()), static_cast<std::streamsize>(blob.size() * sizeof(float)));
  if (!out) fail(ErrorCode::kIo, "failed writing '" + path + "'");
}

SamplerModel SamplerModel::load(const std::string& path, int expected_dim) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, "cannot open model file '" + path + "'");
  std::string magic, len_line;
  std::getline(in, magic);
  if (magic != kWeightsMagic) fail(ErrorCode::kFormat, "'" + path + "' is not a model weights file");
  std::getline(in, len_line);
  std::size_t manifest_len = 0;
  try {
    manifest_len = std::stoul(len_line);
  } catch (const std::exception&) {
    fail(ErrorCode::kFormat, "bad manifest length in '" + path + "'");
  }
  if (manifest_len > (1u << 24)) fail(ErrorCode::kFormat, "manifest too large in '" + path + "'");
  std::string manifest(manifest_len, '\0');
  in.read(manifest.data(), static_cast<std::streamsize>(manifest_len));
  if (static_cast<std::size_t>(in.gcount()) != manifest_len) fail(ErrorCode::kFormat, "truncated manifest in '" + path + "'");

  SamplerModel m;
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(manifest);
    m.hyper_ = hyper_from_json(j.at("hyper"));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kFormat, "corrupt manifest in '" + path + "': " + e.what());
  }
  m.hyper_.validate();
  if (expected_dim != 0 && m.hyper_.dim != expected_dim) {
    fail(ErrorCode::kDimensionMismatch, "model '" + path + "' is " + std::to_string(m.hyper_.dim) +
                                            "-D but a " + std::to_string(expected_dim) + "-D model was requested");
  }
  const auto layout = parameter_layout(m.hyper_);
  std::size_t total = 0;
  try {
    const auto& tensors = j.at("tensors");
    if (tensors.size() != layout.size()) fail(ErrorCode::kFormat, "tensor count mismatch in '" + path + "'");
    for (std::size_t i = 0; i < layout.size(); ++i) {
      const auto& t = tensors[i];
      if (t.at("name").get<std::string>() != layout[i].first || t.at("shape").get<nn::Shape>() != layout[i].second ||
          t.at("offset").get<std::size_t>() != total) {
        fail(ErrorCode::kFormat, "unexpected tensor entry " + std::to_string(i) + " in '" + path + "'");
      }
      total += nn::numel(layout[i].second);
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kFormat, "corrupt manifest in '" + path + "': " + e.what());
  }
  std::vector<float> blob(total);
  in.read(reinterpret_cast<char*>(blob.data()), static_cast<std::streamsize>(total * sizeof(float)));
  if (static_cast<std::size_t>(in.gcount()) != total * sizeof(float)) {
    fail(ErrorCode::kFormat, "truncated weight data in '" + path + "'");
  }
  std::size_t offset = 0;
  for (const auto& [name, shape] : layout) {
    const std::size_t n = nn::numel(shape);
    m.names_.push_back(name);
    m.params_.push_back(Tensor::from(shape, std::vector<double>(blob.begin() + static_cast<std::ptrdiff_t>(offset),
                                                                blob.begin() + static_cast<std::ptrdiff_t>(offset + n)),
                                     true));
    offset += n;
  }
  m.bind();
  return m;
}

Point predict_next(const SamplerModel& model, FeatureCache& cache, const Environment& env,
                   std::span<const Point> nodes) {
  const int max_len = model.hyper().max_seq_len;
  const int len = static_cast<int>(std::min<std::size_t>(nodes.size(), static_cast<std::size_t>(max_len - 2))) + 2;
  TokenSequence tokens = build_sequence(env.goal, env.start, nodes, max_len, len);
  nn::NoGradGuard guard;
  const Tensor out = model.forward({SequenceInput{&cache.map(), &cache, std::move(tokens)}});
  return model.denormalize(out.data(), env.workspace);
}

std::string to_string(ContextMode mode) {
  return mode == ContextMode::kBestBranch ? "best_branch" : "insertion_order";
}

ContextMode context_mode_from_string(const std::string& name) {
  if (name == "best_branch") return ContextMode::kBestBranch;
  if (name == "insertion_order") return ContextMode::kInsertionOrder;
  fail(ErrorCode::kInvalidArgument, "unknown context mode '" + name + "' (expected best_branch or insertion_order)");
}

std::vector<Point> context_nodes(const Tree& tree, const Point& goal, ContextMode mode) {
  if (mode == ContextMode::kInsertionOrder) return {tree.points().begin(), tree.points().end()};
  return extract_path(tree, nearest(tree, goal));
}

// ---------------------------------------------------------------------------
// HybridSampler

HybridSampler::HybridSampler(std::shared_ptr<const SamplerModel> model, double alpha, double goal_threshold,
                             ContextMode context)
    : model_(std::move(model)), alpha_(alpha), goal_threshold_(goal_threshold), context_(context) {
  if (!model_) fail(ErrorCode::kMissingModel, "hybrid sampler needs a model");
  if (!(alpha >= 0.0 && alpha <= 1.0)) fail(ErrorCode::kInvalidArgument, "alpha must lie in [0, 1]");
  if (!(goal_threshold > 0.0)) fail(ErrorCode::kInvalidArgument, "goal threshold must be positive");
}

void HybridSampler::reset(const Environment& env) {
  if (env.workspace.dim != model_->dim()) {
    fail(ErrorCode::kDimensionMismatch, "environment is " + std::to_string(env.workspace.dim) + "-D but the model is " +
                                            std::to_string(model_->dim()) + "-D");
  }
  map_ = std::make_unique<CostMap>(rasterize(env));
  cache_ = std::make_unique<FeatureCache>(*model_, *map_);
  cached_tree_size_ = 0;
}

Point HybridSampler::sample(const SampleRequest& request, PlanStreams& streams) {
  if (!cache_) reset(request.env);
  last_uniform_ = request.goal_connected || streams.branch.uniform() < alpha_;
  if (last_uniform_) {
    ++uniform_draws_;
    return uniform_.sample(request, streams);
  }
  ++model_draws_;
  // Tokens depend only on the tree's points, so a failed extension leaves the prediction unchanged.
  if (cached_tree_size_ != request.tree.size()) {
    cached_prediction_ =
        predict_next(*model_, *cache_, request.env, context_nodes(request.tree, request.env.goal, context_));
    cached_tree_size_ = request.tree.size();
  }
  if (distance(cached_prediction_, request.env.goal) <= goal_threshold_) return request.env.goal;
  return cached_prediction_;
}

}  // namespace planformer
