#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "gradcheck.hpp"
#include "model.hpp"
#include "support.hpp"

using namespace planformer;
using planformer::test::circle;
using planformer::test::env2d;
using planformer::test::env3d;

namespace {

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("planformer_test_" + name)).string();
}

ModelHyper small_hyper(int dim, int size) {
  Workspace ws;
  ws.dim = dim;
  ws.size = {static_cast<double>(size), static_cast<double>(size), dim == 3 ? static_cast<double>(size) : 0.0};
  return ModelHyper::for_workspace(ws);
}

std::vector<Point> random_nodes(int n, const Workspace& ws, Rng& rng) {
  std::vector<Point> out;
  for (int i = 0; i < n; ++i) {
    Point p = Point::zeros(ws.dim);
    for (int a = 0; a < ws.dim; ++a) p[a] = rng.uniform(0.0, ws.size[static_cast<std::size_t>(a)]);
    out.push_back(p);
  }
  return out;
}

std::vector<double> forward_one(const SamplerModel& m, const CostMap& map, TokenSequence seq) {
  nn::NoGradGuard guard;
  const nn::Tensor out = m.forward({SequenceInput{&map, nullptr, std::move(seq)}});
  return {out.data().begin(), out.data().end()};
}

}  // namespace

TEST_CASE("parameter counts match the reported model size") {
  const SamplerModel m2 = SamplerModel::create(ModelHyper{}, 1);
  CHECK(std::abs(static_cast<double>(m2.parameter_count()) - 0.52e6) <= 0.052e6);
  Workspace w3;
  w3.dim = 3;
  w3.size = {50, 50, 50};
  const SamplerModel m3 = SamplerModel::create(ModelHyper::for_workspace(w3), 1);
  CHECK(std::abs(static_cast<double>(m3.parameter_count()) - 0.56e6) <= 0.056e6);
  CHECK(m2.hyper().d_model == 64);
  CHECK(m2.hyper().n_head == 6);
  CHECK(m2.hyper().layers == 6);
}

TEST_CASE("hyperparameter validation") {
  ModelHyper h;
  h.conv_channels[2] = 32;
  CHECK_THROWS_AS(h.validate(), Error);
  h = ModelHyper{};
  h.dim = 4;
  CHECK_THROWS_AS(h.validate(), Error);
  h = ModelHyper{};
  h.max_seq_len = 2;
  CHECK_THROWS_AS(h.validate(), Error);
}

TEST_CASE("feature extraction") {
  const SamplerModel m = SamplerModel::create(ModelHyper{}, 3);
  const Environment env = generate_random_env(EnvGenSpec::standard_2d(), 5);
  const CostMap map = rasterize(env);
  nn::NoGradGuard guard;
  const nn::Tensor f = m.extract_features(map);
  CHECK(f.shape() == nn::Shape{64, 100, 100});
  const nn::Tensor g = m.extract_features(rasterize(env));
  for (std::size_t i = 0; i < f.size(); i += 97) CHECK(f.data()[i] == g.data()[i]);

  // Patch features and the lazy cache reproduce the full map at any cell, borders included.
  std::vector<Cell> cells{Cell{{0, 0, 0}}, Cell{{99, 99, 0}}, Cell{{0, 57, 0}}, Cell{{42, 13, 0}}, Cell{{98, 1, 0}}};
  const nn::Tensor p = m.patch_features(map, cells);
  FeatureCache cache(m, map);
  const auto rows = cache.lookup(cells);
  for (std::size_t c = 0; c < cells.size(); ++c) {
    for (int ch = 0; ch < 64; ++ch) {
      const double full = f.data()[static_cast<std::size_t>(ch) * 10000 + static_cast<std::size_t>(cells[c].c[0]) * 100 +
                                   static_cast<std::size_t>(cells[c].c[1])];
      CHECK(p.data()[c * 64 + static_cast<std::size_t>(ch)] == doctest::Approx(full).epsilon(1e-12));
      CHECK(rows[c * 64 + static_cast<std::size_t>(ch)] == doctest::Approx(full).epsilon(1e-12));
    }
  }
  CHECK(cache.cached() == cells.size());
}

TEST_CASE("3-D patch features match the full feature volume") {
  const SamplerModel m = SamplerModel::create(small_hyper(3, 6), 4);
  const Environment env = env3d(6, {circle(0, Point(3, 3, 3), 1.6)});
  const CostMap map = rasterize(env);
  nn::NoGradGuard guard;
  const nn::Tensor f = m.extract_features(map);
  CHECK(f.shape() == nn::Shape{64, 6, 6, 6});
  std::vector<Cell> cells{Cell{{0, 0, 0}}, Cell{{5, 5, 5}}, Cell{{2, 3, 4}}};
  const nn::Tensor p = m.patch_features(map, cells);
  for (std::size_t c = 0; c < cells.size(); ++c) {
    const auto& k = cells[c].c;
    for (int ch = 0; ch < 64; ++ch) {
      const double full = f.data()[static_cast<std::size_t>(ch * 216 + k[0] * 36 + k[1] * 6 + k[2])];
      CHECK(p.data()[c * 64 + static_cast<std::size_t>(ch)] == doctest::Approx(full).epsilon(1e-12));
    }
  }
}

TEST_CASE("feature extraction rejects a map of the wrong size") {
  const SamplerModel m = SamplerModel::create(ModelHyper{}, 3);
  const CostMap small = rasterize(env2d(20, 20));
  CHECK_THROWS_AS(m.extract_features(small), Error);
  CHECK_THROWS_AS(FeatureCache(m, small), Error);
}

TEST_CASE("build_sequence") {
  const Point g(90, 90), s(10, 10);
  const TokenSequence empty = build_sequence(g, s, {}, 256);
  CHECK(empty.points.size() == 2);
  CHECK(empty.roles[0] == TokenRole::kGoal);
  CHECK(empty.roles[1] == TokenRole::kStart);
  CHECK(empty.pad_to == 256);

  std::vector<Point> nodes;
  for (int i = 0; i < 10; ++i) nodes.emplace_back(i, i);
  const TokenSequence t = build_sequence(g, s, nodes, 6);
  REQUIRE(t.points.size() == 6);
  CHECK(t.points[2] == Point(6, 6));
  CHECK(t.points[5] == Point(9, 9));
  CHECK(t.roles[5] == TokenRole::kNode);
  CHECK_THROWS_AS(build_sequence(g, s, nodes, 6, 5), Error);
  CHECK_THROWS_AS(build_sequence(g, s, nodes, 6, 7), Error);
  CHECK(build_sequence(g, s, nodes, 256, 12).pad_to == 12);
}

TEST_CASE("token embedding is coordinates + role + feature + positional code") {
  const SamplerModel m = SamplerModel::create(small_hyper(2, 12), 6);
  const Environment env = env2d(12, 12, {circle(0, Point(6, 6), 2.5)});
  const CostMap map = rasterize(env);
  const std::vector<Point> nodes{Point(0, 0), Point(3.2, 7.9)};
  TokenSequence seq = build_sequence(Point(11, 11), Point(1, 1), nodes, 256, 7);
  nn::NoGradGuard guard;
  std::vector<std::uint8_t> masked;
  const nn::Tensor x = m.embed_tokens({SequenceInput{&map, nullptr, seq}}, &masked);
  REQUIRE(x.shape() == nn::Shape{7, 64});
  CHECK(masked == std::vector<std::uint8_t>{0, 0, 0, 0, 1, 1, 1});
  const nn::Tensor f = m.extract_features(map);
  const auto& w = m.parameter("embed.w");
  const auto& b = m.parameter("embed.b");
  const auto& role = m.parameter("role");
  for (int r = 0; r < 4; ++r) {
    const Point& p = seq.points[static_cast<std::size_t>(r)];
    const auto pe = positional_encoding(p, 64);
    const int ci = std::min(static_cast<int>(p[0]), 11), cj = std::min(static_cast<int>(p[1]), 11);
    const int rl = static_cast<int>(seq.roles[static_cast<std::size_t>(r)]);
    for (int c = 0; c < 64; ++c) {
      double expect = b.data()[static_cast<std::size_t>(c)];
      for (int a = 0; a < 2; ++a) expect += p[a] / 12.0 * w.data()[static_cast<std::size_t>(a * 64 + c)];
      expect += role.data()[static_cast<std::size_t>(rl * 64 + c)];
      expect += f.data()[static_cast<std::size_t>(c * 144 + ci * 12 + cj)];
      expect += pe[static_cast<std::size_t>(c)];
      CHECK(x.data()[static_cast<std::size_t>(r * 64 + c)] == doctest::Approx(expect).epsilon(1e-12));
    }
  }
  for (int r = 4; r < 7; ++r) {
    for (int c = 0; c < 64; ++c) CHECK(x.data()[static_cast<std::size_t>(r * 64 + c)] == 0.0);
  }
  // Node at the origin: positional part has even entries 0 and odd entries 1.
  const auto pe0 = positional_encoding(Point(0, 0), 64);
  for (int c = 0; c < 64; ++c) CHECK(pe0[static_cast<std::size_t>(c)] == (c % 2 == 0 ? 0.0 : 1.0));
}

TEST_CASE("constant head predicts its bias") {
  ModelHyper h;
  h.residual_head = false;
  SamplerModel m = SamplerModel::create(h, 2);
  std::fill(m.parameter("head.w").data().begin(), m.parameter("head.w").data().end(), 0.0);
  m.parameter("head.b").data()[0] = 0.5;
  m.parameter("head.b").data()[1] = 0.5;
  Rng rng(1);
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const Environment env = generate_random_env(EnvGenSpec::standard_2d(), seed);
    const CostMap map = rasterize(env);
    FeatureCache cache(m, map);
    const auto nodes = random_nodes(1 + static_cast<int>(seed) * 5, env.workspace, rng);
    const Point p = predict_next(m, cache, env, nodes);
    CHECK(p[0] == doctest::Approx(50.0));
    CHECK(p[1] == doctest::Approx(50.0));
  }
  // Predictions are clamped to the workspace.
  m.parameter("head.b").data()[0] = 7.0;
  m.parameter("head.b").data()[1] = -3.0;
  const Environment env = generate_random_env(EnvGenSpec::standard_2d(), 9);
  const CostMap map = rasterize(env);
  FeatureCache cache(m, map);
  const Point p = predict_next(m, cache, env, std::vector<Point>{env.start});
  CHECK(p == Point(100.0, 0.0));
}

TEST_CASE("residual head starts near the last node") {
  const SamplerModel m = SamplerModel::create(ModelHyper{}, 8);
  const Environment env = generate_random_env(EnvGenSpec::standard_2d(), 12);
  const CostMap map = rasterize(env);
  FeatureCache cache(m, map);
  const std::vector<Point> nodes{env.start, Point(40, 60)};
  const Point p = predict_next(m, cache, env, nodes);
  CHECK(distance(p, Point(40, 60)) < 5.0);
}

TEST_CASE("padding invariance and masked attention") {
  const SamplerModel m = SamplerModel::create(ModelHyper{}, 21);
  Rng rng(77);
  for (int ctx = 0; ctx < 20; ++ctx) {
    const Environment env = generate_random_env(EnvGenSpec::standard_2d(), static_cast<std::uint64_t>(ctx));
    const CostMap map = rasterize(env);
    const auto nodes = random_nodes(1 + static_cast<int>(rng.uniform_int(0, 40)), env.workspace, rng);
    const int actual = static_cast<int>(nodes.size()) + 2;
    const auto a = forward_one(m, map, build_sequence(env.goal, env.start, nodes, 256, actual));
    const auto b = forward_one(m, map, build_sequence(env.goal, env.start, nodes, 256, 64));
    const auto c = forward_one(m, map, build_sequence(env.goal, env.start, nodes, 256, 256));
    for (int k = 0; k < 2; ++k) {
      CHECK(std::abs(a[static_cast<std::size_t>(k)] - b[static_cast<std::size_t>(k)]) <= 1e-6);
      CHECK(std::abs(a[static_cast<std::size_t>(k)] - c[static_cast<std::size_t>(k)]) <= 1e-6);
    }
    if (ctx < 3) {
      const SequenceInput seq{&map, nullptr, build_sequence(env.goal, env.start, nodes, 256, 64)};
      for (int layer = 0; layer < 6; ++layer) {
        for (int head = 0; head < 6; ++head) {
          const auto w = m.attention_probabilities(seq, layer, head);
          REQUIRE(w.size() == 64u * 64u);
          for (int q = 0; q < 64; ++q) {
            for (int key = actual; key < 64; ++key) REQUIRE(w[static_cast<std::size_t>(q * 64 + key)] == 0.0);
          }
        }
      }
    }
  }
}

TEST_CASE("batched forward equals per-sequence forward") {
  const SamplerModel m = SamplerModel::create(ModelHyper{}, 5);
  Rng rng(3);
  std::vector<Environment> envs;
  std::vector<CostMap> maps;
  for (std::uint64_t s = 0; s < 3; ++s) envs.push_back(generate_random_env(EnvGenSpec::standard_2d(), s));
  for (const auto& e : envs) maps.push_back(rasterize(e));
  std::vector<SequenceInput> batch;
  for (std::size_t i = 0; i < 3; ++i) {
    const auto nodes = random_nodes(static_cast<int>(i) * 4 + 1, envs[i].workspace, rng);
    batch.push_back(SequenceInput{&maps[i], nullptr,
                                  build_sequence(envs[i].goal, envs[i].start, nodes, 256, static_cast<int>(nodes.size()) + 2)});
  }
  nn::NoGradGuard guard;
  const nn::Tensor all = m.forward(batch);
  for (std::size_t i = 0; i < 3; ++i) {
    const nn::Tensor one = m.forward({batch[i]});
    for (int a = 0; a < 2; ++a) {
      CHECK(all.data()[i * 2 + static_cast<std::size_t>(a)] == doctest::Approx(one.data()[static_cast<std::size_t>(a)]).epsilon(1e-12));
    }
  }
}

TEST_CASE("predictions are deterministic") {
  const SamplerModel m = SamplerModel::create(ModelHyper{}, 5);
  const Environment env = generate_random_env(EnvGenSpec::standard_2d(), 3);
  const CostMap map = rasterize(env);
  FeatureCache c1(m, map), c2(m, map);
  const std::vector<Point> nodes{env.start, Point(30, 30), Point(33, 31)};
  CHECK(predict_next(m, c1, env, nodes) == predict_next(m, c2, env, nodes));
  CHECK(predict_next(m, c1, env, nodes) == predict_next(m, c1, env, nodes));
}

TEST_CASE("save and load") {
  SamplerModel m = SamplerModel::create(ModelHyper{}, 13);
  const std::string path = temp_path("model.bin");
  m.save(path);
  const SamplerModel back = SamplerModel::load(path, 2);
  CHECK(back.hyper() == m.hyper());
  CHECK(back.parameter_names() == m.parameter_names());
  const Environment env = generate_random_env(EnvGenSpec::standard_2d(), 1);
  const CostMap map = rasterize(env);
  FeatureCache c1(m, map), c2(back, map);
  const std::vector<Point> nodes{env.start, Point(20, 70)};
  const Point a = predict_next(m, c1, env, nodes), b = predict_next(back, c2, env, nodes);
  CHECK(std::abs(a[0] - b[0]) <= 1e-6 * 100);
  CHECK(std::abs(a[1] - b[1]) <= 1e-6 * 100);
  // Float32 storage: a rounded model round-trips exactly.
  m.round_to_float32();
  m.save(path);
  const SamplerModel exact = SamplerModel::load(path);
  for (std::size_t i = 0; i < m.parameters().size(); ++i) {
    const auto x = m.parameters()[i].data();
    const auto y = exact.parameters()[i].data();
    for (std::size_t j = 0; j < x.size(); ++j) REQUIRE(x[j] == y[j]);
  }

  SUBCASE("wrong dimensionality") {
    try {
      SamplerModel::load(path, 3);
      FAIL("expected failure");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kDimensionMismatch);
    }
  }
  SUBCASE("corrupted manifest") {
    std::ifstream in(path, std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    const auto pos = bytes.find("head.w");
    REQUIRE(pos != std::string::npos);
    bytes[pos] = 'X';
    const std::string bad = temp_path("bad_model.bin");
    std::ofstream(bad, std::ios::binary) << bytes;
    try {
      SamplerModel::load(bad);
      FAIL("expected failure");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kFormat);
    }
    std::ofstream(bad, std::ios::binary) << "PLANFORMER-WEIGHTS v1\n12\n{not json at\n";
    CHECK_THROWS_AS(SamplerModel::load(bad), Error);
    std::filesystem::remove(bad);
  }
  SUBCASE("truncated blob") {
    std::ifstream in(path, std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    const std::string bad = temp_path("short_model.bin");
    std::ofstream(bad, std::ios::binary) << bytes.substr(0, bytes.size() - 100);
    try {
      SamplerModel::load(bad);
      FAIL("expected failure");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kFormat);
    }
    std::filesystem::remove(bad);
  }
  SUBCASE("missing file") {
    try {
      SamplerModel::load(temp_path("does_not_exist.bin"));
      FAIL("expected failure");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kIo);
    }
  }
  std::filesystem::remove(path);
}

TEST_CASE("gradient check of the assembled model") {
  Rng rng(31337);
  SamplerModel m = SamplerModel::create(small_hyper(2, 12), 17);
  // Move the head away from its near-zero init so gradients reach every layer.
  for (auto& v : m.parameter("head.w").data()) v = 0.2 * rng.normal();
  // Zero-initialized conv biases put empty-cell activations exactly on the ReLU kink.
  for (const char* b : {"conv1.b", "conv2.b", "conv3.b"}) {
    for (auto& v : m.parameter(b).data()) v = 0.1 * rng.normal();
  }
  const Environment env = env2d(12, 12, {circle(0, Point(5, 6), 2.2), circle(1, Point(9, 2), 1.5)});
  const CostMap map = rasterize(env);
  const std::vector<SequenceInput> batch{
      SequenceInput{&map, nullptr, build_sequence(Point(11, 11), Point(1, 1), std::vector<Point>{Point(1, 1), Point(2.5, 3.1)}, 256, 6)},
      SequenceInput{&map, nullptr, build_sequence(Point(10, 2), Point(1, 10), std::vector<Point>{Point(1, 10), Point(0.2, 7.7), Point(3.3, 8.8)}, 256, 5)}};
  const nn::Tensor target = nn::Tensor::from({2, 2}, {0.7, 0.2, 0.4, 0.9});
  const auto g = planformer::test::grad_check([&] { return nn::mse_loss(m.forward(batch), target); }, m.parameters(), rng, 24);
  CHECK(g.checked > 1000);
  CHECK(g.max_rel <= 1e-4);
}

TEST_CASE("context nodes") {
  Tree t(Point(0, 0));
  const std::size_t a = t.add(Point(4, 0), 0);
  t.add(Point(0, 4), 0);
  const std::size_t c = t.add(Point(8, 0), a);
  t.add(Point(0, 8), 2);
  const Point goal(12, 1);
  CHECK(context_nodes(t, goal, ContextMode::kInsertionOrder).size() == 5);
  CHECK(context_nodes(t, goal, ContextMode::kBestBranch) == extract_path(t, c));
  CHECK(context_mode_from_string("best_branch") == ContextMode::kBestBranch);
  CHECK(to_string(ContextMode::kInsertionOrder) == "insertion_order");
  CHECK_THROWS_AS(context_mode_from_string("all"), Error);
}

TEST_CASE("hybrid sampler") {
  auto model = std::make_shared<const SamplerModel>(SamplerModel::create(ModelHyper{}, 4));
  const Environment env = generate_random_env(EnvGenSpec::standard_2d(), 4);
  Tree tree(env.start);

  SUBCASE("uniform-branch frequency is binomial in alpha") {
    for (double alpha : {0.1, 0.5, 0.9}) {
      HybridSampler s(model, alpha, 4.0);
      s.reset(env);
      PlanStreams streams(static_cast<std::uint64_t>(alpha * 1000));
      const int n = 10000;
      for (int i = 0; i < n; ++i) s.sample(SampleRequest{env, tree, false, i}, streams);
      const double sd = std::sqrt(n * alpha * (1 - alpha));
      CHECK(std::abs(s.uniform_draws() - n * alpha) <= 2.576 * sd);
      CHECK(s.uniform_draws() + s.model_draws() == n);
    }
  }
  SUBCASE("alpha 1 is goal-free uniform sampling, alpha 0 is pure prediction") {
    HybridSampler u(model, 1.0, 4.0);
    u.reset(env);
    GoalBiasSampler g(0.0);
    PlanStreams s1(5), s2(5);
    for (int i = 0; i < 200; ++i) {
      CHECK(u.sample(SampleRequest{env, tree, false, i}, s1) == g.sample(SampleRequest{env, tree, false, i}, s2));
    }
    HybridSampler p(model, 0.0, 4.0);
    p.reset(env);
    PlanStreams s3(5);
    const Point first = p.sample(SampleRequest{env, tree, false, 0}, s3);
    for (int i = 1; i < 50; ++i) CHECK(p.sample(SampleRequest{env, tree, false, i}, s3) == first);
    CHECK(p.uniform_draws() == 0);
    const CostMap map = rasterize(env);
    FeatureCache cache(*model, map);
    const Point direct = predict_next(*model, cache, env, context_nodes(tree, env.goal, ContextMode::kBestBranch));
    CHECK((first == direct || first == env.goal));
  }
  SUBCASE("goal connected switches to uniform sampling") {
    HybridSampler p(model, 0.0, 4.0);
    p.reset(env);
    PlanStreams s(1);
    p.sample(SampleRequest{env, tree, true, 0}, s);
    CHECK(p.last_was_uniform());
  }
  SUBCASE("predictions near the goal become the goal") {
    SamplerModel m = SamplerModel::create(ModelHyper{}, 4);
    auto& hw = m.parameter("head.w");
    std::fill(hw.data().begin(), hw.data().end(), 0.0);
    auto& hb = m.parameter("head.b");
    Environment e = env;
    // Residual head: prediction = last node + bias (normalized).
    e.goal = Point(std::min(env.start[0] + 3.0, 100.0), env.start[1]);
    hb.data()[0] = 2.0 / 100.0;
    hb.data()[1] = 0.0;
    if (is_free_point(e, e.goal)) {
      HybridSampler p(std::make_shared<const SamplerModel>(m), 0.0, 4.0);
      p.reset(e);
      PlanStreams s(1);
      CHECK(p.sample(SampleRequest{e, tree, false, 0}, s) == e.goal);
    }
  }
  SUBCASE("reset rejects an environment of the wrong dimension") {
    HybridSampler p(model, 0.5, 4.0);
    try {
      p.reset(generate_random_env(EnvGenSpec::standard_3d(), 1));
      FAIL("expected failure");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kDimensionMismatch);
    }
  }
  SUBCASE("reset recomputes features for a changed map") {
    HybridSampler p(model, 0.0, 4.0);
    p.reset(env);
    PlanStreams s(1);
    Tree t(env.start);
    const Point before = p.sample(SampleRequest{env, t, false, 0}, s);
    Environment blocked = env;
    blocked.obstacles.push_back(circle(99, env.start + Point(1.5, 1.5), 1.0));
    p.reset(blocked);
    const Point after = p.sample(SampleRequest{blocked, t, false, 1}, s);
    const CostMap map = rasterize(blocked);
    FeatureCache cache(*model, map);
    const Point expect = predict_next(*model, cache, blocked, context_nodes(t, blocked.goal, ContextMode::kBestBranch));
    CHECK((after == expect || after == blocked.goal));
    CHECK_FALSE(before == after);
  }
  SUBCASE("argument validation") {
    CHECK_THROWS_AS(HybridSampler(model, 1.5, 4.0), Error);
    CHECK_THROWS_AS(HybridSampler(model, 0.5, 0.0), Error);
    try {
      HybridSampler(nullptr, 0.5, 4.0);
      FAIL("expected failure");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kMissingModel);
    }
  }
}

TEST_CASE("planning with the hybrid sampler yields feasible paths") {
  auto model = std::make_shared<const SamplerModel>(SamplerModel::create(ModelHyper{}, 4));
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const Environment env = generate_random_env(EnvGenSpec::standard_2d(), seed);
    HybridSampler s(model, 0.5, 4.0);
    PlannerConfig cfg;
    cfg.optimization_iterations = 100;
    const PlanResult r = plan(env, s, cfg, seed);
    if (r.success) CHECK(path_is_feasible(env, r.path));
  }
}
