#include "gae/serialize.hpp"
#include "gae/stack.hpp"
#include "oracle.hpp"

#include <gtest/gtest.h>

#include <random>
#include <sstream>

using namespace gae;

namespace {

Matrix uniform01(Index r, Index c, std::uint64_t seed) {
  Rng rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Matrix M(r, c);
  for (Index k = 0; k < M.size(); ++k) M.data()[k] = u(rng);
  return M;
}

GaeModel random_model(const std::vector<Index>& dims, std::uint64_t seed) {
  GaeModel m;
  Rng rng(seed);
  std::normal_distribution<double> g(0.0, 0.6);
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    LayerParams p(dims[i], dims[i + 1]);
    for (auto* a : {&p.W_H, &p.W_Q})
      for (Index k = 0; k < a->size(); ++k) a->data()[k] = g(rng);
    for (auto* b : {&p.b_H, &p.b_Q})
      for (Index k = 0; k < b->size(); ++k) (*b)(k) = g(rng);
    m.layers.push_back(p);
  }
  return m;
}

TrainConfig config(double lambda, std::uint64_t seed, int max_iter = 60) {
  TrainConfig c;
  c.lambda = lambda;
  c.seed = seed;
  c.max_iter = max_iter;
  return c;
}

}  // namespace

TEST(EncodeStack, SingleLayerEqualsEncode) {
  const GaeModel m = random_model({5, 3}, 1);
  const Matrix X = uniform01(5, 7, 2);
  EXPECT_EQ(encode_stack(m, X), encode(m.layers[0], X));
}

TEST(EncodeStack, ZeroParametersGiveHalf) {
  GaeModel m;
  m.layers = {LayerParams(4, 3), LayerParams(3, 2)};
  const Matrix H = encode_stack(m, uniform01(4, 5, 3));
  EXPECT_TRUE((H.array() == 0.5).all());
}

TEST(EncodeStack, IsComposition) {
  const GaeModel m = random_model({6, 4, 2}, 4);
  const Matrix X = uniform01(6, 9, 5);
  EXPECT_EQ(encode_stack(m, X), encode(m.layers[1], encode(m.layers[0], X)));
  EXPECT_EQ(decode_stack(m, encode_stack(m, X)),
            decode(m.layers[0], decode(m.layers[1], encode_stack(m, X))));
  EXPECT_EQ(m.dims(), (std::vector<Index>{6, 4, 2}));
}

TEST(EncodeStack, Errors) {
  GaeModel m = random_model({6, 4, 2}, 4);
  EXPECT_THROW(encode_stack(m, uniform01(5, 3, 1)), InvalidInput);
  m.layers[1] = LayerParams(3, 2);
  EXPECT_FALSE(m.chained());
  EXPECT_THROW(encode_stack(m, uniform01(6, 3, 1)), InvalidInput);
  EXPECT_THROW(encode_stack(GaeModel{}, uniform01(6, 3, 1)), InvalidInput);
}

TEST(TrainStack, OneLayerEqualsTrainLayer) {
  const DataSet ds = make_blobs(3, 10, 6, 0.3, 1);
  GraphSpec spec;
  spec.k = 4;
  const auto fit = train_stack(ds, spec, {3}, {config(0.2, 9)}, ObjectiveKind::gae);
  const auto g = build_knn_graph(ds, 4);
  const LayerFit ref = train_layer(ds.X, &g.G, config(0.2, 9), 3, ObjectiveKind::gae);
  ASSERT_EQ(fit.model.layers.size(), 1u);
  EXPECT_EQ(fit.model.layers[0], ref.params);
}

TEST(TrainStack, LambdaZeroEqualsStackedPlain) {
  const DataSet ds = make_blobs(3, 8, 6, 0.3, 2);
  const std::vector<TrainConfig> cfgs{config(0.0, 5), config(0.0, 6)};
  const auto gae = train_stack(ds, GraphSpec{}, {4, 2}, cfgs, ObjectiveKind::gae);
  const auto plain = train_stack(ds, GraphSpec{}, {4, 2}, cfgs, ObjectiveKind::plain);
  EXPECT_EQ(gae.model.layers[0], plain.model.layers[0]);
  EXPECT_EQ(gae.model.layers[1], plain.model.layers[1]);
  const LayerFit first = train_layer(ds.X, nullptr, cfgs[0], 4, ObjectiveKind::plain);
  const LayerFit second = train_layer(encode(first.params, ds.X), nullptr, cfgs[1], 2, ObjectiveKind::plain);
  EXPECT_EQ(plain.model.layers[1], second.params);
}

TEST(TrainStack, GraphIsRebuiltFromLayerInput) {
  const DataSet ds = make_blobs(3, 10, 6, 0.4, 3);
  GraphSpec spec;
  spec.k = 5;
  const auto fit = train_stack(ds, spec, {4, 3}, {config(0.1, 1), config(0.1, 2)}, ObjectiveKind::gae);
  const Matrix H1 = encode(fit.model.layers[0], ds.X);
  const auto g1 = build_knn_graph(H1, 5);
  const LayerFit ref = train_layer(H1, &g1.G, config(0.1, 2), 3, ObjectiveKind::gae);
  EXPECT_EQ(fit.model.layers[1], ref.params);
}

TEST(TrainStack, TwoLayerDescentAndDeterminism) {
  const DataSet ds = make_blobs(3, 12, 8, 0.4, 4);
  const auto a = train_stack(ds, GraphSpec{}, {8, 3}, {config(0.1, 7)}, ObjectiveKind::gae);
  ASSERT_EQ(a.layer_fits.size(), 2u);
  for (const auto& lf : a.layer_fits) {
    EXPECT_TRUE(std::isfinite(lf.final_objective()));
    for (std::size_t t = 1; t < lf.trace.size(); ++t) EXPECT_LE(lf.trace[t].objective, lf.trace[t - 1].objective);
  }
  EXPECT_TRUE(a.model.chained());
  EXPECT_EQ(a.model.dims(), (std::vector<Index>{8, 8, 3}));
  const auto b = train_stack(ds, GraphSpec{}, {8, 3}, {config(0.1, 7)}, ObjectiveKind::gae);
  for (std::size_t i = 0; i < 2; ++i) EXPECT_EQ(a.model.layers[i], b.model.layers[i]);
  const Matrix H = encode_stack(a.model, ds.X);
  EXPECT_GT(H.minCoeff(), 0.0);
  EXPECT_LT(H.maxCoeff(), 1.0);
}

TEST(TrainStack, GraphOnlyKindAndErrors) {
  const DataSet ds = make_blobs(2, 8, 4, 0.4, 5);
  const auto fit = train_stack(ds, GraphSpec{}, {2}, {config(0.5, 1, 20)}, ObjectiveKind::graph_only);
  EXPECT_EQ(fit.model.kind, ObjectiveKind::graph_only);
  EXPECT_THROW(train_stack(ds, GraphSpec{}, {}, {config(0.5, 1)}, ObjectiveKind::gae), InvalidInput);
  EXPECT_THROW(train_stack(ds, GraphSpec{}, {3, 2, 1}, {config(0.5, 1), config(0.5, 2)}, ObjectiveKind::gae),
               InvalidInput);
}

TEST(Finetune, FullGradientMatchesFiniteDifferences) {
  for (std::uint64_t s = 0; s < 4; ++s) {
    const GaeModel m = random_model({4, 3, 2}, 10 + s);
    const Matrix X = uniform01(4, 6, 20 + s);
    Matrix V = uniform01(6, 6, 30 + s);
    V.diagonal().setZero();
    const Matrix G = regularizer_matrix(V);
    for (auto mode : {FinetuneMode::full, FinetuneMode::graph_only}) {
      const StackObjective obj(X, G, 0.4, mode);
      GaeModel grad;
      const double f = obj.evaluate(m, &grad);
      const bool full = mode == FinetuneMode::full;
      EXPECT_NEAR(f, static_cast<double>(oracle::stack_objective(m, X, V, 0.4L, full)), 1e-10 * (1 + f));
      GaeModel probe = m;
      const Vector fd = oracle::central_gradient(
          [&](const Vector& x) {
            obj.unpack(x, probe);
            return oracle::stack_objective(probe, X, V, 0.4L, full);
          },
          obj.pack(m));
      EXPECT_LT(oracle::max_relative_error(obj.pack(grad), fd), 1e-6) << "seed " << s << " full " << full;
    }
  }
}

TEST(Finetune, ZeroGraphLeavesParametersUnchanged) {
  const GaeModel m = random_model({4, 3, 2}, 1);
  const Matrix X = uniform01(4, 6, 2);
  AffinityGraph g = make_graph(Matrix::Zero(6, 6), GraphSpec{});
  const auto fit = finetune_graph_only(m, X, g, config(1.0, 0));
  EXPECT_EQ(fit.status, OptStatus::converged);
  for (std::size_t i = 0; i < 2; ++i) EXPECT_EQ(fit.model.layers[i], m.layers[i]);
}

TEST(Finetune, GraphOnlyTouchesEncodersOnly) {
  const DataSet ds = make_blobs(3, 8, 5, 0.4, 6);
  const auto pre = train_stack(ds, GraphSpec{}, {4, 3}, {config(0.1, 3, 30)}, ObjectiveKind::gae);
  const auto g = drop_cross_class_edges(build_knn_graph(ds, 5), *ds.labels);
  const auto fit = finetune_graph_only(pre.model, ds.X, g, config(0.1, 0, 30));
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(fit.model.layers[i].W_Q, pre.model.layers[i].W_Q);
    EXPECT_EQ(fit.model.layers[i].b_Q, pre.model.layers[i].b_Q);
  }
  for (std::size_t t = 1; t < fit.trace.size(); ++t) EXPECT_LE(fit.trace[t].objective, fit.trace[t - 1].objective);
  auto penalty = [&](const GaeModel& m) {
    const Matrix H = encode_stack(m, ds.X);
    return (H * g.G * H.transpose()).trace();
  };
  EXPECT_LE(penalty(fit.model), penalty(pre.model));
  EXPECT_TRUE(fit.model.chained());
}

TEST(Finetune, FullDescendsFromWarmStart) {
  const DataSet ds = make_blobs(3, 8, 5, 0.4, 7);
  const auto pre = train_stack(ds, GraphSpec{}, {4, 3}, {config(0.1, 3, 30)}, ObjectiveKind::gae);
  const auto g = build_knn_graph(ds, 5);
  const StackObjective obj(ds.X, g.G, 0.1, FinetuneMode::full);
  const auto fit = finetune_full(pre.model, ds.X, g, config(0.1, 0, 40));
  EXPECT_LE(obj.evaluate(fit.model, nullptr), obj.evaluate(pre.model, nullptr));
  EXPECT_DOUBLE_EQ(fit.trace.front().objective, obj.evaluate(pre.model, nullptr));

  // lambda = 0 is plain deep reconstruction error.
  const StackObjective plain(ds.X, g.G, 0.0, FinetuneMode::full);
  const Matrix R = decode_stack(pre.model, encode_stack(pre.model, ds.X));
  EXPECT_DOUBLE_EQ(plain.evaluate(pre.model, nullptr), (ds.X - R).squaredNorm());
}

TEST(Serialize, RoundTripIsBitExact) {
  const GaeModel m = random_model({5, 4, 2}, 8);
  std::stringstream ss;
  write_model(ss, m);
  const std::string bytes = ss.str();
  EXPECT_EQ(bytes.substr(0, 8), "GAEMODEL");
  const GaeModel back = read_model(ss);
  ASSERT_EQ(back.layers.size(), 2u);
  for (std::size_t i = 0; i < 2; ++i) EXPECT_EQ(back.layers[i], m.layers[i]);
  std::stringstream again;
  write_model(again, back);
  EXPECT_EQ(again.str(), bytes);
}

TEST(Serialize, RejectsCorruptInput) {
  std::stringstream bad("NOTAMODEL");
  EXPECT_THROW(read_model(bad), InvalidInput);
  const GaeModel m = random_model({3, 2}, 1);
  std::stringstream ss;
  write_model(ss, m);
  std::string bytes = ss.str();
  std::stringstream truncated(bytes.substr(0, bytes.size() - 5));
  EXPECT_THROW(read_model(truncated), InvalidInput);
  bytes[8] = 9;  // version
  std::stringstream wrong_version(bytes);
  EXPECT_THROW(read_model(wrong_version), InvalidInput);
}
