#include "gae/autoencoder.hpp"
#include "gae/graph.hpp"
#include "gae/kmeans.hpp"
#include "gae/metrics.hpp"
#include "oracle.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace gae;

namespace {

Matrix uniform01(Index r, Index c, std::uint64_t seed) {
  Rng rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Matrix M(r, c);
  for (Index k = 0; k < M.size(); ++k) M.data()[k] = u(rng);
  return M;
}

LayerParams random_params(Index m, Index l, std::uint64_t seed) {
  LayerParams p = init_layer(m, l, seed);
  Rng rng(seed ^ 0xabcdef);
  std::normal_distribution<double> g(0.0, 0.5);
  for (Index k = 0; k < p.b_H.size(); ++k) p.b_H(k) = g(rng);
  for (Index k = 0; k < p.b_Q.size(); ++k) p.b_Q(k) = g(rng);
  return p;
}

Matrix random_weights(Index n, std::uint64_t seed) {
  Matrix V = uniform01(n, n, seed);
  V.diagonal().setZero();
  return V;
}

double check_gradient(const LayerParams& p, const Matrix& X, const Matrix* V, ObjectiveKind kind, double lambda,
                      double eta, double rho) {
  const Matrix G = V ? regularizer_matrix(*V) : Matrix();
  LayerParams grad;
  LayerObjective(X, V ? &G : nullptr, kind, lambda, eta, rho).evaluate(p, &grad);
  LayerParams probe = p;
  const Vector fd = oracle::central_gradient(
      [&](const Vector& x) {
        probe.unpack(x);
        return oracle::layer_objective(probe, X, V, kind, lambda, eta, rho);
      },
      p.pack());
  return oracle::max_relative_error(grad.pack(), fd);
}

}  // namespace

TEST(Sigmoid, ValuesAndSaturation) {
  EXPECT_EQ(sigmoid(0.0), 0.5);
  EXPECT_EQ(sigmoid(-1000.0), 0.0);
  EXPECT_EQ(sigmoid(1000.0), 1.0);
  EXPECT_TRUE(std::isfinite(sigmoid(-700.0)));
  EXPECT_GT(sigmoid(-700.0), 0.0);
  for (double z : {-2.0, -0.5, 0.0, 1.0, 3.0}) {
    const double h = 1e-5;
    const double fd = (sigmoid(z + h) - sigmoid(z - h)) / (2 * h);
    EXPECT_NEAR(sigmoid(z) * (1 - sigmoid(z)), fd, 1e-8) << "z=" << z;
  }
  Matrix Z(1, 3);
  Z << -1000.0, 0.0, 1000.0;
  EXPECT_EQ(sigmoid(Z), (Matrix(1, 3) << 0.0, 0.5, 1.0).finished());
}

TEST(EncodeDecode, ZeroParametersGiveHalf) {
  const LayerParams p(4, 3);
  const Matrix X = uniform01(4, 5, 1);
  EXPECT_TRUE((encode(p, X).array() == 0.5).all());
  EXPECT_TRUE((decode(p, encode(p, X)).array() == 0.5).all());
}

TEST(EncodeDecode, ColumnsAreIndependent) {
  const LayerParams p = random_params(4, 3, 2);
  const Matrix x = uniform01(4, 1, 3);
  const Matrix H = encode(p, x.replicate(1, 2));
  EXPECT_EQ(H.col(0), H.col(1));
}

TEST(EncodeDecode, MatchScalarLoop) {
  const LayerParams p = random_params(5, 3, 4);
  const Matrix X = uniform01(5, 7, 5);
  const Matrix H = encode(p, X);
  const auto Href = oracle::affine_sigmoid(p.W_H, p.b_H, oracle::to_real(X));
  EXPECT_LT((H - oracle::to_matrix(Href)).cwiseAbs().maxCoeff(), 1e-12);
  const Matrix Q = decode(p, H);
  const auto Qref = oracle::affine_sigmoid(p.W_Q, p.b_Q, oracle::to_real(H));
  EXPECT_LT((Q - oracle::to_matrix(Qref)).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_GT(Q.minCoeff(), 0.0);
  EXPECT_LT(Q.maxCoeff(), 1.0);
}

TEST(EncodeDecode, DimensionMismatch) {
  const LayerParams p(4, 3);
  EXPECT_THROW(encode(p, Matrix::Zero(3, 2)), InvalidInput);
  EXPECT_THROW(decode(p, Matrix::Zero(4, 2)), InvalidInput);
}

TEST(LayerParams, PackRoundTripAndInit) {
  const LayerParams p = random_params(5, 2, 6);
  LayerParams q(5, 2);
  q.unpack(p.pack());
  EXPECT_EQ(p, q);
  EXPECT_EQ(p.size(), 5 * 2 * 2 + 2 + 5);
  const LayerParams a = init_layer(6, 4, 9);
  const double r = std::sqrt(6.0 / 10.0);
  EXPECT_LE(a.W_H.cwiseAbs().maxCoeff(), r);
  EXPECT_LE(a.W_Q.cwiseAbs().maxCoeff(), r);
  EXPECT_TRUE(a.b_H.isZero(0.0));
  EXPECT_TRUE(a.b_Q.isZero(0.0));
  EXPECT_EQ(init_layer(6, 4, 9), a);
  EXPECT_FALSE(init_layer(6, 4, 10) == a);
  EXPECT_THROW(q.unpack(Vector::Zero(3)), InvalidInput);
}

TEST(GaeObjective, LambdaZeroIsPlain) {
  const LayerParams p = random_params(5, 3, 7);
  const Matrix X = uniform01(5, 8, 8);
  const Matrix G = regularizer_matrix(random_weights(8, 9));
  EXPECT_EQ(gae_objective(p, X, G, 0.0), plain_objective(p, X));
  EXPECT_EQ(gae_gradient(p, X, G, 0.0), plain_gradient(p, X));
  const Matrix Q = decode(p, encode(p, X));
  EXPECT_EQ(plain_objective(p, X), (X - Q).squaredNorm());
}

TEST(GaeObjective, GraphTermMatchesDoubleSum) {
  for (std::uint64_t s = 0; s < 10; ++s) {
    const LayerParams p = random_params(3, 2, 20 + s);
    const Matrix X = uniform01(3, 4, 30 + s);
    const Matrix V = random_weights(4, 40 + s);
    const double lambda = 0.7;
    const double graph_term = gae_objective(p, X, regularizer_matrix(V), lambda) - plain_objective(p, X);
    const double ref = lambda * static_cast<double>(oracle::pair_penalty(V, encode(p, X)));
    EXPECT_NEAR(graph_term, ref, 1e-10);
    const double full = static_cast<double>(oracle::layer_objective(p, X, &V, ObjectiveKind::gae, lambda, 0, 0.5));
    EXPECT_NEAR(gae_objective(p, X, regularizer_matrix(V), lambda), full, 1e-10 * (1 + full));
  }
}

TEST(GaeObjective, ZeroGraphIsNonnegativeReconstruction) {
  const LayerParams p = random_params(4, 2, 1);
  const Matrix X = uniform01(4, 6, 2);
  const double v = gae_objective(p, X, Matrix::Zero(6, 6), 3.0);
  EXPECT_EQ(v, plain_objective(p, X));
  EXPECT_GE(v, 0.0);
}

TEST(GaeObjective, RejectsBadInput) {
  const Matrix X = uniform01(4, 6, 2);
  LayerParams p = random_params(4, 2, 1);
  EXPECT_THROW(gae_objective(p, X, Matrix::Zero(5, 5), 1.0), InvalidInput);
  EXPECT_THROW(gae_objective(p, uniform01(3, 6, 1), Matrix::Zero(6, 6), 1.0), InvalidInput);
  p.W_Q(0, 0) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(gae_objective(p, X, Matrix::Zero(6, 6), 1.0), NumericalError);
  EXPECT_THROW(LayerObjective(X, nullptr, ObjectiveKind::gae, 1.0, 0.0, 0.5), InvalidInput);
}

TEST(Gradients, GaeMatchesFiniteDifferences) {
  for (std::uint64_t s = 0; s < 5; ++s) {
    const LayerParams p = random_params(5, 3, 100 + s);
    const Matrix X = uniform01(5, 8, 200 + s);
    const Matrix V = random_weights(8, 300 + s);
    EXPECT_LT(check_gradient(p, X, &V, ObjectiveKind::gae, 0.3, 0, 0.5), 1e-6) << "seed " << s;
  }
}

TEST(Gradients, SaeMatchesFiniteDifferences) {
  for (std::uint64_t s = 0; s < 5; ++s) {
    const LayerParams p = random_params(5, 3, 110 + s);
    const Matrix X = uniform01(5, 8, 210 + s);
    EXPECT_LT(check_gradient(p, X, nullptr, ObjectiveKind::sae, 0, 0.5, 0.1), 1e-6) << "seed " << s;
  }
}

TEST(Gradients, PlainAndGraphOnlyMatchFiniteDifferences) {
  for (std::uint64_t s = 0; s < 5; ++s) {
    const LayerParams p = random_params(4, 2, 120 + s);
    const Matrix X = uniform01(4, 6, 220 + s);
    const Matrix V = random_weights(6, 320 + s);
    EXPECT_LT(check_gradient(p, X, nullptr, ObjectiveKind::plain, 0, 0, 0.5), 1e-6);
    EXPECT_LT(check_gradient(p, X, &V, ObjectiveKind::graph_only, 2.0, 0, 0.5), 1e-6);
  }
}

TEST(Gradients, SymmetricGraphUsesTwiceHG) {
  const LayerParams p = random_params(4, 2, 5);
  const Matrix X = uniform01(4, 6, 6);
  Matrix V = random_weights(6, 7);
  V = (V + V.transpose()).eval();
  const Matrix G = regularizer_matrix(V);
  const LayerParams g = graph_only_gradient(p, X, G, 1.5);
  const Matrix H = encode(p, X);
  const Matrix dZ = ((1.5 * 2.0 * H * G).array() * H.array() * (1.0 - H.array())).matrix();
  EXPECT_TRUE(g.W_H.isApprox(dZ * X.transpose(), 1e-12));
  EXPECT_TRUE(g.b_H.isApprox(dZ.rowwise().sum(), 1e-12));
  EXPECT_TRUE(g.W_Q.isZero(0.0));
  EXPECT_TRUE(g.b_Q.isZero(0.0));
}

TEST(SaeObjective, CollapseIdentities) {
  const LayerParams p = random_params(5, 3, 8);
  const Matrix X = uniform01(5, 8, 9);
  EXPECT_EQ(sae_objective(p, X, 0.0, 0.1), plain_objective(p, X));
  EXPECT_EQ(sae_gradient(p, X, 0.0, 0.1), plain_gradient(p, X));

  // Zero encoder weights make every hidden unit's mean exactly S(b_H).
  LayerParams z(5, 3);
  z.b_H.setZero();  // rho_j = 0.5
  EXPECT_EQ(kl_sparsity_penalty(encode(z, X), 0.5), 0.0);
  EXPECT_EQ(sae_objective(z, X, 4.0, 0.5), plain_objective(z, X));
  EXPECT_GT(sae_objective(z, X, 4.0, 0.1), plain_objective(z, X));
}

TEST(SaeObjective, ClampsSaturatedMeans) {
  Matrix H = Matrix::Zero(2, 4);
  EXPECT_TRUE(std::isfinite(kl_sparsity_penalty(H, 0.1)));
  H.setOnes();
  EXPECT_TRUE(std::isfinite(kl_sparsity_penalty(H, 0.1)));
}

TEST(Objectives, NonnegativeAndUntied) {
  const Matrix X = uniform01(4, 7, 1);
  const Matrix G = regularizer_matrix(random_weights(7, 2));
  for (std::uint64_t s = 0; s < 20; ++s) {
    LayerParams p = random_params(4, 3, s);
    EXPECT_GE(gae_objective(p, X, G, 0.5), 0.0);
    EXPECT_GE(sae_objective(p, X, 0.5, 0.2), 0.0);
    EXPECT_GE(graph_only_objective(p, X, G, 0.5), 0.0);
    const double before = gae_objective(p, X, G, 0.5);
    const Matrix W_H = p.W_H;
    p.W_Q(1, 1) += 0.3;
    EXPECT_NE(gae_objective(p, X, G, 0.5), before);
    EXPECT_EQ(p.W_H, W_H);
  }
}

TEST(TrainLayer, DescentDeterminismAndStatus) {
  const DataSet ds = make_blobs(3, 10, 6, 0.3, 4);
  const auto g = build_knn_graph(ds, 5);
  TrainConfig cfg;
  cfg.lambda = 0.1;
  cfg.seed = 17;
  cfg.max_iter = 60;
  const LayerFit a = train_layer(ds.X, &g.G, cfg, 3, ObjectiveKind::gae);
  ASSERT_GE(a.trace.size(), 2u);
  for (std::size_t t = 1; t < a.trace.size(); ++t) EXPECT_LE(a.trace[t].objective, a.trace[t - 1].objective);
  EXPECT_LE(a.final_objective(), a.initial_objective());
  EXPECT_DOUBLE_EQ(a.final_objective(), gae_objective(a.params, ds.X, g.G, 0.1));
  const LayerFit b = train_layer(ds.X, &g.G, cfg, 3, ObjectiveKind::gae);
  EXPECT_EQ(a.params, b.params);
  EXPECT_EQ(a.trace.size(), b.trace.size());
}

TEST(TrainLayer, LambdaZeroEqualsPlain) {
  const DataSet ds = make_blobs(2, 8, 5, 0.3, 1);
  const auto g = build_knn_graph(ds, 3);
  TrainConfig cfg;
  cfg.seed = 3;
  cfg.max_iter = 40;
  const LayerFit gae0 = train_layer(ds.X, &g.G, cfg, 2, ObjectiveKind::gae);
  const LayerFit plain = train_layer(ds.X, nullptr, cfg, 2, ObjectiveKind::plain);
  EXPECT_EQ(gae0.params, plain.params);
}

TEST(TrainLayer, SingleSampleGraphIsInert) {
  const Matrix X = uniform01(3, 1, 2);
  const Matrix G = Matrix::Zero(1, 1);
  TrainConfig cfg;
  cfg.lambda = 5.0;
  cfg.max_iter = 20;
  const LayerFit gae1 = train_layer(X, &G, cfg, 2, ObjectiveKind::gae);
  cfg.lambda = 0.0;
  const LayerFit plain = train_layer(X, nullptr, cfg, 2, ObjectiveKind::plain);
  EXPECT_EQ(gae1.params, plain.params);
}

TEST(TrainLayer, RejectsInvalidConfig) {
  const Matrix X = uniform01(3, 4, 2);
  TrainConfig cfg;
  cfg.rho = 1.0;
  EXPECT_THROW(train_layer(X, nullptr, cfg, 2, ObjectiveKind::sae), InvalidInput);
  cfg = {};
  cfg.lambda = -1.0;
  EXPECT_THROW(train_layer(X, nullptr, cfg, 2, ObjectiveKind::plain), InvalidInput);
  cfg = {};
  EXPECT_THROW(train_layer(X, nullptr, cfg, 0, ObjectiveKind::plain), InvalidInput);
}

TEST(TrainLayer, ImprovesClusteringOverRawData) {
  // Four noisy blobs in 100-D; compare k-means on raw X with k-means on H.
  double raw_total = 0.0, gae_total = 0.0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const DataSet ds = make_blobs(4, 30, 100, 0.9, seed);
    const auto& truth = *ds.labels;
    raw_total += accuracy(kmeans(ds.X, 4, 10, seed).assignments, truth);
    const auto g = build_knn_graph(ds, 5);
    double best = 0.0;
    for (double lambda : {0.01, 0.1, 1.0}) {
      TrainConfig cfg;
      cfg.lambda = lambda;
      cfg.seed = seed;
      const LayerFit fit = train_layer(ds.X, &g.G, cfg, 4, ObjectiveKind::gae);
      best = std::max(best, accuracy(kmeans(encode(fit.params, ds.X), 4, 10, seed).assignments, truth));
    }
    gae_total += best;
  }
  EXPECT_GT(gae_total / 5, raw_total / 5);
}

TEST(Lbfgs, MinimizesQuadratic) {
  Matrix A(3, 3);
  A << 4, 1, 0, 1, 3, 0.5, 0, 0.5, 2;
  Vector b(3);
  b << 1, -2, 0.5;
  auto fn = [&](const Vector& x, Vector& g) {
    g = A * x - b;
    return 0.5 * x.dot(A * x) - b.dot(x);
  };
  LbfgsOptions opt;
  opt.grad_tol = 1e-10;
  const auto res = minimize_lbfgs(fn, Vector::Zero(3), opt);
  EXPECT_EQ(res.status, OptStatus::converged);
  EXPECT_TRUE(res.x.isApprox(A.ldlt().solve(b), 1e-8));
  for (std::size_t t = 1; t < res.trace.size(); ++t) EXPECT_LE(res.trace[t].objective, res.trace[t - 1].objective);
}

TEST(Lbfgs, NonFiniteStartThrows) {
  auto fn = [](const Vector&, Vector& g) {
    g.setZero();
    return std::numeric_limits<double>::quiet_NaN();
  };
  EXPECT_THROW(minimize_lbfgs(fn, Vector::Zero(2), LbfgsOptions{}), NumericalError);
}
