#pragma once

// Single-layer sigmoid auto-encoder
//
//   H = S(W_H X + b_H),   Q = S(W_Q H + b_Q)
//
// trained on one of
//
//   plain       ||X - Q||^2
//   gae         ||X - Q||^2 + lambda tr(H G H^T)
//   sae         ||X - Q||^2 + eta sum_j KL(rho || rho_j)
//   graph_only  lambda tr(H G H^T)
//
// The reconstruction error is the unnormalized squared Frobenius norm.
// Encoder and decoder weights are independent (no tying).

#include "gae/core.hpp"
#include "gae/lbfgs.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

namespace gae {

enum class ObjectiveKind { plain, gae, sae, graph_only };

inline const char* to_string(ObjectiveKind k) {
  switch (k) {
    case ObjectiveKind::plain: return "plain";
    case ObjectiveKind::gae: return "gae";
    case ObjectiveKind::sae: return "sae";
    case ObjectiveKind::graph_only: return "graph_only";
  }
  return "?";
}

inline ObjectiveKind parse_objective_kind(std::string_view s) {
  if (s == "plain") return ObjectiveKind::plain;
  if (s == "gae") return ObjectiveKind::gae;
  if (s == "sae") return ObjectiveKind::sae;
  if (s == "graph_only") return ObjectiveKind::graph_only;
  throw InvalidInput("unknown objective kind '" + std::string(s) + "'");
}

struct TrainConfig {
  double lambda = 0.0;  // graph intensity
  double eta = 0.0;     // sparsity intensity
  double rho = 0.1;     // target mean activation
  int max_iter = 400;
  double grad_tol = 1e-5;
  std::uint64_t seed = 0;
  int history_size = 10;
};

inline void validate(const TrainConfig& c) {
  require(c.lambda >= 0.0, "lambda must be nonnegative");
  require(c.eta >= 0.0, "eta must be nonnegative");
  require(c.rho > 0.0 && c.rho < 1.0, "rho must lie in (0,1)");
  require(c.max_iter > 0, "max_iter must be positive");
  require(c.grad_tol > 0.0, "grad_tol must be positive");
  require(c.history_size > 0, "history_size must be positive");
}

struct LayerParams {
  Matrix W_H;  // l x m
  Vector b_H;  // l
  Matrix W_Q;  // m x l
  Vector b_Q;  // m

  LayerParams() = default;
  LayerParams(Index m, Index l)
      : W_H(Matrix::Zero(l, m)), b_H(Vector::Zero(l)), W_Q(Matrix::Zero(m, l)), b_Q(Vector::Zero(m)) {}

  Index input_dim() const { return W_H.cols(); }
  Index hidden_dim() const { return W_H.rows(); }
  Index size() const { return 2 * W_H.size() + b_H.size() + b_Q.size(); }

  bool consistent() const {
    const Index m = input_dim(), l = hidden_dim();
    return b_H.size() == l && W_Q.rows() == m && W_Q.cols() == l && b_Q.size() == m;
  }

  bool all_finite() const {
    return W_H.allFinite() && b_H.allFinite() && W_Q.allFinite() && b_Q.allFinite();
  }

  // Packed order: W_H (column-major), b_H, W_Q (column-major), b_Q.
  Vector pack() const {
    Vector v(size());
    Index o = 0;
    auto put = [&](const auto& a) {
      v.segment(o, a.size()) = Eigen::Map<const Vector>(a.data(), a.size());
      o += a.size();
    };
    put(W_H);
    put(b_H);
    put(W_Q);
    put(b_Q);
    return v;
  }

  void unpack(const Eigen::Ref<const Vector>& v) {
    require(v.size() == size(), "packed parameter length mismatch");
    Index o = 0;
    auto get = [&](auto& a) {
      Eigen::Map<Vector>(a.data(), a.size()) = v.segment(o, a.size());
      o += a.size();
    };
    get(W_H);
    get(b_H);
    get(W_Q);
    get(b_Q);
  }

  friend bool operator==(const LayerParams& a, const LayerParams& b) {
    auto same = [](const auto& x, const auto& y) {
      return x.rows() == y.rows() && x.cols() == y.cols() && x == y;
    };
    return same(a.W_H, b.W_H) && same(a.b_H, b.b_H) && same(a.W_Q, b.W_Q) && same(a.b_Q, b.b_Q);
  }
};

/// Uniform weights in [-r, r] with r = sqrt(6 / (m + l)), zero biases.
inline LayerParams init_layer(Index m, Index l, std::uint64_t seed) {
  require(m > 0 && l > 0, "layer dimensions must be positive");
  LayerParams p(m, l);
  const double r = std::sqrt(6.0 / static_cast<double>(m + l));
  Rng rng(seed);
  std::uniform_real_distribution<double> u(-r, r);
  for (Index k = 0; k < p.W_H.size(); ++k) p.W_H.data()[k] = u(rng);
  for (Index k = 0; k < p.W_Q.size(); ++k) p.W_Q.data()[k] = u(rng);
  return p;
}

/// Logistic function; saturates to exactly 0 or 1 without overflow.
inline double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

inline Matrix sigmoid(const Matrix& Z) {
  return Z.unaryExpr([](double z) { return sigmoid(z); });
}

inline Matrix encode(const LayerParams& p, const Matrix& X) {
  if (X.rows() != p.input_dim())
    throw InvalidInput("encode: input has " + std::to_string(X.rows()) + " rows, layer expects " +
                       std::to_string(p.input_dim()));
  return sigmoid((p.W_H * X).colwise() + p.b_H);
}

inline Matrix decode(const LayerParams& p, const Matrix& H) {
  if (H.rows() != p.hidden_dim())
    throw InvalidInput("decode: input has " + std::to_string(H.rows()) + " rows, layer expects " +
                       std::to_string(p.hidden_dim()));
  return sigmoid((p.W_Q * H).colwise() + p.b_Q);
}

inline constexpr double kRhoClamp = 1e-12;

/// eta * sum_j KL(rho || rho_j), rho_j = mean activation of hidden unit j.
inline double kl_sparsity_penalty(const Matrix& H, double rho) {
  double total = 0.0;
  for (Index j = 0; j < H.rows(); ++j) {
    const double rj = std::clamp(H.row(j).mean(), kRhoClamp, 1.0 - kRhoClamp);
    total += rho * std::log(rho / rj) + (1.0 - rho) * std::log((1.0 - rho) / (1.0 - rj));
  }
  return total;
}

/// Objective and gradient evaluation for one layer on fixed data.
///
/// G + G^T is formed once per problem, so repeated evaluations during
/// training cost one l x n by n x n product for the graph term.
class LayerObjective {
 public:
  LayerObjective(const Matrix& X, const Matrix* G, ObjectiveKind kind, double lambda, double eta, double rho)
      : X_(X), kind_(kind), lambda_(lambda), eta_(eta), rho_(rho) {
    require(lambda >= 0.0 && eta >= 0.0, "penalty weights must be nonnegative");
    require(kind != ObjectiveKind::sae || (rho > 0.0 && rho < 1.0), "rho must lie in (0,1)");
    if (uses_graph()) {
      if (!G) throw InvalidInput("graph-regularized objective needs a regularizer matrix");
      require(G->rows() == X.cols() && G->cols() == X.cols(), "regularizer matrix must be n x n");
      G_sym_ = *G + G->transpose();
    }
  }

  bool uses_graph() const {
    return (kind_ == ObjectiveKind::gae || kind_ == ObjectiveKind::graph_only) && lambda_ != 0.0;
  }
  bool uses_reconstruction() const { return kind_ != ObjectiveKind::graph_only; }
  bool uses_sparsity() const { return kind_ == ObjectiveKind::sae && eta_ != 0.0; }

  /// Objective value; if `grad` is non-null it receives the gradient.
  double evaluate(const LayerParams& p, LayerParams* grad) const {
    if (X_.rows() != p.input_dim() || !p.consistent())
      throw InvalidInput("layer parameters do not match data dimensions");
    if (!p.all_finite()) throw NumericalError("layer parameters contain non-finite values");

    const Index n = X_.cols();
    const Matrix H = encode(p, X_);
    double value = 0.0;
    Matrix dH;
    if (grad) {
      *grad = LayerParams(p.input_dim(), p.hidden_dim());
      dH = Matrix::Zero(H.rows(), n);
    }

    if (uses_reconstruction()) {
      const Matrix Q = decode(p, H);
      const Matrix diff = Q - X_;
      value += diff.squaredNorm();
      if (grad) {
        const Matrix dZ2 = (2.0 * diff.array() * Q.array() * (1.0 - Q.array())).matrix();
        grad->W_Q.noalias() = dZ2 * H.transpose();
        grad->b_Q = dZ2.rowwise().sum();
        dH.noalias() += p.W_Q.transpose() * dZ2;
      }
    }

    if (uses_graph()) {
      const Matrix HGs = H * G_sym_;
      // tr(H G H^T) = 0.5 tr(H (G + G^T) H^T)
      value += lambda_ * 0.5 * HGs.cwiseProduct(H).sum();
      if (grad) dH += lambda_ * HGs;
    }

    if (uses_sparsity()) {
      value += eta_ * kl_sparsity_penalty(H, rho_);
      if (grad) {
        for (Index j = 0; j < H.rows(); ++j) {
          const double rj = std::clamp(H.row(j).mean(), kRhoClamp, 1.0 - kRhoClamp);
          const double d = eta_ * (-rho_ / rj + (1.0 - rho_) / (1.0 - rj)) / static_cast<double>(n);
          dH.row(j).array() += d;
        }
      }
    }

    if (grad) {
      const Matrix dZ1 = (dH.array() * H.array() * (1.0 - H.array())).matrix();
      grad->W_H.noalias() = dZ1 * X_.transpose();
      grad->b_H = dZ1.rowwise().sum();
    }
    return value;
  }

 private:
  const Matrix& X_;
  Matrix G_sym_;
  ObjectiveKind kind_;
  double lambda_, eta_, rho_;
};

inline double plain_objective(const LayerParams& p, const Matrix& X) {
  return LayerObjective(X, nullptr, ObjectiveKind::plain, 0.0, 0.0, 0.5).evaluate(p, nullptr);
}

inline LayerParams plain_gradient(const LayerParams& p, const Matrix& X) {
  LayerParams g;
  LayerObjective(X, nullptr, ObjectiveKind::plain, 0.0, 0.0, 0.5).evaluate(p, &g);
  return g;
}

inline double gae_objective(const LayerParams& p, const Matrix& X, const Matrix& G, double lambda) {
  return LayerObjective(X, &G, ObjectiveKind::gae, lambda, 0.0, 0.5).evaluate(p, nullptr);
}

inline LayerParams gae_gradient(const LayerParams& p, const Matrix& X, const Matrix& G, double lambda) {
  LayerParams g;
  LayerObjective(X, &G, ObjectiveKind::gae, lambda, 0.0, 0.5).evaluate(p, &g);
  return g;
}

inline double sae_objective(const LayerParams& p, const Matrix& X, double eta, double rho) {
  return LayerObjective(X, nullptr, ObjectiveKind::sae, 0.0, eta, rho).evaluate(p, nullptr);
}

inline LayerParams sae_gradient(const LayerParams& p, const Matrix& X, double eta, double rho) {
  LayerParams g;
  LayerObjective(X, nullptr, ObjectiveKind::sae, 0.0, eta, rho).evaluate(p, &g);
  return g;
}

inline double graph_only_objective(const LayerParams& p, const Matrix& X, const Matrix& G, double lambda) {
  return LayerObjective(X, &G, ObjectiveKind::graph_only, lambda, 0.0, 0.5).evaluate(p, nullptr);
}

inline LayerParams graph_only_gradient(const LayerParams& p, const Matrix& X, const Matrix& G, double lambda) {
  LayerParams g;
  LayerObjective(X, &G, ObjectiveKind::graph_only, lambda, 0.0, 0.5).evaluate(p, &g);
  return g;
}

struct LayerFit {
  LayerParams params;
  std::vector<TracePoint> trace;
  OptStatus status = OptStatus::max_iter;

  double initial_objective() const { return trace.front().objective; }
  double final_objective() const { return trace.back().objective; }
};

/// Train one layer with L-BFGS from a seeded initialization.
/// `G` may be null unless the objective uses the graph with lambda > 0.
inline LayerFit train_layer(const Matrix& X, const Matrix* G, const TrainConfig& cfg, Index hidden,
                            ObjectiveKind kind) {
  validate(cfg);
  require(hidden >= 1, "hidden dimension must be at least 1");
  require(X.cols() >= 1 && X.rows() >= 1, "training data is empty");
  const LayerObjective obj(X, G, kind, cfg.lambda, cfg.eta, cfg.rho);

  LayerParams work = init_layer(X.rows(), hidden, cfg.seed);
  LayerParams grad;
  auto fn = [&](const Vector& x, Vector& g) {
    work.unpack(x);
    const double f = obj.evaluate(work, &grad);
    g = grad.pack();
    return f;
  };
  LbfgsOptions opt;
  opt.max_iter = cfg.max_iter;
  opt.grad_tol = cfg.grad_tol;
  opt.history = cfg.history_size;
  auto res = minimize_lbfgs(fn, work.pack(), opt);

  LayerFit fit;
  fit.params = LayerParams(X.rows(), hidden);
  fit.params.unpack(res.x);
  fit.trace = std::move(res.trace);
  fit.status = res.status;
  return fit;
}

}  // namespace gae
