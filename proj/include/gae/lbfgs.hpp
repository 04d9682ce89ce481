#pragma once

// Limited-memory BFGS with a backtracking Armijo line search.

#include "gae/core.hpp"

#include <cmath>
#include <deque>
#include <string>
#include <vector>

namespace gae {

struct LbfgsOptions {
  int max_iter = 400;
  double grad_tol = 1e-5;  // on the infinity norm
  int history = 10;
  double armijo = 1e-4;
  int max_backtracks = 50;
};

enum class OptStatus { converged, max_iter, line_search_failed };

inline const char* to_string(OptStatus s) {
  switch (s) {
    case OptStatus::converged: return "converged";
    case OptStatus::max_iter: return "max_iter";
    case OptStatus::line_search_failed: return "line_search_failed";
  }
  return "?";
}

struct TracePoint {
  int iter = 0;
  double objective = 0.0;
  double grad_norm = 0.0;  // infinity norm
};

struct LbfgsResult {
  Vector x;
  double objective = 0.0;
  std::vector<TracePoint> trace;  // one entry per accepted iterate, starting at x0
  OptStatus status = OptStatus::max_iter;
};

/// `fn(x, grad)` returns f(x) and writes the gradient into `grad`.
/// Every accepted step satisfies the Armijo condition, so the trace objective
/// never increases and the returned point is the best one seen.
template <class Fn>
LbfgsResult minimize_lbfgs(Fn&& fn, Vector x, const LbfgsOptions& opt) {
  require(opt.max_iter >= 0 && opt.grad_tol > 0.0 && opt.history > 0, "invalid optimizer options");
  Vector g(x.size());
  double f = fn(x, g);
  if (!std::isfinite(f) || !g.allFinite())
    throw NumericalError("objective or gradient is not finite at the starting point");

  LbfgsResult res;
  res.trace.push_back({0, f, g.size() ? g.lpNorm<Eigen::Infinity>() : 0.0});

  std::deque<Vector> s_hist, y_hist;
  std::deque<double> rho_hist;
  Vector d(x.size()), x_new(x.size()), g_new(x.size());
  std::vector<double> alpha(static_cast<std::size_t>(opt.history));

  res.status = OptStatus::max_iter;
  for (int iter = 1;; ++iter) {
    if (g.size() == 0 || g.lpNorm<Eigen::Infinity>() < opt.grad_tol) {
      res.status = OptStatus::converged;
      break;
    }
    if (iter > opt.max_iter) break;

    // Two-loop recursion.
    d = -g;
    const std::size_t h = s_hist.size();
    for (std::size_t k = h; k-- > 0;) {
      alpha[k] = rho_hist[k] * s_hist[k].dot(d);
      d.noalias() -= alpha[k] * y_hist[k];
    }
    if (h > 0) d *= s_hist.back().dot(y_hist.back()) / y_hist.back().squaredNorm();
    for (std::size_t k = 0; k < h; ++k) {
      const double beta = rho_hist[k] * y_hist[k].dot(d);
      d.noalias() += (alpha[k] - beta) * s_hist[k];
    }

    double slope = g.dot(d);
    if (!(slope < 0.0)) {
      d = -g;
      slope = -g.squaredNorm();
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
    }

    double step = s_hist.empty() ? std::min(1.0, 1.0 / d.norm()) : 1.0;
    bool accepted = false;
    double f_new = f;
    for (int bt = 0; bt < opt.max_backtracks; ++bt) {
      x_new = x + step * d;
      f_new = fn(x_new, g_new);
      if (std::isfinite(f_new) && g_new.allFinite() && f_new <= f + opt.armijo * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      res.status = OptStatus::line_search_failed;
      break;
    }

    Vector s = x_new - x;
    Vector y = g_new - g;
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      if (static_cast<int>(s_hist.size()) == opt.history) {
        s_hist.pop_front();
        y_hist.pop_front();
        rho_hist.pop_front();
      }
      s_hist.push_back(std::move(s));
      y_hist.push_back(std::move(y));
      rho_hist.push_back(1.0 / sy);
    }
    x.swap(x_new);
    g.swap(g_new);
    f = f_new;
    res.trace.push_back({iter, f, g.lpNorm<Eigen::Infinity>()});
  }
  res.x = std::move(x);
  res.objective = f;
  return res;
}

}  // namespace gae
