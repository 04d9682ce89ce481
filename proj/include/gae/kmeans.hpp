#pragma once

// Lloyd's k-means with k-means++ seeding and best-of-restarts selection.

#include "gae/core.hpp"

#include <limits>
#include <vector>

namespace gae {

struct ClusterResult {
  std::vector<int> assignments;
  Matrix centers;  // l x k
  double inertia = 0.0;
  int iterations = 0;
};

inline constexpr int kKmeansMaxIter = 300;

namespace detail {

inline Matrix kmeanspp_seed(const Matrix& H, int k, Rng& rng) {
  const Index n = H.cols();
  Matrix centers(H.rows(), k);
  std::uniform_int_distribution<Index> first(0, n - 1);
  centers.col(0) = H.col(first(rng));
  Vector d2 = (H.colwise() - centers.col(0)).colwise().squaredNorm().transpose();
  for (int c = 1; c < k; ++c) {
    Index pick = 0;
    if (d2.sum() > 0.0) {
      std::discrete_distribution<Index> weighted(d2.data(), d2.data() + n);
      pick = weighted(rng);
    } else {
      pick = first(rng);
    }
    centers.col(c) = H.col(pick);
    d2 = d2.cwiseMin((H.colwise() - centers.col(c)).colwise().squaredNorm().transpose());
  }
  return centers;
}

inline double sq_dist(const Matrix& H, Index i, const Matrix& C, Index c) {
  return (H.col(i) - C.col(c)).squaredNorm();
}

inline ClusterResult lloyd(const Matrix& H, Matrix centers, int max_iter) {
  const Index n = H.cols();
  const Index k = centers.cols();
  ClusterResult res;
  res.assignments.assign(static_cast<std::size_t>(n), -1);
  std::vector<Index> counts(static_cast<std::size_t>(k));

  for (res.iterations = 0; res.iterations < max_iter; ++res.iterations) {
    bool changed = false;
    for (Index i = 0; i < n; ++i) {
      int best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (Index c = 0; c < k; ++c) {
        const double d = sq_dist(H, i, centers, c);
        if (d < best_d) {
          best_d = d;
          best = static_cast<int>(c);
        }
      }
      if (res.assignments[static_cast<std::size_t>(i)] != best) {
        res.assignments[static_cast<std::size_t>(i)] = best;
        changed = true;
      }
    }
    if (!changed && res.iterations > 0) break;

    // Empty clusters take the point farthest from its assigned center.
    for (Index c = 0; c < k; ++c) {
      std::fill(counts.begin(), counts.end(), 0);
      for (int a : res.assignments) ++counts[static_cast<std::size_t>(a)];
      if (counts[static_cast<std::size_t>(c)] > 0) continue;
      Index far = -1;
      double far_d = -1.0;
      for (Index i = 0; i < n; ++i) {
        const int a = res.assignments[static_cast<std::size_t>(i)];
        if (counts[static_cast<std::size_t>(a)] < 2) continue;
        const double d = sq_dist(H, i, centers, a);
        if (d > far_d) {
          far_d = d;
          far = i;
        }
      }
      if (far < 0) continue;
      res.assignments[static_cast<std::size_t>(far)] = static_cast<int>(c);
      centers.col(c) = H.col(far);
    }

    centers.setZero();
    std::fill(counts.begin(), counts.end(), 0);
    for (Index i = 0; i < n; ++i) {
      const int a = res.assignments[static_cast<std::size_t>(i)];
      centers.col(a) += H.col(i);
      ++counts[static_cast<std::size_t>(a)];
    }
    for (Index c = 0; c < k; ++c)
      if (counts[static_cast<std::size_t>(c)] > 0) centers.col(c) /= static_cast<double>(counts[static_cast<std::size_t>(c)]);
  }

  res.inertia = 0.0;
  for (Index i = 0; i < n; ++i) res.inertia += sq_dist(H, i, centers, res.assignments[static_cast<std::size_t>(i)]);
  res.centers = std::move(centers);
  return res;
}

}  // namespace detail

/// Cluster the columns of H. Deterministic given `seed`; returns the restart
/// with the lowest inertia (earliest wins ties).
inline ClusterResult kmeans(const Matrix& H, int k, int restarts, std::uint64_t seed,
                            int max_iter = kKmeansMaxIter) {
  require(H.cols() > 0 && H.rows() > 0, "kmeans: empty input");
  require(k > 0, "kmeans: k must be positive");
  require(k <= H.cols(), "kmeans: k exceeds the number of points");
  require(restarts > 0, "kmeans: restarts must be positive");
  Rng rng(seed);
  ClusterResult best;
  best.inertia = std::numeric_limits<double>::infinity();
  for (int r = 0; r < restarts; ++r) {
    ClusterResult run = detail::lloyd(H, detail::kmeanspp_seed(H, k, rng), max_iter);
    if (run.inertia < best.inertia) best = std::move(run);
  }
  return best;
}

}  // namespace gae
