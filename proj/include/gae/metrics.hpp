#pragma once

// Clustering accuracy under the optimal cluster-to-class mapping and
// normalized mutual information.

#include "gae/core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <vector>

namespace gae {

/// Minimum-cost perfect assignment on a square cost matrix (Hungarian method
/// with potentials, O(n^3)). Returns row -> column.
inline std::vector<Index> hungarian(const Matrix& cost) {
  require(cost.rows() == cost.cols(), "hungarian: cost matrix must be square");
  const Index n = cost.rows();
  const double inf = std::numeric_limits<double>::infinity();
  // 1-based arrays; index 0 is a sentinel column.
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<Index> p(n + 1, 0), way(n + 1, 0);
  std::vector<char> used(n + 1);
  for (Index i = 1; i <= n; ++i) {
    p[0] = i;
    Index j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const Index i0 = p[j0];
      double delta = inf;
      Index j1 = 0;
      for (Index j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (Index j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const Index j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<Index> row_to_col(static_cast<std::size_t>(n));
  for (Index j = 1; j <= n; ++j) row_to_col[static_cast<std::size_t>(p[j] - 1)] = j - 1;
  return row_to_col;
}

/// counts(a, b) = #samples with a-label index a and b-label index b, after
/// compacting each labeling to 0..K-1 in ascending id order.
inline Matrix contingency(const std::vector<int>& a, const std::vector<int>& b) {
  require(a.size() == b.size(), "labelings differ in length");
  require(!a.empty(), "labelings are empty");
  auto compact = [](const std::vector<int>& x) {
    std::map<int, Index> ids;
    for (int v : x) ids.emplace(v, 0);
    Index next = 0;
    for (auto& [_, id] : ids) id = next++;
    std::vector<Index> out;
    out.reserve(x.size());
    for (int v : x) out.push_back(ids.at(v));
    return std::pair{out, next};
  };
  const auto [ia, ka] = compact(a);
  const auto [ib, kb] = compact(b);
  Matrix counts = Matrix::Zero(ka, kb);
  for (std::size_t s = 0; s < a.size(); ++s) counts(ia[s], ib[s]) += 1.0;
  return counts;
}

/// Fraction of samples whose cluster maps to their true class under the
/// matching that maximizes agreement.
inline double accuracy(const std::vector<int>& clustered, const std::vector<int>& truth) {
  const Matrix counts = contingency(clustered, truth);
  const Index s = std::max(counts.rows(), counts.cols());
  Matrix padded = Matrix::Zero(s, s);
  padded.topLeftCorner(counts.rows(), counts.cols()) = counts;
  const Matrix cost = padded.maxCoeff() - padded.array();
  const auto match = hungarian(cost);
  double hits = 0.0;
  for (Index r = 0; r < s; ++r) hits += padded(r, match[static_cast<std::size_t>(r)]);
  return hits / static_cast<double>(clustered.size());
}

/// Plug-in mutual information normalized by max(H(C), H(C')), natural log,
/// 0 log 0 = 0. Two single-cluster labelings give 1.
inline double normalized_mutual_information(const std::vector<int>& c, const std::vector<int>& c_prime) {
  const Matrix counts = contingency(c, c_prime);
  const double n = static_cast<double>(c.size());
  const Vector pa = counts.rowwise().sum() / n;
  const Vector pb = counts.colwise().sum().transpose() / n;
  auto entropy = [](const Vector& p) {
    double h = 0.0;
    for (Index i = 0; i < p.size(); ++i)
      if (p(i) > 0.0) h -= p(i) * std::log(p(i));
    return h;
  };
  double mi = 0.0;
  for (Index i = 0; i < counts.rows(); ++i)
    for (Index j = 0; j < counts.cols(); ++j) {
      const double pij = counts(i, j) / n;
      if (pij > 0.0) mi += pij * std::log(pij / (pa(i) * pb(j)));
    }
  const double denom = std::max(entropy(pa), entropy(pb));
  if (denom == 0.0) return 1.0;
  return std::clamp(mi / denom, 0.0, 1.0);
}

}  // namespace gae
