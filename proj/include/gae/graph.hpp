#pragma once

// Affinity graphs V over the samples (columns) of a data matrix and the
// regularizer matrix G = D1 + D2 - 2V, for which
//
//   tr(H G H^T) = sum_i sum_j v_ij ||h_i - h_j||^2
//
// with D1 = diag(row sums of V) and D2 = diag(column sums of V).
// V need not be symmetric; kNN graphs generally are not.

#include "gae/core.hpp"
#include "gae/dataset.hpp"
#include "gae/lasso.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

namespace gae {

enum class GraphKind { knn, epsilon, l1, semi };

inline const char* to_string(GraphKind k) {
  switch (k) {
    case GraphKind::knn: return "knn";
    case GraphKind::epsilon: return "epsilon";
    case GraphKind::l1: return "l1";
    case GraphKind::semi: return "semi";
  }
  return "?";
}

inline GraphKind parse_graph_kind(std::string_view s) {
  if (s == "knn") return GraphKind::knn;
  if (s == "epsilon") return GraphKind::epsilon;
  if (s == "l1") return GraphKind::l1;
  if (s == "semi") return GraphKind::semi;
  throw InvalidInput("unknown graph kind '" + std::string(s) + "'");
}

/// Construction recipe; only the fields relevant to `kind` are used.
struct GraphSpec {
  GraphKind kind = GraphKind::knn;
  int k = 5;
  double epsilon = 0.5;
  double lambda1 = 0.1;
  double l1_tol = 1e-6;
  int l1_max_iter = 10000;
};

struct AffinityGraph {
  Matrix V;
  Matrix G;
  GraphSpec spec;

  Index nodes() const { return V.rows(); }
  Index edge_count() const { return (V.array() != 0.0).count(); }
};

/// G = D1 + D2 - 2V.
inline Matrix regularizer_matrix(const Matrix& V) {
  require(V.rows() == V.cols(), "weight matrix must be square");
  require((V.array() >= 0.0).all(), "weight matrix must be nonnegative");
  Matrix G = -2.0 * V;
  G.diagonal() += V.rowwise().sum() + V.colwise().sum().transpose();
  return G;
}

inline AffinityGraph make_graph(Matrix V, const GraphSpec& spec) {
  AffinityGraph g;
  g.G = regularizer_matrix(V);
  g.V = std::move(V);
  g.spec = spec;
  return g;
}

/// Unsquared Euclidean distances between columns. Computed directly rather
/// than through the Gram matrix so that duplicate columns give exactly 0.
inline Matrix pairwise_distances(const Matrix& X) {
  const Index n = X.cols();
  Matrix D = Matrix::Zero(n, n);
  for (Index j = 0; j < n; ++j)
    for (Index i = j + 1; i < n; ++i) D(i, j) = D(j, i) = (X.col(i) - X.col(j)).norm();
  return D;
}

/// neighbors[j] = the k nearest samples to sample j (self excluded), nearest
/// first, ties broken by lower index.
inline std::vector<std::vector<Index>> knn_sets(const Matrix& D, int k) {
  const Index n = D.rows();
  require(k > 0, "k must be positive");
  require(k < n, "k must be smaller than the sample count");
  std::vector<std::vector<Index>> out(static_cast<std::size_t>(n));
  std::vector<Index> order;
  for (Index j = 0; j < n; ++j) {
    order.clear();
    for (Index i = 0; i < n; ++i)
      if (i != j) order.push_back(i);
    std::partial_sort(order.begin(), order.begin() + k, order.end(), [&](Index a, Index b) {
      return std::tie(D(a, j), a) < std::tie(D(b, j), b);
    });
    out[static_cast<std::size_t>(j)].assign(order.begin(), order.begin() + k);
  }
  return out;
}

/// v_ij = exp(-||x_i - x_j||) when x_i is one of the k nearest neighbors of x_j.
inline AffinityGraph build_knn_graph(const Matrix& X, int k) {
  const Matrix D = pairwise_distances(X);
  const auto nbrs = knn_sets(D, k);
  Matrix V = Matrix::Zero(X.cols(), X.cols());
  for (Index j = 0; j < X.cols(); ++j)
    for (Index i : nbrs[static_cast<std::size_t>(j)]) V(i, j) = std::exp(-D(i, j));
  GraphSpec spec;
  spec.kind = GraphKind::knn;
  spec.k = k;
  return make_graph(std::move(V), spec);
}

inline AffinityGraph build_knn_graph(const DataSet& ds, int k) { return build_knn_graph(ds.X, k); }

/// v_ij = exp(-||x_i - x_j||) when ||x_i - x_j|| < epsilon, i != j.
inline AffinityGraph build_epsilon_graph(const Matrix& X, double epsilon) {
  require(epsilon > 0.0, "epsilon must be positive");
  const Matrix D = pairwise_distances(X);
  const Index n = X.cols();
  Matrix V = Matrix::Zero(n, n);
  for (Index j = 0; j < n; ++j)
    for (Index i = 0; i < n; ++i)
      if (i != j && D(i, j) < epsilon) V(i, j) = std::exp(-D(i, j));
  GraphSpec spec;
  spec.kind = GraphKind::epsilon;
  spec.epsilon = epsilon;
  return make_graph(std::move(V), spec);
}

inline AffinityGraph build_epsilon_graph(const DataSet& ds, double epsilon) {
  return build_epsilon_graph(ds.X, epsilon);
}

/// Sparse self-representation: row i of V holds |b| where b solves the lasso
/// of x_i on all other samples. Throws NumericalError if any solve fails to
/// reach `tol` within `max_iter` sweeps.
inline AffinityGraph build_l1_graph(const Matrix& X, double lambda1, double tol = 1e-6, int max_iter = 10000) {
  const Index n = X.cols();
  require(n >= 2, "l1 graph needs at least 2 samples");
  require(lambda1 >= 0.0, "l1 penalty must be nonnegative");
  Matrix V = Matrix::Zero(n, n);
  Matrix others(X.rows(), n - 1);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0, c = 0; j < n; ++j)
      if (j != i) others.col(c++) = X.col(j);
    const LassoResult res = solve_lasso(others, X.col(i), lambda1, tol, max_iter);
    if (!res.converged)
      throw NumericalError("l1 graph: lasso for sample " + std::to_string(i) + " did not converge in " +
                           std::to_string(max_iter) + " sweeps");
    for (Index j = 0, c = 0; j < n; ++j)
      if (j != i) V(i, j) = std::abs(res.coef(c++));
  }
  GraphSpec spec;
  spec.kind = GraphKind::l1;
  spec.lambda1 = lambda1;
  spec.l1_tol = tol;
  spec.l1_max_iter = max_iter;
  return make_graph(std::move(V), spec);
}

inline AffinityGraph build_l1_graph(const DataSet& ds, double lambda1, double tol = 1e-6, int max_iter = 10000) {
  return build_l1_graph(ds.X, lambda1, tol, max_iter);
}

/// kNN neighbor sets with label overrides: 1 for same-label pairs, 0 for
/// different-label pairs, exp(-d) when either side is unlabeled.
inline AffinityGraph build_semi_graph(const Matrix& X, const std::vector<int>& labels, int k) {
  require(static_cast<Index>(labels.size()) == X.cols(), "label count does not match sample count");
  const Matrix D = pairwise_distances(X);
  const auto nbrs = knn_sets(D, k);
  Matrix V = Matrix::Zero(X.cols(), X.cols());
  for (Index j = 0; j < X.cols(); ++j) {
    const int lj = labels[static_cast<std::size_t>(j)];
    for (Index i : nbrs[static_cast<std::size_t>(j)]) {
      const int li = labels[static_cast<std::size_t>(i)];
      if (li == kUnlabeled || lj == kUnlabeled)
        V(i, j) = std::exp(-D(i, j));
      else
        V(i, j) = li == lj ? 1.0 : 0.0;
    }
  }
  GraphSpec spec;
  spec.kind = GraphKind::semi;
  spec.k = k;
  return make_graph(std::move(V), spec);
}

/// Without any labels this is exactly the kNN graph; callers may check
/// `ds.labeled_count() == 0` to warn about it.
inline AffinityGraph build_semi_graph(const DataSet& ds, int k) {
  if (!ds.labels) {
    auto g = build_knn_graph(ds.X, k);
    g.spec.kind = GraphKind::semi;
    return g;
  }
  return build_semi_graph(ds.X, *ds.labels, k);
}

/// Build by recipe. `labels` is required for semi graphs only.
inline AffinityGraph build_graph(const GraphSpec& spec, const Matrix& X,
                                 const std::vector<int>* labels = nullptr) {
  switch (spec.kind) {
    case GraphKind::knn: return build_knn_graph(X, spec.k);
    case GraphKind::epsilon: return build_epsilon_graph(X, spec.epsilon);
    case GraphKind::l1: return build_l1_graph(X, spec.lambda1, spec.l1_tol, spec.l1_max_iter);
    case GraphKind::semi: {
      if (labels) return build_semi_graph(X, *labels, spec.k);
      auto g = build_knn_graph(X, spec.k);
      g.spec.kind = GraphKind::semi;
      return g;
    }
  }
  throw InvalidInput("unknown graph kind");
}

/// Fraction of nonzero weights that connect samples of different classes.
inline double graph_error_rate(const Matrix& V, const std::vector<int>& labels) {
  require(static_cast<Index>(labels.size()) == V.rows(), "label count does not match graph size");
  Index total = 0, wrong = 0;
  for (Index j = 0; j < V.cols(); ++j)
    for (Index i = 0; i < V.rows(); ++i)
      if (V(i, j) != 0.0) {
        ++total;
        const int li = labels[static_cast<std::size_t>(i)], lj = labels[static_cast<std::size_t>(j)];
        require(li != kUnlabeled && lj != kUnlabeled, "error rate needs labels for every sample");
        if (li != lj) ++wrong;
      }
  require(total > 0, "graph has no connections");
  return static_cast<double>(wrong) / static_cast<double>(total);
}

inline double graph_error_rate(const AffinityGraph& g, const std::vector<int>& labels) {
  return graph_error_rate(g.V, labels);
}

/// Zero every weight between samples of different classes.
inline AffinityGraph drop_cross_class_edges(const AffinityGraph& g, const std::vector<int>& labels) {
  require(static_cast<Index>(labels.size()) == g.nodes(), "label count does not match graph size");
  Matrix V = g.V;
  for (Index j = 0; j < V.cols(); ++j)
    for (Index i = 0; i < V.rows(); ++i)
      if (labels[static_cast<std::size_t>(i)] != labels[static_cast<std::size_t>(j)]) V(i, j) = 0.0;
  return make_graph(std::move(V), g.spec);
}

/// Move round(fraction * edges) randomly chosen edges (i, j) to (i, j') with
/// j' in a different class from i, keeping the weight. Starting from an
/// error-free graph the result has error rate `fraction`.
inline AffinityGraph rewire_across_classes(const AffinityGraph& g, const std::vector<int>& labels,
                                           double fraction, std::uint64_t seed) {
  require(fraction >= 0.0 && fraction <= 1.0, "rewire fraction must lie in [0,1]");
  require(static_cast<Index>(labels.size()) == g.nodes(), "label count does not match graph size");
  std::vector<std::pair<Index, Index>> edges;
  for (Index i = 0; i < g.V.rows(); ++i)
    for (Index j = 0; j < g.V.cols(); ++j)
      if (g.V(i, j) != 0.0 && labels[static_cast<std::size_t>(i)] == labels[static_cast<std::size_t>(j)])
        edges.emplace_back(i, j);
  const auto total = static_cast<std::size_t>(g.edge_count());
  const auto moves = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(total)));
  require(moves <= edges.size(), "not enough same-class edges to rewire");

  Rng rng(seed);
  std::shuffle(edges.begin(), edges.end(), rng);
  Matrix V = g.V;
  for (std::size_t e = 0; e < moves; ++e) {
    const auto [i, j] = edges[e];
    std::vector<Index> targets;
    for (Index t = 0; t < V.cols(); ++t)
      if (labels[static_cast<std::size_t>(t)] != labels[static_cast<std::size_t>(i)] && V(i, t) == 0.0)
        targets.push_back(t);
    if (targets.empty()) throw InvalidInput("no free cross-class target for rewiring");
    std::uniform_int_distribution<std::size_t> pick(0, targets.size() - 1);
    V(i, targets[pick(rng)]) = V(i, j);
    V(i, j) = 0.0;
  }
  return make_graph(std::move(V), g.spec);
}

// Edge-list text format: an optional "# nodes <n> kind <kind>" header, then
// "i j weight" per nonzero weight, sorted by (i, j).

inline void write_edge_list(std::ostream& out, const AffinityGraph& g) {
  out << "# nodes " << g.nodes() << " kind " << to_string(g.spec.kind) << '\n';
  char buf[64];
  for (Index i = 0; i < g.V.rows(); ++i)
    for (Index j = 0; j < g.V.cols(); ++j)
      if (g.V(i, j) != 0.0) {
        std::snprintf(buf, sizeof buf, "%.17g", g.V(i, j));
        out << i << ' ' << j << ' ' << buf << '\n';
      }
}

inline void write_edge_list(const std::filesystem::path& path, const AffinityGraph& g) {
  std::ofstream out(path);
  if (!out) throw InvalidInput("cannot write '" + path.string() + "'");
  write_edge_list(out, g);
}

inline AffinityGraph read_edge_list(std::istream& in) {
  std::vector<std::tuple<Index, Index, double>> edges;
  std::optional<Index> n;
  GraphSpec spec;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    if (line[0] == '#') {
      std::string tag, kind_tag, kind;
      Index count = 0;
      ss.ignore(1);
      if (ss >> tag >> count && tag == "nodes") {
        n = count;
        if (ss >> kind_tag >> kind && kind_tag == "kind") spec.kind = parse_graph_kind(kind);
      }
      continue;
    }
    Index i = 0, j = 0;
    double w = 0.0;
    if (!(ss >> i >> j >> w) || i < 0 || j < 0 || i == j || w < 0.0)
      throw InvalidInput("malformed edge line: '" + line + "'");
    edges.emplace_back(i, j, w);
  }
  Index size = n.value_or(0);
  for (const auto& [i, j, w] : edges) size = std::max(size, std::max(i, j) + 1);
  require(!n || size == *n, "edge index exceeds declared node count");
  Matrix V = Matrix::Zero(size, size);
  for (const auto& [i, j, w] : edges) V(i, j) = w;
  return make_graph(std::move(V), spec);
}

inline AffinityGraph read_edge_list(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot read '" + path.string() + "'");
  return read_edge_list(in);
}

}  // namespace gae
