#pragma once

// Multi-layer GAE: greedy layer-wise training with the graph rebuilt from
// each layer's input, stacked encoding/decoding and two fine-tuning modes.

#include "gae/autoencoder.hpp"
#include "gae/graph.hpp"

#include <string>
#include <vector>

namespace gae {

struct GaeModel {
  std::vector<LayerParams> layers;
  // Training metadata; not part of the serialized container.
  ObjectiveKind kind = ObjectiveKind::gae;
  GraphSpec graph_spec;
  std::vector<TrainConfig> configs;

  /// [m, l_1, ..., l_j]
  std::vector<Index> dims() const {
    std::vector<Index> d;
    if (layers.empty()) return d;
    d.push_back(layers.front().input_dim());
    for (const auto& l : layers) d.push_back(l.hidden_dim());
    return d;
  }

  bool chained() const {
    if (layers.empty()) return false;
    for (std::size_t i = 0; i < layers.size(); ++i) {
      if (!layers[i].consistent()) return false;
      if (i > 0 && layers[i].input_dim() != layers[i - 1].hidden_dim()) return false;
    }
    return true;
  }

  Index size(bool with_decoders = true) const {
    Index s = 0;
    for (const auto& l : layers) s += with_decoders ? l.size() : l.W_H.size() + l.b_H.size();
    return s;
  }
};

inline void check_chain(const GaeModel& model) {
  if (!model.chained()) throw InvalidInput("model layers do not form a consistent dimension chain");
}

inline Matrix encode_stack(const GaeModel& model, const Matrix& X) {
  check_chain(model);
  if (X.rows() != model.layers.front().input_dim())
    throw InvalidInput("encode_stack: data has " + std::to_string(X.rows()) + " rows, model expects " +
                       std::to_string(model.layers.front().input_dim()));
  Matrix H = X;
  for (const auto& layer : model.layers) H = encode(layer, H);
  return H;
}

/// Decoders applied in reverse layer order.
inline Matrix decode_stack(const GaeModel& model, const Matrix& H) {
  check_chain(model);
  Matrix R = H;
  for (auto it = model.layers.rbegin(); it != model.layers.rend(); ++it) R = decode(*it, R);
  return R;
}

struct StackFit {
  GaeModel model;
  std::vector<LayerFit> layer_fits;
};

/// Greedy layer-wise training. Layer i is trained on H_{i-1} (H_0 = X) with a
/// graph rebuilt from H_{i-1} by `graph_spec`. `configs` holds one entry per
/// layer or a single entry used for all layers. `labels` feeds semi graphs.
inline StackFit train_stack(const Matrix& X, const std::vector<int>* labels, const GraphSpec& graph_spec,
                            const std::vector<Index>& dims, const std::vector<TrainConfig>& configs,
                            ObjectiveKind kind) {
  require(!dims.empty(), "layer dimension list is empty");
  require(configs.size() == 1 || configs.size() == dims.size(),
          "need one training config per layer (or a single shared one)");
  StackFit fit;
  fit.model.kind = kind;
  fit.model.graph_spec = graph_spec;
  Matrix H = X;
  for (std::size_t i = 0; i < dims.size(); ++i) {
    const TrainConfig& cfg = configs.size() == 1 ? configs.front() : configs[i];
    const bool needs_graph =
        (kind == ObjectiveKind::gae || kind == ObjectiveKind::graph_only) && cfg.lambda > 0.0;
    std::optional<AffinityGraph> graph;
    if (needs_graph) graph = build_graph(graph_spec, H, labels);
    LayerFit layer = train_layer(H, graph ? &graph->G : nullptr, cfg, dims[i], kind);
    H = encode(layer.params, H);
    fit.model.layers.push_back(layer.params);
    fit.model.configs.push_back(cfg);
    fit.layer_fits.push_back(std::move(layer));
  }
  return fit;
}

inline StackFit train_stack(const DataSet& ds, const GraphSpec& graph_spec, const std::vector<Index>& dims,
                            const std::vector<TrainConfig>& configs, ObjectiveKind kind) {
  return train_stack(ds.X, ds.labels ? &*ds.labels : nullptr, graph_spec, dims, configs, kind);
}

enum class FinetuneMode { graph_only, full };

/// Whole-stack objective for fine-tuning.
///
///   graph_only: lambda tr(H_j G H_j^T) over encoder parameters only
///   full:       ||X - decode_stack(encode_stack(X))||^2 + lambda tr(H_j G H_j^T)
///               over all parameters
class StackObjective {
 public:
  StackObjective(const Matrix& X, const Matrix& G, double lambda, FinetuneMode mode)
      : X_(X), G_sym_(G + G.transpose()), lambda_(lambda), mode_(mode) {
    require(G.rows() == X.cols() && G.cols() == X.cols(), "regularizer matrix must be n x n");
    require(lambda >= 0.0, "lambda must be nonnegative");
  }

  bool with_decoders() const { return mode_ == FinetuneMode::full; }

  Vector pack(const GaeModel& m) const {
    Vector v(m.size(with_decoders()));
    Index o = 0;
    for (const auto& l : m.layers) {
      if (with_decoders()) {
        v.segment(o, l.size()) = l.pack();
        o += l.size();
      } else {
        v.segment(o, l.W_H.size()) = Eigen::Map<const Vector>(l.W_H.data(), l.W_H.size());
        o += l.W_H.size();
        v.segment(o, l.b_H.size()) = l.b_H;
        o += l.b_H.size();
      }
    }
    return v;
  }

  void unpack(const Vector& v, GaeModel& m) const {
    require(v.size() == m.size(with_decoders()), "packed stack length mismatch");
    Index o = 0;
    for (auto& l : m.layers) {
      if (with_decoders()) {
        l.unpack(v.segment(o, l.size()));
        o += l.size();
      } else {
        Eigen::Map<Vector>(l.W_H.data(), l.W_H.size()) = v.segment(o, l.W_H.size());
        o += l.W_H.size();
        l.b_H = v.segment(o, l.b_H.size());
        o += l.b_H.size();
      }
    }
  }

  /// Objective value; `grad` (same layout as the model) receives the gradient.
  /// In graph_only mode decoder gradients are left at zero.
  double evaluate(const GaeModel& m, GaeModel* grad) const {
    check_chain(m);
    require(X_.rows() == m.layers.front().input_dim(), "data does not match model input dimension");
    const std::size_t j = m.layers.size();
    std::vector<Matrix> A(j + 1);
    A[0] = X_;
    for (std::size_t i = 0; i < j; ++i) A[i + 1] = encode(m.layers[i], A[i]);

    if (grad) {
      grad->layers.clear();
      for (const auto& l : m.layers) grad->layers.emplace_back(l.input_dim(), l.hidden_dim());
    }

    double value = 0.0;
    Matrix dTop = Matrix::Zero(A[j].rows(), A[j].cols());

    if (mode_ == FinetuneMode::full) {
      // R[i] is the decoder-side activation at depth i; R[j] = A[j].
      std::vector<Matrix> R(j + 1);
      R[j] = A[j];
      for (std::size_t i = j; i-- > 0;) R[i] = decode(m.layers[i], R[i + 1]);
      const Matrix diff = R[0] - X_;
      value += diff.squaredNorm();
      if (grad) {
        Matrix dR = 2.0 * diff;
        for (std::size_t i = 0; i < j; ++i) {
          const Matrix dZ = (dR.array() * R[i].array() * (1.0 - R[i].array())).matrix();
          grad->layers[i].W_Q.noalias() = dZ * R[i + 1].transpose();
          grad->layers[i].b_Q = dZ.rowwise().sum();
          dR.noalias() = m.layers[i].W_Q.transpose() * dZ;
        }
        dTop += dR;
      }
    }

    if (lambda_ != 0.0) {
      const Matrix HGs = A[j] * G_sym_;
      value += lambda_ * 0.5 * HGs.cwiseProduct(A[j]).sum();
      if (grad) dTop += lambda_ * HGs;
    }

    if (grad) {
      Matrix dA = std::move(dTop);
      for (std::size_t i = j; i-- > 0;) {
        const Matrix dZ = (dA.array() * A[i + 1].array() * (1.0 - A[i + 1].array())).matrix();
        grad->layers[i].W_H.noalias() = dZ * A[i].transpose();
        grad->layers[i].b_H = dZ.rowwise().sum();
        if (i > 0) dA.noalias() = m.layers[i].W_H.transpose() * dZ;
      }
    }
    return value;
  }

 private:
  const Matrix& X_;
  Matrix G_sym_;
  double lambda_;
  FinetuneMode mode_;
};

struct FinetuneFit {
  GaeModel model;
  std::vector<TracePoint> trace;
  OptStatus status = OptStatus::max_iter;
};

inline FinetuneFit finetune(const GaeModel& model, const Matrix& X, const AffinityGraph& graph,
                            const TrainConfig& cfg, FinetuneMode mode) {
  validate(cfg);
  check_chain(model);
  require(graph.nodes() == X.cols(), "graph size does not match sample count");
  const StackObjective obj(X, graph.G, cfg.lambda, mode);
  GaeModel work = model;
  GaeModel grad;
  auto fn = [&](const Vector& x, Vector& g) {
    obj.unpack(x, work);
    const double f = obj.evaluate(work, &grad);
    g = obj.pack(grad);
    return f;
  };
  LbfgsOptions opt;
  opt.max_iter = cfg.max_iter;
  opt.grad_tol = cfg.grad_tol;
  opt.history = cfg.history_size;
  auto res = minimize_lbfgs(fn, obj.pack(model), opt);

  FinetuneFit fit;
  fit.model = model;
  obj.unpack(res.x, fit.model);
  fit.trace = std::move(res.trace);
  fit.status = res.status;
  return fit;
}

/// Minimize lambda tr(H_j G H_j^T) through the encoder stack; decoders untouched.
inline FinetuneFit finetune_graph_only(const GaeModel& model, const Matrix& X, const AffinityGraph& graph,
                                       const TrainConfig& cfg) {
  return finetune(model, X, graph, cfg, FinetuneMode::graph_only);
}

/// Jointly minimize deep reconstruction error plus the graph term.
inline FinetuneFit finetune_full(const GaeModel& model, const Matrix& X, const AffinityGraph& graph,
                                 const TrainConfig& cfg) {
  return finetune(model, X, graph, cfg, FinetuneMode::full);
}

}  // namespace gae
