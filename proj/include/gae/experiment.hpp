#pragma once

// Randomized class-subset clustering protocol: for every subset size and
// repeat, draw classes, learn a representation whose width equals the class
// count, run k-means with k = class count and score AC / NMI. Hyperparameters
// are chosen per subset size by mean AC over the repeats.

#include "gae/dataset.hpp"
#include "gae/graph.hpp"
#include "gae/kmeans.hpp"
#include "gae/metrics.hpp"
#include "gae/pca.hpp"
#include "gae/stack.hpp"

#include <nlohmann/json.hpp>

#include <atomic>
#include <cstdio>
#include <exception>
#include <functional>
#include <mutex>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

namespace gae {

enum class Method { gae, sgae, sae, plain_ae, pca, kmeans_raw };

inline const char* to_string(Method m) {
  switch (m) {
    case Method::gae: return "gae";
    case Method::sgae: return "sgae";
    case Method::sae: return "sae";
    case Method::plain_ae: return "plain_ae";
    case Method::pca: return "pca";
    case Method::kmeans_raw: return "kmeans_raw";
  }
  return "?";
}

/// Row label used in the comparison tables.
inline const char* display_name(Method m) {
  switch (m) {
    case Method::gae: return "GAE";
    case Method::sgae: return "SGAE";
    case Method::sae: return "SAE";
    case Method::plain_ae: return "AE";
    case Method::pca: return "PCA";
    case Method::kmeans_raw: return "Kmeans";
  }
  return "?";
}

inline Method parse_method(std::string_view s) {
  for (Method m : {Method::gae, Method::sgae, Method::sae, Method::plain_ae, Method::pca, Method::kmeans_raw})
    if (s == to_string(m)) return m;
  throw InvalidInput("unknown method '" + std::string(s) + "'");
}

inline bool is_autoencoder(Method m) {
  return m == Method::gae || m == Method::sgae || m == Method::sae || m == Method::plain_ae;
}

/// One grid point. Only the fields the method uses are meaningful.
struct Hyper {
  double lambda = 0.0;
  int k = 0;
  double eta = 0.0;
  double rho = 0.0;
};

struct HyperGrid {
  std::vector<double> lambda{1e-3, 1e-2, 1e-1, 1.0, 10.0};
  std::vector<int> k{3, 5, 7, 10};
  std::vector<double> eta{1e-3, 1e-2, 1e-1};
  std::vector<double> rho{0.05, 0.1, 0.2};

  std::vector<Hyper> cells(Method m) const {
    std::vector<Hyper> out;
    switch (m) {
      case Method::gae:
      case Method::sgae:
        for (double l : lambda)
          for (int kk : k) out.push_back({l, kk, 0.0, 0.0});
        break;
      case Method::sae:
        for (double e : eta)
          for (double r : rho) out.push_back({0.0, 0, e, r});
        break;
      default:
        out.push_back({});
    }
    return out;
  }
};

struct ExperimentProtocol {
  std::vector<int> subset_sizes;
  int repeats = 5;
  std::optional<double> labeled_fraction;  // sgae only
  int kmeans_restarts = 10;
  // Widths of the encoder layers below the top one; the top layer's width is
  // the class count of the subset.
  std::vector<Index> hidden_dims;
};

struct OptimizerSettings {
  int max_iter = 400;
  double grad_tol = 1e-5;
  int history_size = 10;
};

struct ExperimentConfig {
  Method method = Method::gae;
  ExperimentProtocol protocol;
  HyperGrid grid;
  OptimizerSettings optimizer;
  GraphSpec graph;  // base recipe; k comes from the grid
  std::uint64_t seed = 0;
  int jobs = 1;
};

struct RepeatRecord {
  int subset_size = 0;
  int repeat = 0;
  std::vector<int> classes;
  std::uint64_t subset_seed = 0;
  std::uint64_t init_seed = 0;
  std::uint64_t kmeans_seed = 0;
  Hyper hyper;
  double ac = 0.0;
  double mi = 0.0;
};

struct CellResult {
  int subset_size = 0;
  Hyper hyper;
  double mean_ac = 0.0;
  double mean_mi = 0.0;
  std::vector<RepeatRecord> records;
};

struct ExperimentReport {
  Method method = Method::gae;
  std::vector<CellResult> cells;  // selected grid point per subset size
  std::vector<std::vector<CellResult>> grid;  // every grid point, per subset size
  double average_ac = 0.0;
  double average_mi = 0.0;

  std::vector<RepeatRecord> records() const {
    std::vector<RepeatRecord> out;
    for (const auto& c : cells) out.insert(out.end(), c.records.begin(), c.records.end());
    return out;
  }
};

/// Run fn(0..count-1) on up to `jobs` threads. Rethrows the first exception.
inline void parallel_for(std::size_t count, int jobs, const std::function<void(std::size_t)>& fn) {
  if (jobs <= 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < count;) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = count;
      }
    }
  };
  std::vector<std::thread> threads;
  const auto n = std::min<std::size_t>(static_cast<std::size_t>(jobs), count);
  for (std::size_t t = 0; t < n; ++t) threads.emplace_back(worker);
  for (auto& t : threads) t.join();
  if (failure) std::rethrow_exception(failure);
}

/// Substream index shared by every method and grid point for a given
/// (subset size, repeat), so all methods see the same class subsets.
inline std::uint64_t protocol_key(int subset_size, int repeat) {
  return (static_cast<std::uint64_t>(subset_size) << 20) | static_cast<std::uint64_t>(repeat);
}

/// Representation of a labeled subset under `method`. `labels` is the
/// (possibly partially masked) label vector used by semi graphs.
inline Matrix learn_representation(Method method, const Matrix& X, const std::vector<int>& labels, int classes,
                                   const Hyper& hyper, const ExperimentConfig& cfg, std::uint64_t init_seed) {
  if (method == Method::kmeans_raw) return X;
  if (method == Method::pca) return pca_reduce(X, classes);

  std::vector<Index> dims = cfg.protocol.hidden_dims;
  dims.push_back(classes);
  std::vector<TrainConfig> configs;
  for (std::size_t i = 0; i < dims.size(); ++i) {
    TrainConfig tc;
    tc.max_iter = cfg.optimizer.max_iter;
    tc.grad_tol = cfg.optimizer.grad_tol;
    tc.history_size = cfg.optimizer.history_size;
    tc.seed = substream(init_seed, "layer", i);
    tc.rho = 0.1;
    if (method == Method::gae || method == Method::sgae) tc.lambda = hyper.lambda;
    if (method == Method::sae) {
      tc.eta = hyper.eta;
      tc.rho = hyper.rho;
    }
    configs.push_back(tc);
  }
  GraphSpec spec = cfg.graph;
  if (method == Method::gae || method == Method::sgae) spec.k = hyper.k;
  if (method == Method::sgae) spec.kind = GraphKind::semi;

  ObjectiveKind kind = ObjectiveKind::plain;
  if (method == Method::gae || method == Method::sgae) kind = ObjectiveKind::gae;
  if (method == Method::sae) kind = ObjectiveKind::sae;

  const StackFit fit = train_stack(X, &labels, spec, dims, configs, kind);
  return encode_stack(fit.model, X);
}

inline void validate(const ExperimentConfig& cfg, const DataSet& ds) {
  require(ds.fully_labeled(), "experiments need a fully labeled dataset");
  require(!cfg.protocol.subset_sizes.empty(), "no class subset sizes given");
  for (int s : cfg.protocol.subset_sizes)
    require(s >= 2 && s <= ds.class_count,
            "class subset size " + std::to_string(s) + " must lie in 2..class_count");
  require(cfg.protocol.repeats > 0, "repeats must be positive");
  require(cfg.protocol.kmeans_restarts > 0, "kmeans restarts must be positive");
  for (Index d : cfg.protocol.hidden_dims) require(d > 0, "hidden dims must be positive");
  if (cfg.method == Method::sgae)
    require(cfg.protocol.labeled_fraction.has_value(), "sgae needs a labeled fraction");
  require(!cfg.grid.cells(cfg.method).empty(), "hyperparameter grid is empty");
}

inline RepeatRecord run_repeat(const DataSet& ds, const ExperimentConfig& cfg, int subset_size, int repeat,
                               const Hyper& hyper) {
  const std::uint64_t key = protocol_key(subset_size, repeat);
  RepeatRecord rec;
  rec.subset_size = subset_size;
  rec.repeat = repeat;
  rec.hyper = hyper;
  rec.subset_seed = substream(cfg.seed, "protocol", key);
  rec.init_seed = substream(cfg.seed, "init", key);
  rec.kmeans_seed = substream(cfg.seed, "kmeans", key);
  rec.classes = random_class_subset(ds.class_count, subset_size, rec.subset_seed);

  const DataSet sub = select_classes(ds, rec.classes);
  std::vector<int> graph_labels = *sub.labels;
  if (cfg.method == Method::sgae)
    graph_labels = *mask_labels(sub, *cfg.protocol.labeled_fraction, substream(cfg.seed, "mask", key)).labels;

  const Matrix H = learn_representation(cfg.method, sub.X, graph_labels, subset_size, hyper, cfg, rec.init_seed);
  const ClusterResult km = kmeans(H, subset_size, cfg.protocol.kmeans_restarts, rec.kmeans_seed);
  rec.ac = accuracy(km.assignments, *sub.labels);
  rec.mi = normalized_mutual_information(*sub.labels, km.assignments);
  return rec;
}

inline ExperimentReport run_experiment(const DataSet& ds, const ExperimentConfig& cfg) {
  validate(cfg, ds);
  const auto cells = cfg.grid.cells(cfg.method);
  const auto& sizes = cfg.protocol.subset_sizes;
  const auto reps = static_cast<std::size_t>(cfg.protocol.repeats);
  const std::size_t per_size = cells.size() * reps;

  std::vector<RepeatRecord> results(sizes.size() * per_size);
  parallel_for(results.size(), cfg.jobs, [&](std::size_t t) {
    const std::size_t s = t / per_size, c = (t % per_size) / reps, r = t % reps;
    results[t] = run_repeat(ds, cfg, sizes[s], static_cast<int>(r), cells[c]);
  });

  ExperimentReport report;
  report.method = cfg.method;
  double sum_ac = 0.0, sum_mi = 0.0;
  std::size_t count = 0;
  for (std::size_t s = 0; s < sizes.size(); ++s) {
    std::vector<CellResult> row;
    for (std::size_t c = 0; c < cells.size(); ++c) {
      CellResult cell;
      cell.subset_size = sizes[s];
      cell.hyper = cells[c];
      for (std::size_t r = 0; r < reps; ++r) {
        const auto& rec = results[s * per_size + c * reps + r];
        cell.records.push_back(rec);
        cell.mean_ac += rec.ac;
        cell.mean_mi += rec.mi;
      }
      cell.mean_ac /= static_cast<double>(reps);
      cell.mean_mi /= static_cast<double>(reps);
      row.push_back(std::move(cell));
    }
    std::size_t best = 0;
    for (std::size_t c = 1; c < row.size(); ++c)
      if (row[c].mean_ac > row[best].mean_ac) best = c;
    report.cells.push_back(row[best]);
    for (const auto& rec : row[best].records) {
      sum_ac += rec.ac;
      sum_mi += rec.mi;
      ++count;
    }
    report.grid.push_back(std::move(row));
  }
  report.average_ac = sum_ac / static_cast<double>(count);
  report.average_mi = sum_mi / static_cast<double>(count);
  return report;
}

// ---- report output -------------------------------------------------------

inline nlohmann::json hyper_to_json(Method m, const Hyper& h) {
  switch (m) {
    case Method::gae:
    case Method::sgae: return {{"lambda", h.lambda}, {"k", h.k}};
    case Method::sae: return {{"eta", h.eta}, {"rho", h.rho}};
    default: return nlohmann::json::object();
  }
}

inline nlohmann::json to_json(const ExperimentReport& rep) {
  using nlohmann::json;
  auto record_json = [&](const RepeatRecord& r) {
    return json{{"subset_size", r.subset_size}, {"repeat", r.repeat},        {"classes", r.classes},
                {"subset_seed", r.subset_seed}, {"init_seed", r.init_seed},  {"kmeans_seed", r.kmeans_seed},
                {"hyper", hyper_to_json(rep.method, r.hyper)},
                {"ac", r.ac},                   {"mi", r.mi}};
  };
  json cells = json::array();
  for (std::size_t s = 0; s < rep.cells.size(); ++s) {
    const auto& c = rep.cells[s];
    json recs = json::array();
    for (const auto& r : c.records) recs.push_back(record_json(r));
    json grid = json::array();
    for (const auto& g : rep.grid[s])
      grid.push_back({{"hyper", hyper_to_json(rep.method, g.hyper)}, {"mean_ac", g.mean_ac}, {"mean_mi", g.mean_mi}});
    cells.push_back({{"subset_size", c.subset_size},
                     {"selected_hyper", hyper_to_json(rep.method, c.hyper)},
                     {"mean_ac", c.mean_ac},
                     {"mean_mi", c.mean_mi},
                     {"records", recs},
                     {"grid", grid}});
  }
  return {{"method", to_string(rep.method)},
          {"average_ac", rep.average_ac},
          {"average_mi", rep.average_mi},
          {"cells", cells}};
}

/// Comparison table: header "Class,<sizes...>,Average"; an MI block then an
/// AC block, one row per method.
inline void write_comparison_csv(std::ostream& out, const std::vector<ExperimentReport>& reports) {
  require(!reports.empty(), "no reports to write");
  out << "Class";
  for (const auto& c : reports.front().cells) out << ',' << c.subset_size;
  out << ",Average\n";
  char buf[32];
  for (const char* metric : {"MI", "AC"}) {
    const bool mi = metric[0] == 'M';
    for (const auto& rep : reports) {
      require(rep.cells.size() == reports.front().cells.size(), "reports cover different subset sizes");
      out << display_name(rep.method) << ' ' << metric;
      for (const auto& c : rep.cells) {
        std::snprintf(buf, sizeof buf, "%.4f", mi ? c.mean_mi : c.mean_ac);
        out << ',' << buf;
      }
      std::snprintf(buf, sizeof buf, "%.4f", mi ? rep.average_mi : rep.average_ac);
      out << ',' << buf << '\n';
    }
  }
}

}  // namespace gae
