#pragma once

// Run configuration, manifests and the command implementations behind the
// `gae` executable. Each command reads a resolved RunConfig, writes its
// outputs plus manifest.json into an output directory and returns a short
// human-readable summary.

#include "gae/experiment.hpp"
#include "gae/serialize.hpp"

#include <nlohmann/json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace gae::cmd {

using nlohmann::json;
namespace fs = std::filesystem;

inline constexpr const char* kToolName = "gae";
inline constexpr const char* kToolVersion = "1.0.0";

struct SyntheticSpec {
  int classes = 4;
  int per_class = 30;
  int dim = 10;
  double spread = 0.5;
};

struct DatasetSpec {
  std::string path;  // empty: synthetic
  std::string format = "csv";
  bool labels = true;      // csv: last column is a label
  std::string idx_labels;  // idx: companion label file
  SyntheticSpec synthetic;
};

struct FinetuneSpec {
  std::string mode = "none";  // none | graph_only | full
  double lambda = 0.1;
  int max_iter = 100;
};

struct RunConfig {
  DatasetSpec dataset;
  std::string method = "gae";  // train: gae | sgae | sae | plain_ae | graph_only
  std::vector<std::string> methods{"gae", "plain_ae", "pca", "kmeans_raw"};  // benchmark
  GraphSpec graph;
  std::vector<Index> dims;       // train; empty = [class count]
  std::vector<double> lambda{0.1};  // one value or one per layer
  double eta = 0.01;
  double rho = 0.1;
  OptimizerSettings optimizer;
  FinetuneSpec finetune;
  ExperimentProtocol protocol{{2, 3}, 5, std::nullopt, 10, {}};
  HyperGrid grid;
  std::string model;      // encode
  std::string predicted;  // metrics
  std::string truth;      // metrics
  std::uint64_t seed = 0;
  int jobs = 1;
};

// ---- JSON <-> RunConfig ----------------------------------------------------

namespace detail {

/// Reads known keys from one JSON object and rejects anything else.
class Reader {
 public:
  Reader(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw InvalidInput(where_ + ": expected an object");
  }
  ~Reader() noexcept(false) {
    if (std::uncaught_exceptions() == 0)
      for (const auto& [key, _] : j_.items())
        if (!seen_.count(key)) throw InvalidInput(where_ + ": unknown key '" + key + "'");
  }
  Reader(const Reader&) = delete;
  Reader& operator=(const Reader&) = delete;

  template <class T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception&) {
      throw InvalidInput(where_ + "." + key + ": wrong type");
    }
  }

  const json* sub(const char* key) {
    seen_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

  std::string path(const char* key) const { return where_ + "." + key; }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

}  // namespace detail

inline RunConfig config_from_json(const json& j) {
  RunConfig c;
  detail::Reader r(j, "config");
  if (const json* d = r.sub("dataset")) {
    detail::Reader rd(*d, r.path("dataset"));
    rd.get("path", c.dataset.path);
    rd.get("format", c.dataset.format);
    rd.get("labels", c.dataset.labels);
    rd.get("idx_labels", c.dataset.idx_labels);
    if (const json* s = rd.sub("synthetic")) {
      detail::Reader rs(*s, rd.path("synthetic"));
      rs.get("classes", c.dataset.synthetic.classes);
      rs.get("per_class", c.dataset.synthetic.per_class);
      rs.get("dim", c.dataset.synthetic.dim);
      rs.get("spread", c.dataset.synthetic.spread);
    }
  }
  r.get("method", c.method);
  r.get("methods", c.methods);
  if (const json* g = r.sub("graph")) {
    detail::Reader rg(*g, r.path("graph"));
    std::string kind = to_string(c.graph.kind);
    rg.get("kind", kind);
    c.graph.kind = parse_graph_kind(kind);
    rg.get("k", c.graph.k);
    rg.get("epsilon", c.graph.epsilon);
    rg.get("lambda1", c.graph.lambda1);
    rg.get("l1_tol", c.graph.l1_tol);
    rg.get("l1_max_iter", c.graph.l1_max_iter);
  }
  r.get("dims", c.dims);
  if (const json* l = r.sub("lambda")) {
    if (l->is_number())
      c.lambda = {l->get<double>()};
    else
      r.get("lambda", c.lambda);
  }
  r.get("eta", c.eta);
  r.get("rho", c.rho);
  if (const json* o = r.sub("optimizer")) {
    detail::Reader ro(*o, r.path("optimizer"));
    ro.get("max_iter", c.optimizer.max_iter);
    ro.get("grad_tol", c.optimizer.grad_tol);
    ro.get("history_size", c.optimizer.history_size);
  }
  if (const json* f = r.sub("finetune")) {
    detail::Reader rf(*f, r.path("finetune"));
    rf.get("mode", c.finetune.mode);
    rf.get("lambda", c.finetune.lambda);
    rf.get("max_iter", c.finetune.max_iter);
  }
  if (const json* p = r.sub("protocol")) {
    detail::Reader rp(*p, r.path("protocol"));
    rp.get("subset_sizes", c.protocol.subset_sizes);
    rp.get("repeats", c.protocol.repeats);
    if (const json* lf = rp.sub("labeled_fraction"); lf && !lf->is_null()) {
      if (!lf->is_number()) throw InvalidInput(rp.path("labeled_fraction") + ": wrong type");
      c.protocol.labeled_fraction = lf->get<double>();
    }
    rp.get("kmeans_restarts", c.protocol.kmeans_restarts);
    rp.get("hidden_dims", c.protocol.hidden_dims);
  }
  if (const json* g = r.sub("grid")) {
    detail::Reader rg(*g, r.path("grid"));
    rg.get("lambda", c.grid.lambda);
    rg.get("k", c.grid.k);
    rg.get("eta", c.grid.eta);
    rg.get("rho", c.grid.rho);
  }
  r.get("model", c.model);
  r.get("predicted", c.predicted);
  r.get("truth", c.truth);
  r.get("seed", c.seed);
  r.get("jobs", c.jobs);
  return c;
}

inline json config_to_json(const RunConfig& c) {
  json labeled_fraction = nullptr;
  if (c.protocol.labeled_fraction) labeled_fraction = *c.protocol.labeled_fraction;
  return {
      {"dataset",
       {{"path", c.dataset.path},
        {"format", c.dataset.format},
        {"labels", c.dataset.labels},
        {"idx_labels", c.dataset.idx_labels},
        {"synthetic",
         {{"classes", c.dataset.synthetic.classes},
          {"per_class", c.dataset.synthetic.per_class},
          {"dim", c.dataset.synthetic.dim},
          {"spread", c.dataset.synthetic.spread}}}}},
      {"method", c.method},
      {"methods", c.methods},
      {"graph",
       {{"kind", to_string(c.graph.kind)},
        {"k", c.graph.k},
        {"epsilon", c.graph.epsilon},
        {"lambda1", c.graph.lambda1},
        {"l1_tol", c.graph.l1_tol},
        {"l1_max_iter", c.graph.l1_max_iter}}},
      {"dims", c.dims},
      {"lambda", c.lambda},
      {"eta", c.eta},
      {"rho", c.rho},
      {"optimizer",
       {{"max_iter", c.optimizer.max_iter},
        {"grad_tol", c.optimizer.grad_tol},
        {"history_size", c.optimizer.history_size}}},
      {"finetune", {{"mode", c.finetune.mode}, {"lambda", c.finetune.lambda}, {"max_iter", c.finetune.max_iter}}},
      {"protocol",
       {{"subset_sizes", c.protocol.subset_sizes},
        {"repeats", c.protocol.repeats},
        {"labeled_fraction", labeled_fraction},
        {"kmeans_restarts", c.protocol.kmeans_restarts},
        {"hidden_dims", c.protocol.hidden_dims}}},
      {"grid", {{"lambda", c.grid.lambda}, {"k", c.grid.k}, {"eta", c.grid.eta}, {"rho", c.grid.rho}}},
      {"model", c.model},
      {"predicted", c.predicted},
      {"truth", c.truth},
      {"seed", c.seed},
      {"jobs", c.jobs},
  };
}

inline json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot read '" + path.string() + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw InvalidInput(path.string() + ": " + e.what());
  }
}

/// A config file is either a RunConfig object or a manifest written by a
/// previous run, in which case its recorded config is used.
inline RunConfig load_config(const fs::path& path) {
  const json j = read_json_file(path);
  if (j.is_object() && j.contains("tool") && j.contains("config")) return config_from_json(j.at("config"));
  return config_from_json(j);
}

// ---- validation and resolution ---------------------------------------------

inline std::string absolute_path(const std::string& p) {
  if (p.empty()) return p;
  return fs::weakly_canonical(fs::absolute(p)).string();
}

inline void require_file(const std::string& p, const std::string& what) {
  require(!p.empty(), what + " path is not set");
  require(fs::exists(p), what + " '" + p + "' does not exist");
}

/// Resolve relative paths and check fields shared by all commands.
inline RunConfig resolve(RunConfig c) {
  c.dataset.path = absolute_path(c.dataset.path);
  c.dataset.idx_labels = absolute_path(c.dataset.idx_labels);
  c.model = absolute_path(c.model);
  c.predicted = absolute_path(c.predicted);
  c.truth = absolute_path(c.truth);
  parse_data_format(c.dataset.format);
  require(c.jobs >= 1, "jobs must be at least 1");
  const auto& s = c.dataset.synthetic;
  require(s.classes > 0 && s.per_class > 0 && s.dim > 0 && s.spread >= 0.0, "synthetic dataset fields must be positive");
  require(c.optimizer.max_iter > 0 && c.optimizer.grad_tol > 0.0 && c.optimizer.history_size > 0,
          "optimizer settings must be positive");
  for (Index d : c.dims) require(d > 0, "dims must be positive");
  for (double l : c.lambda) require(l >= 0.0, "lambda must be nonnegative");
  require(!c.lambda.empty(), "lambda list is empty");
  require(c.finetune.mode == "none" || c.finetune.mode == "graph_only" || c.finetune.mode == "full",
          "finetune.mode must be none, graph_only or full");
  require(c.finetune.lambda >= 0.0 && c.finetune.max_iter > 0, "finetune settings out of range");
  return c;
}

inline DataSet load_data(const RunConfig& c) {
  if (c.dataset.path.empty()) {
    const auto& s = c.dataset.synthetic;
    DataSet ds = make_blobs(s.classes, s.per_class, s.dim, s.spread, substream(c.seed, "dataset"));
    ds.name = "blobs";
    return ds;
  }
  require_file(c.dataset.path, "dataset");
  LoadOptions opt;
  opt.csv_labels = c.dataset.labels;
  if (!c.dataset.idx_labels.empty()) {
    require_file(c.dataset.idx_labels, "idx label file");
    opt.idx_labels = c.dataset.idx_labels;
  }
  return load_dataset(c.dataset.path, parse_data_format(c.dataset.format), opt);
}

// ---- outputs -----------------------------------------------------------------

inline void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidInput("cannot write '" + path.string() + "'");
  out << text;
}

inline json manifest(const std::string& command, const RunConfig& c) {
  return {{"tool", kToolName},
          {"version", kToolVersion},
          {"command", command},
          {"seed", c.seed},
          {"config", config_to_json(c)}};
}

inline void prepare_out(const fs::path& out) {
  require(!out.empty(), "output directory is not set");
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec || !fs::is_directory(out)) throw InvalidInput("cannot create output directory '" + out.string() + "'");
}

inline void write_manifest(const fs::path& out, const std::string& command, const RunConfig& c) {
  write_text(out / "manifest.json", manifest(command, c).dump(2) + "\n");
}

inline std::string format_g(double v, int digits) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

/// Samples as rows, `%.12g`.
inline std::string matrix_csv(const Matrix& H) {
  std::string s;
  for (Index j = 0; j < H.cols(); ++j) {
    for (Index i = 0; i < H.rows(); ++i) {
      if (i) s += ',';
      s += format_g(H(i, j), 12);
    }
    s += '\n';
  }
  return s;
}

/// One integer label per row, first column; a non-numeric first row is a header.
inline std::vector<int> read_label_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot read '" + path.string() + "'");
  std::vector<int> out;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    const std::string cell = gae::detail::trim(std::string_view(line).substr(0, line.find(',')));
    if (cell.empty()) continue;
    const auto v = gae::detail::parse_number(cell);
    if (!v) {
      if (first) {
        first = false;
        continue;
      }
      throw InvalidInput(path.string() + ": non-numeric label '" + cell + "'");
    }
    first = false;
    if (*v != std::floor(*v)) throw InvalidInput(path.string() + ": non-integer label '" + cell + "'");
    out.push_back(static_cast<int>(*v));
  }
  require(!out.empty(), "'" + path.string() + "' holds no labels");
  return out;
}

// ---- commands ------------------------------------------------------------------

struct Outcome {
  std::string summary;  // printed to stdout
};

inline ObjectiveKind train_objective(const std::string& method) {
  if (method == "gae" || method == "sgae") return ObjectiveKind::gae;
  if (method == "sae") return ObjectiveKind::sae;
  if (method == "plain_ae") return ObjectiveKind::plain;
  if (method == "graph_only") return ObjectiveKind::graph_only;
  throw InvalidInput("train: method must be gae, sgae, sae, plain_ae or graph_only, got '" + method + "'");
}

/// Labels used for graph construction: the dataset's own, masked for sgae.
inline std::optional<std::vector<int>> graph_labels(const RunConfig& c, const DataSet& ds, bool semi) {
  if (!ds.labels) return std::nullopt;
  if (!semi) return *ds.labels;
  require(c.protocol.labeled_fraction.has_value(), "semi-supervised runs need protocol.labeled_fraction");
  return *mask_labels(ds, *c.protocol.labeled_fraction, substream(c.seed, "mask")).labels;
}

inline Outcome cmd_train(const RunConfig& c, const fs::path& out) {
  const ObjectiveKind kind = train_objective(c.method);
  const DataSet ds = load_data(c);
  std::vector<Index> dims = c.dims;
  if (dims.empty()) {
    require(ds.has_labels(), "train: dims not set and the dataset has no labels to infer them from");
    dims = {static_cast<Index>(ds.class_count)};
  }
  require(c.lambda.size() == 1 || c.lambda.size() == dims.size(), "lambda needs one value or one per layer");

  GraphSpec spec = c.graph;
  const bool semi = c.method == "sgae";
  if (semi) spec.kind = GraphKind::semi;
  const auto labels = graph_labels(c, ds, semi || spec.kind == GraphKind::semi);

  const std::uint64_t init = substream(c.seed, "init");
  std::vector<TrainConfig> configs;
  for (std::size_t i = 0; i < dims.size(); ++i) {
    TrainConfig tc;
    tc.lambda = c.lambda.size() == 1 ? c.lambda.front() : c.lambda[i];
    tc.eta = kind == ObjectiveKind::sae ? c.eta : 0.0;
    tc.rho = c.rho;
    tc.max_iter = c.optimizer.max_iter;
    tc.grad_tol = c.optimizer.grad_tol;
    tc.history_size = c.optimizer.history_size;
    tc.seed = substream(init, "layer", i);
    validate(tc);
    configs.push_back(tc);
  }

  prepare_out(out);
  StackFit fit = train_stack(ds.X, labels ? &*labels : nullptr, spec, dims, configs, kind);
  std::string log = "stage,iter,objective,grad_norm\n";
  auto append = [&](const std::string& stage, const std::vector<TracePoint>& trace) {
    for (const auto& t : trace)
      log += stage + "," + std::to_string(t.iter) + "," + format_g(t.objective, 17) + "," +
             format_g(t.grad_norm, 17) + "\n";
  };
  for (std::size_t i = 0; i < fit.layer_fits.size(); ++i)
    append("layer" + std::to_string(i + 1), fit.layer_fits[i].trace);

  GaeModel model = fit.model;
  std::string ft_line;
  if (c.finetune.mode != "none") {
    const AffinityGraph g = build_graph(spec, ds.X, labels ? &*labels : nullptr);
    TrainConfig tc = configs.front();
    tc.lambda = c.finetune.lambda;
    tc.max_iter = c.finetune.max_iter;
    const FinetuneFit ft = finetune(model, ds.X, g, tc,
                                    c.finetune.mode == "full" ? FinetuneMode::full : FinetuneMode::graph_only);
    model = ft.model;
    append("finetune", ft.trace);
    ft_line = "\nfinetune (" + c.finetune.mode + "): objective " + format_g(ft.trace.back().objective, 8) + " (" +
              to_string(ft.status) + ")";
  }

  std::ostringstream bytes;
  write_model(bytes, model);
  write_text(out / "model.bin", bytes.str());
  write_text(out / "train_log.csv", log);
  write_manifest(out, "train", c);

  std::string summary = "trained " + std::to_string(model.layers.size()) + " layer(s) on " +
                        std::to_string(ds.samples()) + " samples";
  for (std::size_t i = 0; i < fit.layer_fits.size(); ++i)
    summary += "\nlayer" + std::to_string(i + 1) + ": objective " +
               format_g(fit.layer_fits[i].final_objective(), 8) + " (" + to_string(fit.layer_fits[i].status) + ")";
  return {summary + ft_line};
}

inline Outcome cmd_encode(const RunConfig& c, const fs::path& out) {
  require_file(c.model, "model");
  const GaeModel model = load_model(c.model);
  const DataSet ds = load_data(c);
  if (ds.features() != model.layers.front().input_dim())
    throw InvalidInput("encode: data has " + std::to_string(ds.features()) + " features, model expects " +
                       std::to_string(model.layers.front().input_dim()));
  const Matrix H = encode_stack(model, ds.X);
  prepare_out(out);
  write_text(out / "encoded.csv", matrix_csv(H));
  write_manifest(out, "encode", c);
  return {"encoded " + std::to_string(H.cols()) + " samples into " + std::to_string(H.rows()) + " dimensions"};
}

inline Outcome cmd_graph(const RunConfig& c, const fs::path& out) {
  const DataSet ds = load_data(c);
  const bool semi = c.graph.kind == GraphKind::semi;
  const auto labels = graph_labels(c, ds, semi && c.protocol.labeled_fraction.has_value());
  const AffinityGraph g = build_graph(c.graph, ds.X, labels ? &*labels : nullptr);
  prepare_out(out);
  std::ostringstream edges;
  write_edge_list(edges, g);
  write_text(out / "graph.edges", edges.str());
  json info = {{"nodes", g.nodes()}, {"edges", g.edge_count()}, {"kind", to_string(g.spec.kind)}};
  std::string summary =
      "graph " + std::string(to_string(g.spec.kind)) + ": " + std::to_string(g.edge_count()) + " edges";
  if (ds.fully_labeled() && g.edge_count() > 0) {
    const double err = graph_error_rate(g, *ds.labels);
    info["error_rate"] = err;
    summary += "\nerror_rate " + format_g(err, 6);
  }
  write_text(out / "graph.json", info.dump(2) + "\n");
  write_manifest(out, "graph", c);
  return {summary};
}

inline Outcome cmd_metrics(const RunConfig& c, const fs::path& out) {
  require_file(c.predicted, "predicted labels");
  require_file(c.truth, "true labels");
  const auto pred = read_label_csv(c.predicted);
  const auto truth = read_label_csv(c.truth);
  require(pred.size() == truth.size(), "label files differ in length");
  const double ac = accuracy(pred, truth);
  const double mi = normalized_mutual_information(pred, truth);
  prepare_out(out);
  write_text(out / "metrics.json", json{{"ac", ac}, {"nmi", mi}, {"samples", pred.size()}}.dump(2) + "\n");
  write_manifest(out, "metrics", c);
  return {"AC " + format_g(ac, 6) + "\nNMI " + format_g(mi, 6)};
}

inline Outcome cmd_benchmark(const RunConfig& c, const fs::path& out) {
  const DataSet ds = load_data(c);
  require(!c.methods.empty(), "benchmark: no methods given");
  std::vector<ExperimentReport> reports;
  json all = json::array();
  std::vector<ExperimentConfig> configs;
  for (const auto& name : c.methods) {
    ExperimentConfig ec;
    ec.method = parse_method(name);
    ec.protocol = c.protocol;
    ec.grid = c.grid;
    ec.optimizer = c.optimizer;
    ec.graph = c.graph;
    ec.seed = c.seed;
    ec.jobs = c.jobs;
    validate(ec, ds);
    configs.push_back(ec);
  }
  prepare_out(out);
  std::string summary;
  for (const auto& ec : configs) {
    reports.push_back(run_experiment(ds, ec));
    all.push_back(to_json(reports.back()));
    summary += std::string(display_name(ec.method)) + ": AC " + format_g(reports.back().average_ac, 4) + " MI " +
               format_g(reports.back().average_mi, 4) + "\n";
  }
  std::ostringstream csv;
  write_comparison_csv(csv, reports);
  write_text(out / "comparison.csv", csv.str());
  write_text(out / "report.json", all.dump(2) + "\n");
  write_manifest(out, "benchmark", c);
  if (!summary.empty()) summary.pop_back();
  return {summary};
}

inline const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names{"train", "encode", "benchmark", "graph", "metrics"};
  return names;
}

inline Outcome run_command(const std::string& command, const RunConfig& raw, const fs::path& out) {
  const RunConfig c = resolve(raw);
  if (command == "train") return cmd_train(c, out);
  if (command == "encode") return cmd_encode(c, out);
  if (command == "benchmark") return cmd_benchmark(c, out);
  if (command == "graph") return cmd_graph(c, out);
  if (command == "metrics") return cmd_metrics(c, out);
  throw InvalidInput("unknown command '" + command + "'");
}

/// Re-execute the command recorded in a manifest.
inline Outcome rerun(const fs::path& manifest_path, const fs::path& out) {
  const json m = read_json_file(manifest_path);
  require(m.is_object() && m.contains("command") && m.contains("config"), "not a manifest file");
  require(m.at("command").is_string(), "manifest command must be a string");
  return run_command(m.at("command").get<std::string>(), config_from_json(m.at("config")), out);
}

}  // namespace gae::cmd
