// gae: command-line front end for training, encoding, graph building,
// metrics and benchmark runs. Exit codes: 0 success, 2 invalid input or
// configuration, 3 numerical failure.

#include "gae/commands.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <optional>

namespace {

using gae::cmd::RunConfig;

struct Overrides {
  std::string config;
  std::string out = "gae_out";
  std::optional<std::uint64_t> seed;
  std::optional<int> jobs;
  std::optional<std::string> data, format, method, model, predicted, truth, kind;
  std::optional<bool> no_labels;
  std::optional<std::vector<gae::Index>> dims;
  std::optional<std::vector<double>> lambda;
  std::optional<std::vector<std::string>> methods;
  std::optional<std::vector<int>> subset_sizes;
  std::optional<int> repeats, max_iter, k;
  std::optional<double> epsilon, lambda1, labeled_fraction;
  std::optional<std::string> finetune;
};

void add_common(CLI::App* sub, Overrides& o) {
  sub->add_option("-c,--config", o.config, "RunConfig JSON file or a manifest.json from an earlier run");
  sub->add_option("-o,--out", o.out, "Output directory")->capture_default_str();
  sub->add_option("--seed", o.seed, "Master seed");
  sub->add_option("--jobs", o.jobs, "Worker threads for independent repeats and grid cells");
}

void add_data(CLI::App* sub, Overrides& o) {
  sub->add_option("--data", o.data, "Dataset path (omit for synthetic blobs)");
  sub->add_option("--format", o.format, "csv | image-folder | idx");
  sub->add_flag("--no-labels", o.no_labels, "CSV has no trailing label column");
}

void add_graph(CLI::App* sub, Overrides& o) {
  sub->add_option("--graph", o.kind, "knn | epsilon | l1 | semi");
  sub->add_option("-k", o.k, "Neighbors for knn/semi graphs");
  sub->add_option("--epsilon", o.epsilon, "Radius for epsilon graphs");
  sub->add_option("--lambda1", o.lambda1, "l1-graph penalty");
  sub->add_option("--labeled-fraction", o.labeled_fraction, "Fraction of labels kept for semi graphs");
}

RunConfig apply(const Overrides& o) {
  RunConfig c = o.config.empty() ? RunConfig{} : gae::cmd::load_config(o.config);
  if (o.seed) c.seed = *o.seed;
  if (o.jobs) c.jobs = *o.jobs;
  if (o.data) c.dataset.path = *o.data;
  if (o.format) c.dataset.format = *o.format;
  if (o.no_labels && *o.no_labels) c.dataset.labels = false;
  if (o.method) c.method = *o.method;
  if (o.model) c.model = *o.model;
  if (o.predicted) c.predicted = *o.predicted;
  if (o.truth) c.truth = *o.truth;
  if (o.kind) c.graph.kind = gae::parse_graph_kind(*o.kind);
  if (o.k) c.graph.k = *o.k;
  if (o.epsilon) c.graph.epsilon = *o.epsilon;
  if (o.lambda1) c.graph.lambda1 = *o.lambda1;
  if (o.labeled_fraction) c.protocol.labeled_fraction = *o.labeled_fraction;
  if (o.dims) c.dims = *o.dims;
  if (o.lambda) c.lambda = *o.lambda;
  if (o.methods) c.methods = *o.methods;
  if (o.subset_sizes) c.protocol.subset_sizes = *o.subset_sizes;
  if (o.repeats) c.protocol.repeats = *o.repeats;
  if (o.max_iter) c.optimizer.max_iter = *o.max_iter;
  if (o.finetune) c.finetune.mode = *o.finetune;
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Graph-regularized auto-encoders: training, encoding, graphs and clustering benchmarks"};
  app.require_subcommand(1);
  app.set_version_flag("--version", gae::cmd::kToolVersion);

  Overrides o;
  std::string manifest;

  auto* train = app.add_subcommand("train", "Train a (multi-layer) auto-encoder; writes model.bin and train_log.csv");
  add_common(train, o);
  add_data(train, o);
  add_graph(train, o);
  train->add_option("--method", o.method, "gae | sgae | sae | plain_ae | graph_only");
  train->add_option("--dims", o.dims, "Layer widths, e.g. --dims 8 3");
  train->add_option("--lambda", o.lambda, "Graph weight (one value or one per layer)");
  train->add_option("--max-iter", o.max_iter, "Optimizer iteration limit per layer");
  train->add_option("--finetune", o.finetune, "none | graph_only | full");

  auto* encode = app.add_subcommand("encode", "Encode a dataset with a trained model; writes encoded.csv");
  add_common(encode, o);
  add_data(encode, o);
  encode->add_option("--model", o.model, "Model file from `gae train`");

  auto* bench = app.add_subcommand("benchmark", "Run the clustering protocol; writes comparison.csv and report.json");
  add_common(bench, o);
  add_data(bench, o);
  add_graph(bench, o);
  bench->add_option("--methods", o.methods, "gae sgae sae plain_ae pca kmeans_raw");
  bench->add_option("--subset-sizes", o.subset_sizes, "Class subset sizes");
  bench->add_option("--repeats", o.repeats, "Random class subsets per size");
  bench->add_option("--max-iter", o.max_iter, "Optimizer iteration limit per layer");

  auto* graph = app.add_subcommand("graph", "Build an affinity graph; writes graph.edges and prints the error rate");
  add_common(graph, o);
  add_data(graph, o);
  add_graph(graph, o);

  auto* metrics = app.add_subcommand("metrics", "AC and NMI between two label CSV files");
  add_common(metrics, o);
  metrics->add_option("--predicted", o.predicted, "Cluster assignments, one per line");
  metrics->add_option("--truth", o.truth, "True labels, one per line");

  auto* rerun = app.add_subcommand("rerun", "Repeat the run recorded in a manifest.json");
  rerun->add_option("manifest", manifest, "manifest.json of an earlier run")->required();
  rerun->add_option("-o,--out", o.out, "Output directory")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    gae::cmd::Outcome result;
    if (rerun->parsed()) {
      result = gae::cmd::rerun(manifest, o.out);
    } else {
      const std::string name = app.get_subcommands().front()->get_name();
      result = gae::cmd::run_command(name, apply(o), o.out);
    }
    std::cout << result.summary << '\n';
    return 0;
  } catch (const gae::NumericalError& e) {
    std::cerr << "gae: numerical failure: " << e.what() << '\n';
    return 3;
  } catch (const gae::InvalidInput& e) {
    std::cerr << "gae: " << e.what() << '\n';
    return 2;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "gae: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "gae: internal error: " << e.what() << '\n';
    return 1;
  }
}
