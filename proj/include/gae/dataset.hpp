#pragma once

// Data ingestion, [0,1] scaling, synthetic blobs and the class-subset /
// label-masking protocol used by the experiments.
//
// Samples are columns: X is m features x n samples.

#include "gae/core.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace gae {

inline constexpr int kUnlabeled = -1;

struct DataSet {
  Matrix X;                                 // m x n, entries in [0,1]
  std::optional<std::vector<int>> labels;   // length n; kUnlabeled marks a hidden label
  int class_count = 0;
  std::string name;

  Index features() const { return X.rows(); }
  Index samples() const { return X.cols(); }
  bool has_labels() const { return labels.has_value(); }

  bool fully_labeled() const {
    return labels && std::none_of(labels->begin(), labels->end(),
                                  [](int c) { return c == kUnlabeled; });
  }

  Index labeled_count() const {
    if (!labels) return 0;
    return std::count_if(labels->begin(), labels->end(), [](int c) { return c != kUnlabeled; });
  }
};

enum class DataFormat { csv, image_folder, idx };

inline DataFormat parse_data_format(std::string_view s) {
  if (s == "csv") return DataFormat::csv;
  if (s == "image-folder" || s == "image_folder") return DataFormat::image_folder;
  if (s == "idx") return DataFormat::idx;
  throw InvalidInput("unknown data format '" + std::string(s) + "'");
}

struct LoadOptions {
  // CSV: treat the final column as an integer class label.
  bool csv_labels = false;
  // IDX: optional companion label file (1-D IDX).
  std::optional<std::filesystem::path> idx_labels;
};

inline void validate(const DataSet& ds) {
  require(ds.X.cols() >= 2, "dataset needs at least 2 samples");
  require(ds.X.rows() >= 1, "dataset needs at least 1 feature");
  require(ds.X.allFinite(), "dataset contains non-finite values");
  if (ds.labels) {
    require(static_cast<Index>(ds.labels->size()) == ds.X.cols(), "label count does not match sample count");
    for (int c : *ds.labels)
      require(c == kUnlabeled || (c >= 0 && c < ds.class_count), "label outside 0..class_count-1");
  }
}

/// Per-feature min-max scaling to [0,1]; constant features become 0.
inline void scale_min_max(Matrix& X) {
  for (Index r = 0; r < X.rows(); ++r) {
    const double lo = X.row(r).minCoeff();
    const double hi = X.row(r).maxCoeff();
    const double range = hi - lo;
    if (range > 0.0)
      X.row(r) = (X.row(r).array() - lo) / range;
    else
      X.row(r).setZero();
  }
}

/// Map arbitrary integer class ids to 0..c-1 in ascending order of the raw id.
inline std::vector<int> remap_contiguous(const std::vector<long long>& raw, int& class_count) {
  std::map<long long, int> ids;
  for (long long v : raw) ids.emplace(v, 0);
  int next = 0;
  for (auto& [_, id] : ids) id = next++;
  class_count = next;
  std::vector<int> out;
  out.reserve(raw.size());
  for (long long v : raw) out.push_back(ids.at(v));
  return out;
}

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

inline std::optional<double> parse_number(std::string_view cell) {
  const std::string t = trim(cell);
  if (t.empty()) return std::nullopt;
  double v = 0.0;
  const char* first = t.data();
  if (*first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size()) return std::nullopt;
  return v;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

}  // namespace detail

/// Numeric CSV table, one row per line. A first row containing any
/// non-numeric cell is treated as a header and skipped.
inline std::vector<std::vector<double>> read_csv_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot read '" + path.string() + "'");
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t line_no = 0;
  std::size_t width = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    const auto cells = detail::split_csv_line(line);
    std::vector<double> row;
    row.reserve(cells.size());
    bool numeric = true;
    for (const auto& c : cells) {
      auto v = detail::parse_number(c);
      if (!v) {
        numeric = false;
        break;
      }
      row.push_back(*v);
    }
    if (!numeric) {
      if (rows.empty() && line_no == 1) continue;  // header
      throw InvalidInput(path.string() + ":" + std::to_string(line_no) + ": non-numeric cell");
    }
    if (rows.empty())
      width = row.size();
    else if (row.size() != width)
      throw InvalidInput(path.string() + ":" + std::to_string(line_no) + ": ragged row (expected " +
                         std::to_string(width) + " cells, got " + std::to_string(row.size()) + ")");
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw InvalidInput("'" + path.string() + "' contains no data rows");
  return rows;
}

inline DataSet load_csv(const std::filesystem::path& path, bool labeled) {
  const auto rows = read_csv_table(path);
  const std::size_t width = rows.front().size();
  const std::size_t m = labeled ? width - 1 : width;
  require(m >= 1, "'" + path.string() + "' has no feature columns");

  DataSet ds;
  ds.name = path.stem().string();
  ds.X.resize(static_cast<Index>(m), static_cast<Index>(rows.size()));
  std::vector<long long> raw;
  for (std::size_t j = 0; j < rows.size(); ++j) {
    for (std::size_t i = 0; i < m; ++i) ds.X(static_cast<Index>(i), static_cast<Index>(j)) = rows[j][i];
    if (labeled) {
      const double lab = rows[j][m];
      if (lab != std::floor(lab))
        throw InvalidInput(path.string() + ": label column holds non-integer value");
      raw.push_back(static_cast<long long>(lab));
    }
  }
  if (labeled) ds.labels = remap_contiguous(raw, ds.class_count);
  scale_min_max(ds.X);
  validate(ds);
  return ds;
}

namespace detail {

// Netpbm grayscale (P2 ascii / P5 binary, 8 or 16 bit).
inline std::vector<double> read_pgm(const std::filesystem::path& path, int& width, int& height) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInput("cannot read '" + path.string() + "'");
  auto next_token = [&]() {
    std::string tok;
    char c;
    while (in.get(c)) {
      if (c == '#') {
        std::string skip;
        std::getline(in, skip);
        continue;
      }
      if (std::isspace(static_cast<unsigned char>(c))) {
        if (!tok.empty()) break;
        continue;
      }
      tok.push_back(c);
    }
    return tok;
  };
  const std::string magic = next_token();
  if (magic != "P2" && magic != "P5")
    throw InvalidInput("'" + path.string() + "' is not a grayscale PGM image");
  try {
    width = std::stoi(next_token());
    height = std::stoi(next_token());
  } catch (const std::exception&) {
    throw InvalidInput("'" + path.string() + "': malformed PGM header");
  }
  const int maxval = std::stoi(next_token());
  require(width > 0 && height > 0 && maxval > 0 && maxval < 65536, "'" + path.string() + "': bad PGM header");
  const std::size_t count = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  std::vector<double> px(count);
  if (magic == "P2") {
    for (auto& p : px) {
      const std::string t = next_token();
      if (t.empty()) throw InvalidInput("'" + path.string() + "': truncated PGM data");
      p = std::stod(t);
    }
  } else {
    const int bytes = maxval < 256 ? 1 : 2;
    std::vector<unsigned char> buf(count * bytes);
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (in.gcount() != static_cast<std::streamsize>(buf.size()))
      throw InvalidInput("'" + path.string() + "': truncated PGM data");
    for (std::size_t i = 0; i < count; ++i)
      px[i] = bytes == 1 ? buf[i] : static_cast<double>((buf[2 * i] << 8) | buf[2 * i + 1]);
  }
  return px;
}

inline std::uint32_t read_be32(std::istream& in) {
  std::array<unsigned char, 4> b{};
  in.read(reinterpret_cast<char*>(b.data()), 4);
  if (!in) throw InvalidInput("truncated IDX header");
  return (std::uint32_t{b[0]} << 24) | (std::uint32_t{b[1]} << 16) | (std::uint32_t{b[2]} << 8) | b[3];
}

struct IdxArray {
  std::vector<std::uint32_t> dims;
  std::vector<double> values;
};

inline IdxArray read_idx(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInput("cannot read '" + path.string() + "'");
  std::array<unsigned char, 4> magic{};
  in.read(reinterpret_cast<char*>(magic.data()), 4);
  if (!in || magic[0] != 0 || magic[1] != 0 || magic[3] == 0)
    throw InvalidInput("'" + path.string() + "': bad IDX magic");
  const unsigned type = magic[2];
  IdxArray arr;
  std::size_t count = 1;
  for (unsigned d = 0; d < magic[3]; ++d) {
    arr.dims.push_back(read_be32(in));
    count *= arr.dims.back();
  }
  int width = 0;
  switch (type) {
    case 0x08: case 0x09: width = 1; break;
    case 0x0B: width = 2; break;
    case 0x0C: case 0x0D: width = 4; break;
    case 0x0E: width = 8; break;
    default: throw InvalidInput("'" + path.string() + "': unsupported IDX element type");
  }
  std::vector<unsigned char> buf(count * width);
  in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (in.gcount() != static_cast<std::streamsize>(buf.size()))
    throw InvalidInput("'" + path.string() + "': truncated IDX data");
  arr.values.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    std::uint64_t bits = 0;
    for (int b = 0; b < width; ++b) bits = (bits << 8) | buf[i * width + b];
    switch (type) {
      case 0x08: arr.values[i] = static_cast<double>(bits); break;
      case 0x09: arr.values[i] = static_cast<std::int8_t>(bits); break;
      case 0x0B: arr.values[i] = static_cast<std::int16_t>(bits); break;
      case 0x0C: arr.values[i] = static_cast<std::int32_t>(bits); break;
      case 0x0D: arr.values[i] = std::bit_cast<float>(static_cast<std::uint32_t>(bits)); break;
      case 0x0E: arr.values[i] = std::bit_cast<double>(bits); break;
    }
  }
  return arr;
}

}  // namespace detail

/// One subdirectory per class (sorted by name), each holding PGM images of
/// identical size. Pixels are flattened row-major into one column per image.
inline DataSet load_image_folder(const std::filesystem::path& root) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(root)) throw InvalidInput("'" + root.string() + "' is not a directory");
  std::vector<fs::path> classes;
  for (const auto& e : fs::directory_iterator(root))
    if (e.is_directory()) classes.push_back(e.path());
  std::sort(classes.begin(), classes.end());

  std::vector<std::vector<double>> columns;
  std::vector<int> labels;
  int w0 = -1, h0 = -1;
  for (std::size_t c = 0; c < classes.size(); ++c) {
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(classes[c]))
      if (e.is_regular_file()) files.push_back(e.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      int w = 0, h = 0;
      columns.push_back(detail::read_pgm(f, w, h));
      if (w0 < 0) {
        w0 = w;
        h0 = h;
      } else if (w != w0 || h != h0) {
        throw InvalidInput("'" + f.string() + "': image size differs from the rest of the folder");
      }
      labels.push_back(static_cast<int>(c));
    }
  }
  if (columns.empty()) throw InvalidInput("'" + root.string() + "' contains no images");

  DataSet ds;
  ds.name = root.filename().string();
  ds.X.resize(static_cast<Index>(columns.front().size()), static_cast<Index>(columns.size()));
  for (std::size_t j = 0; j < columns.size(); ++j)
    ds.X.col(static_cast<Index>(j)) = Eigen::Map<const Vector>(columns[j].data(), ds.X.rows());
  ds.labels = std::move(labels);
  ds.class_count = static_cast<int>(classes.size());
  scale_min_max(ds.X);
  validate(ds);
  return ds;
}

/// IDX container: first dimension is the sample count, the rest are flattened.
inline DataSet load_idx(const std::filesystem::path& path,
                        const std::optional<std::filesystem::path>& labels_path) {
  const auto arr = detail::read_idx(path);
  require(!arr.dims.empty() && arr.dims[0] > 0, "'" + path.string() + "': empty IDX array");
  const std::size_t n = arr.dims[0];
  const std::size_t m = arr.values.size() / n;
  require(m >= 1, "'" + path.string() + "': samples have no features");
  DataSet ds;
  ds.name = path.stem().string();
  // Row-major samples -> one column per sample.
  ds.X = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
             arr.values.data(), static_cast<Index>(n), static_cast<Index>(m))
             .transpose();
  if (labels_path) {
    const auto lab = detail::read_idx(*labels_path);
    require(lab.values.size() == n, "IDX label count does not match sample count");
    std::vector<long long> raw;
    for (double v : lab.values) raw.push_back(static_cast<long long>(v));
    ds.labels = remap_contiguous(raw, ds.class_count);
  }
  scale_min_max(ds.X);
  validate(ds);
  return ds;
}

inline DataSet load_dataset(const std::filesystem::path& path, DataFormat format,
                            const LoadOptions& opts = {}) {
  if (!std::filesystem::exists(path)) throw InvalidInput("'" + path.string() + "' does not exist");
  switch (format) {
    case DataFormat::csv: return load_csv(path, opts.csv_labels);
    case DataFormat::image_folder: return load_image_folder(path);
    case DataFormat::idx: return load_idx(path, opts.idx_labels);
  }
  throw InvalidInput("unknown data format");
}

/// Isotropic Gaussian clusters around centers drawn uniformly from [0,1]^dim,
/// generated class by class, then min-max scaled.
inline DataSet make_blobs(int class_count, int per_class, int dim, double spread, std::uint64_t seed) {
  require(class_count > 0 && per_class > 0 && dim > 0, "make_blobs: counts must be positive");
  require(spread >= 0.0, "make_blobs: spread must be nonnegative");
  require(class_count * per_class >= 2, "make_blobs: need at least 2 samples");
  Rng rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);

  Matrix centers(dim, class_count);
  for (Index c = 0; c < class_count; ++c)
    for (Index r = 0; r < dim; ++r) centers(r, c) = unit(rng);

  DataSet ds;
  ds.name = "blobs";
  ds.class_count = class_count;
  ds.X.resize(dim, static_cast<Index>(class_count) * per_class);
  std::vector<int> labels;
  labels.reserve(static_cast<std::size_t>(class_count * per_class));
  Index j = 0;
  for (int c = 0; c < class_count; ++c) {
    for (int s = 0; s < per_class; ++s, ++j) {
      for (Index r = 0; r < dim; ++r) ds.X(r, j) = centers(r, c) + spread * gauss(rng);
      labels.push_back(c);
    }
  }
  ds.labels = std::move(labels);
  scale_min_max(ds.X);
  return ds;
}

/// Uniformly random subset of `size` class ids out of 0..class_count-1, ascending.
inline std::vector<int> random_class_subset(int class_count, int size, std::uint64_t seed) {
  require(size > 0 && size <= class_count, "class subset size must be in 1..class_count");
  std::vector<int> ids(static_cast<std::size_t>(class_count));
  std::iota(ids.begin(), ids.end(), 0);
  Rng rng(seed);
  std::shuffle(ids.begin(), ids.end(), rng);
  ids.resize(static_cast<std::size_t>(size));
  std::sort(ids.begin(), ids.end());
  return ids;
}

/// Keep only samples of the listed classes (original order); labels become
/// positions within `classes`.
inline DataSet select_classes(const DataSet& ds, const std::vector<int>& classes) {
  require(ds.fully_labeled(), "class selection needs a fully labeled dataset");
  std::vector<int> remap(static_cast<std::size_t>(ds.class_count), -1);
  for (std::size_t i = 0; i < classes.size(); ++i) {
    require(classes[i] >= 0 && classes[i] < ds.class_count, "class id out of range");
    remap[static_cast<std::size_t>(classes[i])] = static_cast<int>(i);
  }
  std::vector<Index> keep;
  std::vector<int> labels;
  for (Index j = 0; j < ds.samples(); ++j) {
    const int mapped = remap[static_cast<std::size_t>((*ds.labels)[static_cast<std::size_t>(j)])];
    if (mapped >= 0) {
      keep.push_back(j);
      labels.push_back(mapped);
    }
  }
  DataSet out;
  out.name = ds.name;
  out.class_count = static_cast<int>(classes.size());
  out.X = ds.X(Eigen::all, keep);
  out.labels = std::move(labels);
  return out;
}

inline DataSet subsample_classes(const DataSet& ds, int class_subset_size, std::uint64_t seed) {
  require(ds.has_labels(), "subsample_classes needs a labeled dataset");
  require(class_subset_size > 0 && class_subset_size <= ds.class_count,
          "class subset size " + std::to_string(class_subset_size) + " exceeds class count " +
              std::to_string(ds.class_count));
  return select_classes(ds, random_class_subset(ds.class_count, class_subset_size, seed));
}

/// Hide labels so that round(fraction * class size) samples per class remain
/// labeled, with a floor of 2 per class.
inline DataSet mask_labels(const DataSet& ds, double labeled_fraction, std::uint64_t seed) {
  require(ds.fully_labeled(), "mask_labels needs a fully labeled dataset");
  require(labeled_fraction > 0.0 && labeled_fraction <= 1.0, "labeled fraction must lie in (0,1]");
  std::vector<std::vector<std::size_t>> members(static_cast<std::size_t>(ds.class_count));
  for (std::size_t j = 0; j < ds.labels->size(); ++j)
    members[static_cast<std::size_t>((*ds.labels)[j])].push_back(j);

  DataSet out = ds;
  std::vector<int>& labels = *out.labels;
  Rng rng(seed);
  for (std::size_t c = 0; c < members.size(); ++c) {
    auto& idx = members[c];
    if (idx.empty()) continue;
    if (idx.size() < 2)
      throw InvalidInput("class " + std::to_string(c) + " has fewer than 2 samples; cannot keep 2 labeled");
    const auto target = static_cast<std::size_t>(std::llround(labeled_fraction * static_cast<double>(idx.size())));
    const std::size_t keep = std::clamp<std::size_t>(target, 2, idx.size());
    std::shuffle(idx.begin(), idx.end(), rng);
    for (std::size_t t = keep; t < idx.size(); ++t) labels[idx[t]] = kUnlabeled;
  }
  return out;
}

}  // namespace gae
