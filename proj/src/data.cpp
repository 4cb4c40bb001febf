#include "dsdh/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <string>

#include "dsdh/binary_io.hpp"
#include "dsdh/error.hpp"
#include "dsdh/rng.hpp"

namespace dsdh {

namespace {

constexpr std::string_view kDatasetMagic = "DSDD";
constexpr std::uint32_t kDatasetVersion = 1;

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

// Rows of comma-separated fields; blank lines and '#' comments skipped.
// Each row remembers its 1-based line number for error messages.
struct CsvRow {
  std::size_t line;
  std::vector<std::string> fields;
};

std::vector<CsvRow> read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<CsvRow> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    CsvRow row{line_no, {}};
    std::size_t start = 0;
    for (;;) {
      const auto comma = t.find(',', start);
      row.fields.push_back(trim(std::string_view(t).substr(
          start, comma == std::string::npos ? std::string::npos : comma - start)));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

[[noreturn]] void csv_fail(const std::filesystem::path& path, const CsvRow& row,
                           std::size_t col, const std::string& what) {
  throw DataError(path.string() + ":" + std::to_string(row.line) + ": field " +
                  std::to_string(col + 1) + ": " + what);
}

double parse_double(const std::filesystem::path& path, const CsvRow& row, std::size_t col) {
  const std::string& f = row.fields[col];
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
  if (ec != std::errc() || ptr != f.data() + f.size() || f.empty()) {
    csv_fail(path, row, col, "cannot parse \"" + f + "\" as a number");
  }
  if (!std::isfinite(v)) csv_fail(path, row, col, "non-finite value");
  return v;
}

// CSV rows -> d x N matrix (one item per row in the file).
Matrix csv_to_features(const std::filesystem::path& path, const std::vector<CsvRow>& rows) {
  if (rows.empty()) throw DataError(path.string() + ": no data rows");
  const std::size_t d = rows.front().fields.size();
  Matrix features(d, rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].fields.size() != d) {
      throw DataError(path.string() + ":" + std::to_string(rows[i].line) + ": expected " +
                      std::to_string(d) + " fields, found " +
                      std::to_string(rows[i].fields.size()));
    }
    for (std::size_t k = 0; k < d; ++k) features(k, i) = parse_double(path, rows[i], k);
  }
  return features;
}

void check_counts(std::size_t features, std::size_t labels) {
  if (features != labels) {
    throw DataError("item count mismatch: " + std::to_string(features) + " feature rows vs " +
                    std::to_string(labels) + " label rows");
  }
}

std::vector<std::uint64_t> iota_ids(std::size_t n) {
  std::vector<std::uint64_t> ids(n);
  for (std::size_t i = 0; i < n; ++i) ids[i] = i;
  return ids;
}

// Header + features of a "DSDD" file; labels left in the reader.
struct BinaryHeader {
  std::uint32_t dim, items, classes;
};

BinaryHeader read_binary_header(io::Reader& r) {
  r.expect_magic(kDatasetMagic);
  const std::uint32_t version = r.u32("version");
  if (version != kDatasetVersion) r.fail("unsupported version " + std::to_string(version));
  BinaryHeader h{};
  h.dim = r.u32("d");
  h.items = r.u32("N");
  h.classes = r.u32("c");
  return h;
}

Matrix read_binary_features(io::Reader& r, const BinaryHeader& h) {
  Matrix features(h.dim, h.items);
  for (std::uint32_t i = 0; i < h.items; ++i) {
    try {
      for (std::uint32_t k = 0; k < h.dim; ++k) features(k, i) = r.f64("feature");
    } catch (const DataError& e) {
      throw DataError(std::string(e.what()) + " (feature record " + std::to_string(i + 1) +
                      " of " + std::to_string(h.items) + ")");
    }
  }
  return features;
}

}  // namespace

// ---------------------------------------------------------------------------
// LabelMatrix

LabelMatrix::LabelMatrix(std::size_t classes, std::size_t items, std::vector<std::uint8_t> data)
    : classes_(classes), items_(items), data_(std::move(data)) {
  if (data_.size() != classes_ * items_) {
    throw DimensionError("LabelMatrix: " + std::to_string(data_.size()) + " entries for " +
                         std::to_string(classes_) + "x" + std::to_string(items_));
  }
  for (std::size_t k = 0; k < classes_; ++k) {
    for (std::size_t i = 0; i < items_; ++i) {
      const auto v = data_[k * items_ + i];
      if (v > 1) {
        throw DataError("label entry (class " + std::to_string(k) + ", item " +
                        std::to_string(i) + ") is " + std::to_string(v) + ", not 0 or 1");
      }
    }
  }
  for (std::size_t i = 0; i < items_; ++i) {
    bool any = false;
    for (std::size_t k = 0; k < classes_ && !any; ++k) any = data_[k * items_ + i] != 0;
    if (!any) throw DataError("item " + std::to_string(i) + " has no label set");
  }
}

LabelMatrix LabelMatrix::from_class_indices(std::size_t classes,
                                            std::span<const std::size_t> cls) {
  std::vector<std::uint8_t> data(classes * cls.size(), 0);
  for (std::size_t i = 0; i < cls.size(); ++i) {
    if (cls[i] >= classes) {
      throw DataError("class index " + std::to_string(cls[i]) + " >= " +
                      std::to_string(classes));
    }
    data[cls[i] * cls.size() + i] = 1;
  }
  return LabelMatrix(classes, cls.size(), std::move(data));
}

std::size_t LabelMatrix::first_class(std::size_t i) const {
  for (std::size_t k = 0; k < classes_; ++k)
    if ((*this)(k, i)) return k;
  return classes_;  // unreachable for a valid matrix
}

std::size_t LabelMatrix::set_count() const {
  return static_cast<std::size_t>(std::count(data_.begin(), data_.end(), std::uint8_t{1}));
}

LabelMatrix LabelMatrix::gather(std::span<const std::size_t> indices) const {
  std::vector<std::uint8_t> data(classes_ * indices.size());
  for (std::size_t j = 0; j < indices.size(); ++j) {
    if (indices[j] >= items_) throw DimensionError("LabelMatrix::gather: index out of range");
    for (std::size_t k = 0; k < classes_; ++k)
      data[k * indices.size() + j] = (*this)(k, indices[j]);
  }
  return LabelMatrix(classes_, indices.size(), std::move(data));
}

Matrix LabelMatrix::to_matrix() const {
  Matrix m(classes_, items_);
  for (std::size_t k = 0; k < classes_; ++k)
    for (std::size_t i = 0; i < items_; ++i) m(k, i) = (*this)(k, i);
  return m;
}

bool share_label(const LabelMatrix& a, std::size_t i, const LabelMatrix& b, std::size_t j) {
  if (a.classes() != b.classes()) {
    throw DimensionError("share_label: " + std::to_string(a.classes()) + " vs " +
                         std::to_string(b.classes()) + " classes");
  }
  for (std::size_t k = 0; k < a.classes(); ++k)
    if (a(k, i) && b(k, j)) return true;
  return false;
}

// ---------------------------------------------------------------------------
// Dataset / oracle

void Dataset::validate() const {
  if (features.cols() != labels.items() || ids.size() != features.cols()) {
    throw DataError("dataset: " + std::to_string(features.cols()) + " feature columns, " +
                    std::to_string(labels.items()) + " label columns, " +
                    std::to_string(ids.size()) + " ids");
  }
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  Dataset out;
  out.features = features.gather_cols(indices);
  out.labels = labels.gather(indices);
  out.ids.reserve(indices.size());
  for (std::size_t i : indices) out.ids.push_back(ids[i]);
  return out;
}

int SimilarityOracle::similar(std::size_t i, std::size_t j) const {
  const std::size_t n = labels_->items();
  if (i >= n || j >= n) {
    throw DimensionError("similar: index (" + std::to_string(i) + ", " + std::to_string(j) +
                         ") out of range for " + std::to_string(n) + " items");
  }
  return share_label(*labels_, i, *labels_, j) ? 1 : 0;
}

// ---------------------------------------------------------------------------
// I/O

DataFormat parse_data_format(std::string_view name) {
  if (name == "csv") return DataFormat::kCsv;
  if (name == "binary") return DataFormat::kBinary;
  throw ConfigError("unknown data format \"" + std::string(name) + "\" (expected csv or binary)");
}

LabelMatrix load_labels_csv(const std::filesystem::path& path) {
  const auto rows = read_csv(path);
  if (rows.empty()) throw DataError(path.string() + ": no data rows");
  const std::size_t c = rows.front().fields.size();
  const std::size_t n = rows.size();
  std::vector<std::uint8_t> data(c * n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& row = rows[i];
    if (row.fields.size() != c) {
      throw DataError(path.string() + ":" + std::to_string(row.line) + ": expected " +
                      std::to_string(c) + " fields, found " + std::to_string(row.fields.size()));
    }
    bool any = false;
    for (std::size_t k = 0; k < c; ++k) {
      const std::string& f = row.fields[k];
      if (f != "0" && f != "1") csv_fail(path, row, k, "label \"" + f + "\" is not 0 or 1");
      data[k * n + i] = f == "1" ? 1 : 0;
      any = any || f == "1";
    }
    if (!any) csv_fail(path, row, 0, "item has no label set");
  }
  return LabelMatrix(c, n, std::move(data));
}

Dataset load_dataset_csv(const std::filesystem::path& features_path,
                         const std::filesystem::path& labels_path) {
  Dataset ds;
  ds.features = csv_to_features(features_path, read_csv(features_path));
  ds.labels = load_labels_csv(labels_path);
  check_counts(ds.features.cols(), ds.labels.items());
  ds.ids = iota_ids(ds.features.cols());
  return ds;
}

Dataset load_dataset_binary(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  io::Reader r(in, path.string());
  const BinaryHeader h = read_binary_header(r);
  Dataset ds;
  ds.features = read_binary_features(r, h);
  if (!all_finite(ds.features)) r.fail("non-finite feature value");
  std::vector<std::uint8_t> labels(static_cast<std::size_t>(h.classes) * h.items);
  for (std::uint32_t i = 0; i < h.items; ++i) {
    try {
      for (std::uint32_t k = 0; k < h.classes; ++k) {
        const std::uint8_t v = r.u8("label");
        if (v > 1) r.fail("label value " + std::to_string(v) + " is not 0 or 1");
        labels[static_cast<std::size_t>(k) * h.items + i] = v;
      }
    } catch (const DataError& e) {
      throw DataError(std::string(e.what()) + " (label record " + std::to_string(i + 1) +
                      " of " + std::to_string(h.items) + ")");
    }
  }
  r.expect_end();
  ds.labels = LabelMatrix(h.classes, h.items, std::move(labels));
  ds.ids = iota_ids(h.items);
  return ds;
}

Dataset load_dataset(const std::filesystem::path& features_path,
                     const std::filesystem::path& labels_path, DataFormat format) {
  if (format == DataFormat::kCsv) return load_dataset_csv(features_path, labels_path);
  if (!labels_path.empty() && labels_path != features_path) {
    throw ConfigError("binary datasets carry their labels; no separate labels file expected");
  }
  return load_dataset_binary(features_path);
}

Matrix load_features(const std::filesystem::path& path, DataFormat format) {
  if (format == DataFormat::kCsv) return csv_to_features(path, read_csv(path));
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  io::Reader r(in, path.string());
  const BinaryHeader h = read_binary_header(r);
  return read_binary_features(r, h);
}

void save_dataset_binary(const Dataset& dataset, const std::filesystem::path& path) {
  dataset.validate();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  io::Writer w(out);
  w.magic(kDatasetMagic);
  w.u32(kDatasetVersion);
  w.u32(static_cast<std::uint32_t>(dataset.dim()));
  w.u32(static_cast<std::uint32_t>(dataset.size()));
  w.u32(static_cast<std::uint32_t>(dataset.classes()));
  for (std::size_t i = 0; i < dataset.size(); ++i)
    for (std::size_t k = 0; k < dataset.dim(); ++k) w.f64(dataset.features(k, i));
  for (std::size_t i = 0; i < dataset.size(); ++i)
    for (std::size_t k = 0; k < dataset.classes(); ++k) w.u8(dataset.labels(k, i));
  if (!w.ok()) throw DataError("write failed: " + path.string());
}

void save_dataset_csv(const Dataset& dataset, const std::filesystem::path& features_path,
                      const std::filesystem::path& labels_path) {
  dataset.validate();
  std::ofstream f(features_path, std::ios::trunc);
  std::ofstream l(labels_path, std::ios::trunc);
  if (!f || !l) throw DataError("cannot write dataset CSV files");
  f << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    for (std::size_t k = 0; k < dataset.dim(); ++k) f << (k ? "," : "") << dataset.features(k, i);
    f << '\n';
    for (std::size_t k = 0; k < dataset.classes(); ++k)
      l << (k ? "," : "") << static_cast<int>(dataset.labels(k, i));
    l << '\n';
  }
}

// ---------------------------------------------------------------------------
// Split

SplitResult split(const Dataset& dataset, std::size_t queries_per_class,
                  std::size_t train_per_class, std::uint64_t seed) {
  dataset.validate();
  const std::size_t c = dataset.classes();
  std::vector<std::vector<std::size_t>> members(c);
  for (std::size_t i = 0; i < dataset.size(); ++i)
    members[dataset.labels.first_class(i)].push_back(i);

  const std::size_t need = queries_per_class + train_per_class;
  for (std::size_t k = 0; k < c; ++k) {
    if (members[k].size() < need) {
      throw DataError("class " + std::to_string(k) + " has " +
                      std::to_string(members[k].size()) + " items; split needs " +
                      std::to_string(need));
    }
  }

  SplitMix64 rng(seed);
  std::vector<std::size_t> query_idx, train_idx;
  for (auto& m : members) {
    shuffle(std::span<std::size_t>(m), rng);
    query_idx.insert(query_idx.end(), m.begin(), m.begin() + queries_per_class);
    train_idx.insert(train_idx.end(), m.begin() + queries_per_class, m.begin() + need);
  }
  std::sort(query_idx.begin(), query_idx.end());
  std::sort(train_idx.begin(), train_idx.end());
  return {dataset.subset(train_idx), dataset.subset(query_idx)};
}

// ---------------------------------------------------------------------------
// Standardizer

Standardizer Standardizer::identity(std::size_t dim) {
  return {std::vector<double>(dim, 0.0), std::vector<double>(dim, 1.0)};
}

Standardizer Standardizer::fit(const Matrix& features) {
  const std::size_t d = features.rows();
  const std::size_t n = features.cols();
  Standardizer s = identity(d);
  if (n == 0) return s;
  for (std::size_t k = 0; k < d; ++k) {
    const auto row = features.row(k);
    double mean = 0.0;
    for (double v : row) mean += v;
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (double v : row) var += (v - mean) * (v - mean);
    var /= static_cast<double>(n);
    s.mean[k] = mean;
    s.scale[k] = var > 0.0 ? std::sqrt(var) : 1.0;
  }
  return s;
}

Matrix Standardizer::apply(const Matrix& features) const {
  if (features.rows() != dim()) {
    throw DimensionError("Standardizer::apply: expected " + std::to_string(dim()) +
                         " rows, got " + features.shape_string());
  }
  Matrix out = features;
  for (std::size_t k = 0; k < out.rows(); ++k)
    for (double& v : out.row(k)) v = (v - mean[k]) / scale[k];
  return out;
}

}  // namespace dsdh
