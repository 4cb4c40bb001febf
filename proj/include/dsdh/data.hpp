#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

#include "dsdh/matrix.hpp"

namespace dsdh {

// c x N multi-hot label matrix. Every entry is 0 or 1 and every item (column)
// carries at least one label.
class LabelMatrix {
 public:
  LabelMatrix() = default;
  // `data` is class-major: data[k * items + i] is label k of item i.
  LabelMatrix(std::size_t classes, std::size_t items, std::vector<std::uint8_t> data);
  // Single-label convenience: one class index per item.
  static LabelMatrix from_class_indices(std::size_t classes, std::span<const std::size_t> cls);

  std::size_t classes() const { return classes_; }
  std::size_t items() const { return items_; }
  std::uint8_t operator()(std::size_t k, std::size_t i) const { return data_[k * items_ + i]; }

  // Lowest set class of item i.
  std::size_t first_class(std::size_t i) const;
  // Total number of set entries.
  std::size_t set_count() const;

  LabelMatrix gather(std::span<const std::size_t> indices) const;
  // Labels as a c x N matrix of 0.0 / 1.0.
  Matrix to_matrix() const;

  std::span<const std::uint8_t> raw() const { return data_; }

  bool operator==(const LabelMatrix&) const = default;

 private:
  std::size_t classes_ = 0;
  std::size_t items_ = 0;
  std::vector<std::uint8_t> data_;
};

// True iff item i of `a` and item j of `b` share at least one class.
bool share_label(const LabelMatrix& a, std::size_t i, const LabelMatrix& b, std::size_t j);

struct Dataset {
  Matrix features;  // d x N
  LabelMatrix labels;
  std::vector<std::uint64_t> ids;

  std::size_t dim() const { return features.rows(); }
  std::size_t size() const { return features.cols(); }
  std::size_t classes() const { return labels.classes(); }

  // Throws DataError if features, labels and ids disagree on N.
  void validate() const;
  Dataset subset(std::span<const std::size_t> indices) const;

  bool operator==(const Dataset&) const = default;
};

// Pairwise semantic similarity: s_ij = 1 iff items i and j share a label.
// Holds a reference to the labels; the LabelMatrix must outlive it.
class SimilarityOracle {
 public:
  explicit SimilarityOracle(const LabelMatrix& labels) : labels_(&labels) {}

  std::size_t size() const { return labels_->items(); }
  // Throws DimensionError for out-of-range indices.
  int similar(std::size_t i, std::size_t j) const;

 private:
  const LabelMatrix* labels_;
};

enum class DataFormat { kCsv, kBinary };

DataFormat parse_data_format(std::string_view name);

// CSV: `features_path` holds N rows of d floats, `labels_path` N rows of c
// 0/1 ints. Binary: a single "DSDD" file at `features_path`; `labels_path`
// must be empty. Item ids are the row indices 0..N-1.
Dataset load_dataset(const std::filesystem::path& features_path,
                     const std::filesystem::path& labels_path, DataFormat format);
Dataset load_dataset_csv(const std::filesystem::path& features_path,
                         const std::filesystem::path& labels_path);
Dataset load_dataset_binary(const std::filesystem::path& path);

// Features only, as d x N. Format as in load_dataset.
Matrix load_features(const std::filesystem::path& path, DataFormat format);
LabelMatrix load_labels_csv(const std::filesystem::path& path);

void save_dataset_binary(const Dataset& dataset, const std::filesystem::path& path);
void save_dataset_csv(const Dataset& dataset, const std::filesystem::path& features_path,
                      const std::filesystem::path& labels_path);

struct SplitResult {
  Dataset train;
  Dataset query;
};

// Per class (an item's class is its first set label), draws
// `queries_per_class` query items and `train_per_class` training items
// without replacement. Each output keeps ascending original order.
SplitResult split(const Dataset& dataset, std::size_t queries_per_class,
                  std::size_t train_per_class, std::uint64_t seed);

// Per-dimension affine map x -> (x - mean) / scale.
struct Standardizer {
  std::vector<double> mean;
  std::vector<double> scale;

  static Standardizer identity(std::size_t dim);
  // Zero mean, unit variance over the columns of `features`. Dimensions with
  // zero variance keep scale 1.
  static Standardizer fit(const Matrix& features);

  std::size_t dim() const { return mean.size(); }
  Matrix apply(const Matrix& features) const;

  bool operator==(const Standardizer&) const = default;
};

}  // namespace dsdh
