#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <unordered_set>
#include <vector>

#include "dsdh/matrix.hpp"

namespace dsdh {

inline std::size_t words_for_bits(std::size_t bits) { return (bits + 63) / 64; }

// K-bit code packed into 64-bit words. Bit k is set iff entry k is +1; bits
// at positions >= K are zero.
struct PackedCode {
  std::size_t bits = 0;
  std::vector<std::uint64_t> words;

  bool operator==(const PackedCode&) const = default;
};

// Throws DataError naming the first entry that is not +-1.
PackedCode pack(std::span<const double> code);
std::vector<double> unpack(const PackedCode& code);

std::size_t hamming(std::span<const std::uint64_t> a, std::span<const std::uint64_t> b);
// Throws DimensionError if the code lengths differ.
std::size_t hamming(const PackedCode& a, const PackedCode& b);

struct Neighbor {
  std::uint64_t id;
  std::size_t index;  // insertion index in the database
  std::size_t distance;

  bool operator==(const Neighbor&) const = default;
};

// Item ids with packed codes stored contiguously.
class CodeDatabase {
 public:
  CodeDatabase() = default;
  explicit CodeDatabase(std::size_t bits) : bits_(bits), stride_(words_for_bits(bits)) {}

  // Columns of a +-1 matrix (K x N) with matching ids.
  static CodeDatabase from_codes(const Matrix& codes, std::span<const std::uint64_t> ids);

  // Throws DimensionError on a length mismatch, DataError on a duplicate id.
  void add(std::uint64_t id, const PackedCode& code);

  std::size_t bits() const { return bits_; }
  std::size_t size() const { return ids_.size(); }
  std::size_t words_per_code() const { return stride_; }
  std::uint64_t id(std::size_t index) const { return ids_[index]; }
  const std::vector<std::uint64_t>& ids() const { return ids_; }
  std::span<const std::uint64_t> code_words(std::size_t index) const {
    return {words_.data() + index * stride_, stride_};
  }
  PackedCode code(std::size_t index) const;

  bool operator==(const CodeDatabase& o) const {
    return bits_ == o.bits_ && ids_ == o.ids_ && words_ == o.words_;
  }

 private:
  std::size_t bits_ = 0;
  std::size_t stride_ = 0;
  std::vector<std::uint64_t> ids_;
  std::vector<std::uint64_t> words_;
  std::unordered_set<std::uint64_t> id_set_;
};

// Every database item by ascending Hamming distance; ties keep insertion
// order.
std::vector<Neighbor> rank(const CodeDatabase& db, const PackedCode& query);

// Items with distance <= radius, in insertion order.
std::vector<Neighbor> within_radius(const CodeDatabase& db, const PackedCode& query,
                                    std::size_t radius);

// "DSDC" file: version, K, N, then N x (id, ceil(K/64) words), little-endian.
void save_database(const CodeDatabase& db, const std::filesystem::path& path);
CodeDatabase load_database(const std::filesystem::path& path);

}  // namespace dsdh
