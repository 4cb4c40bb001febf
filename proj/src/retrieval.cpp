#include "dsdh/retrieval.hpp"

#include <bit>
#include <fstream>
#include <string>

#include "dsdh/binary_io.hpp"
#include "dsdh/error.hpp"

namespace dsdh {

namespace {

constexpr std::string_view kDatabaseMagic = "DSDC";
constexpr std::uint32_t kDatabaseVersion = 1;

void require_bits(const char* op, std::size_t a, std::size_t b) {
  if (a != b) {
    throw DimensionError(std::string(op) + ": code length " + std::to_string(a) + " vs " +
                         std::to_string(b));
  }
}

}  // namespace

PackedCode pack(std::span<const double> code) {
  PackedCode out{code.size(), std::vector<std::uint64_t>(words_for_bits(code.size()), 0)};
  for (std::size_t k = 0; k < code.size(); ++k) {
    if (code[k] == 1.0) {
      out.words[k / 64] |= std::uint64_t{1} << (k % 64);
    } else if (code[k] != -1.0) {
      throw DataError("pack: entry " + std::to_string(k) + " is " + std::to_string(code[k]) +
                      ", not +-1");
    }
  }
  return out;
}

std::vector<double> unpack(const PackedCode& code) {
  std::vector<double> out(code.bits);
  for (std::size_t k = 0; k < code.bits; ++k)
    out[k] = (code.words[k / 64] >> (k % 64)) & 1 ? 1.0 : -1.0;
  return out;
}

std::size_t hamming(std::span<const std::uint64_t> a, std::span<const std::uint64_t> b) {
  std::size_t d = 0;
  for (std::size_t w = 0; w < a.size(); ++w) d += std::popcount(a[w] ^ b[w]);
  return d;
}

std::size_t hamming(const PackedCode& a, const PackedCode& b) {
  require_bits("hamming", a.bits, b.bits);
  return hamming(std::span<const std::uint64_t>(a.words), std::span<const std::uint64_t>(b.words));
}

CodeDatabase CodeDatabase::from_codes(const Matrix& codes, std::span<const std::uint64_t> ids) {
  if (ids.size() != codes.cols()) {
    throw DimensionError("from_codes: " + std::to_string(ids.size()) + " ids for " +
                         std::to_string(codes.cols()) + " codes");
  }
  CodeDatabase db(codes.rows());
  for (std::size_t i = 0; i < codes.cols(); ++i) db.add(ids[i], pack(codes.col(i)));
  return db;
}

void CodeDatabase::add(std::uint64_t id, const PackedCode& code) {
  require_bits("CodeDatabase::add", bits_, code.bits);
  if (!id_set_.insert(id).second) throw DataError("duplicate id " + std::to_string(id));
  ids_.push_back(id);
  words_.insert(words_.end(), code.words.begin(), code.words.end());
}

PackedCode CodeDatabase::code(std::size_t index) const {
  const auto w = code_words(index);
  return {bits_, std::vector<std::uint64_t>(w.begin(), w.end())};
}

std::vector<Neighbor> rank(const CodeDatabase& db, const PackedCode& query) {
  require_bits("rank", db.bits(), query.bits);
  const std::size_t n = db.size();
  std::vector<std::size_t> dist(n);
  // Counting sort over distances 0..K is stable in insertion order.
  std::vector<std::size_t> bucket(db.bits() + 2, 0);
  for (std::size_t i = 0; i < n; ++i) {
    dist[i] = hamming(db.code_words(i), query.words);
    ++bucket[dist[i] + 1];
  }
  for (std::size_t d = 1; d < bucket.size(); ++d) bucket[d] += bucket[d - 1];
  std::vector<Neighbor> out(n);
  for (std::size_t i = 0; i < n; ++i) out[bucket[dist[i]]++] = {db.id(i), i, dist[i]};
  return out;
}

std::vector<Neighbor> within_radius(const CodeDatabase& db, const PackedCode& query,
                                    std::size_t radius) {
  require_bits("within_radius", db.bits(), query.bits);
  std::vector<Neighbor> out;
  for (std::size_t i = 0; i < db.size(); ++i) {
    const std::size_t d = hamming(db.code_words(i), query.words);
    if (d <= radius) out.push_back({db.id(i), i, d});
  }
  return out;
}

void save_database(const CodeDatabase& db, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  io::Writer w(out);
  w.magic(kDatabaseMagic);
  w.u32(kDatabaseVersion);
  w.u32(static_cast<std::uint32_t>(db.bits()));
  w.u32(static_cast<std::uint32_t>(db.size()));
  for (std::size_t i = 0; i < db.size(); ++i) {
    w.u64(db.id(i));
    for (std::uint64_t word : db.code_words(i)) w.u64(word);
  }
  if (!w.ok()) throw DataError("write failed: " + path.string());
}

CodeDatabase load_database(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  io::Reader r(in, path.string());
  r.expect_magic(kDatabaseMagic);
  const std::uint32_t version = r.u32("version");
  if (version != kDatabaseVersion) r.fail("unsupported version " + std::to_string(version));
  const std::uint32_t bits = r.u32("K");
  const std::uint32_t n = r.u32("N");
  if (bits == 0) r.fail("code length K is zero");
  CodeDatabase db(bits);
  const std::size_t stride = words_for_bits(bits);
  const std::uint64_t pad_mask =
      bits % 64 == 0 ? 0 : ~std::uint64_t{0} << (bits % 64);
  for (std::uint32_t i = 0; i < n; ++i) {
    PackedCode code{bits, std::vector<std::uint64_t>(stride)};
    const std::uint64_t id = r.u64("id");
    for (std::size_t k = 0; k < stride; ++k) code.words[k] = r.u64("code word");
    if (code.words.back() & pad_mask) r.fail("record " + std::to_string(i + 1) + " has padding bits set");
    db.add(id, code);
  }
  r.expect_end();
  return db;
}

}  // namespace dsdh
