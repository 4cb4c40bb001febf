#pragma once

// Little-endian readers/writers shared by the dataset, code database and
// model file formats.

#include <array>
#include <bit>
#include <cstdint>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>

#include "dsdh/error.hpp"

namespace dsdh::io {

class Writer {
 public:
  explicit Writer(std::ostream& os) : os_(os) {}

  void magic(std::string_view m) { os_.write(m.data(), static_cast<std::streamsize>(m.size())); }

  void u8(std::uint8_t v) { os_.put(static_cast<char>(v)); }

  void u32(std::uint32_t v) {
    std::array<char, 4> b;
    for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
    os_.write(b.data(), 4);
  }

  void u64(std::uint64_t v) {
    std::array<char, 8> b;
    for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
    os_.write(b.data(), 8);
  }

  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

  bool ok() const { return static_cast<bool>(os_); }

 private:
  std::ostream& os_;
};

// Reads with byte-offset tracking; every short read throws DataError naming
// the offset and what was being read.
class Reader {
 public:
  Reader(std::istream& is, std::string source) : is_(is), source_(std::move(source)) {}

  void expect_magic(std::string_view m) {
    std::string got(m.size(), '\0');
    read_raw(got.data(), m.size(), "magic");
    if (got != m) {
      throw DataError(source_ + ": bad magic (expected \"" + std::string(m) + "\")");
    }
  }

  std::uint8_t u8(const char* what) {
    char c;
    read_raw(&c, 1, what);
    return static_cast<std::uint8_t>(c);
  }

  std::uint32_t u32(const char* what) {
    std::array<unsigned char, 4> b;
    read_raw(reinterpret_cast<char*>(b.data()), 4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return v;
  }

  std::uint64_t u64(const char* what) {
    std::array<unsigned char, 8> b;
    read_raw(reinterpret_cast<char*>(b.data()), 8, what);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
  }

  double f64(const char* what) { return std::bit_cast<double>(u64(what)); }

  std::uint64_t offset() const { return offset_; }

  // Succeeds only if the stream has no bytes left.
  void expect_end() {
    if (is_.peek() != std::char_traits<char>::eof()) {
      throw DataError(source_ + ": trailing bytes at offset " + std::to_string(offset_));
    }
  }

  [[noreturn]] void fail(const std::string& message) const {
    throw DataError(source_ + ": " + message + " (byte offset " + std::to_string(offset_) +
                    ")");
  }

 private:
  void read_raw(char* dst, std::size_t n, const char* what) {
    is_.read(dst, static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(is_.gcount()) != n) {
      throw DataError(source_ + ": truncated while reading " + what + " at byte offset " +
                      std::to_string(offset_));
    }
    offset_ += n;
  }

  std::istream& is_;
  std::string source_;
  std::uint64_t offset_ = 0;
};

}  // namespace dsdh::io
