#pragma once

// Little-endian field packing shared by the sketch and matrix file formats.

#include <bit>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <vector>

#include "dpsk/errors.hpp"

namespace dpsk::detail {

class ByteWriter {
 public:
  void bytes(const char* text, std::size_t n) {
    out_.insert(out_.end(), text, text + n);
  }
  template <typename U>
  void uint(U value) {
    for (std::size_t b = 0; b < sizeof(U); ++b)
      out_.push_back(static_cast<std::uint8_t>(static_cast<std::uint64_t>(value) >> (8 * b)));
  }
  void f64(double value) { uint(std::bit_cast<std::uint64_t>(value)); }

  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  std::vector<std::uint8_t> out_;
};

class ByteReader {
 public:
  ByteReader(std::span<const std::uint8_t> in, const char* what) : in_(in), what_(what) {}

  void expect_magic(const char* magic, std::size_t n) {
    need(n);
    if (std::memcmp(in_.data() + pos_, magic, n) != 0) {
      throw FormatError(std::string(what_) + ": bad magic bytes at offset 0");
    }
    pos_ += n;
  }
  template <typename U>
  U uint() {
    need(sizeof(U));
    std::uint64_t v = 0;
    for (std::size_t b = 0; b < sizeof(U); ++b)
      v |= static_cast<std::uint64_t>(in_[pos_ + b]) << (8 * b);
    pos_ += sizeof(U);
    return static_cast<U>(v);
  }
  double f64() { return std::bit_cast<double>(uint<std::uint64_t>()); }

  std::size_t offset() const noexcept { return pos_; }
  std::size_t remaining() const noexcept { return in_.size() - pos_; }

  void expect_end() const {
    if (pos_ != in_.size()) {
      throw FormatError(std::string(what_) + ": " + std::to_string(in_.size() - pos_) +
                        " trailing bytes at offset " + std::to_string(pos_));
    }
  }

 private:
  void need(std::size_t n) const {
    if (in_.size() - pos_ < n) {
      throw FormatError(std::string(what_) + ": truncated at offset " + std::to_string(pos_) +
                        " (need " + std::to_string(n) + " bytes, have " +
                        std::to_string(in_.size() - pos_) + ")");
    }
  }

  std::span<const std::uint8_t> in_;
  const char* what_;
  std::size_t pos_ = 0;
};

}  // namespace dpsk::detail
