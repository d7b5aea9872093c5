#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "pcz/error.hpp"

namespace pcz {

// Appends bit fields LSB-first into a byte vector.
class BitWriter {
 public:
  void put(std::uint64_t value, unsigned nbits) {
    for (unsigned i = 0; i < nbits; ++i) {
      if ((bits_ & 7) == 0) bytes_.push_back(0);
      if ((value >> i) & 1u) bytes_.back() |= static_cast<std::uint8_t>(1u << (bits_ & 7));
      ++bits_;
    }
  }
  std::uint64_t bit_count() const { return bits_; }
  const std::vector<std::uint8_t>& bytes() const { return bytes_; }
  std::vector<std::uint8_t> take() { return std::move(bytes_); }

 private:
  std::vector<std::uint8_t> bytes_;
  std::uint64_t bits_ = 0;
};

// Reads LSB-first bit fields from [begin, end) bit positions of a buffer.
class BitReader {
 public:
  BitReader(std::span<const std::uint8_t> bytes, std::uint64_t begin, std::uint64_t end)
      : bytes_(bytes), pos_(begin), end_(end) {
    if (end < begin || end > bytes.size() * 8ull) fail(ErrorKind::Decode, "bit range outside the payload");
  }

  std::uint64_t get(unsigned nbits) {
    if (nbits > end_ - pos_) fail(ErrorKind::Decode, "codeword ended early");
    std::uint64_t v = 0;
    for (unsigned i = 0; i < nbits; ++i, ++pos_)
      v |= static_cast<std::uint64_t>((bytes_[pos_ >> 3] >> (pos_ & 7)) & 1u) << i;
    return v;
  }
  std::uint64_t remaining() const { return end_ - pos_; }

 private:
  std::span<const std::uint8_t> bytes_;
  std::uint64_t pos_;
  std::uint64_t end_;
};

}  // namespace pcz
