#pragma once

#include <bit>
#include <cstdint>
#include <span>
#include <string_view>

namespace seqclass {

// FNV-1a, 64 bit. Used for parameter fingerprints and input digests; not a
// cryptographic hash.
class Fnv1a {
 public:
  void update(std::string_view bytes) {
    for (unsigned char ch : bytes) {
      state_ ^= ch;
      state_ *= 0x100000001b3ULL;
    }
  }

  void update(std::uint64_t word) {
    for (int k = 0; k < 8; ++k) {
      state_ ^= (word >> (8 * k)) & 0xffU;
      state_ *= 0x100000001b3ULL;
    }
  }

  void update(std::span<const double> values) {
    for (double v : values) update(std::bit_cast<std::uint64_t>(v));
  }

  std::uint64_t digest() const { return state_; }

 private:
  std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

}  // namespace seqclass
