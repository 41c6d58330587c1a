// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>

namespace unet {

// Incremental one's-complement sum over big-endian 16-bit words. Chunks may
// be fed in any split, including odd lengths; a dangling byte is paired with
// the first byte of the next chunk. A final odd byte acts as the high octet
// of a zero-padded word.
class OnesComplementSum {
 public:
  void add(std::span<const uint8_t> data) {
    size_t i = 0;
    if (odd_ && !data.empty()) {
      sum_ += data[0];
      odd_ = false;
      i = 1;
    }
    for (; i + 1 < data.size(); i += 2)
      sum_ += (static_cast<uint32_t>(data[i]) << 8) | data[i + 1];
    if (i < data.size()) {
      sum_ += static_cast<uint32_t>(data[i]) << 8;
      odd_ = true;
    }
  }

  void add_word(uint16_t w) { sum_ += w; }

  // Folded and complemented result. Note the zero/0xFFFF distinction is the
  // caller's business (a transmitted zero means "no checksum" in UDP.)
  uint16_t result() const {
    uint32_t s = sum_;
    while (s >> 16) s = (s & 0xFFFF) + (s >> 16);
    return static_cast<uint16_t>(~s & 0xFFFF);
  }

 private:
  uint32_t sum_ = 0;
  bool odd_ = false;
};

inline uint16_t inet_checksum(std::span<const uint8_t> data) {
  OnesComplementSum s;
  s.add(data);
  return s.result();
}

}  // namespace unet
