// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>

#include "unet/result.hpp"

namespace unet {

// Data-frame MAC header with short addressing and PAN id compression, the
// only frame format the virtual radios speak:
//
//   0-1  frame control (little endian), 0x8841 or 0x8861 with ack request
//   2    sequence number
//   3-4  destination PAN id (little endian)
//   5-6  destination short address (little endian)
//   7-8  source short address (little endian)
//
// The 2-byte FCS is never materialized; the virtual media count it for
// timing and length limits only.
namespace ieee802154 {

constexpr size_t kMhrSize = 9;
constexpr size_t kFcsSize = 2;
constexpr size_t kMaxPhyFrame = 127;      // MPDU limit including FCS
constexpr size_t kMaxFrame = kMaxPhyFrame - kFcsSize;  // what send() accepts
constexpr size_t kMaxPayload = kMaxFrame - kMhrSize;

constexpr uint16_t kBroadcast = 0xFFFF;
constexpr uint16_t kDefaultPan = 0x1234;

constexpr uint16_t kFcfData = 0x8841;
constexpr uint16_t kFcfDataAckReq = 0x8861;

struct Mhr {
  uint16_t fcf = kFcfData;
  uint8_t seq = 0;
  uint16_t pan = kDefaultPan;
  uint16_t dst = kBroadcast;
  uint16_t src = 0;

  bool ack_requested() const { return fcf == kFcfDataAckReq; }
};

inline void encode_mhr(std::span<uint8_t> out, const Mhr& h) {
  out[0] = static_cast<uint8_t>(h.fcf & 0xFF);
  out[1] = static_cast<uint8_t>(h.fcf >> 8);
  out[2] = h.seq;
  out[3] = static_cast<uint8_t>(h.pan & 0xFF);
  out[4] = static_cast<uint8_t>(h.pan >> 8);
  out[5] = static_cast<uint8_t>(h.dst & 0xFF);
  out[6] = static_cast<uint8_t>(h.dst >> 8);
  out[7] = static_cast<uint8_t>(h.src & 0xFF);
  out[8] = static_cast<uint8_t>(h.src >> 8);
}

inline Result<Mhr> parse_mhr(std::span<const uint8_t> frame) {
  if (frame.size() < kMhrSize) return Err::BadLength;
  Mhr h;
  h.fcf = static_cast<uint16_t>(frame[0] | (frame[1] << 8));
  if (h.fcf != kFcfData && h.fcf != kFcfDataAckReq) return Err::Unsupported;
  h.seq = frame[2];
  h.pan = static_cast<uint16_t>(frame[3] | (frame[4] << 8));
  h.dst = static_cast<uint16_t>(frame[5] | (frame[6] << 8));
  h.src = static_cast<uint16_t>(frame[7] | (frame[8] << 8));
  return h;
}

}  // namespace ieee802154
}  // namespace unet
