// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "unet/result.hpp"
#include "unet/sched.hpp"
#include "unet/types.hpp"

namespace unet {
namespace sixlo {

// Uncompressed-IPv6 encapsulation and fragmentation only; header
// compression is out of scope for the virtual link layer used here.
constexpr uint8_t kDispatchIpv6 = 0x41;

constexpr uint8_t kFrag1Dispatch = 0xC0;  // 11000xxx
constexpr uint8_t kFragNDispatch = 0xE0;  // 11100xxx
constexpr size_t kFrag1HdrSize = 4;
constexpr size_t kFragNHdrSize = 5;

// Upper bound the fragmentation logic assumes for a whole datagram; the
// size field in the fragment header is 11 bits wide.
constexpr size_t kMaxDatagram = 2047;

// Link payload budget the adaptation layer plans fragments against. Kept
// below what the radios could physically carry so a fragment always
// survives a few bytes of link-layer growth, and chosen so the per-fragment
// datagram share lands on the required multiple of 8.
constexpr size_t kFragMtu = 102;

// Datagram bytes carried by the first / later fragments at kFragMtu.
// The first fragment also carries the uncompressed-IPv6 dispatch byte.
constexpr size_t kFrag1Data = ((kFragMtu - kFrag1HdrSize - 1) / 8) * 8;  // 96
constexpr size_t kFragNData = ((kFragMtu - kFragNHdrSize) / 8) * 8;      // 96

// Largest datagram that still goes out unfragmented (one dispatch byte of
// overhead must fit too).
constexpr size_t kMaxUnfragmented = kFragMtu - 1;

// Fragments needed for a datagram of `size` bytes.
constexpr size_t fragment_count(size_t size) {
  if (size <= kMaxUnfragmented) return 1;
  size_t rest = size - kFrag1Data;
  return 1 + (rest + kFragNData - 1) / kFragNData;
}

struct FragHeader {
  bool first = true;
  uint16_t size = 0;         // whole datagram, bytes
  uint16_t tag = 0;
  uint16_t offset = 0;       // bytes (wire carries units of 8)
};

// Encodes into out (4 or 5 bytes depending on h.first).
size_t frag_encode(std::span<uint8_t> out, const FragHeader& h);
Result<FragHeader> frag_parse(std::span<const uint8_t> in);

// Cuts `datagram` into ready-to-send link payloads: fragment headers,
// dispatch byte in the first fragment, data shares aligned to 8 bytes.
// Pure function so tests can compare the send path against it.
std::vector<std::vector<uint8_t>> cut_fragments(
    std::span<const uint8_t> datagram, uint16_t tag);

}  // namespace sixlo

class PktBuf;
class Stack;

// Reassembles fragment streams back into datagrams. Keyed by link source,
// link destination, tag and datagram size. A fixed number of datagrams can
// be in flight; finished or abandoned keys leave a tombstone behind so
// stragglers are recognized as stale instead of opening a fresh buffer.
class Reassembler {
 public:
  static constexpr size_t kBuffers = 4;
  static constexpr size_t kTombstones = 8;
  static constexpr uint64_t kTimeoutNs = 5'000'000'000;

  struct Key {
    uint16_t src = 0;
    uint16_t dst = 0;
    uint16_t tag = 0;
    uint16_t size = 0;
    bool operator==(const Key&) const = default;
  };

  explicit Reassembler(Scheduler* sched = nullptr) : sched_(sched) {}

  // Feeds one fragment's datagram share. On completion returns the whole
  // datagram and retires the buffer. Errors:
  //   StaleTag         key was already completed or abandoned
  //   OverlapMismatch  overlapping bytes disagreed; buffer discarded
  //   ReassemblyFull   no free buffer
  // An empty result with Err::None means "accepted, not complete yet".
  Result<std::vector<uint8_t>> feed(const Key& key, size_t offset,
                                    std::span<const uint8_t> data);

  size_t active() const;
  uint64_t timeouts() const { return timeouts_; }
  uint64_t stale_drops() const { return stale_drops_; }
  uint64_t overlap_drops() const { return overlap_drops_; }

 private:
  struct Buffer {
    bool live = false;
    Key key;
    std::vector<uint8_t> bytes;
    std::vector<std::pair<uint16_t, uint16_t>> have;  // merged [off, end)
    uint64_t timer = 0;
  };

  void retire(size_t idx, bool tombstone);
  void add_tombstone(const Key& k);
  bool is_tombstoned(const Key& k) const;

  Scheduler* sched_;
  std::array<Buffer, kBuffers> bufs_;
  std::vector<Key> tombstones_;  // FIFO, capped at kTombstones
  uint64_t timeouts_ = 0;
  uint64_t stale_drops_ = 0;
  uint64_t overlap_drops_ = 0;
};

// The adaptation-layer module endpoint: encapsulation and fragmentation on
// the way down, dispatch parsing and reassembly on the way up.
class SixlowpanModule : public Endpoint {
 public:
  explicit SixlowpanModule(Stack& stack);

  void on_msg(const NetMsg& m) override;

  const Reassembler& reassembler() const { return reasm_; }

 private:
  struct TxFragJob;

  void handle_snd(const NetMsg& m);
  void handle_rcv(const NetMsg& m);
  void handle_opt(const NetMsg& m);
  // Sends fragment `idx` and schedules a task for the next one, so a long
  // fragment train never floods a mailbox in one burst.
  void send_next_fragment(std::shared_ptr<TxFragJob> job, size_t idx);

  Stack& stack_;
  Reassembler reasm_;
  uint16_t next_tag_ = 0;
};

}  // namespace unet
