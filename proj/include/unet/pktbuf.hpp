// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <cstddef>
#include <mutex>
#include <span>
#include <vector>

#include "unet/cost.hpp"
#include "unet/result.hpp"
#include "unet/types.hpp"

namespace unet {

// Central packet buffer: one statically sized arena shared by the whole
// stack. Packets are chains of snips; a snip is a typed view into an arena
// chunk plus a reference count and a link to the next snip. Chains form
// trees when heads share tails, which is what makes zero-copy fan-out and
// copy-on-write duplication work:
//
//   * releasing a head releases the whole chain hanging off it, snip by
//     snip, each one only when its own user count drops to zero;
//   * start_write duplicates exactly the snips reachable from the given
//     head when that head is shared, leaving other heads untouched.
//
// mark() splits the first `size` bytes of a snip into their own snip that
// links to the remainder. The two snips keep viewing the same chunk, so no
// payload bytes move; the chunk is returned to the free list when the last
// view into it dies.
//
// All operations are internally synchronized with one mutex; handles are
// slot+generation pairs so stale and double releases are detected rather
// than corrupting the arena. In debug builds misuse aborts (configurable),
// in release builds it comes back as an error code.

struct PktBufConfig {
  size_t capacity = 6144;  // arena bytes, including per-chunk headers
  size_t max_snips = 128;  // snip record slots
  bool abort_on_misuse =
#ifdef NDEBUG
      false;
#else
      true;
#endif
};

struct ArenaStats {
  size_t capacity = 0;
  size_t used = 0;        // live chunk bytes including chunk headers
  size_t live_snips = 0;  // live snip records
  size_t high_watermark = 0;
};

class PktBuf {
 public:
  explicit PktBuf(PktBufConfig cfg = {}, CostMeter* meter = nullptr);
  PktBuf(const PktBuf&) = delete;
  PktBuf& operator=(const PktBuf&) = delete;

  // Allocates a snip viewing a fresh chunk of `data.size()` bytes and copies
  // `data` into it. `next` (may be null) becomes the tail of the new head;
  // ownership of the caller's reference to `next` transfers to the new snip.
  Result<SnipHandle> add(SnipHandle next, std::span<const uint8_t> data, NetType type);

  // Same, but leaves the chunk uninitialized (zero-filled headers are built
  // in place by the protocol layers).
  Result<SnipHandle> add_uninit(SnipHandle next, size_t size, NetType type);

  // Splits `snip` so that it keeps its first `size` bytes and the given type
  // and links to a new remainder snip holding the rest. Requires exclusive
  // ownership (users == 1) and 0 < size < len. No payload bytes are copied
  // or moved. Returns `snip` itself.
  Result<SnipHandle> mark(SnipHandle snip, size_t size, NetType type);

  // mark() plus a relink so the remainder becomes the chain head:
  //   [H: size bytes, type] -> [R: rest] -> tail   becomes
  //   [R: rest] -> [H] -> tail, returning R.
  // This is the receive-path workhorse; applying it per layer yields the
  // payload-first snip order of received packets.
  Result<SnipHandle> split_front(SnipHandle snip, size_t size, NetType type);

  // Reverses the chain hanging off `head` in place and returns the new head.
  // Every snip in the chain must be exclusively owned.
  Result<SnipHandle> reverse(SnipHandle head);

  Err hold(SnipHandle snip, uint16_t count = 1);

  // Releases one reference to `snip`; when the count reaches zero the snip
  // dies and the release cascades down its next chain.
  Err release(SnipHandle snip);

  // Returns a head that is safe to write through. If `head` is exclusively
  // owned this is `head` itself; otherwise every snip reachable from `head`
  // is deep-copied into fresh chunks, the copy is returned and one reference
  // to the original head is dropped. On OutOfMemory the original chain is
  // left untouched.
  Result<SnipHandle> start_write(SnipHandle head);

  // Accessors. data() is the mutable view and requires users == 1 so that
  // shared payloads can only be written after start_write.
  Result<std::span<uint8_t>> data(SnipHandle snip);
  Result<std::span<const uint8_t>> cdata(SnipHandle snip) const;
  Result<NetType> type(SnipHandle snip) const;
  Err set_type(SnipHandle snip, NetType type);
  Result<SnipHandle> next(SnipHandle snip) const;
  Result<uint16_t> users(SnipHandle snip) const;
  Result<size_t> size(SnipHandle snip) const;

  // Low-level link surgery. The caller is responsible for keeping reference
  // counts coherent; used by the protocol layers for detach/attach of tails
  // they exclusively own. Requires users == 1 on `snip`.
  Err set_next(SnipHandle snip, SnipHandle next);

  // Chain helpers (read-only walks).
  size_t chain_size(SnipHandle head) const;   // total bytes
  size_t chain_length(SnipHandle head) const; // snip count
  // Copies `len` bytes starting at chain offset `off` into `out`.
  Err read_range(SnipHandle head, size_t off, std::span<uint8_t> out) const;
  std::vector<uint8_t> read_all(SnipHandle head) const;

  ArenaStats stats() const;
  size_t oom_events() const { return oom_events_; }
  // lowest used value seen at any OutOfMemory, SIZE_MAX if none occurred.
  size_t min_used_at_oom() const { return min_used_at_oom_; }

  static constexpr size_t kChunkHeader = 8;
  static constexpr size_t kAlign = 8;
  // Arena footprint of one chunk holding n payload bytes.
  static constexpr size_t chunk_cost(size_t n) {
    return kChunkHeader + ((n + kAlign - 1) & ~(kAlign - 1));
  }

 private:
  struct Snip {
    uint32_t gen = 1;
    uint16_t users = 0;
    NetType type = NetType::Undef;
    bool live = false;
    uint32_t chunk = 0;     // arena offset of the owning chunk header
    uint32_t data_off = 0;  // view offset within the chunk payload
    uint32_t len = 0;
    SnipHandle nxt = kNullSnip;
  };
  struct FreeRange {
    uint32_t off;
    uint32_t size;
  };

  Snip* deref_locked(SnipHandle h);
  const Snip* deref_locked(SnipHandle h) const;
  Err misuse_locked(SnipHandle h, const char* op) const;

  Result<uint32_t> alloc_chunk_locked(size_t payload);
  void free_chunk_unref_locked(uint32_t chunk_off);
  Result<uint16_t> alloc_slot_locked();
  void free_slot_locked(uint16_t slot);
  void release_locked(SnipHandle h);
  void note_oom_locked();

  static SnipHandle make_handle(uint16_t slot, uint32_t gen) {
    return (static_cast<uint64_t>(gen) << 16) | slot;
  }

  mutable std::mutex mu_;
  PktBufConfig cfg_;
  CostMeter* meter_;
  std::vector<uint8_t> arena_;
  std::vector<FreeRange> free_;  // sorted by offset, coalesced
  std::vector<Snip> slots_;
  std::vector<uint16_t> free_slots_;
  size_t used_ = 0;
  size_t live_snips_ = 0;
  size_t high_watermark_ = 0;
  size_t oom_events_ = 0;
  size_t min_used_at_oom_ = SIZE_MAX;
};

}  // namespace unet
