// SPDX-License-Identifier: Apache-2.0

#include "unet/pktbuf.hpp"

#include <algorithm>
#include <cassert>
#include <cstdio>
#include <cstdlib>
#include <cstring>

namespace unet {

namespace {

struct ChunkHeader {
  uint32_t size;  // padded payload bytes
  uint16_t refs;  // snip views into this chunk
  uint16_t magic;
};
constexpr uint16_t kChunkMagic = 0xC0DE;

static_assert(sizeof(ChunkHeader) == PktBuf::kChunkHeader);

}  // namespace

PktBuf::PktBuf(PktBufConfig cfg, CostMeter* meter) : cfg_(cfg), meter_(meter) {
  cfg_.capacity = (cfg_.capacity + kAlign - 1) & ~(kAlign - 1);
  arena_.resize(cfg_.capacity);
  free_.push_back({0, static_cast<uint32_t>(cfg_.capacity)});
  slots_.resize(cfg_.max_snips);
  free_slots_.reserve(cfg_.max_snips);
  for (size_t i = cfg_.max_snips; i > 0; i--)
    free_slots_.push_back(static_cast<uint16_t>(i - 1));
}

PktBuf::Snip* PktBuf::deref_locked(SnipHandle h) {
  uint16_t slot = static_cast<uint16_t>(h & 0xFFFF);
  uint32_t gen = static_cast<uint32_t>(h >> 16);
  if (h == kNullSnip || slot >= slots_.size()) return nullptr;
  Snip& s = slots_[slot];
  if (!s.live || s.gen != gen) return nullptr;
  return &s;
}

const PktBuf::Snip* PktBuf::deref_locked(SnipHandle h) const {
  return const_cast<PktBuf*>(this)->deref_locked(h);
}

Err PktBuf::misuse_locked(SnipHandle h, const char* op) const {
  uint16_t slot = static_cast<uint16_t>(h & 0xFFFF);
  // A known slot whose generation moved on means the snip was already
  // released; anything else is a garbage handle.
  bool stale = h != kNullSnip && slot < slots_.size() &&
               slots_[slot].gen != static_cast<uint32_t>(h >> 16);
  Err e = stale ? Err::DoubleRelease : Err::InvalidHandle;
  if (cfg_.abort_on_misuse) {
    std::fprintf(stderr, "pktbuf: %s on %s handle %#llx\n", op, err_name(e),
                 static_cast<unsigned long long>(h));
    std::abort();
  }
  return e;
}

Result<uint32_t> PktBuf::alloc_chunk_locked(size_t payload) {
  size_t total = chunk_cost(payload);
  if (total > UINT32_MAX) return Err::OutOfMemory;
  for (size_t i = 0; i < free_.size(); i++) {
    if (free_[i].size < total) continue;
    uint32_t off = free_[i].off;
    if (free_[i].size == total) {
      free_.erase(free_.begin() + static_cast<long>(i));
    } else {
      free_[i].off += static_cast<uint32_t>(total);
      free_[i].size -= static_cast<uint32_t>(total);
    }
    ChunkHeader hdr{static_cast<uint32_t>(total - kChunkHeader), 1, kChunkMagic};
    std::memcpy(&arena_[off], &hdr, sizeof hdr);
    used_ += total;
    high_watermark_ = std::max(high_watermark_, used_);
    return off;
  }
  note_oom_locked();
  return Err::OutOfMemory;
}

void PktBuf::note_oom_locked() {
  oom_events_++;
  min_used_at_oom_ = std::min(min_used_at_oom_, used_);
}

void PktBuf::free_chunk_unref_locked(uint32_t off) {
  ChunkHeader hdr;
  std::memcpy(&hdr, &arena_[off], sizeof hdr);
  assert(hdr.magic == kChunkMagic && hdr.refs > 0);
  if (hdr.refs > 1) {
    hdr.refs--;
    std::memcpy(&arena_[off], &hdr, sizeof hdr);
    return;
  }
  uint32_t total = static_cast<uint32_t>(kChunkHeader) + hdr.size;
  hdr.magic = 0;
  std::memcpy(&arena_[off], &hdr, sizeof hdr);
  used_ -= total;
  // Insert into the address-ordered free list and coalesce both neighbors.
  auto it = std::lower_bound(
      free_.begin(), free_.end(), off,
      [](const FreeRange& r, uint32_t o) { return r.off < o; });
  it = free_.insert(it, {off, total});
  if (it + 1 != free_.end() && it->off + it->size == (it + 1)->off) {
    it->size += (it + 1)->size;
    free_.erase(it + 1);
  }
  if (it != free_.begin() && (it - 1)->off + (it - 1)->size == it->off) {
    (it - 1)->size += it->size;
    free_.erase(it);
  }
}

Result<uint16_t> PktBuf::alloc_slot_locked() {
  if (free_slots_.empty()) {
    note_oom_locked();
    return Err::OutOfMemory;
  }
  uint16_t slot = free_slots_.back();
  free_slots_.pop_back();
  return slot;
}

void PktBuf::free_slot_locked(uint16_t slot) {
  Snip& s = slots_[slot];
  s.live = false;
  s.gen = s.gen == UINT32_MAX ? 1 : s.gen + 1;
  s.nxt = kNullSnip;
  free_slots_.push_back(slot);
}

Result<SnipHandle> PktBuf::add(SnipHandle next, std::span<const uint8_t> data,
                               NetType type) {
  std::lock_guard lk(mu_);
  if (next != kNullSnip && !deref_locked(next))
    return misuse_locked(next, "add(next)");
  auto slot = alloc_slot_locked();
  if (!slot) return slot.error();
  auto chunk = alloc_chunk_locked(data.size());
  if (!chunk) {
    free_slots_.push_back(*slot);
    return chunk.error();
  }
  if (!data.empty()) {
    std::memcpy(&arena_[*chunk + kChunkHeader], data.data(), data.size());
    if (meter_) meter_->bytes(data.size());
  }
  Snip& s = slots_[*slot];
  s.users = 1;
  s.type = type;
  s.live = true;
  s.chunk = *chunk;
  s.data_off = 0;
  s.len = static_cast<uint32_t>(data.size());
  s.nxt = next;
  live_snips_++;
  return make_handle(*slot, s.gen);
}

Result<SnipHandle> PktBuf::add_uninit(SnipHandle next, size_t size, NetType type) {
  std::lock_guard lk(mu_);
  if (next != kNullSnip && !deref_locked(next))
    return misuse_locked(next, "add(next)");
  auto slot = alloc_slot_locked();
  if (!slot) return slot.error();
  auto chunk = alloc_chunk_locked(size);
  if (!chunk) {
    free_slots_.push_back(*slot);
    return chunk.error();
  }
  if (meter_) meter_->bytes(size);
  Snip& s = slots_[*slot];
  s.users = 1;
  s.type = type;
  s.live = true;
  s.chunk = *chunk;
  s.data_off = 0;
  s.len = static_cast<uint32_t>(size);
  s.nxt = next;
  live_snips_++;
  return make_handle(*slot, s.gen);
}

Result<SnipHandle> PktBuf::mark(SnipHandle snip, size_t size, NetType type) {
  std::lock_guard lk(mu_);
  Snip* s = deref_locked(snip);
  if (!s) return misuse_locked(snip, "mark");
  if (s->users != 1) return Err::SharedSnip;
  if (size == 0 || size >= s->len) return Err::InvalidSize;
  auto slot = alloc_slot_locked();
  if (!slot) return slot.error();
  s = deref_locked(snip);  // slot vector may not move, but be explicit
  Snip& rem = slots_[*slot];
  rem.users = 1;
  rem.type = s->type;
  rem.live = true;
  rem.chunk = s->chunk;
  rem.data_off = s->data_off + static_cast<uint32_t>(size);
  rem.len = s->len - static_cast<uint32_t>(size);
  rem.nxt = s->nxt;
  // Second view into the same chunk.
  ChunkHeader hdr;
  std::memcpy(&hdr, &arena_[s->chunk], sizeof hdr);
  hdr.refs++;
  std::memcpy(&arena_[s->chunk], &hdr, sizeof hdr);
  s->len = static_cast<uint32_t>(size);
  s->type = type;
  s->nxt = make_handle(*slot, rem.gen);
  live_snips_++;
  return snip;
}

Result<SnipHandle> PktBuf::split_front(SnipHandle snip, size_t size, NetType type) {
  auto marked = mark(snip, size, type);
  if (!marked) return marked.error();
  std::lock_guard lk(mu_);
  Snip* h = deref_locked(*marked);
  SnipHandle rem = h->nxt;
  Snip* r = deref_locked(rem);
  h->nxt = r->nxt;
  r->nxt = *marked;
  return rem;
}

Result<SnipHandle> PktBuf::reverse(SnipHandle head) {
  std::lock_guard lk(mu_);
  for (SnipHandle h = head; h != kNullSnip;) {
    const Snip* s = deref_locked(h);
    if (!s) return misuse_locked(h, "reverse");
    if (s->users != 1) return Err::SharedSnip;
    h = s->nxt;
  }
  SnipHandle prev = kNullSnip;
  SnipHandle cur = head;
  while (cur != kNullSnip) {
    Snip* s = deref_locked(cur);
    SnipHandle nxt = s->nxt;
    s->nxt = prev;
    prev = cur;
    cur = nxt;
  }
  return prev;
}

Err PktBuf::hold(SnipHandle snip, uint16_t count) {
  std::lock_guard lk(mu_);
  Snip* s = deref_locked(snip);
  if (!s) return misuse_locked(snip, "hold");
  if (count > UINT16_MAX - s->users) return Err::InvalidArgument;
  s->users += count;
  return Err::None;
}

Err PktBuf::release(SnipHandle snip) {
  std::lock_guard lk(mu_);
  if (!deref_locked(snip)) return misuse_locked(snip, "release");
  release_locked(snip);
  return Err::None;
}

void PktBuf::release_locked(SnipHandle h) {
  while (h != kNullSnip) {
    Snip* s = deref_locked(h);
    assert(s && "corrupt chain link");
    if (s->users > 1) {
      s->users--;
      return;
    }
    SnipHandle nxt = s->nxt;
    free_chunk_unref_locked(s->chunk);
    free_slot_locked(static_cast<uint16_t>(h & 0xFFFF));
    live_snips_--;
    h = nxt;
  }
}

Result<SnipHandle> PktBuf::start_write(SnipHandle head) {
  std::lock_guard lk(mu_);
  Snip* s = deref_locked(head);
  if (!s) return misuse_locked(head, "start_write");
  if (s->users == 1) return head;

  // Deep copy of everything reachable from head, built back to front so the
  // links can be set as we go. On any failure the partial copy is torn down
  // and the original chain is untouched.
  std::vector<SnipHandle> chain;
  for (SnipHandle h = head; h != kNullSnip; h = deref_locked(h)->nxt)
    chain.push_back(h);

  SnipHandle copy_next = kNullSnip;
  for (size_t i = chain.size(); i > 0; i--) {
    const Snip* src = deref_locked(chain[i - 1]);
    auto slot = alloc_slot_locked();
    Result<uint32_t> chunk = slot ? alloc_chunk_locked(src->len)
                                  : Result<uint32_t>(Err::OutOfMemory);
    if (!slot || !chunk) {
      if (slot) free_slots_.push_back(*slot);
      if (copy_next != kNullSnip) release_locked(copy_next);
      return Err::OutOfMemory;
    }
    std::memcpy(&arena_[*chunk + kChunkHeader],
                &arena_[src->chunk + kChunkHeader + src->data_off], src->len);
    if (meter_) meter_->bytes(src->len);
    Snip& c = slots_[*slot];
    c.users = 1;
    c.type = src->type;
    c.live = true;
    c.chunk = *chunk;
    c.data_off = 0;
    c.len = src->len;
    c.nxt = copy_next;
    live_snips_++;
    copy_next = make_handle(*slot, c.gen);
  }
  deref_locked(head)->users--;
  return copy_next;
}

Result<std::span<uint8_t>> PktBuf::data(SnipHandle snip) {
  std::lock_guard lk(mu_);
  Snip* s = deref_locked(snip);
  if (!s) return misuse_locked(snip, "data");
  if (s->users != 1) return Err::SharedSnip;
  return std::span<uint8_t>(&arena_[s->chunk + kChunkHeader + s->data_off], s->len);
}

Result<std::span<const uint8_t>> PktBuf::cdata(SnipHandle snip) const {
  std::lock_guard lk(mu_);
  const Snip* s = deref_locked(snip);
  if (!s) return misuse_locked(snip, "cdata");
  return std::span<const uint8_t>(&arena_[s->chunk + kChunkHeader + s->data_off],
                                  s->len);
}

Result<NetType> PktBuf::type(SnipHandle snip) const {
  std::lock_guard lk(mu_);
  const Snip* s = deref_locked(snip);
  if (!s) return misuse_locked(snip, "type");
  return s->type;
}

Err PktBuf::set_type(SnipHandle snip, NetType type) {
  std::lock_guard lk(mu_);
  Snip* s = deref_locked(snip);
  if (!s) return misuse_locked(snip, "set_type");
  if (s->users != 1) return Err::SharedSnip;
  s->type = type;
  return Err::None;
}

Result<SnipHandle> PktBuf::next(SnipHandle snip) const {
  std::lock_guard lk(mu_);
  const Snip* s = deref_locked(snip);
  if (!s) return misuse_locked(snip, "next");
  return s->nxt;
}

Result<uint16_t> PktBuf::users(SnipHandle snip) const {
  std::lock_guard lk(mu_);
  const Snip* s = deref_locked(snip);
  if (!s) return misuse_locked(snip, "users");
  return s->users;
}

Result<size_t> PktBuf::size(SnipHandle snip) const {
  std::lock_guard lk(mu_);
  const Snip* s = deref_locked(snip);
  if (!s) return misuse_locked(snip, "size");
  return static_cast<size_t>(s->len);
}

Err PktBuf::set_next(SnipHandle snip, SnipHandle next) {
  std::lock_guard lk(mu_);
  Snip* s = deref_locked(snip);
  if (!s) return misuse_locked(snip, "set_next");
  if (s->users != 1) return Err::SharedSnip;
  if (next != kNullSnip && !deref_locked(next))
    return misuse_locked(next, "set_next(next)");
  s->nxt = next;
  return Err::None;
}

size_t PktBuf::chain_size(SnipHandle head) const {
  std::lock_guard lk(mu_);
  size_t total = 0;
  for (const Snip* s; head != kNullSnip && (s = deref_locked(head)); head = s->nxt)
    total += s->len;
  return total;
}

size_t PktBuf::chain_length(SnipHandle head) const {
  std::lock_guard lk(mu_);
  size_t n = 0;
  for (const Snip* s; head != kNullSnip && (s = deref_locked(head)); head = s->nxt)
    n++;
  return n;
}

Err PktBuf::read_range(SnipHandle head, size_t off, std::span<uint8_t> out) const {
  std::lock_guard lk(mu_);
  size_t want = out.size();
  size_t got = 0;
  for (SnipHandle h = head; h != kNullSnip && got < want;) {
    const Snip* s = deref_locked(h);
    if (!s) return Err::InvalidHandle;
    if (off >= s->len) {
      off -= s->len;
    } else {
      size_t n = std::min<size_t>(s->len - off, want - got);
      std::memcpy(out.data() + got, &arena_[s->chunk + kChunkHeader + s->data_off + off], n);
      got += n;
      off = 0;
    }
    h = s->nxt;
  }
  if (got < want) return Err::InvalidSize;
  if (meter_) meter_->bytes(want);
  return Err::None;
}

std::vector<uint8_t> PktBuf::read_all(SnipHandle head) const {
  std::vector<uint8_t> out(chain_size(head));
  if (!out.empty()) read_range(head, 0, out);
  return out;
}

ArenaStats PktBuf::stats() const {
  std::lock_guard lk(mu_);
  return {cfg_.capacity, used_, live_snips_, high_watermark_};
}

}  // namespace unet
