// SPDX-License-Identifier: Apache-2.0

#include "unet/sixlowpan.hpp"

#include <algorithm>
#include <cstring>

#include "unet/netif.hpp"
#include "unet/pktbuf.hpp"
#include "unet/stack.hpp"

namespace unet {
namespace sixlo {

size_t frag_encode(std::span<uint8_t> out, const FragHeader& h) {
  uint8_t disp = h.first ? kFrag1Dispatch : kFragNDispatch;
  out[0] = static_cast<uint8_t>(disp | ((h.size >> 8) & 0x07));
  out[1] = static_cast<uint8_t>(h.size & 0xFF);
  out[2] = static_cast<uint8_t>(h.tag >> 8);
  out[3] = static_cast<uint8_t>(h.tag & 0xFF);
  if (h.first) return kFrag1HdrSize;
  out[4] = static_cast<uint8_t>(h.offset / 8);
  return kFragNHdrSize;
}

Result<FragHeader> frag_parse(std::span<const uint8_t> in) {
  if (in.size() < kFrag1HdrSize) return Err::BadLength;
  FragHeader h;
  h.size = static_cast<uint16_t>(((in[0] & 0x07) << 8) | in[1]);
  h.tag = static_cast<uint16_t>((in[2] << 8) | in[3]);
  uint8_t disp = in[0] & 0xF8;
  if (disp == kFrag1Dispatch) {
    h.first = true;
    h.offset = 0;
    return h;
  }
  if (disp == kFragNDispatch) {
    if (in.size() < kFragNHdrSize) return Err::BadLength;
    h.first = false;
    h.offset = static_cast<uint16_t>(in[4] * 8);
    return h;
  }
  return Err::InvalidDispatch;
}

std::vector<std::vector<uint8_t>> cut_fragments(
    std::span<const uint8_t> datagram, uint16_t tag) {
  std::vector<std::vector<uint8_t>> out;
  if (datagram.size() <= kMaxUnfragmented) {
    std::vector<uint8_t> one(1 + datagram.size());
    one[0] = kDispatchIpv6;
    std::memcpy(one.data() + 1, datagram.data(), datagram.size());
    out.push_back(std::move(one));
    return out;
  }

  FragHeader h;
  h.first = true;
  h.size = static_cast<uint16_t>(datagram.size());
  h.tag = tag;

  std::vector<uint8_t> first(kFrag1HdrSize + 1 + kFrag1Data);
  frag_encode(first, h);
  first[kFrag1HdrSize] = kDispatchIpv6;
  std::memcpy(first.data() + kFrag1HdrSize + 1, datagram.data(), kFrag1Data);
  out.push_back(std::move(first));

  for (size_t off = kFrag1Data; off < datagram.size(); off += kFragNData) {
    size_t n = std::min(kFragNData, datagram.size() - off);
    h.first = false;
    h.offset = static_cast<uint16_t>(off);
    std::vector<uint8_t> frag(kFragNHdrSize + n);
    frag_encode(frag, h);
    std::memcpy(frag.data() + kFragNHdrSize, datagram.data() + off, n);
    out.push_back(std::move(frag));
  }
  return out;
}

}  // namespace sixlo

// -- Reassembler ------------------------------------------------------------

Result<std::vector<uint8_t>> Reassembler::feed(const Key& key, size_t offset,
                                               std::span<const uint8_t> data) {
  if (is_tombstoned(key)) {
    stale_drops_++;
    return Err::StaleTag;
  }
  if (data.empty() || offset + data.size() > key.size)
    return Err::BadLength;

  size_t idx = kBuffers;
  for (size_t i = 0; i < kBuffers; i++) {
    if (bufs_[i].live && bufs_[i].key == key) {
      idx = i;
      break;
    }
  }
  if (idx == kBuffers) {
    for (size_t i = 0; i < kBuffers; i++) {
      if (!bufs_[i].live) {
        idx = i;
        break;
      }
    }
    if (idx == kBuffers) return Err::ReassemblyFull;
    Buffer& b = bufs_[idx];
    b.live = true;
    b.key = key;
    b.bytes.assign(key.size, 0);
    b.have.clear();
    if (sched_) {
      b.timer = sched_->schedule_after(kTimeoutNs, [this, idx, key] {
        if (bufs_[idx].live && bufs_[idx].key == key) {
          timeouts_++;
          retire(idx, true);
        }
      });
    }
  }

  Buffer& b = bufs_[idx];
  uint16_t off = static_cast<uint16_t>(offset);
  uint16_t end = static_cast<uint16_t>(offset + data.size());

  // Overlaps are tolerated (retransmissions) but disagreeing bytes mean the
  // tag was reused for different content; the whole buffer is poisoned.
  for (auto [ho, he] : b.have) {
    uint16_t lo = std::max(off, ho);
    uint16_t hi = std::min(end, he);
    if (lo < hi &&
        std::memcmp(&b.bytes[lo], &data[lo - off], hi - lo) != 0) {
      overlap_drops_++;
      retire(idx, true);
      return Err::OverlapMismatch;
    }
  }

  std::memcpy(&b.bytes[off], data.data(), data.size());
  b.have.emplace_back(off, end);
  std::sort(b.have.begin(), b.have.end());
  size_t w = 0;
  for (size_t r = 1; r < b.have.size(); r++) {
    if (b.have[r].first <= b.have[w].second)
      b.have[w].second = std::max(b.have[w].second, b.have[r].second);
    else
      b.have[++w] = b.have[r];
  }
  b.have.resize(w + 1);

  if (b.have.size() == 1 && b.have[0].first == 0 &&
      b.have[0].second == key.size) {
    std::vector<uint8_t> done = std::move(b.bytes);
    retire(idx, true);
    return done;
  }
  return std::vector<uint8_t>{};
}

size_t Reassembler::active() const {
  size_t n = 0;
  for (const auto& b : bufs_) n += b.live;
  return n;
}

void Reassembler::retire(size_t idx, bool tombstone) {
  Buffer& b = bufs_[idx];
  if (sched_ && b.timer) sched_->cancel_timer(b.timer);
  b.timer = 0;
  b.live = false;
  b.bytes.clear();
  b.have.clear();
  if (tombstone) add_tombstone(b.key);
}

void Reassembler::add_tombstone(const Key& k) {
  if (tombstones_.size() >= kTombstones)
    tombstones_.erase(tombstones_.begin());
  tombstones_.push_back(k);
}

bool Reassembler::is_tombstoned(const Key& k) const {
  return std::find(tombstones_.begin(), tombstones_.end(), k) !=
         tombstones_.end();
}

// -- SixlowpanModule ---------------------------------------------------------

struct SixlowpanModule::TxFragJob {
  std::vector<std::vector<uint8_t>> frags;
  NetifHeaderData info;
};

SixlowpanModule::SixlowpanModule(Stack& stack)
    : stack_(stack), reasm_(&stack.sched()) {}

void SixlowpanModule::on_msg(const NetMsg& m) {
  switch (m.kind) {
    case MsgKind::Snd:
      handle_snd(m);
      break;
    case MsgKind::Rcv:
      handle_rcv(m);
      break;
    case MsgKind::Get:
    case MsgKind::Set:
      handle_opt(m);
      break;
    default:
      if (m.pkt != kNullSnip) stack_.buf().release(m.pkt);
      break;
  }
}

void SixlowpanModule::handle_opt(const NetMsg& m) {
  stack_.reply_ack(m, ack_error(Err::Unsupported));
}

// Downward: chain is [link metadata] -> datagram snips. Small datagrams get
// the uncompressed-IPv6 dispatch byte spliced in front of the datagram;
// anything larger is read out flat and cut into a fragment train.
void SixlowpanModule::handle_snd(const NetMsg& m) {
  PktBuf& buf = stack_.buf();
  auto hw = buf.start_write(m.pkt);
  if (!hw) {
    buf.release(m.pkt);
    return;
  }
  SnipHandle h = *hw;

  auto itype = buf.type(h);
  auto isize = buf.size(h);
  if (!itype || *itype != NetType::Netif || !isize ||
      *isize != sizeof(NetifHeaderData)) {
    buf.release(h);
    return;
  }
  NetifHeaderData info = NetifHeaderData::load(*buf.cdata(h));
  SnipHandle body = *buf.next(h);
  size_t dsize = buf.chain_size(body);
  if (dsize == 0 || dsize > sixlo::kMaxDatagram) {
    stack_.stats().bad_length++;
    buf.release(h);
    return;
  }

  if (dsize <= sixlo::kMaxUnfragmented) {
    uint8_t disp = sixlo::kDispatchIpv6;
    auto dsnip = buf.add(body, std::span(&disp, 1), NetType::Sixlowpan);
    if (!dsnip) {
      buf.release(h);
      return;
    }
    buf.set_next(h, *dsnip);
    stack_.dispatch(NetType::Netif, info.if_index, MsgKind::Snd, h);
    return;
  }

  auto job = std::make_shared<TxFragJob>();
  job->info = info;
  {
    std::vector<uint8_t> datagram = buf.read_all(body);
    buf.release(h);
    job->frags = sixlo::cut_fragments(datagram, next_tag_++);
  }
  send_next_fragment(std::move(job), 0);
}

void SixlowpanModule::send_next_fragment(std::shared_ptr<TxFragJob> job,
                                         size_t idx) {
  PktBuf& buf = stack_.buf();
  auto payload = buf.add(kNullSnip, job->frags[idx], NetType::Sixlowpan);
  if (payload) {
    uint8_t info_bytes[sizeof(NetifHeaderData)];
    job->info.store(info_bytes);
    auto head = buf.add(*payload, info_bytes, NetType::Netif);
    if (head) {
      stack_.dispatch(NetType::Netif, job->info.if_index, MsgKind::Snd, *head);
    } else {
      buf.release(*payload);
    }
  }
  // Continuing via a task instead of looping keeps a long train from
  // landing on the interface mailbox as one burst: the frame just queued
  // is processed before the next one is produced.
  if (idx + 1 < job->frags.size()) {
    stack_.sched().post_task(
        [this, job = std::move(job), idx] { send_next_fragment(job, idx + 1); });
  }
}

// Upward: head snip is the link payload, its tail the link metadata.
void SixlowpanModule::handle_rcv(const NetMsg& m) {
  PktBuf& buf = stack_.buf();
  auto hw = buf.start_write(m.pkt);
  if (!hw) {
    buf.release(m.pkt);
    return;
  }
  SnipHandle h = *hw;

  auto bytes = buf.cdata(h);
  auto meta_h = buf.next(h);
  if (!bytes || bytes->empty() || !meta_h || *meta_h == kNullSnip) {
    buf.release(h);
    return;
  }
  auto meta_bytes = buf.cdata(*meta_h);
  if (!meta_bytes || meta_bytes->size() != sizeof(NetifHeaderData)) {
    buf.release(h);
    return;
  }
  NetifHeaderData info = NetifHeaderData::load(*meta_bytes);

  uint8_t first = (*bytes)[0];
  if (first == sixlo::kDispatchIpv6) {
    if (bytes->size() < 2) {
      buf.release(h);
      return;
    }
    auto rest = buf.split_front(h, 1, NetType::Sixlowpan);
    if (!rest) {
      buf.release(h);
      return;
    }
    buf.set_type(*rest, NetType::Ipv6);
    stack_.dispatch(NetType::Ipv6, kDemuxAll, MsgKind::Rcv, *rest);
    return;
  }

  uint8_t disp = first & 0xF8;
  if (disp != sixlo::kFrag1Dispatch && disp != sixlo::kFragNDispatch) {
    stack_.stats().bad_length++;
    buf.release(h);
    return;
  }

  auto fh = sixlo::frag_parse(*bytes);
  if (!fh) {
    stack_.stats().bad_length++;
    buf.release(h);
    return;
  }
  size_t data_off = fh->first ? sixlo::kFrag1HdrSize + 1 : sixlo::kFragNHdrSize;
  if (fh->first &&
      (bytes->size() <= sixlo::kFrag1HdrSize + 1 ||
       (*bytes)[sixlo::kFrag1HdrSize] != sixlo::kDispatchIpv6)) {
    stack_.stats().bad_length++;
    buf.release(h);
    return;
  }
  if (bytes->size() <= data_off) {
    stack_.stats().bad_length++;
    buf.release(h);
    return;
  }

  Reassembler::Key key{info.src, info.dst, fh->tag, fh->size};
  auto share = bytes->subspan(data_off);
  auto done = reasm_.feed(key, fh->offset, share);
  buf.release(h);
  if (!done || done->empty()) return;

  uint8_t info_bytes[sizeof(NetifHeaderData)];
  info.store(info_bytes);
  auto meta = buf.add(kNullSnip, info_bytes, NetType::Netif);
  if (!meta) return;
  auto pkt = buf.add(*meta, *done, NetType::Ipv6);
  if (!pkt) {
    buf.release(*meta);
    return;
  }
  stack_.dispatch(NetType::Ipv6, kDemuxAll, MsgKind::Rcv, *pkt);
}

}  // namespace unet
