// SPDX-License-Identifier: Apache-2.0

#include "unet/ipv6.hpp"

#include <arpa/inet.h>

#include <algorithm>
#include <cstring>

#include "unet/checksum.hpp"
#include "unet/ieee802154.hpp"
#include "unet/netif.hpp"
#include "unet/pktbuf.hpp"
#include "unet/stack.hpp"
#include "unet/udp.hpp"

namespace unet {

Result<Ipv6Addr> Ipv6Addr::parse(const std::string& text) {
  Ipv6Addr a;
  if (inet_pton(AF_INET6, text.c_str(), a.b.data()) != 1)
    return Err::InvalidArgument;
  return a;
}

std::string Ipv6Addr::str() const {
  char buf[INET6_ADDRSTRLEN];
  if (!inet_ntop(AF_INET6, b.data(), buf, sizeof buf)) return "?";
  return buf;
}

int common_prefix_len(const Ipv6Addr& a, const Ipv6Addr& b) {
  int n = 0;
  for (int i = 0; i < 16; i++) {
    uint8_t x = a.b[i] ^ b.b[i];
    if (x == 0) {
      n += 8;
      continue;
    }
    while (!(x & 0x80)) {
      n++;
      x = static_cast<uint8_t>(x << 1);
    }
    return n;
  }
  return n;
}

bool prefix_match(const Ipv6Addr& addr, const Ipv6Addr& prefix, uint8_t plen) {
  if (plen > 128) return false;
  size_t full = plen / 8;
  if (std::memcmp(addr.b.data(), prefix.b.data(), full) != 0) return false;
  uint8_t rem = plen % 8;
  if (rem == 0) return true;
  uint8_t mask = static_cast<uint8_t>(0xFF << (8 - rem));
  return (addr.b[full] & mask) == (prefix.b[full] & mask);
}

void ipv6_encode(std::span<uint8_t> out40, const Ipv6Header& h) {
  out40[0] = static_cast<uint8_t>((h.version << 4) | (h.traffic_class >> 4));
  out40[1] = static_cast<uint8_t>(((h.traffic_class & 0x0F) << 4) |
                                  ((h.flow_label >> 16) & 0x0F));
  out40[2] = static_cast<uint8_t>((h.flow_label >> 8) & 0xFF);
  out40[3] = static_cast<uint8_t>(h.flow_label & 0xFF);
  out40[4] = static_cast<uint8_t>(h.payload_len >> 8);
  out40[5] = static_cast<uint8_t>(h.payload_len & 0xFF);
  out40[6] = h.next_header;
  out40[7] = h.hop_limit;
  std::memcpy(&out40[8], h.src.b.data(), 16);
  std::memcpy(&out40[24], h.dst.b.data(), 16);
}

Result<Ipv6Header> ipv6_parse(std::span<const uint8_t> in) {
  if (in.size() < kIpv6HdrSize) return Err::BadLength;
  Ipv6Header h;
  h.version = in[0] >> 4;
  if (h.version != 6) return Err::Unsupported;
  h.traffic_class = static_cast<uint8_t>((in[0] << 4) | (in[1] >> 4));
  h.flow_label =
      (static_cast<uint32_t>(in[1] & 0x0F) << 16) | (in[2] << 8) | in[3];
  h.payload_len = static_cast<uint16_t>((in[4] << 8) | in[5]);
  h.next_header = in[6];
  h.hop_limit = in[7];
  std::memcpy(h.src.b.data(), &in[8], 16);
  std::memcpy(h.dst.b.data(), &in[24], 16);
  return h;
}

// -- Fib ----------------------------------------------------------------

Err Fib::add(const FibEntry& e) {
  if (e.plen > 128) return Err::InvalidArgument;
  for (const auto& x : entries_)
    if (x.plen == e.plen && x.prefix == e.prefix) return Err::DuplicateEntry;
  auto it = entries_.begin();
  while (it != entries_.end() && it->plen >= e.plen) ++it;
  entries_.insert(it, e);
  return Err::None;
}

Err Fib::remove(const Ipv6Addr& prefix, uint8_t plen) {
  for (auto it = entries_.begin(); it != entries_.end(); ++it) {
    if (it->plen == plen && it->prefix == prefix) {
      entries_.erase(it);
      return Err::None;
    }
  }
  return Err::NotFound;
}

Result<FibEntry> Fib::lookup(const Ipv6Addr& dst) const {
  if (meter_) meter_->fib_lookup();
  for (const auto& e : entries_)
    if (prefix_match(dst, e.prefix, e.plen)) return e;
  return Err::NoRoute;
}

// -- NeighborCache ------------------------------------------------------

Err NeighborCache::add(const NeighborEntry& e) {
  for (const auto& x : entries_)
    if (x.ip == e.ip) return Err::DuplicateEntry;
  entries_.push_back(e);
  return Err::None;
}

Err NeighborCache::remove(const Ipv6Addr& ip) {
  for (auto it = entries_.begin(); it != entries_.end(); ++it) {
    if (it->ip == ip) {
      entries_.erase(it);
      return Err::None;
    }
  }
  return Err::NotFound;
}

Result<NeighborEntry> NeighborCache::lookup(const Ipv6Addr& ip) const {
  if (meter_) meter_->neighbor_op();
  for (const auto& e : entries_)
    if (e.ip == ip) return e;
  return Err::NeighborUnresolved;
}

Err NeighborCache::touch(const Ipv6Addr& ip) {
  if (meter_) meter_->neighbor_op();
  for (const auto& e : entries_)
    if (e.ip == ip) return Err::None;
  return Err::NotFound;
}

// -- Ipv6Module ----------------------------------------------------------

Ipv6Module::Ipv6Module(Stack& stack)
    : stack_(stack), fib_(&stack.meter()), neigh_(&stack.meter()) {}

void Ipv6Module::on_msg(const NetMsg& m) {
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

Result<Ipv6Addr> Ipv6Module::select_source(const Ipv6Addr& dst) const {
  if (stack_.is_local_addr(dst)) return dst;
  auto route = fib_.lookup(dst);
  if (!route) return route.error();
  const auto& cands = stack_.if_addresses(route->if_index);
  if (cands.empty()) return Err::NotFound;
  const Ipv6Addr* best = &cands[0];
  int best_len = common_prefix_len(cands[0], dst);
  for (size_t i = 1; i < cands.size(); i++) {
    int l = common_prefix_len(cands[i], dst);
    if (l > best_len) {
      best = &cands[i];
      best_len = l;
    }
  }
  return *best;
}

// Send side entry: the head snip is a bare 40-byte header. Completes the
// length, hop limit and (if needed) source and transport checksum fields,
// then resolves and hands down. New datagrams and forwarded ones share
// send_datagram, so both cost exactly one route lookup.
void Ipv6Module::handle_snd(const NetMsg& m) {
  PktBuf& buf = stack_.buf();
  auto hw = buf.start_write(m.pkt);
  if (!hw) {
    buf.release(m.pkt);
    return;
  }
  SnipHandle h = *hw;

  auto t = buf.type(h);
  auto sz = buf.size(h);
  if (!t || *t != NetType::Ipv6 || !sz || *sz != kIpv6HdrSize) {
    stack_.stats().bad_length++;
    buf.release(h);
    return;
  }
  auto bytes = buf.data(h);
  auto hdr = ipv6_parse(*bytes);
  if (!hdr) {
    stack_.stats().bad_length++;
    buf.release(h);
    return;
  }

  size_t plen = buf.chain_size(*buf.next(h));
  if (plen > 0xFFFF) {
    stack_.stats().bad_length++;
    buf.release(h);
    return;
  }
  (*bytes)[4] = static_cast<uint8_t>(plen >> 8);
  (*bytes)[5] = static_cast<uint8_t>(plen & 0xFF);
  if (hdr->hop_limit == 0) (*bytes)[7] = hop_limit_;

  Err e = send_datagram(h);
  if (e == Err::NoRoute) stack_.stats().no_route_drops++;
  if (e == Err::NeighborUnresolved) stack_.stats().neighbor_drops++;
}

// Resolution and handoff for a complete datagram chain (header fields
// already valid except possibly source and transport checksum). Consumes
// `pkt`. Local destinations take the loopback path: the chain is flattened
// into a fresh single snip and re-enters the module as received.
Err Ipv6Module::send_datagram(SnipHandle pkt) {
  PktBuf& buf = stack_.buf();
  auto bytes = buf.data(pkt);
  auto hdr = ipv6_parse(*bytes);
  if (!hdr) {
    buf.release(pkt);
    return Err::BadLength;
  }

  if (hdr->dst.is_loopback() || stack_.is_local_addr(hdr->dst)) {
    if (hdr->src.is_unspecified()) {
      std::memcpy(&(*bytes)[8], hdr->dst.b.data(), 16);
      hdr->src = hdr->dst;
    }
    fill_udp_checksum(pkt, *hdr);
    std::vector<uint8_t> flat = buf.read_all(pkt);
    buf.release(pkt);
    auto again = buf.add(kNullSnip, flat, NetType::Ipv6);
    if (!again) return Err::OutOfMemory;
    stack_.dispatch(NetType::Ipv6, kDemuxAll, MsgKind::Rcv, *again);
    return Err::None;
  }

  uint8_t if_index = 0;
  uint16_t l2_dst = 0;
  if (hdr->dst.is_multicast()) {
    if (stack_.interface_count() == 0) {
      buf.release(pkt);
      return Err::NoRoute;
    }
    if_index = 1;
    l2_dst = ieee802154::kBroadcast;
    if (hdr->src.is_unspecified()) {
      const auto& cands = stack_.if_addresses(if_index);
      if (!cands.empty()) {
        std::memcpy(&(*bytes)[8], cands[0].b.data(), 16);
        hdr->src = cands[0];
      }
    }
  } else {
    auto route = fib_.lookup(hdr->dst);
    if (!route) {
      buf.release(pkt);
      return Err::NoRoute;
    }
    if_index = route->if_index;
    if (hdr->src.is_unspecified()) {
      const auto& cands = stack_.if_addresses(if_index);
      if (cands.empty()) {
        buf.release(pkt);
        return Err::NotFound;
      }
      const Ipv6Addr* best = &cands[0];
      int best_len = common_prefix_len(cands[0], hdr->dst);
      for (size_t i = 1; i < cands.size(); i++) {
        int l = common_prefix_len(cands[i], hdr->dst);
        if (l > best_len) {
          best = &cands[i];
          best_len = l;
        }
      }
      std::memcpy(&(*bytes)[8], best->b.data(), 16);
      hdr->src = *best;
    }
    Ipv6Addr next_hop =
        route->next_hop.is_unspecified() ? hdr->dst : route->next_hop;
    auto nb = neigh_.lookup(next_hop);
    if (!nb) {
      buf.release(pkt);
      return Err::NeighborUnresolved;
    }
    neigh_.touch(next_hop);
    l2_dst = nb->l2;
  }

  fill_udp_checksum(pkt, *hdr);

  NetifHeaderData info;
  info.dst = l2_dst;
  info.if_index = if_index;
  info.flags =
      l2_dst == ieee802154::kBroadcast ? NetifHeaderData::kFlagBroadcast : 0;
  uint8_t info_bytes[sizeof info];
  info.store(info_bytes);
  auto head = buf.add(pkt, info_bytes, NetType::Netif);
  if (!head) {
    buf.release(pkt);
    return Err::OutOfMemory;
  }
  stack_.dispatch(NetType::Sixlowpan, kDemuxAll, MsgKind::Snd, *head);
  return Err::None;
}

// A zero transport checksum on the way out means "not yet computed": UDP
// checksums cover the source address, which may only just have been
// selected. Covers the standard header-snip-then-payload send layout.
void Ipv6Module::fill_udp_checksum(SnipHandle pkt, const Ipv6Header& hdr) {
  if (hdr.next_header != kProtoUdp) return;
  PktBuf& buf = stack_.buf();
  SnipHandle us = *buf.next(pkt);
  if (us == kNullSnip) return;
  if (*buf.type(us) != NetType::Udp) return;
  auto ub = buf.data(us);
  if (!ub || ub->size() < kUdpHdrSize) return;
  if ((*ub)[6] != 0 || (*ub)[7] != 0) return;

  OnesComplementSum s;
  s.add(hdr.src.b);
  s.add(hdr.dst.b);
  uint32_t l4len = static_cast<uint32_t>(buf.chain_size(us));
  s.add_word(static_cast<uint16_t>(l4len >> 16));
  s.add_word(static_cast<uint16_t>(l4len & 0xFFFF));
  s.add_word(0);
  s.add_word(kProtoUdp);
  for (SnipHandle t = us; t != kNullSnip; t = *buf.next(t)) s.add(*buf.cdata(t));
  uint16_t c = s.result();
  if (c == 0) c = 0xFFFF;
  (*ub)[6] = static_cast<uint8_t>(c >> 8);
  (*ub)[7] = static_cast<uint8_t>(c & 0xFF);
}

// Receive side entry: the head snip is one contiguous datagram as
// reassembled or decapsulated below us.
void Ipv6Module::handle_rcv(const NetMsg& m) {
  PktBuf& buf = stack_.buf();
  auto hw = buf.start_write(m.pkt);
  if (!hw) {
    buf.release(m.pkt);
    return;
  }
  SnipHandle h = *hw;

  auto bytes = buf.cdata(h);
  if (!bytes) {
    buf.release(h);
    return;
  }
  auto hdr = ipv6_parse(*bytes);
  if (!hdr || bytes->size() != kIpv6HdrSize + hdr->payload_len) {
    stack_.stats().bad_length++;
    buf.release(h);
    return;
  }

  if (hdr->dst.is_multicast() || stack_.is_local_addr(hdr->dst)) {
    deliver_local(h, *hdr);
  } else {
    forward(h, *hdr);
  }
}

void Ipv6Module::deliver_local(SnipHandle pkt, const Ipv6Header& h) {
  PktBuf& buf = stack_.buf();
  stack_.stats().delivered_local++;

  NetType up_type =
      h.next_header == kProtoUdp ? NetType::Udp : NetType::Undef;
  SnipHandle up = pkt;
  if (h.payload_len > 0) {
    auto rest = buf.split_front(pkt, kIpv6HdrSize, NetType::Ipv6);
    if (!rest) {
      buf.release(pkt);
      return;
    }
    buf.set_type(*rest, up_type);
    up = *rest;
  } else {
    auto empty = buf.add(pkt, {}, up_type);
    if (!empty) {
      buf.release(pkt);
      return;
    }
    up = *empty;
  }

  if (h.next_header == kProtoUdp) {
    // Two demux spaces see UDP datagrams: the transport module and any raw
    // sockets bound to the protocol number.
    if (buf.hold(up) != Err::None) {
      stack_.dispatch(NetType::Udp, kDemuxAll, MsgKind::Rcv, up);
      return;
    }
    stack_.dispatch(NetType::Udp, kDemuxAll, MsgKind::Rcv, up);
    stack_.dispatch(NetType::Raw, h.next_header, MsgKind::Rcv, up);
  } else {
    stack_.dispatch(NetType::Raw, h.next_header, MsgKind::Rcv, up);
  }
}

void Ipv6Module::forward(SnipHandle pkt, const Ipv6Header& h) {
  PktBuf& buf = stack_.buf();
  if (!forwarding_) {
    stack_.stats().not_forwarded++;
    buf.release(pkt);
    return;
  }
  if (h.hop_limit <= 1) {
    stack_.stats().hop_limit_drops++;
    buf.release(pkt);
    return;
  }
  auto bytes = buf.data(pkt);
  (*bytes)[7] = static_cast<uint8_t>(h.hop_limit - 1);

  // Strip the receive-side sections (adaptation header, link metadata)
  // before the datagram goes back down.
  SnipHandle tail = *buf.next(pkt);
  buf.set_next(pkt, kNullSnip);
  if (tail != kNullSnip) buf.release(tail);

  Err e = send_datagram(pkt);
  if (e == Err::None)
    stack_.stats().forwarded++;
  else if (e == Err::NoRoute)
    stack_.stats().no_route_drops++;
  else if (e == Err::NeighborUnresolved)
    stack_.stats().neighbor_drops++;
}

void Ipv6Module::handle_opt(const NetMsg& m) {
  OptionRequest* req = m.req;
  if (!req) {
    stack_.reply_ack(m, ack_error(Err::InvalidArgument));
    return;
  }
  switch (req->opt) {
    case NetOpt::Ipv6Route: {
      if (m.kind != MsgKind::Set || req->len < sizeof(Ipv6RouteOpt)) {
        stack_.reply_ack(m, ack_error(Err::Unsupported));
        return;
      }
      Ipv6RouteOpt o;
      std::memcpy(&o, req->data, sizeof o);
      Err e = fib_.add({o.prefix, o.plen, o.next_hop, o.if_index});
      stack_.reply_ack(m, e == Err::None ? static_cast<AckStatus>(sizeof o)
                                         : ack_error(e));
      return;
    }
    case NetOpt::Ipv6Neighbor: {
      if (m.kind != MsgKind::Set || req->len < sizeof(Ipv6NeighborOpt)) {
        stack_.reply_ack(m, ack_error(Err::Unsupported));
        return;
      }
      Ipv6NeighborOpt o;
      std::memcpy(&o, req->data, sizeof o);
      Err e = neigh_.add({o.ip, o.l2, o.if_index});
      stack_.reply_ack(m, e == Err::None ? static_cast<AckStatus>(sizeof o)
                                         : ack_error(e));
      return;
    }
    case NetOpt::Ipv6Address: {
      if (m.kind != MsgKind::Set || req->len < sizeof(Ipv6AddressOpt)) {
        stack_.reply_ack(m, ack_error(Err::Unsupported));
        return;
      }
      Ipv6AddressOpt o;
      std::memcpy(&o, req->data, sizeof o);
      Err e = stack_.if_add_address(o.if_index, o.addr);
      stack_.reply_ack(m, e == Err::None ? static_cast<AckStatus>(sizeof o)
                                         : ack_error(e));
      return;
    }
    case NetOpt::HopLimit: {
      if (req->len < 1) {
        stack_.reply_ack(m, ack_error(Err::BufferTooSmall));
        return;
      }
      if (m.kind == MsgKind::Get) {
        *static_cast<uint8_t*>(req->data) = hop_limit_;
      } else {
        hop_limit_ = *static_cast<const uint8_t*>(req->data);
      }
      stack_.reply_ack(m, 1);
      return;
    }
    default:
      stack_.reply_ack(m, ack_error(Err::Unsupported));
      return;
  }
}

}  // namespace unet
