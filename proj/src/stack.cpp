// SPDX-License-Identifier: Apache-2.0

#include "unet/stack.hpp"

#include <algorithm>
#include <cstring>

namespace unet {

void AppEndpoint::on_msg(const NetMsg& m) {
  switch (m.kind) {
    case MsgKind::Ack:
      acks_.push_back(m);
      break;
    case MsgKind::Rcv:
    case MsgKind::Snd:
      inbox.push_back(m);
      break;
    default:
      if (m.pkt != kNullSnip) stack_.buf().release(m.pkt);
      break;
  }
}

bool AppEndpoint::take_ack(uint32_t token, AckStatus* status) {
  for (auto it = acks_.begin(); it != acks_.end(); ++it) {
    if (it->token == token) {
      *status = it->status;
      acks_.erase(it);
      return true;
    }
  }
  return false;
}

Stack::Stack(Config cfg) : buf_(cfg.pktbuf, &meter_), app_(*this) {
  if (cfg.sched) {
    sched_ = cfg.sched;
  } else {
    own_sched_ = std::make_unique<Scheduler>();
    sched_ = own_sched_.get();
  }
  if_addrs_.resize(1);
  if_addrs_[0].push_back(Ipv6Addr::loopback());
  adopt(&app_);
}

Stack::~Stack() {
  for (auto& n : netifs_) sched_->despawn(n->id());
  if (sixlo_) sched_->despawn(sixlo_->id());
  if (ipv6_) sched_->despawn(ipv6_->id());
  if (udp_) sched_->despawn(udp_->id());
  sched_->despawn(app_.id());
  for (auto& m : app_.inbox)
    if (m.pkt != kNullSnip) buf_.release(m.pkt);
}

EndpointId Stack::adopt(Endpoint* ep) {
  return sched_->spawn(ep, [this](const NetMsg& m) {
    if ((m.kind == MsgKind::Snd || m.kind == MsgKind::Rcv) &&
        m.pkt != kNullSnip)
      buf_.release(m.pkt);
  });
}

void Stack::add_udp() {
  if (udp_) return;
  udp_ = std::make_unique<UdpModule>(*this);
  adopt(udp_.get());
  reg_.register_entry({NetType::Udp, kDemuxAll, udp_->id()});
}

void Stack::add_ipv6() {
  if (ipv6_) return;
  ipv6_ = std::make_unique<Ipv6Module>(*this);
  adopt(ipv6_.get());
  reg_.register_entry({NetType::Ipv6, kDemuxAll, ipv6_->id()});
}

void Stack::add_sixlowpan() {
  if (sixlo_) return;
  sixlo_ = std::make_unique<SixlowpanModule>(*this);
  adopt(sixlo_.get());
  reg_.register_entry({NetType::Sixlowpan, kDemuxAll, sixlo_->id()});
}

Result<uint8_t> Stack::add_interface(Device& dev, NetifConfig cfg) {
  uint8_t idx = static_cast<uint8_t>(netifs_.size() + 1);
  auto nif = std::make_unique<NetifEndpoint>(*this, dev, cfg);
  adopt(nif.get());
  if (Err e = nif->init(idx); e != Err::None) {
    sched_->despawn(nif->id());
    return e;
  }
  netifs_.push_back(std::move(nif));
  if_addrs_.resize(netifs_.size() + 1);
  return idx;
}

NetifEndpoint* Stack::netif(uint8_t if_index) {
  if (if_index == 0 || if_index > netifs_.size()) return nullptr;
  return netifs_[if_index - 1].get();
}

EndpointId Stack::ipv6_ep() const { return ipv6_ ? ipv6_->id() : kNoEndpoint; }
EndpointId Stack::udp_ep() const { return udp_ ? udp_->id() : kNoEndpoint; }
EndpointId Stack::sixlo_ep() const {
  return sixlo_ ? sixlo_->id() : kNoEndpoint;
}

Err Stack::send_msg(EndpointId to, const NetMsg& m) {
  Err e = sched_->post(to, m);
  if (e == Err::None)
    meter_.message();
  else if (e == Err::QueueFull)
    stats_.queue_full_drops++;
  return e;
}

size_t Stack::dispatch(NetType type, uint32_t demux, MsgKind kind,
                       SnipHandle pkt, EndpointId exclude) {
  auto eps = reg_.lookup(type, demux);
  if (exclude != kNoEndpoint)
    eps.erase(std::remove(eps.begin(), eps.end(), exclude), eps.end());
  if (eps.empty()) {
    stats_.no_receiver_drops++;
    if (pkt != kNullSnip) buf_.release(pkt);
    return 0;
  }
  if (eps.size() > 1 && pkt != kNullSnip) {
    if (buf_.hold(pkt, static_cast<uint16_t>(eps.size() - 1)) != Err::None)
      eps.resize(1);
  }
  NetMsg m;
  m.kind = kind;
  m.type = type;
  m.pkt = pkt;
  size_t ok = 0;
  for (EndpointId ep : eps) {
    if (send_msg(ep, m) == Err::None) {
      ok++;
    } else if (pkt != kNullSnip) {
      buf_.release(pkt);
    }
  }
  return ok;
}

Result<size_t> Stack::get_opt(EndpointId ep, NetOpt opt, uint32_t context,
                              std::span<uint8_t> out) {
  OptionRequest req{opt, context, out.data(), out.size()};
  NetMsg m;
  m.kind = MsgKind::Get;
  m.req = &req;
  m.reply_to = app_.id();
  m.token = ++next_token_;
  if (Err e = send_msg(ep, m); e != Err::None) return e;
  AckStatus st = 0;
  uint32_t token = m.token;
  if (!pump_until([&] { return app_.take_ack(token, &st); },
                  sched_->now() + kGetSetTimeoutNs))
    return Err::Timeout;
  if (st < 0) return static_cast<Err>(-st);
  return static_cast<size_t>(st);
}

Result<size_t> Stack::set_opt(EndpointId ep, NetOpt opt, uint32_t context,
                              std::span<const uint8_t> in) {
  // data is only read by the handler for Set requests.
  OptionRequest req{opt, context,
                    const_cast<void*>(static_cast<const void*>(in.data())),
                    in.size()};
  NetMsg m;
  m.kind = MsgKind::Set;
  m.req = &req;
  m.reply_to = app_.id();
  m.token = ++next_token_;
  if (Err e = send_msg(ep, m); e != Err::None) return e;
  AckStatus st = 0;
  uint32_t token = m.token;
  if (!pump_until([&] { return app_.take_ack(token, &st); },
                  sched_->now() + kGetSetTimeoutNs))
    return Err::Timeout;
  if (st < 0) return static_cast<Err>(-st);
  return static_cast<size_t>(st);
}

void Stack::reply_ack(const NetMsg& req, AckStatus status) {
  if (req.reply_to == kNoEndpoint) return;
  NetMsg ack;
  ack.kind = MsgKind::Ack;
  ack.token = req.token;
  ack.status = status;
  send_msg(req.reply_to, ack);
}

bool Stack::pump_until(const std::function<bool()>& done,
                       uint64_t deadline_ns) {
  for (;;) {
    if (done()) return true;
    if (!sched_->step_until(deadline_ns)) break;
  }
  if (done()) return true;
  // Nothing can happen before the deadline; waiting it out just moves the
  // virtual clock.
  if (deadline_ns != UINT64_MAX) sched_->run_until(deadline_ns);
  return done();
}

Err Stack::add_address(uint8_t if_index, const Ipv6Addr& addr) {
  if (!ipv6_) return Err::NotInitialized;
  Ipv6AddressOpt o;
  o.addr = addr;
  o.if_index = if_index;
  auto r = set_opt(ipv6_->id(), NetOpt::Ipv6Address, 0,
                   {reinterpret_cast<const uint8_t*>(&o), sizeof o});
  return r ? Err::None : r.error();
}

Err Stack::add_route(const Ipv6Addr& prefix, uint8_t plen,
                     const Ipv6Addr& next_hop, uint8_t if_index) {
  if (!ipv6_) return Err::NotInitialized;
  Ipv6RouteOpt o;
  o.prefix = prefix;
  o.plen = plen;
  o.next_hop = next_hop;
  o.if_index = if_index;
  auto r = set_opt(ipv6_->id(), NetOpt::Ipv6Route, 0,
                   {reinterpret_cast<const uint8_t*>(&o), sizeof o});
  return r ? Err::None : r.error();
}

Err Stack::add_neighbor(const Ipv6Addr& ip, uint16_t l2, uint8_t if_index) {
  if (!ipv6_) return Err::NotInitialized;
  Ipv6NeighborOpt o;
  o.ip = ip;
  o.l2 = l2;
  o.if_index = if_index;
  auto r = set_opt(ipv6_->id(), NetOpt::Ipv6Neighbor, 0,
                   {reinterpret_cast<const uint8_t*>(&o), sizeof o});
  return r ? Err::None : r.error();
}

Err Stack::udp_send(const Ipv6Addr& dst, uint16_t dst_port, uint16_t src_port,
                    std::span<const uint8_t> payload) {
  if (!udp_ || !ipv6_) return Err::NotInitialized;
  if (payload.size() > kUdpMaxPayload) return Err::MessageTooLarge;
  if (dst_port == 0) return Err::InvalidArgument;

  auto src = ipv6_->select_source(dst);
  if (!src) return src.error();

  UdpHeader uh;
  uh.src_port = src_port;
  uh.dst_port = dst_port;
  uh.length = static_cast<uint16_t>(kUdpHdrSize + payload.size());
  uh.checksum = udp_checksum(*src, dst, uh, payload);

  SnipHandle pl = kNullSnip;
  if (!payload.empty()) {
    auto r = buf_.add(kNullSnip, payload, NetType::Undef);
    if (!r) return r.error();
    pl = *r;
  }
  uint8_t uhb[kUdpHdrSize];
  udp_encode(uhb, uh);
  auto us = buf_.add(pl, uhb, NetType::Udp);
  if (!us) {
    if (pl != kNullSnip) buf_.release(pl);
    return us.error();
  }
  auto hs = buf_.add_uninit(*us, kIpv6HdrSize, NetType::Ipv6);
  if (!hs) {
    buf_.release(*us);
    return hs.error();
  }
  Ipv6Header h6;
  h6.payload_len = uh.length;
  h6.next_header = kProtoUdp;
  h6.hop_limit = ipv6_->hop_limit();
  h6.src = *src;
  h6.dst = dst;
  ipv6_encode(*buf_.data(*hs), h6);

  return dispatch(NetType::Ipv6, kDemuxAll, MsgKind::Snd, *hs) > 0
             ? Err::None
             : Err::QueueFull;
}

Err Stack::raw_send(const Ipv6Addr& dst, uint8_t proto,
                    std::span<const uint8_t> payload) {
  if (!ipv6_) return Err::NotInitialized;
  if (payload.size() > 0xFFFF) return Err::MessageTooLarge;

  auto src = ipv6_->select_source(dst);
  if (!src) return src.error();

  SnipHandle pl = kNullSnip;
  if (!payload.empty()) {
    auto r = buf_.add(kNullSnip, payload, NetType::Undef);
    if (!r) return r.error();
    pl = *r;
  }
  auto hs = buf_.add_uninit(pl, kIpv6HdrSize, NetType::Ipv6);
  if (!hs) {
    if (pl != kNullSnip) buf_.release(pl);
    return hs.error();
  }
  Ipv6Header h6;
  h6.payload_len = static_cast<uint16_t>(payload.size());
  h6.next_header = proto;
  h6.hop_limit = ipv6_->hop_limit();
  h6.src = *src;
  h6.dst = dst;
  ipv6_encode(*buf_.data(*hs), h6);

  return dispatch(NetType::Ipv6, kDemuxAll, MsgKind::Snd, *hs) > 0
             ? Err::None
             : Err::QueueFull;
}

Err Stack::if_add_address(uint8_t if_index, const Ipv6Addr& addr) {
  if (if_index >= if_addrs_.size()) return Err::NotFound;
  auto& v = if_addrs_[if_index];
  if (std::find(v.begin(), v.end(), addr) != v.end())
    return Err::DuplicateEntry;
  v.push_back(addr);
  return Err::None;
}

const std::vector<Ipv6Addr>& Stack::if_addresses(uint8_t if_index) const {
  static const std::vector<Ipv6Addr> kEmpty;
  if (if_index >= if_addrs_.size()) return kEmpty;
  return if_addrs_[if_index];
}

bool Stack::is_local_addr(const Ipv6Addr& a) const {
  for (const auto& v : if_addrs_)
    for (const auto& x : v)
      if (x == a) return true;
  return false;
}

Result<uint16_t> Stack::alloc_ephemeral_port() {
  for (int i = 0; i < 65536 - 49152; i++) {
    uint16_t p = next_ephemeral_;
    next_ephemeral_ =
        next_ephemeral_ == 65535 ? 49152 : static_cast<uint16_t>(next_ephemeral_ + 1);
    if (!reg_.has_exact(NetType::Udp, p)) return p;
  }
  return Err::AddressInUse;
}

}  // namespace unet
