// SPDX-License-Identifier: Apache-2.0

#include "unet/netif.hpp"

#include "unet/stack.hpp"

namespace unet {

NetifEndpoint::NetifEndpoint(Stack& stack, Device& dev, NetifConfig cfg)
    : stack_(stack), dev_(dev), cfg_(cfg) {}

Err NetifEndpoint::init(uint8_t if_index) {
  if_index_ = if_index;

  // The device signals from wherever its events originate; all we do there
  // is arrange for isr() to run in our own context, coalescing repeated
  // signals into one pending task.
  dev_.set_isr_notify([this] {
    if (isr_pending_) return;
    isr_pending_ = true;
    stack_.sched().post_task([this] {
      isr_pending_ = false;
      dev_.isr();
    });
  });
  dev_.set_event_handler([this](DevEvent e) { on_device_event(e); });

  if (Err e = dev_.init(); e != Err::None) return e;

  if (cfg_.l2_addr != 0) {
    uint8_t a[2] = {static_cast<uint8_t>(cfg_.l2_addr & 0xFF),
                    static_cast<uint8_t>(cfg_.l2_addr >> 8)};
    if (Err e = dev_.set(NetOpt::Address, a); e != Err::None) return e;
  }
  uint8_t buf[2];
  auto got = dev_.get(NetOpt::Address, buf);
  if (!got) return got.error();
  l2_addr_ = static_cast<uint16_t>(buf[0] | (buf[1] << 8));
  got = dev_.get(NetOpt::MaxPduSize, buf);
  if (!got) return got.error();
  max_pdu_ = static_cast<size_t>(buf[0] | (buf[1] << 8));

  return stack_.reg().register_entry(
      {NetType::Netif, if_index_, id()});
}

void NetifEndpoint::on_msg(const NetMsg& m) {
  switch (m.kind) {
    case MsgKind::Snd:
      handle_snd(m);
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

void NetifEndpoint::handle_snd(const NetMsg& m) {
  PktBuf& buf = stack_.buf();
  auto info_type = buf.type(m.pkt);
  auto info_size = buf.size(m.pkt);
  if (!info_type || *info_type != NetType::Netif || !info_size ||
      *info_size != sizeof(NetifHeaderData)) {
    stats_.drops++;
    buf.release(m.pkt);
    return;
  }
  auto info_bytes = buf.cdata(m.pkt);
  NetifHeaderData info = NetifHeaderData::load(*info_bytes);

  SnipHandle body = *buf.next(m.pkt);
  size_t payload_len = buf.chain_size(body);
  if (payload_len == 0 || payload_len > max_pdu_) {
    stats_.drops++;
    buf.release(m.pkt);
    return;
  }

  ieee802154::Mhr mhr;
  mhr.fcf = info.dst == ieee802154::kBroadcast ? ieee802154::kFcfData
                                               : ieee802154::kFcfDataAckReq;
  mhr.seq = tx_seq_++;
  mhr.pan = cfg_.pan;
  mhr.dst = info.dst;
  mhr.src = l2_addr_;

  std::vector<uint8_t> frame(ieee802154::kMhrSize + payload_len);
  ieee802154::encode_mhr(frame, mhr);
  stack_.meter().bytes(ieee802154::kMhrSize);
  buf.read_range(body, 0, std::span(frame).subspan(ieee802154::kMhrSize));
  buf.release(m.pkt);

  if (pending_.size() >= kPendingCap) {
    queue_drops_++;
    stats_.drops++;
    return;
  }
  pending_.push_back(std::move(frame));
  pump_tx();
}

void NetifEndpoint::pump_tx() {
  while (!tx_in_flight_ && !pending_.empty()) {
    auto sent = dev_.send(pending_.front());
    if (sent) {
      tx_in_flight_ = true;
      pending_.pop_front();
      stats_.out_pkts++;
      return;
    }
    if (sent.error() == Err::DeviceBusy) return;  // retried on TxComplete
    tx_failures_++;
    stats_.drops++;
    pending_.pop_front();
  }
}

void NetifEndpoint::on_device_event(DevEvent e) {
  switch (e) {
    case DevEvent::TxComplete:
      tx_in_flight_ = false;
      pump_tx();
      break;
    case DevEvent::TxFailed:
      tx_in_flight_ = false;
      tx_failures_++;
      stats_.drops++;
      pump_tx();
      break;
    case DevEvent::RxComplete:
      drain_rx();
      break;
  }
}

void NetifEndpoint::drain_rx() {
  PktBuf& buf = stack_.buf();
  for (;;) {
    auto size = dev_.recv({});
    if (!size) return;
    std::vector<uint8_t> frame(*size);
    auto got = dev_.recv(frame);
    if (!got) return;

    auto mhr = ieee802154::parse_mhr(frame);
    if (!mhr || mhr->pan != cfg_.pan ||
        !(mhr->dst == l2_addr_ || mhr->dst == ieee802154::kBroadcast) ||
        frame.size() <= ieee802154::kMhrSize) {
      stats_.drops++;
      continue;
    }

    RxInfo ri = dev_.rx_info();
    NetifHeaderData info;
    info.src = mhr->src;
    info.dst = mhr->dst;
    info.if_index = if_index_;
    info.flags = mhr->dst == ieee802154::kBroadcast
                     ? NetifHeaderData::kFlagBroadcast
                     : 0;
    info.lqi = ri.lqi;
    info.rssi = ri.rssi;

    uint8_t info_bytes[sizeof info];
    info.store(info_bytes);
    auto meta = buf.add(kNullSnip, info_bytes, NetType::Netif);
    if (!meta) {
      stats_.drops++;
      continue;
    }
    auto payload = buf.add(
        *meta, std::span(frame).subspan(ieee802154::kMhrSize),
        NetType::Sixlowpan);
    if (!payload) {
      buf.release(*meta);
      stats_.drops++;
      continue;
    }
    stats_.in_pkts++;
    stack_.dispatch(NetType::Sixlowpan, kDemuxAll, MsgKind::Rcv, *payload);
  }
}

void NetifEndpoint::handle_opt(const NetMsg& m) {
  OptionRequest* req = m.req;
  if (!req) {
    stack_.reply_ack(m, ack_error(Err::InvalidArgument));
    return;
  }
  if (req->opt == NetOpt::Stats) {
    if (m.kind != MsgKind::Get || req->len < sizeof(NetStats)) {
      stack_.reply_ack(m, ack_error(Err::BufferTooSmall));
      return;
    }
    std::memcpy(req->data, &stats_, sizeof stats_);
    stack_.reply_ack(m, static_cast<AckStatus>(sizeof stats_));
    return;
  }
  // Everything else is the device's business.
  if (m.kind == MsgKind::Get) {
    auto n = dev_.get(req->opt,
                      std::span(static_cast<uint8_t*>(req->data), req->len));
    stack_.reply_ack(m, n ? static_cast<AckStatus>(*n) : ack_error(n.error()));
  } else {
    Err e = dev_.set(req->opt, std::span(static_cast<const uint8_t*>(req->data),
                                         req->len));
    if (e == Err::None && req->opt == NetOpt::Address) {
      uint8_t buf2[2];
      if (dev_.get(NetOpt::Address, buf2))
        l2_addr_ = static_cast<uint16_t>(buf2[0] | (buf2[1] << 8));
    }
    stack_.reply_ack(m, e == Err::None ? static_cast<AckStatus>(req->len)
                                       : ack_error(e));
  }
}

}  // namespace unet
