// SPDX-License-Identifier: Apache-2.0

#include "unet/devices.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <sstream>

namespace unet {

const char* devevent_name(DevEvent e) {
  switch (e) {
    case DevEvent::RxComplete: return "rx-complete";
    case DevEvent::TxComplete: return "tx-complete";
    case DevEvent::TxFailed: return "tx-failed";
  }
  return "?";
}

// -- ShortAddrDevice ---------------------------------------------------------

Result<size_t> ShortAddrDevice::recv(std::span<uint8_t> out) {
  if (rx_.empty()) return Err::NoPendingFrame;
  RxFrame& f = rx_.front();
  if (out.empty()) return f.bytes.size();
  if (out.size() < f.bytes.size()) return Err::BufferTooSmall;
  size_t n = f.bytes.size();
  std::memcpy(out.data(), f.bytes.data(), n);
  last_info_ = f.info;
  rx_.pop_front();
  return n;
}

namespace {
Result<size_t> put_u16(std::span<uint8_t> out, uint16_t v) {
  if (out.size() < 2) return Err::BufferTooSmall;
  out[0] = static_cast<uint8_t>(v & 0xFF);
  out[1] = static_cast<uint8_t>(v >> 8);
  return size_t{2};
}
}  // namespace

Result<size_t> ShortAddrDevice::get(NetOpt opt, std::span<uint8_t> out) {
  switch (opt) {
    case NetOpt::Address: return put_u16(out, addr_);
    case NetOpt::AddrLen: return put_u16(out, 2);
    case NetOpt::MaxPduSize:
      return put_u16(out, static_cast<uint16_t>(ieee802154::kMaxPayload));
    case NetOpt::DeviceType: return put_u16(out, kDeviceTypeIeee802154);
    default: return Err::Unsupported;
  }
}

Err ShortAddrDevice::set(NetOpt opt, std::span<const uint8_t> in) {
  if (opt == NetOpt::Address) {
    if (in.size() != 2) return Err::InvalidArgument;
    addr_ = static_cast<uint16_t>(in[0] | (in[1] << 8));
    return Err::None;
  }
  return Err::Unsupported;
}

bool ShortAddrDevice::push_rx(RxFrame f) {
  if (rx_.size() >= kRxFifoCap) {
    rx_overflow_drops_++;
    return false;
  }
  rx_.push_back(std::move(f));
  return true;
}

// -- ReflectorDevice ---------------------------------------------------------

Err ReflectorDevice::init() { return Err::None; }

Result<size_t> ReflectorDevice::send(std::span<const uint8_t> frame) {
  if (frame.size() + ieee802154::kFcsSize > ieee802154::kMaxPhyFrame)
    return Err::FrameTooLarge;
  if (tx_busy_) return Err::DeviceBusy;
  auto h = ieee802154::parse_mhr(frame);
  if (!h) return h.error();

  RxFrame echo;
  echo.bytes.assign(frame.begin(), frame.end());
  if (h->dst != ieee802154::kBroadcast) {
    // Bounce it back as if the destination had answered in kind.
    std::swap(echo.bytes[5], echo.bytes[7]);
    std::swap(echo.bytes[6], echo.bytes[8]);
  }
  auto back = ieee802154::parse_mhr(echo.bytes);
  if (addressed_to_us(back->dst)) push_rx(std::move(echo));

  tx_busy_ = true;
  pend_tx_done_ = true;
  notify_isr();
  return frame.size();
}

void ReflectorDevice::isr() {
  if (pend_tx_done_) {
    pend_tx_done_ = false;
    tx_busy_ = false;
    emit(DevEvent::TxComplete);
  }
  if (!rx_.empty()) emit(DevEvent::RxComplete);
}

// -- PipeDevice --------------------------------------------------------------

Err PipeDevice::init() { return peer_ ? Err::None : Err::NotInitialized; }

Result<size_t> PipeDevice::send(std::span<const uint8_t> frame) {
  if (!peer_) return Err::NotInitialized;
  if (frame.size() + ieee802154::kFcsSize > ieee802154::kMaxPhyFrame)
    return Err::FrameTooLarge;
  if (tx_busy_) return Err::DeviceBusy;
  auto h = ieee802154::parse_mhr(frame);
  if (!h) return h.error();

  if (peer_->addressed_to_us(h->dst)) {
    RxFrame f;
    f.bytes.assign(frame.begin(), frame.end());
    peer_->push_rx(std::move(f));
    peer_->notify_isr();
  } else {
    filtered_drops_++;
  }

  tx_busy_ = true;
  pend_tx_done_ = true;
  notify_isr();
  return frame.size();
}

void PipeDevice::isr() {
  if (pend_tx_done_) {
    pend_tx_done_ = false;
    tx_busy_ = false;
    emit(DevEvent::TxComplete);
  }
  if (!rx_.empty()) emit(DevEvent::RxComplete);
}

// -- MediumParams ------------------------------------------------------------

namespace {

std::string trim(std::string s) {
  size_t a = s.find_first_not_of(" \t\r");
  size_t b = s.find_last_not_of(" \t\r");
  return a == std::string::npos ? "" : s.substr(a, b - a + 1);
}

bool parse_bool(const std::string& v, bool* out) {
  if (v == "1" || v == "true" || v == "yes" || v == "on") {
    *out = true;
    return true;
  }
  if (v == "0" || v == "false" || v == "no" || v == "off") {
    *out = false;
    return true;
  }
  return false;
}

template <typename T>
bool parse_uint(const std::string& v, T* out, uint64_t max) {
  try {
    size_t pos = 0;
    uint64_t x = std::stoull(v, &pos, 0);
    if (pos != v.size() || x > max) return false;
    *out = static_cast<T>(x);
    return true;
  } catch (...) {
    return false;
  }
}

}  // namespace

Result<MediumParams> parse_medium_params(const std::string& text) {
  MediumParams p;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (size_t hash = line.find('#'); hash != std::string::npos)
      line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    size_t eq = line.find('=');
    if (eq == std::string::npos) return Err::InvalidArgument;
    std::string key = trim(line.substr(0, eq));
    std::string val = trim(line.substr(eq + 1));
    bool ok = false;
    if (key == "symbol_ns") {
      ok = parse_uint(val, &p.symbol_ns, UINT64_MAX) && p.symbol_ns > 0;
    } else if (key == "loss") {
      try {
        size_t pos = 0;
        p.loss = std::stod(val, &pos);
        ok = pos == val.size() && p.loss >= 0.0 && p.loss <= 1.0;
      } catch (...) {
      }
    } else if (key == "csma") {
      ok = parse_bool(val, &p.csma);
    } else if (key == "ack") {
      ok = parse_bool(val, &p.ack);
    } else if (key == "seed") {
      ok = parse_uint(val, &p.seed, UINT32_MAX);
    } else if (key == "min_be") {
      ok = parse_uint(val, &p.min_be, 8);
    } else if (key == "max_be") {
      ok = parse_uint(val, &p.max_be, 8);
    } else if (key == "max_backoffs") {
      ok = parse_uint(val, &p.max_backoffs, 16);
    } else if (key == "max_retries") {
      ok = parse_uint(val, &p.max_retries, 16);
    } else {
      return Err::InvalidArgument;
    }
    if (!ok) return Err::InvalidArgument;
  }
  if (p.min_be > p.max_be) return Err::InvalidArgument;
  return p;
}

// -- Medium ------------------------------------------------------------------

Medium::Medium(Scheduler& sched, MediumParams p)
    : sched_(sched), p_(p), rng_(p.seed) {
  double loss = std::clamp(p_.loss, 0.0, 1.0);
  loss_threshold_ = static_cast<uint64_t>(loss * 4294967296.0);
}

void Medium::attach(MediumDevice* dev) { nodes_.push_back(dev); }

bool Medium::draw_loss() {
  if (loss_threshold_ == 0) return false;
  bool lost = static_cast<uint64_t>(rng_()) < loss_threshold_;
  if (lost) losses_++;
  return lost;
}

RxInfo Medium::draw_rx_info() {
  RxInfo info;
  info.lqi = static_cast<uint8_t>(160 + rng_() % 96);
  info.rssi = static_cast<int8_t>(-90 + static_cast<int>(rng_() % 61));
  return info;
}

void Medium::start_tx(MediumDevice* src) {
  if (!p_.csma) {
    // Perfectly scheduled channel: wait out any current transmission, then
    // go. Zero extra cost on an idle channel.
    uint64_t at = std::max(sched_.now(), busy_until_);
    sched_.schedule_at(at, [this, src] { transmit(src); });
    return;
  }
  uint64_t units = rng_() % (1u << src->tx_->be);
  uint64_t delay = sym_ns(units * phy154::kBackoffUnitSymbols);
  sched_.schedule_after(delay, [this, src] { attempt_tx(src); });
}

void Medium::attempt_tx(MediumDevice* src) {
  MediumDevice::Tx& tx = *src->tx_;
  if (busy_until_ > sched_.now()) {
    tx.nb++;
    tx.be = std::min<uint8_t>(tx.be + 1, p_.max_be);
    if (tx.nb > p_.max_backoffs) {
      cca_failures_++;
      src->tx_.reset();
      src->pend_tx_fail_ = true;
      src->notify_isr();
      return;
    }
    uint64_t units = rng_() % (1u << tx.be);
    uint64_t delay = sym_ns(units * phy154::kBackoffUnitSymbols);
    sched_.schedule_after(delay, [this, src] { attempt_tx(src); });
    return;
  }
  // Clear channel assessment itself takes air time.
  sched_.schedule_after(sym_ns(phy154::kCcaSymbols),
                        [this, src] { transmit(src); });
}

void Medium::transmit(MediumDevice* src) {
  MediumDevice::Tx& tx = *src->tx_;
  if (p_.csma && busy_until_ > sched_.now()) {
    // Someone grabbed the channel during our CCA window; treat it as a busy
    // assessment rather than modeling a corrupted overlap.
    attempt_tx(src);
    return;
  }
  uint64_t mpdu = tx.frame.size() + ieee802154::kFcsSize;
  uint64_t tx_end = sched_.now() + sym_ns(phy154::airtime_symbols(mpdu));
  busy_until_ = std::max(busy_until_, tx_end);
  frames_on_air_++;

  sched_.schedule_at(tx_end, [this, src] {
    MediumDevice::Tx& t = *src->tx_;
    auto h = ieee802154::parse_mhr(t.frame);
    bool delivered_to_dst = false;
    for (MediumDevice* node : nodes_) {
      if (node == src || !node->addressed_to_us(t.dst)) continue;
      if (draw_loss()) continue;
      RxFrame f;
      f.bytes = t.frame;
      f.info = draw_rx_info();
      node->deliver(std::move(f), h->src, h->seq);
      deliveries_++;
      if (node->addr() == t.dst) delivered_to_dst = true;
    }
    finish_tx(src, sched_.now(), delivered_to_dst);
  });
}

void Medium::finish_tx(MediumDevice* src, uint64_t tx_end, bool delivered_to_dst) {
  MediumDevice::Tx& tx = *src->tx_;
  uint64_t mpdu = tx.frame.size() + ieee802154::kFcsSize;
  uint64_t ifs = sym_ns(phy154::ifs_symbols(mpdu));

  if (!tx.want_ack) {
    sched_.schedule_at(tx_end + ifs, [src] {
      src->tx_.reset();
      src->pend_tx_done_ = true;
      src->notify_isr();
    });
    return;
  }

  bool acked = false;
  uint64_t ack_end = 0;
  if (delivered_to_dst) {
    uint64_t ack_start = tx_end + sym_ns(phy154::kTurnaroundSymbols);
    ack_end = ack_start + sym_ns(phy154::airtime_symbols(phy154::kAckMpdu));
    busy_until_ = std::max(busy_until_, ack_end);
    acks_on_air_++;
    acked = !draw_loss();
  }

  if (acked) {
    sched_.schedule_at(ack_end + ifs, [src] {
      src->tx_.reset();
      src->pend_tx_done_ = true;
      src->notify_isr();
    });
    return;
  }

  uint64_t give_up = tx_end + sym_ns(phy154::kAckWaitSymbols);
  sched_.schedule_at(give_up, [this, src] {
    MediumDevice::Tx& t = *src->tx_;
    if (t.retries >= p_.max_retries) {
      src->tx_.reset();
      src->pend_tx_fail_ = true;
      src->notify_isr();
      return;
    }
    t.retries++;
    t.nb = 0;
    t.be = p_.min_be;
    retransmissions_++;
    start_tx(src);
  });
}

// -- MediumDevice ------------------------------------------------------------

MediumDevice::MediumDevice(Medium& medium, uint16_t addr)
    : ShortAddrDevice(addr), medium_(medium) {
  medium_.attach(this);
}

Err MediumDevice::init() { return Err::None; }

Result<size_t> MediumDevice::send(std::span<const uint8_t> frame) {
  if (frame.size() + ieee802154::kFcsSize > ieee802154::kMaxPhyFrame)
    return Err::FrameTooLarge;
  if (tx_) return Err::DeviceBusy;
  auto h = ieee802154::parse_mhr(frame);
  if (!h) return h.error();

  Tx tx;
  tx.frame.assign(frame.begin(), frame.end());
  tx.dst = h->dst;
  tx.want_ack = medium_.params().ack && h->ack_requested() &&
                h->dst != ieee802154::kBroadcast;
  tx.be = medium_.params().min_be;
  tx_ = std::move(tx);
  medium_.start_tx(this);
  return frame.size();
}

void MediumDevice::deliver(RxFrame f, uint16_t src, uint8_t seq) {
  uint32_t key = (static_cast<uint32_t>(src) << 8) | seq;
  if (key == last_seq_key_) {
    dup_drops_++;
    return;
  }
  last_seq_key_ = key;
  push_rx(std::move(f));
  notify_isr();
}

void MediumDevice::isr() {
  if (pend_tx_fail_) {
    pend_tx_fail_ = false;
    emit(DevEvent::TxFailed);
  }
  if (pend_tx_done_) {
    pend_tx_done_ = false;
    emit(DevEvent::TxComplete);
  }
  if (!rx_.empty()) emit(DevEvent::RxComplete);
}

}  // namespace unet
