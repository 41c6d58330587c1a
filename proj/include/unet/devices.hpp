// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <deque>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "unet/ieee802154.hpp"
#include "unet/netdev.hpp"
#include "unet/result.hpp"
#include "unet/sched.hpp"

namespace unet {

// PHY/MAC timing constants used by the simulated medium, all in symbol
// units (one octet is two symbols).
namespace phy154 {

constexpr uint64_t kSymbolsPerByte = 2;
constexpr uint64_t kPhyOverheadBytes = 6;  // preamble, SFD, PHR
constexpr uint64_t kSifsSymbols = 12;
constexpr uint64_t kLifsSymbols = 40;
constexpr uint64_t kSifsMaxMpdu = 18;
constexpr uint64_t kTurnaroundSymbols = 12;
constexpr uint64_t kAckWaitSymbols = 54;
constexpr uint64_t kCcaSymbols = 8;
constexpr uint64_t kBackoffUnitSymbols = 20;
constexpr uint64_t kAckMpdu = 5;  // FCF, seq, FCS

// `mpdu` includes the FCS.
constexpr uint64_t airtime_symbols(uint64_t mpdu) {
  return (kPhyOverheadBytes + mpdu) * kSymbolsPerByte;
}
constexpr uint64_t ifs_symbols(uint64_t mpdu) {
  return mpdu <= kSifsMaxMpdu ? kSifsSymbols : kLifsSymbols;
}

}  // namespace phy154

struct RxFrame {
  std::vector<uint8_t> bytes;
  RxInfo info;
};

// Shared plumbing for the virtual radios: a short address, the option
// surface every 802.15.4-shaped device answers, and a capped RX fifo.
class ShortAddrDevice : public Device {
 public:
  static constexpr size_t kRxFifoCap = 8;

  explicit ShortAddrDevice(uint16_t addr) : addr_(addr) {}

  Result<size_t> recv(std::span<uint8_t> out) override;
  Result<size_t> get(NetOpt opt, std::span<uint8_t> out) override;
  Err set(NetOpt opt, std::span<const uint8_t> in) override;
  RxInfo rx_info() const override { return last_info_; }

  uint16_t addr() const { return addr_; }
  uint16_t pan() const { return pan_; }
  uint64_t rx_overflow_drops() const { return rx_overflow_drops_; }

 protected:
  // True if a frame with this destination should reach us.
  bool addressed_to_us(uint16_t dst) const {
    return dst == addr_ || dst == ieee802154::kBroadcast;
  }
  // Enqueues or, when the fifo is full, counts a drop. Returns enqueued.
  bool push_rx(RxFrame f);

  uint16_t addr_;
  uint16_t pan_ = ieee802154::kDefaultPan;
  std::deque<RxFrame> rx_;
  RxInfo last_info_;
  uint64_t rx_overflow_drops_ = 0;
};

// Loopback at the link layer: every accepted frame is immediately echoed
// back into the RX fifo. Unicast frames come back with source and
// destination swapped, as if the addressed peer had answered with the
// same bytes; broadcast frames come back unchanged. Takes zero virtual
// time, which makes it the baseline device for cost measurements.
class ReflectorDevice : public ShortAddrDevice {
 public:
  explicit ReflectorDevice(uint16_t addr = 0xAAAA) : ShortAddrDevice(addr) {}

  Err init() override;
  Result<size_t> send(std::span<const uint8_t> frame) override;
  void isr() override;

 private:
  bool pend_tx_done_ = false;
  bool tx_busy_ = false;
};

// One end of an ideal lossless zero-delay link. Frames sent on one end
// appear in the peer's RX fifo if addressed to it (or broadcast).
class PipeDevice : public ShortAddrDevice {
 public:
  explicit PipeDevice(uint16_t addr) : ShortAddrDevice(addr) {}

  static void link(PipeDevice& a, PipeDevice& b) {
    a.peer_ = &b;
    b.peer_ = &a;
  }

  Err init() override;
  Result<size_t> send(std::span<const uint8_t> frame) override;
  void isr() override;

  uint64_t filtered_drops() const { return filtered_drops_; }

 private:
  PipeDevice* peer_ = nullptr;
  bool pend_tx_done_ = false;
  bool tx_busy_ = false;
  uint64_t filtered_drops_ = 0;
};

// Knobs for the simulated air interface. Defaults model a clean channel
// with no MAC-level reliability, where timing reduces to airtime plus the
// interframe gap and matches the closed-form rate exactly.
struct MediumParams {
  uint64_t symbol_ns = 16000;
  double loss = 0.0;        // independent per-reception loss probability
  bool csma = false;        // slotted backoff plus CCA before transmit
  bool ack = false;         // MAC acks and retransmissions for unicast
  uint32_t seed = 1;
  uint8_t min_be = 3;
  uint8_t max_be = 5;
  uint8_t max_backoffs = 4;  // CCA attempts before giving up
  uint8_t max_retries = 3;   // retransmissions after missing acks
};

// Parses "key = value" lines ('#' comments, blank lines ignored). Keys
// match the MediumParams field names. Unknown keys or bad values fail.
Result<MediumParams> parse_medium_params(const std::string& text);

class MediumDevice;

// A single shared radio channel driven by the virtual clock. Transmissions
// occupy the channel for their computed airtime; every other attached node
// then receives the frame (subject to address filter and loss draw) at the
// moment the transmission ends. All randomness comes from one seeded
// generator, so runs are reproducible bit for bit.
class Medium {
 public:
  explicit Medium(Scheduler& sched, MediumParams p = {});

  const MediumParams& params() const { return p_; }
  uint64_t sym_ns(uint64_t symbols) const { return symbols * p_.symbol_ns; }

  uint64_t frames_on_air() const { return frames_on_air_; }
  uint64_t deliveries() const { return deliveries_; }
  uint64_t losses() const { return losses_; }
  uint64_t acks_on_air() const { return acks_on_air_; }
  uint64_t retransmissions() const { return retransmissions_; }
  uint64_t cca_failures() const { return cca_failures_; }

 private:
  friend class MediumDevice;

  void attach(MediumDevice* dev);
  void start_tx(MediumDevice* src);        // begins CSMA or transmits
  void attempt_tx(MediumDevice* src);      // one CCA attempt
  void transmit(MediumDevice* src);        // puts the frame on the air
  void finish_tx(MediumDevice* src, uint64_t tx_end, bool delivered_to_dst);
  bool draw_loss();
  RxInfo draw_rx_info();

  Scheduler& sched_;
  MediumParams p_;
  std::mt19937 rng_;
  uint64_t loss_threshold_ = 0;  // rng() below this means lost
  uint64_t busy_until_ = 0;
  std::vector<MediumDevice*> nodes_;

  uint64_t frames_on_air_ = 0;
  uint64_t deliveries_ = 0;
  uint64_t losses_ = 0;
  uint64_t acks_on_air_ = 0;
  uint64_t retransmissions_ = 0;
  uint64_t cca_failures_ = 0;
};

// A node on the shared medium. send() starts the MAC procedure and
// completes asynchronously with TxComplete or TxFailed; received frames
// are announced through the usual isr path. Consecutive duplicates (same
// source and sequence number, which happens when an ack is lost and the
// frame is retransmitted) are suppressed like a real MAC would.
class MediumDevice : public ShortAddrDevice {
 public:
  MediumDevice(Medium& medium, uint16_t addr);

  Err init() override;
  Result<size_t> send(std::span<const uint8_t> frame) override;
  void isr() override;

 private:
  friend class Medium;

  struct Tx {
    std::vector<uint8_t> frame;
    uint16_t dst = 0;
    bool want_ack = false;
    uint8_t nb = 0;       // CCA attempts so far
    uint8_t be = 0;
    uint8_t retries = 0;  // retransmissions so far
  };

  void deliver(RxFrame f, uint16_t src, uint8_t seq);

  Medium& medium_;
  std::optional<Tx> tx_;
  bool pend_tx_done_ = false;
  bool pend_tx_fail_ = false;
  uint32_t last_seq_key_ = UINT32_MAX;  // (src << 8) | seq of last accepted
  uint64_t dup_drops_ = 0;
};

}  // namespace unet
