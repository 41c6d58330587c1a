// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <cstring>
#include <deque>
#include <span>
#include <vector>

#include "unet/ieee802154.hpp"
#include "unet/netdev.hpp"
#include "unet/result.hpp"
#include "unet/sched.hpp"
#include "unet/types.hpp"

namespace unet {

// Link metadata snip contents, exchanged between the interface and the
// layers above it. On receive it describes where a frame came from; on
// send the upper layer fills in where it should go. Fixed 8-byte layout so
// it round-trips through a snip by memcpy.
struct NetifHeaderData {
  uint16_t src = 0;
  uint16_t dst = 0;
  uint8_t if_index = 0;
  uint8_t flags = 0;  // kFlagBroadcast
  uint8_t lqi = 0;
  int8_t rssi = 0;

  static constexpr uint8_t kFlagBroadcast = 0x01;

  void store(std::span<uint8_t> out) const {
    std::memcpy(out.data(), this, sizeof *this);
  }
  static NetifHeaderData load(std::span<const uint8_t> in) {
    NetifHeaderData d;
    std::memcpy(&d, in.data(), sizeof d);
    return d;
  }
};
static_assert(sizeof(NetifHeaderData) == 8);

struct NetifConfig {
  uint16_t l2_addr = 0;
  uint16_t pan = ieee802154::kDefaultPan;
};

class Stack;

// One network interface: the endpoint that owns a device. Downward it
// serializes packet chains into frames and paces them through the device,
// queueing while the device is busy. Upward it turns received frames into
// [payload] -> [link metadata] chains and dispatches them to the
// adaptation layer.
class NetifEndpoint : public Endpoint {
 public:
  static constexpr size_t kPendingCap = 16;

  NetifEndpoint(Stack& stack, Device& dev, NetifConfig cfg);

  // Registers with the scheduler/registry and brings the device up.
  Err init(uint8_t if_index);

  void on_msg(const NetMsg& m) override;

  uint8_t if_index() const { return if_index_; }
  uint16_t l2_addr() const { return l2_addr_; }
  size_t max_pdu() const { return max_pdu_; }
  const NetStats& stats() const { return stats_; }
  uint64_t tx_failures() const { return tx_failures_; }
  uint64_t queue_drops() const { return queue_drops_; }

 private:
  void handle_snd(const NetMsg& m);
  void handle_opt(const NetMsg& m);
  void on_device_event(DevEvent e);
  void pump_tx();
  void drain_rx();

  Stack& stack_;
  Device& dev_;
  NetifConfig cfg_;
  uint8_t if_index_ = 0;
  uint16_t l2_addr_ = 0;
  size_t max_pdu_ = 0;
  uint8_t tx_seq_ = 0;
  bool tx_in_flight_ = false;
  bool isr_pending_ = false;
  std::deque<std::vector<uint8_t>> pending_;  // serialized frames, FIFO
  NetStats stats_;
  uint64_t tx_failures_ = 0;
  uint64_t queue_drops_ = 0;
};

}  // namespace unet
