// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <span>

#include "unet/result.hpp"
#include "unet/types.hpp"

namespace unet {

// Device-to-driver events, reported from inside isr().
enum class DevEvent : uint8_t {
  RxComplete,  // a frame is ready, fetch it with recv()
  TxComplete,  // last send() made it onto the wire/air
  TxFailed,    // last send() gave up (collisions, missing acks)
};

const char* devevent_name(DevEvent e);

// Link quality data for the most recently popped frame.
struct RxInfo {
  uint8_t lqi = 0xFF;
  int8_t rssi = 0;
};

// Hardware-shaped driver interface. The contract mirrors how interrupt
// driven hardware is integrated:
//
//   * send/recv/get/set are called from the owning interface endpoint only;
//   * the device signals "something happened" by calling the isr notify
//     hook, from whatever context the event originated in (for the virtual
//     devices that is a scheduler timer or a peer's send);
//   * the owner reacts by calling isr() from its own context, and isr()
//     reports the concrete events through the event handler, synchronously;
//   * recv() with an empty span peeks the size of the pending frame, a
//     second call with a buffer pops it.
//
// send() takes a full link-layer frame and queues it for transmission;
// completion is always reported via TxComplete/TxFailed, never inline.
// A second send() before that completion fails with DeviceBusy.
class Device {
 public:
  virtual ~Device() = default;

  virtual Err init() = 0;
  virtual Result<size_t> send(std::span<const uint8_t> frame) = 0;
  virtual Result<size_t> recv(std::span<uint8_t> out) = 0;
  virtual void isr() = 0;
  virtual Result<size_t> get(NetOpt opt, std::span<uint8_t> out) = 0;
  virtual Err set(NetOpt opt, std::span<const uint8_t> in) = 0;
  virtual RxInfo rx_info() const { return {}; }

  void set_isr_notify(std::function<void()> fn) { isr_notify_ = std::move(fn); }
  void set_event_handler(std::function<void(DevEvent)> fn) {
    event_handler_ = std::move(fn);
  }

 protected:
  void notify_isr() {
    if (isr_notify_) isr_notify_();
  }
  void emit(DevEvent e) {
    if (event_handler_) event_handler_(e);
  }

 private:
  std::function<void()> isr_notify_;
  std::function<void(DevEvent)> event_handler_;
};

}  // namespace unet
