// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>

#include "unet/ipv6.hpp"
#include "unet/result.hpp"
#include "unet/sched.hpp"
#include "unet/types.hpp"

namespace unet {

constexpr size_t kUdpHdrSize = 8;
// Limited by the 16-bit UDP length field, which covers the header too.
constexpr size_t kUdpMaxPayload = 65535 - kUdpHdrSize;

struct UdpHeader {
  uint16_t src_port = 0;
  uint16_t dst_port = 0;
  uint16_t length = 0;  // header plus payload
  uint16_t checksum = 0;
};

void udp_encode(std::span<uint8_t> out8, const UdpHeader& h);
Result<UdpHeader> udp_parse(std::span<const uint8_t> in);

// Checksum over pseudo-header, UDP header and payload. Returns the value
// to put on the wire: a computed 0x0000 is transmitted as 0xFFFF, so zero
// stays reserved for "no checksum", which this stack never sends and
// rejects on receive.
uint16_t udp_checksum(const Ipv6Addr& src, const Ipv6Addr& dst,
                      const UdpHeader& h, std::span<const uint8_t> payload);

class Stack;

// Receive-side UDP: length and checksum validation, then port demux to
// sockets. The send side lives in Stack::udp_send, which builds and
// checksums the datagram in the caller's context.
class UdpModule : public Endpoint {
 public:
  explicit UdpModule(Stack& stack) : stack_(stack) {}

  void on_msg(const NetMsg& m) override;

 private:
  void handle_rcv(const NetMsg& m);

  Stack& stack_;
};

}  // namespace unet
