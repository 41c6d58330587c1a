// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>

#include "unet/types.hpp"

namespace unet {

enum class MsgKind : uint8_t {
  Snd,  // pass packet down the stack
  Rcv,  // pass packet up the stack
  Get,  // read an option, answered with Ack
  Set,  // write an option, answered with Ack
  Ack,  // Get/Set completion
};

const char* msgkind_name(MsgKind k);

// Option transaction payload. The requester owns the struct and the buffer
// `data` points into; both must stay alive until the matching Ack arrives
// or the transaction times out. `context` selects a sub-object where the
// option needs one (interface index, address slot).
struct OptionRequest {
  NetOpt opt = NetOpt::Address;
  uint32_t context = 0;
  void* data = nullptr;
  size_t len = 0;
};

// The one message type everything exchanges. Field use by kind:
//   Snd/Rcv: pkt carries one owned reference; whoever consumes the message
//            must release it or hand it on. type is the protocol context
//            the packet was dispatched under.
//   Get/Set: req points at the requester's OptionRequest, token is echoed
//            in the Ack, reply_to names the requester's endpoint.
//   Ack:     status is the option length actually read/written, or the
//            negated error code (see ack_error). token matches the request.
struct NetMsg {
  MsgKind kind = MsgKind::Snd;
  NetType type = NetType::Undef;
  SnipHandle pkt = kNullSnip;
  OptionRequest* req = nullptr;
  EndpointId reply_to = kNoEndpoint;
  uint32_t token = 0;
  AckStatus status = 0;
};

}  // namespace unet
