// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "unet/cost.hpp"
#include "unet/ipv6.hpp"
#include "unet/netif.hpp"
#include "unet/netreg.hpp"
#include "unet/pktbuf.hpp"
#include "unet/sched.hpp"
#include "unet/sixlowpan.hpp"
#include "unet/udp.hpp"

namespace unet {

struct StackStats {
  uint64_t queue_full_drops = 0;  // messages refused by a full mailbox
  uint64_t no_receiver_drops = 0; // dispatches nobody was registered for
  uint64_t bad_checksum = 0;
  uint64_t bad_length = 0;
  uint64_t hop_limit_drops = 0;
  uint64_t no_route_drops = 0;
  uint64_t neighbor_drops = 0;
  uint64_t not_forwarded = 0;     // non-local traffic while acting as host
  uint64_t forwarded = 0;
  uint64_t delivered_local = 0;
};

// Collects Acks and packets addressed to application context. recv-style
// APIs and option transactions pump the scheduler until something lands
// here.
class AppEndpoint : public Endpoint {
 public:
  explicit AppEndpoint(Stack& stack) : stack_(stack) {}

  void on_msg(const NetMsg& m) override;

  // Removes and returns the Ack for `token` if present.
  bool take_ack(uint32_t token, AckStatus* status);
  // Received packets handed straight to app context (raw dispatch tests).
  std::deque<NetMsg> inbox;

 private:
  Stack& stack_;
  std::vector<NetMsg> acks_;
};

// Owns every piece of one node's stack: buffer, registry, run loop, cost
// meter and the protocol modules, plus the small amount of node-wide state
// (interface addresses, ephemeral ports) the modules share.
class Stack {
 public:
  struct Config {
    PktBufConfig pktbuf;
    // Several stacks can share one run loop (and so one virtual clock),
    // which is how multi-node simulations are built. Null means the stack
    // runs its own private scheduler.
    Scheduler* sched = nullptr;
  };

  Stack() : Stack(Config{}) {}
  explicit Stack(Config cfg);
  // Despawns this stack's endpoints, which matters when the scheduler is
  // shared and outlives the stack.
  ~Stack();
  Stack(const Stack&) = delete;
  Stack& operator=(const Stack&) = delete;

  // spawn() wrapper that wires up despawn-time packet cleanup against this
  // stack's buffer. All endpoints belonging to this stack go through here.
  EndpointId adopt(Endpoint* ep);

  // Module composition. Interfaces get 1-based indexes; index 0 is the
  // loopback pseudo-interface owned by the IPv6 module.
  void add_udp();
  void add_ipv6();
  void add_sixlowpan();
  Result<uint8_t> add_interface(Device& dev, NetifConfig cfg);

  // -- message passing ----------------------------------------------------

  // Posts `m` to `to`. On failure the caller still owns m.pkt.
  Err send_msg(EndpointId to, const NetMsg& m);

  // Hands one reference of `pkt` to every endpoint registered for
  // (type, demux), except `exclude`. Consumes the caller's reference in
  // all cases: with no receivers (or only failed deliveries) the packet is
  // released. Returns the number of successful deliveries.
  size_t dispatch(NetType type, uint32_t demux, MsgKind kind, SnipHandle pkt,
                  EndpointId exclude = kNoEndpoint);

  // Blocking option transactions, callable from app context only. The
  // scheduler is pumped until the Ack arrives or the virtual clock has
  // advanced kGetSetTimeoutNs past the request.
  Result<size_t> get_opt(EndpointId ep, NetOpt opt, uint32_t context,
                         std::span<uint8_t> out);
  Result<size_t> set_opt(EndpointId ep, NetOpt opt, uint32_t context,
                         std::span<const uint8_t> in);

  // For modules answering a Get/Set.
  void reply_ack(const NetMsg& req, AckStatus status);

  // Pumps the run loop until done() or the virtual clock reaches
  // `deadline_ns` with nothing left to run before it. App context only.
  bool pump_until(const std::function<bool()>& done, uint64_t deadline_ns);

  // -- node configuration (thin wrappers over set_opt) ---------------------

  Err add_address(uint8_t if_index, const Ipv6Addr& addr);
  Err add_route(const Ipv6Addr& prefix, uint8_t plen, const Ipv6Addr& next_hop,
                uint8_t if_index);
  Err add_neighbor(const Ipv6Addr& ip, uint16_t l2, uint8_t if_index);

  // -- transport send paths (run in the caller's context) ------------------

  Err udp_send(const Ipv6Addr& dst, uint16_t dst_port, uint16_t src_port,
               std::span<const uint8_t> payload);
  Err raw_send(const Ipv6Addr& dst, uint8_t proto,
               std::span<const uint8_t> payload);

  // -- shared node state, used by the modules ------------------------------

  Err if_add_address(uint8_t if_index, const Ipv6Addr& addr);
  const std::vector<Ipv6Addr>& if_addresses(uint8_t if_index) const;
  bool is_local_addr(const Ipv6Addr& a) const;
  Result<uint16_t> alloc_ephemeral_port();

  PktBuf& buf() { return buf_; }
  Netreg& reg() { return reg_; }
  Scheduler& sched() { return *sched_; }
  CostMeter& meter() { return meter_; }
  StackStats& stats() { return stats_; }
  AppEndpoint& app() { return app_; }

  Ipv6Module* ipv6() { return ipv6_.get(); }
  UdpModule* udp() { return udp_.get(); }
  SixlowpanModule* sixlo() { return sixlo_.get(); }
  NetifEndpoint* netif(uint8_t if_index);
  size_t interface_count() const { return netifs_.size(); }

  EndpointId ipv6_ep() const;
  EndpointId udp_ep() const;
  EndpointId sixlo_ep() const;

 private:
  CostMeter meter_;
  PktBuf buf_;
  Netreg reg_;
  std::unique_ptr<Scheduler> own_sched_;
  Scheduler* sched_;
  StackStats stats_;
  AppEndpoint app_;

  std::unique_ptr<UdpModule> udp_;
  std::unique_ptr<Ipv6Module> ipv6_;
  std::unique_ptr<SixlowpanModule> sixlo_;
  std::vector<std::unique_ptr<NetifEndpoint>> netifs_;

  std::vector<std::vector<Ipv6Addr>> if_addrs_;  // [0] = loopback
  uint32_t next_token_ = 0;
  uint16_t next_ephemeral_ = 49152;
};

}  // namespace unet
