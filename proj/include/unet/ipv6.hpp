// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "unet/cost.hpp"
#include "unet/result.hpp"
#include "unet/sched.hpp"
#include "unet/types.hpp"

namespace unet {

struct Ipv6Addr {
  std::array<uint8_t, 16> b{};

  bool operator==(const Ipv6Addr&) const = default;

  bool is_unspecified() const { return *this == Ipv6Addr{}; }
  bool is_loopback() const { return *this == loopback(); }
  bool is_multicast() const { return b[0] == 0xFF; }
  bool is_link_local() const { return b[0] == 0xFE && (b[1] & 0xC0) == 0x80; }

  static Ipv6Addr loopback() {
    Ipv6Addr a;
    a.b[15] = 1;
    return a;
  }

  // Text form via the usual platform routines; parse accepts anything
  // inet_pton does, str produces the compressed form.
  static Result<Ipv6Addr> parse(const std::string& text);
  std::string str() const;
};

// Leading bits the two addresses agree on, 0..128.
int common_prefix_len(const Ipv6Addr& a, const Ipv6Addr& b);
bool prefix_match(const Ipv6Addr& addr, const Ipv6Addr& prefix, uint8_t plen);

constexpr size_t kIpv6HdrSize = 40;
constexpr uint8_t kProtoUdp = 17;
constexpr uint8_t kDefaultHopLimit = 64;

struct Ipv6Header {
  uint8_t version = 6;
  uint8_t traffic_class = 0;
  uint32_t flow_label = 0;
  uint16_t payload_len = 0;
  uint8_t next_header = 0;
  uint8_t hop_limit = kDefaultHopLimit;
  Ipv6Addr src;
  Ipv6Addr dst;
};

void ipv6_encode(std::span<uint8_t> out40, const Ipv6Header& h);
Result<Ipv6Header> ipv6_parse(std::span<const uint8_t> in);

// Forwarding table. Entries are unique per (prefix, plen); lookup picks the
// matching entry with the longest prefix, insertion order breaking ties
// between equal-length duplicates (which add() prevents anyway). A next_hop
// of :: means the destination itself is on-link.
struct FibEntry {
  Ipv6Addr prefix;
  uint8_t plen = 0;
  Ipv6Addr next_hop;
  uint8_t if_index = 0;
};

class Fib {
 public:
  explicit Fib(CostMeter* meter = nullptr) : meter_(meter) {}

  Err add(const FibEntry& e);
  Err remove(const Ipv6Addr& prefix, uint8_t plen);
  Result<FibEntry> lookup(const Ipv6Addr& dst) const;
  std::vector<FibEntry> entries() const { return entries_; }

 private:
  CostMeter* meter_;
  std::vector<FibEntry> entries_;  // kept sorted by plen, longest first
};

// Static neighbor table: IPv6 address to link-layer short address. touch()
// stands in for the reachability bookkeeping a dynamic implementation would
// do per transmission and is costed like a real table write.
struct NeighborEntry {
  Ipv6Addr ip;
  uint16_t l2 = 0;
  uint8_t if_index = 0;
};

class NeighborCache {
 public:
  explicit NeighborCache(CostMeter* meter = nullptr) : meter_(meter) {}

  Err add(const NeighborEntry& e);
  Err remove(const Ipv6Addr& ip);
  Result<NeighborEntry> lookup(const Ipv6Addr& ip) const;
  Err touch(const Ipv6Addr& ip);
  std::vector<NeighborEntry> entries() const { return entries_; }

 private:
  CostMeter* meter_;
  std::vector<NeighborEntry> entries_;
};

// Option payloads for Get/Set transactions against the IPv6 module.
struct Ipv6RouteOpt {
  Ipv6Addr prefix;
  uint8_t plen = 0;
  Ipv6Addr next_hop;
  uint8_t if_index = 0;
};

struct Ipv6NeighborOpt {
  Ipv6Addr ip;
  uint16_t l2 = 0;
  uint8_t if_index = 0;
};

struct Ipv6AddressOpt {
  Ipv6Addr addr;
  uint8_t if_index = 0;
};

class Stack;

// The IPv6 module endpoint. Receive side: header validation, local
// delivery (transport demux plus raw sockets) and forwarding. Send side:
// header completion, route and next-hop resolution, handing down to the
// adaptation layer. Also owns the loopback pseudo-interface (index 0).
class Ipv6Module : public Endpoint {
 public:
  explicit Ipv6Module(Stack& stack);

  void on_msg(const NetMsg& m) override;

  Fib& fib() { return fib_; }
  NeighborCache& neighbors() { return neigh_; }

  // Hosts drop non-local traffic; routers pass it on. Off by default.
  void set_forwarding(bool on) { forwarding_ = on; }
  bool forwarding() const { return forwarding_; }

  // Source address selection for `dst`: routes, then the longest-matching
  // address configured on the egress interface. Performs one FIB lookup.
  Result<Ipv6Addr> select_source(const Ipv6Addr& dst) const;

  uint8_t hop_limit() const { return hop_limit_; }

 private:
  void handle_snd(const NetMsg& m);
  void handle_rcv(const NetMsg& m);
  void handle_opt(const NetMsg& m);
  void deliver_local(SnipHandle pkt, const Ipv6Header& h);
  void forward(SnipHandle pkt, const Ipv6Header& h);
  Err send_datagram(SnipHandle pkt);
  void fill_udp_checksum(SnipHandle pkt, const Ipv6Header& h);

  Stack& stack_;
  Fib fib_;
  NeighborCache neigh_;
  uint8_t hop_limit_ = kDefaultHopLimit;
  bool forwarding_ = false;
};

}  // namespace unet
