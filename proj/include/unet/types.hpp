// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <cstddef>

namespace unet {

// Protocol tag carried by every packet snip and used as the first half of a
// registry key.
enum class NetType : uint8_t {
  Undef = 0,   // untyped payload
  Netif,       // link layer metadata header
  Sixlowpan,   // 6lowpan frame or header section
  Ipv6,
  Udp,
  Raw,         // raw-IP demux space, context = next_header protocol number
};

const char* nettype_name(NetType t);

// Endpoints are identified by the id assigned at spawn. 0 is never assigned.
using EndpointId = uint32_t;
inline constexpr EndpointId kNoEndpoint = 0;

// Opaque snip identity (slot | generation). 0 is the null handle.
using SnipHandle = uint64_t;
inline constexpr SnipHandle kNullSnip = 0;

// Wildcard demux context: an entry registered with kDemuxAll matches every
// lookup of its type, and a lookup with kDemuxAll matches exactly the
// wildcard entries.
inline constexpr uint32_t kDemuxAll = 0xFFFFFFFFu;

// Global option key space shared by devices and endpoints. Append only.
enum class NetOpt : uint16_t {
  Address = 0,   // link layer address (2 bytes for 802.15.4 short)
  AddrLen,       // uint16_t
  Channel,       // uint16_t
  State,         // uint8_t power state
  MaxPduSize,    // uint16_t
  DeviceType,    // uint16_t, see kDeviceType*
  Stats,         // NetStats
  TxStartIrq,    // uint8_t bool, device emits TX_STARTED
  TxEndIrq,      // uint8_t bool, device emits TX_COMPLETE / TX_NOACK
  LinkIrq,       // uint8_t bool, device emits LINK_UP / LINK_DOWN
  Ipv6Route,     // SET: FibEntry wire blob, GET unsupported
  Ipv6Neighbor,  // SET: NeighborEntry wire blob
  Ipv6Address,   // SET: {uint8_t if_index, 16 byte address}
  HopLimit,      // uint8_t
};

inline constexpr uint16_t kDeviceTypeIeee802154 = 1;

// Option ACK status: >= 0 is the option value length, < 0 is -(int)Err.
using AckStatus = int32_t;

enum class Err : int;
inline constexpr AckStatus ack_error(Err e) { return -static_cast<AckStatus>(static_cast<int>(e)); }

// Generic in/out packet and drop counters, returned for NetOpt::Stats.
struct NetStats {
  uint64_t in_pkts = 0;
  uint64_t out_pkts = 0;
  uint64_t drops = 0;
};

inline constexpr size_t kMailboxCapacity = 8;
inline constexpr uint64_t kGetSetTimeoutNs = 1'000'000'000;  // 1 s virtual

}  // namespace unet
