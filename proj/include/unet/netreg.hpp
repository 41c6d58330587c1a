// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <mutex>
#include <vector>

#include "unet/result.hpp"
#include "unet/types.hpp"

namespace unet {

// One registration: endpoint `ep` wants packets of `type` whose demux
// context matches `demux`. kDemuxAll entries match every lookup context,
// which is how whole-protocol modules (as opposed to per-port sockets)
// subscribe.
struct NetregEntry {
  NetType type = NetType::Undef;
  uint32_t demux = kDemuxAll;
  EndpointId ep = kNoEndpoint;

  bool operator==(const NetregEntry&) const = default;
};

// Registry mapping (type, demux context) lookups to interested endpoints.
// Lookups return endpoints in registration order so dispatch is stable and
// reproducible run to run.
class Netreg {
 public:
  Err register_entry(const NetregEntry& e);
  Err unregister_entry(const NetregEntry& e);

  // All endpoints registered for `type` whose demux value equals `demux` or
  // kDemuxAll, in registration order.
  std::vector<EndpointId> lookup(NetType type, uint32_t demux) const;

  // True if an entry with exactly this (type, demux) is present, wildcards
  // not considered. Used for bind conflict checks.
  bool has_exact(NetType type, uint32_t demux) const;

  // Drops every entry pointing at `ep`; returns how many were removed.
  size_t unregister_endpoint(EndpointId ep);

  size_t size() const;

 private:
  mutable std::mutex mu_;
  std::vector<NetregEntry> entries_;
};

}  // namespace unet
