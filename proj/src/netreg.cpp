// SPDX-License-Identifier: Apache-2.0

#include "unet/netreg.hpp"

#include <algorithm>

namespace unet {

Err Netreg::register_entry(const NetregEntry& e) {
  if (e.type == NetType::Undef || e.ep == kNoEndpoint)
    return Err::InvalidArgument;
  std::lock_guard lk(mu_);
  if (std::find(entries_.begin(), entries_.end(), e) != entries_.end())
    return Err::DuplicateEntry;
  entries_.push_back(e);
  return Err::None;
}

Err Netreg::unregister_entry(const NetregEntry& e) {
  std::lock_guard lk(mu_);
  auto it = std::find(entries_.begin(), entries_.end(), e);
  if (it == entries_.end()) return Err::NotFound;
  entries_.erase(it);
  return Err::None;
}

std::vector<EndpointId> Netreg::lookup(NetType type, uint32_t demux) const {
  std::lock_guard lk(mu_);
  std::vector<EndpointId> out;
  for (const NetregEntry& e : entries_)
    if (e.type == type && (e.demux == demux || e.demux == kDemuxAll))
      out.push_back(e.ep);
  return out;
}

bool Netreg::has_exact(NetType type, uint32_t demux) const {
  std::lock_guard lk(mu_);
  for (const NetregEntry& e : entries_)
    if (e.type == type && e.demux == demux) return true;
  return false;
}

size_t Netreg::unregister_endpoint(EndpointId ep) {
  std::lock_guard lk(mu_);
  size_t before = entries_.size();
  entries_.erase(std::remove_if(entries_.begin(), entries_.end(),
                                [ep](const NetregEntry& e) { return e.ep == ep; }),
                 entries_.end());
  return before - entries_.size();
}

size_t Netreg::size() const {
  std::lock_guard lk(mu_);
  return entries_.size();
}

}  // namespace unet
