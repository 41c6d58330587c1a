// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "doctest.h"
#include "unet/result.hpp"
#include "unet/sched.hpp"
#include "unet/types.hpp"

namespace unet {

inline doctest::String toString(Err e) { return err_name(e); }
inline doctest::String toString(NetType t) { return nettype_name(t); }

}  // namespace unet

namespace testutil {

// Endpoint that records everything it gets and releases nothing; tests own
// the cleanup so they can inspect reference counts first.
class SinkEndpoint : public unet::Endpoint {
 public:
  std::vector<unet::NetMsg> got;
  void on_msg(const unet::NetMsg& m) override { got.push_back(m); }
};

inline std::vector<uint8_t> pattern(size_t n, uint32_t seed = 7) {
  std::vector<uint8_t> v(n);
  uint32_t x = seed;
  for (auto& b : v) {
    x = x * 1664525u + 1013904223u;
    b = static_cast<uint8_t>(x >> 24);
  }
  return v;
}

}  // namespace testutil
