// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>

namespace unet {

// Deterministic operation-count cost model used by the benchmark harness.
//
// Every data-plane byte the stack touches (copies, checksums, header codec
// work) costs weights.byte units; every successful mailbox post costs
// weights.message; FIB and neighbor cache operations are counted as whole
// control-plane operations. The weights model a small 32-bit MCU where IPC
// and table management dominate header arithmetic by a couple of orders of
// magnitude, which is what makes per-layer cost ordering meaningful.
struct CostWeights {
  uint64_t byte = 1;
  uint64_t message = 512;
  uint64_t fib_lookup = 2048;
  uint64_t neighbor_op = 1024;  // one lookup plus one reachability touch per TX
};

class CostMeter {
 public:
  explicit CostMeter(CostWeights w = {}) : w_(w) {}

  void bytes(uint64_t n) { if (!paused_) bytes_ += n; }
  void message() { if (!paused_) msgs_ += 1; }
  void fib_lookup() { if (!paused_) fib_ += 1; }
  void neighbor_op() { if (!paused_) nd_ += 1; }

  uint64_t units() const {
    return bytes_ * w_.byte + msgs_ * w_.message + fib_ * w_.fib_lookup +
           nd_ * w_.neighbor_op;
  }
  uint64_t byte_count() const { return bytes_; }
  uint64_t message_count() const { return msgs_; }

  void reset() { bytes_ = msgs_ = fib_ = nd_ = 0; }
  void pause() { paused_ = true; }
  void resume() { paused_ = false; }

  const CostWeights& weights() const { return w_; }

 private:
  CostWeights w_;
  uint64_t bytes_ = 0;
  uint64_t msgs_ = 0;
  uint64_t fib_ = 0;
  uint64_t nd_ = 0;
  bool paused_ = false;
};

}  // namespace unet
