// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <variant>
#include <utility>

namespace unet {

// Error codes shared by every module. Negative ACK statuses on the message
// plane are -static_cast<int>(Err::...), so the numeric values are part of
// the observable interface and must only ever be appended to.
enum class Err : int {
  None = 0,
  // pktbuf
  OutOfMemory,
  InvalidHandle,
  DoubleRelease,
  InvalidSize,
  SharedSnip,
  InvalidArgument,
  // netreg
  DuplicateEntry,
  NotFound,
  // netapi / scheduler
  QueueFull,
  NoSuchEndpoint,
  Unsupported,
  Timeout,
  // netdev
  NotInitialized,
  AlreadyInitialized,
  FrameTooLarge,
  DeviceBusy,
  NoPendingFrame,
  BufferTooSmall,
  // 6lowpan
  DatagramTooLarge,
  InvalidDispatch,
  OverlapMismatch,
  StaleTag,
  ReassemblyFull,
  // ipv6 / udp
  NoRoute,
  NeighborUnresolved,
  BadChecksum,
  BadLength,
  MessageTooLarge,
  // sock
  AddressInUse,
  Closed,
};

const char* err_name(Err e);

// Minimal expected-style wrapper. value access on an error is a programming
// bug and asserts in debug builds via std::get.
template <typename T>
class [[nodiscard]] Result {
 public:
  Result(T value) : v_(std::move(value)) {}
  Result(Err e) : v_(e) {}

  bool ok() const { return std::holds_alternative<T>(v_); }
  explicit operator bool() const { return ok(); }

  T& operator*() { return std::get<T>(v_); }
  const T& operator*() const { return std::get<T>(v_); }
  T* operator->() { return &std::get<T>(v_); }
  const T* operator->() const { return &std::get<T>(v_); }

  T& value() { return std::get<T>(v_); }
  const T& value() const { return std::get<T>(v_); }
  T value_or(T alt) const { return ok() ? std::get<T>(v_) : std::move(alt); }

  Err error() const { return ok() ? Err::None : std::get<Err>(v_); }

 private:
  std::variant<T, Err> v_;
};

}  // namespace unet
