// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <netinet/in.h>

#include <cstdint>
#include <deque>
#include <span>

#include "unet/ipv6.hpp"
#include "unet/sched.hpp"
#include "unet/stack.hpp"

namespace unet {

// Network endpoint as applications see it. For the raw socket flavour the
// port field is unused.
struct SockEndpoint {
  Ipv6Addr addr;
  uint16_t port = 0;
};

// Connectionless datagram socket over UDP. All state lives in the object
// itself; create/close register and unregister it with the owning stack.
// recv() pumps the stack's run loop, so it must be called from app
// context, never from inside an endpoint handler.
class SockUdp {
 public:
  static constexpr size_t kInboxCap = 2;

  SockUdp() = default;
  ~SockUdp() { close(); }
  SockUdp(const SockUdp&) = delete;
  SockUdp& operator=(const SockUdp&) = delete;

  // `local` may be null or carry port 0 for an ephemeral port. A non-null
  // `remote` fixes the default destination for send(). Binding a port that
  // some socket already claimed fails with AddressInUse.
  Err create(Stack& stack, const SockEndpoint* local, const SockEndpoint* remote);
  void close();

  Result<size_t> send(std::span<const uint8_t> payload,
                      const SockEndpoint* remote = nullptr);
  // Blocks (on the virtual clock) up to `timeout_ns`. Fills `remote` with
  // the sender when non-null. Timeout of 0 polls.
  Result<size_t> recv(std::span<uint8_t> out, uint64_t timeout_ns,
                      SockEndpoint* remote = nullptr);

  bool is_open() const { return stack_ != nullptr; }
  const SockEndpoint& local() const { return local_; }
  uint64_t inbox_drops() const { return inbox_drops_; }
  size_t queued() const { return inbox_.size(); }

 private:
  class Rx : public Endpoint {
   public:
    SockUdp* owner = nullptr;
    void on_msg(const NetMsg& m) override;
  };

  Stack* stack_ = nullptr;
  Rx rx_;
  SockEndpoint local_{};
  SockEndpoint remote_{};
  bool connected_ = false;
  std::deque<SnipHandle> inbox_;
  uint64_t inbox_drops_ = 0;
};

// Raw IPv6 socket keyed by next-header protocol number. Receives every
// local datagram with that protocol; sends with the header built by the
// stack. Same state model as SockUdp.
class SockIp {
 public:
  static constexpr size_t kInboxCap = 2;

  SockIp() = default;
  ~SockIp() { close(); }
  SockIp(const SockIp&) = delete;
  SockIp& operator=(const SockIp&) = delete;

  Err create(Stack& stack, uint8_t protocol, const SockEndpoint* remote);
  void close();

  Result<size_t> send(std::span<const uint8_t> payload,
                      const SockEndpoint* remote = nullptr);
  Result<size_t> recv(std::span<uint8_t> out, uint64_t timeout_ns,
                      SockEndpoint* remote = nullptr);

  bool is_open() const { return stack_ != nullptr; }
  uint8_t protocol() const { return proto_; }
  uint64_t inbox_drops() const { return inbox_drops_; }

 private:
  class Rx : public Endpoint {
   public:
    SockIp* owner = nullptr;
    void on_msg(const NetMsg& m) override;
  };

  Stack* stack_ = nullptr;
  Rx rx_;
  uint8_t proto_ = 0;
  SockEndpoint remote_{};
  bool connected_ = false;
  std::deque<SnipHandle> inbox_;
  uint64_t inbox_drops_ = 0;
};

// Minimal BSD-style veneer over SockUdp for code written against the
// classic calls. Descriptors come from a process-wide table; addresses use
// the ordinary sockaddr_in6. On error the calls return -1 and the reason
// is kept per thread in sock_errno().
namespace posix {

int socket(Stack& stack);
int bind(int fd, const ::sockaddr_in6* addr);
long sendto(int fd, const void* buf, size_t len, const ::sockaddr_in6* dst);
// `timeout_ns` is virtual time; the real calls would block on a real clock.
long recvfrom(int fd, void* buf, size_t len, uint64_t timeout_ns,
              ::sockaddr_in6* src);
int close(int fd);
Err sock_errno();

}  // namespace posix
}  // namespace unet
