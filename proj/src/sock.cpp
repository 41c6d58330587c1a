// SPDX-License-Identifier: Apache-2.0

#include "unet/sock.hpp"

#include <cstring>
#include <map>
#include <memory>
#include <mutex>

#include "unet/pktbuf.hpp"
#include "unet/udp.hpp"

namespace unet {

namespace {

// Sender identity out of a received chain: the UDP header section supplies
// the port, the network header section behind it the address.
bool chain_sender(PktBuf& buf, SnipHandle h, bool want_port,
                  SockEndpoint* out) {
  bool have_port = !want_port;
  bool have_addr = false;
  for (SnipHandle t = h; t != kNullSnip;) {
    auto ty = buf.type(t);
    if (!ty) return false;
    if (want_port && *ty == NetType::Udp) {
      auto b = buf.cdata(t);
      if (!b || b->size() < 2) return false;
      out->port = static_cast<uint16_t>(((*b)[0] << 8) | (*b)[1]);
      have_port = true;
    }
    if (*ty == NetType::Ipv6) {
      auto b = buf.cdata(t);
      if (!b || b->size() < kIpv6HdrSize) return false;
      std::memcpy(out->addr.b.data(), b->data() + 8, 16);
      have_addr = true;
      break;
    }
    t = *buf.next(t);
  }
  return have_port && have_addr;
}

// Bytes in front of the first snip with the given type: the application
// payload of a received chain.
size_t payload_size(PktBuf& buf, SnipHandle h, NetType until) {
  size_t n = 0;
  for (SnipHandle t = h; t != kNullSnip;) {
    auto ty = buf.type(t);
    if (!ty || *ty == until) break;
    n += *buf.size(t);
    t = *buf.next(t);
  }
  return n;
}

}  // namespace

// -- SockUdp --------------------------------------------------------------

Err SockUdp::create(Stack& stack, const SockEndpoint* local,
                    const SockEndpoint* remote) {
  if (stack_) return Err::AlreadyInitialized;
  if (!stack.udp() || !stack.ipv6()) return Err::NotInitialized;

  uint16_t port = local ? local->port : 0;
  if (port == 0) {
    auto p = stack.alloc_ephemeral_port();
    if (!p) return p.error();
    port = *p;
  } else if (stack.reg().has_exact(NetType::Udp, port)) {
    return Err::AddressInUse;
  }

  rx_.owner = this;
  stack.adopt(&rx_);
  if (Err e = stack.reg().register_entry({NetType::Udp, port, rx_.id()});
      e != Err::None) {
    stack.sched().despawn(rx_.id());
    return e;
  }
  stack_ = &stack;
  local_.port = port;
  if (local) local_.addr = local->addr;
  if (remote) {
    remote_ = *remote;
    connected_ = true;
  }
  return Err::None;
}

void SockUdp::close() {
  if (!stack_) return;
  stack_->reg().unregister_endpoint(rx_.id());
  stack_->sched().despawn(rx_.id());
  for (SnipHandle h : inbox_) stack_->buf().release(h);
  inbox_.clear();
  stack_ = nullptr;
  connected_ = false;
}

void SockUdp::Rx::on_msg(const NetMsg& m) {
  PktBuf& buf = owner->stack_->buf();
  if (m.kind != MsgKind::Rcv || m.pkt == kNullSnip) {
    if (m.pkt != kNullSnip) buf.release(m.pkt);
    return;
  }
  if (owner->connected_) {
    SockEndpoint from;
    if (!chain_sender(buf, m.pkt, true, &from) ||
        from.addr != owner->remote_.addr ||
        (owner->remote_.port != 0 && from.port != owner->remote_.port)) {
      buf.release(m.pkt);
      return;
    }
  }
  if (owner->inbox_.size() >= kInboxCap) {
    owner->inbox_drops_++;
    buf.release(m.pkt);
    return;
  }
  owner->inbox_.push_back(m.pkt);
}

Result<size_t> SockUdp::send(std::span<const uint8_t> payload,
                             const SockEndpoint* remote) {
  if (!stack_) return Err::Closed;
  SockEndpoint dst;
  if (remote)
    dst = *remote;
  else if (connected_)
    dst = remote_;
  else
    return Err::InvalidArgument;
  if (dst.port == 0) return Err::InvalidArgument;
  if (Err e = stack_->udp_send(dst.addr, dst.port, local_.port, payload);
      e != Err::None)
    return e;
  return payload.size();
}

Result<size_t> SockUdp::recv(std::span<uint8_t> out, uint64_t timeout_ns,
                             SockEndpoint* remote) {
  if (!stack_) return Err::Closed;
  uint64_t deadline = timeout_ns == UINT64_MAX
                          ? UINT64_MAX
                          : stack_->sched().now() + timeout_ns;
  if (!stack_->pump_until([&] { return !inbox_.empty(); }, deadline))
    return Err::Timeout;

  PktBuf& buf = stack_->buf();
  SnipHandle h = inbox_.front();
  inbox_.pop_front();
  size_t total = payload_size(buf, h, NetType::Udp);
  size_t n = std::min(total, out.size());  // excess is discarded
  if (n > 0) buf.read_range(h, 0, out.subspan(0, n));
  if (remote) chain_sender(buf, h, true, remote);
  buf.release(h);
  return n;
}

// -- SockIp ---------------------------------------------------------------

Err SockIp::create(Stack& stack, uint8_t protocol, const SockEndpoint* remote) {
  if (stack_) return Err::AlreadyInitialized;
  if (!stack.ipv6()) return Err::NotInitialized;
  if (stack.reg().has_exact(NetType::Raw, protocol))
    return Err::AddressInUse;

  rx_.owner = this;
  stack.adopt(&rx_);
  if (Err e = stack.reg().register_entry({NetType::Raw, protocol, rx_.id()});
      e != Err::None) {
    stack.sched().despawn(rx_.id());
    return e;
  }
  stack_ = &stack;
  proto_ = protocol;
  if (remote) {
    remote_ = *remote;
    connected_ = true;
  }
  return Err::None;
}

void SockIp::close() {
  if (!stack_) return;
  stack_->reg().unregister_endpoint(rx_.id());
  stack_->sched().despawn(rx_.id());
  for (SnipHandle h : inbox_) stack_->buf().release(h);
  inbox_.clear();
  stack_ = nullptr;
  connected_ = false;
}

void SockIp::Rx::on_msg(const NetMsg& m) {
  PktBuf& buf = owner->stack_->buf();
  if (m.kind != MsgKind::Rcv || m.pkt == kNullSnip) {
    if (m.pkt != kNullSnip) buf.release(m.pkt);
    return;
  }
  if (owner->connected_) {
    SockEndpoint from;
    if (!chain_sender(buf, m.pkt, false, &from) ||
        from.addr != owner->remote_.addr) {
      buf.release(m.pkt);
      return;
    }
  }
  if (owner->inbox_.size() >= kInboxCap) {
    owner->inbox_drops_++;
    buf.release(m.pkt);
    return;
  }
  owner->inbox_.push_back(m.pkt);
}

Result<size_t> SockIp::send(std::span<const uint8_t> payload,
                            const SockEndpoint* remote) {
  if (!stack_) return Err::Closed;
  SockEndpoint dst;
  if (remote)
    dst = *remote;
  else if (connected_)
    dst = remote_;
  else
    return Err::InvalidArgument;
  if (Err e = stack_->raw_send(dst.addr, proto_, payload); e != Err::None)
    return e;
  return payload.size();
}

Result<size_t> SockIp::recv(std::span<uint8_t> out, uint64_t timeout_ns,
                            SockEndpoint* remote) {
  if (!stack_) return Err::Closed;
  uint64_t deadline = timeout_ns == UINT64_MAX
                          ? UINT64_MAX
                          : stack_->sched().now() + timeout_ns;
  if (!stack_->pump_until([&] { return !inbox_.empty(); }, deadline))
    return Err::Timeout;

  PktBuf& buf = stack_->buf();
  SnipHandle h = inbox_.front();
  inbox_.pop_front();
  size_t total = payload_size(buf, h, NetType::Ipv6);
  size_t n = std::min(total, out.size());
  if (n > 0) buf.read_range(h, 0, out.subspan(0, n));
  if (remote) chain_sender(buf, h, false, remote);
  buf.release(h);
  return n;
}

// -- posix veneer ----------------------------------------------------------

namespace posix {

namespace {

struct FdRec {
  Stack* stack = nullptr;
  std::unique_ptr<SockUdp> sock;
};

std::mutex g_mu;
std::map<int, FdRec>& fd_table() {
  static std::map<int, FdRec> t;
  return t;
}
int g_next_fd = 1000;
thread_local Err t_errno = Err::None;

// Lazily creates the underlying socket so an unbound descriptor picks up
// an ephemeral port on first use, like the real calls do.
SockUdp* ensure(FdRec& rec) {
  if (!rec.sock) {
    auto s = std::make_unique<SockUdp>();
    if (Err e = s->create(*rec.stack, nullptr, nullptr); e != Err::None) {
      t_errno = e;
      return nullptr;
    }
    rec.sock = std::move(s);
  }
  return rec.sock.get();
}

void to_sockaddr(const SockEndpoint& ep, ::sockaddr_in6* sa) {
  std::memset(sa, 0, sizeof *sa);
  sa->sin6_family = AF_INET6;
  sa->sin6_port = htons(ep.port);
  std::memcpy(&sa->sin6_addr, ep.addr.b.data(), 16);
}

SockEndpoint from_sockaddr(const ::sockaddr_in6* sa) {
  SockEndpoint ep;
  ep.port = ntohs(sa->sin6_port);
  std::memcpy(ep.addr.b.data(), &sa->sin6_addr, 16);
  return ep;
}

}  // namespace

int socket(Stack& stack) {
  std::lock_guard lk(g_mu);
  int fd = g_next_fd++;
  fd_table()[fd].stack = &stack;
  t_errno = Err::None;
  return fd;
}

int bind(int fd, const ::sockaddr_in6* addr) {
  std::lock_guard lk(g_mu);
  auto it = fd_table().find(fd);
  if (it == fd_table().end() || !addr || addr->sin6_family != AF_INET6) {
    t_errno = Err::InvalidArgument;
    return -1;
  }
  if (it->second.sock) {
    t_errno = Err::AlreadyInitialized;
    return -1;
  }
  SockEndpoint local = from_sockaddr(addr);
  auto s = std::make_unique<SockUdp>();
  if (Err e = s->create(*it->second.stack, &local, nullptr); e != Err::None) {
    t_errno = e;
    return -1;
  }
  it->second.sock = std::move(s);
  t_errno = Err::None;
  return 0;
}

long sendto(int fd, const void* buf, size_t len, const ::sockaddr_in6* dst) {
  std::lock_guard lk(g_mu);
  auto it = fd_table().find(fd);
  if (it == fd_table().end() || !dst || dst->sin6_family != AF_INET6) {
    t_errno = Err::InvalidArgument;
    return -1;
  }
  SockUdp* s = ensure(it->second);
  if (!s) return -1;
  SockEndpoint remote = from_sockaddr(dst);
  auto r = s->send({static_cast<const uint8_t*>(buf), len}, &remote);
  if (!r) {
    t_errno = r.error();
    return -1;
  }
  t_errno = Err::None;
  return static_cast<long>(*r);
}

long recvfrom(int fd, void* buf, size_t len, uint64_t timeout_ns,
              ::sockaddr_in6* src) {
  SockUdp* s;
  {
    std::lock_guard lk(g_mu);
    auto it = fd_table().find(fd);
    if (it == fd_table().end()) {
      t_errno = Err::InvalidArgument;
      return -1;
    }
    s = ensure(it->second);
    if (!s) return -1;
  }
  SockEndpoint from;
  auto r = s->recv({static_cast<uint8_t*>(buf), len}, timeout_ns, &from);
  if (!r) {
    t_errno = r.error();
    return -1;
  }
  if (src) to_sockaddr(from, src);
  t_errno = Err::None;
  return static_cast<long>(*r);
}

int close(int fd) {
  std::lock_guard lk(g_mu);
  auto it = fd_table().find(fd);
  if (it == fd_table().end()) {
    t_errno = Err::InvalidArgument;
    return -1;
  }
  fd_table().erase(it);
  t_errno = Err::None;
  return 0;
}

Err sock_errno() { return t_errno; }

}  // namespace posix
}  // namespace unet
