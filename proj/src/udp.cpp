// SPDX-License-Identifier: Apache-2.0

#include "unet/udp.hpp"

#include "unet/checksum.hpp"
#include "unet/pktbuf.hpp"
#include "unet/stack.hpp"

namespace unet {

void udp_encode(std::span<uint8_t> out8, const UdpHeader& h) {
  out8[0] = static_cast<uint8_t>(h.src_port >> 8);
  out8[1] = static_cast<uint8_t>(h.src_port & 0xFF);
  out8[2] = static_cast<uint8_t>(h.dst_port >> 8);
  out8[3] = static_cast<uint8_t>(h.dst_port & 0xFF);
  out8[4] = static_cast<uint8_t>(h.length >> 8);
  out8[5] = static_cast<uint8_t>(h.length & 0xFF);
  out8[6] = static_cast<uint8_t>(h.checksum >> 8);
  out8[7] = static_cast<uint8_t>(h.checksum & 0xFF);
}

Result<UdpHeader> udp_parse(std::span<const uint8_t> in) {
  if (in.size() < kUdpHdrSize) return Err::BadLength;
  UdpHeader h;
  h.src_port = static_cast<uint16_t>((in[0] << 8) | in[1]);
  h.dst_port = static_cast<uint16_t>((in[2] << 8) | in[3]);
  h.length = static_cast<uint16_t>((in[4] << 8) | in[5]);
  h.checksum = static_cast<uint16_t>((in[6] << 8) | in[7]);
  return h;
}

uint16_t udp_checksum(const Ipv6Addr& src, const Ipv6Addr& dst,
                      const UdpHeader& h, std::span<const uint8_t> payload) {
  OnesComplementSum s;
  s.add(src.b);
  s.add(dst.b);
  uint32_t len = static_cast<uint32_t>(kUdpHdrSize + payload.size());
  s.add_word(static_cast<uint16_t>(len >> 16));
  s.add_word(static_cast<uint16_t>(len & 0xFFFF));
  s.add_word(0);
  s.add_word(kProtoUdp);
  uint8_t hdr[kUdpHdrSize];
  UdpHeader h0 = h;
  h0.checksum = 0;
  udp_encode(hdr, h0);
  s.add(hdr);
  s.add(payload);
  uint16_t c = s.result();
  return c == 0 ? 0xFFFF : c;
}

void UdpModule::on_msg(const NetMsg& m) {
  switch (m.kind) {
    case MsgKind::Rcv:
      handle_rcv(m);
      break;
    case MsgKind::Get:
    case MsgKind::Set:
      stack_.reply_ack(m, ack_error(Err::Unsupported));
      break;
    default:
      if (m.pkt != kNullSnip) stack_.buf().release(m.pkt);
      break;
  }
}

// Head snip is the whole UDP datagram; the IPv6 header section sits behind
// it and supplies the pseudo-header addresses.
void UdpModule::handle_rcv(const NetMsg& m) {
  PktBuf& buf = stack_.buf();
  auto hw = buf.start_write(m.pkt);
  if (!hw) {
    buf.release(m.pkt);
    return;
  }
  SnipHandle h = *hw;

  auto bytes = buf.cdata(h);
  if (!bytes || bytes->size() < kUdpHdrSize) {
    stack_.stats().bad_length++;
    buf.release(h);
    return;
  }
  auto hdr = udp_parse(*bytes);
  if (!hdr || hdr->length != bytes->size()) {
    stack_.stats().bad_length++;
    buf.release(h);
    return;
  }
  if (hdr->checksum == 0) {
    stack_.stats().bad_checksum++;
    buf.release(h);
    return;
  }

  // Find the network header section for the pseudo-header.
  Ipv6Addr src, dst;
  bool found = false;
  for (SnipHandle t = *buf.next(h); t != kNullSnip; t = *buf.next(t)) {
    if (*buf.type(t) == NetType::Ipv6) {
      auto nb = buf.cdata(t);
      if (nb && nb->size() >= kIpv6HdrSize) {
        std::copy_n(nb->begin() + 8, 16, src.b.begin());
        std::copy_n(nb->begin() + 24, 16, dst.b.begin());
        found = true;
      }
      break;
    }
  }
  if (!found) {
    stack_.stats().bad_length++;
    buf.release(h);
    return;
  }

  // Summing the datagram with its checksum field in place must cancel out.
  // This also accepts the 0xFFFF encoding of a computed zero.
  OnesComplementSum s;
  s.add(src.b);
  s.add(dst.b);
  s.add_word(static_cast<uint16_t>(hdr->length >> 16));
  s.add_word(hdr->length);
  s.add_word(0);
  s.add_word(kProtoUdp);
  s.add(*bytes);
  if (s.result() != 0) {
    stack_.stats().bad_checksum++;
    buf.release(h);
    return;
  }

  SnipHandle up = h;
  if (hdr->length == kUdpHdrSize) {
    auto empty = buf.add(h, {}, NetType::Undef);
    if (!empty) {
      buf.release(h);
      return;
    }
    up = *empty;
  } else {
    auto rest = buf.split_front(h, kUdpHdrSize, NetType::Udp);
    if (!rest) {
      buf.release(h);
      return;
    }
    buf.set_type(*rest, NetType::Undef);
    up = *rest;
  }
  stack_.dispatch(NetType::Udp, hdr->dst_port, MsgKind::Rcv, up, id());
}

}  // namespace unet
