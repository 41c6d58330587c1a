// SPDX-License-Identifier: Apache-2.0

#include "unet/bench.hpp"

#include <charconv>
#include <cstdio>
#include <cstring>
#include <memory>
#include <optional>

#include "unet/sixlowpan.hpp"
#include "unet/sock.hpp"
#include "unet/stack.hpp"
#include "unet/udp.hpp"

namespace unet {

const char* entry_layer_name(EntryLayer e) {
  switch (e) {
    case EntryLayer::Sixlo: return "sixlo";
    case EntryLayer::Ipv6: return "ipv6";
    case EntryLayer::Udp: return "udp";
    case EntryLayer::SockUdp: return "sock_udp";
    case EntryLayer::SockIp: return "sock_ip";
  }
  return "?";
}

const char* bench_device_name(BenchDevice d) {
  switch (d) {
    case BenchDevice::Reflector: return "reflector";
    case BenchDevice::Pipe: return "pipe";
    case BenchDevice::Medium: return "medium";
  }
  return "?";
}

Result<EntryLayer> parse_entry_layer(const std::string& s) {
  if (s == "sixlo") return EntryLayer::Sixlo;
  if (s == "ipv6") return EntryLayer::Ipv6;
  if (s == "udp") return EntryLayer::Udp;
  if (s == "sock_udp") return EntryLayer::SockUdp;
  if (s == "sock_ip") return EntryLayer::SockIp;
  return Err::InvalidArgument;
}

Result<BenchDevice> parse_bench_device(const std::string& s) {
  if (s == "reflector") return BenchDevice::Reflector;
  if (s == "pipe") return BenchDevice::Pipe;
  if (s == "medium") return BenchDevice::Medium;
  return Err::InvalidArgument;
}

std::string csv_header() { return "payload,entry_layer,device,metric,value,seed"; }

std::string to_csv(const BenchRow& r) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%zu,%s,%s,%s,%.6f,%u", r.payload,
                r.entry.c_str(), r.device.c_str(), r.metric.c_str(), r.value,
                r.seed);
  return buf;
}

Result<std::vector<size_t>> parse_payload_spec(const std::string& spec) {
  auto num = [](const std::string& s) -> Result<size_t> {
    size_t v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size())
      return Err::InvalidArgument;
    return v;
  };
  std::vector<size_t> out;
  size_t c1 = spec.find(':');
  if (c1 == std::string::npos) {
    auto v = num(spec);
    if (!v) return v.error();
    out.push_back(*v);
    return out;
  }
  size_t c2 = spec.find(':', c1 + 1);
  if (c2 == std::string::npos) return Err::InvalidArgument;
  auto a = num(spec.substr(0, c1));
  auto b = num(spec.substr(c1 + 1, c2 - c1 - 1));
  auto step = num(spec.substr(c2 + 1));
  if (!a || !b || !step || *step == 0 || *a > *b) return Err::InvalidArgument;
  for (size_t v = *a; v <= *b; v += *step) out.push_back(v);
  return out;
}

namespace {

// key=value,key=value splitter shared by the route and neighbor specs.
Result<std::vector<std::pair<std::string, std::string>>> split_kv(
    const std::string& spec) {
  std::vector<std::pair<std::string, std::string>> out;
  size_t pos = 0;
  while (pos < spec.size()) {
    size_t comma = spec.find(',', pos);
    if (comma == std::string::npos) comma = spec.size();
    std::string item = spec.substr(pos, comma - pos);
    size_t eq = item.find('=');
    if (eq == std::string::npos || eq == 0) return Err::InvalidArgument;
    out.emplace_back(item.substr(0, eq), item.substr(eq + 1));
    pos = comma + 1;
  }
  return out;
}

}  // namespace

Result<Ipv6RouteOpt> parse_route_spec(const std::string& spec) {
  auto kv = split_kv(spec);
  if (!kv) return kv.error();
  Ipv6RouteOpt o;
  o.if_index = 1;
  bool have_prefix = false;
  for (auto& [k, v] : *kv) {
    if (k == "prefix") {
      size_t slash = v.find('/');
      if (slash == std::string::npos) return Err::InvalidArgument;
      auto a = Ipv6Addr::parse(v.substr(0, slash));
      if (!a) return a.error();
      int plen = std::atoi(v.c_str() + slash + 1);
      if (plen < 0 || plen > 128) return Err::InvalidArgument;
      o.prefix = *a;
      o.plen = static_cast<uint8_t>(plen);
      have_prefix = true;
    } else if (k == "via") {
      auto a = Ipv6Addr::parse(v);
      if (!a) return a.error();
      o.next_hop = *a;
    } else if (k == "if") {
      o.if_index = static_cast<uint8_t>(std::atoi(v.c_str()));
    } else {
      return Err::InvalidArgument;
    }
  }
  if (!have_prefix) return Err::InvalidArgument;
  return o;
}

Result<Ipv6NeighborOpt> parse_neigh_spec(const std::string& spec) {
  auto kv = split_kv(spec);
  if (!kv) return kv.error();
  Ipv6NeighborOpt o;
  o.if_index = 1;
  bool have_ip = false, have_l2 = false;
  for (auto& [k, v] : *kv) {
    if (k == "ip") {
      auto a = Ipv6Addr::parse(v);
      if (!a) return a.error();
      o.ip = *a;
      have_ip = true;
    } else if (k == "l2") {
      o.l2 = static_cast<uint16_t>(std::stoul(v, nullptr, 0));
      have_l2 = true;
    } else if (k == "if") {
      o.if_index = static_cast<uint8_t>(std::atoi(v.c_str()));
    } else {
      return Err::InvalidArgument;
    }
  }
  if (!have_ip || !have_l2) return Err::InvalidArgument;
  return o;
}

double theory_goodput_bps(size_t udp_payload, const MediumParams& p) {
  size_t datagram = kIpv6HdrSize + kUdpHdrSize + udp_payload;
  std::vector<uint8_t> dg(datagram);
  auto frags = sixlo::cut_fragments(dg, 0);
  uint64_t symbols = 0;
  for (const auto& f : frags) {
    uint64_t mpdu = ieee802154::kMhrSize + f.size() + ieee802154::kFcsSize;
    symbols += phy154::airtime_symbols(mpdu) + phy154::ifs_symbols(mpdu);
  }
  double elapsed_s = static_cast<double>(symbols * p.symbol_ns) * 1e-9;
  return static_cast<double>(udp_payload) * 8.0 / elapsed_s;
}

namespace {

constexpr uint16_t kSrcPort = 40000;
constexpr uint16_t kDstPort = 7;
constexpr uint8_t kRawProto = 0xFD;
constexpr size_t kMaxBenchPayload =
    sixlo::kMaxDatagram - kIpv6HdrSize - kUdpHdrSize;

Ipv6Addr addr_a() { return *Ipv6Addr::parse("2001:db8::aaaa"); }
Ipv6Addr addr_b() { return *Ipv6Addr::parse("2001:db8::bbbb"); }
Ipv6Addr prefix() { return *Ipv6Addr::parse("2001:db8::"); }

// Deterministic payload generator: same (seed, payload size, rep) always
// yields the same bytes, independent of entry layer and platform.
void fill_pattern(std::span<uint8_t> out, uint32_t seed, size_t payload,
                  size_t rep) {
  uint32_t x = seed * 2654435761u ^ static_cast<uint32_t>(payload) * 40503u ^
               static_cast<uint32_t>(rep) * 9973u;
  for (auto& b : out) {
    x = x * 1664525u + 1013904223u;
    b = static_cast<uint8_t>(x >> 24);
  }
}

PktBufConfig bench_pktbuf() {
  PktBufConfig c;
  c.capacity = 16384;
  c.max_snips = 128;
  return c;
}

Err apply_node_config(Stack& s, const BenchConfig& cfg, bool sender) {
  s.add_udp();
  s.add_ipv6();
  s.add_sixlowpan();
  // interface is added by the caller (device type differs)
  if (sender) {
    if (Err e = s.add_address(1, addr_a()); e != Err::None) return e;
    if (Err e = s.add_route(prefix(), 64, Ipv6Addr{}, 1); e != Err::None)
      return e;
    if (Err e = s.add_neighbor(addr_b(), 0xBBBB, 1); e != Err::None) return e;
    for (const auto& r : cfg.routes)
      s.add_route(r.prefix, r.plen, r.next_hop, r.if_index);
    for (const auto& n : cfg.neighbors) s.add_neighbor(n.ip, n.l2, n.if_index);
  } else {
    if (Err e = s.add_address(1, addr_b()); e != Err::None) return e;
  }
  return Err::None;
}

// The exact bytes Stack::udp_send would put on the wire for this payload.
std::vector<uint8_t> build_udp_datagram(std::span<const uint8_t> payload,
                                        uint8_t hop_limit) {
  UdpHeader uh;
  uh.src_port = kSrcPort;
  uh.dst_port = kDstPort;
  uh.length = static_cast<uint16_t>(kUdpHdrSize + payload.size());
  uh.checksum = udp_checksum(addr_a(), addr_b(), uh, payload);

  Ipv6Header h6;
  h6.payload_len = uh.length;
  h6.next_header = kProtoUdp;
  h6.hop_limit = hop_limit;
  h6.src = addr_a();
  h6.dst = addr_b();

  std::vector<uint8_t> dg(kIpv6HdrSize + kUdpHdrSize + payload.size());
  ipv6_encode(std::span(dg).first(kIpv6HdrSize), h6);
  udp_encode(std::span(dg).subspan(kIpv6HdrSize, kUdpHdrSize), uh);
  std::memcpy(dg.data() + kIpv6HdrSize + kUdpHdrSize, payload.data(),
              payload.size());
  return dg;
}

// Injects one datagram at the given layer. The cost meter is expected to
// be paused on entry; it runs exactly from the entry call until the stack
// goes idle.
Err inject(Stack& stack, EntryLayer entry, std::span<const uint8_t> payload,
           SockUdp* su, SockIp* si) {
  PktBuf& buf = stack.buf();
  switch (entry) {
    case EntryLayer::Sixlo: {
      std::vector<uint8_t> dg =
          build_udp_datagram(payload, stack.ipv6()->hop_limit());
      auto body = buf.add(kNullSnip, dg, NetType::Ipv6);
      if (!body) return body.error();
      NetifHeaderData info;
      info.dst = 0xBBBB;
      info.if_index = 1;
      uint8_t ib[sizeof info];
      info.store(ib);
      auto head = buf.add(*body, ib, NetType::Netif);
      if (!head) {
        buf.release(*body);
        return head.error();
      }
      stack.meter().resume();
      stack.dispatch(NetType::Sixlowpan, kDemuxAll, MsgKind::Snd, *head);
      return Err::None;
    }
    case EntryLayer::Ipv6: {
      std::vector<uint8_t> dg =
          build_udp_datagram(payload, stack.ipv6()->hop_limit());
      auto body = buf.add(
          kNullSnip, std::span(dg).subspan(kIpv6HdrSize), NetType::Udp);
      if (!body) return body.error();
      auto head =
          buf.add(*body, std::span(dg).first(kIpv6HdrSize), NetType::Ipv6);
      if (!head) {
        buf.release(*body);
        return head.error();
      }
      stack.meter().resume();
      stack.dispatch(NetType::Ipv6, kDemuxAll, MsgKind::Snd, *head);
      return Err::None;
    }
    case EntryLayer::Udp:
      stack.meter().resume();
      return stack.udp_send(addr_b(), kDstPort, kSrcPort, payload);
    case EntryLayer::SockUdp: {
      stack.meter().resume();
      auto r = su->send(payload);
      return r ? Err::None : r.error();
    }
    case EntryLayer::SockIp: {
      // Same datagram size as the UDP entries, different protocol.
      std::vector<uint8_t> pl(payload.size() + kUdpHdrSize);
      fill_pattern(pl, 0, payload.size(), 0);
      std::copy(payload.begin(), payload.end(), pl.begin() + kUdpHdrSize);
      stack.meter().resume();
      auto r = si->send(pl);
      return r ? Err::None : r.error();
    }
  }
  return Err::InvalidArgument;
}

Result<double> run_layer_once(const BenchConfig& cfg, EntryLayer entry,
                              size_t payload) {
  Scheduler sched;

  std::optional<ReflectorDevice> refl;
  std::optional<PipeDevice> pipe_a, pipe_b;
  std::optional<Medium> medium;
  std::optional<MediumDevice> med_a;
  Device* dev = nullptr;
  switch (cfg.device) {
    case BenchDevice::Reflector:
      refl.emplace(0xAAAA);
      dev = &*refl;
      break;
    case BenchDevice::Pipe:
      pipe_a.emplace(0xAAAA);
      pipe_b.emplace(0xBBBB);
      PipeDevice::link(*pipe_a, *pipe_b);
      dev = &*pipe_a;
      break;
    case BenchDevice::Medium:
      medium.emplace(sched, cfg.medium);
      med_a.emplace(*medium, 0xAAAA);
      dev = &*med_a;
      break;
  }

  Stack::Config sc;
  sc.pktbuf = bench_pktbuf();
  sc.sched = &sched;
  Stack stack(sc);
  stack.meter().pause();

  if (auto r = stack.add_interface(*dev, {}); !r) return r.error();
  if (Err e = apply_node_config(stack, cfg, true); e != Err::None) return e;

  SockUdp su;
  SockIp si;
  if (entry == EntryLayer::SockUdp) {
    SockEndpoint local{addr_a(), kSrcPort};
    SockEndpoint remote{addr_b(), kDstPort};
    if (Err e = su.create(stack, &local, &remote); e != Err::None) return e;
  }
  if (entry == EntryLayer::SockIp) {
    SockEndpoint remote{addr_b(), 0};
    if (Err e = si.create(stack, kRawProto, &remote); e != Err::None) return e;
  }

  sched.run();
  stack.meter().reset();

  std::vector<uint8_t> payload_bytes(payload);
  for (size_t rep = 0; rep < cfg.reps; rep++) {
    fill_pattern(payload_bytes, cfg.seed, payload, rep);
    Err e = inject(stack, entry, payload_bytes, &su, &si);
    if (e != Err::None) return e;
    sched.run();
    stack.meter().pause();
  }
  return static_cast<double>(stack.meter().units()) /
         static_cast<double>(cfg.reps);
}

}  // namespace

Result<std::vector<BenchRow>> bench_layer(const BenchConfig& cfg) {
  std::vector<EntryLayer> entries = cfg.entries;
  if (entries.empty())
    entries = {EntryLayer::Sixlo, EntryLayer::Ipv6, EntryLayer::Udp,
               EntryLayer::SockUdp, EntryLayer::SockIp};
  std::vector<BenchRow> rows;
  for (size_t payload : cfg.payloads) {
    if (payload > kMaxBenchPayload) return Err::DatagramTooLarge;
    for (EntryLayer e : entries) {
      auto v = run_layer_once(cfg, e, payload);
      if (!v) return v.error();
      rows.push_back({payload, entry_layer_name(e),
                      bench_device_name(cfg.device), "cost_units", *v,
                      cfg.seed});
    }
  }
  return rows;
}

namespace {

// Round trip cost proxy on the instant devices, virtual elapsed time on
// the medium. Returns delivered-payload bits per second.
Result<double> run_goodput_once(const BenchConfig& cfg, size_t payload) {
  Scheduler sched;

  std::optional<ReflectorDevice> refl;
  std::optional<PipeDevice> pipe_a, pipe_b;
  std::optional<Medium> medium;
  std::optional<MediumDevice> med_a, med_b;
  Device* dev_a = nullptr;
  Device* dev_b = nullptr;
  switch (cfg.device) {
    case BenchDevice::Reflector:
      refl.emplace(0xAAAA);
      dev_a = &*refl;
      break;
    case BenchDevice::Pipe:
      pipe_a.emplace(0xAAAA);
      pipe_b.emplace(0xBBBB);
      PipeDevice::link(*pipe_a, *pipe_b);
      dev_a = &*pipe_a;
      dev_b = &*pipe_b;
      break;
    case BenchDevice::Medium:
      medium.emplace(sched, cfg.medium);
      med_a.emplace(*medium, 0xAAAA);
      med_b.emplace(*medium, 0xBBBB);
      dev_a = &*med_a;
      dev_b = &*med_b;
      break;
  }

  Stack::Config sc;
  sc.pktbuf = bench_pktbuf();
  sc.sched = &sched;
  Stack a(sc);
  a.meter().pause();
  if (auto r = a.add_interface(*dev_a, {}); !r) return r.error();
  if (Err e = apply_node_config(a, cfg, true); e != Err::None) return e;

  std::optional<Stack> b;
  SockUdp sink;
  if (dev_b) {
    b.emplace(sc);
    b->meter().pause();
    if (auto r = b->add_interface(*dev_b, {}); !r) return r.error();
    if (Err e = apply_node_config(*b, cfg, false); e != Err::None) return e;
    SockEndpoint local{addr_b(), kDstPort};
    if (Err e = sink.create(*b, &local, nullptr); e != Err::None) return e;
  }

  sched.run();
  a.meter().reset();
  if (b) b->meter().reset();
  a.meter().resume();
  if (b) b->meter().resume();

  uint64_t t0 = sched.now();
  uint64_t delivered_bytes = 0;
  std::vector<uint8_t> payload_bytes(payload);
  std::vector<uint8_t> rxbuf(payload);
  for (size_t rep = 0; rep < cfg.reps; rep++) {
    fill_pattern(payload_bytes, cfg.seed, payload, rep);
    if (Err e = a.udp_send(addr_b(), kDstPort, kSrcPort, payload_bytes);
        e != Err::None)
      return e;
    sched.run();
    if (b) {
      auto n = sink.recv(rxbuf, 0);
      if (n) delivered_bytes += *n;
    } else {
      delivered_bytes += payload;  // no receiving node on this device
    }
  }

  double elapsed_s;
  if (cfg.device == BenchDevice::Medium) {
    uint64_t elapsed = sched.now() - t0;
    if (elapsed == 0) return Err::InvalidArgument;
    elapsed_s = static_cast<double>(elapsed) * 1e-9;
  } else {
    // Instant devices take no virtual time; the cost meter reading of all
    // participating nodes stands in as nanoseconds of CPU work.
    uint64_t units = a.meter().units() + (b ? b->meter().units() : 0);
    if (units == 0) return Err::InvalidArgument;
    elapsed_s = static_cast<double>(units) * 1e-9;
  }
  return static_cast<double>(delivered_bytes) * 8.0 / elapsed_s;
}

}  // namespace

Result<std::vector<BenchRow>> bench_goodput(const BenchConfig& cfg) {
  std::vector<BenchRow> rows;
  for (size_t payload : cfg.payloads) {
    if (payload > kMaxBenchPayload) return Err::DatagramTooLarge;
    auto v = run_goodput_once(cfg, payload);
    if (!v) return v.error();
    rows.push_back({payload, "udp", bench_device_name(cfg.device),
                    "goodput_bps", *v, cfg.seed});
    if (cfg.device == BenchDevice::Medium) {
      rows.push_back({payload, "udp", bench_device_name(cfg.device),
                      "theory_bps", theory_goodput_bps(payload, cfg.medium),
                      cfg.seed});
    }
  }
  return rows;
}

Result<std::vector<BenchRow>> bench_theory(const BenchConfig& cfg) {
  std::vector<BenchRow> rows;
  for (size_t payload : cfg.payloads) {
    if (payload > kMaxBenchPayload) return Err::DatagramTooLarge;
    rows.push_back({payload, "udp", "medium", "theory_bps",
                    theory_goodput_bps(payload, cfg.medium), cfg.seed});
  }
  return rows;
}

Result<std::vector<BenchRow>> run_bench(BenchMode mode,
                                        const BenchConfig& cfg) {
  switch (mode) {
    case BenchMode::Layer: return bench_layer(cfg);
    case BenchMode::Goodput: return bench_goodput(cfg);
    case BenchMode::Theory: return bench_theory(cfg);
  }
  return Err::InvalidArgument;
}

}  // namespace unet
