// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "unet/devices.hpp"
#include "unet/ipv6.hpp"
#include "unet/result.hpp"

namespace unet {

// Where a measurement run injects traffic. Each layer sits on top of the
// previous one, so cumulative costs grow along this order and adjacent
// differences isolate a single layer.
enum class EntryLayer { Sixlo, Ipv6, Udp, SockUdp, SockIp };
enum class BenchDevice { Reflector, Pipe, Medium };
enum class BenchMode { Layer, Goodput, Theory };

const char* entry_layer_name(EntryLayer e);
const char* bench_device_name(BenchDevice d);
Result<EntryLayer> parse_entry_layer(const std::string& s);
Result<BenchDevice> parse_bench_device(const std::string& s);

struct BenchConfig {
  BenchDevice device = BenchDevice::Reflector;
  // Empty means every layer (the useful setting for differencing).
  std::vector<EntryLayer> entries;
  std::vector<size_t> payloads;  // UDP payload bytes per datagram
  size_t reps = 8;
  uint32_t seed = 1;
  MediumParams medium;
  // Extra static configuration applied to the sending node on top of the
  // built-in two-node setup.
  std::vector<Ipv6RouteOpt> routes;
  std::vector<Ipv6NeighborOpt> neighbors;
};

// One CSV record. metric is one of cost_units, goodput_bps, theory_bps.
struct BenchRow {
  size_t payload = 0;
  std::string entry;
  std::string device;
  std::string metric;
  double value = 0.0;
  uint32_t seed = 0;
};

std::string csv_header();
std::string to_csv(const BenchRow& r);

// "a:b:step" or a single number.
Result<std::vector<size_t>> parse_payload_spec(const std::string& spec);
// "prefix=2001:db8::/64,via=fe80::1,if=1" (via optional, defaults on-link)
Result<Ipv6RouteOpt> parse_route_spec(const std::string& spec);
// "ip=2001:db8::2,l2=0xBBBB,if=1"
Result<Ipv6NeighborOpt> parse_neigh_spec(const std::string& spec);

// Closed-form link rate for one UDP payload size on a clean channel with
// no MAC reliability: fragment the datagram, sum per-frame airtime plus
// interframe spacing, divide payload bits by that time.
double theory_goodput_bps(size_t udp_payload, const MediumParams& p);

// Per-entry-layer processing cost in cost-meter units per datagram,
// measured on a device that takes zero virtual time so only stack work is
// visible. Rows carry cumulative values; consumers difference them.
Result<std::vector<BenchRow>> bench_layer(const BenchConfig& cfg);

// End-to-end goodput. On the simulated medium the elapsed time is virtual
// airtime; on the instant devices (reflector, pipe) it is the cost-meter
// reading used as a nanosecond proxy, which makes fragmentation overhead
// visible as rate steps. Medium runs also emit matching theory_bps rows.
Result<std::vector<BenchRow>> bench_goodput(const BenchConfig& cfg);

// Theory rows only, no simulation.
Result<std::vector<BenchRow>> bench_theory(const BenchConfig& cfg);

Result<std::vector<BenchRow>> run_bench(BenchMode mode, const BenchConfig& cfg);

}  // namespace unet
