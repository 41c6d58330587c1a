// SPDX-License-Identifier: Apache-2.0

#include <string>
#include <vector>

#include "doctest.h"
#include "helpers.hpp"
#include "unet/bench.hpp"

using namespace unet;

namespace {

std::string rows_csv(const std::vector<BenchRow>& rows) {
  std::string out = csv_header();
  for (const auto& r : rows) {
    out += '\n';
    out += to_csv(r);
  }
  return out;
}

double row_value(const std::vector<BenchRow>& rows, const std::string& entry,
                 const std::string& metric, size_t payload) {
  for (const auto& r : rows)
    if (r.entry == entry && r.metric == metric && r.payload == payload)
      return r.value;
  FAIL("no such row: ", entry, " ", metric, " ", payload);
  return 0.0;
}

}  // namespace

TEST_SUITE("bench") {

TEST_CASE("names and their parsers round trip") {
  for (EntryLayer e : {EntryLayer::Sixlo, EntryLayer::Ipv6, EntryLayer::Udp,
                       EntryLayer::SockUdp, EntryLayer::SockIp}) {
    auto back = parse_entry_layer(entry_layer_name(e));
    REQUIRE(back);
    CHECK(*back == e);
  }
  for (BenchDevice d :
       {BenchDevice::Reflector, BenchDevice::Pipe, BenchDevice::Medium}) {
    auto back = parse_bench_device(bench_device_name(d));
    REQUIRE(back);
    CHECK(*back == d);
  }
  CHECK(parse_entry_layer("tcp").error() == Err::InvalidArgument);
  CHECK(parse_entry_layer("").error() == Err::InvalidArgument);
  CHECK(parse_bench_device("wire").error() == Err::InvalidArgument);
}

TEST_CASE("payload specs") {
  auto one = parse_payload_spec("100");
  REQUIRE(one);
  CHECK(*one == std::vector<size_t>{100});

  auto range = parse_payload_spec("1:7:2");
  REQUIRE(range);
  CHECK(*range == std::vector<size_t>{1, 3, 5, 7});

  auto uneven = parse_payload_spec("1:6:2");
  REQUIRE(uneven);
  CHECK(*uneven == std::vector<size_t>{1, 3, 5});

  auto single = parse_payload_spec("10:10:3");
  REQUIRE(single);
  CHECK(*single == std::vector<size_t>{10});

  CHECK(parse_payload_spec("").error() == Err::InvalidArgument);
  CHECK(parse_payload_spec("abc").error() == Err::InvalidArgument);
  CHECK(parse_payload_spec("1:5").error() == Err::InvalidArgument);
  CHECK(parse_payload_spec("5:1:1").error() == Err::InvalidArgument);
  CHECK(parse_payload_spec("1:5:0").error() == Err::InvalidArgument);
  CHECK(parse_payload_spec("1:5:2:9").error() == Err::InvalidArgument);
  CHECK(parse_payload_spec(" 100").error() == Err::InvalidArgument);
}

TEST_CASE("route specs") {
  auto full = parse_route_spec("prefix=2001:db8::/64,via=fe80::1,if=2");
  REQUIRE(full);
  CHECK(full->prefix == *Ipv6Addr::parse("2001:db8::"));
  CHECK(full->plen == 64);
  CHECK(full->next_hop == *Ipv6Addr::parse("fe80::1"));
  CHECK(full->if_index == 2);

  // On-link default: no via, interface 1.
  auto onlink = parse_route_spec("prefix=fd00::/8");
  REQUIRE(onlink);
  CHECK(onlink->plen == 8);
  CHECK(onlink->next_hop.is_unspecified());
  CHECK(onlink->if_index == 1);

  CHECK(parse_route_spec("via=fe80::1").error() == Err::InvalidArgument);
  CHECK(parse_route_spec("prefix=2001:db8::").error() == Err::InvalidArgument);
  CHECK(parse_route_spec("prefix=2001:db8::/200").error() ==
        Err::InvalidArgument);
  CHECK(!parse_route_spec("prefix=bogus/64"));
  CHECK(parse_route_spec("prefix=fd00::/8,color=red").error() ==
        Err::InvalidArgument);
  CHECK(parse_route_spec("=x").error() == Err::InvalidArgument);
}

TEST_CASE("neighbor specs") {
  auto full = parse_neigh_spec("ip=2001:db8::2,l2=0xBBBB,if=3");
  REQUIRE(full);
  CHECK(full->ip == *Ipv6Addr::parse("2001:db8::2"));
  CHECK(full->l2 == 0xBBBB);
  CHECK(full->if_index == 3);

  auto dec = parse_neigh_spec("ip=fe80::9,l2=4660");
  REQUIRE(dec);
  CHECK(dec->l2 == 4660);
  CHECK(dec->if_index == 1);

  CHECK(parse_neigh_spec("ip=fe80::9").error() == Err::InvalidArgument);
  CHECK(parse_neigh_spec("l2=0x1").error() == Err::InvalidArgument);
  CHECK(!parse_neigh_spec("ip=junk,l2=1"));
  CHECK(parse_neigh_spec("ip=fe80::9,l2=1,speed=9").error() ==
        Err::InvalidArgument);
}

TEST_CASE("medium parameter files") {
  auto p = parse_medium_params(
      "# radio setup\n"
      "symbol_ns = 4000\n"
      "loss = 0.25\n"
      "csma = yes\n"
      "ack = on   # trailing comment\n"
      "seed = 0x2A\n"
      "\n"
      "min_be = 2\n"
      "max_be = 6\n"
      "max_backoffs = 5\n"
      "max_retries = 7\n");
  REQUIRE(p);
  CHECK(p->symbol_ns == 4000);
  CHECK(p->loss == doctest::Approx(0.25));
  CHECK(p->csma);
  CHECK(p->ack);
  CHECK(p->seed == 42);
  CHECK(p->min_be == 2);
  CHECK(p->max_be == 6);
  CHECK(p->max_backoffs == 5);
  CHECK(p->max_retries == 7);

  auto d = parse_medium_params("");
  REQUIRE(d);
  MediumParams def;
  CHECK(d->symbol_ns == def.symbol_ns);
  CHECK(d->loss == def.loss);
  CHECK(d->csma == def.csma);
  CHECK(d->seed == def.seed);

  auto off = parse_medium_params("csma = false\nack = 0\n");
  REQUIRE(off);
  CHECK(!off->csma);
  CHECK(!off->ack);

  CHECK(parse_medium_params("symbol_ns 4000").error() == Err::InvalidArgument);
  CHECK(parse_medium_params("symbol_ns = 0").error() == Err::InvalidArgument);
  CHECK(parse_medium_params("loss = 1.5").error() == Err::InvalidArgument);
  CHECK(parse_medium_params("loss = -0.1").error() == Err::InvalidArgument);
  CHECK(parse_medium_params("csma = maybe").error() == Err::InvalidArgument);
  CHECK(parse_medium_params("bandwidth = 9").error() == Err::InvalidArgument);
  CHECK(parse_medium_params("min_be = 9").error() == Err::InvalidArgument);
  CHECK(parse_medium_params("min_be = 5\nmax_be = 3\n").error() ==
        Err::InvalidArgument);
  CHECK(parse_medium_params("seed = 12junk").error() == Err::InvalidArgument);
}

TEST_CASE("csv shape") {
  CHECK(csv_header() == "payload,entry_layer,device,metric,value,seed");
  BenchRow r{100, "udp", "medium", "goodput_bps", 91911.764706, 7};
  CHECK(to_csv(r) == "100,udp,medium,goodput_bps,91911.764706,7");
  BenchRow z{0, "sixlo", "reflector", "cost_units", 0.5, 0};
  CHECK(to_csv(z) == "0,sixlo,reflector,cost_units,0.500000,0");
}

TEST_CASE("closed form link rate") {
  MediumParams p;  // clean defaults, 16 us symbols

  // 50 payload bytes ride one frame: 1 dispatch byte + 98 datagram bytes,
  // an 110 byte MPDU with overhead and FCS, 232 symbols of airtime plus a
  // 40 symbol gap.
  double elapsed_s = static_cast<double>(272ull * p.symbol_ns) * 1e-9;
  double want = 50.0 * 8.0 / elapsed_s;
  CHECK(theory_goodput_bps(50, p) == want);

  // Scaling the symbol time scales the rate inversely.
  MediumParams slow = p;
  slow.symbol_ns = 32000;
  CHECK(theory_goodput_bps(50, slow) == doctest::Approx(want / 2));

  // More payload per frame means better efficiency within one frame...
  CHECK(theory_goodput_bps(53, p) > theory_goodput_bps(50, p));
  // ...and the first fragmentation step costs a visible rate drop.
  CHECK(theory_goodput_bps(54, p) < theory_goodput_bps(53, p));
}

TEST_CASE("layer costs are ordered and reproducible") {
  BenchConfig cfg;
  cfg.device = BenchDevice::Reflector;
  cfg.payloads = {100, 1000};
  cfg.reps = 2;
  cfg.seed = 1;

  auto rows = bench_layer(cfg);
  REQUIRE(rows);
  REQUIRE(rows->size() == 10);  // every entry layer by default

  for (size_t payload : {size_t(100), size_t(1000)}) {
    CAPTURE(payload);
    double c_sixlo = row_value(*rows, "sixlo", "cost_units", payload);
    double c_ipv6 = row_value(*rows, "ipv6", "cost_units", payload);
    double c_udp = row_value(*rows, "udp", "cost_units", payload);
    double c_su = row_value(*rows, "sock_udp", "cost_units", payload);
    double c_si = row_value(*rows, "sock_ip", "cost_units", payload);

    CHECK(c_sixlo > 0);
    CHECK(c_sixlo < c_ipv6);
    CHECK(c_ipv6 < c_udp);
    CHECK(c_udp <= c_su);
    CHECK(c_udp <= c_si);
  }

  // With a long fragment train the per-layer increments order themselves by
  // where the work is: fragmentation above next-hop handling above ports.
  double c_sixlo = row_value(*rows, "sixlo", "cost_units", 1000);
  double c_ipv6 = row_value(*rows, "ipv6", "cost_units", 1000);
  double c_udp = row_value(*rows, "udp", "cost_units", 1000);
  CHECK(c_sixlo > c_ipv6 - c_sixlo);
  CHECK(c_ipv6 - c_sixlo > c_udp - c_ipv6);
  CHECK(c_udp - c_ipv6 > 0);

  auto again = bench_layer(cfg);
  REQUIRE(again);
  CHECK(rows_csv(*rows) == rows_csv(*again));
}

TEST_CASE("clean medium goodput equals the closed form") {
  BenchConfig cfg;
  cfg.device = BenchDevice::Medium;
  cfg.payloads = {50, 500};
  cfg.reps = 4;

  auto rows = bench_goodput(cfg);
  REQUIRE(rows);
  REQUIRE(rows->size() == 4);  // goodput and theory per payload

  for (size_t payload : {size_t(50), size_t(500)}) {
    CAPTURE(payload);
    double g = row_value(*rows, "udp", "goodput_bps", payload);
    double t = row_value(*rows, "udp", "theory_bps", payload);
    CHECK(g == doctest::Approx(t).epsilon(1e-12));
  }
}

TEST_CASE("losses and contention stay below the closed form") {
  BenchConfig cfg;
  cfg.device = BenchDevice::Medium;
  cfg.payloads = {50};
  cfg.reps = 8;
  cfg.medium.loss = 0.2;
  cfg.medium.csma = true;
  cfg.medium.ack = true;
  cfg.medium.seed = 7;

  auto rows = bench_goodput(cfg);
  REQUIRE(rows);
  double g = row_value(*rows, "udp", "goodput_bps", 50);
  double t = row_value(*rows, "udp", "theory_bps", 50);
  CHECK(g < t);
  CHECK(g > 0);

  auto again = bench_goodput(cfg);
  REQUIRE(again);
  CHECK(rows_csv(*rows) == rows_csv(*again));
}

TEST_CASE("instant device goodput reacts to fragmentation") {
  BenchConfig cfg;
  cfg.device = BenchDevice::Pipe;
  cfg.payloads = {53, 54};
  cfg.reps = 2;

  auto rows = bench_goodput(cfg);
  REQUIRE(rows);
  REQUIRE(rows->size() == 2);
  // One extra frame of stack work per datagram shows up as a rate step in
  // the cost-proxy reading.
  CHECK(row_value(*rows, "udp", "goodput_bps", 53) >
        row_value(*rows, "udp", "goodput_bps", 54));
}

TEST_CASE("oversized payloads are rejected in every mode") {
  BenchConfig cfg;
  cfg.payloads = {2000};
  CHECK(bench_layer(cfg).error() == Err::DatagramTooLarge);
  CHECK(bench_goodput(cfg).error() == Err::DatagramTooLarge);
  CHECK(bench_theory(cfg).error() == Err::DatagramTooLarge);

  cfg.payloads = {1999};
  auto ok = bench_theory(cfg);
  REQUIRE(ok);
  CHECK(ok->size() == 1);
}

TEST_CASE("run_bench selects the mode") {
  BenchConfig cfg;
  cfg.payloads = {60};
  cfg.reps = 1;

  auto t = run_bench(BenchMode::Theory, cfg);
  REQUIRE(t);
  CHECK(t->size() == 1);
  CHECK((*t)[0].metric == "theory_bps");

  cfg.device = BenchDevice::Reflector;
  cfg.entries = {EntryLayer::Udp};
  auto l = run_bench(BenchMode::Layer, cfg);
  REQUIRE(l);
  CHECK(l->size() == 1);
  CHECK((*l)[0].metric == "cost_units");
  CHECK((*l)[0].entry == "udp");

  auto g = run_bench(BenchMode::Goodput, cfg);
  REQUIRE(g);
  CHECK((*g)[0].metric == "goodput_bps");
}

}  // TEST_SUITE("bench")
