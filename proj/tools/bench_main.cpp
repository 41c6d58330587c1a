// SPDX-License-Identifier: Apache-2.0
//
// Command line front end for the measurement harness. Emits plot-ready CSV
// on stdout or into --out.

#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "unet/bench.hpp"

namespace {

struct Cli {
  std::string device = "reflector";
  std::string payload = "100";
  std::vector<std::string> entries;
  std::vector<std::string> routes;
  std::vector<std::string> neighs;
  std::size_t reps = 8;
  std::uint32_t seed = 1;
  std::string out;
  std::string config;
};

void add_common(CLI::App* sub, Cli& c) {
  sub->add_option("--device", c.device, "reflector, pipe or medium")
      ->check(CLI::IsMember({"reflector", "pipe", "medium"}));
  sub->add_option("--payload", c.payload,
                  "UDP payload bytes, single value or a:b:step sweep");
  sub->add_option("--entry", c.entries,
                  "entry layer (repeatable): sixlo ipv6 udp sock_udp sock_ip");
  sub->add_option("--reps", c.reps, "datagrams per measurement point");
  sub->add_option("--seed", c.seed, "payload pattern and medium RNG seed");
  sub->add_option("--out", c.out, "CSV output file (default stdout)");
  sub->add_option("--config", c.config, "medium parameter file (key = value)");
  sub->add_option("--route", c.routes,
                  "extra route, prefix=ADDR/LEN[,via=ADDR][,if=N]");
  sub->add_option("--neigh", c.neighs,
                  "extra neighbor, ip=ADDR,l2=0xNNNN[,if=N]");
}

int fail(const std::string& what, unet::Err e) {
  std::cerr << "error: " << what << ": " << unet::err_name(e) << "\n";
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Networking stack measurement harness: per-layer processing cost and "
      "end-to-end goodput over the virtual link devices."};
  app.require_subcommand(1);
  Cli c;

  CLI::App* layer = app.add_subcommand(
      "layer", "cumulative per-entry-layer cost in cost-meter units");
  CLI::App* goodput =
      app.add_subcommand("goodput", "end-to-end goodput in bits per second");
  CLI::App* theory = app.add_subcommand(
      "theory", "closed-form clean-channel goodput, no simulation");
  add_common(layer, c);
  add_common(goodput, c);
  add_common(theory, c);

  CLI11_PARSE(app, argc, argv);

  unet::BenchMode mode = unet::BenchMode::Layer;
  CLI::App* sub = layer;
  if (goodput->parsed()) {
    mode = unet::BenchMode::Goodput;
    sub = goodput;
  } else if (theory->parsed()) {
    mode = unet::BenchMode::Theory;
    sub = theory;
  }

  unet::BenchConfig cfg;
  cfg.reps = c.reps;
  cfg.seed = c.seed;

  auto dev = unet::parse_bench_device(c.device);
  if (!dev) return fail("--device", dev.error());
  cfg.device = *dev;

  auto payloads = unet::parse_payload_spec(c.payload);
  if (!payloads) return fail("--payload", payloads.error());
  cfg.payloads = *payloads;

  for (const auto& s : c.entries) {
    auto e = unet::parse_entry_layer(s);
    if (!e) return fail("--entry " + s, e.error());
    cfg.entries.push_back(*e);
  }
  for (const auto& s : c.routes) {
    auto r = unet::parse_route_spec(s);
    if (!r) return fail("--route " + s, r.error());
    cfg.routes.push_back(*r);
  }
  for (const auto& s : c.neighs) {
    auto n = unet::parse_neigh_spec(s);
    if (!n) return fail("--neigh " + s, n.error());
    cfg.neighbors.push_back(*n);
  }

  cfg.medium.seed = c.seed;
  if (!c.config.empty()) {
    std::ifstream in(c.config);
    if (!in) {
      std::cerr << "error: cannot open " << c.config << "\n";
      return 1;
    }
    std::stringstream ss;
    ss << in.rdbuf();
    auto p = unet::parse_medium_params(ss.str());
    if (!p) return fail("--config", p.error());
    cfg.medium = *p;
    // An explicit --seed wins over the file for the RNG too.
    if (sub->count("--seed") > 0) cfg.medium.seed = c.seed;
  }

  auto rows = unet::run_bench(mode, cfg);
  if (!rows) return fail("run", rows.error());

  std::ostream* os = &std::cout;
  std::ofstream file;
  if (!c.out.empty()) {
    file.open(c.out);
    if (!file) {
      std::cerr << "error: cannot write " << c.out << "\n";
      return 1;
    }
    os = &file;
  }
  *os << unet::csv_header() << "\n";
  for (const auto& r : *rows) *os << unet::to_csv(r) << "\n";
  return 0;
}
