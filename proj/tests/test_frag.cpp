// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <numeric>
#include <random>
#include <vector>

#include "doctest.h"
#include "helpers.hpp"
#include "oracles.hpp"
#include "unet/sched.hpp"
#include "unet/sixlowpan.hpp"

using namespace unet;
using sixlo::FragHeader;

namespace {

// Feeds one wire fragment into `r` the way the receive path would: parse
// the header, locate the datagram share, feed it under `key_base` + parsed
// tag/size.
Result<std::vector<uint8_t>> feed_wire(Reassembler& r, uint16_t src,
                                       uint16_t dst,
                                       std::span<const uint8_t> frag) {
  auto h = sixlo::frag_parse(frag);
  REQUIRE(h);
  size_t data_off = h->first ? sixlo::kFrag1HdrSize + 1 : sixlo::kFragNHdrSize;
  Reassembler::Key key{src, dst, h->tag, h->size};
  return r.feed(key, h->offset, frag.subspan(data_off));
}

}  // namespace

TEST_SUITE("frag") {

TEST_CASE("header encode/parse round trip") {
  uint8_t w[8];

  FragHeader first;
  first.first = true;
  first.size = 1048;
  first.tag = 0xBEEF;
  CHECK(sixlo::frag_encode(w, first) == sixlo::kFrag1HdrSize);
  CHECK(w[0] == (0xC0 | (1048 >> 8)));
  CHECK(w[1] == (1048 & 0xFF));
  CHECK(w[2] == 0xBE);
  CHECK(w[3] == 0xEF);
  auto p = sixlo::frag_parse({w, sixlo::kFrag1HdrSize});
  REQUIRE(p);
  CHECK(p->first);
  CHECK(p->size == 1048);
  CHECK(p->tag == 0xBEEF);
  CHECK(p->offset == 0);

  FragHeader later;
  later.first = false;
  later.size = 2047;
  later.tag = 7;
  later.offset = 960;
  CHECK(sixlo::frag_encode(w, later) == sixlo::kFragNHdrSize);
  CHECK(w[0] == (0xE0 | (2047 >> 8)));
  CHECK(w[1] == (2047 & 0xFF));
  CHECK(w[4] == 960 / 8);
  p = sixlo::frag_parse({w, sixlo::kFragNHdrSize});
  REQUIRE(p);
  CHECK(!p->first);
  CHECK(p->size == 2047);
  CHECK(p->tag == 7);
  CHECK(p->offset == 960);
}

TEST_CASE("parse rejects malformed input") {
  uint8_t w[8] = {};
  CHECK(sixlo::frag_parse({w, 3}).error() == Err::BadLength);

  FragHeader later;
  later.first = false;
  later.size = 300;
  sixlo::frag_encode(w, later);
  CHECK(sixlo::frag_parse({w, 4}).error() == Err::BadLength);

  w[0] = 0x41;  // plain dispatch byte, not a fragment header
  CHECK(sixlo::frag_parse({w, 5}).error() == Err::InvalidDispatch);
  w[0] = 0xD0;  // hole between the two fragment dispatch patterns
  CHECK(sixlo::frag_parse({w, 5}).error() == Err::InvalidDispatch);
}

TEST_CASE("small datagrams travel as one dispatch-prefixed frame") {
  auto data = testutil::pattern(101, 3);
  auto frags = sixlo::cut_fragments(data, 42);
  REQUIRE(frags.size() == 1);
  REQUIRE(frags[0].size() == 102);
  CHECK(frags[0][0] == sixlo::kDispatchIpv6);
  CHECK(std::equal(data.begin(), data.end(), frags[0].begin() + 1));
}

TEST_CASE("fragment trains carry the datagram exactly") {
  std::mt19937 rng(0xF7A6);
  std::vector<size_t> sizes = {102, 103, 191, 192, 193, 1048, 2046, 2047};
  for (int i = 0; i < 40; i++)
    sizes.push_back(102 + rng() % (sixlo::kMaxDatagram - 101));

  for (size_t n : sizes) {
    CAPTURE(n);
    auto data = testutil::pattern(n, static_cast<uint32_t>(n));
    uint16_t tag = static_cast<uint16_t>(rng());
    auto frags = sixlo::cut_fragments(data, tag);
    REQUIRE(frags.size() == oracle::fragment_count(n));

    std::vector<uint8_t> rebuilt(n, 0);
    size_t expect_off = 0;
    for (size_t i = 0; i < frags.size(); i++) {
      const auto& f = frags[i];
      REQUIRE(f.size() <= sixlo::kFragMtu);
      auto h = sixlo::frag_parse(f);
      REQUIRE(h);
      CHECK(h->first == (i == 0));
      CHECK(h->size == n);
      CHECK(h->tag == tag);
      CHECK(h->offset == expect_off);
      CHECK(h->offset % 8 == 0);
      size_t data_off;
      if (i == 0) {
        CHECK(f[sixlo::kFrag1HdrSize] == sixlo::kDispatchIpv6);
        data_off = sixlo::kFrag1HdrSize + 1;
      } else {
        data_off = sixlo::kFragNHdrSize;
      }
      size_t share = f.size() - data_off;
      CHECK((share % 8 == 0 || i == frags.size() - 1));
      std::copy(f.begin() + static_cast<long>(data_off), f.end(),
                rebuilt.begin() + static_cast<long>(expect_off));
      expect_off += share;
    }
    CHECK(expect_off == n);
    CHECK(rebuilt == data);
  }
}

TEST_CASE("fragment count steps exactly at the wire boundaries") {
  for (size_t n = 1; n <= sixlo::kMaxDatagram; n++) {
    size_t want = oracle::fragment_count(n);
    if (sixlo::fragment_count(n) != want) {
      CAPTURE(n);
      CHECK(sixlo::fragment_count(n) == want);
    }
    if (sixlo::cut_fragments(std::vector<uint8_t>(n, 0xAB), 1).size() != want) {
      CAPTURE(n);
      CHECK(sixlo::cut_fragments(std::vector<uint8_t>(n, 0xAB), 1).size() == want);
    }
  }
}

TEST_CASE("reassembly is order independent") {
  std::mt19937 rng(0x5EED);
  uint16_t tag = 0;
  for (int d = 0; d < 32; d++) {
    size_t n = 102 + rng() % (sixlo::kMaxDatagram - 101);
    auto data = testutil::pattern(n, static_cast<uint32_t>(d) + 1);
    for (int shuffle = 0; shuffle < 100; shuffle++) {
      Reassembler r;
      auto frags = sixlo::cut_fragments(data, tag++);
      std::vector<size_t> order(frags.size());
      std::iota(order.begin(), order.end(), 0);
      std::shuffle(order.begin(), order.end(), rng);

      std::vector<uint8_t> got;
      for (size_t k = 0; k < order.size(); k++) {
        auto res = feed_wire(r, 0xA1, 0xB2, frags[order[k]]);
        REQUIRE(res);
        if (k + 1 < order.size()) {
          REQUIRE(res->empty());
        } else {
          got = *res;
        }
      }
      if (got != data) {
        CAPTURE(n);
        CAPTURE(shuffle);
        REQUIRE(got == data);
      }
      CHECK(r.active() == 0);
    }
  }
}

TEST_CASE("retransmitted fragments are tolerated") {
  Reassembler r;
  auto data = testutil::pattern(300, 9);
  auto frags = sixlo::cut_fragments(data, 5);
  REQUIRE(frags.size() == 4);
  auto res = feed_wire(r, 1, 2, frags[0]);
  REQUIRE(res);
  CHECK(res->empty());
  res = feed_wire(r, 1, 2, frags[0]);  // same bytes again
  REQUIRE(res);
  CHECK(res->empty());
  CHECK(r.overlap_drops() == 0);
  res = feed_wire(r, 1, 2, frags[1]);
  REQUIRE(res);
  res = feed_wire(r, 1, 2, frags[3]);
  REQUIRE(res);
  res = feed_wire(r, 1, 2, frags[2]);
  REQUIRE(res);
  CHECK(*res == data);
}

TEST_CASE("conflicting overlap poisons the buffer") {
  Reassembler r;
  auto data = testutil::pattern(300, 11);
  auto frags = sixlo::cut_fragments(data, 6);
  REQUIRE(feed_wire(r, 1, 2, frags[0]));
  auto evil = frags[0];
  evil[sixlo::kFrag1HdrSize + 1] ^= 0xFF;  // same key, different content
  auto res = feed_wire(r, 1, 2, evil);
  CHECK(res.error() == Err::OverlapMismatch);
  CHECK(r.overlap_drops() == 1);
  CHECK(r.active() == 0);
  // The key is tombstoned: honest retransmissions are now stale.
  res = feed_wire(r, 1, 2, frags[1]);
  CHECK(res.error() == Err::StaleTag);
  CHECK(r.stale_drops() == 1);
}

TEST_CASE("completed keys are tombstoned against stragglers") {
  Reassembler r;
  auto data = testutil::pattern(200, 12);
  auto frags = sixlo::cut_fragments(data, 7);
  for (size_t i = 0; i < frags.size(); i++) REQUIRE(feed_wire(r, 1, 2, frags[i]));
  auto res = feed_wire(r, 1, 2, frags[1]);
  CHECK(res.error() == Err::StaleTag);
  CHECK(r.stale_drops() == 1);
}

TEST_CASE("a different link pair is a different datagram") {
  Reassembler r;
  auto data = testutil::pattern(200, 13);
  auto frags = sixlo::cut_fragments(data, 8);
  REQUIRE(feed_wire(r, 1, 2, frags[0]));
  REQUIRE(feed_wire(r, 3, 4, frags[0]));
  CHECK(r.active() == 2);
  auto a = feed_wire(r, 1, 2, frags[1]);
  auto b = feed_wire(r, 3, 4, frags[1]);
  auto a2 = feed_wire(r, 1, 2, frags[2]);
  auto b2 = feed_wire(r, 3, 4, frags[2]);
  REQUIRE(a2);
  REQUIRE(b2);
  CHECK(*a2 == data);
  CHECK(*b2 == data);
  CHECK(r.active() == 0);
  CHECK(a->empty());
  CHECK(b->empty());
}

TEST_CASE("tombstones are a bounded FIFO") {
  Reassembler r;
  // Nine instantly completed keys: the first tombstone gets evicted.
  std::vector<uint8_t> share(16, 0x21);
  for (uint16_t t = 0; t < 9; t++) {
    Reassembler::Key k{1, 2, t, 16};
    auto res = r.feed(k, 0, share);
    REQUIRE(res);
    CHECK(res->size() == 16);
  }
  // Key tag 0 fell off the FIFO and is usable again. Its completion puts a
  // fresh tombstone at the tail, which in turn evicts tag 1.
  auto res = r.feed({1, 2, 0, 16}, 0, share);
  REQUIRE(res);
  CHECK(res->size() == 16);
  // Key tag 2 is still tombstoned.
  res = r.feed({1, 2, 2, 16}, 0, share);
  CHECK(res.error() == Err::StaleTag);
}

TEST_CASE("buffer exhaustion and recovery") {
  Reassembler r;
  std::vector<uint8_t> half(48, 0x42);
  for (uint16_t t = 0; t < Reassembler::kBuffers; t++) {
    auto res = r.feed({1, 2, t, 96}, 0, half);
    REQUIRE(res);
    CHECK(res->empty());
  }
  CHECK(r.active() == Reassembler::kBuffers);
  auto res = r.feed({1, 2, 99, 96}, 0, half);
  CHECK(res.error() == Err::ReassemblyFull);

  // Completing one buffer frees its slot.
  res = r.feed({1, 2, 0, 96}, 48, half);
  REQUIRE(res);
  CHECK(res->size() == 96);
  res = r.feed({1, 2, 99, 96}, 0, half);
  REQUIRE(res);
  CHECK(res->empty());
  CHECK(r.active() == Reassembler::kBuffers);
}

TEST_CASE("share validation") {
  Reassembler r;
  std::vector<uint8_t> share(32, 1);
  CHECK(r.feed({1, 2, 0, 96}, 0, {}).error() == Err::BadLength);
  CHECK(r.feed({1, 2, 0, 96}, 80, share).error() == Err::BadLength);
  CHECK(r.feed({1, 2, 0, 16}, 0, share).error() == Err::BadLength);
  CHECK(r.active() == 0);
}

TEST_CASE("stalled buffers time out on the virtual clock") {
  Scheduler sched;
  Reassembler r(&sched);
  auto data = testutil::pattern(300, 14);
  auto frags = sixlo::cut_fragments(data, 30);
  REQUIRE(feed_wire(r, 1, 2, frags[0]));
  CHECK(r.active() == 1);

  sched.run_until(Reassembler::kTimeoutNs - 1);
  CHECK(r.active() == 1);
  CHECK(r.timeouts() == 0);

  sched.run_until(Reassembler::kTimeoutNs);
  CHECK(r.active() == 0);
  CHECK(r.timeouts() == 1);

  // Late fragments for the abandoned key are stale, and a fresh tag opens
  // a fresh buffer.
  CHECK(feed_wire(r, 1, 2, frags[1]).error() == Err::StaleTag);
  auto frags2 = sixlo::cut_fragments(data, 31);
  REQUIRE(feed_wire(r, 1, 2, frags2[0]));
  CHECK(r.active() == 1);
}

TEST_CASE("completion cancels the timeout timer") {
  Scheduler sched;
  Reassembler r(&sched);
  auto data = testutil::pattern(200, 15);
  auto frags = sixlo::cut_fragments(data, 40);
  for (auto& f : frags) REQUIRE(feed_wire(r, 1, 2, f));
  sched.run();
  CHECK(r.timeouts() == 0);
  CHECK(sched.timers_fired() == 0);
}

}  // TEST_SUITE
