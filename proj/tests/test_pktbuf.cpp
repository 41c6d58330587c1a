// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <random>

#include "doctest.h"
#include "helpers.hpp"
#include "oracles.hpp"
#include "unet/pktbuf.hpp"

using namespace unet;

namespace {

PktBufConfig lenient(size_t cap = 6144, size_t snips = 128) {
  PktBufConfig c;
  c.capacity = cap;
  c.max_snips = snips;
  c.abort_on_misuse = false;
  return c;
}

}  // namespace

TEST_SUITE("pktbuf") {

TEST_CASE("add and release round trip") {
  PktBuf buf(lenient());
  auto data = testutil::pattern(100);
  auto h = buf.add(kNullSnip, data, NetType::Udp);
  REQUIRE(h.ok());
  CHECK(*buf.size(*h) == 100);
  CHECK(*buf.type(*h) == NetType::Udp);
  CHECK(*buf.users(*h) == 1);
  CHECK(*buf.next(*h) == kNullSnip);
  CHECK(buf.read_all(*h) == data);

  auto st = buf.stats();
  CHECK(st.live_snips == 1);
  CHECK(st.used == PktBuf::chunk_cost(100));

  CHECK(buf.release(*h) == Err::None);
  st = buf.stats();
  CHECK(st.live_snips == 0);
  CHECK(st.used == 0);
  CHECK(st.high_watermark == PktBuf::chunk_cost(100));
}

TEST_CASE("chains release as a cascade") {
  PktBuf buf(lenient());
  auto a = buf.add(kNullSnip, testutil::pattern(10), NetType::Undef);
  auto b = buf.add(*a, testutil::pattern(20), NetType::Udp);
  auto c = buf.add(*b, testutil::pattern(30), NetType::Ipv6);
  REQUIRE(c.ok());
  CHECK(buf.chain_size(*c) == 60);
  CHECK(buf.chain_length(*c) == 3);
  CHECK(buf.release(*c) == Err::None);
  CHECK(buf.stats().live_snips == 0);
  CHECK(buf.stats().used == 0);
}

TEST_CASE("shared tail survives a head release") {
  PktBuf buf(lenient());
  auto tail = buf.add(kNullSnip, testutil::pattern(16), NetType::Undef);
  auto head = buf.add(*tail, testutil::pattern(8), NetType::Ipv6);
  REQUIRE(head.ok());
  REQUIRE(buf.hold(*tail) == Err::None);  // second owner of the tail
  CHECK(*buf.users(*tail) == 2);

  CHECK(buf.release(*head) == Err::None);
  CHECK(*buf.users(*tail) == 1);
  CHECK(buf.stats().live_snips == 1);
  CHECK(buf.release(*tail) == Err::None);
  CHECK(buf.stats().used == 0);
}

TEST_CASE("double release is detected, not corrupting") {
  PktBuf buf(lenient());
  auto h = buf.add(kNullSnip, testutil::pattern(4), NetType::Undef);
  REQUIRE(h.ok());
  CHECK(buf.release(*h) == Err::None);
  CHECK(buf.release(*h) == Err::DoubleRelease);
  CHECK(buf.data(*h).error() == Err::DoubleRelease);
  CHECK(buf.stats().live_snips == 0);
}

TEST_CASE("garbage handles are rejected") {
  PktBuf buf(lenient());
  CHECK(buf.release(kNullSnip) == Err::InvalidHandle);
  CHECK(buf.release((777ull << 16) | 9999) == Err::InvalidHandle);
  CHECK(buf.size((777ull << 16) | 12).error() == Err::DoubleRelease);
}

TEST_CASE("mark splits a view without copying") {
  PktBuf buf(lenient());
  auto data = testutil::pattern(50);
  auto h = buf.add(kNullSnip, data, NetType::Undef);
  REQUIRE(h.ok());
  size_t used_before = buf.stats().used;

  auto m = buf.mark(*h, 12, NetType::Ipv6);
  REQUIRE(m.ok());
  CHECK(*m == *h);
  CHECK(buf.stats().used == used_before);  // same chunk, two views
  CHECK(buf.stats().live_snips == 2);

  CHECK(*buf.size(*h) == 12);
  CHECK(*buf.type(*h) == NetType::Ipv6);
  SnipHandle rest = *buf.next(*h);
  CHECK(*buf.size(rest) == 38);
  CHECK(*buf.type(rest) == NetType::Undef);
  CHECK(buf.read_all(*h) == data);

  // Chunk is pinned until the second view dies too.
  CHECK(buf.release(*h) == Err::None);
  CHECK(buf.stats().used == 0);
}

TEST_CASE("mark rejects bad sizes and shared snips") {
  PktBuf buf(lenient());
  auto h = buf.add(kNullSnip, testutil::pattern(10), NetType::Undef);
  REQUIRE(h.ok());
  CHECK(buf.mark(*h, 0, NetType::Undef).error() == Err::InvalidSize);
  CHECK(buf.mark(*h, 10, NetType::Undef).error() == Err::InvalidSize);
  CHECK(buf.mark(*h, 11, NetType::Undef).error() == Err::InvalidSize);
  REQUIRE(buf.hold(*h) == Err::None);
  CHECK(buf.mark(*h, 4, NetType::Undef).error() == Err::SharedSnip);
  buf.release(*h);
  buf.release(*h);
}

TEST_CASE("split_front turns header-first into payload-first") {
  PktBuf buf(lenient());
  auto data = testutil::pattern(30);
  auto tail = buf.add(kNullSnip, testutil::pattern(5), NetType::Netif);
  auto h = buf.add(*tail, data, NetType::Sixlowpan);
  REQUIRE(h.ok());

  auto rest = buf.split_front(*h, 9, NetType::Ipv6);
  REQUIRE(rest.ok());
  // New order: [rest 21][stripped header 9][old tail].
  CHECK(*buf.size(*rest) == 21);
  CHECK(std::equal(data.begin() + 9, data.end(),
                   buf.read_all(*rest).begin()));
  SnipHandle hdr = *buf.next(*rest);
  CHECK(hdr == *h);
  CHECK(*buf.size(hdr) == 9);
  CHECK(*buf.type(hdr) == NetType::Ipv6);
  CHECK(*buf.next(hdr) == *tail);
  CHECK(buf.release(*rest) == Err::None);
  CHECK(buf.stats().used == 0);
}

TEST_CASE("reverse flips exclusively owned chains") {
  PktBuf buf(lenient());
  auto a = buf.add(kNullSnip, testutil::pattern(1, 1), NetType::Undef);
  auto b = buf.add(*a, testutil::pattern(2, 2), NetType::Undef);
  auto c = buf.add(*b, testutil::pattern(3, 3), NetType::Undef);
  REQUIRE(c.ok());
  auto r = buf.reverse(*c);
  REQUIRE(r.ok());
  CHECK(*r == *a);
  CHECK(*buf.next(*a) == *b);
  CHECK(*buf.next(*b) == *c);
  CHECK(*buf.next(*c) == kNullSnip);

  REQUIRE(buf.hold(*c) == Err::None);
  CHECK(buf.reverse(*a).error() == Err::SharedSnip);
  buf.release(*a);
  buf.release(*c);
  CHECK(buf.stats().live_snips == 0);
}

TEST_CASE("data requires exclusive ownership") {
  PktBuf buf(lenient());
  auto h = buf.add(kNullSnip, testutil::pattern(8), NetType::Undef);
  REQUIRE(h.ok());
  CHECK(buf.data(*h).ok());
  REQUIRE(buf.hold(*h) == Err::None);
  CHECK(buf.data(*h).error() == Err::SharedSnip);
  CHECK(buf.set_type(*h, NetType::Udp) == Err::SharedSnip);
  CHECK(buf.cdata(*h).ok());  // reading shared data is fine
  buf.release(*h);
  buf.release(*h);
}

TEST_CASE("start_write on an exclusive head is a no-op") {
  PktBuf buf(lenient());
  auto h = buf.add(kNullSnip, testutil::pattern(8), NetType::Undef);
  REQUIRE(h.ok());
  auto w = buf.start_write(*h);
  REQUIRE(w.ok());
  CHECK(*w == *h);
  CHECK(buf.stats().live_snips == 1);
  buf.release(*h);
}

TEST_CASE("start_write duplicates a shared chain") {
  PktBuf buf(lenient());
  auto data1 = testutil::pattern(40, 1);
  auto data2 = testutil::pattern(25, 2);
  auto tail = buf.add(kNullSnip, data2, NetType::Undef);
  auto head = buf.add(*tail, data1, NetType::Ipv6);
  REQUIRE(head.ok());
  REQUIRE(buf.hold(*head) == Err::None);  // a second consumer appears

  auto w = buf.start_write(*head);
  REQUIRE(w.ok());
  CHECK(*w != *head);
  CHECK(*buf.users(*head) == 1);
  CHECK(*buf.users(*w) == 1);
  CHECK(buf.stats().live_snips == 4);

  // Writing through the copy leaves the original untouched.
  (*buf.data(*w))[0] ^= 0xFF;
  auto orig = buf.read_all(*head);
  CHECK(std::equal(data1.begin(), data1.end(), orig.begin()));
  auto copied = buf.read_all(*w);
  CHECK(copied[0] == static_cast<uint8_t>(data1[0] ^ 0xFF));
  CHECK(std::equal(data1.begin() + 1, data1.end(), copied.begin() + 1));

  buf.release(*head);
  buf.release(*w);
  CHECK(buf.stats().used == 0);
}

TEST_CASE("copy-on-write isolation, randomized") {
  PktBuf buf(lenient(32768, 256));
  std::mt19937 rng(0xC0117);
  for (int round = 0; round < 1000; round++) {
    size_t nsnips = 1 + rng() % 4;
    SnipHandle chain = kNullSnip;
    std::vector<uint8_t> all;
    for (size_t i = 0; i < nsnips; i++) {
      auto part = testutil::pattern(1 + rng() % 120, rng());
      all.insert(all.begin(), part.begin(), part.end());
      auto h = buf.add(chain, part, NetType::Undef);
      REQUIRE(h.ok());
      chain = *h;
    }
    uint16_t extra = static_cast<uint16_t>(1 + rng() % 3);
    REQUIRE(buf.hold(chain, extra) == Err::None);

    auto w = buf.start_write(chain);
    REQUIRE(w.ok());
    REQUIRE(*w != chain);

    // Flip a random byte of a random snip in the copy.
    SnipHandle target = *w;
    for (size_t hops = rng() % nsnips; hops > 0; hops--)
      target = *buf.next(target);
    auto span = buf.data(target);
    REQUIRE(span.ok());
    size_t at = rng() % span->size();
    (*span)[at] ^= 0x5A;

    CHECK(buf.read_all(chain) == all);
    auto mutated = buf.read_all(*w);
    CHECK(mutated != all);
    size_t diffs = 0;
    for (size_t i = 0; i < all.size(); i++) diffs += mutated[i] != all[i];
    CHECK(diffs == 1);

    buf.release(*w);
    // start_write consumed one of the 1 + extra references on the original.
    for (int i = 0; i < extra; i++) CHECK(buf.release(chain) == Err::None);
    REQUIRE(buf.stats().used == 0);
    REQUIRE(buf.stats().live_snips == 0);
  }
}

TEST_CASE("start_write failure leaves the original intact") {
  PktBuf buf(lenient(256, 8));
  auto h = buf.add(kNullSnip, testutil::pattern(100), NetType::Undef);
  REQUIRE(h.ok());
  // Fill the rest of the arena so the copy cannot fit.
  auto filler = buf.add(kNullSnip, testutil::pattern(100), NetType::Undef);
  REQUIRE(filler.ok());
  REQUIRE(buf.hold(*h) == Err::None);

  size_t used = buf.stats().used;
  auto w = buf.start_write(*h);
  CHECK(w.error() == Err::OutOfMemory);
  CHECK(buf.stats().used == used);
  CHECK(*buf.users(*h) == 2);
  CHECK(buf.oom_events() > 0);
  buf.release(*h);
  buf.release(*h);
  buf.release(*filler);
}

TEST_CASE("exhaustion reports OutOfMemory and recovers") {
  PktBuf buf(lenient(128, 4));
  std::vector<SnipHandle> held;
  for (;;) {
    auto h = buf.add(kNullSnip, testutil::pattern(16), NetType::Undef);
    if (!h) {
      CHECK(h.error() == Err::OutOfMemory);
      break;
    }
    held.push_back(*h);
  }
  CHECK(!held.empty());
  CHECK(buf.oom_events() == 1);
  CHECK(buf.min_used_at_oom() <= buf.stats().capacity);
  for (auto h : held) CHECK(buf.release(h) == Err::None);
  CHECK(buf.stats().used == 0);
  auto again = buf.add(kNullSnip, testutil::pattern(16), NetType::Undef);
  CHECK(again.ok());
  buf.release(*again);
}

TEST_CASE("zero length snips work") {
  PktBuf buf(lenient());
  auto h = buf.add(kNullSnip, {}, NetType::Undef);
  REQUIRE(h.ok());
  CHECK(*buf.size(*h) == 0);
  CHECK(buf.stats().used == PktBuf::kChunkHeader);
  CHECK(buf.read_all(*h).empty());
  buf.release(*h);
  CHECK(buf.stats().used == 0);
}

TEST_CASE("read_range spans snip boundaries and checks bounds") {
  PktBuf buf(lenient());
  auto d1 = testutil::pattern(10, 1);
  auto d2 = testutil::pattern(10, 2);
  auto tail = buf.add(kNullSnip, d2, NetType::Undef);
  auto head = buf.add(*tail, d1, NetType::Undef);
  REQUIRE(head.ok());

  uint8_t out[8];
  REQUIRE(buf.read_range(*head, 6, out) == Err::None);
  for (int i = 0; i < 4; i++) CHECK(out[i] == d1[6 + i]);
  for (int i = 0; i < 4; i++) CHECK(out[4 + i] == d2[i]);

  CHECK(buf.read_range(*head, 15, out) == Err::InvalidSize);
  CHECK(buf.read_range(*head, 20, out) == Err::InvalidSize);
  uint8_t one[1];
  CHECK(buf.read_range(*head, 19, one) == Err::None);
  CHECK(one[0] == d2.back());
  buf.release(*head);
}

TEST_CASE("ledger replay against the shadow arena") {
  // Random operation soup, every step mirrored on the byte-vector model.
  // What the real buffer says must match the model exactly: content,
  // topology, reference counts, live snip count and used arena bytes.
  PktBuf buf(lenient(8192, 64));
  oracle::ShadowArena shadow;
  std::mt19937 rng(0x1ED6E4);
  std::vector<SnipHandle> roots;
  uint64_t ooms = 0;

  auto sync_check = [&](SnipHandle root) {
    auto st = buf.stats();
    REQUIRE(st.used == shadow.used());
    REQUIRE(st.live_snips == shadow.live_snips());
    if (root != kNullSnip) {
      REQUIRE(buf.read_all(root) == shadow.chain_bytes(root));
      REQUIRE(buf.chain_length(root) == shadow.chain_length(root));
      REQUIRE(*buf.users(root) == shadow.snip(root).users);
      REQUIRE(*buf.type(root) == shadow.snip(root).type);
    }
  };

  for (int op = 0; op < 20000; op++) {
    int what = static_cast<int>(rng() % 100);
    SnipHandle root =
        roots.empty() ? kNullSnip : roots[rng() % roots.size()];

    if (what < 30 || roots.empty()) {  // add, sometimes chaining onto a root
      size_t n = rng() % 300;
      auto data = testutil::pattern(n, rng());
      SnipHandle next = kNullSnip;
      if (root != kNullSnip && rng() % 2 == 0) next = root;
      auto h = buf.add(next, data, NetType{static_cast<uint8_t>(rng() % 6)});
      if (!h) {
        REQUIRE(h.error() == Err::OutOfMemory);
        ooms++;
        continue;
      }
      if (next != kNullSnip)
        roots.erase(std::find(roots.begin(), roots.end(), next));
      shadow.add(*h, next, data, *buf.type(*h));
      roots.push_back(*h);
    } else if (what < 40) {  // add_uninit then fill through data()
      size_t n = 1 + rng() % 100;
      auto h = buf.add_uninit(kNullSnip, n, NetType::Ipv6);
      if (!h) {
        REQUIRE(h.error() == Err::OutOfMemory);
        ooms++;
        continue;
      }
      auto fill = testutil::pattern(n, rng());
      auto span = buf.data(*h);
      REQUIRE(span.ok());
      std::copy(fill.begin(), fill.end(), span->begin());
      shadow.add(*h, kNullSnip, fill, NetType::Ipv6);
      roots.push_back(*h);
    } else if (what < 50) {  // release a root
      if (root == kNullSnip) continue;
      REQUIRE(buf.release(root) == Err::None);
      shadow.release(root);
      roots.erase(std::find(roots.begin(), roots.end(), root));
    } else if (what < 60) {  // hold
      if (root == kNullSnip) continue;
      REQUIRE(buf.hold(root) == Err::None);
      shadow.hold(root, 1);
      roots.push_back(root);
    } else if (what < 72) {  // start_write
      if (root == kNullSnip) continue;
      auto olds = shadow.chain_handles(root);
      bool shared = shadow.snip(root).users > 1;
      auto w = buf.start_write(root);
      if (!w) {
        REQUIRE(w.error() == Err::OutOfMemory);
        ooms++;
        continue;
      }
      if (!shared) {
        REQUIRE(*w == root);
      } else {
        REQUIRE(*w != root);
        std::vector<SnipHandle> news;
        for (SnipHandle h = *w; h != kNullSnip; h = *buf.next(h))
          news.push_back(h);
        REQUIRE(news.size() == olds.size());
        shadow.copy_chain(olds, news);
        roots.erase(std::find(roots.begin(), roots.end(), root));
        roots.push_back(*w);
      }
    } else if (what < 82) {  // mark
      if (root == kNullSnip) continue;
      const auto& s = shadow.snip(root);
      if (s.users != 1 || s.bytes.size() < 2) continue;
      size_t cut = 1 + rng() % (s.bytes.size() - 1);
      auto m = buf.mark(root, cut, NetType::Udp);
      if (!m) {
        REQUIRE(m.error() == Err::OutOfMemory);  // snip slots exhausted
        ooms++;
        continue;
      }
      shadow.mark(root, *buf.next(root), cut, NetType::Udp);
    } else if (what < 90) {  // split_front, root moves to the remainder
      if (root == kNullSnip) continue;
      const auto& s = shadow.snip(root);
      if (s.users != 1 || s.bytes.size() < 2) continue;
      size_t cut = 1 + rng() % (s.bytes.size() - 1);
      auto r = buf.split_front(root, cut, NetType::Sixlowpan);
      if (!r) {
        REQUIRE(r.error() == Err::OutOfMemory);
        ooms++;
        continue;
      }
      shadow.split_front(root, *r, cut, NetType::Sixlowpan);
      roots.erase(std::find(roots.begin(), roots.end(), root));
      roots.push_back(*r);
    } else if (what < 95) {  // reverse when exclusively owned throughout
      if (root == kNullSnip) continue;
      bool all_exclusive = true;
      for (SnipHandle h : shadow.chain_handles(root))
        all_exclusive = all_exclusive && shadow.snip(h).users == 1;
      if (!all_exclusive) continue;
      auto handles = shadow.chain_handles(root);
      auto r = buf.reverse(root);
      REQUIRE(r.ok());
      REQUIRE(*r == handles.back());
      shadow.reverse(root);
      roots.erase(std::find(roots.begin(), roots.end(), root));
      roots.push_back(*r);
    } else {  // overwrite an exclusive snip through data()
      if (root == kNullSnip) continue;
      const auto& s = shadow.snip(root);
      if (s.users != 1 || s.bytes.empty()) continue;
      auto fill = testutil::pattern(s.bytes.size(), rng());
      auto span = buf.data(root);
      REQUIRE(span.ok());
      std::copy(fill.begin(), fill.end(), span->begin());
      shadow.write_bytes(root, fill);
    }
    sync_check(roots.empty() ? kNullSnip : roots[rng() % roots.size()]);
  }

  INFO("oom events seen: ", ooms);
  // Full teardown. Releasing in random root order must drain everything.
  while (!roots.empty()) {
    size_t i = rng() % roots.size();
    REQUIRE(buf.release(roots[i]) == Err::None);
    shadow.release(roots[i]);
    roots.erase(roots.begin() + static_cast<long>(i));
  }
  CHECK(buf.stats().used == 0);
  CHECK(buf.stats().live_snips == 0);
  CHECK(shadow.used() == 0);
  CHECK(shadow.live_snips() == 0);
}

TEST_CASE("cost meter counts copied bytes") {
  CostMeter meter;
  PktBuf buf(lenient(), &meter);
  auto h = buf.add(kNullSnip, testutil::pattern(100), NetType::Undef);
  REQUIRE(h.ok());
  CHECK(meter.byte_count() == 100);
  auto u = buf.add_uninit(*h, 40, NetType::Ipv6);
  REQUIRE(u.ok());
  CHECK(meter.byte_count() == 140);

  uint8_t out[30];
  REQUIRE(buf.read_range(*u, 5, out) == Err::None);
  CHECK(meter.byte_count() == 170);
  buf.read_all(*u);
  CHECK(meter.byte_count() == 170 + 140);

  REQUIRE(buf.hold(*u) == Err::None);
  auto w = buf.start_write(*u);
  REQUIRE(w.ok());
  CHECK(meter.byte_count() == 310 + 140);  // deep copy touched every byte
  buf.release(*u);
  buf.release(*w);
}

}  // TEST_SUITE
