// Copyright 2026 The apmbrb Authors
// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "apmbrb/committee.hpp"
#include "apmbrb/crypto.hpp"

using namespace apmbrb;

namespace {

std::shared_ptr<const CryptoProvider> provider(std::uint64_t seed = 42, std::uint32_t n = 10,
                                               std::size_t k = 32) {
  return make_keyed_provider(KeyMaterial{seed, n}, k);
}

Bytes rand_bytes(std::mt19937_64& rng, std::size_t len) {
  Bytes b(len);
  for (auto& x : b) x = static_cast<std::uint8_t>(rng());
  return b;
}

Committee committee_of(std::vector<NodeId> members, NodeId sender, Round round) {
  Committee c;
  c.sender = sender;
  c.round = round;
  c.members = members;
  c.sorted = std::move(members);
  std::sort(c.sorted.begin(), c.sorted.end());
  return c;
}

Digest digest_of(const CryptoProvider& p, const Bytes& b) { return p.hash(b); }

}  // namespace

TEST_CASE("hash is deterministic and k bytes long") {
  auto p = provider();
  Bytes in{1, 2, 3, 4};
  Digest a = p->hash(in);
  Digest b = p->hash(in);
  CHECK(a == b);
  CHECK(a.bytes.size() == 32);
}

TEST_CASE("hash of the empty string matches the frozen golden value") {
  // Golden value recorded from the first run of the deterministic provider
  // (setup seed 42, k = 32). Any change to the construction breaks replays.
  auto p = provider();
  Digest d = p->hash(Bytes{});
  CHECK(to_hex(d.bytes) ==
        "af933748e0e6b36ff879a72546d6b1cc7fea36f5317e71bfbcf823aaa3636edb");
}

TEST_CASE("no collisions across 1e5 random input pairs") {
  auto p = provider();
  std::mt19937_64 rng(7);
  for (int i = 0; i < 100000; ++i) {
    Bytes a = rand_bytes(rng, 1 + (rng() % 64));
    Bytes b = rand_bytes(rng, 1 + (rng() % 64));
    if (a == b) continue;
    CHECK(!(p->hash(a) == p->hash(b)));
  }
}

TEST_CASE("distinct seeds give distinct key material") {
  auto p1 = provider(1);
  auto p2 = provider(2);
  Digest d;
  d.bytes = CryptoBytes((const std::uint8_t*)"0123456789abcdef0123456789abcdef", 32);
  CHECK(!(p1->sign_share(3, d).share_bytes == p2->sign_share(3, d).share_bytes));
}

TEST_CASE("sign then verify round-trips; wrong digest fails") {
  auto p = provider();
  Digest d = digest_of(*p, Bytes{9, 9, 9});
  SignatureShare s = p->sign_share(4, d);
  CHECK(p->verify_share(s));

  SignatureShare wrong = s;
  wrong.message_digest = digest_of(*p, Bytes{8, 8, 8});
  CHECK(!p->verify_share(wrong));
}

TEST_CASE("unknown signer id is rejected") {
  auto p = provider(42, 10);
  Digest d = digest_of(*p, Bytes{1});
  CHECK_THROWS_AS((void)p->sign_share(0, d), Error);
  CHECK_THROWS_AS((void)p->sign_share(11, d), Error);
}

TEST_CASE("single bit flips invalidate shares (100-share fuzz)") {
  auto p = provider();
  std::mt19937_64 rng(11);
  for (int i = 0; i < 100; ++i) {
    Digest d = digest_of(*p, rand_bytes(rng, 24));
    NodeId signer = static_cast<NodeId>(1 + (rng() % 10));
    SignatureShare s = p->sign_share(signer, d);
    std::size_t bit = rng() % (8 * s.share_bytes.size());
    s.share_bytes.data[bit / 8] ^= static_cast<std::uint8_t>(1u << (bit % 8));
    CHECK(!p->verify_share(s));
  }
}

TEST_CASE("aggregation enforces threshold, membership, digests and duplicates") {
  auto p = provider();
  Committee c = committee_of({1, 2, 3, 4, 5}, 1, 7);
  Digest d = digest_of(*p, Bytes{5, 5, 5});

  std::vector<SignatureShare> shares;
  for (NodeId id : {1, 2, 3}) shares.push_back(p->sign_share(id, d));

  SUBCASE("exact threshold aggregates and verifies") {
    Certificate cert = p->aggregate(shares, c, 3);
    CHECK(p->verify_cert(cert, d, c, 3));
    CHECK(cert.tag.sender == 1);
    CHECK(cert.tag.round == 7);
  }
  SUBCASE("below threshold") {
    shares.pop_back();
    CHECK_THROWS_AS((void)p->aggregate(shares, c, 3), Error);
  }
  SUBCASE("duplicate signer") {
    shares.push_back(p->sign_share(3, d));
    CHECK_THROWS_AS((void)p->aggregate(shares, c, 3), Error);
  }
  SUBCASE("mixed digests") {
    shares.pop_back();
    shares.push_back(p->sign_share(3, digest_of(*p, Bytes{6})));
    CHECK_THROWS_AS((void)p->aggregate(shares, c, 3), Error);
  }
  SUBCASE("signer outside the committee") {
    shares.pop_back();
    shares.push_back(p->sign_share(9, d));
    CHECK_THROWS_AS((void)p->aggregate(shares, c, 3), Error);
  }
}

TEST_CASE("certificates bind their committee tag") {
  auto p = provider();
  Committee c = committee_of({1, 2, 3, 4, 5}, 1, 7);
  Digest d = digest_of(*p, Bytes{5, 5, 5});
  std::vector<SignatureShare> shares;
  for (NodeId id : {1, 2, 3}) shares.push_back(p->sign_share(id, d));
  Certificate cert = p->aggregate(shares, c, 3);

  Committee other_round = committee_of({1, 2, 3, 4, 5}, 1, 8);
  CHECK(!p->verify_cert(cert, d, other_round, 3));
  Committee other_sender = committee_of({1, 2, 3, 4, 5}, 2, 7);
  CHECK(!p->verify_cert(cert, d, other_sender, 3));
}

TEST_CASE("forged certificate bytes fail verification (1000 forgeries)") {
  auto p = provider();
  Committee c = committee_of({1, 2, 3, 4, 5}, 2, 3);
  Digest d = digest_of(*p, Bytes{1, 2, 3});
  std::vector<SignatureShare> shares;
  for (NodeId id : {2, 3, 4}) shares.push_back(p->sign_share(id, d));
  Certificate good = p->aggregate(shares, c, 3);
  REQUIRE(p->verify_cert(good, d, c, 3));

  std::mt19937_64 rng(23);
  for (int i = 0; i < 1000; ++i) {
    Certificate forged = good;
    std::size_t victim = rng() % forged.shares.size();
    std::size_t byte = rng() % forged.shares[victim].second.size();
    forged.shares[victim].second.data[byte] ^= static_cast<std::uint8_t>(1 + (rng() % 255));
    CHECK(!p->verify_cert(forged, d, c, 3));
  }
}

TEST_CASE("determinism: same setup seed reproduces shares bit for bit") {
  auto p1 = provider(77);
  auto p2 = provider(77);
  Digest d = p1->hash(Bytes{1, 2, 3});
  CHECK(p1->sign_share(5, d).share_bytes == p2->sign_share(5, d).share_bytes);
}
