// Copyright 2026 The apmbrb Authors
// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <map>

#include "apmbrb/node.hpp"
#include "apmbrb/sim.hpp"

using namespace apmbrb;

namespace {

// Single-node test rig: n=4, f=1, n_c=4 (every node on every committee),
// phi=2, with hand-built peer chains and hand-aggregated certificates.
struct Rig {
  std::uint32_t n = 4;
  std::uint32_t f = 1;
  CommitteeParams params = override_params(4, 1, 4, 2);
  std::shared_ptr<const CryptoProvider> provider = make_keyed_provider(KeyMaterial{11, 4}, 32);
  Seed seed0{21};
  std::vector<Violation> violations;
  std::uint64_t clock = 0;
  std::unique_ptr<Node> node;

  // (sender, round) -> message / certificate of the canonical test chains
  std::map<std::pair<NodeId, Round>, BroadcastMessage> chain;
  std::map<std::pair<NodeId, Round>, Certificate> certs;

  explicit Rig(NodeId id = 2, bool sender_active = false, Round max_round = 0) {
    ProtocolOptions opts;
    opts.params = params;
    opts.seed0 = seed0;
    opts.payload_bytes = 64;
    opts.payload_seed = 5;
    opts.sender_active = sender_active;
    opts.max_round = max_round;
    node = std::make_unique<Node>(id, opts, provider, &violations, &clock);
  }

  Committee committee(NodeId sender, Round round) {
    return sample_committee(*provider, seed0, sender, round, params);
  }

  Certificate make_cert(NodeId sender, Round round, const Digest& digest,
                        std::vector<NodeId> signers = {1, 2, 3}) {
    Committee c = committee(sender, round);
    std::vector<SignatureShare> shares;
    for (NodeId s : signers) shares.push_back(provider->sign_share(s, digest));
    return provider->aggregate(shares, c, params.cert_threshold());
  }

  // Builds rounds 1..upto for the given senders, cross-referencing the first
  // 2f+1 of them in every prev set.
  void build_chains(std::vector<NodeId> senders, Round upto, std::uint64_t salt = 0) {
    for (Round r = 1; r <= upto; ++r) {
      for (NodeId s : senders) {
        BroadcastMessage m;
        m.payload = PayloadRef{salt ^ (static_cast<std::uint64_t>(s) << 32 | r), 64};
        m.sender = s;
        m.round = r;
        m.triggers.assign(n, std::nullopt);
        if (r > 1) {
          m.prev_cert = certs.at({s, r - 1});
          for (std::size_t i = 0; i < 2 * f + 1; ++i)
            m.prev.push_back(certs.at({senders[i], r - 1}));
        }
        m.digest = message_digest(m, *provider);
        m.sender_sig = provider->sign_share(s, m.digest).share_bytes;
        chain[{s, r}] = m;
        certs[{s, r}] = make_cert(s, r, m.digest);
      }
    }
  }

  Envelope env(NodeId src, WireBody body) {
    return make_envelope(src, node->id(), std::make_shared<const WireBody>(std::move(body)), 32,
                         0, 0, TrafficPurpose::kNone);
  }

  void feed(NodeId src, WireBody body) { node->on_envelope(env(src, std::move(body))); }

  void feed_message(const BroadcastMessage& m) { feed(m.sender, m); }

  void feed_share(NodeId signer, NodeId sender, Round round, const Digest& digest) {
    ShareMsg sm;
    sm.origin_sender = sender;
    sm.round = round;
    sm.share = provider->sign_share(signer, digest);
    feed(signer, sm);
  }

  std::vector<Envelope> out() {
    std::vector<Envelope> v;
    node->drain(v);
    return v;
  }

  static std::map<PayloadKind, int> count_kinds(const std::vector<Envelope>& v) {
    std::map<PayloadKind, int> m;
    for (const auto& e : v) ++m[kind_of(*e.body)];
    return m;
  }
};

}  // namespace

TEST_CASE("fresh round from an honest sender: one committee re-send plus n shares") {
  Rig rig;
  rig.build_chains({1, 2, 3}, 1);
  rig.feed_message(rig.chain[{1, 1}]);
  auto out = rig.out();
  auto kinds = Rig::count_kinds(out);
  CHECK(kinds[PayloadKind::kBroadcast] == 4);  // re-send to all n_c members
  CHECK(kinds[PayloadKind::kShare] == 4);      // share to all n nodes
  CHECK(rig.node->promises_length(1) == 1);
  CHECK(rig.node->shares_emitted() == 1);
}

TEST_CASE("equivocating second message for the same round is ignored") {
  Rig rig;
  rig.build_chains({1, 2, 3}, 1);
  rig.feed_message(rig.chain[{1, 1}]);
  (void)rig.out();

  BroadcastMessage other = rig.chain[{1, 1}];
  other.payload.tag ^= 0xdead;
  other.digest = message_digest(other, *rig.provider);
  other.sender_sig = rig.provider->sign_share(1, other.digest).share_bytes;
  rig.feed_message(other);
  auto out = rig.out();
  CHECK(out.empty());  // no re-send, no share
  CHECK(rig.node->shares_emitted() == 1);
  CHECK(rig.node->promise_at(1, 1)->digest == rig.chain[{1, 1}].digest);
}

TEST_CASE("non-member messages are ignored") {
  // n_c = 2: pick a node outside sender 1's round-1 committee.
  CommitteeParams small = override_params(4, 1, 2, 5);
  auto provider = make_keyed_provider(KeyMaterial{11, 4}, 32);
  Seed seed0{21};
  Committee c1 = sample_committee(*provider, seed0, 1, 1, small);
  NodeId outsider = 0;
  for (NodeId x = 2; x <= 4; ++x)
    if (!c1.contains(x)) outsider = x;
  REQUIRE(outsider != 0);

  ProtocolOptions opts;
  opts.params = small;
  opts.seed0 = seed0;
  opts.payload_bytes = 64;
  std::vector<Violation> violations;
  std::uint64_t clock = 0;
  Node node(outsider, opts, provider, &violations, &clock);

  BroadcastMessage m;
  m.payload = PayloadRef{1, 64};
  m.sender = 1;
  m.round = 1;
  m.triggers.assign(4, std::nullopt);
  m.digest = message_digest(m, *provider);
  m.sender_sig = provider->sign_share(1, m.digest).share_bytes;
  node.on_envelope(make_envelope(1, outsider, std::make_shared<const WireBody>(WireBody{m}), 32,
                                 0, 0, TrafficPurpose::kNone));
  std::vector<Envelope> out;
  node.drain(out);
  CHECK(out.empty());
  CHECK(node.promises_length(1) == 0);
}

TEST_CASE("share accumulation: threshold, duplicates, mixed digests") {
  Rig rig;
  rig.build_chains({1, 2, 3}, 1);
  Digest a = rig.chain[{1, 1}].digest;

  SUBCASE("third distinct share triggers aggregation") {
    rig.feed_share(1, 1, 1, a);
    rig.feed_share(3, 1, 1, a);
    CHECK(!rig.node->has_certificate(1, 1));
    rig.feed_share(4, 1, 1, a);
    CHECK(rig.node->has_certificate(1, 1));
    CHECK(rig.node->certificate_for(1, 1, a) != nullptr);
  }
  SUBCASE("duplicate signer makes no progress") {
    rig.feed_share(1, 1, 1, a);
    rig.feed_share(1, 1, 1, a);
    rig.feed_share(1, 1, 1, a);
    CHECK(!rig.node->has_certificate(1, 1));
  }
  SUBCASE("mixed digests accumulate independently; only the quorum one certifies") {
    Digest b = rig.provider->hash(Bytes{1, 2, 3});
    rig.feed_share(1, 1, 1, a);
    rig.feed_share(2, 1, 1, a);
    rig.feed_share(3, 1, 1, b);
    rig.feed_share(4, 1, 1, b);
    CHECK(!rig.node->has_certificate(1, 1));
    rig.feed_share(1, 1, 1, b);
    CHECK(rig.node->has_certificate(1, 1));
    CHECK(rig.node->certificate_for(1, 1, b) != nullptr);
    CHECK(rig.node->certificate_for(1, 1, a) == nullptr);
  }
  SUBCASE("shares from outside the committee are dropped") {
    ShareMsg sm;
    sm.origin_sender = 1;
    sm.round = 1;
    sm.share.signer = 9;  // no such node
    sm.share.message_digest = a;
    sm.share.share_bytes = rig.provider->sign_share(1, a).share_bytes;
    rig.feed(3, sm);
    CHECK(!rig.node->has_certificate(1, 1));
  }
}

TEST_CASE("chain walk: certificate for round 3 delivers round 1 at phi=2") {
  Rig rig;
  rig.build_chains({1, 2, 3}, 3);
  for (Round r = 1; r <= 3; ++r)
    for (NodeId s : {1, 2, 3}) rig.feed_message(rig.chain[{s, r}]);
  (void)rig.out();
  CHECK(rig.node->delivery_log(1).empty());

  rig.node->process_certificate(1, 3, rig.certs[{1, 3}]);
  const auto& log = rig.node->delivery_log(1);
  REQUIRE(log.count(1) == 1);
  CHECK(log.at(1).digest == rig.chain[{1, 1}].digest);
  CHECK(log.at(1).via == DeliveryVia::kChain);
  CHECK(log.count(2) == 0);  // round 2 needs a round-4 certificate
  CHECK(rig.node->delivered_prefix(1) == 1);
}

TEST_CASE("certificate below phi is recorded but delivers nothing") {
  Rig rig;
  rig.build_chains({1, 2, 3}, 1);
  rig.feed_message(rig.chain[{1, 1}]);
  (void)rig.out();
  rig.node->process_certificate(1, 1, rig.certs[{1, 1}]);
  CHECK(rig.node->has_certificate(1, 1));
  CHECK(rig.node->delivery_log(1).empty());
}

TEST_CASE("delivery is idempotent; conflicting delivery trips the agreement wire") {
  Rig rig;
  rig.build_chains({1, 2, 3}, 3);
  for (Round r = 1; r <= 3; ++r)
    for (NodeId s : {1, 2, 3}) rig.feed_message(rig.chain[{s, r}]);
  (void)rig.out();

  rig.node->process_certificate(1, 3, rig.certs[{1, 3}]);
  REQUIRE(rig.node->delivery_log(1).count(1) == 1);
  std::uint64_t order = rig.node->delivery_log(1).at(1).order;

  // identical certificate again: no change, no violation
  rig.node->process_certificate(1, 3, rig.certs[{1, 3}]);
  CHECK(rig.node->delivery_log(1).at(1).order == order);
  CHECK(rig.violations.empty());

  // A conflicting certified chain (byzantine double-signing) anchored past
  // the delivered prefix: its walk must surface the round-1 conflict.
  Rig forked(2);
  forked.provider = rig.provider;
  forked.build_chains({1, 2, 3}, 4, /*salt=*/0xF0F0);
  rig.node->process_certificate(1, 4, forked.certs[{1, 4}]);
  // the walk needs the conflicting chain: serve it through query responses
  auto out = rig.out();
  std::vector<ChainQuery> queries;
  for (const auto& e : out)
    if (kind_of(*e.body) == PayloadKind::kChainQuery)
      queries.push_back(std::get<ChainQuery>(*e.body));
  REQUIRE(!queries.empty());
  for (int hops = 0; hops < 6 && !queries.empty(); ++hops) {
    const ChainQuery q = queries.front();
    ChainResponse resp;
    resp.chain_sender = 1;
    resp.round = q.round;
    resp.msg = forked.chain[{1, q.round}];
    resp.query_id = q.query_id;
    rig.feed(3, resp);
    out = rig.out();
    queries.clear();
    for (const auto& e : out)
      if (kind_of(*e.body) == PayloadKind::kChainQuery)
        queries.push_back(std::get<ChainQuery>(*e.body));
  }
  bool tripped = false;
  for (const auto& v : rig.violations)
    if (v.kind == "agreement-conflict") tripped = true;
  CHECK(tripped);
  // the original delivery record stands
  CHECK(rig.node->delivery_log(1).at(1).digest == rig.chain[{1, 1}].digest);
}

TEST_CASE("fetch: cache hit returns immediately with zero network traffic") {
  Rig rig;
  rig.build_chains({1, 2, 3}, 1);
  rig.feed_message(rig.chain[{1, 1}]);
  (void)rig.out();

  bool done = false;
  rig.node->request_fetch(1, 1, /*use_committee=*/true, [&](const BroadcastMessage& m) {
    done = true;
    CHECK(m.digest == rig.chain[{1, 1}].digest);
  });
  CHECK(done);
  CHECK(rig.out().empty());
}

TEST_CASE("fetch: a three-round gap takes exactly three sequential exchanges") {
  Rig rig;
  rig.build_chains({1, 2, 3}, 3);
  bool done = false;
  rig.node->request_fetch(
      1, 3, /*use_committee=*/false,
      [&](const BroadcastMessage& m) {
        done = true;
        CHECK(m.round == 3);
      },
      /*need_final_cert=*/true);
  int exchanges = 0;
  for (Round expect = 1; expect <= 3; ++expect) {
    auto out = rig.out();
    REQUIRE(out.size() == 1);  // one outstanding query at a time
    const auto& q = std::get<ChainQuery>(*out[0].body);
    CHECK(out[0].dst == 1);  // direct-to-sender mode
    CHECK(q.round == expect);
    CHECK(q.want_standalone_cert == (expect == 3));
    ChainResponse resp;
    resp.chain_sender = 1;
    resp.round = expect;
    resp.msg = rig.chain[{1, expect}];
    if (expect == 3) resp.standalone_cert = rig.certs[{1, 3}];
    resp.query_id = q.query_id;
    rig.feed(1, resp);
    ++exchanges;
  }
  CHECK(exchanges == 3);
  CHECK(done);
  CHECK(rig.node->promises_length(1) == 3);
}

TEST_CASE("fetch responses that conflict with stored promises are rejected") {
  Rig rig;
  rig.build_chains({1, 2, 3}, 2);
  rig.feed_message(rig.chain[{1, 1}]);
  (void)rig.out();

  Rig fork(2);
  fork.provider = rig.provider;
  fork.build_chains({1, 2, 3}, 2, 0xAB);

  bool done = false;
  rig.node->request_fetch(
      1, 2, false, [&](const BroadcastMessage&) { done = true; }, true);
  auto out = rig.out();
  REQUIRE(out.size() == 1);
  const auto q = std::get<ChainQuery>(*out[0].body);

  // response from the forked chain: its embedded certificate does not bind
  // our stored round-1 message, so it must be discarded
  ChainResponse bad;
  bad.chain_sender = 1;
  bad.round = 2;
  bad.msg = fork.chain[{1, 2}];
  bad.standalone_cert = fork.certs[{1, 2}];
  bad.query_id = q.query_id;
  rig.feed(1, bad);
  CHECK(!done);
  CHECK(rig.node->promises_length(1) == 1);

  ChainResponse good = bad;
  good.msg = rig.chain[{1, 2}];
  good.standalone_cert = rig.certs[{1, 2}];
  rig.feed(1, good);
  CHECK(done);
  CHECK(rig.node->promises_length(1) == 2);
}

TEST_CASE("sender pipeline: round 1 base case") {
  Rig rig(1, /*sender_active=*/true, /*max_round=*/2);
  rig.node->start();
  auto out = rig.out();
  REQUIRE(out.size() == 4);  // committee send only
  const auto& m = std::get<BroadcastMessage>(*out[0].body);
  CHECK(m.round == 1);
  CHECK(!m.prev_cert.has_value());
  CHECK(m.prev.empty());
  for (const auto& t : m.triggers) CHECK(!t.has_value());
  CHECK(rig.node->own_round() == 1);
  CHECK(rig.node->promises_length(1) == 1);
}

TEST_CASE("build_message throws before its preconditions are met") {
  Rig rig(1, true, 3);
  rig.node->start();
  (void)rig.out();
  CHECK_THROWS_AS((void)rig.node->build_message(2), Error);  // no own cert yet
  CHECK_THROWS_AS((void)rig.node->build_message(1), Error);  // round 1 already sent
  CHECK_THROWS_AS((void)rig.node->build_message(3), Error);  // out of order
}

TEST_CASE("sender pipeline: round 2 carries the first 2f+1 completed peers") {
  Rig rig(1, true, 2);
  rig.build_chains({1, 2, 3, 4}, 1, 0xEE);
  rig.node->start();
  (void)rig.out();
  const Digest own = rig.node->promise_at(1, 1)->digest;

  // peers' round-1 chains land first (all four complete before the own cert)
  for (NodeId s : {2, 3, 4}) rig.feed_message(rig.chain[{s, 1}]);
  for (NodeId s : {2, 3, 4})
    for (NodeId signer : {1, 2, 3}) rig.feed_share(signer, s, 1, rig.chain[{s, 1}].digest);
  (void)rig.out();

  // now certify the sender's own round-1 message
  for (NodeId signer : {2, 3, 4}) rig.feed_share(signer, 1, 1, own);
  auto out = rig.out();

  const BroadcastMessage* m2 = nullptr;
  for (const auto& e : out) {
    if (kind_of(*e.body) != PayloadKind::kBroadcast) continue;
    const auto& bm = std::get<BroadcastMessage>(*e.body);
    if (bm.sender == 1 && bm.round == 2) m2 = &bm;
  }
  REQUIRE(m2 != nullptr);
  REQUIRE(m2->prev_cert.has_value());
  CHECK(m2->prev_cert->message_digest == own);
  REQUIRE(m2->prev.size() == 3);  // exactly 2f+1, not all 4
  // simultaneous completion resolves in ascending id order
  CHECK(m2->prev[0].tag.sender == 1);
  CHECK(m2->prev[1].tag.sender == 2);
  CHECK(m2->prev[2].tag.sender == 3);
  CHECK(rig.node->own_round() == 2);
}

TEST_CASE("triggers entries are replaced only by strictly higher rounds") {
  Rig rig;
  rig.build_chains({1, 2, 3}, 4);
  for (Round r = 1; r <= 4; ++r)
    for (NodeId s : {1, 2, 3}) rig.feed_message(rig.chain[{s, r}]);
  (void)rig.out();

  rig.node->process_certificate(1, 3, rig.certs[{1, 3}]);
  REQUIRE(rig.node->triggers()[0].has_value());
  CHECK(rig.node->triggers()[0]->tag.round == 3);

  rig.node->process_certificate(1, 2, rig.certs[{1, 2}]);
  CHECK(rig.node->triggers()[0]->tag.round == 3);  // lower round: kept

  rig.node->process_certificate(1, 4, rig.certs[{1, 4}]);
  CHECK(rig.node->triggers()[0]->tag.round == 4);
}

TEST_CASE("garbage certificates are skipped silently") {
  Rig rig;
  rig.build_chains({1, 2, 3}, 3);
  Certificate junk = rig.certs[{1, 3}];
  junk.shares[0].second.data[4] ^= 0x40;
  rig.node->process_certificate(1, 3, junk);
  CHECK(rig.node->delivery_log(1).empty());
  CHECK(!rig.node->triggers()[0].has_value());
  CHECK(rig.violations.empty());
}
