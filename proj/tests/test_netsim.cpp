// Copyright 2026 The apmbrb Authors
// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <set>

#include "apmbrb/metrics.hpp"
#include "apmbrb/sim.hpp"

using namespace apmbrb;

namespace {

SimConfig base_config(std::uint32_t n, std::uint32_t f, std::uint32_t n_c, Round phi,
                      Round rounds, std::uint64_t seed) {
  SimConfig c;
  c.n = n;
  c.f = f;
  c.n_c = n_c;
  c.phi = phi;
  c.payload_bytes = 256;
  c.rounds = rounds;
  c.scheduler.seed = seed;
  c.setup_seed = 1000 + seed;
  c.seed0 = 2000 + seed;
  return c;
}

void set_fault(SimConfig& c, FaultKind kind, std::vector<NodeId> byz) {
  c.fault.kind = kind;
  c.fault.byzantine = std::move(byz);
}

}  // namespace

TEST_CASE("identical config and seed give byte-identical transcripts") {
  SimConfig c = base_config(4, 1, 4, 2, 6, 7);
  RunTranscript a = run(c);
  RunTranscript b = run(c);
  CHECK(transcript_json(a) == transcript_json(b));
  CHECK(a.steps == b.steps);
  CHECK(a.honest_bits == b.honest_bits);

  SimConfig c2 = c;
  c2.scheduler.seed = 8;
  RunTranscript d = run(c2);
  CHECK(transcript_json(a) != transcript_json(d));
}

TEST_CASE("fault-free run delivers every round up to the validity horizon") {
  SimConfig c = base_config(4, 1, 4, 2, 10, 3);
  RunTranscript t = run(c);
  REQUIRE(t.quiesced);

  // every (sender, round <= R - phi) delivered by all 4 nodes
  std::set<std::tuple<NodeId, NodeId, Round>> got;
  for (const auto& d : t.deliveries) got.insert({d.node, d.sender, d.round});
  for (NodeId node = 1; node <= 4; ++node)
    for (NodeId s = 1; s <= 4; ++s)
      for (Round r = 1; r + 2 <= 10; ++r) CHECK(got.count({node, s, r}) == 1);

  CheckReport rep = check_invariants(t);
  CHECK(rep.ok);
}

TEST_CASE("random scheduler delivers everything submitted (no starvation)") {
  SimConfig c = base_config(10, 3, 10, 4, 50, 5);
  RunTranscript t = run(c);
  REQUIRE(t.quiesced);
  CHECK(t.submitted_envelopes > 100000);
  CHECK(t.delivered_envelopes == t.submitted_envelopes);
}

TEST_CASE("round-robin scheduling also satisfies the invariants") {
  SimConfig c = base_config(4, 1, 4, 2, 8, 1);
  c.scheduler.kind = SchedulerKind::kRoundRobin;
  RunTranscript t = run(c);
  REQUIRE(t.quiesced);
  CHECK(check_invariants(t).ok);
}

TEST_CASE("step cap produces a timeout result, never a silent hang") {
  SimConfig c = base_config(4, 1, 4, 2, 8, 1);
  c.step_cap = 50;
  RunTranscript t = run(c);
  CHECK(!t.quiesced);
  CHECK(t.steps == 50);
}

TEST_CASE("silent byzantine nodes: invariants hold, optimistic path never fires") {
  SimConfig c = base_config(4, 1, 4, 4, 12, 11);
  set_fault(c, FaultKind::kSilent, {4});
  RunTranscript t = run(c);
  REQUIRE(t.quiesced);
  CHECK(check_invariants(t).ok);
  DeliveryStats st = delivery_stats(t);
  CHECK(st.via_optimistic == 0);  // |M| = n can never be met
  CHECK(st.via_chain > 0);
}

TEST_CASE("equivocating sender: agreement and totality over many seeds") {
  for (std::uint64_t seed = 1; seed <= 25; ++seed) {
    SimConfig c = base_config(4, 1, 4, 2, 8, seed);
    set_fault(c, FaultKind::kEquivocator, {4});
    RunTranscript t = run(c);
    CAPTURE(seed);
    REQUIRE(t.quiesced);
    CheckReport rep = check_invariants(t);
    if (!rep.ok) {
      CAPTURE(rep.violations.front().kind);
      CAPTURE(rep.violations.front().detail);
    }
    CHECK(rep.ok);
  }
}

TEST_CASE("equivocator: at most one chain per round can be certified") {
  // Share-uniqueness of the 2f+1 honest members makes a second same-round
  // certificate impossible: it would need 2(floor(n_c/2)+1) distinct signers
  // minus the double-signing sender, more than the committee holds.
  SimConfig c = base_config(4, 1, 4, 2, 8, 13);
  set_fault(c, FaultKind::kEquivocator, {4});
  RunTranscript t = run(c);
  std::map<std::pair<NodeId, Round>, std::set<std::string>> digests;
  for (const auto& d : t.deliveries)
    digests[{d.sender, d.round}].insert(to_hex(d.digest.bytes));
  for (const auto& [key, set] : digests) CHECK(set.size() == 1);
}

TEST_CASE("selective and garbage-cert byzantine profiles keep invariants") {
  for (FaultKind kind : {FaultKind::kSelective, FaultKind::kGarbageCerts}) {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
      SimConfig c = base_config(4, 1, 4, 2, 8, seed * 3);
      set_fault(c, kind, {4});
      c.fault.selective_targets = {1, 2};
      RunTranscript t = run(c);
      CAPTURE(static_cast<int>(kind));
      CAPTURE(seed);
      REQUIRE(t.quiesced);
      CHECK(check_invariants(t).ok);
    }
  }
}

TEST_CASE("adversarial scheduler with an empty favored set still delivers") {
  SimConfig c = base_config(4, 1, 4, 2, 8, 9);
  c.scheduler.kind = SchedulerKind::kAdversarial;
  c.scheduler.observed_sender = 1;
  c.scheduler.favored = {};  // nothing to starve around: release-on-idle kicks in
  c.scheduler.starvation_budget = 1u << 30;
  RunTranscript t = run(c);
  REQUIRE(t.quiesced);
  CheckOptions opts;
  CHECK(check_invariants(t, opts).ok);
}

TEST_CASE("byzantine traffic is excluded from honest-bit accounting") {
  SimConfig honest_cfg = base_config(4, 1, 4, 2, 6, 21);
  RunTranscript all_honest = run(honest_cfg);

  SimConfig byz_cfg = honest_cfg;
  set_fault(byz_cfg, FaultKind::kSilent, {4});
  RunTranscript with_byz = run(byz_cfg);
  // a silent node sends nothing and receives everything: fewer honest bits
  CHECK(with_byz.honest_bits < all_honest.honest_bits);
  for (const auto& [key, bits] : with_byz.instance_bits) CHECK(key.first != 0);
}
