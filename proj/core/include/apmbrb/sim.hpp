// Copyright 2026 The apmbrb Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "apmbrb/envelope.hpp"
#include "apmbrb/node.hpp"

namespace apmbrb {

enum class ProtocolKind : std::uint8_t { kApm = 1, kBracha = 2 };

enum class SchedulerKind : std::uint8_t {
  kRandomAsync = 1,  // uniform pick from the in-flight pool
  kRoundRobin = 2,   // FIFO
  kAdversarial = 3,  // starves the observed sender's share inbox (see below)
};

// Adversarial mode models the full-asynchrony adversary of the impossibility
// argument: share envelopes addressed to `observed_sender` from honest nodes
// outside the favored set B are held back while the starvation budget lasts
// (or until nothing else is in flight). All other traffic is scheduled
// uniformly, so the protocol as a whole keeps moving.
struct SchedulerPolicy {
  SchedulerKind kind = SchedulerKind::kRandomAsync;
  std::uint64_t seed = 1;
  std::vector<NodeId> favored;  // B
  NodeId observed_sender = 0;
  std::uint64_t starvation_budget = 0;
};

enum class FaultKind : std::uint8_t {
  kNone = 0,
  kEquivocator = 1,  // two chains per round, committee split in half
  kSilent = 2,
  kSelective = 3,    // own broadcasts reach only a target subset
  kGarbageCerts = 4, // structurally plausible junk certificates and shares
};

struct FaultProfile {
  FaultKind kind = FaultKind::kNone;
  std::vector<NodeId> byzantine;          // fixed before execution
  std::vector<NodeId> selective_targets;  // kSelective: allowed destinations
};

struct SimConfig {
  ProtocolKind protocol = ProtocolKind::kApm;
  std::uint32_t n = 0;
  std::uint32_t f = 0;
  std::optional<double> epsilon;  // derive n_c/phi when set
  std::uint32_t n_c = 0;          // explicit override otherwise
  Round phi = 0;
  std::uint32_t payload_bytes = 0;
  std::uint32_t k_bytes = 32;
  Round rounds = 0;  // rounds each active sender broadcasts
  FaultProfile fault;
  SchedulerPolicy scheduler;
  std::uint64_t setup_seed = 1;
  std::uint64_t seed0 = 1;
  std::uint64_t step_cap = 0;  // 0: derived from the config
  bool disable_equivocation_guard = false;
  bool allow_resilience_violation = false;  // impossibility experiments only

  CommitteeParams resolve_params() const;
  bool is_byzantine(NodeId id) const;
};

struct DeliveryEvent {
  NodeId node = 0;
  NodeId sender = 0;
  Round round = 0;
  Digest digest;
  DeliveryVia via = DeliveryVia::kChain;
  Round trigger_round = 0;
  std::uint64_t step = 0;
  std::uint64_t order = 0;  // per-node sequence
};

struct KindStats {
  std::uint64_t count = 0;
  std::uint64_t bits = 0;
  std::uint64_t payload_bits = 0;
};

struct RunTranscript {
  SimConfig config;
  CommitteeParams params;
  bool quiesced = false;
  std::uint64_t steps = 0;
  std::uint64_t submitted_envelopes = 0;
  std::uint64_t delivered_envelopes = 0;

  std::vector<DeliveryEvent> deliveries;  // ordered by (step, node, order)
  std::vector<Violation> violations;
  std::vector<Round> sender_rounds;  // per node id-1: own rounds broadcast

  // honest-node bits, by (kind, purpose) and by attributed instance
  std::uint64_t honest_bits = 0;
  std::map<std::pair<PayloadKind, TrafficPurpose>, KindStats> by_kind;
  std::map<std::pair<NodeId, Round>, std::uint64_t> instance_bits;
  std::map<std::pair<NodeId, Round>, std::uint64_t> instance_payload_bits;

  // honest share arrivals at scheduler.observed_sender for its own stream,
  // one entry per distinct (round, signer), in arrival order
  std::vector<std::pair<Round, NodeId>> first_acks;
};

// Simulation agent: an honest node adapter or a byzantine behavior.
class Agent {
 public:
  virtual ~Agent() = default;
  virtual NodeId id() const = 0;
  virtual void start() = 0;
  virtual void on_envelope(const Envelope& env) = 0;
  virtual void drain(std::vector<Envelope>& out) = 0;
  virtual void collect_deliveries(std::vector<DeliveryEvent>& out) const { (void)out; }
  virtual Round rounds_broadcast() const { return 0; }
};

Envelope make_envelope(NodeId src, NodeId dst, std::shared_ptr<const WireBody> body,
                       std::size_t k_bytes, NodeId attr_sender, Round attr_round,
                       TrafficPurpose purpose);

// Deterministic discrete-event run: transcript is a pure function of config.
RunTranscript run(const SimConfig& config);

std::string transcript_json(const RunTranscript& t);

}  // namespace apmbrb
