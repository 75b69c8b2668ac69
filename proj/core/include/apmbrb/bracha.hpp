// Copyright 2026 The apmbrb Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <set>

#include "apmbrb/sim.hpp"

namespace apmbrb {

// Reference two-phase reliable broadcast on the simulator interfaces: echo on
// first receipt, vote on n-f echoes or f+1 votes, deliver on n-f votes. Used
// for correctness cross-checks and cost comparison.
class BrachaNode : public Agent {
 public:
  struct Options {
    std::uint32_t n = 0;
    std::uint32_t f = 0;
    std::uint32_t payload_bytes = 0;
    std::uint64_t payload_seed = 0;
    Round max_round = 0;
    bool sender_active = true;
  };

  BrachaNode(NodeId id, Options opts, std::shared_ptr<const CryptoProvider> provider,
             const std::uint64_t* clock);

  NodeId id() const override { return id_; }
  void start() override;
  void on_envelope(const Envelope& env) override;
  void drain(std::vector<Envelope>& out) override;
  void collect_deliveries(std::vector<DeliveryEvent>& out) const override;
  Round rounds_broadcast() const override { return own_round_; }

  bool delivered(NodeId origin, Round round) const;

 private:
  struct Instance {
    std::map<std::uint64_t, std::set<NodeId>> echoes;  // payload tag -> senders
    std::map<std::uint64_t, std::set<NodeId>> votes;
    bool echoed = false;
    bool voted = false;
    bool delivered = false;
    PayloadRef delivered_payload;
    std::uint64_t delivered_step = 0;
    std::uint64_t delivered_order = 0;
  };

  void broadcast_round(Round round);
  void handle(NodeId src, const BrachaMsg& m);
  void maybe_progress(NodeId origin, Round round, const PayloadRef& payload);
  void broadcast(BrachaMsg m);

  NodeId id_;
  Options opts_;
  std::shared_ptr<const CryptoProvider> provider_;
  const std::uint64_t* clock_;
  std::vector<Envelope> outbox_;
  std::map<std::pair<NodeId, Round>, Instance> instances_;
  Round own_round_ = 0;
  std::uint64_t order_ = 0;
};

std::unique_ptr<Agent> make_bracha_byzantine(FaultKind kind, NodeId id, BrachaNode::Options opts,
                                             std::shared_ptr<const CryptoProvider> provider,
                                             const std::vector<NodeId>& selective_targets,
                                             const std::uint64_t* clock);

}  // namespace apmbrb
