// Copyright 2026 The apmbrb Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "apmbrb/sim.hpp"

namespace apmbrb {

// ---------------------------------------------------------------------------
// Transcript invariant checking
// ---------------------------------------------------------------------------

struct CheckOptions {
  bool agreement = true;
  bool validity = true;        // honest senders' rounds <= sent - phi delivered by all
  bool totality = true;        // any honest delivery present at every honest node
  bool sequentiality = true;   // per (node, sender) delivered rounds form a prefix
  bool require_quiesced = true;
};

struct CheckReport {
  bool ok = true;
  std::vector<Violation> violations;
  std::uint64_t deliveries = 0;

  void add(NodeId node, const std::string& kind, const std::string& detail) {
    ok = false;
    violations.push_back(Violation{node, kind, detail});
  }
};

CheckReport check_invariants(const RunTranscript& t, const CheckOptions& opts = {});

// ---------------------------------------------------------------------------
// Cost model (per-round, per-sender accounting)
// ---------------------------------------------------------------------------

struct CostTermRow {
  std::string name;
  std::uint64_t count = 0;
  std::uint64_t measured_bits = 0;
  std::uint64_t formula_bits = 0;  // worst-case closed form over all instances
  bool within = true;
};

struct CostReport {
  std::vector<CostTermRow> terms;
  std::uint64_t measured_total_bits = 0;
  std::uint64_t formula_worst_bits = 0;

  // steady-state comparison: mean measured round bits vs the closed form for
  // a steady round at this configuration
  double delta_bar = 0.0;  // mean per-sender steady round cost (bits)
  double formula_steady_round = 0.0;
  double factor_vs_steady = 0.0;
  bool per_term_ok = true;
  bool factor_ok = true;

  Round steady_from = 0;
  Round steady_to = 0;
  std::vector<std::pair<Round, double>> round_bits;  // system Δ_r / n
};

// Fault-free, quiesced transcripts only; throws otherwise.
CostReport measure_round_cost(const RunTranscript& t);

// Closed-form steady-round bits per sender for a config (formula side of the
// conformance check).
double steady_round_formula_bits(const CommitteeParams& params, std::uint32_t payload_bytes,
                                 std::uint32_t k_bytes);

// ---------------------------------------------------------------------------
// Amortization
// ---------------------------------------------------------------------------

struct AmortizationReport {
  std::vector<std::pair<Round, double>> series;  // (r, C(r)/r) bits
  double delta_bar = 0.0;
  double value_at_end = 0.0;
  double ratio_end = 0.0;  // C(R)/R over delta_bar
  double value_at_phi = 0.0;
  double ratio_phi = 0.0;  // C(phi)/phi over 2*delta_bar
  double plateau_constant = 0.0;  // plateau / (n|m| + n^2 k) in bits
  bool decreasing = true;
};

AmortizationReport amortization_curve(const RunTranscript& t);

// Delivery-path statistics (optimistic-path share, latency histogram).
struct DeliveryStats {
  std::uint64_t via_chain = 0;
  std::uint64_t via_optimistic = 0;
  std::uint64_t via_quorum = 0;
  std::uint64_t optimistic_latency1 = 0;  // via optimistic with 1-round latency
  std::map<Round, std::uint64_t> latency_hist;  // trigger_round - round
  double optimistic_fraction = 0.0;
};

DeliveryStats delivery_stats(const RunTranscript& t);

std::string cost_report_json(const CostReport& r);

}  // namespace apmbrb
