// Copyright 2026 The apmbrb Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <string>
#include <vector>

#include "apmbrb/metrics.hpp"
#include "apmbrb/sim.hpp"

namespace apmbrb {

// Serializable experiment description; the unit of reproducibility. A config
// plus its seed list fully determines every transcript.
struct ExperimentConfig {
  ProtocolKind protocol = ProtocolKind::kApm;
  std::uint32_t n = 4;
  std::uint32_t f = 1;
  std::optional<double> epsilon;
  std::uint32_t n_c = 4;
  Round phi = 2;
  std::uint32_t payload_bytes = 1024;
  std::uint32_t k_bytes = 32;
  Round rounds = 8;
  FaultKind fault = FaultKind::kNone;
  std::vector<NodeId> byzantine;          // empty + fault!=none: last f ids
  std::vector<NodeId> selective_targets;  // empty: first ceil(n/2) ids
  SchedulerKind scheduler = SchedulerKind::kRandomAsync;
  std::vector<NodeId> favored;
  NodeId observed_sender = 0;
  std::uint64_t starvation_budget = 0;
  std::vector<std::uint64_t> seeds = {1};
  std::uint64_t setup_seed = 1;
  std::uint64_t seed0 = 1;
  std::uint64_t step_cap = 0;
  bool disable_equivocation_guard = false;
  bool allow_resilience_violation = false;

  SimConfig to_sim(std::uint64_t seed) const;
  std::string to_json() const;
  static ExperimentConfig from_json(const std::string& text);
};

// --- impossibility demonstration -------------------------------------------

struct ImpossibilityReport {
  std::uint32_t n = 0;
  std::uint32_t f = 0;
  std::uint32_t n_c = 0;
  std::uint64_t budget = 0;
  // adversarial run
  std::uint64_t adversarial_distinct_acks = 0;  // distinct honest acknowledgers
  std::uint64_t adversarial_outside_favored = 0;
  bool held_at_f = false;
  // random contrast run
  std::uint64_t random_rounds_to_quorum = 0;  // first-ack rounds until f+1 distinct
  double coupon_estimate = 0.0;
  bool random_within_estimate = false;  // within +-50%
  std::string to_json() const;
};

ImpossibilityReport adversarial_demo(std::uint32_t n, std::uint32_t f, std::uint32_t n_c,
                                     std::uint64_t budget, std::uint64_t seed);

// --- acceptance suite -------------------------------------------------------

struct CriterionResult {
  int number = 0;
  std::string name;
  bool pass = false;
  std::string details;
  double seconds = 0.0;
};

// Runs the numbered acceptance criteria (empty set: all), fanning runs out
// over `threads` workers. on_done fires per criterion as it completes.
std::vector<CriterionResult> run_acceptance_suite(
    std::vector<int> which, unsigned threads,
    const std::function<void(const CriterionResult&)>& on_done = {});

bool all_passed(const std::vector<CriterionResult>& results);

}  // namespace apmbrb
