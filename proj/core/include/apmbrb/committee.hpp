// Copyright 2026 The apmbrb Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "apmbrb/crypto.hpp"
#include "apmbrb/types.hpp"

namespace apmbrb {

// Protocol parameters. phi is both the certificate-chain length required for
// the common-case delivery condition and the committee repetition period.
struct CommitteeParams {
  std::uint32_t n = 0;
  std::uint32_t f = 0;
  double epsilon = 0.0;       // 0 when parameters were set by explicit override
  std::uint32_t n_c = 0;      // capped at n
  std::uint32_t n_c_raw = 0;  // formula value before the cap
  Round phi = 0;

  std::size_t cert_threshold() const { return n_c / 2 + 1; }  // floor(n_c/2)+1
  std::size_t quorum() const { return 2 * static_cast<std::size_t>(f) + 1; }
};

struct Committee {
  NodeId sender = 0;
  Round round = 0;                // the round it was sampled for
  std::vector<NodeId> members;    // in draw order, distinct
  std::vector<NodeId> sorted;     // same ids, ascending, for membership tests

  bool contains(NodeId id) const;
  CommitteeTag tag() const { return CommitteeTag{sender, round}; }
};

// Shared sampling seed fixed at setup; identical across all nodes.
struct Seed {
  std::uint64_t seed0 = 0;
};

// phi = ceil(2 n ln(1/eps)); n_c = ceil(18 ln(2 phi / eps)) capped at n.
// Natural logarithms. Throws on n < 3f+1 or eps outside (0,1).
CommitteeParams derive_params(std::uint32_t n, std::uint32_t f, double epsilon);

// Explicit small-scale overrides, outside the proven-epsilon regime.
CommitteeParams override_params(std::uint32_t n, std::uint32_t f, std::uint32_t n_c, Round phi);

// Public deterministic sampler. seed = H(seed0 || round mod phi || sender);
// indices are (seed mod n)+1, re-hashing and skipping repeats until n_c
// distinct members are drawn. The modulo bias for k-byte seeds is accepted.
Committee sample_committee(const CryptoProvider& provider, const Seed& seed0, NodeId sender,
                           Round round, const CommitteeParams& params);

// Exact hypergeometric probability that a uniform without-replacement sample
// of n_c from n (with n-f honest) contains at least floor(n_c/2)+1 honest
// nodes. Exact rational arithmetic, reduced to lowest terms.
struct ExactProbability {
  std::string numerator;
  std::string denominator;
  double value = 0.0;
};
ExactProbability honest_majority_prob_exact(std::uint32_t n, std::uint32_t f, std::uint32_t n_c);
double honest_majority_prob(std::uint32_t n, std::uint32_t f, std::uint32_t n_c);

// Rounds until f+1 distinct honest signers appear, drawing one uniform
// honest signer per round from 2f+1 honest nodes.
struct CouponStats {
  double analytic_mean = 0.0;  // sum_{a=1}^{f+1} (2f+1)/(2f+2-a)
  double empirical_mean = 0.0;
  std::uint64_t trials = 0;
  std::vector<std::pair<double, std::uint64_t>> quantiles;  // (q, rounds)
  // fraction of trials with rounds > threshold, for a caller-chosen threshold
  double tail_fraction = 0.0;
  std::uint64_t tail_threshold = 0;
};
double coupon_analytic_mean(std::uint32_t f);
CouponStats coupon_rounds_stats(std::uint32_t f, std::uint64_t trials, std::uint64_t rng_seed,
                                std::uint64_t tail_threshold = 0);

// Parameter table: one CSV row per (n, f, epsilon) input.
struct ParamsRequest {
  std::uint32_t n;
  std::uint32_t f;
  double epsilon;
};
std::string params_table_csv(const std::vector<ParamsRequest>& rows);

}  // namespace apmbrb
