// Copyright 2026 The apmbrb Authors
// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "apmbrb/committee.hpp"

using namespace apmbrb;

namespace {

std::shared_ptr<const CryptoProvider> provider(std::uint32_t n, std::uint64_t seed = 3) {
  return make_keyed_provider(KeyMaterial{seed, n}, 32);
}

}  // namespace

TEST_CASE("derive_params evaluates the chain-length and committee formulas") {
  // phi = ceil(2 * 100 * ln(2^20)) = ceil(2772.588...) = 2773
  CommitteeParams p = derive_params(100, 33, std::pow(2.0, -20));
  CHECK(p.phi == 2773);
  // raw n_c = ceil(18 * ln(2 * 2773 * 2^20)) = ceil(404.7...) = 405, capped at n
  CHECK(p.n_c_raw == 405);
  CHECK(p.n_c == 100);

  CommitteeParams q = derive_params(4, 1, 0.5);
  CHECK(q.phi == 6);  // ceil(8 ln 2) = 6
}

TEST_CASE("derive_params validates resilience and epsilon") {
  CHECK_THROWS_AS((void)derive_params(9, 3, 0.01), Error);  // n < 3f+1
  CHECK_THROWS_AS((void)derive_params(10, 3, 0.0), Error);
  CHECK_THROWS_AS((void)derive_params(10, 3, 1.0), Error);
  CHECK_NOTHROW((void)derive_params(10, 3, 0.01));
}

TEST_CASE("sampling is deterministic and periodic in phi") {
  auto p = provider(10);
  CommitteeParams params = override_params(10, 3, 5, 7);
  Seed seed{99};

  Committee a = sample_committee(*p, seed, 4, 12, params);
  Committee b = sample_committee(*p, seed, 4, 12, params);
  CHECK(a.members == b.members);

  Committee c = sample_committee(*p, seed, 4, 12 + params.phi, params);
  CHECK(a.members == c.members);  // committees repeat every phi rounds

  Committee d = sample_committee(*p, seed, 5, 12, params);
  CHECK(a.members != d.members);  // keyed by sender too (whp)
}

TEST_CASE("sampled members are distinct and of size n_c") {
  auto p = provider(16);
  CommitteeParams params = override_params(16, 5, 9, 4);
  for (Round r = 1; r <= 40; ++r) {
    Committee c = sample_committee(*p, Seed{1}, 3, r, params);
    CHECK(c.members.size() == 9);
    std::set<NodeId> s(c.members.begin(), c.members.end());
    CHECK(s.size() == 9);
    for (NodeId m : c.members) {
      CHECK(m >= 1);
      CHECK(m <= 16);
    }
  }
}

TEST_CASE("n_c = n yields the full node set for any seed") {
  auto p = provider(7);
  CommitteeParams params = override_params(7, 2, 7, 3);
  for (std::uint64_t s : {1ull, 2ull, 77ull}) {
    Committee c = sample_committee(*p, Seed{s}, 2, 5, params);
    CHECK(c.sorted == std::vector<NodeId>{1, 2, 3, 4, 5, 6, 7});
  }
}

TEST_CASE("sampler publicness: node instances with the same inputs agree") {
  auto p1 = provider(12, 5);
  auto p2 = provider(12, 5);
  CommitteeParams params = override_params(12, 3, 6, 4);
  for (NodeId sender = 1; sender <= 12; ++sender) {
    Committee a = sample_committee(*p1, Seed{8}, sender, 9, params);
    Committee b = sample_committee(*p2, Seed{8}, sender, 9, params);
    CHECK(a.members == b.members);
  }
}

TEST_CASE("hypergeometric honest-majority probability, exact") {
  // sum_{h=3..5} C(7,h) C(3,5-h) / C(10,5) = 231/252
  ExactProbability p = honest_majority_prob_exact(10, 3, 5);
  long long num = std::stoll(p.numerator);
  long long den = std::stoll(p.denominator);
  CHECK(num * 252 == den * 231);
  CHECK(p.value == doctest::Approx(231.0 / 252.0).epsilon(1e-12));

  CHECK(honest_majority_prob(10, 0, 4) == doctest::Approx(1.0));   // no byzantine nodes
  CHECK(honest_majority_prob(10, 3, 10) == doctest::Approx(1.0));  // full committee
  CHECK(honest_majority_prob(13, 4, 13) == doctest::Approx(1.0));
}

TEST_CASE("sampler honest-majority frequency matches the hypergeometric oracle") {
  // 1e5 committee draws via the hash sampler vs the exact without-replacement
  // probability; the modulo bias at k=32 bytes is far below the noise floor.
  auto p = provider(10, 17);
  CommitteeParams params = override_params(10, 3, 5, 4);
  const std::uint64_t draws = 100000;
  std::uint64_t majority = 0;
  for (std::uint64_t i = 0; i < draws; ++i) {
    Committee c =
        sample_committee(*p, Seed{i}, static_cast<NodeId>(i % 10 + 1), (i % 4) + 1, params);
    std::uint32_t honest = 0;
    for (NodeId m : c.members)
      if (m <= 7) ++honest;
    if (honest >= 3) ++majority;
  }
  double expect = 231.0 / 252.0;
  double se = std::sqrt(expect * (1 - expect) / draws);
  CHECK(std::abs(static_cast<double>(majority) / draws - expect) <= 3 * se);
}

TEST_CASE("derived committee size satisfies the majority bound (Monte Carlo)") {
  // For uncapped derived (n_c, phi): the fraction of committees without an
  // honest majority must not exceed eps/(2 phi) beyond Monte-Carlo noise.
  const std::uint32_t n = 3000, f = 999;
  const double eps = 0.05;
  CommitteeParams params = derive_params(n, f, eps);
  REQUIRE(params.n_c_raw <= n);  // uncapped at this scale
  double bound = eps / (2.0 * static_cast<double>(params.phi));

  auto p = provider(n, 23);
  const std::uint64_t draws = 20000;
  std::uint64_t bad = 0;
  for (std::uint64_t i = 0; i < draws; ++i) {
    Committee c = sample_committee(*p, Seed{i}, static_cast<NodeId>(i % n + 1),
                                   i % params.phi + 1, params);
    std::uint32_t honest = 0;
    for (NodeId m : c.members)
      if (m <= n - f) ++honest;
    if (honest < params.n_c / 2 + 1) ++bad;
  }
  double fraction = static_cast<double>(bad) / draws;
  double se = std::sqrt(bound * (1 - bound) / draws);
  CHECK(fraction <= bound + 3 * se);
}

TEST_CASE("coupon process: analytic closed form") {
  CHECK(coupon_analytic_mean(0) == doctest::Approx(1.0));
  CHECK(coupon_analytic_mean(1) == doctest::Approx(2.5));  // 3/3 + 3/2
}

TEST_CASE("coupon process: Monte Carlo matches the closed form within 2%") {
  CouponStats st = coupon_rounds_stats(10, 100000, 4242);
  CHECK(std::abs(st.empirical_mean - st.analytic_mean) / st.analytic_mean <= 0.02);
  CHECK(st.quantiles.size() == 3);
}

TEST_CASE("coupon tail beyond phi is bounded by eps^2 (within noise)") {
  const double eps = 0.1;
  for (std::uint32_t f : {5u, 20u}) {
    std::uint32_t n = 3 * f + 1;
    auto threshold = static_cast<std::uint64_t>(std::ceil(2.0 * n * std::log(1.0 / eps)));
    CouponStats st = coupon_rounds_stats(f, 50000, 99 + f, threshold);
    CHECK(st.tail_fraction <= eps * eps + 3.0 / std::sqrt(50000.0));
  }
}

TEST_CASE("parameter table CSV") {
  std::string csv = params_table_csv({{100, 33, std::pow(2.0, -20)}, {10, 3, 0.01}});
  CHECK(csv.find("n,f,epsilon,n_c_raw,n_c,phi,honest_majority_prob") == 0);
  CHECK(csv.find("100,33,") != std::string::npos);
  CHECK(csv.find(",405,100,2773,") != std::string::npos);
}
