// Copyright 2026 The apmbrb Authors
// SPDX-License-Identifier: Apache-2.0
#include "apmbrb/committee.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <boost/multiprecision/cpp_int.hpp>

namespace apmbrb {

namespace {

using BigInt = boost::multiprecision::cpp_int;

BigInt binomial(std::uint64_t n, std::uint64_t k) {
  if (k > n) return 0;
  if (k > n - k) k = n - k;
  BigInt r = 1;
  for (std::uint64_t i = 1; i <= k; ++i) {
    r *= n - k + i;
    r /= i;
  }
  return r;
}

// Big-endian byte string modulo m.
std::uint64_t bytes_mod(const CryptoBytes& b, std::uint64_t m) {
  std::uint64_t acc = 0;
  for (std::size_t i = 0; i < b.len; ++i) acc = ((acc << 8) | b.data[i]) % m;
  return acc;
}

}  // namespace

CommitteeParams derive_params(std::uint32_t n, std::uint32_t f, double epsilon) {
  if (!(epsilon > 0.0 && epsilon < 1.0)) fail(Errc::parameter_range, "epsilon must lie in (0,1)");
  if (n < 3 * f + 1) fail(Errc::resilience_violation, "requires n >= 3f+1");

  CommitteeParams p;
  p.n = n;
  p.f = f;
  p.epsilon = epsilon;

  double phi = std::ceil(2.0 * n * std::log(1.0 / epsilon));
  p.phi = static_cast<Round>(std::max(phi, 1.0));

  // The proof supports the 2*phi/eps form; it dominates the phi/eps variant.
  double raw = std::ceil(18.0 * std::log(2.0 * static_cast<double>(p.phi) / epsilon));
  p.n_c_raw = static_cast<std::uint32_t>(std::max(raw, 1.0));
  p.n_c = std::min(p.n_c_raw, n);
  return p;
}

CommitteeParams override_params(std::uint32_t n, std::uint32_t f, std::uint32_t n_c, Round phi) {
  if (n == 0 || n_c == 0 || n_c > n || phi < 1) fail(Errc::parameter_range, "bad override");
  if (n < 3 * f + 1) fail(Errc::resilience_violation, "requires n >= 3f+1");
  CommitteeParams p;
  p.n = n;
  p.f = f;
  p.epsilon = 0.0;
  p.n_c = n_c;
  p.n_c_raw = n_c;
  p.phi = phi;
  return p;
}

Committee sample_committee(const CryptoProvider& provider, const Seed& seed0, NodeId sender,
                           Round round, const CommitteeParams& params) {
  if (round < 1) fail(Errc::parameter_range, "rounds start at 1");

  // Local convention for the concatenation: length-prefixed big-endian fields.
  ByteWriter w;
  w.u32(8);
  w.u64(seed0.seed0);
  w.u32(8);
  w.u64(round % params.phi);
  w.u32(2);
  w.u16(sender);
  Digest seed = provider.hash(w.bytes());

  Committee c;
  c.sender = sender;
  c.round = round;
  c.members.reserve(params.n_c);
  std::vector<bool> chosen(params.n + 1, false);
  while (c.members.size() < params.n_c) {
    NodeId idx = static_cast<NodeId>(bytes_mod(seed.bytes, params.n) + 1);
    if (!chosen[idx]) {
      chosen[idx] = true;
      c.members.push_back(idx);
    }
    // Skip repeats and keep hashing: the analysis assumes sampling without
    // replacement, so a draw never shrinks the committee.
    seed = provider.hash(std::span<const std::uint8_t>(seed.bytes.data, seed.bytes.len));
  }
  c.sorted = c.members;
  std::sort(c.sorted.begin(), c.sorted.end());
  return c;
}

ExactProbability honest_majority_prob_exact(std::uint32_t n, std::uint32_t f, std::uint32_t n_c) {
  if (n_c == 0 || n_c > n) fail(Errc::parameter_range, "need 0 < n_c <= n");
  const std::uint32_t honest = n - f;
  const std::uint32_t need = n_c / 2 + 1;

  BigInt num = 0;
  for (std::uint32_t h = need; h <= std::min(n_c, honest); ++h) {
    if (n_c - h > f) continue;
    num += binomial(honest, h) * binomial(f, n_c - h);
  }
  BigInt den = binomial(n, n_c);

  BigInt g = boost::multiprecision::gcd(num, den);
  if (g > 1) {
    num /= g;
    den /= g;
  }

  ExactProbability p;
  p.numerator = num.str();
  p.denominator = den.str();
  p.value = num.convert_to<double>() / den.convert_to<double>();
  return p;
}

double honest_majority_prob(std::uint32_t n, std::uint32_t f, std::uint32_t n_c) {
  return honest_majority_prob_exact(n, f, n_c).value;
}

double coupon_analytic_mean(std::uint32_t f) {
  double e = 0.0;
  for (std::uint32_t a = 1; a <= f + 1; ++a)
    e += static_cast<double>(2 * f + 1) / static_cast<double>(2 * f + 2 - a);
  return e;
}

CouponStats coupon_rounds_stats(std::uint32_t f, std::uint64_t trials, std::uint64_t rng_seed,
                                std::uint64_t tail_threshold) {
  if (trials < 1) fail(Errc::parameter_range, "trials must be >= 1");
  CouponStats stats;
  stats.analytic_mean = coupon_analytic_mean(f);
  stats.trials = trials;
  stats.tail_threshold = tail_threshold;

  std::mt19937_64 rng(rng_seed);
  std::uniform_int_distribution<std::uint32_t> pick(1, 2 * f + 1);

  std::vector<std::uint32_t> samples;
  samples.reserve(trials);
  double sum = 0.0;
  std::uint64_t over = 0;
  std::vector<std::uint8_t> seen(2 * f + 2);
  for (std::uint64_t t = 0; t < trials; ++t) {
    std::fill(seen.begin(), seen.end(), 0);
    std::uint32_t distinct = 0;
    std::uint32_t rounds = 0;
    while (distinct < f + 1) {
      ++rounds;
      std::uint32_t s = pick(rng);
      if (!seen[s]) {
        seen[s] = 1;
        ++distinct;
      }
    }
    samples.push_back(rounds);
    sum += rounds;
    if (tail_threshold > 0 && rounds > tail_threshold) ++over;
  }
  stats.empirical_mean = sum / static_cast<double>(trials);
  stats.tail_fraction = tail_threshold > 0 ? static_cast<double>(over) / trials : 0.0;

  std::sort(samples.begin(), samples.end());
  for (double q : {0.5, 0.9, 0.99}) {
    std::size_t i = std::min(samples.size() - 1,
                             static_cast<std::size_t>(q * static_cast<double>(samples.size())));
    stats.quantiles.emplace_back(q, samples[i]);
  }
  return stats;
}

std::string params_table_csv(const std::vector<ParamsRequest>& rows) {
  std::ostringstream out;
  out << "n,f,epsilon,n_c_raw,n_c,phi,honest_majority_prob\n";
  for (const auto& r : rows) {
    CommitteeParams p = derive_params(r.n, r.f, r.epsilon);
    out << r.n << ',' << r.f << ',' << r.epsilon << ',' << p.n_c_raw << ',' << p.n_c << ','
        << p.phi << ',' << honest_majority_prob(r.n, r.f, p.n_c) << '\n';
  }
  return out.str();
}

}  // namespace apmbrb
