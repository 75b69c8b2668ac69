// Copyright 2026 The apmbrb Authors
// SPDX-License-Identifier: Apache-2.0
#include "apmbrb/crypto.hpp"

#include <algorithm>
#include <cstring>
#include <set>

#include "apmbrb/committee.hpp"

namespace apmbrb {

std::string to_hex(const std::uint8_t* p, std::size_t n) {
  static const char* digits = "0123456789abcdef";
  std::string s;
  s.reserve(2 * n);
  for (std::size_t i = 0; i < n; ++i) {
    s.push_back(digits[p[i] >> 4]);
    s.push_back(digits[p[i] & 0xf]);
  }
  return s;
}

namespace {

inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t rotl(std::uint64_t x, int r) { return (x << r) | (x >> (64 - r)); }

// 128-bit-state absorb/squeeze hash over 8-byte lanes. Fast enough for the
// simulator's share-verification volume; collision behavior is governed by
// the 128-bit internal state.
struct MixHash {
  std::uint64_t a, b;

  explicit MixHash(std::uint64_t key0, std::uint64_t key1) {
    a = mix64(key0 ^ 0x6a09e667f3bcc908ULL);
    b = mix64(key1 ^ 0xbb67ae8584caa73bULL);
  }

  void absorb_word(std::uint64_t w) {
    a = rotl(a ^ (w * 0x9ddfea08eb382d69ULL), 29) * 0xc2b2ae3d27d4eb4fULL;
    b = rotl(b + (w ^ a), 31) * 0x165667b19e3779f9ULL;
  }

  void absorb(std::span<const std::uint8_t> in) {
    std::size_t i = 0;
    while (i + 8 <= in.size()) {
      std::uint64_t w;
      std::memcpy(&w, in.data() + i, 8);
      absorb_word(w);
      i += 8;
    }
    if (i < in.size() || in.empty()) {
      std::uint64_t w = 0;
      if (i < in.size()) std::memcpy(&w, in.data() + i, in.size() - i);
      absorb_word(w ^ (0x80ull << (8 * (in.size() - i))));
    }
    absorb_word(static_cast<std::uint64_t>(in.size()) * 0xff51afd7ed558ccdULL);
  }

  void squeeze(std::uint8_t* out, std::size_t n) {
    std::uint64_t s0 = mix64(a ^ rotl(b, 32));
    std::uint64_t s1 = mix64(b ^ rotl(a, 17));
    std::size_t produced = 0;
    std::uint64_t ctr = 0;
    while (produced < n) {
      std::uint64_t w = mix64(s0 ^ mix64(s1 + ctr));
      std::size_t take = std::min<std::size_t>(8, n - produced);
      std::memcpy(out + produced, &w, take);
      produced += take;
      ++ctr;
    }
  }
};

class KeyedProvider final : public CryptoProvider {
 public:
  KeyedProvider(const KeyMaterial& keys, std::size_t k_bytes) : keys_(keys), k_(k_bytes) {
    if (k_ < 8 || k_ > kMaxDigestBytes) fail(Errc::parameter_range, "k_bytes outside [8,64]");
    if (keys_.n == 0) fail(Errc::parameter_range, "key material for zero nodes");
  }

  std::size_t digest_bytes() const override { return k_; }

  Digest hash(std::span<const std::uint8_t> input) const override {
    MixHash h(keys_.setup_seed, 0x243f6a8885a308d3ULL);
    h.absorb(input);
    Digest d;
    d.bytes.len = static_cast<std::uint8_t>(k_);
    h.squeeze(d.bytes.data, k_);
    return d;
  }

  SignatureShare sign_share(NodeId signer, const Digest& digest) const override {
    if (signer < 1 || signer > keys_.n) fail(Errc::unknown_signer, "signer id out of range");
    SignatureShare s;
    s.signer = signer;
    s.message_digest = digest;
    s.share_bytes = mac(signer, digest);
    return s;
  }

  bool verify_share(const SignatureShare& share) const override {
    if (share.signer < 1 || share.signer > keys_.n) return false;
    if (share.message_digest.bytes.len != k_ || share.share_bytes.len != k_) return false;
    return mac(share.signer, share.message_digest) == share.share_bytes;
  }

  Certificate aggregate(std::vector<SignatureShare> shares, const Committee& committee,
                        std::size_t threshold) const override {
    if (shares.size() < threshold) fail(Errc::threshold_not_met, "fewer shares than threshold");
    std::set<NodeId> seen;
    const Digest& digest = shares.front().message_digest;
    for (const auto& s : shares) {
      if (!seen.insert(s.signer).second) fail(Errc::duplicate_signer, "duplicate signer in share set");
      if (s.message_digest != digest) fail(Errc::digest_mismatch, "shares bind different digests");
      if (!committee.contains(s.signer)) fail(Errc::non_member, "signer not in committee");
      if (!verify_share(s)) fail(Errc::digest_mismatch, "share fails verification");
    }
    Certificate cert;
    cert.message_digest = digest;
    cert.tag = committee.tag();
    cert.shares.reserve(shares.size());
    for (const auto& s : shares) cert.shares.emplace_back(s.signer, s.share_bytes);
    std::sort(cert.shares.begin(), cert.shares.end());
    return cert;
  }

  bool verify_cert(const Certificate& cert, const Digest& digest, const Committee& committee,
                   std::size_t threshold) const override {
    if (cert.message_digest != digest) return false;
    if (cert.tag != committee.tag()) return false;
    if (cert.shares.size() < threshold) return false;
    NodeId prev = 0;
    for (const auto& [signer, bytes] : cert.shares) {
      if (signer <= prev) return false;  // sorted + distinct
      prev = signer;
      if (!committee.contains(signer)) return false;
      if (bytes.len != k_) return false;
      if (!(mac(signer, digest) == bytes)) return false;
    }
    return true;
  }

 private:
  CryptoBytes mac(NodeId signer, const Digest& digest) const {
    // Secret per node, derived from the setup seed.
    std::uint64_t secret = mix64(keys_.setup_seed ^ (0x9e3779b97f4a7c15ULL * (signer + 1)));
    MixHash h(secret, keys_.setup_seed);
    h.absorb(std::span<const std::uint8_t>(digest.bytes.data, digest.bytes.len));
    CryptoBytes out;
    out.len = static_cast<std::uint8_t>(k_);
    h.squeeze(out.data, k_);
    return out;
  }

  KeyMaterial keys_;
  std::size_t k_;
};

}  // namespace

bool Committee::contains(NodeId id) const {
  return std::binary_search(sorted.begin(), sorted.end(), id);
}

std::shared_ptr<const CryptoProvider> make_keyed_provider(const KeyMaterial& keys,
                                                          std::size_t k_bytes) {
  return std::make_shared<KeyedProvider>(keys, k_bytes);
}

}  // namespace apmbrb
