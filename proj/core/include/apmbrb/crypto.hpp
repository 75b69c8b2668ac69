// Copyright 2026 The apmbrb Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <memory>
#include <span>
#include <utility>
#include <vector>

#include "apmbrb/bytes.hpp"
#include "apmbrb/types.hpp"

namespace apmbrb {

struct Committee;  // committee.hpp

// Fixed-length message digest of digest_bytes() == k bytes.
struct Digest {
  CryptoBytes bytes;

  friend bool operator==(const Digest& a, const Digest& b) { return a.bytes == b.bytes; }
  friend bool operator!=(const Digest& a, const Digest& b) { return !(a == b); }
  friend bool operator<(const Digest& a, const Digest& b) { return a.bytes < b.bytes; }
};

struct SignatureShare {
  NodeId signer = 0;
  Digest message_digest;
  CryptoBytes share_bytes;
};

// Identifies the committee a certificate was formed under. Certificates bind
// (sender, round) explicitly; the chain walk relies on this binding.
struct CommitteeTag {
  NodeId sender = 0;
  Round round = 0;

  friend bool operator==(const CommitteeTag&, const CommitteeTag&) = default;
  friend auto operator<=>(const CommitteeTag&, const CommitteeTag&) = default;
};

// Threshold-style certificate over a message digest. The default provider
// represents it as the canonical sorted set of member shares; communication
// accounting still charges k bits per certificate (the size a real
// threshold signature would have).
struct Certificate {
  Digest message_digest;
  CommitteeTag tag;
  std::vector<std::pair<NodeId, CryptoBytes>> shares;  // sorted by signer, distinct

  // Stable identity for caches and cross-node comparison. Two certificates
  // over the same digest from different share subsets are the same logical
  // certificate.
  friend bool same_statement(const Certificate& a, const Certificate& b) {
    return a.tag == b.tag && a.message_digest == b.message_digest;
  }
};

// Deterministic key material shared by the whole system: per-node signing
// secrets plus the verification view, all derived from one setup seed.
struct KeyMaterial {
  std::uint64_t setup_seed = 0;
  std::uint32_t n = 0;
};

class CryptoProvider {
 public:
  virtual ~CryptoProvider() = default;

  virtual std::size_t digest_bytes() const = 0;

  virtual Digest hash(std::span<const std::uint8_t> input) const = 0;

  // Throws Errc::unknown_signer for ids outside [1..n].
  virtual SignatureShare sign_share(NodeId signer, const Digest& digest) const = 0;
  virtual bool verify_share(const SignatureShare& share) const = 0;

  // Preconditions checked: distinct signers, committee membership, shares all
  // over the same digest, |shares| >= threshold. Throws on violation.
  virtual Certificate aggregate(std::vector<SignatureShare> shares, const Committee& committee,
                                std::size_t threshold) const = 0;
  virtual bool verify_cert(const Certificate& cert, const Digest& digest,
                           const Committee& committee, std::size_t threshold) const = 0;

  Digest hash(const Bytes& b) const { return hash(std::span<const std::uint8_t>(b.data(), b.size())); }
};

// Test provider: keyed-hash construction, deterministic in the setup seed.
// The hash is a fast 128-bit-state mixing function, not a cryptographic
// primitive; the simulated adversary only interacts through this interface,
// which is the unforgeability boundary the protocol tests rely on.
std::shared_ptr<const CryptoProvider> make_keyed_provider(const KeyMaterial& keys,
                                                          std::size_t k_bytes);

}  // namespace apmbrb
