// Copyright 2026 The apmbrb Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <vector>

#include "apmbrb/crypto.hpp"
#include "apmbrb/types.hpp"

namespace apmbrb {

// One round-r broadcast from a sender. For r > 1 it carries the certificate
// of the sender's previous message, a 2f+1 distinct-sender certificate set
// for round r-1, and the sender's current triggers snapshot.
struct BroadcastMessage {
  PayloadRef payload;
  NodeId sender = 0;
  Round round = 0;
  std::optional<Certificate> prev_cert;  // absent iff round == 1
  std::vector<Certificate> prev;         // empty iff round == 1
  std::vector<std::optional<Certificate>> triggers;  // index j-1 -> sender j
  CryptoBytes sender_sig;  // over content digest; not part of the digest input

  // Content digest, cached at construction / decode. Not serialized.
  Digest digest;
};

// Identity of a certificate statement, used for prev-set intersection and
// delivery bookkeeping without keeping whole share sets around.
struct CertStatement {
  NodeId sender = 0;
  Round round = 0;
  Digest digest;

  friend bool operator==(const CertStatement&, const CertStatement&) = default;
  friend bool operator<(const CertStatement& a, const CertStatement& b) {
    if (a.sender != b.sender) return a.sender < b.sender;
    if (a.round != b.round) return a.round < b.round;
    return a.digest < b.digest;
  }
};

inline CertStatement statement_of(const Certificate& c) {
  return CertStatement{c.tag.sender, c.tag.round, c.message_digest};
}

}  // namespace apmbrb
