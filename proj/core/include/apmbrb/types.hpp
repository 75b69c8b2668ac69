// Copyright 2026 The apmbrb Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace apmbrb {

// Node identifiers are 1-based, matching the usual P_1..P_n convention.
using NodeId = std::uint16_t;
using Round = std::uint64_t;

constexpr std::size_t kMaxDigestBytes = 64;

enum class Errc {
  parameter_range,
  resilience_violation,
  unknown_signer,
  threshold_not_met,
  duplicate_signer,
  digest_mismatch,
  non_member,
  not_ready,
  non_quiescent,
  bad_config,
};

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what) : std::runtime_error(what), code_(code) {}
  Errc code() const { return code_; }

 private:
  Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& what) { throw Error(code, what); }

// Simulated payload: content-free, identified by a tag and accounted at
// size_bytes. The protocol never inspects payload bytes, only digests, so
// large-|m| experiments do not materialize buffers.
struct PayloadRef {
  std::uint64_t tag = 0;
  std::uint32_t size_bytes = 0;

  friend bool operator==(const PayloadRef&, const PayloadRef&) = default;
};

}  // namespace apmbrb
