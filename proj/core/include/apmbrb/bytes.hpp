// Copyright 2026 The apmbrb Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

#include "apmbrb/types.hpp"

namespace apmbrb {

using Bytes = std::vector<std::uint8_t>;

// Fixed-capacity byte string for digests, signature shares and certificate
// bodies. Value type with memcmp semantics; avoids per-hash heap traffic in
// the simulator hot path.
struct CryptoBytes {
  std::uint8_t data[kMaxDigestBytes] = {};
  std::uint8_t len = 0;

  CryptoBytes() = default;
  CryptoBytes(const std::uint8_t* p, std::size_t n) {
    len = static_cast<std::uint8_t>(n);
    std::memcpy(data, p, n);
  }

  std::size_t size() const { return len; }
  const std::uint8_t* begin() const { return data; }
  const std::uint8_t* end() const { return data + len; }

  friend bool operator==(const CryptoBytes& a, const CryptoBytes& b) {
    return a.len == b.len && std::memcmp(a.data, b.data, a.len) == 0;
  }
  friend bool operator!=(const CryptoBytes& a, const CryptoBytes& b) { return !(a == b); }
  friend bool operator<(const CryptoBytes& a, const CryptoBytes& b) {
    int c = std::memcmp(a.data, b.data, a.len < b.len ? a.len : b.len);
    if (c != 0) return c < 0;
    return a.len < b.len;
  }

  // First 8 bytes as a little-endian word; used for hash-map keys.
  std::uint64_t prefix64() const {
    std::uint64_t v = 0;
    std::memcpy(&v, data, len < 8 ? len : 8);
    return v;
  }
};

std::string to_hex(const std::uint8_t* p, std::size_t n);
inline std::string to_hex(const CryptoBytes& b) { return to_hex(b.data, b.len); }
inline std::string to_hex(const Bytes& b) { return to_hex(b.data(), b.size()); }

// Canonical serialization: length-prefixed fields, big-endian integers,
// fields in declaration order.
class ByteWriter {
 public:
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u16(std::uint16_t v) {
    out_.push_back(static_cast<std::uint8_t>(v >> 8));
    out_.push_back(static_cast<std::uint8_t>(v));
  }
  void u32(std::uint32_t v) {
    for (int s = 24; s >= 0; s -= 8) out_.push_back(static_cast<std::uint8_t>(v >> s));
  }
  void u64(std::uint64_t v) {
    for (int s = 56; s >= 0; s -= 8) out_.push_back(static_cast<std::uint8_t>(v >> s));
  }
  void raw(const std::uint8_t* p, std::size_t n) { out_.insert(out_.end(), p, p + n); }
  void blob(const std::uint8_t* p, std::size_t n) {
    u32(static_cast<std::uint32_t>(n));
    raw(p, n);
  }
  void blob(const CryptoBytes& b) { blob(b.data, b.len); }
  void blob(const Bytes& b) { blob(b.data(), b.size()); }

  const Bytes& bytes() const { return out_; }
  Bytes take() { return std::move(out_); }

 private:
  Bytes out_;
};

class ByteReader {
 public:
  ByteReader(const std::uint8_t* p, std::size_t n) : p_(p), end_(p + n) {}
  explicit ByteReader(const Bytes& b) : ByteReader(b.data(), b.size()) {}

  bool ok() const { return ok_; }
  bool done() const { return p_ == end_; }

  std::uint8_t u8() {
    if (!need(1)) return 0;
    return *p_++;
  }
  std::uint16_t u16() {
    if (!need(2)) return 0;
    std::uint16_t v = static_cast<std::uint16_t>((p_[0] << 8) | p_[1]);
    p_ += 2;
    return v;
  }
  std::uint32_t u32() {
    if (!need(4)) return 0;
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v = (v << 8) | p_[i];
    p_ += 4;
    return v;
  }
  std::uint64_t u64() {
    if (!need(8)) return 0;
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v = (v << 8) | p_[i];
    p_ += 8;
    return v;
  }
  CryptoBytes crypto_blob() {
    std::uint32_t n = u32();
    if (n > kMaxDigestBytes || !need(n)) {
      ok_ = false;
      return {};
    }
    CryptoBytes b(p_, n);
    p_ += n;
    return b;
  }
  Bytes blob() {
    std::uint32_t n = u32();
    if (!need(n)) return {};
    Bytes b(p_, p_ + n);
    p_ += n;
    return b;
  }

 private:
  bool need(std::size_t n) {
    if (!ok_ || static_cast<std::size_t>(end_ - p_) < n) {
      ok_ = false;
      return false;
    }
    return true;
  }
  const std::uint8_t* p_;
  const std::uint8_t* end_;
  bool ok_ = true;
};

}  // namespace apmbrb
