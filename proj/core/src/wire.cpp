// Copyright 2026 The apmbrb Authors
// SPDX-License-Identifier: Apache-2.0
#include "apmbrb/wire.hpp"

namespace apmbrb {

PayloadKind kind_of(const WireBody& body) {
  struct Visitor {
    PayloadKind operator()(const BroadcastMessage&) const { return PayloadKind::kBroadcast; }
    PayloadKind operator()(const ShareMsg&) const { return PayloadKind::kShare; }
    PayloadKind operator()(const ChainQuery&) const { return PayloadKind::kChainQuery; }
    PayloadKind operator()(const ChainResponse&) const { return PayloadKind::kChainResponse; }
    PayloadKind operator()(const CertPush&) const { return PayloadKind::kCertPush; }
    PayloadKind operator()(const BrachaMsg&) const { return PayloadKind::kBracha; }
  };
  return std::visit(Visitor{}, body);
}

const char* kind_name(PayloadKind k) {
  switch (k) {
    case PayloadKind::kBroadcast: return "broadcast-message";
    case PayloadKind::kShare: return "share";
    case PayloadKind::kChainQuery: return "chain-query";
    case PayloadKind::kChainResponse: return "chain-response";
    case PayloadKind::kCertPush: return "cert-push";
    case PayloadKind::kBracha: return "bracha";
  }
  return "?";
}

namespace {

void write_cert(ByteWriter& w, const Certificate& c) {
  w.blob(c.message_digest.bytes);
  w.u16(c.tag.sender);
  w.u64(c.tag.round);
  w.u16(static_cast<std::uint16_t>(c.shares.size()));
  for (const auto& [signer, bytes] : c.shares) {
    w.u16(signer);
    w.blob(bytes);
  }
}

std::optional<Certificate> read_cert(ByteReader& r) {
  Certificate c;
  c.message_digest.bytes = r.crypto_blob();
  c.tag.sender = r.u16();
  c.tag.round = r.u64();
  std::uint16_t count = r.u16();
  c.shares.reserve(count);
  NodeId prev = 0;
  for (std::uint16_t i = 0; i < count; ++i) {
    NodeId signer = r.u16();
    CryptoBytes bytes = r.crypto_blob();
    if (!r.ok() || signer <= prev) return std::nullopt;
    prev = signer;
    c.shares.emplace_back(signer, bytes);
  }
  if (!r.ok()) return std::nullopt;
  return c;
}

// Everything except the trailing signature, in the full wire representation.
void write_core(ByteWriter& w, const BroadcastMessage& m) {
  w.u16(m.sender);
  w.u64(m.round);
  w.u64(m.payload.tag);
  w.u32(m.payload.size_bytes);
  w.u8(m.prev_cert.has_value() ? 1 : 0);
  if (m.prev_cert) write_cert(w, *m.prev_cert);
  w.u16(static_cast<std::uint16_t>(m.prev.size()));
  for (const auto& c : m.prev) write_cert(w, c);
  w.u16(static_cast<std::uint16_t>(m.triggers.size()));
  for (const auto& t : m.triggers) {
    w.u8(t.has_value() ? 1 : 0);
    if (t) write_cert(w, *t);
  }
}

// A certificate's identity is what it certifies, not which share subset
// formed it; the content digest therefore hashes (digest, tag) only. Two
// aggregations of the same statement yield the same logical message.
void write_cert_statement(ByteWriter& w, const Certificate& c) {
  w.blob(c.message_digest.bytes);
  w.u16(c.tag.sender);
  w.u64(c.tag.round);
}

void write_digest_input(ByteWriter& w, const BroadcastMessage& m) {
  w.u16(m.sender);
  w.u64(m.round);
  w.u64(m.payload.tag);
  w.u32(m.payload.size_bytes);
  w.u8(m.prev_cert.has_value() ? 1 : 0);
  if (m.prev_cert) write_cert_statement(w, *m.prev_cert);
  w.u16(static_cast<std::uint16_t>(m.prev.size()));
  for (const auto& c : m.prev) write_cert_statement(w, c);
  w.u16(static_cast<std::uint16_t>(m.triggers.size()));
  for (const auto& t : m.triggers) {
    w.u8(t.has_value() ? 1 : 0);
    if (t) write_cert_statement(w, *t);
  }
}

}  // namespace

Digest message_digest(const BroadcastMessage& m, const CryptoProvider& provider) {
  ByteWriter w;
  write_digest_input(w, m);
  return provider.hash(w.bytes());
}

Bytes encode_message(const BroadcastMessage& m) {
  ByteWriter w;
  write_core(w, m);
  w.blob(m.sender_sig);
  return w.take();
}

std::optional<BroadcastMessage> decode_message(const Bytes& in, const CryptoProvider& provider) {
  ByteReader r(in);
  BroadcastMessage m;
  m.sender = r.u16();
  m.round = r.u64();
  m.payload.tag = r.u64();
  m.payload.size_bytes = r.u32();
  if (r.u8()) {
    auto c = read_cert(r);
    if (!c) return std::nullopt;
    m.prev_cert = std::move(*c);
  }
  std::uint16_t prev_count = r.u16();
  for (std::uint16_t i = 0; i < prev_count && r.ok(); ++i) {
    auto c = read_cert(r);
    if (!c) return std::nullopt;
    m.prev.push_back(std::move(*c));
  }
  std::uint16_t trig_count = r.u16();
  for (std::uint16_t i = 0; i < trig_count && r.ok(); ++i) {
    if (r.u8()) {
      auto c = read_cert(r);
      if (!c) return std::nullopt;
      m.triggers.emplace_back(std::move(*c));
    } else {
      m.triggers.emplace_back(std::nullopt);
    }
  }
  m.sender_sig = r.crypto_blob();
  if (!r.ok() || !r.done()) return std::nullopt;
  m.digest = message_digest(m, provider);
  return m;
}

std::uint64_t accounted_message_bytes(const BroadcastMessage& m, std::size_t k) {
  std::uint64_t bytes = kMessageHeaderBytes + m.payload.size_bytes + k;  // header, payload, sig
  if (m.prev_cert) bytes += k;
  bytes += m.prev.size() * (2 + k);
  bytes += m.triggers.size();  // presence byte per slot
  for (const auto& t : m.triggers)
    if (t) bytes += 8 + k;
  return bytes;
}

std::uint64_t worst_case_message_bytes(std::uint32_t n, std::uint32_t f, std::size_t k,
                                       std::uint64_t payload_bytes) {
  return kMessageHeaderBytes + payload_bytes + k + k + (2ull * f + 1) * (2 + k) + n +
         static_cast<std::uint64_t>(n) * (8 + k);
}

std::uint64_t accounted_body_bytes(const WireBody& body, std::size_t k) {
  struct Visitor {
    std::size_t k;
    std::uint64_t operator()(const BroadcastMessage& m) const {
      return accounted_message_bytes(m, k);
    }
    std::uint64_t operator()(const ShareMsg&) const { return kShareHeaderBytes + k; }
    std::uint64_t operator()(const ChainQuery& q) const {
      return kQueryHeaderBytes + (q.want ? k : 0);
    }
    std::uint64_t operator()(const ChainResponse& r) const {
      return kResponseHeaderBytes + accounted_message_bytes(r.msg, k) +
             (r.standalone_cert ? k : 0);
    }
    std::uint64_t operator()(const CertPush&) const { return kCertPushHeaderBytes + k; }
    std::uint64_t operator()(const BrachaMsg& b) const {
      return kBrachaHeaderBytes + b.payload.size_bytes;
    }
  };
  return std::visit(Visitor{k}, body);
}

std::uint64_t payload_bytes_of(const WireBody& body) {
  struct Visitor {
    std::uint64_t operator()(const BroadcastMessage& m) const { return m.payload.size_bytes; }
    std::uint64_t operator()(const ShareMsg&) const { return 0; }
    std::uint64_t operator()(const ChainQuery&) const { return 0; }
    std::uint64_t operator()(const ChainResponse& r) const { return r.msg.payload.size_bytes; }
    std::uint64_t operator()(const CertPush&) const { return 0; }
    std::uint64_t operator()(const BrachaMsg& b) const { return b.payload.size_bytes; }
  };
  return std::visit(Visitor{}, body);
}

}  // namespace apmbrb
