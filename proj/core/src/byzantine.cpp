// Copyright 2026 The apmbrb Authors
// SPDX-License-Identifier: Apache-2.0
#include "apmbrb/byzantine.hpp"

#include <algorithm>

namespace apmbrb {

namespace {

std::uint64_t salt_tag(std::uint64_t seed, NodeId node, Round round, std::uint64_t salt) {
  std::uint64_t x =
      seed ^ (static_cast<std::uint64_t>(node) << 40) ^ (round * 0x9e3779b97f4a7c15ULL) ^ salt;
  x ^= x >> 33;
  x *= 0xff51afd7ed558ccdULL;
  x ^= x >> 29;
  return x;
}

class SilentAgent : public Agent {
 public:
  explicit SilentAgent(NodeId id) : id_(id) {}
  NodeId id() const override { return id_; }
  void start() override {}
  void on_envelope(const Envelope&) override {}
  void drain(std::vector<Envelope>&) override {}

 private:
  NodeId id_;
};

// Shared scaffolding: a receiver-only honest node handles member duties; the
// concrete behavior overrides the node's own sending.
class ByzBase : public Agent {
 public:
  ByzBase(NodeId id, ProtocolOptions opts, std::shared_ptr<const CryptoProvider> provider,
          const std::uint64_t* clock)
      : id_(id), opts_(std::move(opts)), provider_(std::move(provider)), clock_(clock) {
    ProtocolOptions inner = opts_;
    inner.sender_active = false;
    inner.disable_equivocation_guard = false;
    inner_ = std::make_unique<Node>(id_, inner, provider_, &own_violations_, clock_);
  }

  NodeId id() const override { return id_; }

  void drain(std::vector<Envelope>& out) override {
    inner_->drain(out);
    for (auto& e : outbox_) out.push_back(std::move(e));
    outbox_.clear();
  }

 protected:
  void send(NodeId dst, WireBody body, NodeId attr_s, Round attr_r) {
    outbox_.push_back(make_envelope(id_, dst, std::make_shared<const WireBody>(std::move(body)),
                                    provider_->digest_bytes(), attr_s, attr_r,
                                    TrafficPurpose::kNone));
  }
  void send_shared(const std::vector<NodeId>& dsts, WireBody body, NodeId attr_s, Round attr_r) {
    auto shared = std::make_shared<const WireBody>(std::move(body));
    for (NodeId dst : dsts)
      outbox_.push_back(make_envelope(id_, dst, shared, provider_->digest_bytes(), attr_s, attr_r,
                                      TrafficPurpose::kNone));
  }

  NodeId id_;
  ProtocolOptions opts_;
  std::shared_ptr<const CryptoProvider> provider_;
  const std::uint64_t* clock_;
  std::unique_ptr<Node> inner_;
  std::vector<Envelope> outbox_;
  std::vector<Violation> own_violations_;  // never reported
};

// Two conflicting chains per round, each half of the committee seeing one.
// As a committee member for other senders the node behaves honestly, so it
// still signs at most one message per (sender, round); only its own streams
// are double-signed.
class EquivocatorAgent : public ByzBase {
 public:
  using ByzBase::ByzBase;

  void start() override {
    if (opts_.max_round < 1) return;
    extend_chain(chain_a_, 0xA);
    extend_chain(chain_b_, 0xB);
  }

  void on_envelope(const Envelope& env) override {
    if (env.body && kind_of(*env.body) == PayloadKind::kChainQuery) {
      const auto& q = std::get<ChainQuery>(*env.body);
      if (q.chain_sender == id_) {
        serve(env.src, q);
        return;
      }
    }
    inner_->on_envelope(env);
    try_extend();
  }

 private:
  void try_extend() {
    if (extend_chain(chain_a_, 0xA)) {}
    if (extend_chain(chain_b_, 0xB)) {}
  }

  // Grows one chain when its previous round is certified and a 2f+1 prev
  // quorum is available from the member node's memory.
  bool extend_chain(std::vector<BroadcastMessage>& chain, std::uint64_t salt) {
    Round next = chain.size() + 1;
    if (next > opts_.max_round) return false;

    BroadcastMessage m;
    m.payload = PayloadRef{salt_tag(opts_.payload_seed, id_, next, salt), opts_.payload_bytes};
    m.sender = id_;
    m.round = next;
    m.triggers.assign(opts_.params.n, std::nullopt);
    if (next > 1) {
      const BroadcastMessage& prev = chain[next - 2];
      const Certificate* cert = inner_->certificate_for(id_, next - 1, prev.digest);
      if (!cert) return false;
      auto prev_set = inner_->quorum_prev_certs(next - 1);
      if (!prev_set) return false;
      m.prev_cert = *cert;
      m.prev = std::move(*prev_set);
    }
    m.digest = message_digest(m, *provider_);
    m.sender_sig = provider_->sign_share(id_, m.digest).share_bytes;
    chain.push_back(m);

    const Committee& committee = inner_->committee_for(id_, next);
    std::vector<NodeId> members = committee.sorted;
    std::size_t half = (members.size() + 1) / 2;
    std::vector<NodeId> first(members.begin(), members.begin() + half);
    std::vector<NodeId> second(members.begin() + half, members.end());
    send_shared(salt == 0xA ? first : second, m, id_, next);

    // Double-sign own streams when on the committee.
    if (committee.contains(id_)) {
      ShareMsg sm;
      sm.origin_sender = id_;
      sm.round = next;
      sm.share = provider_->sign_share(id_, m.digest);
      std::vector<NodeId> everyone;
      for (NodeId j = 1; j <= opts_.params.n; ++j) everyone.push_back(j);
      send_shared(everyone, sm, id_, next);
    }
    return true;
  }

  void serve(NodeId from, const ChainQuery& q) {
    const BroadcastMessage* m = nullptr;
    for (const auto* chain : {&chain_a_, &chain_b_}) {
      if (q.round >= 1 && q.round <= chain->size()) {
        const BroadcastMessage& cand = (*chain)[q.round - 1];
        if (!q.want || cand.digest == *q.want) {
          m = &cand;
          break;
        }
      }
    }
    if (!m) return;
    ChainResponse resp;
    resp.chain_sender = id_;
    resp.round = q.round;
    resp.msg = *m;
    if (q.want_standalone_cert) {
      const Certificate* cert = inner_->certificate_for(id_, q.round, m->digest);
      if (!cert) return;  // withhold until certified
      resp.standalone_cert = *cert;
    }
    resp.attr_sender = q.attr_sender;
    resp.attr_round = q.attr_round;
    resp.purpose = q.purpose;
    resp.query_id = q.query_id;
    send(from, std::move(resp), q.attr_sender, q.attr_round);
  }

  std::vector<BroadcastMessage> chain_a_;
  std::vector<BroadcastMessage> chain_b_;
};

// Sends well-signed messages whose certificates are garbage, plus junk
// shares and certificate pushes. All of it must be dropped on verification.
class GarbageAgent : public ByzBase {
 public:
  using ByzBase::ByzBase;

  void start() override { emit_round(1); }

  void on_envelope(const Envelope& env) override {
    inner_->on_envelope(env);
    if (env.body && kind_of(*env.body) == PayloadKind::kBroadcast) {
      const auto& m = std::get<BroadcastMessage>(*env.body);
      if (m.sender != id_ && m.round > last_round_ && m.round <= opts_.max_round)
        emit_round(m.round);
    }
  }

 private:
  Certificate junk_cert(NodeId sender, Round round, std::uint64_t salt) {
    Certificate c;
    ByteWriter w;
    w.u64(salt);
    w.u64(round);
    c.message_digest = provider_->hash(w.bytes());
    c.tag = CommitteeTag{sender, round};
    const Committee& committee = inner_->committee_for(sender, round);
    std::size_t need = opts_.params.cert_threshold();
    for (NodeId member : committee.sorted) {
      if (c.shares.size() == need) break;
      CryptoBytes fake;
      fake.len = static_cast<std::uint8_t>(provider_->digest_bytes());
      for (std::size_t i = 0; i < fake.len; ++i)
        fake.data[i] = static_cast<std::uint8_t>(salt + member + i);
      c.shares.emplace_back(member, fake);
    }
    std::sort(c.shares.begin(), c.shares.end());
    return c;
  }

  void emit_round(Round round) {
    last_round_ = round;
    BroadcastMessage m;
    m.payload = PayloadRef{salt_tag(opts_.payload_seed, id_, round, 0xBAD), opts_.payload_bytes};
    m.sender = id_;
    m.round = round;
    m.triggers.assign(opts_.params.n, std::nullopt);
    if (round > 1) {
      m.prev_cert = junk_cert(id_, round - 1, 0x11);
      for (std::size_t j = 0; j < opts_.params.quorum(); ++j)
        m.prev.push_back(junk_cert(static_cast<NodeId>(j + 1), round - 1, 0x22 + j));
    }
    m.digest = message_digest(m, *provider_);
    m.sender_sig = provider_->sign_share(id_, m.digest).share_bytes;
    const Committee& committee = inner_->committee_for(id_, round);
    send_shared(committee.members, m, id_, round);

    // invalid share for an arbitrary peer's stream
    NodeId victim = static_cast<NodeId>((round % opts_.params.n) + 1);
    ShareMsg sm;
    sm.origin_sender = victim;
    sm.round = round;
    sm.share.signer = id_;
    sm.share.message_digest = m.digest;
    sm.share.share_bytes = m.sender_sig;  // wrong preimage: never verifies
    std::vector<NodeId> everyone;
    for (NodeId j = 1; j <= opts_.params.n; ++j) everyone.push_back(j);
    send_shared(everyone, sm, victim, round);

    send_shared(everyone, CertPush{junk_cert(victim, round, 0x33)}, victim, round);
  }

  Round last_round_ = 0;
};

// Honest protocol stack whose own broadcasts only reach a chosen subset.
class SelectiveAgent : public Agent {
 public:
  SelectiveAgent(NodeId id, ProtocolOptions opts, std::shared_ptr<const CryptoProvider> provider,
                 std::vector<NodeId> targets, const std::uint64_t* clock)
      : id_(id), targets_(std::move(targets)) {
    node_ = std::make_unique<Node>(id_, std::move(opts), std::move(provider), &own_violations_,
                                   clock);
  }

  NodeId id() const override { return id_; }
  void start() override { node_->start(); }
  void on_envelope(const Envelope& env) override { node_->on_envelope(env); }

  void drain(std::vector<Envelope>& out) override {
    staging_.clear();
    node_->drain(staging_);
    for (auto& e : staging_) {
      bool own_broadcast = e.body && kind_of(*e.body) == PayloadKind::kBroadcast &&
                           std::get<BroadcastMessage>(*e.body).sender == id_;
      if (own_broadcast &&
          std::find(targets_.begin(), targets_.end(), e.dst) == targets_.end())
        continue;  // withheld
      out.push_back(std::move(e));
    }
    staging_.clear();
  }

 private:
  NodeId id_;
  std::vector<NodeId> targets_;
  std::unique_ptr<Node> node_;
  std::vector<Envelope> staging_;
  std::vector<Violation> own_violations_;
};

}  // namespace

std::unique_ptr<Agent> make_apm_byzantine(FaultKind kind, NodeId id, ProtocolOptions opts,
                                          std::shared_ptr<const CryptoProvider> provider,
                                          const std::vector<NodeId>& selective_targets,
                                          const std::uint64_t* clock) {
  switch (kind) {
    case FaultKind::kSilent:
      return std::make_unique<SilentAgent>(id);
    case FaultKind::kEquivocator:
      return std::make_unique<EquivocatorAgent>(id, std::move(opts), std::move(provider), clock);
    case FaultKind::kGarbageCerts:
      return std::make_unique<GarbageAgent>(id, std::move(opts), std::move(provider), clock);
    case FaultKind::kSelective:
      return std::make_unique<SelectiveAgent>(id, std::move(opts), std::move(provider),
                                              selective_targets, clock);
    case FaultKind::kNone:
      break;
  }
  return std::make_unique<SilentAgent>(id);
}

}  // namespace apmbrb
