// Copyright 2026 The apmbrb Authors
// SPDX-License-Identifier: Apache-2.0
#include "apmbrb/bracha.hpp"

namespace apmbrb {

namespace {

std::uint64_t payload_tag(std::uint64_t seed, NodeId node, Round round, std::uint64_t salt) {
  std::uint64_t x = seed ^ (static_cast<std::uint64_t>(node) << 40) ^ (round * 0x9e3779b97f4a7c15ULL) ^ salt;
  x ^= x >> 33;
  x *= 0xff51afd7ed558ccdULL;
  x ^= x >> 29;
  return x;
}

Digest instance_digest(const CryptoProvider& provider, NodeId origin, Round round,
                       const PayloadRef& payload) {
  ByteWriter w;
  w.u16(origin);
  w.u64(round);
  w.u64(payload.tag);
  w.u32(payload.size_bytes);
  return provider.hash(w.bytes());
}

}  // namespace

BrachaNode::BrachaNode(NodeId id, Options opts, std::shared_ptr<const CryptoProvider> provider,
                       const std::uint64_t* clock)
    : id_(id), opts_(opts), provider_(std::move(provider)), clock_(clock) {}

void BrachaNode::broadcast(BrachaMsg m) {
  auto body = std::make_shared<const WireBody>(std::move(m));
  const auto& bm = std::get<BrachaMsg>(*body);
  for (NodeId dst = 1; dst <= opts_.n; ++dst) {
    Envelope env = make_envelope(id_, dst, body, provider_->digest_bytes(), bm.origin, bm.round,
                                 TrafficPurpose::kNone);
    outbox_.push_back(std::move(env));
  }
}

void BrachaNode::broadcast_round(Round round) {
  BrachaMsg m;
  m.phase = BrachaPhase::kSend;
  m.origin = id_;
  m.round = round;
  m.payload = PayloadRef{payload_tag(opts_.payload_seed, id_, round, 0), opts_.payload_bytes};
  own_round_ = round;
  broadcast(std::move(m));
}

void BrachaNode::start() {
  if (opts_.sender_active && opts_.max_round >= 1) broadcast_round(1);
}

void BrachaNode::on_envelope(const Envelope& env) {
  if (!env.body) return;
  if (kind_of(*env.body) != PayloadKind::kBracha) return;
  handle(env.src, std::get<BrachaMsg>(*env.body));
}

void BrachaNode::handle(NodeId src, const BrachaMsg& m) {
  if (m.origin < 1 || m.origin > opts_.n || m.round < 1) return;
  auto& inst = instances_[std::make_pair(m.origin, m.round)];

  switch (m.phase) {
    case BrachaPhase::kSend: {
      if (src != m.origin) return;  // channels are authenticated
      if (inst.echoed) return;
      inst.echoed = true;
      BrachaMsg echo = m;
      echo.phase = BrachaPhase::kEcho;
      broadcast(std::move(echo));
      break;
    }
    case BrachaPhase::kEcho: {
      inst.echoes[m.payload.tag].insert(src);
      maybe_progress(m.origin, m.round, m.payload);
      break;
    }
    case BrachaPhase::kVote: {
      inst.votes[m.payload.tag].insert(src);
      maybe_progress(m.origin, m.round, m.payload);
      break;
    }
  }
}

void BrachaNode::maybe_progress(NodeId origin, Round round, const PayloadRef& payload) {
  auto& inst = instances_[std::make_pair(origin, round)];
  const std::size_t n_minus_f = opts_.n - opts_.f;

  if (!inst.voted) {
    bool echo_quorum = inst.echoes[payload.tag].size() >= n_minus_f;
    bool vote_amplify = inst.votes[payload.tag].size() >= opts_.f + 1;
    if (echo_quorum || vote_amplify) {
      inst.voted = true;
      BrachaMsg vote;
      vote.phase = BrachaPhase::kVote;
      vote.origin = origin;
      vote.round = round;
      vote.payload = payload;
      broadcast(std::move(vote));
    }
  }
  if (!inst.delivered && inst.votes[payload.tag].size() >= n_minus_f) {
    inst.delivered = true;
    inst.delivered_payload = payload;
    inst.delivered_step = clock_ ? *clock_ : 0;
    inst.delivered_order = order_++;
    if (origin == id_ && opts_.sender_active && round == own_round_ && round < opts_.max_round)
      broadcast_round(round + 1);
  }
}

void BrachaNode::drain(std::vector<Envelope>& out) {
  for (auto& e : outbox_) out.push_back(std::move(e));
  outbox_.clear();
}

bool BrachaNode::delivered(NodeId origin, Round round) const {
  auto it = instances_.find(std::make_pair(origin, round));
  return it != instances_.end() && it->second.delivered;
}

void BrachaNode::collect_deliveries(std::vector<DeliveryEvent>& out) const {
  for (const auto& [key, inst] : instances_) {
    if (!inst.delivered) continue;
    DeliveryEvent ev;
    ev.node = id_;
    ev.sender = key.first;
    ev.round = key.second;
    ev.digest = instance_digest(*provider_, key.first, key.second, inst.delivered_payload);
    ev.via = DeliveryVia::kChain;
    ev.trigger_round = key.second;
    ev.step = inst.delivered_step;
    ev.order = inst.delivered_order;
    out.push_back(ev);
  }
}

// --- byzantine baseline behaviors ---------------------------------------

namespace {

// Faulty sender variants share the honest receiver logic by containing a
// receiver-only BrachaNode.
class BrachaByz : public Agent {
 public:
  BrachaByz(FaultKind kind, NodeId id, BrachaNode::Options opts,
            std::shared_ptr<const CryptoProvider> provider, std::vector<NodeId> targets,
            const std::uint64_t* clock)
      : kind_(kind), id_(id), opts_(opts), provider_(std::move(provider)),
        targets_(std::move(targets)) {
    BrachaNode::Options inner = opts_;
    inner.sender_active = false;
    inner_ = std::make_unique<BrachaNode>(id_, inner, provider_, clock);
  }

  NodeId id() const override { return id_; }

  void start() override {
    if (kind_ != FaultKind::kSilent) send_round(1);
  }

  void on_envelope(const Envelope& env) override {
    if (kind_ == FaultKind::kSilent) return;
    inner_->on_envelope(env);
    // pace own rounds off the rest of the system
    if (env.body && kind_of(*env.body) == PayloadKind::kBracha) {
      const auto& m = std::get<BrachaMsg>(*env.body);
      if (m.phase == BrachaPhase::kSend && m.origin != id_ && m.round > own_round_ &&
          m.round <= opts_.max_round)
        send_round(m.round);
    }
  }

  void drain(std::vector<Envelope>& out) override {
    if (kind_ == FaultKind::kSilent) return;
    inner_->drain(out);
    for (auto& e : outbox_) out.push_back(std::move(e));
    outbox_.clear();
  }

  void collect_deliveries(std::vector<DeliveryEvent>& out) const override { (void)out; }

 private:
  void send_round(Round round) {
    own_round_ = round;
    switch (kind_) {
      case FaultKind::kEquivocator: {
        BrachaMsg a{BrachaPhase::kSend, id_, round,
                    PayloadRef{payload_tag(opts_.payload_seed, id_, round, 0xA), opts_.payload_bytes}};
        BrachaMsg b{BrachaPhase::kSend, id_, round,
                    PayloadRef{payload_tag(opts_.payload_seed, id_, round, 0xB), opts_.payload_bytes}};
        auto ba = std::make_shared<const WireBody>(a);
        auto bb = std::make_shared<const WireBody>(b);
        for (NodeId dst = 1; dst <= opts_.n; ++dst) {
          auto body = (dst % 2 == 0) ? ba : bb;
          outbox_.push_back(make_envelope(id_, dst, body, provider_->digest_bytes(), id_, round,
                                          TrafficPurpose::kNone));
        }
        break;
      }
      case FaultKind::kSelective: {
        BrachaMsg m{BrachaPhase::kSend, id_, round,
                    PayloadRef{payload_tag(opts_.payload_seed, id_, round, 0), opts_.payload_bytes}};
        auto body = std::make_shared<const WireBody>(m);
        for (NodeId dst : targets_) {
          if (dst >= 1 && dst <= opts_.n)
            outbox_.push_back(make_envelope(id_, dst, body, provider_->digest_bytes(), id_, round,
                                            TrafficPurpose::kNone));
        }
        break;
      }
      case FaultKind::kGarbageCerts: {
        // malformed origin claims; receivers must drop them
        BrachaMsg m{BrachaPhase::kVote, id_, round,
                    PayloadRef{payload_tag(opts_.payload_seed, id_, round, 0xBAD), opts_.payload_bytes}};
        auto body = std::make_shared<const WireBody>(m);
        for (NodeId dst = 1; dst <= opts_.n; ++dst)
          outbox_.push_back(make_envelope(id_, dst, body, provider_->digest_bytes(), id_, round,
                                          TrafficPurpose::kNone));
        break;
      }
      default:
        break;
    }
  }

  FaultKind kind_;
  NodeId id_;
  BrachaNode::Options opts_;
  std::shared_ptr<const CryptoProvider> provider_;
  std::vector<NodeId> targets_;
  std::unique_ptr<BrachaNode> inner_;
  std::vector<Envelope> outbox_;
  Round own_round_ = 0;
};

}  // namespace

std::unique_ptr<Agent> make_bracha_byzantine(FaultKind kind, NodeId id, BrachaNode::Options opts,
                                             std::shared_ptr<const CryptoProvider> provider,
                                             const std::vector<NodeId>& selective_targets,
                                             const std::uint64_t* clock) {
  return std::make_unique<BrachaByz>(kind, id, opts, std::move(provider), selective_targets,
                                     clock);
}

}  // namespace apmbrb
