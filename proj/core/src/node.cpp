// Copyright 2026 The apmbrb Authors
// SPDX-License-Identifier: Apache-2.0
#include "apmbrb/node.hpp"

#include <algorithm>
#include <cassert>
#include <sstream>

namespace apmbrb {

namespace {

std::uint64_t mix_tag(std::uint64_t a, std::uint64_t b) {
  std::uint64_t x = a ^ (b + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2));
  x ^= x >> 33;
  x *= 0xff51afd7ed558ccdULL;
  x ^= x >> 33;
  return x;
}

}  // namespace

Node::Node(NodeId id, ProtocolOptions opts, std::shared_ptr<const CryptoProvider> provider,
           std::vector<Violation>* violations, const std::uint64_t* clock)
    : id_(id),
      opts_(std::move(opts)),
      provider_(std::move(provider)),
      violations_(violations),
      clock_(clock) {
  const auto n = opts_.params.n;
  senders_.resize(n);
  triggers_.resize(n);
  all_nodes_.reserve(n);
  for (NodeId j = 1; j <= n; ++j) all_nodes_.push_back(j);
}

const Committee& Node::committee_for(NodeId sender, Round round) {
  auto key = std::make_pair(sender, round);
  auto it = committee_cache_.find(key);
  if (it == committee_cache_.end()) {
    it = committee_cache_
             .emplace(key, sample_committee(*provider_, opts_.seed0, sender, round, opts_.params))
             .first;
  }
  return it->second;
}

// --- helpers -----------------------------------------------------------

PayloadRef Node::make_payload(Round round) const {
  PayloadRef p;
  p.tag = mix_tag(opts_.payload_seed ^ (static_cast<std::uint64_t>(id_) << 40), round);
  p.size_bytes = opts_.payload_bytes;
  return p;
}

void Node::violation(const std::string& kind, const std::string& detail) {
  if (violations_) violations_->push_back(Violation{id_, kind, detail});
}

std::uint64_t Node::cert_fingerprint(const Certificate& cert) const {
  ByteWriter w;
  w.u16(cert.tag.sender);
  w.u64(cert.tag.round);
  w.blob(cert.message_digest.bytes);
  w.u16(static_cast<std::uint16_t>(cert.shares.size()));
  for (const auto& [signer, bytes] : cert.shares) {
    w.u16(signer);
    w.blob(bytes);
  }
  return provider_->hash(w.bytes()).bytes.prefix64();
}

bool Node::cert_valid(const Certificate& cert) {
  std::uint64_t fp = cert_fingerprint(cert);
  if (verified_certs_.count(fp)) return true;
  if (cert.tag.sender < 1 || cert.tag.sender > opts_.params.n || cert.tag.round < 1) return false;
  const Committee& c = committee_for(cert.tag.sender, cert.tag.round);
  if (!provider_->verify_cert(cert, cert.message_digest, c, opts_.params.cert_threshold()))
    return false;
  verified_certs_.insert(fp);
  return true;
}

bool Node::verify_sender_sig(const BroadcastMessage& m) const {
  SignatureShare s;
  s.signer = m.sender;
  s.message_digest = m.digest;
  s.share_bytes = m.sender_sig;
  return provider_->verify_share(s);
}

bool Node::shape_ok(const BroadcastMessage& m) const {
  const auto n = opts_.params.n;
  if (m.sender < 1 || m.sender > n || m.round < 1) return false;
  if (m.triggers.size() != n) return false;
  for (std::size_t j = 0; j < m.triggers.size(); ++j) {
    if (m.triggers[j] && m.triggers[j]->tag.sender != static_cast<NodeId>(j + 1)) return false;
  }
  if (m.round == 1) {
    if (m.prev_cert || !m.prev.empty()) return false;
    return true;
  }
  if (!m.prev_cert) return false;
  if (m.prev_cert->tag.sender != m.sender || m.prev_cert->tag.round != m.round - 1) return false;
  if (m.prev.size() != opts_.params.quorum()) return false;
  std::set<NodeId> prev_senders;
  for (const auto& c : m.prev) {
    if (c.tag.round != m.round - 1) return false;
    if (!prev_senders.insert(c.tag.sender).second) return false;
  }
  return true;
}

void Node::emit(NodeId dst, WireBody body, NodeId attr_s, Round attr_r, TrafficPurpose purpose) {
  Envelope env;
  env.src = id_;
  env.dst = dst;
  env.payload_bits = 8 * payload_bytes_of(body);
  env.accounted_bits =
      8 * (kEnvelopeFrameBytes + accounted_body_bytes(body, provider_->digest_bytes()));
  env.attr_sender = attr_s;
  env.attr_round = attr_r;
  env.purpose = purpose;
  env.body = std::make_shared<const WireBody>(std::move(body));
  outbox_.push_back(std::move(env));
}

void Node::emit_shared(const std::vector<NodeId>& dsts, WireBody body, NodeId attr_s, Round attr_r,
                       TrafficPurpose purpose) {
  auto shared = std::make_shared<const WireBody>(std::move(body));
  std::uint64_t payload_bits = 8 * payload_bytes_of(*shared);
  std::uint64_t bits =
      8 * (kEnvelopeFrameBytes + accounted_body_bytes(*shared, provider_->digest_bytes()));
  for (NodeId dst : dsts) {
    Envelope env;
    env.src = id_;
    env.dst = dst;
    env.body = shared;
    env.accounted_bits = bits;
    env.payload_bits = payload_bits;
    env.attr_sender = attr_s;
    env.attr_round = attr_r;
    env.purpose = purpose;
    outbox_.push_back(std::move(env));
  }
}

void Node::drain(std::vector<Envelope>& out) {
  for (auto& e : outbox_) out.push_back(std::move(e));
  outbox_.clear();
}

// --- promises / cache ---------------------------------------------------

Round Node::promises_length(NodeId sender) const {
  return senders_[sender - 1].promises.size();
}

const BroadcastMessage* Node::promise_at(NodeId sender, Round round) const {
  const auto& p = senders_[sender - 1].promises;
  if (round < 1 || round > p.size()) return nullptr;
  return &p[round - 1];
}

bool Node::write_promise(NodeId sender, const BroadcastMessage& msg) {
  auto& st = senders_[sender - 1];
  Round y = msg.round;
  if (y <= st.promises.size()) {
    // Entries are immutable once written; a conflicting candidate is refused.
    return st.promises[y - 1].digest == msg.digest;
  }
  if (y != st.promises.size() + 1) return false;  // promises stay consecutive
  st.promises.push_back(msg);
  on_promise_written(sender, y);
  return true;
}

void Node::cache_insert(NodeId sender, Round round, const BroadcastMessage& msg) {
  auto key = std::make_tuple(sender, round, msg.digest);
  if (chain_cache_.count(key)) return;
  chain_cache_.emplace(key, msg);
  serve_unserved(sender, round);
  for (std::size_t i = 0; i < walks_.size(); ++i) {  // advancing may append walks
    WalkTask* w = walks_[i].get();
    if (!w->done && w->sender == sender && w->v == round && w->cert.message_digest == msg.digest)
      advance_walk(*w);
  }
  auto oit = optimistic_.find(round);
  if (oit != optimistic_.end() && oit->second.collecting && !oit->second.fired)
    check_optimistic(round);
}

const BroadcastMessage* Node::find_chain_message(NodeId sender, Round round,
                                                 const Digest& digest) const {
  const BroadcastMessage* p = promise_at(sender, round);
  if (p && p->digest == digest) return p;
  auto it = chain_cache_.find(std::make_tuple(sender, round, digest));
  if (it != chain_cache_.end()) return &it->second;
  return nullptr;
}

void Node::on_promise_written(NodeId sender, Round round) {
  serve_unserved(sender, round);

  auto dit = fetch_drivers_.find(sender);
  if (dit != fetch_drivers_.end()) advance_fetch(dit->second);

  auto pit = pending_accepts_.find(std::make_pair(sender, round + 1));
  if (pit != pending_accepts_.end()) {
    BroadcastMessage m = std::move(pit->second.msg);
    pending_accepts_.erase(pit);
    try_accept(m);
  }

  for (std::size_t i = 0; i < walks_.size(); ++i) {
    WalkTask* w = walks_[i].get();
    if (!w->done && w->sender == sender && w->v == round) advance_walk(*w);
  }

  auto oit = optimistic_.find(round);
  if (oit != optimistic_.end() && oit->second.collecting && !oit->second.fired)
    check_optimistic(round);

  if (building_ != 0 && round >= building_ - 1) on_req_progress(sender);
}

// --- certificates -------------------------------------------------------

const Certificate* Node::certificate_for(NodeId sender, Round round, const Digest& digest) const {
  const auto& certs = senders_[sender - 1].certs;
  auto it = certs.find(round);
  if (it == certs.end()) return nullptr;
  for (const auto& c : it->second)
    if (c.message_digest == digest) return &c;
  return nullptr;
}

bool Node::has_certificate(NodeId sender, Round round) const {
  const auto& certs = senders_[sender - 1].certs;
  auto it = certs.find(round);
  return it != certs.end() && !it->second.empty();
}

void Node::learn_certificate(const Certificate& cert, bool trusted) {
  if (trusted) {
    verified_certs_.insert(cert_fingerprint(cert));
  } else if (!cert_valid(cert)) {
    return;
  }
  auto& st = senders_[cert.tag.sender - 1];
  auto& list = st.certs[cert.tag.round];
  for (const auto& c : list)
    if (c.message_digest == cert.message_digest) {
      enqueue_process(cert.tag.sender, cert.tag.round, cert);
      return;
    }
  list.push_back(cert);
  on_cert_learned(cert.tag.sender, cert.tag.round, cert.message_digest);
  enqueue_process(cert.tag.sender, cert.tag.round, cert);
}

void Node::on_cert_learned(NodeId sender, Round round, const Digest& digest) {
  auto& opt = optimistic_[round];
  if (!opt.certified.count(sender)) {
    opt.certified[sender] = digest;
    if (!opt.fired) check_optimistic(round);
  }

  auto dit = fetch_drivers_.find(sender);
  if (dit != fetch_drivers_.end()) advance_fetch(dit->second);

  serve_unserved(sender, round);

  if (building_ != 0 && round == building_ - 1) on_req_progress(sender);
  if (sender == id_) maybe_start_build();
}

void Node::enqueue_process(NodeId sender, Round round, const Certificate& cert) {
  if (processed_certs_.count(std::make_tuple(sender, round, cert.message_digest))) return;
  work_.emplace_back(sender, round, cert);
}

void Node::drain_work() {
  if (in_drain_) return;
  in_drain_ = true;
  while (!work_.empty()) {
    auto [sender, round, cert] = std::move(work_.front());
    work_.pop_front();
    process_certificate(sender, round, cert);
  }
  in_drain_ = false;
}

void Node::process_certificate(NodeId sender, Round round, const Certificate& cert) {
  auto key = std::make_tuple(sender, round, cert.message_digest);
  if (processed_certs_.count(key)) return;
  if (cert.tag.sender != sender || cert.tag.round != round) return;
  if (!cert_valid(cert)) return;  // embedded garbage is skipped silently
  processed_certs_.insert(key);

  // Record it (no-op if already known).
  {
    auto& list = senders_[sender - 1].certs[round];
    bool known = false;
    for (const auto& c : list)
      if (c.message_digest == cert.message_digest) known = true;
    if (!known) {
      list.push_back(cert);
      on_cert_learned(sender, round, cert.message_digest);
    }
  }

  const Round phi = opts_.params.phi;
  if (round < phi) return;  // recorded only

  auto& trig = triggers_[sender - 1];
  if (!trig || trig->tag.round < round) trig = cert;

  if (walked_.count(key)) return;
  Round deliver_from = round - phi;
  if (deliver_from < 1 || deliver_from <= senders_[sender - 1].delivered_prefix) return;
  walked_.insert(key);
  start_walk(sender, round, cert, deliver_from, DeliveryVia::kChain, round);
}

// --- walks --------------------------------------------------------------

void Node::start_walk(NodeId sender, Round anchor, const Certificate& cert, Round deliver_from,
                      DeliveryVia via, Round latency_ref, bool collect_only) {
  if (!collect_only && deliver_from >= 1 &&
      deliver_from <= senders_[sender - 1].delivered_prefix)
    return;  // nothing new below the delivered prefix
  auto walk = std::make_unique<WalkTask>();
  walk->sender = sender;
  walk->anchor_round = anchor;
  walk->cert = cert;
  walk->v = anchor;
  walk->deliver_from = deliver_from;
  walk->via = via;
  walk->latency_ref = latency_ref;
  walk->collect_only = collect_only;
  walks_.push_back(std::move(walk));
  advance_walk(*walks_.back());
}

void Node::advance_walk(WalkTask& walk) {
  if (walk.done || walk.advancing) return;
  walk.advancing = true;
  struct Unguard {
    WalkTask& w;
    ~Unguard() { w.advancing = false; }
  } unguard{walk};
  auto& st = senders_[walk.sender - 1];
  while (true) {
    if (walk.v < 1) break;
    // Chain below an identical delivery is already delivered.
    auto dit = st.delivered.find(walk.v);
    if (dit != st.delivered.end() && dit->second.digest == walk.cert.message_digest &&
        walk.v <= walk.deliver_from)
      break;

    const BroadcastMessage* m =
        find_chain_message(walk.sender, walk.v, walk.cert.message_digest);
    if (!m) {
      if (walk.query == 0) {
        TrafficPurpose purpose = walk.via == DeliveryVia::kChain ? TrafficPurpose::kWalk
                                 : walk.via == DeliveryVia::kOptimistic
                                     ? TrafficPurpose::kCollect
                                     : TrafficPurpose::kTotality;
        walk.query = issue_query(walk.sender, walk.v, walk.cert.message_digest, false, false,
                                 purpose, walk.sender, walk.v);
      }
      return;  // parked until a matching message arrives
    }
    if (walk.query != 0) {
      cancel_query(walk.query);
      walk.query = 0;
    }

    if (walk.v <= walk.deliver_from) deliver(walk.sender, walk.v, *m, walk.via, walk.latency_ref);
    if (walk.v == 1) break;
    if (!m->prev_cert || !cert_valid(*m->prev_cert)) break;  // unverifiable tail
    walk.cert = *m->prev_cert;
    walk.v -= 1;
  }
  walk.done = true;
  if (walk.query != 0) {
    cancel_query(walk.query);
    walk.query = 0;
  }
}

void Node::deliver(NodeId sender, Round round, const BroadcastMessage& msg, DeliveryVia via,
                   Round latency_ref) {
  auto& st = senders_[sender - 1];
  auto it = st.delivered.find(round);
  if (it != st.delivered.end()) {
    if (it->second.digest != msg.digest) {
      violation("agreement-conflict",
                "conflicting delivery for sender " + std::to_string(sender) + " round " +
                    std::to_string(round));
    }
    return;  // idempotent
  }
  DeliveryRecord rec;
  rec.digest = msg.digest;
  rec.payload = msg.payload;
  rec.via = via;
  rec.order = delivery_order_++;
  rec.step = clock_ ? *clock_ : 0;
  rec.trigger_round = latency_ref;
  st.delivered.emplace(round, rec);
  while (st.delivered.count(st.delivered_prefix + 1)) ++st.delivered_prefix;

  // Piggybacked delivery evidence: feed every trigger entry.
  for (const auto& t : msg.triggers) {
    if (t) enqueue_process(t->tag.sender, t->tag.round, *t);
  }

  on_quorum_delivery(sender, round, msg);
}

const std::map<Round, DeliveryRecord>& Node::delivery_log(NodeId sender) const {
  return senders_[sender - 1].delivered;
}

Round Node::delivered_prefix(NodeId sender) const {
  return senders_[sender - 1].delivered_prefix;
}

// --- optimistic delivery (all-n certified round) -------------------------

void Node::check_optimistic(Round round) {
  auto& opt = optimistic_[round];
  if (opt.fired) return;
  if (opt.certified.size() < opts_.params.n) return;
  opt.collecting = true;
  for (const auto& [s, digest] : opt.certified) {
    if (opt.collected.count(s)) continue;
    const BroadcastMessage* m = find_chain_message(s, round, digest);
    if (m) {
      opt.collected.emplace(s, *m);
      continue;
    }
    // one outstanding collect query per sender
    bool pending = false;
    for (const auto& [qid, q] : queries_) {
      if (q.purpose == TrafficPurpose::kCollect && q.chain_sender == s && q.round == round) {
        pending = true;
        break;
      }
    }
    if (!pending)
      issue_query(s, round, digest, false, false, TrafficPurpose::kCollect, s, round);
  }
  if (opt.collected.size() == opts_.params.n) fire_optimistic(round);
}

void Node::fire_optimistic(Round round) {
  auto& opt = optimistic_[round];
  if (opt.fired) return;
  opt.fired = true;

  std::map<CertStatement, std::uint32_t> counts;
  std::map<CertStatement, const Certificate*> sample;
  for (const auto& [s, m] : opt.collected) {
    for (const auto& c : m.prev) {
      CertStatement stmt = statement_of(c);
      ++counts[stmt];
      sample.emplace(stmt, &c);
    }
  }
  for (const auto& [stmt, count] : counts) {
    if (count != opts_.params.n) continue;  // must appear in the prev set of every message
    const Certificate* cert = sample[stmt];
    if (!cert_valid(*cert)) continue;
    start_walk(stmt.sender, stmt.round, *cert, stmt.round, DeliveryVia::kOptimistic, round);
  }
  drain_work();
}

// --- totality companion (2f+1 delivered prev intersection) ---------------

void Node::on_quorum_delivery(NodeId sender, Round round, const BroadcastMessage& msg) {
  auto& tot = totality_[round];
  if (!tot.delivered_senders.insert(sender).second) return;
  for (const auto& c : msg.prev) {
    CertStatement stmt = statement_of(c);
    ++tot.prev_counts[stmt];
    // retain one certificate object per statement for later anchoring
    if (!certificate_for(stmt.sender, stmt.round, stmt.digest)) learn_certificate(c, false);
  }
  if (tot.delivered_senders.size() < opts_.params.quorum()) return;
  for (const auto& [stmt, count] : tot.prev_counts) {
    if (count < opts_.params.quorum() || tot.fired.count(stmt)) continue;
    tot.fired.insert(stmt);
    const Certificate* cert = certificate_for(stmt.sender, stmt.round, stmt.digest);
    if (!cert) continue;
    Certificate anchor = *cert;  // walks may mutate their copy
    start_walk(stmt.sender, stmt.round, anchor, stmt.round, DeliveryVia::kQuorum, round);
  }
}

// --- receiving broadcast messages ---------------------------------------

void Node::handle_broadcast(const BroadcastMessage& raw) {
  if (!shape_ok(raw)) return;
  const Committee& committee = committee_for(raw.sender, raw.round);
  if (!committee.contains(id_)) return;

  auto& st = senders_[raw.sender - 1];

  // Fast duplicate path: an identical re-send of an already stored message.
  const BroadcastMessage* have = promise_at(raw.sender, raw.round);
  if (have && have->digest == raw.digest && st.shared.count(raw.round)) return;

  BroadcastMessage m = raw;
  m.digest = message_digest(m, *provider_);  // never trust a claimed digest
  if (!verify_sender_sig(m)) return;

  auto pin = st.first_seen.find(m.round);
  if (pin == st.first_seen.end()) {
    st.first_seen.emplace(m.round, m.digest);
  } else if (pin->second != m.digest && !opts_.disable_equivocation_guard) {
    return;  // a different message for this (sender, round) was seen first
  }

  if (pending_accepts_.count(std::make_pair(m.sender, m.round))) return;
  try_accept(m);
  drain_work();
}

void Node::try_accept(const BroadcastMessage& m) {
  if (m.round > 1) {
    if (promises_length(m.sender) < m.round - 1) {
      pending_accepts_.emplace(std::make_pair(m.sender, m.round), PendingAccept{m});
      ensure_fetch(m.sender,
                   FetchWaiter{m.round - 1, /*use_committee=*/true, /*need_final_cert=*/false,
                               /*done=*/{}});
      return;
    }
    const BroadcastMessage* prev_msg = promise_at(m.sender, m.round - 1);
    bool extends_local = m.prev_cert->message_digest == prev_msg->digest;
    if (!extends_local && !opts_.disable_equivocation_guard) return;  // equivocates with memory
    if (!cert_valid(*m.prev_cert)) return;
    for (const auto& c : m.prev) {
      if (!cert_valid(c)) return;  // every prev entry must be a genuine certificate
    }
  }
  finish_accept(m);
}

void Node::finish_accept(const BroadcastMessage& m) {
  auto& st = senders_[m.sender - 1];
  bool wrote = write_promise(m.sender, m);
  if (!wrote) {
    cache_insert(m.sender, m.round, m);  // keep it servable for chain walks
    if (!opts_.disable_equivocation_guard) return;
  }

  if (m.prev_cert) learn_certificate(*m.prev_cert, true);
  for (const auto& c : m.prev) learn_certificate(c, true);

  const Committee& committee = committee_for(m.sender, m.round);
  if (!st.resent.count(m.round)) {
    st.resent.insert(m.round);
    // Re-broadcast inside the committee before acknowledging, so a byzantine
    // sender cannot pick which members take part in the certificate.
    emit_shared(committee.members, m, m.sender, m.round, TrafficPurpose::kResend);
  }

  // One share per (sender, round); the mutation relaxes this to one per
  // distinct message, which is what lets equivocation through.
  bool may_share = opts_.disable_equivocation_guard
                       ? st.shared_digests.insert(std::make_pair(m.round, m.digest)).second
                       : !st.shared.count(m.round);
  if (may_share) {
    st.shared.insert(m.round);
    ShareMsg sm;
    sm.origin_sender = m.sender;
    sm.round = m.round;
    sm.share = provider_->sign_share(id_, m.digest);
    ++shares_emitted_;
    emit_shared(all_nodes_, sm, m.sender, m.round, TrafficPurpose::kNone);
  }
}

// --- shares ---------------------------------------------------------------

void Node::handle_share(const ShareMsg& sm) {
  if (sm.origin_sender < 1 || sm.origin_sender > opts_.params.n || sm.round < 1) return;
  const Committee& committee = committee_for(sm.origin_sender, sm.round);
  if (!committee.contains(sm.share.signer)) return;
  if (!provider_->verify_share(sm.share)) return;

  auto& buckets = share_accum_[std::make_pair(sm.origin_sender, sm.round)];
  ShareBucket* bucket = nullptr;
  for (auto& b : buckets)
    if (b.digest == sm.share.message_digest) bucket = &b;
  if (!bucket) {
    buckets.emplace_back();
    bucket = &buckets.back();
    bucket->digest = sm.share.message_digest;
  }
  if (bucket->aggregated) return;
  for (const auto& s : bucket->shares)
    if (s.signer == sm.share.signer) return;  // duplicate signer: no progress
  bucket->shares.push_back(sm.share);
  if (bucket->shares.size() >= opts_.params.cert_threshold()) {
    bucket->aggregated = true;
    Certificate cert = provider_->aggregate(bucket->shares, committee,
                                            opts_.params.cert_threshold());
    learn_certificate(cert, true);
    drain_work();
  }
}

// --- chain queries / responses -------------------------------------------

void Node::handle_chain_query(NodeId from, const ChainQuery& q) {
  if (q.chain_sender < 1 || q.chain_sender > opts_.params.n || q.round < 1) return;
  const BroadcastMessage* m = nullptr;
  if (q.want) {
    m = find_chain_message(q.chain_sender, q.round, *q.want);
  } else {
    m = promise_at(q.chain_sender, q.round);
  }
  const Certificate* cert = nullptr;
  if (m && q.want_standalone_cert) cert = certificate_for(q.chain_sender, q.round, m->digest);

  if (m) {
    ChainResponse resp;
    resp.chain_sender = q.chain_sender;
    resp.round = q.round;
    resp.msg = *m;
    if (cert) resp.standalone_cert = *cert;
    resp.attr_sender = q.attr_sender;
    resp.attr_round = q.attr_round;
    resp.purpose = q.purpose;
    resp.query_id = q.query_id;
    emit(from, std::move(resp), q.attr_sender, q.attr_round, q.purpose);
    if (q.want_standalone_cert && !cert) {
      // push the certificate later, once it is learned
      auto key = std::make_tuple(from, q.chain_sender, q.round);
      if (unserved_seen_.insert(key).second)
        unserved_[std::make_pair(q.chain_sender, q.round)].push_back(
            UnservedQuery{from, q.want, true, /*msg_sent=*/true, q.purpose, q.attr_sender,
                          q.attr_round, q.query_id});
    }
    return;
  }
  auto key = std::make_tuple(from, q.chain_sender, q.round);
  if (unserved_seen_.insert(key).second) {
    unserved_[std::make_pair(q.chain_sender, q.round)].push_back(
        UnservedQuery{from, q.want, q.want_standalone_cert, /*msg_sent=*/false, q.purpose,
                      q.attr_sender, q.attr_round, q.query_id});
  }
}

void Node::serve_unserved(NodeId sender, Round round) {
  auto it = unserved_.find(std::make_pair(sender, round));
  if (it == unserved_.end()) return;
  auto& list = it->second;
  for (auto lit = list.begin(); lit != list.end();) {
    UnservedQuery& u = *lit;
    const BroadcastMessage* m = nullptr;
    if (u.want) {
      m = find_chain_message(sender, round, *u.want);
    } else {
      m = promise_at(sender, round);
    }
    if (!m) {
      ++lit;
      continue;
    }
    const Certificate* cert = u.want_cert ? certificate_for(sender, round, m->digest) : nullptr;
    if (!u.msg_sent) {
      ChainResponse resp;
      resp.chain_sender = sender;
      resp.round = round;
      resp.msg = *m;
      if (cert) resp.standalone_cert = *cert;
      resp.attr_sender = u.attr_sender;
      resp.attr_round = u.attr_round;
      resp.purpose = u.purpose;
      resp.query_id = u.query_id;
      emit(u.requester, std::move(resp), u.attr_sender, u.attr_round, u.purpose);
      u.msg_sent = true;
    } else if (cert) {
      emit(u.requester, CertPush{*cert}, u.attr_sender, u.attr_round, u.purpose);
    }
    if (u.want_cert && !cert) {
      ++lit;  // certificate still owed
      continue;
    }
    unserved_seen_.erase(std::make_tuple(u.requester, sender, round));
    lit = list.erase(lit);
  }
  if (list.empty()) unserved_.erase(it);
}

void Node::handle_chain_response(NodeId from, const ChainResponse& r) {
  (void)from;
  auto qit = queries_.find(r.query_id);
  if (qit == queries_.end()) return;  // unsolicited or stale
  const OutQuery q = qit->second;
  if (r.chain_sender != q.chain_sender || r.round != q.round) return;

  BroadcastMessage m = r.msg;
  if (m.sender != q.chain_sender || m.round != q.round) return;
  if (!shape_ok(m)) return;
  m.digest = message_digest(m, *provider_);

  if (q.want) {
    if (!(m.digest == *q.want)) return;
    cancel_query(r.query_id);
    cache_insert(m.sender, m.round, m);
  } else {
    if (!validate_fetch_response(q.chain_sender, m)) {
      // keep the query alive; another responder may have the right chain
      if (r.standalone_cert && cert_valid(*r.standalone_cert))
        learn_certificate(*r.standalone_cert, true);
      return;
    }
    // query resolved by the promise write hook advancing the driver; the
    // driver cancels or reissues as needed
  }
  if (r.standalone_cert && cert_valid(*r.standalone_cert))
    learn_certificate(*r.standalone_cert, true);
  drain_work();
}

bool Node::validate_fetch_response(NodeId target, const BroadcastMessage& m) {
  Round y = promises_length(target) + 1;
  if (m.round != y) return false;
  if (!verify_sender_sig(m)) return false;
  if (y > 1) {
    const BroadcastMessage* prev_msg = promise_at(target, y - 1);
    if (!(m.prev_cert->message_digest == prev_msg->digest)) return false;
    if (!cert_valid(*m.prev_cert)) return false;
    for (const auto& c : m.prev)
      if (!cert_valid(c)) return false;
    learn_certificate(*m.prev_cert, true);
    for (const auto& c : m.prev) learn_certificate(c, true);
  }
  return write_promise(target, m);
}

// --- fetch machinery -------------------------------------------------------

void Node::request_fetch(NodeId target, Round round, bool use_committee,
                         std::function<void(const BroadcastMessage&)> done,
                         bool need_final_cert) {
  ensure_fetch(target, FetchWaiter{round, use_committee, need_final_cert, std::move(done)});
}

void Node::ensure_fetch(NodeId target, FetchWaiter waiter) {
  // cache hit: return immediately, zero network messages
  if (promises_length(target) >= waiter.round) {
    const BroadcastMessage* m = promise_at(target, waiter.round);
    bool cert_ok = !waiter.need_final_cert ||
                   certificate_for(target, waiter.round, m->digest) != nullptr;
    if (cert_ok) {
      if (waiter.done) waiter.done(*m);
      return;
    }
  }
  auto& driver = fetch_drivers_[target];
  driver.target = target;
  driver.waiters.push_back(std::move(waiter));
  advance_fetch(driver);
}

void Node::advance_fetch(FetchDriver& driver) {
  // complete satisfied waiters
  for (auto it = driver.waiters.begin(); it != driver.waiters.end();) {
    if (promises_length(driver.target) >= it->round) {
      const BroadcastMessage* m = promise_at(driver.target, it->round);
      if (!it->need_final_cert || certificate_for(driver.target, it->round, m->digest)) {
        auto done = std::move(it->done);
        it = driver.waiters.erase(it);
        if (done) done(*m);
        continue;
      }
    }
    ++it;
  }
  if (driver.waiters.empty()) {
    if (driver.query != 0) {
      cancel_query(driver.query);
      driver.query = 0;
    }
    return;
  }

  Round y = promises_length(driver.target) + 1;
  bool any_fetch_needed = false;
  bool committee_mode = false;
  bool want_cert = false;
  for (const auto& w : driver.waiters) {
    if (w.round >= y) {
      any_fetch_needed = true;
      if (w.use_committee) committee_mode = true;
      if (!w.use_committee && w.need_final_cert && w.round == y) want_cert = true;
    }
  }
  if (!any_fetch_needed) return;  // waiting on a final certificate only
  if (driver.query != 0 && driver.query_round == y) return;
  if (driver.query != 0) cancel_query(driver.query);
  driver.query =
      issue_query(driver.target, y, std::nullopt, want_cert, !committee_mode,
                  committee_mode ? TrafficPurpose::kSync : TrafficPurpose::kReq, driver.target, y);
  driver.query_round = y;
}

// --- outgoing query machinery ----------------------------------------------

std::uint64_t Node::issue_query(NodeId chain_sender, Round round, std::optional<Digest> want,
                                bool want_cert, bool direct, TrafficPurpose purpose, NodeId attr_s,
                                Round attr_r) {
  OutQuery q;
  q.id = next_query_id_++;
  q.chain_sender = chain_sender;
  q.round = round;
  q.want = want;
  q.want_cert = want_cert;
  q.purpose = purpose;
  q.attr_sender = attr_s;
  q.attr_round = attr_r;
  if (direct) {
    q.targets.push_back(chain_sender);
  } else {
    const Committee& c = committee_for(chain_sender, round);
    std::size_t start = (static_cast<std::size_t>(id_) + round) % c.members.size();
    for (std::size_t i = 0; i < c.members.size(); ++i) {
      NodeId member = c.members[(start + i) % c.members.size()];
      if (member != id_) q.targets.push_back(member);
    }
  }
  if (q.targets.empty()) return 0;

  std::uint64_t id = q.id;
  // Digest-anchored queries go to the whole committee at once: any member
  // holding a matching entry responds (or remembers the query and serves it
  // on arrival). Promises-chain fetches ask one responder at a time and
  // rotate on progress signals.
  bool broadcast_all = q.want.has_value();
  q.next_target = broadcast_all ? q.targets.size() : 1;
  std::vector<NodeId> initial(q.targets.begin(),
                              q.targets.begin() + (broadcast_all ? q.targets.size() : 1));
  for (NodeId t : q.targets) queries_by_target_[t].push_back(id);
  auto [it, ok] = queries_.emplace(id, std::move(q));
  (void)ok;
  for (NodeId t : initial) send_query_to(it->second, t);
  return id;
}

void Node::send_query_to(const OutQuery& q, NodeId target) {
  ChainQuery cq;
  cq.chain_sender = q.chain_sender;
  cq.round = q.round;
  cq.want = q.want;
  cq.want_standalone_cert = q.want_cert;
  cq.attr_sender = q.attr_sender;
  cq.attr_round = q.attr_round;
  cq.purpose = q.purpose;
  cq.query_id = q.id;
  emit(target, cq, q.attr_sender, q.attr_round, q.purpose);
}

void Node::cancel_query(std::uint64_t id) {
  auto it = queries_.find(id);
  if (it == queries_.end()) return;
  for (NodeId t : it->second.targets) {
    auto& vec = queries_by_target_[t];
    vec.erase(std::remove(vec.begin(), vec.end(), id), vec.end());
  }
  queries_.erase(it);

  for (auto dit = fetch_drivers_.begin(); dit != fetch_drivers_.end(); ++dit) {
    if (dit->second.query == id) {
      dit->second.query = 0;
      dit->second.query_round = 0;
    }
  }
}

// Chain-scoped arrival: the peer demonstrably advanced on this chain, so a
// stuck query may be retried there (or rotated onward).
void Node::note_chain_arrival(NodeId from, NodeId chain_sender, Round round) {
  auto tit = queries_by_target_.find(from);
  if (tit == queries_by_target_.end()) return;
  // copy: retries can mutate the index
  std::vector<std::uint64_t> ids = tit->second;
  for (std::uint64_t id : ids) {
    auto qit = queries_.find(id);
    if (qit == queries_.end()) continue;
    OutQuery& q = qit->second;
    if (q.chain_sender != chain_sender || round < q.round) continue;
    std::uint32_t c = ++q.arrivals[from];
    if (c >= 2 && (c & (c - 1)) == 0) {
      NodeId target = q.targets[q.next_target % q.targets.size()];
      q.next_target += 1;
      send_query_to(q, target);
    }
  }
}

// --- own sending pipeline ---------------------------------------------------

void Node::start() {
  if (!opts_.sender_active || opts_.max_round < 1) return;
  build_message(1);
  drain_work();
}

bool Node::req_complete(NodeId target, Round round) const {
  const BroadcastMessage* m = promise_at(target, round);
  if (!m) return false;
  return certificate_for(target, round, m->digest) != nullptr;
}

void Node::maybe_start_build() {
  if (!opts_.sender_active) return;
  if (building_ != 0 || own_round_ == 0 || own_round_ >= opts_.max_round) return;
  const BroadcastMessage* own = promise_at(id_, own_round_);
  if (!own || !certificate_for(id_, own_round_, own->digest)) return;

  building_ = own_round_ + 1;
  req_completed_.clear();
  req_completed_set_.clear();
  const Round prev_round = own_round_;
  for (NodeId j : all_nodes_) {
    if (req_complete(j, prev_round)) {
      if (req_completed_set_.insert(j).second) req_completed_.push_back(j);
    } else {
      ensure_fetch(j, FetchWaiter{prev_round, /*use_committee=*/false, /*need_final_cert=*/true,
                                  /*done=*/{}});
    }
  }
  if (req_completed_.size() >= opts_.params.quorum()) {
    build_message(building_);
  }
}

void Node::on_req_progress(NodeId target) {
  if (building_ == 0) return;
  if (req_completed_set_.count(target)) return;
  if (!req_complete(target, building_ - 1)) return;
  req_completed_set_.insert(target);
  req_completed_.push_back(target);
  if (req_completed_.size() == opts_.params.quorum()) build_message(building_);
}

const BroadcastMessage& Node::build_message(Round round) {
  if (round == 1) {
    if (own_round_ != 0) fail(Errc::not_ready, "round 1 already sent");
  } else {
    if (round != own_round_ + 1) fail(Errc::not_ready, "rounds are sent sequentially");
    const BroadcastMessage* own = promise_at(id_, own_round_);
    if (!own || !certificate_for(id_, own_round_, own->digest))
      fail(Errc::not_ready, "previous round certificate not yet held");
    if (req_completed_.size() < opts_.params.quorum())
      fail(Errc::not_ready, "fewer than 2f+1 previous-round acquisitions completed");
  }

  BroadcastMessage m;
  m.payload = make_payload(round);
  m.sender = id_;
  m.round = round;
  m.triggers = triggers_;
  if (round > 1) {
    const BroadcastMessage* own = promise_at(id_, round - 1);
    m.prev_cert = *certificate_for(id_, round - 1, own->digest);
    for (std::size_t i = 0; i < opts_.params.quorum(); ++i) {
      NodeId j = req_completed_[i];
      const BroadcastMessage* pm = promise_at(j, round - 1);
      m.prev.push_back(*certificate_for(j, round - 1, pm->digest));
    }
  }
  m.digest = message_digest(m, *provider_);
  m.sender_sig = provider_->sign_share(id_, m.digest).share_bytes;

  write_promise(id_, m);
  building_ = 0;
  own_round_ = round;

  const Committee& committee = committee_for(id_, round);
  emit_shared(committee.members, m, id_, round, TrafficPurpose::kSend);
  return *promise_at(id_, round);
}

std::optional<std::vector<Certificate>> Node::quorum_prev_certs(Round round) const {
  std::vector<Certificate> out;
  for (NodeId j : all_nodes_) {
    const BroadcastMessage* m = promise_at(j, round);
    if (!m) continue;
    const Certificate* c = certificate_for(j, round, m->digest);
    if (!c) continue;
    out.push_back(*c);
    if (out.size() == opts_.params.quorum()) return out;
  }
  return std::nullopt;
}

// --- envelope dispatch ----------------------------------------------------

void Node::prune_walks() {
  if (walks_.size() < 64) return;
  std::size_t live = 0;
  for (const auto& w : walks_)
    if (!w->done) ++live;
  if (walks_.size() - live < 32) return;
  std::vector<std::unique_ptr<WalkTask>> keep;
  keep.reserve(live);
  for (auto& w : walks_)
    if (!w->done) keep.push_back(std::move(w));
  walks_.swap(keep);
}

void Node::on_envelope(const Envelope& env) {
  if (!env.body) return;
  switch (kind_of(*env.body)) {
    case PayloadKind::kBroadcast: {
      const auto& m = std::get<BroadcastMessage>(*env.body);
      note_chain_arrival(env.src, m.sender, m.round);
      handle_broadcast(m);
      break;
    }
    case PayloadKind::kShare: {
      const auto& s = std::get<ShareMsg>(*env.body);
      note_chain_arrival(env.src, s.origin_sender, s.round);
      handle_share(s);
      break;
    }
    case PayloadKind::kChainQuery:
      handle_chain_query(env.src, std::get<ChainQuery>(*env.body));
      break;
    case PayloadKind::kChainResponse: {
      const auto& r = std::get<ChainResponse>(*env.body);
      note_chain_arrival(env.src, r.chain_sender, r.round);
      handle_chain_response(env.src, r);
      break;
    }
    case PayloadKind::kCertPush: {
      const auto& p = std::get<CertPush>(*env.body);
      note_chain_arrival(env.src, p.cert.tag.sender, p.cert.tag.round);
      if (cert_valid(p.cert)) learn_certificate(p.cert, true);
      break;
    }
  }
  drain_work();
  maybe_start_build();
  prune_walks();
}

}  // namespace apmbrb
