// Copyright 2026 The apmbrb Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <unordered_set>
#include <vector>

#include "apmbrb/committee.hpp"
#include "apmbrb/envelope.hpp"
#include "apmbrb/message.hpp"

namespace apmbrb {

enum class DeliveryVia : std::uint8_t {
  kChain = 1,       // certificate chain walk (common case)
  kOptimistic = 2,  // all-n certified round, universal prev intersection
  kQuorum = 3,      // 2f+1 delivered-messages prev intersection (totality)
};

struct DeliveryRecord {
  Digest digest;
  PayloadRef payload;
  DeliveryVia via = DeliveryVia::kChain;
  std::uint64_t order = 0;       // per-node delivery sequence
  std::uint64_t step = 0;        // simulator step of the delivery
  Round trigger_round = 0;       // round of the evidence that triggered it
};

struct Violation {
  NodeId node = 0;
  std::string kind;
  std::string detail;
};

struct ProtocolOptions {
  CommitteeParams params;
  Seed seed0;
  std::uint32_t payload_bytes = 0;
  std::uint64_t payload_seed = 0;
  bool sender_active = true;
  Round max_round = 0;  // own rounds to broadcast
  // Test-only mutation switch for the acceptance suite: accept and sign
  // chain-extending messages even when they conflict with local memory.
  bool disable_equivocation_guard = false;
};

// Single-owner event-driven state machine for one honest node. One event is
// applied at a time; all network effects are value envelopes left in the
// outbox for the simulator to drain.
class Node {
 public:
  Node(NodeId id, ProtocolOptions opts, std::shared_ptr<const CryptoProvider> provider,
       std::vector<Violation>* violations, const std::uint64_t* clock);

  NodeId id() const { return id_; }
  const ProtocolOptions& options() const { return opts_; }

  // Sends the round-1 message when sender_active.
  void start();
  void on_envelope(const Envelope& env);
  void drain(std::vector<Envelope>& out);

  // --- direct entry points (protocol operations; also used by tests) ---

  // Constructs and sends m_r. Throws Errc::not_ready before the previous
  // round's certificate and 2f+1 completed previous-round acquisitions.
  const BroadcastMessage& build_message(Round round);

  // Feeds an externally obtained certificate (also the trigger/cert-push path).
  void process_certificate(NodeId sender, Round round, const Certificate& cert);

  // Sub-protocol entry: fetch target's chain up to `round` into promises.
  // Calls done(msg) once promises[target][round] exists (immediately on a
  // cache hit, with zero network traffic).
  void request_fetch(NodeId target, Round round, bool use_committee,
                     std::function<void(const BroadcastMessage&)> done,
                     bool need_final_cert = false);

  // --- inspection ---
  Round promises_length(NodeId sender) const;
  const BroadcastMessage* promise_at(NodeId sender, Round round) const;
  const std::map<Round, DeliveryRecord>& delivery_log(NodeId sender) const;
  Round delivered_prefix(NodeId sender) const;
  const Certificate* certificate_for(NodeId sender, Round round, const Digest& digest) const;
  bool has_certificate(NodeId sender, Round round) const;
  const std::vector<std::optional<Certificate>>& triggers() const { return triggers_; }
  Round own_round() const { return own_round_; }
  std::uint64_t shares_emitted() const { return shares_emitted_; }

  // First 2f+1 distinct-sender certificates for `round` consistent with this
  // node's promises chains, in ascending sender order; nullopt if fewer exist.
  std::optional<std::vector<Certificate>> quorum_prev_certs(Round round) const;

  const Committee& committee_for(NodeId sender, Round round);

 private:
  struct SenderState {
    std::vector<BroadcastMessage> promises;  // index y-1 holds round y
    std::map<Round, Digest> first_seen;      // receipt pin per round
    std::set<Round> shared;                  // rounds we emitted a share for
    std::set<std::pair<Round, Digest>> shared_digests;  // mutation mode only
    std::set<Round> resent;                  // rounds we re-sent to the committee
    std::map<Round, std::vector<Certificate>> certs;  // learned, distinct digests
    std::map<Round, DeliveryRecord> delivered;
    Round delivered_prefix = 0;
  };

  struct PendingAccept {
    BroadcastMessage msg;
  };

  struct OutQuery {
    std::uint64_t id = 0;
    NodeId chain_sender = 0;
    Round round = 0;
    std::optional<Digest> want;
    bool want_cert = false;
    TrafficPurpose purpose = TrafficPurpose::kNone;
    NodeId attr_sender = 0;
    Round attr_round = 0;
    std::vector<NodeId> targets;  // rotation order
    std::size_t next_target = 0;
    std::map<NodeId, std::uint32_t> arrivals;  // re-ask on power-of-two counts
  };

  struct FetchWaiter {
    Round round = 0;
    bool use_committee = false;
    bool need_final_cert = false;
    std::function<void(const BroadcastMessage&)> done;
  };

  // One driver per chain owner advances promises[target] one round at a time.
  struct FetchDriver {
    NodeId target = 0;
    std::vector<FetchWaiter> waiters;
    std::uint64_t query = 0;  // outstanding OutQuery id, 0 if none
    Round query_round = 0;
  };

  struct WalkTask {
    NodeId sender = 0;
    Round anchor_round = 0;
    Certificate cert;      // binds round v
    Round v = 0;
    Round deliver_from = 0;  // deliver rounds <= this (0: collect only)
    DeliveryVia via = DeliveryVia::kChain;
    Round latency_ref = 0;
    std::uint64_t query = 0;
    bool collect_only = false;
    bool done = false;
    bool advancing = false;
  };

  struct OptimisticRound {
    std::map<NodeId, Digest> certified;  // first certified digest per sender
    std::map<NodeId, BroadcastMessage> collected;
    bool collecting = false;
    bool fired = false;
  };

  struct TotalityRound {
    std::set<NodeId> delivered_senders;
    std::map<CertStatement, std::uint32_t> prev_counts;
    std::set<CertStatement> fired;
  };

  struct UnservedQuery {
    NodeId requester = 0;
    std::optional<Digest> want;
    bool want_cert = false;
    bool msg_sent = false;
    TrafficPurpose purpose = TrafficPurpose::kNone;
    NodeId attr_sender = 0;
    Round attr_round = 0;
    std::uint64_t query_id = 0;
  };

  // dispatch
  void handle_broadcast(const BroadcastMessage& m);
  void handle_share(const ShareMsg& s);
  void handle_chain_query(NodeId from, const ChainQuery& q);
  void handle_chain_response(NodeId from, const ChainResponse& r);

  // protocol steps
  bool shape_ok(const BroadcastMessage& m) const;
  void try_accept(const BroadcastMessage& m);
  void finish_accept(const BroadcastMessage& m);
  void learn_certificate(const Certificate& cert, bool trusted);
  void enqueue_process(NodeId sender, Round round, const Certificate& cert);
  void drain_work();
  void start_walk(NodeId sender, Round anchor, const Certificate& cert, Round deliver_from,
                  DeliveryVia via, Round latency_ref, bool collect_only = false);
  void advance_walk(WalkTask& walk);
  void deliver(NodeId sender, Round round, const BroadcastMessage& msg, DeliveryVia via,
               Round latency_ref);
  void check_optimistic(Round round);
  void fire_optimistic(Round round);
  void on_quorum_delivery(NodeId sender, Round round, const BroadcastMessage& msg);

  // own sending pipeline
  void maybe_start_build();
  void on_req_progress(NodeId target);
  bool req_complete(NodeId target, Round round) const;
  void send_own_round(Round round);

  // promises / cache.
  bool write_promise(NodeId sender, const BroadcastMessage& msg);
  void on_promise_written(NodeId sender, Round round);
  void on_cert_learned(NodeId sender, Round round, const Digest& digest);
  void cache_insert(NodeId sender, Round round, const BroadcastMessage& msg);
  const BroadcastMessage* find_chain_message(NodeId sender, Round round, const Digest& digest) const;

  // fetch machinery
  void ensure_fetch(NodeId target, FetchWaiter waiter);
  void advance_fetch(FetchDriver& driver);
  bool validate_fetch_response(NodeId target, const BroadcastMessage& msg);

  // query machinery
  std::uint64_t issue_query(NodeId chain_sender, Round round, std::optional<Digest> want,
                            bool want_cert, bool direct, TrafficPurpose purpose, NodeId attr_s,
                            Round attr_r);
  void cancel_query(std::uint64_t id);
  void send_query_to(const OutQuery& q, NodeId target);
  void note_chain_arrival(NodeId from, NodeId chain_sender, Round round);
  void serve_unserved(NodeId sender, Round round);
  void prune_walks();

  // verification helpers
  bool cert_valid(const Certificate& cert);
  std::uint64_t cert_fingerprint(const Certificate& cert) const;
  bool verify_sender_sig(const BroadcastMessage& m) const;

  void emit(NodeId dst, WireBody body, NodeId attr_s, Round attr_r, TrafficPurpose purpose);
  void emit_shared(const std::vector<NodeId>& dsts, WireBody body, NodeId attr_s, Round attr_r,
                   TrafficPurpose purpose);
  void violation(const std::string& kind, const std::string& detail);
  PayloadRef make_payload(Round round) const;

  NodeId id_;
  ProtocolOptions opts_;
  std::shared_ptr<const CryptoProvider> provider_;
  std::vector<Violation>* violations_;
  const std::uint64_t* clock_;

  std::vector<Envelope> outbox_;
  std::vector<NodeId> all_nodes_;

  std::vector<SenderState> senders_;  // index id-1
  std::vector<std::optional<Certificate>> triggers_;
  std::map<std::pair<NodeId, Round>, PendingAccept> pending_accepts_;
  std::map<std::tuple<NodeId, Round, Digest>, BroadcastMessage> chain_cache_;

  // share accumulation per (sender, round): digest -> shares by signer
  struct ShareBucket {
    Digest digest;
    std::vector<SignatureShare> shares;
    bool aggregated = false;
  };
  std::map<std::pair<NodeId, Round>, std::vector<ShareBucket>> share_accum_;

  std::map<std::uint64_t, OutQuery> queries_;
  std::map<NodeId, std::vector<std::uint64_t>> queries_by_target_;
  std::uint64_t next_query_id_ = 1;

  std::map<NodeId, FetchDriver> fetch_drivers_;
  std::vector<std::unique_ptr<WalkTask>> walks_;
  std::map<Round, OptimisticRound> optimistic_;
  std::map<Round, TotalityRound> totality_;
  std::map<std::pair<NodeId, Round>, std::vector<UnservedQuery>> unserved_;
  std::set<std::tuple<NodeId, NodeId, Round>> unserved_seen_;  // requester, sender, round

  std::deque<std::tuple<NodeId, Round, Certificate>> work_;
  std::set<std::tuple<NodeId, Round, Digest>> processed_certs_;
  std::set<std::tuple<NodeId, Round, Digest>> walked_;
  std::unordered_set<std::uint64_t> verified_certs_;

  // committee cache keyed by (sender, round mod phi)
  mutable std::map<std::pair<NodeId, Round>, Committee> committee_cache_;

  // own pipeline
  Round own_round_ = 0;  // last round sent
  Round building_ = 0;   // round being prepared (0 = none)
  std::vector<NodeId> req_completed_;
  std::set<NodeId> req_completed_set_;
  bool in_drain_ = false;
  std::uint64_t delivery_order_ = 0;
  std::uint64_t shares_emitted_ = 0;
};

}  // namespace apmbrb
