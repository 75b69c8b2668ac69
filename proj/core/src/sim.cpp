// Copyright 2026 The apmbrb Authors
// SPDX-License-Identifier: Apache-2.0
#include "apmbrb/sim.hpp"

#include <algorithm>
#include <deque>
#include <random>

#include <json.hpp>

#include "apmbrb/bracha.hpp"
#include "apmbrb/byzantine.hpp"

namespace apmbrb {

CommitteeParams SimConfig::resolve_params() const {
  if (epsilon) return derive_params(n, f, *epsilon);
  if (allow_resilience_violation) {
    CommitteeParams p;
    p.n = n;
    p.f = f;
    p.epsilon = 0.0;
    p.n_c = n_c;
    p.n_c_raw = n_c;
    p.phi = phi;
    if (n_c == 0 || n_c > n || phi < 1) fail(Errc::parameter_range, "bad override");
    return p;
  }
  return override_params(n, f, n_c, phi);
}

bool SimConfig::is_byzantine(NodeId id) const {
  return std::find(fault.byzantine.begin(), fault.byzantine.end(), id) != fault.byzantine.end();
}

Envelope make_envelope(NodeId src, NodeId dst, std::shared_ptr<const WireBody> body,
                       std::size_t k_bytes, NodeId attr_sender, Round attr_round,
                       TrafficPurpose purpose) {
  Envelope env;
  env.src = src;
  env.dst = dst;
  env.payload_bits = 8 * payload_bytes_of(*body);
  env.accounted_bits = 8 * (kEnvelopeFrameBytes + accounted_body_bytes(*body, k_bytes));
  env.attr_sender = attr_sender;
  env.attr_round = attr_round;
  env.purpose = purpose;
  env.body = std::move(body);
  return env;
}

namespace {

class ApmAgent : public Agent {
 public:
  ApmAgent(NodeId id, ProtocolOptions opts, std::shared_ptr<const CryptoProvider> provider,
           std::vector<Violation>* violations, const std::uint64_t* clock)
      : node_(id, std::move(opts), std::move(provider), violations, clock) {}

  NodeId id() const override { return node_.id(); }
  void start() override { node_.start(); }
  void on_envelope(const Envelope& env) override { node_.on_envelope(env); }
  void drain(std::vector<Envelope>& out) override { node_.drain(out); }
  Round rounds_broadcast() const override { return node_.own_round(); }

  void collect_deliveries(std::vector<DeliveryEvent>& out) const override {
    for (NodeId s = 1; s <= node_.options().params.n; ++s) {
      for (const auto& [round, rec] : node_.delivery_log(s)) {
        DeliveryEvent ev;
        ev.node = node_.id();
        ev.sender = s;
        ev.round = round;
        ev.digest = rec.digest;
        ev.via = rec.via;
        ev.trigger_round = rec.trigger_round;
        ev.step = rec.step;
        ev.order = rec.order;
        out.push_back(ev);
      }
    }
  }

  Node& node() { return node_; }

 private:
  Node node_;
};

struct Scheduler {
  const SchedulerPolicy& policy;
  std::mt19937_64 rng;
  std::deque<Envelope> pool;
  std::deque<Envelope> starved;
  const std::vector<bool>& byzantine;
  std::uint64_t released_budget;

  Scheduler(const SchedulerPolicy& p, const std::vector<bool>& byz)
      : policy(p), rng(p.seed), byzantine(byz), released_budget(p.starvation_budget) {}

  bool starves(const Envelope& env) const {
    if (policy.kind != SchedulerKind::kAdversarial) return false;
    if (env.dst != policy.observed_sender) return false;
    if (!env.body || kind_of(*env.body) != PayloadKind::kShare) return false;
    if (env.src < byzantine.size() && byzantine[env.src]) return false;
    if (std::find(policy.favored.begin(), policy.favored.end(), env.src) != policy.favored.end())
      return false;
    const auto& sm = std::get<ShareMsg>(*env.body);
    return sm.origin_sender == policy.observed_sender;
  }

  void submit(Envelope env) {
    if (starves(env)) {
      starved.push_back(std::move(env));
    } else {
      pool.push_back(std::move(env));
    }
  }

  bool empty() const { return pool.empty() && starved.empty(); }

  // Budget exhaustion or an otherwise idle network releases held envelopes:
  // delivery is delayed, never dropped.
  void maybe_release(std::uint64_t step) {
    if (starved.empty()) return;
    if (step >= released_budget || pool.empty()) {
      while (!starved.empty()) {
        pool.push_back(std::move(starved.front()));
        starved.pop_front();
      }
    }
  }

  Envelope next() {
    if (policy.kind == SchedulerKind::kRoundRobin) {
      Envelope env = std::move(pool.front());
      pool.pop_front();
      return env;
    }
    std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
    std::size_t idx = pick(rng);
    std::swap(pool[idx], pool.back());
    Envelope env = std::move(pool.back());
    pool.pop_back();
    return env;
  }
};

}  // namespace

RunTranscript run(const SimConfig& config) {
  RunTranscript t;
  t.config = config;
  t.params = config.resolve_params();
  const CommitteeParams& params = t.params;
  const std::uint32_t n = config.n;
  if (config.fault.byzantine.size() > config.f)
    fail(Errc::bad_config, "more byzantine nodes than f");

  KeyMaterial keys{config.setup_seed, n};
  auto provider = make_keyed_provider(keys, config.k_bytes);

  std::vector<bool> byz(n + 1, false);
  for (NodeId b : config.fault.byzantine) {
    if (b < 1 || b > n) fail(Errc::bad_config, "byzantine id out of range");
    byz[b] = true;
  }

  std::uint64_t step = 0;
  std::vector<std::unique_ptr<Agent>> agents;
  agents.reserve(n);

  for (NodeId id = 1; id <= n; ++id) {
    bool is_byz = byz[id] && config.fault.kind != FaultKind::kNone;
    if (config.protocol == ProtocolKind::kApm) {
      ProtocolOptions opts;
      opts.params = params;
      opts.seed0 = Seed{config.seed0};
      opts.payload_bytes = config.payload_bytes;
      opts.payload_seed = config.setup_seed ^ 0x5eedULL;
      opts.max_round = config.rounds;
      opts.disable_equivocation_guard = config.disable_equivocation_guard;
      if (is_byz) {
        agents.push_back(make_apm_byzantine(config.fault.kind, id, opts, provider,
                                            config.fault.selective_targets, &step));
      } else {
        agents.push_back(std::make_unique<ApmAgent>(id, opts, provider, &t.violations, &step));
      }
    } else {
      BrachaNode::Options opts;
      opts.n = n;
      opts.f = config.f;
      opts.payload_bytes = config.payload_bytes;
      opts.payload_seed = config.setup_seed ^ 0x5eedULL;
      opts.max_round = config.rounds;
      if (is_byz) {
        agents.push_back(make_bracha_byzantine(config.fault.kind, id, opts, provider,
                                               config.fault.selective_targets, &step));
      } else {
        agents.push_back(std::make_unique<BrachaNode>(id, opts, provider, &step));
      }
    }
  }

  Scheduler sched(config.scheduler, byz);
  std::vector<Envelope> staging;
  std::set<std::pair<Round, NodeId>> acked;

  auto flush_agent = [&](NodeId id) {
    staging.clear();
    agents[id - 1]->drain(staging);
    for (auto& env : staging) {
      env.src = id;  // authenticated channels
      env.enqueue_step = step;
      ++t.submitted_envelopes;
      if (!byz[id]) {
        t.honest_bits += env.accounted_bits;
        auto& ks = t.by_kind[std::make_pair(kind_of(*env.body), env.purpose)];
        ks.count += 1;
        ks.bits += env.accounted_bits;
        ks.payload_bits += env.payload_bits;
        t.instance_bits[std::make_pair(env.attr_sender, env.attr_round)] += env.accounted_bits;
        t.instance_payload_bits[std::make_pair(env.attr_sender, env.attr_round)] +=
            env.payload_bits;
      }
      sched.submit(std::move(env));
    }
  };

  for (NodeId id = 1; id <= n; ++id) {
    agents[id - 1]->start();
    flush_agent(id);
  }

  std::uint64_t cap = config.step_cap;
  if (cap == 0) {
    std::uint64_t per_round =
        3ull * n * (3ull * n + 5ull * params.n_c * params.n_c + 2ull * n * params.n_c + 64);
    cap = 10000 + per_round * (config.rounds + params.phi + 2);
  }

  while (true) {
    sched.maybe_release(step);
    if (sched.pool.empty()) {
      t.quiesced = sched.starved.empty();
      break;
    }
    if (step >= cap) {
      t.quiesced = false;  // step cap exceeded: partial transcript
      break;
    }
    Envelope env = sched.next();
    ++step;
    ++t.delivered_envelopes;

    if (config.scheduler.observed_sender != 0 && env.dst == config.scheduler.observed_sender &&
        env.body && kind_of(*env.body) == PayloadKind::kShare && !byz[env.src]) {
      const auto& sm = std::get<ShareMsg>(*env.body);
      if (sm.origin_sender == config.scheduler.observed_sender &&
          acked.insert(std::make_pair(sm.round, env.src)).second) {
        t.first_acks.emplace_back(sm.round, env.src);
      }
    }

    agents[env.dst - 1]->on_envelope(env);
    flush_agent(env.dst);
  }
  t.steps = step;

  t.sender_rounds.assign(n, 0);
  for (NodeId id = 1; id <= n; ++id) {
    if (!byz[id]) t.sender_rounds[id - 1] = agents[id - 1]->rounds_broadcast();
  }
  for (NodeId id = 1; id <= n; ++id) {
    if (!byz[id]) agents[id - 1]->collect_deliveries(t.deliveries);
  }
  std::sort(t.deliveries.begin(), t.deliveries.end(), [](const auto& a, const auto& b) {
    if (a.step != b.step) return a.step < b.step;
    if (a.node != b.node) return a.node < b.node;
    return a.order < b.order;
  });
  return t;
}

std::string transcript_json(const RunTranscript& t) {
  nlohmann::json j;
  j["config"] = {
      {"protocol", t.config.protocol == ProtocolKind::kApm ? "apm" : "bracha"},
      {"n", t.config.n},
      {"f", t.config.f},
      {"n_c", t.params.n_c},
      {"phi", t.params.phi},
      {"payload_bytes", t.config.payload_bytes},
      {"k_bytes", t.config.k_bytes},
      {"rounds", t.config.rounds},
      {"fault", static_cast<int>(t.config.fault.kind)},
      {"byzantine", t.config.fault.byzantine},
      {"scheduler", static_cast<int>(t.config.scheduler.kind)},
      {"seed", t.config.scheduler.seed},
      {"setup_seed", t.config.setup_seed},
      {"seed0", t.config.seed0},
  };
  j["quiesced"] = t.quiesced;
  j["steps"] = t.steps;
  j["submitted_envelopes"] = t.submitted_envelopes;
  j["delivered_envelopes"] = t.delivered_envelopes;
  j["honest_bits"] = t.honest_bits;

  nlohmann::json kinds = nlohmann::json::array();
  for (const auto& [key, ks] : t.by_kind) {
    kinds.push_back({{"kind", kind_name(key.first)},
                     {"purpose", static_cast<int>(key.second)},
                     {"count", ks.count},
                     {"bits", ks.bits},
                     {"payload_bits", ks.payload_bits}});
  }
  j["traffic"] = kinds;

  nlohmann::json dels = nlohmann::json::array();
  for (const auto& d : t.deliveries) {
    dels.push_back({{"node", d.node},
                    {"sender", d.sender},
                    {"round", d.round},
                    {"digest", to_hex(d.digest.bytes)},
                    {"via", static_cast<int>(d.via)},
                    {"trigger_round", d.trigger_round},
                    {"step", d.step}});
  }
  j["deliveries"] = dels;

  nlohmann::json viols = nlohmann::json::array();
  for (const auto& v : t.violations)
    viols.push_back({{"node", v.node}, {"kind", v.kind}, {"detail", v.detail}});
  j["violations"] = viols;
  j["sender_rounds"] = t.sender_rounds;

  nlohmann::json acks = nlohmann::json::array();
  for (const auto& [round, node] : t.first_acks) acks.push_back({{"round", round}, {"node", node}});
  j["first_acks"] = acks;
  return j.dump(2);
}

}  // namespace apmbrb
