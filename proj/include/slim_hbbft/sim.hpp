#pragma once

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "slim_hbbft/acs.hpp"
#include "slim_hbbft/trace.hpp"

namespace slim_hbbft {

// ---------------------------------------------------------------------------
// Scheduling

enum class SchedulerKind { Fair, TargetedDelay, Adversarial };

inline std::string_view to_string(SchedulerKind k) {
  switch (k) {
    case SchedulerKind::Fair: return "fair";
    case SchedulerKind::TargetedDelay: return "targeted-delay";
    case SchedulerKind::Adversarial: return "adversarial";
  }
  return "unknown";
}

inline SchedulerKind scheduler_from_string(std::string_view s) {
  if (s == "fair") return SchedulerKind::Fair;
  if (s == "targeted-delay" || s == "targeted") return SchedulerKind::TargetedDelay;
  if (s == "adversarial" || s == "send-order") return SchedulerKind::Adversarial;
  throw Error(ErrorCode::ConfigInvalid, "unknown scheduler '" + std::string(s) + "'");
}

/// `target`: targeted-delay starves messages from or to this party (optionally
/// only of `target_kind`). `max_age`: a message older than this many steps is
/// forced out regardless of policy; 0 picks 8n^2 + 64.
struct SchedulerConfig {
  SchedulerKind kind = SchedulerKind::Fair;
  std::optional<PartyId> target;
  std::optional<MessageKind> target_kind;
  std::uint64_t max_age = 0;

  std::uint64_t age_bound(std::uint32_t n) const { return max_age ? max_age : 8ull * n * n + 64; }
};

struct PendingMessage {
  std::uint64_t id = 0;
  PartyId to;
  Message msg;
  std::uint64_t enqueued = 0;
  bool delayed = false;
};

/// Pending messages, indexable by id, by age and uniformly at random within
/// the normal and delayed classes.
class MessagePool {
 public:
  void push(PendingMessage m) {
    auto& bucket = m.delayed ? delayed_ : normal_;
    std::uint64_t id = m.id;
    order_.insert(id);
    entries_.emplace(id, Entry{std::move(m), bucket.size()});
    bucket.push_back(id);
  }

  PendingMessage take(std::uint64_t id) {
    auto node = entries_.extract(id);
    Entry& e = node.mapped();
    auto& bucket = e.msg.delayed ? delayed_ : normal_;
    std::uint64_t last = bucket.back();
    bucket[e.pos] = last;
    bucket.pop_back();
    if (last != id) entries_.at(last).pos = e.pos;
    order_.erase(id);
    return std::move(e.msg);
  }

  const PendingMessage& get(std::uint64_t id) const { return entries_.at(id).msg; }
  bool empty() const { return order_.empty(); }
  std::size_t size() const { return order_.size(); }
  std::size_t normal_count() const { return normal_.size(); }
  std::size_t delayed_count() const { return delayed_.size(); }
  std::uint64_t oldest() const { return *order_.begin(); }
  std::uint64_t newest() const { return *order_.rbegin(); }
  std::uint64_t normal_at(std::size_t i) const { return normal_[i]; }
  std::uint64_t delayed_at(std::size_t i) const { return delayed_[i]; }

 private:
  struct Entry {
    PendingMessage msg;
    std::size_t pos;
  };

  std::unordered_map<std::uint64_t, Entry> entries_;
  std::vector<std::uint64_t> normal_, delayed_;
  std::set<std::uint64_t> order_;
};

/// Picks the id of the next message to deliver. Requires a nonempty pool.
inline std::uint64_t schedule_next(const MessagePool& pool, const SchedulerConfig& cfg, std::uint64_t now,
                                   std::uint64_t max_age, std::mt19937_64& rng) {
  std::uint64_t oldest = pool.oldest();
  if (now - pool.get(oldest).enqueued >= max_age) return oldest;
  switch (cfg.kind) {
    case SchedulerKind::Adversarial:
      return pool.newest();
    case SchedulerKind::TargetedDelay:
      if (pool.normal_count() == 0) return pool.delayed_at(rng() % pool.delayed_count());
      [[fallthrough]];
    case SchedulerKind::Fair:
      if (pool.normal_count() == 0) return pool.delayed_at(rng() % pool.delayed_count());
      return pool.normal_at(rng() % pool.normal_count());
  }
  return oldest;
}

// ---------------------------------------------------------------------------
// Network

struct RunOutcome {
  std::uint64_t steps = 0;
  bool all_done = false;
  bool timed_out = false;
};

/// Deterministic message-passing network over `Node`s. A node provides
/// start(Outbox&), handle(const Message&, Outbox&), done() and honest().
/// The network stamps the sender on every message, so nodes cannot spoof.
template <class Node>
class Network {
 public:
  Network(std::vector<std::unique_ptr<Node>> nodes, SchedulerConfig sched, std::uint64_t seed,
          Trace* trace = nullptr)
      : nodes_(std::move(nodes)),
        sched_(sched),
        max_age_(sched.age_bound(static_cast<std::uint32_t>(nodes_.size()))),
        rng_(seed),
        trace_(trace) {}

  void start() {
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      Outbox out;
      nodes_[i]->start(out);
      submit(PartyId{static_cast<std::uint16_t>(i)}, out);
    }
  }

  /// Delivers one message; false when nothing is pending.
  bool step() {
    if (pool_.empty()) return false;
    std::uint64_t id = schedule_next(pool_, sched_, step_, max_age_, rng_);
    PendingMessage m = pool_.take(id);
    max_observed_age_ = std::max(max_observed_age_, step_ - m.enqueued);
    ++step_;
    if (trace_) trace_->record_deliver(step_, m.to, m.id, m.msg);
    if (on_deliver_) on_deliver_(m);
    Outbox out;
    nodes_[m.to.index]->handle(m.msg, out);
    submit(m.to, out);
    return true;
  }

  /// Runs until every honest node is done (then drains the pool) or the cap hits.
  RunOutcome run(std::uint64_t max_steps, bool drain = true) {
    RunOutcome r;
    while (step_ < max_steps) {
      if (all_honest_done()) {
        r.all_done = true;
        break;
      }
      if (!step()) break;
    }
    if (!r.all_done) r.all_done = all_honest_done();
    r.timed_out = !r.all_done;
    if (r.all_done && drain) {
      while (step_ < max_steps && step()) {
      }
    }
    r.steps = step_;
    return r;
  }

  bool all_honest_done() const {
    for (const auto& n : nodes_) {
      if (n->honest() && !n->done()) return false;
    }
    return true;
  }

  Node& node(std::size_t i) { return *nodes_[i]; }
  const Node& node(std::size_t i) const { return *nodes_[i]; }
  std::size_t size() const { return nodes_.size(); }
  const MessagePool& pool() const { return pool_; }
  std::uint64_t steps() const { return step_; }
  std::uint64_t max_age() const { return max_age_; }
  std::uint64_t max_observed_age() const { return max_observed_age_; }
  std::uint64_t messages_sent() const { return next_id_; }
  void on_deliver(std::function<void(const PendingMessage&)> fn) { on_deliver_ = std::move(fn); }

 private:
  void submit(PartyId from, Outbox& out) {
    for (const auto& item : out.order) {
      if (!item.is_message) {
        if (trace_) trace_->record_local(step_, from, std::move(out.events[item.index]));
        continue;
      }
      auto& env = out.messages[item.index];
      if (env.to.index >= nodes_.size()) continue;
      env.msg.sender = from;
      PendingMessage m;
      m.id = next_id_++;
      m.to = env.to;
      m.enqueued = step_;
      m.delayed = is_delayed(from, env.to, env.msg.kind);
      if (trace_) trace_->record_send(step_, env.to, m.id, env.msg);
      m.msg = std::move(env.msg);
      pool_.push(std::move(m));
    }
  }

  bool is_delayed(PartyId from, PartyId to, MessageKind kind) const {
    if (sched_.kind != SchedulerKind::TargetedDelay || !sched_.target) return false;
    if (from != *sched_.target && to != *sched_.target) return false;
    return !sched_.target_kind || *sched_.target_kind == kind;
  }

  std::vector<std::unique_ptr<Node>> nodes_;
  SchedulerConfig sched_;
  std::uint64_t max_age_;
  std::mt19937_64 rng_;
  Trace* trace_;
  MessagePool pool_;
  std::uint64_t step_ = 0;
  std::uint64_t next_id_ = 0;
  std::uint64_t max_observed_age_ = 0;
  std::function<void(const PendingMessage&)> on_deliver_;
};

// ---------------------------------------------------------------------------
// Byzantine behaviors

enum class Behavior { Honest, Crash, Mute, Equivocate, Withhold, Garbage };

inline std::string_view to_string(Behavior b) {
  switch (b) {
    case Behavior::Honest: return "none";
    case Behavior::Crash: return "crash";
    case Behavior::Mute: return "mute";
    case Behavior::Equivocate: return "equivocate";
    case Behavior::Withhold: return "withhold";
    case Behavior::Garbage: return "garbage";
  }
  return "unknown";
}

inline Behavior behavior_from_string(std::string_view s) {
  if (s == "none" || s == "honest") return Behavior::Honest;
  if (s == "crash") return Behavior::Crash;
  if (s == "mute") return Behavior::Mute;
  if (s == "equivocate") return Behavior::Equivocate;
  if (s == "withhold" || s == "withhold-proposal") return Behavior::Withhold;
  if (s == "garbage") return Behavior::Garbage;
  throw Error(ErrorCode::ConfigInvalid, "unknown adversary '" + std::string(s) + "'");
}

class Agent {
 public:
  virtual ~Agent() = default;
  virtual void start(Outbox& out) = 0;
  virtual void handle(const Message& msg, Outbox& out) = 0;
  virtual bool done() const = 0;
  virtual bool honest() const = 0;
  virtual const Party& party() const = 0;
};

class HonestAgent final : public Agent {
 public:
  HonestAgent(const ThresholdCrypto& crypto, const ProtocolParams& params, PartyId self,
              std::vector<Request> workload, std::uint32_t epochs)
      : party_(crypto, params, self, std::move(workload), epochs) {}

  void start(Outbox& out) override { party_.start_epoch(0, out); }
  void handle(const Message& msg, Outbox& out) override { party_.handle(msg, out); }
  bool done() const override { return party_.done(); }
  bool honest() const override { return true; }
  const Party& party() const override { return party_; }

 private:
  Party party_;
};

/// Runs the honest state machine and rewrites its outgoing traffic.
class ByzantineAgent final : public Agent {
 public:
  ByzantineAgent(const ThresholdCrypto& crypto, const ProtocolParams& params, PartyId self,
                 std::vector<Request> workload, std::uint32_t epochs, Behavior behavior, std::uint64_t seed,
                 std::uint64_t crash_after)
      : crypto_(&crypto),
        params_(params),
        self_(self),
        core_(crypto, params, self, std::move(workload), epochs),
        behavior_(behavior),
        rng_(seed),
        crash_after_(crash_after) {}

  void start(Outbox& out) override {
    Outbox inner;
    core_.start_epoch(0, inner);
    rewrite(inner, out);
  }

  void handle(const Message& msg, Outbox& out) override {
    ++handled_;
    if (behavior_ == Behavior::Equivocate && msg.kind == MessageKind::PpbAck && collect_alt_ack(msg, out)) return;
    Outbox inner;
    try {
      core_.handle(msg, inner);
    } catch (const Error&) {
      return;
    }
    rewrite(inner, out);
  }

  bool done() const override { return true; }
  bool honest() const override { return false; }
  const Party& party() const override { return core_; }
  Behavior behavior() const { return behavior_; }
  std::size_t alt_proofs() const { return alt_proofs_; }

 private:
  struct AltValue {
    std::uint32_t j = 0;
    Bytes value;
    Digest digest;
    std::map<PartyId, SigShare> shares;
    std::optional<DeliveryProof> proof;
  };

  bool crashed() const { return behavior_ == Behavior::Crash && handled_ >= crash_after_; }

  void rewrite(Outbox& inner, Outbox& out) {
    if (crashed()) return;
    for (const auto& item : inner.order) {
      if (!item.is_message) {
        out.emit(std::move(inner.events[item.index]));
        continue;
      }
      Envelope& env = inner.messages[item.index];
      switch (behavior_) {
        case Behavior::Honest:
        case Behavior::Crash:
          out.send(env.to, std::move(env.msg));
          break;
        case Behavior::Mute:
          break;
        case Behavior::Withhold:
          if (env.msg.kind != MessageKind::Propose) out.send(env.to, std::move(env.msg));
          break;
        case Behavior::Garbage:
          garble(env.msg);
          out.send(env.to, std::move(env.msg));
          break;
        case Behavior::Equivocate:
          equivocate(env, out);
          break;
      }
    }
  }

  void garble(Message& m) {
    for (auto& b : m.body) b = static_cast<std::uint8_t>(rng_());
    if ((m.kind == MessageKind::AbaEst || m.kind == MessageKind::AbaAux) && !m.body.empty()) {
      m.body[0] = static_cast<std::uint8_t>(2 + rng_() % 254);
    }
  }

  bool second_half(PartyId to) const { return to.index >= (params_.n + 1) / 2; }

  void equivocate(Envelope& env, Outbox& out) {
    Message& m = env.msg;
    if (m.kind == MessageKind::PpbSend && ppb_tag_step(m.tag) == 1 && second_half(env.to)) {
      AltValue& alt = alt_for(m, out);
      PpbInstanceId id{m.epoch, self_, 1};
      PpbSendBody body{alt.value, crypto_->sign_share(self_, ppb_statement(id, alt.digest)).share, std::nullopt};
      m.body = body.encode();
    } else if (m.kind == MessageKind::Propose && second_half(env.to)) {
      auto it = alts_.find(m.epoch);
      if (it != alts_.end()) {
        // Alternative ciphertext under the original proof.
        ByteWriter w;
        w.bytes(it->second.value).bytes(ByteView(m.body).last(params_.sec_param));
        m.body = w.take();
      }
    }
    out.send(env.to, std::move(m));
  }

  AltValue& alt_for(const Message& send, Outbox& out) {
    auto it = alts_.find(send.epoch);
    if (it != alts_.end()) return it->second;
    auto body = PpbSendBody::decode(send.body, params_.sec_param, 1);
    AltValue alt;
    alt.value = body.value;
    alt.value.back() ^= 0x01;
    alt.digest = value_digest(alt.value);
    if (const auto* st = core_.epoch_state(send.epoch); st && st->committee) {
      alt.j = static_cast<std::uint32_t>(committee_index(*st->committee, self_).value_or(0));
    }
    PpbInstanceId id{send.epoch, self_, 1};
    alt.shares.emplace(self_, crypto_->sign_share(self_, ppb_statement(id, alt.digest)));
    LocalEvent e{LocalEventKind::Hold};
    e.epoch = send.epoch;
    e.j = static_cast<std::int32_t>(alt.j);
    e.ref = alt.digest.hex();
    e.note = "equivocation";
    out.emit(std::move(e));
    return alts_.emplace(send.epoch, std::move(alt)).first->second;
  }

  // Acks for the alternative value; once sig_t of them exist the adversary
  // holds a second proof and proposes with it.
  bool collect_alt_ack(const Message& msg, Outbox& out) {
    auto it = alts_.find(msg.epoch);
    if (it == alts_.end() || ppb_tag_step(msg.tag) != 1) return false;
    AltValue& alt = it->second;
    PpbInstanceId id{msg.epoch, self_, 1};
    auto statement = ppb_statement(id, alt.digest);
    SigShare share{msg.sender, DealerCrypto::message_digest(statement), msg.body};
    if (!crypto_->verify_share(share)) return false;
    alt.shares.emplace(msg.sender, std::move(share));
    auto sig_t = derive_thresholds(params_).sig_t;
    if (alt.proof || alt.shares.size() < sig_t || params_.promotion_steps != 1) return true;
    std::vector<SigShare> shares;
    for (const auto& [_, s] : alt.shares) shares.push_back(s);
    alt.proof = DeliveryProof{id, alt.digest, crypto_->combine_signature(statement, shares, sig_t)};
    ++alt_proofs_;
    LocalEvent e{LocalEventKind::Proof};
    e.epoch = msg.epoch;
    e.tag = ppb_tag(self_, 1);
    e.ref = alt.digest.hex();
    e.note = "formed";
    for (auto p : alt.proof->sig.signers) e.set.push_back(p.index);
    out.emit(std::move(e));
    Proposal p{msg.epoch, alt.j, self_, Ciphertext{msg.epoch, self_, alt.value}, *alt.proof};
    out.multicast(params_.n, Message{MessageKind::Propose, msg.epoch, self_, alt.j, encode_proposal_body(p, false)});
    return true;
  }

  const ThresholdCrypto* crypto_;
  ProtocolParams params_;
  PartyId self_;
  Party core_;
  Behavior behavior_;
  std::mt19937_64 rng_;
  std::uint64_t crash_after_;
  std::uint64_t handled_ = 0;
  std::map<Epoch, AltValue> alts_;
  std::size_t alt_proofs_ = 0;
};

// ---------------------------------------------------------------------------
// Simulation configuration and entry point

enum class Placement { Last, Committee };

struct SimConfig {
  ProtocolParams params;
  std::uint32_t epochs = 1;
  std::uint32_t payload_bytes = 32;
  SchedulerConfig scheduler;
  std::map<PartyId, Behavior> byzantine;
  std::optional<std::uint64_t> crash_after;  // inbound messages handled before a crash
  std::uint64_t max_steps = 0;                // 0 -> 10,000 * n * epochs
  bool record_trace = true;

  std::uint64_t step_cap() const { return max_steps ? max_steps : 10'000ull * params.n * epochs; }
};

inline void validate_sim_config(const SimConfig& c) {
  validate_params(c.params.n, c.params.f, c.params.kappa, c.params.batch_size, c.params.sec_param, c.params.seed,
                  c.params.promotion_steps);
  if (c.epochs == 0) throw Error(ErrorCode::ConfigInvalid, "epochs must be positive");
  if (c.byzantine.size() > c.params.f) throw Error(ErrorCode::ConfigInvalid, "more than f Byzantine parties");
  for (const auto& [p, _] : c.byzantine) {
    if (p.index >= c.params.n) throw Error(ErrorCode::ConfigInvalid, "Byzantine party out of range");
  }
  if (c.payload_bytes > c.params.max_payload) throw Error(ErrorCode::PayloadTooLarge, "payload over limit");
  if (c.scheduler.target && c.scheduler.target->index >= c.params.n) {
    throw Error(ErrorCode::ConfigInvalid, "scheduler target out of range");
  }
}

/// Committee of `epoch` as every honest party will compute it.
inline Committee predict_committee(const ThresholdCrypto& crypto, const ProtocolParams& params, Epoch epoch) {
  std::vector<CoinShare> shares;
  for (std::uint32_t i = 0; i < crypto.coin_t(); ++i) {
    shares.push_back(crypto.coin_share(PartyId{static_cast<std::uint16_t>(i)}, committee_coin_id(epoch)));
  }
  return crypto.coin_toss(committee_coin_id(epoch), shares, params.kappa);
}

/// Marks `count` parties Byzantine. Committee placement prefers members of
/// the epoch-0 committee, then the highest indices.
inline void assign_byzantine(SimConfig& c, const ThresholdCrypto& crypto, Behavior b, std::uint32_t count,
                             Placement placement) {
  c.byzantine.clear();
  if (b == Behavior::Honest) return;
  std::vector<PartyId> order;
  if (placement == Placement::Committee) order = predict_committee(crypto, c.params, 0);
  for (std::uint32_t i = c.params.n; i-- > 0;) {
    PartyId p{static_cast<std::uint16_t>(i)};
    if (std::find(order.begin(), order.end(), p) == order.end()) order.push_back(p);
  }
  for (std::uint32_t i = 0; i < count && i < order.size(); ++i) c.byzantine[order[i]] = b;
}

/// Distinct requests per party: epochs * batch_size of them, payload_bytes each.
inline std::vector<Request> make_workload(const SimConfig& c, PartyId p) {
  std::vector<Request> reqs;
  Digest seed = Hasher("workload").u64(c.params.seed).finish();
  for (std::uint32_t e = 0; e < c.epochs; ++e) {
    for (std::uint32_t i = 0; i < c.params.batch_size; ++i) {
      std::string tag = "p" + std::to_string(p.index) + "-e" + std::to_string(e) + "-r" + std::to_string(i);
      reqs.push_back({tag, expand(seed, tag, c.payload_bytes)});
    }
  }
  return reqs;
}

struct SimResult {
  Trace trace;
  std::vector<std::vector<DeliveredBlock>> blocks;
  std::vector<bool> honest;
  std::uint64_t steps = 0;
  std::uint64_t messages = 0;
  std::uint64_t max_observed_age = 0;
  std::size_t alt_proofs = 0;
  bool timed_out = false;
};

/// Runs one simulation. A hit on the step cap is reported in `timed_out`.
inline SimResult simulate(const SimConfig& c) {
  validate_sim_config(c);
  DealerCrypto crypto(DealerSetup::generate(c.params));

  auto seed_word = [&](std::string_view domain) {
    auto d = Hasher(domain).u64(c.params.seed).finish();
    return ByteReader(d.view()).u64();
  };
  std::mt19937_64 setup_rng(seed_word("byzantine"));

  SimResult r;
  r.trace.meta.n = c.params.n;
  r.trace.meta.f = c.params.f;
  r.trace.meta.kappa = c.params.kappa;
  r.trace.meta.sec_param = c.params.sec_param;
  r.trace.meta.batch_size = c.params.batch_size;
  r.trace.meta.payload_bytes = c.payload_bytes;
  r.trace.meta.promotion_steps = c.params.promotion_steps;
  r.trace.meta.epochs = c.epochs;
  r.trace.meta.seed = c.params.seed;
  r.trace.meta.scheduler = std::string(to_string(c.scheduler.kind));
  r.trace.meta.max_steps = c.step_cap();

  std::vector<std::unique_ptr<Agent>> agents;
  for (std::uint32_t i = 0; i < c.params.n; ++i) {
    PartyId p{static_cast<std::uint16_t>(i)};
    auto it = c.byzantine.find(p);
    if (it == c.byzantine.end() || it->second == Behavior::Honest) {
      agents.push_back(std::make_unique<HonestAgent>(crypto, c.params, p, make_workload(c, p), c.epochs));
      r.trace.meta.roles.push_back("honest");
    } else {
      std::uint64_t crash_after = c.crash_after ? *c.crash_after : setup_rng() % (4ull * c.params.n);
      agents.push_back(std::make_unique<ByzantineAgent>(crypto, c.params, p, make_workload(c, p), c.epochs,
                                                        it->second, setup_rng(), crash_after));
      r.trace.meta.roles.push_back(std::string(to_string(it->second)));
    }
    r.honest.push_back(r.trace.meta.roles.back() == "honest");
  }

  Network<Agent> net(std::move(agents), c.scheduler, seed_word("scheduler"), c.record_trace ? &r.trace : nullptr);
  net.start();
  auto outcome = net.run(c.step_cap());

  r.steps = outcome.steps;
  r.timed_out = outcome.timed_out;
  r.messages = net.messages_sent();
  r.max_observed_age = net.max_observed_age();
  r.trace.meta.steps = outcome.steps;
  r.trace.meta.timed_out = outcome.timed_out;
  for (std::size_t i = 0; i < net.size(); ++i) {
    r.blocks.push_back(net.node(i).party().delivered());
    if (auto* byz = dynamic_cast<const ByzantineAgent*>(&net.node(i))) r.alt_proofs += byz->alt_proofs();
  }
  return r;
}

/// As `simulate`, but a liveness failure raises LivenessTimeout.
inline SimResult run_simulation(const SimConfig& c) {
  SimResult r = simulate(c);
  if (r.timed_out) {
    throw Error(ErrorCode::LivenessTimeout, "max_steps reached before all honest parties delivered (seed " +
                                                std::to_string(c.params.seed) + ")");
  }
  return r;
}

// ---------------------------------------------------------------------------
// Standalone binary agreement over the simulator

/// One ABA instance as a network node with a fixed input.
class AbaNode {
 public:
  AbaNode(const ThresholdCrypto& crypto, const ProtocolParams& params, PartyId self, std::optional<bool> input,
          bool faulty)
      : aba_(crypto, params, self, 0, 0), input_(input), faulty_(faulty) {}

  void start(Outbox& out) {
    if (faulty_ || !input_) return;
    aba_.input(*input_, *input_, out);
  }
  void handle(const Message& msg, Outbox& out) {
    if (faulty_) return;
    aba_.handle(msg, out);
  }
  bool done() const { return aba_.decided().has_value(); }
  bool honest() const { return !faulty_; }
  const BinaryAgreement& aba() const { return aba_; }
  std::optional<bool> input() const { return input_; }

 private:
  BinaryAgreement aba_;
  std::optional<bool> input_;
  bool faulty_;
};

struct AbaRun {
  std::vector<std::optional<bool>> decisions;  // per party, nullopt for faulty
  std::vector<std::uint32_t> rounds;           // per honest decision
  std::vector<bool> honest_inputs;
  bool timed_out = false;
  bool agreement = true;
  bool validity = true;
};

/// Single ABA instance with `inputs` (nullopt = crashed from the start).
inline AbaRun run_aba(const ProtocolParams& params, const std::vector<std::optional<bool>>& inputs,
                      std::uint64_t seed, SchedulerConfig sched = {}) {
  DealerCrypto crypto(DealerSetup::generate(params));
  std::vector<std::unique_ptr<AbaNode>> nodes;
  for (std::uint32_t i = 0; i < params.n; ++i) {
    nodes.push_back(std::make_unique<AbaNode>(crypto, params, PartyId{static_cast<std::uint16_t>(i)}, inputs[i],
                                              !inputs[i].has_value()));
  }
  Network<AbaNode> net(std::move(nodes), sched, seed);
  net.start();
  auto outcome = net.run(200'000ull * params.n, false);
  AbaRun r;
  r.timed_out = outcome.timed_out;
  std::optional<bool> first;
  for (std::size_t i = 0; i < net.size(); ++i) {
    const auto& node = net.node(i);
    if (!node.honest()) {
      r.decisions.push_back(std::nullopt);
      continue;
    }
    r.honest_inputs.push_back(*node.input());
    auto d = node.aba().decided();
    r.decisions.push_back(d);
    if (!d) continue;
    r.rounds.push_back(node.aba().decided_round());
    if (first && *first != *d) r.agreement = false;
    first = d;
  }
  if (first) {
    bool input_seen = false;
    for (bool in : r.honest_inputs) input_seen |= in == *first;
    r.validity = input_seen;
  }
  return r;
}

}  // namespace slim_hbbft
