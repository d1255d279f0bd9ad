#include <gtest/gtest.h>

#include <numeric>
#include <unordered_map>

#include "slim_hbbft/sim.hpp"

using namespace slim_hbbft;

namespace {

PartyId P(std::uint32_t i) { return PartyId{static_cast<std::uint16_t>(i)}; }

SimConfig base_config(std::uint32_t f, std::uint64_t seed, std::uint32_t epochs = 1) {
  SimConfig c;
  c.params = validate_params(3 * f + 1, f, f + 1, 2, 32, seed);
  c.epochs = epochs;
  return c;
}

SimConfig with_adversary(SimConfig c, Behavior b) {
  DealerCrypto crypto(DealerSetup::generate(c.params));
  assign_byzantine(c, crypto, b, c.params.f, Placement::Committee);
  return c;
}

PendingMessage pending(std::uint64_t id, std::uint64_t enqueued, bool delayed = false) {
  PendingMessage m;
  m.id = id;
  m.enqueued = enqueued;
  m.delayed = delayed;
  return m;
}

bool honest_blocks_agree(const SimResult& r) {
  std::optional<std::size_t> ref;
  for (std::size_t p = 0; p < r.blocks.size(); ++p) {
    if (!r.honest[p]) continue;
    if (!ref) ref = p;
    if (r.blocks[p].size() != r.blocks[*ref].size()) return false;
    for (std::size_t e = 0; e < r.blocks[p].size(); ++e) {
      if (!r.blocks[p][e].same_outcome(r.blocks[*ref][e])) return false;
    }
  }
  return true;
}

}  // namespace

TEST(MessagePool, TakeKeepsIndexesConsistent) {
  MessagePool pool;
  for (std::uint64_t i = 0; i < 10; ++i) pool.push(pending(i, i, i % 3 == 0));
  EXPECT_EQ(pool.normal_count(), 6u);
  EXPECT_EQ(pool.delayed_count(), 4u);
  for (std::uint64_t i : {4u, 0u, 9u, 1u}) EXPECT_EQ(pool.take(i).id, i);
  EXPECT_EQ(pool.oldest(), 2u);
  EXPECT_EQ(pool.newest(), 8u);
  std::set<std::uint64_t> rest;
  for (std::size_t i = 0; i < pool.normal_count(); ++i) rest.insert(pool.normal_at(i));
  for (std::size_t i = 0; i < pool.delayed_count(); ++i) rest.insert(pool.delayed_at(i));
  EXPECT_EQ(rest, (std::set<std::uint64_t>{2, 3, 5, 6, 7, 8}));
  for (auto id : rest) pool.take(id);
  EXPECT_TRUE(pool.empty());
}

TEST(Scheduler, PoliciesPickAsDocumented) {
  MessagePool pool;
  pool.push(pending(0, 0, true));
  pool.push(pending(1, 1));
  pool.push(pending(2, 2));
  std::mt19937_64 rng(1);
  SchedulerConfig adv{SchedulerKind::Adversarial, {}, {}, 0};
  EXPECT_EQ(schedule_next(pool, adv, 3, 100, rng), 2u);
  EXPECT_EQ(schedule_next(pool, adv, 100, 100, rng), 0u);  // overdue oldest is forced
  SchedulerConfig targeted{SchedulerKind::TargetedDelay, P(0), {}, 0};
  for (int i = 0; i < 50; ++i) EXPECT_NE(schedule_next(pool, targeted, 3, 100, rng), 0u);
  pool.take(1);
  pool.take(2);
  EXPECT_EQ(schedule_next(pool, targeted, 3, 100, rng), 0u);
}

TEST(Scheduler, NamesRoundTrip) {
  for (auto k : {SchedulerKind::Fair, SchedulerKind::TargetedDelay, SchedulerKind::Adversarial}) {
    EXPECT_EQ(scheduler_from_string(to_string(k)), k);
  }
  EXPECT_THROW(scheduler_from_string("random"), Error);
  for (auto b : {Behavior::Honest, Behavior::Crash, Behavior::Mute, Behavior::Equivocate, Behavior::Withhold,
                 Behavior::Garbage}) {
    EXPECT_EQ(behavior_from_string(to_string(b)), b);
  }
  EXPECT_EQ(behavior_from_string("withhold-proposal"), Behavior::Withhold);
  EXPECT_THROW(behavior_from_string("sneaky"), Error);
}

TEST(Sim, SameSeedSameTrace) {
  for (auto b : {Behavior::Honest, Behavior::Garbage, Behavior::Equivocate}) {
    auto c = with_adversary(base_config(1, 17, 2), b);
    c.scheduler.kind = SchedulerKind::TargetedDelay;
    auto a = simulate(c), again = simulate(c);
    EXPECT_EQ(a.trace.digest(), again.trace.digest());
    EXPECT_EQ(a.trace.to_jsonl(), again.trace.to_jsonl());
    auto other = c;
    other.params.seed = 18;
    EXPECT_NE(simulate(other).trace.digest(), a.trace.digest());
  }
}

TEST(Sim, RejectsMoreThanFByzantine) {
  auto c = base_config(1, 0);
  c.byzantine[P(0)] = Behavior::Crash;
  c.byzantine[P(1)] = Behavior::Crash;
  try {
    simulate(c);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ConfigInvalid);
  }
  c.byzantine.clear();
  c.byzantine[P(4)] = Behavior::Mute;
  EXPECT_THROW(simulate(c), Error);
  c.byzantine.clear();
  c.epochs = 0;
  EXPECT_THROW(simulate(c), Error);
}

TEST(Sim, CommitteePlacementUsesPredictedCommittee) {
  auto c = base_config(2, 5);
  DealerCrypto crypto(DealerSetup::generate(c.params));
  assign_byzantine(c, crypto, Behavior::Mute, 2, Placement::Committee);
  auto committee = predict_committee(crypto, c.params, 0);
  ASSERT_EQ(c.byzantine.size(), 2u);
  for (const auto& [p, _] : c.byzantine) EXPECT_NE(std::find(committee.begin(), committee.end(), p), committee.end());
  auto r = simulate(c);
  ASSERT_FALSE(r.timed_out);
  for (const auto& e : r.trace.events) {
    if (e.is(LocalEventKind::Committee)) {
      std::vector<std::int32_t> expect;
      for (auto p : committee) expect.push_back(p.index);
      EXPECT_EQ(e.local->set, expect);
      break;
    }
  }
}

// Messages touching the delayed party wait longer on average than the rest.
TEST(Sim, TargetedDelayStarvesTarget) {
  auto c = base_config(1, 3);
  c.scheduler.kind = SchedulerKind::TargetedDelay;
  c.scheduler.target = P(0);
  auto r = simulate(c);
  ASSERT_FALSE(r.timed_out);
  std::unordered_map<std::uint64_t, const TraceEvent*> sends;
  double target_wait = 0, other_wait = 0;
  std::size_t target_n = 0, other_n = 0;
  for (const auto& e : r.trace.events) {
    if (e.type == TraceEventType::Send) sends[e.msg_id] = &e;
    if (e.type != TraceEventType::Deliver) continue;
    const auto* s = sends.at(e.msg_id);
    double wait = double(e.step - s->step);
    if (s->party == 0 || s->peer == 0) {
      target_wait += wait;
      ++target_n;
    } else {
      other_wait += wait;
      ++other_n;
    }
  }
  ASSERT_GT(target_n, 0u);
  EXPECT_GT(target_wait / target_n, other_wait / other_n);
}

TEST(Sim, MessageAgeStaysBounded) {
  for (auto kind : {SchedulerKind::Fair, SchedulerKind::TargetedDelay, SchedulerKind::Adversarial}) {
    auto c = with_adversary(base_config(2, 8, 2), Behavior::Crash);
    c.scheduler.kind = kind;
    auto r = simulate(c);
    ASSERT_FALSE(r.timed_out) << to_string(kind);
    std::uint64_t bound = c.scheduler.age_bound(c.params.n);
    // One overdue message is forced per step, so the excess is at most the
    // number of messages that can become overdue together.
    EXPECT_LE(r.max_observed_age, 2 * bound) << to_string(kind);
    EXPECT_TRUE(honest_blocks_agree(r));
  }
}

TEST(Sim, EveryHonestSendIsDeliveredAfterDrain) {
  auto c = with_adversary(base_config(1, 2, 2), Behavior::Mute);
  auto r = simulate(c);
  ASSERT_FALSE(r.timed_out);
  std::set<std::uint64_t> sent, delivered;
  for (const auto& e : r.trace.events) {
    if (e.type == TraceEventType::Send && r.trace.meta.honest(e.party)) sent.insert(e.msg_id);
    if (e.type == TraceEventType::Deliver) delivered.insert(e.msg_id);
  }
  for (auto id : sent) EXPECT_TRUE(delivered.contains(id)) << id;
}

TEST(Sim, GarbageIsDroppedAndRunCompletes) {
  auto c = with_adversary(base_config(1, 4, 2), Behavior::Garbage);
  auto r = simulate(c);
  ASSERT_FALSE(r.timed_out);
  std::size_t drops = 0;
  for (const auto& e : r.trace.events) {
    if (e.is(LocalEventKind::Drop) && r.trace.meta.honest(e.party)) ++drops;
  }
  EXPECT_GT(drops, 0u);
  EXPECT_TRUE(honest_blocks_agree(r));
}

TEST(Sim, WithholdingProposerStillAllowsDelivery) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    auto c = with_adversary(base_config(1, seed, 2), Behavior::Withhold);
    auto r = simulate(c);
    ASSERT_FALSE(r.timed_out);
    EXPECT_TRUE(honest_blocks_agree(r));
    for (std::size_t p = 0; p < r.blocks.size(); ++p) {
      if (r.honest[p]) EXPECT_EQ(r.blocks[p].size(), 2u);
    }
  }
}

TEST(Sim, EquivocatorCannotSplitHonestParties) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto c = with_adversary(base_config(1, seed, 1), Behavior::Equivocate);
    auto r = simulate(c);
    ASSERT_FALSE(r.timed_out);
    EXPECT_TRUE(honest_blocks_agree(r));
  }
}

TEST(Sim, StepCapReportsTimeout) {
  auto c = base_config(1, 1);
  c.max_steps = 10;
  auto r = simulate(c);
  EXPECT_TRUE(r.timed_out);
  EXPECT_EQ(r.steps, 10u);
  try {
    run_simulation(c);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::LivenessTimeout);
  }
}

TEST(Trace, JsonlRoundTrip) {
  auto c = with_adversary(base_config(1, 6, 2), Behavior::Equivocate);
  auto r = simulate(c);
  auto text = r.trace.to_jsonl();
  auto back = Trace::from_jsonl(text);
  EXPECT_EQ(back.events.size(), r.trace.events.size());
  EXPECT_EQ(back.to_jsonl(), text);
  EXPECT_EQ(back.digest(), r.trace.digest());
  EXPECT_EQ(back.meta.roles, r.trace.meta.roles);
}

TEST(Trace, MalformedInputRejected) {
  auto r = simulate(base_config(1, 1));
  auto text = r.trace.to_jsonl();
  auto expect_malformed = [](const std::string& t) {
    try {
      Trace::from_jsonl(t);
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::TraceMalformed);
    }
  };
  expect_malformed("");
  expect_malformed("not json\n");
  expect_malformed(text.substr(0, text.find('\n') + 1) + "{\"i\":5}\n");
  auto cut = text.find("\"type\":\"send\"");
  ASSERT_NE(cut, std::string::npos);
  std::string bad = text;
  bad.replace(cut, 13, "\"type\":\"boom\"");
  expect_malformed(bad);
}
