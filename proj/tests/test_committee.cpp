#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "slim_hbbft/committee.hpp"

using namespace slim_hbbft;

namespace {

double choose(std::uint32_t n, std::uint32_t k) {
  if (k > n) return 0.0;
  double r = 1.0;
  for (std::uint32_t i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

PartyId P(std::uint32_t i) { return PartyId{static_cast<std::uint16_t>(i)}; }

// Runs selection for all parties, delivering shares in a shuffled order.
std::vector<Committee> run_selection(const DealerCrypto& crypto, const ProtocolParams& params, Epoch epoch,
                                     std::uint64_t shuffle_seed) {
  std::vector<CommitteeSelection> parties;
  std::vector<Envelope> pending;
  for (std::uint32_t i = 0; i < params.n; ++i) {
    parties.emplace_back(crypto, params, P(i), epoch);
    Outbox out;
    parties.back().start(out);
    pending.insert(pending.end(), out.messages.begin(), out.messages.end());
  }
  std::mt19937_64 rng(shuffle_seed);
  std::shuffle(pending.begin(), pending.end(), rng);
  std::vector<Committee> result(params.n);
  for (const auto& env : pending) {
    Outbox out;
    if (auto c = parties[env.to.index].handle_share(env.msg, out)) result[env.to.index] = *c;
  }
  return result;
}

}  // namespace

TEST(Committee, AllPartiesAgreeRegardlessOfArrivalOrder) {
  for (std::uint32_t f : {1u, 2u, 3u}) {
    auto params = validate_params(3 * f + 1, f, f + 1, 1, 32, 8);
    DealerCrypto crypto(DealerSetup::generate(params));
    for (Epoch e = 0; e < 5; ++e) {
      auto a = run_selection(crypto, params, e, 1);
      auto b = run_selection(crypto, params, e, 2);
      for (std::uint32_t i = 0; i < params.n; ++i) {
        ASSERT_EQ(a[i].size(), params.kappa);
        EXPECT_EQ(a[i], a[0]);
        EXPECT_EQ(b[i], a[0]);
      }
    }
  }
}

TEST(Committee, ReturnsOnceAndRejectsDuplicateStart) {
  auto params = validate_params(4, 1, 2, 1, 32, 0);
  DealerCrypto crypto(DealerSetup::generate(params));
  CommitteeSelection sel(crypto, params, P(0), 3);
  Outbox out;
  sel.start(out);
  EXPECT_EQ(out.count(MessageKind::CoinShare), 4u);
  try {
    sel.start(out);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DuplicateStart);
  }
  int returned = 0;
  for (std::uint32_t i = 0; i < 4; ++i) {
    Message m{MessageKind::CoinShare, 3, P(i), 0, crypto.coin_share(P(i), committee_coin_id(3)).share};
    returned += sel.handle_share(m, out).has_value();
  }
  EXPECT_EQ(returned, 1);
  EXPECT_EQ(sel.share_count(), 4u);
}

TEST(Committee, InvalidAndDuplicateSharesAreDropped) {
  auto params = validate_params(4, 1, 2, 1, 32, 0);
  DealerCrypto crypto(DealerSetup::generate(params));
  CommitteeSelection sel(crypto, params, P(0), 0);
  Outbox out;
  Message good{MessageKind::CoinShare, 0, P(1), 0, crypto.coin_share(P(1), committee_coin_id(0)).share};
  Message wrong_epoch{MessageKind::CoinShare, 0, P(2), 0, crypto.coin_share(P(2), committee_coin_id(1)).share};
  Message short_body{MessageKind::CoinShare, 0, P(3), 0, Bytes(5, 0)};
  EXPECT_FALSE(sel.handle_share(good, out));
  EXPECT_FALSE(sel.handle_share(good, out));
  EXPECT_FALSE(sel.handle_share(wrong_epoch, out));
  EXPECT_FALSE(sel.handle_share(short_body, out));
  EXPECT_EQ(sel.share_count(), 1u);
  EXPECT_EQ(sel.invalid_count(), 2u);
  EXPECT_EQ(out.drops(), 3u);
  EXPECT_FALSE(sel.committee().has_value());
}

// With kappa = f + 1 no choice of f corrupted parties covers a committee.
TEST(Committee, FPlusOneAlwaysContainsHonestParty) {
  for (std::uint32_t f : {1u, 2u, 3u}) {
    std::uint32_t n = 3 * f + 1;
    EXPECT_EQ(choose(f, f + 1), 0.0);
    for (std::uint64_t s = 0; s < 300; ++s) {
      auto seed = Hasher("committee-test").u64(s).finish();
      auto c = ThresholdCrypto::permutation_prefix(seed, n, f + 1);
      std::set<PartyId> uniq(c.begin(), c.end());
      EXPECT_EQ(uniq.size(), f + 1);
    }
  }
}

// Frequency of all-corrupt committees against the exact hypergeometric value.
TEST(Committee, AllCorruptFrequencyMatchesHypergeometric) {
  const std::uint32_t n = 7, f = 2, kappa = 2, trials = 20000;
  const double p = choose(f, kappa) / choose(n, kappa);
  EXPECT_NEAR(p, 1.0 / 21.0, 1e-12);
  std::uint32_t hits = 0;
  for (std::uint32_t s = 0; s < trials; ++s) {
    auto c = ThresholdCrypto::permutation_prefix(Hasher("mc").u64(s).finish(), n, kappa);
    hits += std::all_of(c.begin(), c.end(), [](PartyId q) { return q.index >= n - f; });
  }
  double sigma = std::sqrt(trials * p * (1 - p));
  EXPECT_LE(std::abs(hits - trials * p), 3 * sigma);
}

TEST(Committee, LeaderElectionAgreesAcrossSubsets) {
  auto params = validate_params(7, 2, 3, 1, 32, 5);
  DealerCrypto crypto(DealerSetup::generate(params));
  std::vector<CoinShare> all;
  for (std::uint32_t i = 0; i < 7; ++i) all.push_back(crypto.coin_share(P(i), leader_coin_id(4)));
  auto leader = elect_leader(crypto, 4, std::span(all).subspan(0, 3));
  EXPECT_EQ(elect_leader(crypto, 4, std::span(all).subspan(4, 3)), leader);
  EXPECT_LT(leader.index, 7);
}

TEST(Committee, IndexLookup) {
  Committee c{P(4), P(1)};
  EXPECT_EQ(committee_index(c, P(1)), std::optional<std::size_t>(1));
  EXPECT_FALSE(committee_index(c, P(0)).has_value());
}
