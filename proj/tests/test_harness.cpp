#include <gtest/gtest.h>

#include <cmath>

#include "slim_hbbft/harness.hpp"

using namespace slim_hbbft;

namespace {

double choose(std::uint32_t n, std::uint32_t k) {
  if (k > n) return 0.0;
  double r = 1.0;
  for (std::uint32_t i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

Trace honest_trace(std::uint32_t f = 1, std::uint64_t seed = 3, std::uint32_t epochs = 1) {
  SimConfig c;
  c.params = validate_params(3 * f + 1, f, f + 1, 2, 32, seed);
  c.epochs = epochs;
  auto r = simulate(c);
  EXPECT_FALSE(r.timed_out);
  return r.trace;
}

std::size_t first_index(const Trace& t, LocalEventKind k) {
  for (std::size_t i = 0; i < t.events.size(); ++i) {
    if (t.events[i].is(k)) return i;
  }
  ADD_FAILURE() << "no " << to_string(k) << " event";
  return 0;
}

const Counterexample* find(const LemmaReport& r, const std::string& property) {
  for (const auto& c : r.counterexamples) {
    if (c.property == property) return &c;
  }
  return nullptr;
}

}  // namespace

TEST(Baseline, KnownValues) {
  EXPECT_DOUBLE_EQ(baseline_bytes(4, 256, 32), 8192.0);
  EXPECT_DOUBLE_EQ(baseline_bytes(4, 256, 0), 4096.0);
  EXPECT_DOUBLE_EQ(baseline_bytes(8, 0, 32) / baseline_bytes(4, 0, 32), 12.0);
  EXPECT_THROW(baseline_bytes(3, 1, 1), Error);
}

TEST(Baseline, AllByzantineProbabilityMatchesBinomialRatio) {
  EXPECT_NEAR(all_byzantine_probability(7, 2, 2), 1.0 / 21.0, 1e-15);
  for (std::uint32_t f = 1; f <= 6; ++f) {
    std::uint32_t n = 3 * f + 1;
    for (std::uint32_t k = 1; k <= f + 1; ++k) {
      EXPECT_NEAR(all_byzantine_probability(n, f, k), choose(f, k) / choose(n, k), 1e-12);
    }
    EXPECT_EQ(all_byzantine_probability(n, f, f + 1), 0.0);
  }
}

TEST(Metrics, PhasesSumToTotalsAndMatchSends) {
  auto t = honest_trace(2, 4, 2);
  auto m = compute_metrics(t);
  std::uint64_t msgs = 0, bytes = 0, sends = 0, send_bytes = 0;
  for (const auto& p : m.phases) {
    msgs += p.messages;
    bytes += p.bytes;
  }
  for (const auto& e : t.events) {
    if (e.type != TraceEventType::Send) continue;
    ++sends;
    send_bytes += e.bytes;
  }
  EXPECT_EQ(msgs, m.total_messages);
  EXPECT_EQ(bytes, m.total_bytes);
  EXPECT_EQ(sends, m.total_messages);
  EXPECT_EQ(send_bytes, m.total_bytes);
  EXPECT_GE(m.mean_aba_rounds, 1.0);
  EXPECT_DOUBLE_EQ(m.baseline, 2 * (49.0 * 2 * 32 + 32 * 343 * std::log2(7.0)));
}

TEST(Metrics, PhaseClassification) {
  EXPECT_EQ(phase_of(MessageKind::CoinShare), Phase::Committee);
  EXPECT_EQ(phase_of(MessageKind::PpbSend), Phase::Ppb);
  EXPECT_EQ(phase_of(MessageKind::PpbAck), Phase::Ppb);
  EXPECT_EQ(phase_of(MessageKind::Propose), Phase::Propose);
  EXPECT_EQ(phase_of(MessageKind::Suggest), Phase::Suggest);
  EXPECT_EQ(phase_of(MessageKind::AbaEst), Phase::Aba);
  EXPECT_EQ(phase_of(MessageKind::AbaCoinShare), Phase::Aba);
  EXPECT_EQ(phase_of(MessageKind::ProposalEcho), Phase::Echo);
  EXPECT_EQ(phase_of(MessageKind::DecShare), Phase::Decrypt);
}

TEST(ByteAccounting, HonestRunIsExactAndTamperingIsCaught) {
  auto t = honest_trace(1, 5, 2);
  EXPECT_TRUE(check_byte_accounting(t).empty());
  for (auto& e : t.events) {
    if (e.type == TraceEventType::Send && e.kind == MessageKind::AbaAux) {
      e.bytes += 1;
      break;
    }
  }
  EXPECT_FALSE(check_byte_accounting(t).empty());
}

TEST(Lemmas, HonestRunsSatisfyAll) {
  for (std::uint32_t f : {1u, 2u}) {
    for (std::uint64_t seed = 0; seed < 4; ++seed) {
      auto r = check_lemmas(honest_trace(f, seed, 2));
      EXPECT_TRUE(r.all_hold());
      EXPECT_TRUE(r.counterexamples.empty());
    }
  }
}

TEST(Lemmas, EarlyDecryptionReleaseIsCensorship) {
  auto t = honest_trace();
  std::size_t rel = first_index(t, LocalEventKind::DecShareRelease);
  std::size_t dec = first_index(t, LocalEventKind::Decide);
  ASSERT_LT(dec, rel);
  TraceEvent early = t.events[rel];
  t.events.insert(t.events.begin() + dec, early);
  auto r = check_lemmas(t);
  EXPECT_FALSE(r.censorship_ordering_holds);
  ASSERT_TRUE(find(r, "censorship"));
  EXPECT_EQ(find(r, "censorship")->event_index, dec);
}

TEST(Lemmas, ScatteredHoldsBreakLemmaOneAndTwo) {
  auto t = honest_trace();
  for (auto& e : t.events) {
    if (e.is(LocalEventKind::Hold)) e.local->ref += "-" + std::to_string(e.party);
  }
  auto r = check_lemmas(t);
  EXPECT_FALSE(r.lemma1_holds);
  EXPECT_FALSE(r.lemma2_holds);
  ASSERT_TRUE(find(r, "lemma2"));
  EXPECT_EQ(find(r, "lemma2")->event_index, first_index(t, LocalEventKind::SuggestQuorum));
  const auto* l1 = find(r, "lemma1");
  ASSERT_TRUE(l1);
  EXPECT_TRUE(t.events[l1->event_index].is(LocalEventKind::Hold));
}

TEST(Lemmas, MissingHoldsBeforeQuorumBreakLemmaTwo) {
  auto t = honest_trace(2, 1);
  std::size_t quorum = first_index(t, LocalEventKind::SuggestQuorum);
  std::vector<TraceEvent> kept;
  for (std::size_t i = 0; i < t.events.size(); ++i) {
    if (i < quorum && t.events[i].is(LocalEventKind::Hold)) continue;
    kept.push_back(t.events[i]);
  }
  t.events = kept;
  auto r = check_lemmas(t);
  EXPECT_FALSE(r.lemma2_holds);
  EXPECT_EQ(find(r, "lemma2")->event_index, first_index(t, LocalEventKind::SuggestQuorum));
}

TEST(Lemmas, DivergentBlocksAndDecisionsAreFlagged) {
  auto base = honest_trace();
  {
    auto t = base;
    std::size_t last = 0;
    for (std::size_t i = 0; i < t.events.size(); ++i) {
      if (t.events[i].is(LocalEventKind::DeliverBlock)) last = i;
    }
    t.events[last].local->ref = "ff";
    auto r = check_lemmas(t);
    EXPECT_FALSE(r.agreement_holds);
    EXPECT_EQ(find(r, "agreement")->event_index, last);
  }
  {
    auto t = base;
    std::size_t i = first_index(t, LocalEventKind::Decide);
    std::size_t second = i + 1;
    while (!(t.events[second].is(LocalEventKind::Decide) && t.events[second].local->j == t.events[i].local->j)) {
      ++second;
    }
    t.events[second].local->bit ^= 1;
    auto r = check_lemmas(t);
    EXPECT_FALSE(r.aba_agreement_holds);
    EXPECT_EQ(find(r, "aba_agreement")->event_index, second);
  }
  {
    auto t = base;
    std::size_t i = first_index(t, LocalEventKind::DeliverBlock);
    t.events[i].local->set.clear();
    t.events[i].local->refs.clear();
    EXPECT_FALSE(check_lemmas(t).validity_holds);
  }
  {
    auto t = base;
    std::size_t i = first_index(t, LocalEventKind::DeliverBlock);
    t.events.erase(t.events.begin() + i);
    auto r = check_lemmas(t);
    EXPECT_FALSE(r.totality_holds);
  }
}

TEST(Lemmas, ForgedProofAndMisdirectedAckAreFlagged) {
  auto base = honest_trace();
  {
    auto t = base;
    std::size_t i = first_index(t, LocalEventKind::Proof);
    TraceEvent twin = t.events[i];
    twin.local->ref = "00" + twin.local->ref.substr(2);
    if (twin.local->ref == t.events[i].local->ref) twin.local->ref = "11" + twin.local->ref.substr(2);
    t.events.insert(t.events.begin() + i + 1, twin);
    auto r = check_lemmas(t);
    EXPECT_FALSE(r.proof_uniqueness_holds);
    EXPECT_EQ(find(r, "proof_uniqueness")->event_index, i + 1);
  }
  {
    auto t = base;
    std::size_t c = first_index(t, LocalEventKind::Committee);
    const auto& committee = t.events[c].local->set;
    std::uint16_t outsider = 0;
    while (std::find(committee.begin(), committee.end(), outsider) != committee.end()) ++outsider;
    std::size_t i = first_index(t, LocalEventKind::Ack);
    ASSERT_GT(i, c);
    t.events[i].local->peer = PartyId{outsider};
    EXPECT_FALSE(check_lemmas(t).prioritization_holds);
  }
}

TEST(Lemmas, DecidedBitMustBeSomeHonestInput) {
  auto t = honest_trace();
  // Relabel every input of one instance to the opposite of its decision.
  std::size_t d = first_index(t, LocalEventKind::Decide);
  auto j = t.events[d].local->j;
  int bit = t.events[d].local->bit;
  for (auto& e : t.events) {
    if (e.is(LocalEventKind::Input) && e.local->j == j) e.local->bit = 1 - bit;
  }
  auto r = check_lemmas(t);
  EXPECT_FALSE(r.aba_validity_holds);
  EXPECT_EQ(find(r, "aba_validity")->event_index, d);
}

TEST(Lemmas, MalformedTracesRaise) {
  auto base = honest_trace();
  auto expect_malformed = [](const Trace& t) {
    try {
      check_lemmas(t);
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::TraceMalformed);
    }
  };
  {
    auto t = base;
    for (std::size_t i = 0; i < t.events.size(); ++i) {
      if (t.events[i].type == TraceEventType::Send) {
        t.events.erase(t.events.begin() + i);
        break;
      }
    }
    expect_malformed(t);
  }
  {
    auto t = base;
    t.meta.roles.pop_back();
    expect_malformed(t);
  }
  {
    auto t = base;
    t.events[0].party = 99;
    expect_malformed(t);
  }
}

TEST(Config, ParsesSectionsListsAndRanges) {
  auto cfg = parse_experiment(R"(
threads = 3
# comment
[a]
n = 4, 7
seeds = 1..5
kappa = f+1
adversaries = crash, withhold-proposal
scheduler = targeted-delay
epochs = 2

[b]
n = 10
seed = 9
kappa = 2
k = 16
batch_size = 4
payload_bytes = 8
promotion_steps = 4
max_steps = 1000
)");
  EXPECT_EQ(cfg.threads, 3u);
  ASSERT_EQ(cfg.sweeps.size(), 2u);
  const auto& a = cfg.sweeps[0];
  EXPECT_EQ(a.ns, (std::vector<std::uint32_t>{4, 7}));
  EXPECT_EQ(a.seeds, (std::vector<std::uint64_t>{1, 2, 3, 4, 5}));
  EXPECT_FALSE(a.kappa.has_value());
  EXPECT_EQ(a.adversaries, (std::vector<std::string>{"crash", "withhold-proposal"}));
  EXPECT_EQ(a.scheduler, "targeted-delay");
  const auto& b = cfg.sweeps[1];
  EXPECT_EQ(b.kappa, std::optional<std::uint32_t>(2));
  EXPECT_EQ(b.sec_param, 16u);
  EXPECT_EQ(b.promotion_steps, 4u);
  EXPECT_EQ(b.max_steps, 1000u);

  auto cells = expand_cells(cfg);
  EXPECT_EQ(cells.size(), 2u * 2 * 5 + 1);
  EXPECT_EQ(cells[0].kappa, 2u);
  EXPECT_EQ(cells.back().kappa, 2u);
  EXPECT_EQ(cells.back().f, 3u);
}

TEST(Config, RejectsBadInput) {
  auto code = [](std::string_view text) {
    try {
      parse_experiment(text);
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::Malformed;  // sentinel: nothing raised
  };
  EXPECT_EQ(code(""), ErrorCode::ConfigInvalid);
  EXPECT_EQ(code("n = 4\n"), ErrorCode::ConfigInvalid);
  EXPECT_EQ(code("n = 5\nseeds = 1\n"), ErrorCode::NotThreeFPlusOne);
  EXPECT_EQ(code("n = 4\nseeds = 1\ncolour = red\n"), ErrorCode::ConfigInvalid);
  EXPECT_EQ(code("n = 4\nseeds = 1\nadversary = sneaky\n"), ErrorCode::ConfigInvalid);
  EXPECT_EQ(code("n = 4\nseeds = 1\nscheduler = chaos\n"), ErrorCode::ConfigInvalid);
  EXPECT_EQ(code("[broken\nn = 4\nseeds = 1\n"), ErrorCode::ConfigInvalid);
  EXPECT_EQ(code("n = 4\nseeds = x\n"), ErrorCode::ConfigInvalid);
  EXPECT_EQ(code("n 4\n"), ErrorCode::ConfigInvalid);
  EXPECT_THROW(load_experiment("/nonexistent/config.ini"), Error);
}

TEST(Experiment, LogLogSlopeOfPowerLaw) {
  std::vector<double> xs{4, 7, 10, 13}, ys;
  for (double x : xs) ys.push_back(5.0 * std::pow(x, 2.5));
  EXPECT_NEAR(loglog_slope(xs, ys), 2.5, 1e-12);
  EXPECT_EQ(loglog_slope({3, 3}, {1, 2}), 0.0);
}

TEST(Experiment, CsvShapeAndThreadIndependence) {
  auto cfg = parse_experiment("threads = 1\nn = 4, 7\nseeds = 1..3\nadversaries = none, crash\nbatch_size = 2\n");
  auto one = run_experiment(cfg);
  cfg.threads = 2;
  auto two = run_experiment(cfg);
  auto csv = results_csv(one);
  EXPECT_EQ(csv, results_csv(two));
  EXPECT_EQ(phases_csv(one), phases_csv(two));
  std::size_t lines = std::count(csv.begin(), csv.end(), '\n');
  EXPECT_EQ(lines, 1 + 12 + 2);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), kCsvHeader);
  auto phases = phases_csv(one);
  EXPECT_EQ(std::size_t(std::count(phases.begin(), phases.end(), '\n')), 1 + 12 * kPhaseCount);
  for (const auto& c : one.cells) {
    EXPECT_TRUE(c.lemmas.all_hold()) << c.cell.id();
    EXPECT_TRUE(c.byte_errors.empty()) << c.cell.id();
  }
  ASSERT_EQ(one.summary.size(), 2u);
  EXPECT_GT(one.summary[1].mean_bytes, one.summary[0].mean_bytes);
}

TEST(Experiment, CellConfigPlacesAdversaryAndTarget) {
  Cell cell{7, 2, 3, 4, "crash", 1, {}};
  cell.spec.scheduler = "targeted-delay";
  auto s = cell_config(cell);
  EXPECT_EQ(s.byzantine.size(), 2u);
  ASSERT_TRUE(s.scheduler.target.has_value());
  EXPECT_FALSE(s.byzantine.contains(*s.scheduler.target));
  DealerCrypto crypto(DealerSetup::generate(s.params));
  auto committee = predict_committee(crypto, s.params, 0);
  EXPECT_NE(std::find(committee.begin(), committee.end(), *s.scheduler.target), committee.end());
}
