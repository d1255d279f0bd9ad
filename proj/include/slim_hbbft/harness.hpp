#pragma once

#include <array>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "slim_hbbft/sim.hpp"

namespace slim_hbbft {

// ---------------------------------------------------------------------------
// Analytic reference

/// n^2 * v + K * n^3 * log2(n), in bytes.
inline double baseline_bytes(std::uint32_t n, double v_bytes, double k) {
  if (n < 4) throw Error(ErrorCode::ConfigInvalid, "baseline needs n >= 4");
  double nn = n;
  return nn * nn * v_bytes + k * nn * nn * nn * std::log2(nn);
}

/// Probability that a uniformly chosen kappa-subset of n parties avoids every
/// honest one: C(f, kappa) / C(n, kappa).
inline double all_byzantine_probability(std::uint32_t n, std::uint32_t f, std::uint32_t kappa) {
  if (kappa > f) return 0.0;
  double p = 1.0;
  for (std::uint32_t i = 0; i < kappa; ++i) p *= double(f - i) / double(n - i);
  return p;
}

// ---------------------------------------------------------------------------
// Metrics

enum class Phase { Committee, Ppb, Propose, Suggest, Aba, Echo, Decrypt };
inline constexpr std::size_t kPhaseCount = 7;

inline const char* to_string(Phase p) {
  switch (p) {
    case Phase::Committee: return "committee";
    case Phase::Ppb: return "ppb";
    case Phase::Propose: return "propose";
    case Phase::Suggest: return "suggest";
    case Phase::Aba: return "aba";
    case Phase::Echo: return "echo";
    case Phase::Decrypt: return "decrypt";
  }
  return "unknown";
}

inline Phase phase_of(MessageKind k) {
  switch (k) {
    case MessageKind::CoinShare: return Phase::Committee;
    case MessageKind::PpbSend:
    case MessageKind::PpbAck: return Phase::Ppb;
    case MessageKind::Propose: return Phase::Propose;
    case MessageKind::Suggest: return Phase::Suggest;
    case MessageKind::AbaEst:
    case MessageKind::AbaAux:
    case MessageKind::AbaCoinShare: return Phase::Aba;
    case MessageKind::ProposalEcho: return Phase::Echo;
    case MessageKind::DecShare: return Phase::Decrypt;
  }
  return Phase::Committee;
}

struct PhaseStats {
  std::uint64_t messages = 0;
  std::uint64_t bytes = 0;
};

struct MetricsReport {
  std::uint32_t n = 0;
  std::uint32_t epochs = 0;
  std::array<PhaseStats, kPhaseCount> phases{};
  std::uint64_t total_messages = 0;
  std::uint64_t total_bytes = 0;
  double baseline = 0;  // for all epochs
  double ratio = 0;     // total_bytes / baseline
  double epsilon_bound = 0;
  double mean_aba_rounds = 0;

  const PhaseStats& phase(Phase p) const { return phases[static_cast<std::size_t>(p)]; }
};

inline MetricsReport compute_metrics(const Trace& t) {
  MetricsReport m;
  m.n = t.meta.n;
  m.epochs = t.meta.epochs;
  std::uint64_t rounds = 0, decisions = 0;
  for (const auto& e : t.events) {
    if (e.type == TraceEventType::Send) {
      auto& ps = m.phases[static_cast<std::size_t>(phase_of(e.kind))];
      ++ps.messages;
      ps.bytes += e.bytes;
      ++m.total_messages;
      m.total_bytes += e.bytes;
    } else if (e.is(LocalEventKind::Decide) && t.meta.honest(e.party)) {
      rounds += e.local->round;
      ++decisions;
    }
  }
  m.mean_aba_rounds = decisions ? double(rounds) / double(decisions) : 0.0;
  if (m.n >= 4) {
    m.baseline = m.epochs * baseline_bytes(m.n, double(t.meta.batch_size) * t.meta.payload_bytes, t.meta.sec_param);
    m.ratio = m.baseline > 0 ? double(m.total_bytes) / m.baseline : 0.0;
  }
  m.epsilon_bound = std::pow(1.0 / 3.0, double(t.meta.kappa));
  return m;
}

/// Checks every send's size against the per-kind formula, and the committee
/// and decryption phases against their closed forms. Returns mismatches.
inline std::vector<std::string> check_byte_accounting(const Trace& t) {
  std::vector<std::string> errs;
  const std::uint64_t k = t.meta.sec_param, n = t.meta.n, h = kHeaderSize;
  std::map<std::pair<Epoch, std::uint16_t>, std::uint64_t> ct_len;  // (epoch, proposer) -> |ct|
  std::map<Epoch, std::uint64_t> q;
  std::map<Epoch, std::vector<std::int32_t>> committees;
  for (const auto& e : t.events) {
    if (e.is(LocalEventKind::DeliverBlock) && t.meta.honest(e.party)) q[e.epoch] = e.local->set.size();
    if (e.is(LocalEventKind::Committee) && t.meta.honest(e.party)) committees.emplace(e.epoch, e.local->set);
    if (e.type == TraceEventType::Send && e.kind == MessageKind::PpbSend) {
      std::uint64_t step = ppb_tag_step(e.tag);
      std::uint64_t fixed = h + k + (step >= 2 ? k : 0);
      if (e.bytes < fixed + k) {
        errs.push_back("PPB_SEND shorter than any ciphertext at event " + std::to_string(e.msg_id));
        continue;
      }
      ct_len.emplace(std::make_pair(e.epoch, e.party), e.bytes - fixed);
    }
  }
  auto mismatch = [&](const TraceEvent& e, std::uint64_t expected) {
    errs.push_back(std::string(to_string(e.kind)) + " msg " + std::to_string(e.msg_id) + ": " +
                   std::to_string(e.bytes) + " bytes, expected " + std::to_string(expected));
  };
  std::map<Epoch, std::uint64_t> committee_bytes, decrypt_bytes;
  for (const auto& e : t.events) {
    if (e.type != TraceEventType::Send) continue;
    std::optional<std::uint64_t> expected;
    switch (e.kind) {
      case MessageKind::CoinShare:
        committee_bytes[e.epoch] += e.bytes;
        expected = h + body_size(e.kind, k);
        break;
      case MessageKind::DecShare:
        decrypt_bytes[e.epoch] += e.bytes;
        expected = h + body_size(e.kind, k);
        break;
      case MessageKind::PpbAck:
      case MessageKind::AbaEst:
      case MessageKind::AbaAux:
      case MessageKind::AbaCoinShare:
        expected = h + body_size(e.kind, k);
        break;
      case MessageKind::PpbSend: {
        auto it = ct_len.find({e.epoch, e.party});
        expected = h + body_size(e.kind, k, it->second, ppb_tag_step(e.tag) >= 2);
        break;
      }
      case MessageKind::Propose:
      case MessageKind::Suggest:
      case MessageKind::ProposalEcho: {
        // The ciphertext is the one committee slot `tag` promoted.
        const auto& c = committees[e.epoch];
        auto proposer = e.tag < c.size() ? ct_len.find({e.epoch, static_cast<std::uint16_t>(c[e.tag])}) : ct_len.end();
        if (proposer == ct_len.end()) {
          errs.push_back(std::string(to_string(e.kind)) + " msg " + std::to_string(e.msg_id) +
                         ": no promoted ciphertext for slot " + std::to_string(e.tag));
          break;
        }
        expected = h + body_size(e.kind, k, proposer->second);
        break;
      }
    }
    if (expected && e.bytes != *expected) mismatch(e, *expected);
  }
  for (Epoch ep = 0; ep < t.meta.epochs; ++ep) {
    std::uint64_t want = n * n * (h + k);
    if (committee_bytes[ep] != want) {
      errs.push_back("committee bytes epoch " + std::to_string(ep) + ": " + std::to_string(committee_bytes[ep]) +
                     " != " + std::to_string(want));
    }
    std::uint64_t want_dec = n * n * q[ep] * (h + k + 4);
    if (decrypt_bytes[ep] != want_dec) {
      errs.push_back("decrypt bytes epoch " + std::to_string(ep) + ": " + std::to_string(decrypt_bytes[ep]) +
                     " != " + std::to_string(want_dec));
    }
  }
  return errs;
}

// ---------------------------------------------------------------------------
// Trace properties

struct Counterexample {
  std::string property;
  std::size_t event_index;
  std::string detail;
};

struct LemmaReport {
  bool lemma1_holds = true;
  bool lemma2_holds = true;
  bool censorship_ordering_holds = true;
  bool agreement_holds = true;
  bool totality_holds = true;
  bool validity_holds = true;
  bool aba_agreement_holds = true;
  bool aba_validity_holds = true;
  bool proof_uniqueness_holds = true;
  bool prioritization_holds = true;
  std::size_t biased_validity_violations = 0;
  std::vector<Counterexample> counterexamples;

  bool all_hold() const {
    return lemma1_holds && lemma2_holds && censorship_ordering_holds && agreement_holds && totality_holds &&
           validity_holds && aba_agreement_holds && aba_validity_holds && proof_uniqueness_holds &&
           prioritization_holds;
  }

  std::optional<Counterexample> first(std::string_view property) const {
    for (const auto& c : counterexamples) {
      if (c.property == property) return c;
    }
    return std::nullopt;
  }
};

/// Evaluates the safety/liveness properties over one complete trace.
/// Throws TraceMalformed when the trace is internally inconsistent.
inline LemmaReport check_lemmas(const Trace& t) {
  LemmaReport r;
  const auto& meta = t.meta;
  const std::uint32_t n = meta.n, f = meta.f;
  if (meta.roles.size() != n || n == 0) throw Error(ErrorCode::TraceMalformed, "roles do not match n");
  auto flag = [&](bool& holds, std::string property, std::size_t idx, std::string detail) {
    if (holds) r.counterexamples.push_back({std::move(property), idx, std::move(detail)});
    holds = false;
  };
  std::vector<std::uint16_t> honest;
  for (std::uint16_t p = 0; p < n; ++p) {
    if (meta.honest(p)) honest.push_back(p);
  }

  using HoldKey = std::tuple<Epoch, std::int32_t, std::string>;
  using AckKey = std::tuple<Epoch, std::uint32_t, std::string>;  // epoch, ppb tag, digest
  std::map<std::uint64_t, const TraceEvent*> sends;
  std::map<HoldKey, std::set<std::uint16_t>> holders;
  std::map<Epoch, std::set<std::uint16_t>> honest_holding;
  std::set<Epoch> lemma1_checked, lemma2_checked;
  std::map<std::pair<Epoch, std::uint16_t>, std::uint32_t> decides;
  std::map<std::pair<Epoch, std::int32_t>, std::map<std::uint16_t, bool>> aba_decisions;
  std::map<std::pair<Epoch, std::int32_t>, std::set<bool>> aba_inputs;
  std::map<std::pair<Epoch, std::int32_t>, std::size_t> aba_first_decide;
  std::map<Epoch, std::vector<std::int32_t>> committees;
  std::map<AckKey, std::set<std::uint16_t>> ackers, honest_ackers;
  std::map<std::pair<Epoch, std::uint32_t>, std::set<std::string>> proofs;
  struct BlockSeen {
    std::size_t index;
    std::string digest;
  };
  std::map<Epoch, std::map<std::uint16_t, BlockSeen>> blocks;

  auto max_holders = [&](Epoch ep) {
    std::size_t best = 0;
    for (auto it = holders.lower_bound({ep, INT32_MIN, ""}); it != holders.end() && std::get<0>(it->first) == ep;
         ++it) {
      best = std::max(best, it->second.size());
    }
    return best;
  };

  for (std::size_t i = 0; i < t.events.size(); ++i) {
    const TraceEvent& e = t.events[i];
    if (e.party >= n) throw Error(ErrorCode::TraceMalformed, "party out of range at event " + std::to_string(i));
    bool is_honest = meta.honest(e.party);

    if (e.type == TraceEventType::Send) {
      if (!sends.emplace(e.msg_id, &e).second) {
        throw Error(ErrorCode::TraceMalformed, "duplicate message id at event " + std::to_string(i));
      }
      if (e.kind == MessageKind::DecShare && is_honest &&
          decides[{e.epoch, e.party}] < meta.kappa) {
        flag(r.censorship_ordering_holds, "censorship", i, "DEC_SHARE sent before all ABA decisions");
      }
      continue;
    }
    if (e.type == TraceEventType::Deliver) {
      auto it = sends.find(e.msg_id);
      if (it == sends.end() || it->second->peer != e.party || it->second->party != e.peer ||
          it->second->kind != e.kind) {
        throw Error(ErrorCode::TraceMalformed, "deliver without matching send at event " + std::to_string(i));
      }
      continue;
    }

    const LocalEvent& l = *e.local;
    switch (l.kind) {
      case LocalEventKind::Committee:
        if (is_honest) {
          auto [it, fresh] = committees.emplace(e.epoch, l.set);
          if (!fresh && it->second != l.set) flag(r.agreement_holds, "agreement", i, "honest committees differ");
        }
        break;
      case LocalEventKind::Hold: {
        holders[{e.epoch, l.j, l.ref}].insert(e.party);
        if (is_honest) honest_holding[e.epoch].insert(e.party);
        if (!lemma1_checked.contains(e.epoch) && honest_holding[e.epoch].size() == honest.size()) {
          lemma1_checked.insert(e.epoch);
          if (max_holders(e.epoch) < 2) flag(r.lemma1_holds, "lemma1", i, "no proposal held by two parties");
        }
        break;
      }
      case LocalEventKind::SuggestQuorum:
        if (is_honest && lemma2_checked.insert(e.epoch).second && max_holders(e.epoch) < 2 * f + 1) {
          flag(r.lemma2_holds, "lemma2", i,
               "max holders " + std::to_string(max_holders(e.epoch)) + " < " + std::to_string(2 * f + 1));
        }
        break;
      case LocalEventKind::DecShareRelease:
        if (is_honest && decides[{e.epoch, e.party}] < meta.kappa) {
          flag(r.censorship_ordering_holds, "censorship", i, "decryption shares released before all decisions");
        }
        break;
      case LocalEventKind::Decide:
        if (is_honest) {
          ++decides[{e.epoch, e.party}];
          auto& d = aba_decisions[{e.epoch, l.j}];
          aba_first_decide.emplace(std::make_pair(e.epoch, l.j), i);
          d[e.party] = l.bit == 1;
          for (const auto& [_, other] : d) {
            if (other != (l.bit == 1)) flag(r.aba_agreement_holds, "aba_agreement", i, "honest ABA decisions differ");
          }
        }
        break;
      case LocalEventKind::Input:
        if (is_honest) aba_inputs[{e.epoch, l.j}].insert(l.bit == 1);
        break;
      case LocalEventKind::Ack: {
        AckKey key{e.epoch, l.tag, l.ref};
        ackers[key].insert(e.party);
        if (is_honest) {
          honest_ackers[key].insert(e.party);
          auto c = committees.find(e.epoch);
          std::int32_t proposer = l.peer ? l.peer->index : -1;
          if (c != committees.end() && std::find(c->second.begin(), c->second.end(), proposer) == c->second.end()) {
            flag(r.prioritization_holds, "prioritization", i, "ack issued to a non-committee sender");
          }
        }
        break;
      }
      case LocalEventKind::Proof: {
        auto& digests = proofs[{e.epoch, l.tag}];
        digests.insert(l.ref);
        if (digests.size() > 1) flag(r.proof_uniqueness_holds, "proof_uniqueness", i, "two proofs for one instance");
        for (auto s : l.set) ackers[{e.epoch, l.tag, l.ref}].insert(static_cast<std::uint16_t>(s));
        break;
      }
      case LocalEventKind::DeliverBlock: {
        if (!is_honest) break;
        blocks[e.epoch][e.party] = {i, l.ref};
        std::size_t q = l.set.size();
        if (q < 1 || q > meta.kappa) {
          flag(r.validity_holds, "validity", i, "q = " + std::to_string(q) + " outside [1, kappa]");
        }
        auto committee = committees.find(e.epoch);
        for (const auto& ref : l.refs) {
          auto a = ref.find(':'), b = ref.find(':', a + 1);
          if (a == std::string::npos || b == std::string::npos) {
            throw Error(ErrorCode::TraceMalformed, "bad proposal reference at event " + std::to_string(i));
          }
          std::int32_t j = std::stoi(ref.substr(0, a));
          std::int32_t proposer = std::stoi(ref.substr(a + 1, b - a - 1));
          std::string digest = ref.substr(b + 1);
          if (committee == committees.end() || j < 0 || j >= static_cast<std::int32_t>(committee->second.size()) ||
              committee->second[j] != proposer) {
            flag(r.validity_holds, "validity", i, "proposal " + ref + " not from its committee slot");
            continue;
          }
          AckKey key{e.epoch, ppb_tag(PartyId{static_cast<std::uint16_t>(proposer)}, meta.promotion_steps), digest};
          std::size_t all = ackers[key].size(), hon = honest_ackers[key].size();
          if (all < 2 * f + 1 || hon < f + 1) {
            flag(r.validity_holds, "validity", i,
                 "proposal " + std::to_string(j) + " has " + std::to_string(all) + " signers, " +
                     std::to_string(hon) + " honest");
          }
        }
        for (const auto& [party, seen] : blocks[e.epoch]) {
          if (seen.digest != l.ref) flag(r.agreement_holds, "agreement", i, "honest blocks differ");
        }
        break;
      }
      case LocalEventKind::Drop:
        break;
    }
  }

  std::size_t last = t.events.empty() ? 0 : t.events.size() - 1;
  for (const auto& [key, decisions] : aba_decisions) {
    bool bit = decisions.begin()->second;
    const auto& inputs = aba_inputs[key];
    if (!inputs.contains(bit)) {
      flag(r.aba_validity_holds, "aba_validity", aba_first_decide[key], "decided bit never input by an honest party");
    }
    if (!bit && inputs.contains(true)) ++r.biased_validity_violations;
  }
  for (Epoch ep = 0; ep < meta.epochs; ++ep) {
    for (auto p : honest) {
      if (!blocks[ep].contains(p)) {
        flag(r.totality_holds, "totality", last,
             "party " + std::to_string(p) + " never delivered epoch " + std::to_string(ep));
      }
    }
  }
  return r;
}

// ---------------------------------------------------------------------------
// Experiments

struct SweepSpec {
  std::vector<std::uint32_t> ns;
  std::vector<std::uint64_t> seeds;
  std::vector<std::string> adversaries{"none"};
  std::optional<std::uint32_t> kappa;  // default f + 1
  std::uint32_t epochs = 1;
  std::uint32_t sec_param = 32;
  std::uint32_t batch_size = 8;
  std::uint32_t payload_bytes = 32;
  std::uint32_t promotion_steps = 1;
  std::string scheduler = "fair";
  std::uint64_t max_steps = 0;
};

struct ExperimentConfig {
  std::vector<SweepSpec> sweeps;
  unsigned threads = 0;  // 0 = hardware concurrency
};

namespace detail {

inline std::string trim(std::string s) {
  auto b = s.find_first_not_of(" \t\r");
  auto e = s.find_last_not_of(" \t\r");
  return b == std::string::npos ? "" : s.substr(b, e - b + 1);
}

inline std::uint64_t parse_uint(const std::string& s, std::size_t line) {
  try {
    std::size_t used = 0;
    auto v = std::stoull(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw Error(ErrorCode::ConfigInvalid, "line " + std::to_string(line) + ": expected a number, got '" + s + "'");
  }
}

// "4, 7, 10" or "1..20" or a mix.
inline std::vector<std::uint64_t> parse_uint_list(const std::string& v, std::size_t line) {
  std::vector<std::uint64_t> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    auto dots = item.find("..");
    if (dots == std::string::npos) {
      out.push_back(parse_uint(item, line));
      continue;
    }
    auto lo = parse_uint(trim(item.substr(0, dots)), line), hi = parse_uint(trim(item.substr(dots + 2)), line);
    if (hi < lo || hi - lo > 1'000'000) throw Error(ErrorCode::ConfigInvalid, "line " + std::to_string(line) + ": bad range");
    for (auto x = lo; x <= hi; ++x) out.push_back(x);
  }
  if (out.empty()) throw Error(ErrorCode::ConfigInvalid, "line " + std::to_string(line) + ": empty list");
  return out;
}

}  // namespace detail

/// Sections in brackets start a new sweep; `key = value` lines fill it.
/// Lines starting with '#' or ';' are comments.
inline ExperimentConfig parse_experiment(std::string_view text) {
  ExperimentConfig cfg;
  std::istringstream in{std::string(text)};
  std::string raw;
  std::size_t lineno = 0;
  SweepSpec* cur = nullptr;
  while (std::getline(in, raw)) {
    ++lineno;
    std::string line = detail::trim(raw);
    if (line.empty() || line[0] == '#' || line[0] == ';') continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw Error(ErrorCode::ConfigInvalid, "line " + std::to_string(lineno) + ": bad section");
      cfg.sweeps.emplace_back();
      cur = &cfg.sweeps.back();
      continue;
    }
    auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorCode::ConfigInvalid, "line " + std::to_string(lineno) + ": expected key = value");
    }
    std::string key = detail::trim(line.substr(0, eq)), val = detail::trim(line.substr(eq + 1));
    if (key == "threads") {
      cfg.threads = static_cast<unsigned>(detail::parse_uint(val, lineno));
      continue;
    }
    if (!cur) {
      cfg.sweeps.emplace_back();
      cur = &cfg.sweeps.back();
    }
    if (key == "n") {
      cur->ns.clear();
      for (auto v : detail::parse_uint_list(val, lineno)) cur->ns.push_back(static_cast<std::uint32_t>(v));
    } else if (key == "seeds" || key == "seed") {
      cur->seeds = detail::parse_uint_list(val, lineno);
    } else if (key == "adversary" || key == "adversaries") {
      cur->adversaries.clear();
      std::stringstream ss(val);
      std::string item;
      while (std::getline(ss, item, ',')) {
        item = detail::trim(item);
        if (item.empty()) continue;
        behavior_from_string(item);
        cur->adversaries.push_back(item);
      }
    } else if (key == "kappa") {
      if (val != "f+1") cur->kappa = static_cast<std::uint32_t>(detail::parse_uint(val, lineno));
    } else if (key == "epochs") {
      cur->epochs = static_cast<std::uint32_t>(detail::parse_uint(val, lineno));
    } else if (key == "sec_param" || key == "k") {
      cur->sec_param = static_cast<std::uint32_t>(detail::parse_uint(val, lineno));
    } else if (key == "batch_size") {
      cur->batch_size = static_cast<std::uint32_t>(detail::parse_uint(val, lineno));
    } else if (key == "payload_bytes") {
      cur->payload_bytes = static_cast<std::uint32_t>(detail::parse_uint(val, lineno));
    } else if (key == "promotion_steps") {
      cur->promotion_steps = static_cast<std::uint32_t>(detail::parse_uint(val, lineno));
    } else if (key == "scheduler") {
      scheduler_from_string(val);
      cur->scheduler = val;
    } else if (key == "max_steps") {
      cur->max_steps = detail::parse_uint(val, lineno);
    } else {
      throw Error(ErrorCode::ConfigInvalid, "line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    }
  }
  if (cfg.sweeps.empty()) throw Error(ErrorCode::ConfigInvalid, "experiment defines no sweep");
  for (const auto& s : cfg.sweeps) {
    if (s.ns.empty() || s.seeds.empty()) throw Error(ErrorCode::ConfigInvalid, "every sweep needs n and seeds");
    for (auto n : s.ns) {
      if (n < 4 || (n - 1) % 3 != 0) throw Error(ErrorCode::NotThreeFPlusOne, "n must be 3f+1 with f >= 1");
    }
  }
  return cfg;
}

inline ExperimentConfig load_experiment(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ConfigInvalid, "cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_experiment(ss.str());
}

struct Cell {
  std::uint32_t n, f, kappa;
  std::uint64_t seed;
  std::string adversary;
  std::uint32_t epochs;
  SweepSpec spec;

  std::string id() const {
    return "n=" + std::to_string(n) + ",seed=" + std::to_string(seed) + ",adversary=" + adversary;
  }
};

/// Simulation config for one cell. Byzantine parties sit on the epoch-0
/// committee; targeted-delay starves the first honest committee member.
inline SimConfig cell_config(const Cell& c) {
  SimConfig s;
  s.params = validate_params(c.n, c.f, c.kappa, c.spec.batch_size, c.spec.sec_param, c.seed, c.spec.promotion_steps);
  s.epochs = c.epochs;
  s.payload_bytes = c.spec.payload_bytes;
  s.max_steps = c.spec.max_steps;
  s.scheduler.kind = scheduler_from_string(c.spec.scheduler);
  DealerCrypto crypto(DealerSetup::generate(s.params));
  assign_byzantine(s, crypto, behavior_from_string(c.adversary), c.f, Placement::Committee);
  if (s.scheduler.kind == SchedulerKind::TargetedDelay) {
    for (auto p : predict_committee(crypto, s.params, 0)) {
      if (!s.byzantine.contains(p)) {
        s.scheduler.target = p;
        break;
      }
    }
  }
  return s;
}

struct CellResult {
  Cell cell;
  MetricsReport metrics;
  LemmaReport lemmas;
  bool timed_out = false;
  std::string trace_digest;
  std::vector<std::string> byte_errors;
};

struct SummaryRow {
  std::uint32_t n, f, kappa;
  std::size_t runs = 0;
  double mean_messages = 0;
  double mean_bytes = 0;
  double baseline = 0;
  double ratio = 0;
  double mean_aba_rounds = 0;
  bool agreement = true, totality = true, lemma1 = true, lemma2 = true, censorship = true;
};

struct ExperimentResult {
  std::vector<CellResult> cells;
  std::vector<SummaryRow> summary;
  double exponent = 0;  // least-squares slope of log(mean bytes per epoch) on log(n)
};

inline std::vector<Cell> expand_cells(const ExperimentConfig& cfg) {
  std::vector<Cell> cells;
  for (const auto& s : cfg.sweeps) {
    for (auto n : s.ns) {
      std::uint32_t f = (n - 1) / 3;
      for (const auto& adv : s.adversaries) {
        for (auto seed : s.seeds) cells.push_back({n, f, s.kappa.value_or(f + 1), seed, adv, s.epochs, s});
      }
    }
  }
  return cells;
}

/// Slope of the least-squares line through (log x, log y).
inline double loglog_slope(const std::vector<double>& xs, const std::vector<double>& ys) {
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += std::log(xs[i]);
    my += std::log(ys[i]);
  }
  mx /= xs.size();
  my /= ys.size();
  double num = 0, den = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    double dx = std::log(xs[i]) - mx;
    num += dx * (std::log(ys[i]) - my);
    den += dx * dx;
  }
  return den == 0 ? 0 : num / den;
}

inline CellResult run_cell(const Cell& cell, const std::optional<std::filesystem::path>& trace_dir) {
  CellResult r{cell, {}, {}, false, {}, {}};
  SimResult sim = simulate(cell_config(cell));
  r.timed_out = sim.timed_out;
  r.metrics = compute_metrics(sim.trace);
  r.lemmas = check_lemmas(sim.trace);
  std::string jsonl = sim.trace.to_jsonl();
  r.trace_digest = sha256(as_bytes(jsonl)).hex();
  if (cell.adversary == "none") r.byte_errors = check_byte_accounting(sim.trace);
  if (trace_dir) {
    std::filesystem::create_directories(*trace_dir);
    std::ofstream(*trace_dir / ("trace_n" + std::to_string(cell.n) + "_" + cell.adversary + "_s" +
                                std::to_string(cell.seed) + ".jsonl"))
        << jsonl;
  }
  return r;
}

inline std::optional<std::filesystem::path> trace_dir_from_env(std::optional<std::filesystem::path> fallback) {
  if (const char* env = std::getenv("SLIM_HBBFT_TRACE_DIR"); env && *env) return std::filesystem::path(env);
  return fallback;
}

/// Runs every cell (in parallel), then aggregates in cell order. A cell that
/// hit the step cap raises LivenessTimeout naming the cell.
inline ExperimentResult run_experiment(const ExperimentConfig& cfg,
                                       std::optional<std::filesystem::path> trace_dir = std::nullopt) {
  auto cells = expand_cells(cfg);
  std::vector<std::optional<CellResult>> results(cells.size());
  std::vector<std::string> errors(cells.size());
  unsigned threads = cfg.threads ? cfg.threads : std::max(1u, std::thread::hardware_concurrency());
  threads = std::min<unsigned>(threads, static_cast<unsigned>(cells.size()));
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < cells.size();) {
      try {
        results[i] = run_cell(cells[i], trace_dir);
      } catch (const std::exception& ex) {
        errors[i] = ex.what();
      }
    }
  };
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();

  ExperimentResult out;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (!errors[i].empty()) throw Error(ErrorCode::ConfigInvalid, "cell " + cells[i].id() + ": " + errors[i]);
    if (results[i]->timed_out) throw Error(ErrorCode::LivenessTimeout, "cell " + cells[i].id() + " hit max_steps");
    out.cells.push_back(std::move(*results[i]));
  }

  std::map<std::uint32_t, SummaryRow> by_n;
  for (const auto& c : out.cells) {
    auto& s = by_n.try_emplace(c.cell.n, SummaryRow{c.cell.n, c.cell.f, c.cell.kappa}).first->second;
    ++s.runs;
    s.mean_messages += double(c.metrics.total_messages) / c.metrics.epochs;
    s.mean_bytes += double(c.metrics.total_bytes) / c.metrics.epochs;
    s.baseline = c.metrics.baseline / c.metrics.epochs;
    s.mean_aba_rounds += c.metrics.mean_aba_rounds;
    s.agreement &= c.lemmas.agreement_holds;
    s.totality &= c.lemmas.totality_holds;
    s.lemma1 &= c.lemmas.lemma1_holds;
    s.lemma2 &= c.lemmas.lemma2_holds;
    s.censorship &= c.lemmas.censorship_ordering_holds;
  }
  std::vector<double> xs, ys;
  for (auto& [n, s] : by_n) {
    s.mean_messages /= s.runs;
    s.mean_bytes /= s.runs;
    s.mean_aba_rounds /= s.runs;
    s.ratio = s.baseline > 0 ? s.mean_bytes / s.baseline : 0;
    xs.push_back(n);
    ys.push_back(s.mean_bytes);
    out.summary.push_back(s);
  }
  out.exponent = xs.size() >= 2 ? loglog_slope(xs, ys) : 0;
  return out;
}

// ---------------------------------------------------------------------------
// CSV

inline constexpr const char* kCsvHeader =
    "n,f,kappa,seed,adversary,epochs,phase,messages,bytes,baseline_bytes,ratio,agreement,totality,lemma1,lemma2,"
    "censorship_ok,mean_aba_rounds";

namespace detail {
inline std::string fixed(double v, int digits = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}
inline const char* b(bool v) { return v ? "true" : "false"; }
}  // namespace detail

inline std::string cell_row(const CellResult& c, const std::string& phase, std::uint64_t messages,
                            std::uint64_t bytes) {
  std::ostringstream os;
  const auto& l = c.lemmas;
  os << c.cell.n << ',' << c.cell.f << ',' << c.cell.kappa << ',' << c.cell.seed << ',' << c.cell.adversary << ','
     << c.cell.epochs << ',' << phase << ',' << messages << ',' << bytes << ',' << detail::fixed(c.metrics.baseline, 1)
     << ',' << detail::fixed(double(bytes) / c.metrics.baseline) << ',' << detail::b(l.agreement_holds) << ','
     << detail::b(l.totality_holds) << ',' << detail::b(l.lemma1_holds) << ',' << detail::b(l.lemma2_holds) << ','
     << detail::b(l.censorship_ordering_holds) << ',' << detail::fixed(c.metrics.mean_aba_rounds, 4);
  return os.str();
}

/// One "total" row per cell followed by one summary row (seed "mean") per n.
inline std::string results_csv(const ExperimentResult& r) {
  std::ostringstream os;
  os << kCsvHeader << '\n';
  for (const auto& c : r.cells) os << cell_row(c, "total", c.metrics.total_messages, c.metrics.total_bytes) << '\n';
  for (const auto& s : r.summary) {
    os << s.n << ',' << s.f << ',' << s.kappa << ",mean,all,1,total," << detail::fixed(s.mean_messages, 1) << ','
       << detail::fixed(s.mean_bytes, 1) << ',' << detail::fixed(s.baseline, 1) << ',' << detail::fixed(s.ratio) << ','
       << detail::b(s.agreement) << ',' << detail::b(s.totality) << ',' << detail::b(s.lemma1) << ','
       << detail::b(s.lemma2) << ',' << detail::b(s.censorship) << ',' << detail::fixed(s.mean_aba_rounds, 4) << '\n';
  }
  return os.str();
}

inline std::string phases_csv(const ExperimentResult& r) {
  std::ostringstream os;
  os << kCsvHeader << '\n';
  for (const auto& c : r.cells) {
    for (std::size_t p = 0; p < kPhaseCount; ++p) {
      const auto& ps = c.metrics.phases[p];
      os << cell_row(c, to_string(static_cast<Phase>(p)), ps.messages, ps.bytes) << '\n';
    }
  }
  return os.str();
}

}  // namespace slim_hbbft
