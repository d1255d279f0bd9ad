#pragma once

#include <algorithm>
#include <deque>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "slim_hbbft/aba.hpp"
#include "slim_hbbft/committee.hpp"
#include "slim_hbbft/crypto.hpp"
#include "slim_hbbft/outbox.hpp"
#include "slim_hbbft/provable_broadcast.hpp"
#include "slim_hbbft/types.hpp"

namespace slim_hbbft {

/// A committee member's encrypted batch together with its delivery proof `ts`.
struct Proposal {
  Epoch epoch = 0;
  std::uint32_t j = 0;
  PartyId proposer;
  Ciphertext ciphertext;
  DeliveryProof proof;
};

// PROPOSE / PROPOSAL_ECHO body: ciphertext || proof (K).
// SUGGEST body: proposer u16 || ciphertext || proof (K).
inline Bytes encode_proposal_body(const Proposal& p, bool with_proposer) {
  ByteWriter w;
  if (with_proposer) w.u16(p.proposer.index);
  w.bytes(p.ciphertext.bytes).bytes(p.proof.sig.sig);
  return w.take();
}

/// Decodes and fully verifies a proposal for committee slot `j`: the proposer
/// must be committee[j] and the proof must verify over the final promotion step.
inline std::optional<Proposal> decode_proposal(const ThresholdCrypto& crypto, const ProtocolParams& params,
                                               const Committee& committee, Epoch epoch, std::uint32_t j,
                                               ByteView body, bool with_proposer) {
  if (j >= committee.size()) return std::nullopt;
  try {
    ByteReader r(body);
    PartyId proposer = with_proposer ? PartyId{r.u16()} : committee[j];
    if (proposer != committee[j]) return std::nullopt;
    std::size_t k = params.sec_param;
    if (r.remaining() < 2 * k) return std::nullopt;
    Bytes ct = r.bytes(r.remaining() - k);
    auto vd = value_digest(ct);
    auto proof = proof_from_wire({epoch, proposer, params.promotion_steps}, vd, r.take(k));
    if (!verify_delivery_proof(crypto, proof)) return std::nullopt;
    return Proposal{epoch, j, proposer, Ciphertext{epoch, proposer, std::move(ct)}, std::move(proof)};
  } catch (const Error&) {
    return std::nullopt;
  }
}

struct DeliveredProposal {
  std::uint32_t j;
  PartyId proposer;
  Digest value_digest;
  Bytes proof_sig;
};

struct DeliveredBlock {
  Epoch epoch = 0;
  std::vector<std::uint32_t> decided_set;
  std::uint32_t q = 0;
  std::vector<Request> requests;
  std::uint64_t byte_total = 0;
  std::vector<DeliveredProposal> proposals;

  /// Digest over the agreed content (epoch, S, requests).
  Digest digest() const {
    Hasher h("block");
    h.u64(epoch).u64(decided_set.size());
    for (auto j : decided_set) h.u64(j);
    h.u64(requests.size());
    for (const auto& r : requests) h.field(r.digest());
    return h.finish();
  }

  bool same_outcome(const DeliveredBlock& o) const {
    return epoch == o.epoch && decided_set == o.decided_set && requests == o.requests;
  }

  /// One line of the per-party block log: epoch, S, q, request digests.
  std::string log_line() const {
    std::ostringstream os;
    os << "epoch=" << epoch << " S=[";
    for (std::size_t i = 0; i < decided_set.size(); ++i) os << (i ? "," : "") << decided_set[i];
    os << "] q=" << q << " requests=[";
    for (std::size_t i = 0; i < requests.size(); ++i) os << (i ? "," : "") << requests[i].digest().short_hex();
    os << "]";
    return os.str();
  }
};

/// First `batch_size` pending requests in arrival order.
inline std::vector<Request> select_batch(const std::deque<Request>& buffer, std::uint32_t batch_size) {
  auto end = buffer.begin() + std::min<std::size_t>(batch_size, buffer.size());
  return {buffer.begin(), end};
}

/// Everything one party tracks for one epoch.
struct EpochState {
  EpochState(const ThresholdCrypto& crypto, const ProtocolParams& params, PartyId self, Epoch e)
      : epoch(e), selection(crypto, params, self, e) {}

  Epoch epoch;
  CommitteeSelection selection;
  std::optional<Committee> committee;
  std::vector<Message> pending;  // arrived before the committee was known
  std::vector<Request> batch;
  std::optional<Promoter> promoter;
  std::map<PartyId, PpbReceiver> receivers;

  std::map<std::uint32_t, Proposal> proposals;
  std::set<std::pair<std::uint32_t, Digest>> content_seen;
  std::set<PartyId> suggesters;
  std::map<std::uint32_t, std::set<PartyId>> suggested_for;
  std::map<std::uint32_t, std::set<PartyId>> known_holders;
  bool suggested = false;
  bool suggest_quorum = false;
  bool aba_inputs_zero_sent = false;

  std::vector<BinaryAgreement> aba;
  std::map<std::uint32_t, bool> decisions;
  std::set<std::uint32_t> echoed;

  bool released = false;
  std::map<std::uint32_t, std::map<PartyId, Message>> raw_dec_shares;
  std::map<std::uint32_t, std::map<PartyId, DecShare>> dec_shares;
  std::map<std::uint32_t, std::vector<Request>> plaintexts;
  std::optional<DeliveredBlock> delivered;

  std::vector<std::uint32_t> decided_set() const {
    std::vector<std::uint32_t> s;
    for (const auto& [j, bit] : decisions) {
      if (bit) s.push_back(j);
    }
    return s;
  }
};

/// One party of the atomic broadcast: a deterministic state machine that
/// consumes one message at a time and runs epochs back to back.
class Party {
 public:
  Party(const ThresholdCrypto& crypto, ProtocolParams params, PartyId self, std::vector<Request> workload,
        std::uint32_t total_epochs)
      : crypto_(&crypto),
        params_(params),
        self_(self),
        buffer_(workload.begin(), workload.end()),
        total_epochs_(total_epochs) {}

  void start_epoch(Epoch e, Outbox& out) {
    if (epochs_.contains(e)) throw Error(ErrorCode::EpochAlreadyActive, "epoch already started");
    if (current_ && !epochs_.at(*current_).delivered) {
      throw Error(ErrorCode::EpochAlreadyActive, "previous epoch not delivered");
    }
    auto& st = epochs_.try_emplace(e, *crypto_, params_, self_, e).first->second;
    st.batch = select_batch(buffer_, params_.batch_size);
    current_ = e;
    st.selection.start(out);

    auto node = future_.extract(e);
    if (!node.empty()) {
      for (const auto& m : node.mapped()) handle(m, out);
    }
  }

  void handle(const Message& msg, Outbox& out) {
    if (!current_ || msg.epoch > *current_) {
      if (msg.epoch >= total_epochs_) {
        out.drop(msg, "beyond_horizon");
      } else {
        future_[msg.epoch].push_back(msg);
      }
      return;
    }
    auto& st = epochs_.at(*current_);
    if (msg.epoch < *current_ || st.delivered) {
      out.drop(msg, "stale_epoch");
      return;
    }
    if (msg.kind == MessageKind::CoinShare) {
      if (auto committee = st.selection.handle_share(msg, out)) on_committee(st, *committee, out);
      return;
    }
    if (!st.committee) {
      st.pending.push_back(msg);
      return;
    }
    dispatch(st, msg, out);
  }

  bool done() const { return delivered_.size() >= total_epochs_; }
  PartyId id() const { return self_; }
  const ProtocolParams& params() const { return params_; }
  const std::vector<DeliveredBlock>& delivered() const { return delivered_; }
  const std::deque<Request>& buffer() const { return buffer_; }
  std::optional<Epoch> current_epoch() const { return current_; }

  const EpochState* epoch_state(Epoch e) const {
    auto it = epochs_.find(e);
    return it == epochs_.end() ? nullptr : &it->second;
  }

 private:
  void on_committee(EpochState& st, const Committee& committee, Outbox& out) {
    st.committee = committee;
    LocalEvent e{LocalEventKind::Committee};
    e.epoch = st.epoch;
    for (auto p : committee) e.set.push_back(p.index);
    out.emit(std::move(e));

    for (std::uint32_t j = 0; j < committee.size(); ++j) {
      st.aba.emplace_back(*crypto_, params_, self_, st.epoch, j);
    }
    if (committee_index(committee, self_)) {
      Ciphertext ct = crypto_->encrypt(st.epoch, self_, encode_batch(st.batch));
      st.promoter.emplace(*crypto_, params_, self_, st.epoch, ct.bytes);
      st.promoter->start(out);
    }
    auto pending = std::move(st.pending);
    st.pending.clear();
    for (const auto& m : pending) {
      if (st.delivered) {
        out.drop(m, "stale_epoch");
        continue;
      }
      dispatch(st, m, out);
    }
  }

  void dispatch(EpochState& st, const Message& msg, Outbox& out) {
    const Committee& committee = *st.committee;
    switch (msg.kind) {
      case MessageKind::PpbSend: {
        auto slot = committee_index(committee, msg.sender);
        auto& rx = st.receivers.try_emplace(msg.sender, *crypto_, params_, self_, st.epoch, msg.sender).first->second;
        auto accepted = rx.handle_send(msg, slot.has_value(), out);
        if (!accepted) return;
        note_content(st, static_cast<std::uint32_t>(*slot), accepted->value_digest, "ppb_send", out);
        if (accepted->step >= 2) {
          emit_proof(st, ppb_tag(msg.sender, accepted->step - 1), accepted->value_digest, "carried", out);
        }
        return;
      }
      case MessageKind::PpbAck: {
        if (!st.promoter) {
          out.drop(msg, "not_proposer");
          return;
        }
        if (auto proof = st.promoter->handle_ack(msg, out)) on_promotion_complete(st, *proof, out);
        return;
      }
      case MessageKind::Propose: {
        auto p = decode_proposal(*crypto_, params_, committee, st.epoch, msg.tag, msg.body, false);
        if (!p || msg.sender != p->proposer) {
          out.drop(msg, "bad_proposal");
          return;
        }
        st.known_holders[p->j].insert(msg.sender);
        accept_proposal(st, std::move(*p), "propose", out);
        return;
      }
      case MessageKind::Suggest: {
        auto p = decode_proposal(*crypto_, params_, committee, st.epoch, msg.tag, msg.body, true);
        if (!p) {
          out.drop(msg, "bad_proposal");
          return;
        }
        std::uint32_t j = p->j;
        bool new_suggester = st.suggesters.insert(msg.sender).second;
        st.suggested_for[j].insert(msg.sender);
        st.known_holders[j].insert(msg.sender);
        accept_proposal(st, std::move(*p), "suggest", out);
        if (new_suggester && !st.suggest_quorum && st.suggesters.size() >= params_.n - params_.f) {
          st.suggest_quorum = true;
          LocalEvent e{LocalEventKind::SuggestQuorum};
          e.epoch = st.epoch;
          for (auto s : st.suggesters) e.set.push_back(s.index);
          out.emit(std::move(e));
          try_zero_inputs(st, out);
        }
        return;
      }
      case MessageKind::ProposalEcho: {
        auto p = decode_proposal(*crypto_, params_, committee, st.epoch, msg.tag, msg.body, false);
        if (!p) {
          out.drop(msg, "bad_proposal");
          return;
        }
        st.known_holders[p->j].insert(msg.sender);
        accept_proposal(st, std::move(*p), "echo", out);
        return;
      }
      case MessageKind::AbaEst:
      case MessageKind::AbaAux:
      case MessageKind::AbaCoinShare: {
        std::uint32_t j = aba_tag_index(msg.tag);
        if (j >= st.aba.size()) {
          out.drop(msg, "malformed");
          return;
        }
        st.aba[j].handle(msg, out);
        check_decision(st, j, out);
        return;
      }
      case MessageKind::DecShare: {
        std::uint32_t j = msg.tag;
        if (j >= committee.size() || msg.body.size() != params_.sec_param + 4) {
          out.drop(msg, "malformed");
          return;
        }
        if (!st.raw_dec_shares[j].emplace(msg.sender, msg).second) {
          out.drop(msg, "duplicate");
          return;
        }
        verify_dec_shares(st, j, out);
        try_deliver(st, out);
        return;
      }
      case MessageKind::CoinShare:
        return;
    }
  }

  void on_promotion_complete(EpochState& st, const DeliveryProof& proof, Outbox& out) {
    auto j = *committee_index(*st.committee, self_);
    Proposal p{st.epoch, static_cast<std::uint32_t>(j), self_,
               Ciphertext{st.epoch, self_, st.promoter->value()}, proof};
    out.multicast(params_.n, Message{MessageKind::Propose, st.epoch, self_, static_cast<std::uint32_t>(j),
                                     encode_proposal_body(p, false)});
  }

  void note_content(EpochState& st, std::uint32_t j, const Digest& vd, const char* source, Outbox& out) {
    if (!st.content_seen.emplace(j, vd).second) return;
    LocalEvent e{LocalEventKind::Hold};
    e.epoch = st.epoch;
    e.j = static_cast<std::int32_t>(j);
    e.ref = vd.hex();
    e.note = source;
    out.emit(std::move(e));
  }

  void emit_proof(EpochState& st, std::uint32_t tag, const Digest& vd, const char* note, Outbox& out) {
    LocalEvent e{LocalEventKind::Proof};
    e.epoch = st.epoch;
    e.tag = tag;
    e.ref = vd.hex();
    e.note = note;
    out.emit(std::move(e));
  }

  void accept_proposal(EpochState& st, Proposal p, const char* source, Outbox& out) {
    std::uint32_t j = p.j;
    note_content(st, j, p.proof.value_digest, source, out);
    st.known_holders[j].insert(self_);
    if (!st.proposals.contains(j)) {
      emit_proof(st, ppb_tag(p.proposer, params_.promotion_steps), p.proof.value_digest, "verified", out);
      st.proposals.emplace(j, p);
      verify_dec_shares(st, j, out);
    }
    if (!st.suggested) {
      st.suggested = true;
      out.multicast(params_.n, Message{MessageKind::Suggest, st.epoch, self_, j, encode_proposal_body(p, true)});
    }
    if (!st.aba[j].decided()) {
      st.aba[j].input(true, true, out);
      check_decision(st, j, out);
    }
    try_release(st, out);
  }

  void try_zero_inputs(EpochState& st, Outbox& out) {
    if (!st.suggest_quorum || st.aba_inputs_zero_sent) return;
    bool any_one = std::any_of(st.decisions.begin(), st.decisions.end(), [](const auto& d) { return d.second; });
    if (!any_one) return;
    st.aba_inputs_zero_sent = true;
    for (std::uint32_t j = 0; j < st.aba.size(); ++j) {
      if (st.proposals.contains(j) || st.aba[j].input_value() || st.aba[j].decided()) continue;
      st.aba[j].input(false, false, out);
      check_decision(st, j, out);
    }
  }

  void check_decision(EpochState& st, std::uint32_t j, Outbox& out) {
    auto bit = st.aba[j].decided();
    if (!bit || st.decisions.contains(j)) return;
    st.decisions.emplace(j, *bit);
    if (*bit) {
      auto it = st.proposals.find(j);
      if (it != st.proposals.end() && st.echoed.insert(j).second) {
        std::set<PartyId> skip = st.known_holders[j];
        skip.insert(st.aba[j].flagged_holders().begin(), st.aba[j].flagged_holders().end());
        skip.insert(it->second.proposer);
        skip.insert(self_);
        Message echo{MessageKind::ProposalEcho, st.epoch, self_, j, encode_proposal_body(it->second, false)};
        for (std::uint32_t i = 0; i < params_.n; ++i) {
          PartyId to{static_cast<std::uint16_t>(i)};
          if (!skip.contains(to)) out.send(to, echo);
        }
      }
      try_zero_inputs(st, out);
    }
    try_release(st, out);
  }

  void try_release(EpochState& st, Outbox& out) {
    if (st.released || st.delivered || st.decisions.size() < st.aba.size()) return;
    auto s = st.decided_set();
    for (auto j : s) {
      if (!st.proposals.contains(j)) return;
    }
    st.released = true;
    LocalEvent e{LocalEventKind::DecShareRelease};
    e.epoch = st.epoch;
    for (auto j : s) e.set.push_back(static_cast<std::int32_t>(j));
    out.emit(std::move(e));
    for (auto j : s) {
      const auto& ct = st.proposals.at(j).ciphertext;
      DecShare share = crypto_->decryption_share(self_, ct);
      Bytes body = share.share;
      body.insert(body.end(), share.ct_ref.bytes.begin(), share.ct_ref.bytes.begin() + 4);
      out.multicast(params_.n, Message{MessageKind::DecShare, st.epoch, self_, j, body});
    }
    try_deliver(st, out);
  }

  void verify_dec_shares(EpochState& st, std::uint32_t j, Outbox& out) {
    auto prop = st.proposals.find(j);
    auto raw = st.raw_dec_shares.find(j);
    if (prop == st.proposals.end() || raw == st.raw_dec_shares.end()) return;
    const auto& ct = prop->second.ciphertext;
    auto ref = ct.ref();
    auto& verified = st.dec_shares[j];
    for (auto it = raw->second.begin(); it != raw->second.end();) {
      const Message& m = it->second;
      ByteView body(m.body);
      DecShare share{m.sender, ref, Bytes(body.begin(), body.begin() + params_.sec_param)};
      bool ref_ok = std::equal(body.begin() + params_.sec_param, body.end(), ref.bytes.begin());
      if (ref_ok && crypto_->verify_dec_share(ct, share)) {
        verified.emplace(m.sender, std::move(share));
      } else {
        out.drop(m, "invalid_dec_share");
      }
      it = raw->second.erase(it);
    }
  }

  void try_deliver(EpochState& st, Outbox& out) {
    if (!st.released || st.delivered) return;
    auto s = st.decided_set();
    for (auto j : s) {
      if (st.plaintexts.contains(j)) continue;
      const auto& shares = st.dec_shares[j];
      if (shares.size() < crypto_->dec_t()) return;
      std::vector<DecShare> subset;
      for (const auto& [_, sh] : shares) subset.push_back(sh);
      std::vector<Request> reqs;
      try {
        reqs = decode_batch(crypto_->combine_decryption(st.proposals.at(j).ciphertext, subset),
                            params_.max_payload);
      } catch (const Error&) {
        // Undecryptable or malformed batches contribute nothing, identically everywhere.
        reqs.clear();
      }
      st.plaintexts.emplace(j, std::move(reqs));
    }
    deliver(st, s, out);
  }

  void deliver(EpochState& st, const std::vector<std::uint32_t>& s, Outbox& out) {
    DeliveredBlock block;
    block.epoch = st.epoch;
    block.decided_set = s;
    block.q = static_cast<std::uint32_t>(s.size());
    std::set<std::string> in_block;
    for (auto j : s) {
      const auto& p = st.proposals.at(j);
      block.proposals.push_back({j, p.proposer, p.proof.value_digest, p.proof.sig.sig});
      for (const auto& r : st.plaintexts.at(j)) {
        if (delivered_tags_.contains(r.client_tag) || !in_block.insert(r.client_tag).second) continue;
        block.requests.push_back(r);
      }
    }
    std::sort(block.requests.begin(), block.requests.end(), [](const Request& a, const Request& b) {
      if (a.client_tag != b.client_tag) return a.client_tag < b.client_tag;
      return sha256(a.payload) < sha256(b.payload);
    });
    for (const auto& r : block.requests) {
      delivered_tags_.insert(r.client_tag);
      block.byte_total += r.payload.size();
    }
    std::erase_if(buffer_, [&](const Request& r) { return delivered_tags_.contains(r.client_tag); });

    LocalEvent e{LocalEventKind::DeliverBlock};
    e.epoch = st.epoch;
    e.ref = block.digest().hex();
    for (auto j : s) e.set.push_back(static_cast<std::int32_t>(j));
    for (const auto& p : block.proposals) {
      e.refs.push_back(std::to_string(p.j) + ":" + std::to_string(p.proposer.index) + ":" + p.value_digest.hex());
    }
    e.note = "q=" + std::to_string(block.q) + " requests=" + std::to_string(block.requests.size());
    out.emit(std::move(e));

    st.delivered = block;
    delivered_.push_back(std::move(block));
    if (st.epoch + 1 < total_epochs_) start_epoch(st.epoch + 1, out);
  }

  const ThresholdCrypto* crypto_;
  ProtocolParams params_;
  PartyId self_;
  std::deque<Request> buffer_;
  std::uint32_t total_epochs_;
  std::optional<Epoch> current_;
  std::map<Epoch, EpochState> epochs_;
  std::map<Epoch, std::vector<Message>> future_;
  std::set<std::string> delivered_tags_;
  std::vector<DeliveredBlock> delivered_;
};

}  // namespace slim_hbbft
