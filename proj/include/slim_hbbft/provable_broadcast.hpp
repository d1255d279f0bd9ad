#pragma once

#include <map>
#include <optional>
#include <vector>

#include "slim_hbbft/crypto.hpp"
#include "slim_hbbft/outbox.hpp"
#include "slim_hbbft/types.hpp"

namespace slim_hbbft {

struct PpbInstanceId {
  Epoch epoch = 0;
  PartyId proposer;
  std::uint32_t step = 1;

  auto operator<=>(const PpbInstanceId&) const = default;
};

inline Digest value_digest(ByteView value) { return Hasher("ppb-value").field(value).finish(); }

/// Bytes every acker signs: binds epoch, proposer, step and the value digest.
inline Bytes ppb_statement(const PpbInstanceId& id, const Digest& vd) {
  return ByteWriter()
      .bytes(as_bytes("ppb"))
      .u32(id.epoch)
      .u16(id.proposer.index)
      .u32(id.step)
      .bytes(vd.view())
      .take();
}

/// The proof `ts` that a value completed P-PB.
struct DeliveryProof {
  PpbInstanceId instance;
  Digest value_digest;
  ThresholdSig sig;
};

inline bool verify_delivery_proof(const ThresholdCrypto& crypto, const DeliveryProof& p) {
  return crypto.verify_threshold_sig(ppb_statement(p.instance, p.value_digest), p.sig);
}

/// Rebuilds a proof from its K wire bytes.
inline DeliveryProof proof_from_wire(const PpbInstanceId& id, const Digest& vd, ByteView sig_bytes) {
  ThresholdSig sig{DealerCrypto::message_digest(ppb_statement(id, vd)), Bytes(sig_bytes.begin(), sig_bytes.end()), {}};
  return DeliveryProof{id, vd, std::move(sig)};
}

// PPB_SEND body: value || sender attestation (K) || carried proof (K, steps >= 2).
struct PpbSendBody {
  Bytes value;
  Bytes attestation;
  std::optional<Bytes> carried_proof;

  Bytes encode() const {
    ByteWriter w;
    w.bytes(value).bytes(attestation);
    if (carried_proof) w.bytes(*carried_proof);
    return w.take();
  }

  static PpbSendBody decode(ByteView body, std::uint32_t k, std::uint32_t step) {
    std::size_t trailer = k + (step >= 2 ? k : 0);
    if (body.size() < trailer) throw Error(ErrorCode::Malformed, "PPB_SEND body too short");
    ByteReader r(body);
    PpbSendBody out;
    out.value = r.bytes(body.size() - trailer);
    out.attestation = r.bytes(k);
    if (step >= 2) out.carried_proof = r.bytes(k);
    return out;
  }
};

/// Builds the multicast for one P-PB instance. Steps >= 2 must carry the
/// previous step's proof.
inline std::vector<Message> ppb_send(const ThresholdCrypto& crypto, const ProtocolParams& params, PartyId self,
                                     const PpbInstanceId& id, const Bytes& value,
                                     const std::optional<ThresholdSig>& carried) {
  if (self != id.proposer) throw Error(ErrorCode::NotProposer, "only the instance proposer may send");
  if ((id.step >= 2) != carried.has_value()) {
    throw Error(ErrorCode::ConfigInvalid, "step >= 2 requires the previous step's proof, step 1 none");
  }
  auto vd = value_digest(value);
  PpbSendBody body{value, crypto.sign_share(self, ppb_statement(id, vd)).share,
                   carried ? std::optional<Bytes>(carried->sig) : std::nullopt};
  Message m{MessageKind::PpbSend, id.epoch, self, ppb_tag(id.proposer, id.step), body.encode()};
  return std::vector<Message>(params.n, m);
}

struct PromotionSlot {
  Bytes value;
  DeliveryProof proof;
};

/// Receiver side for every step of one proposer's promotion in one epoch.
/// Keeps prepare/lock/commit as recorded at steps 2/3/4.
class PpbReceiver {
 public:
  struct Accepted {
    std::uint32_t step;
    Bytes value;
    Digest value_digest;
  };

  PpbReceiver(const ThresholdCrypto& crypto, const ProtocolParams& params, PartyId self, Epoch epoch,
              PartyId proposer)
      : crypto_(&crypto), params_(params), self_(self), epoch_(epoch), proposer_(proposer) {}

  /// Acks (unicast to the proposer) iff the proposer is in the committee, this
  /// is the first send for the step, the attestation verifies and, for step >= 2,
  /// the carried proof verifies for step - 1 on the same value.
  std::optional<Accepted> handle_send(const Message& msg, bool proposer_in_committee, Outbox& out) {
    if (abandoned_) {
      out.drop(msg, "abandoned");
      return std::nullopt;
    }
    if (!proposer_in_committee) {
      out.drop(msg, "not_committee");
      return std::nullopt;
    }
    std::uint32_t step = ppb_tag_step(msg.tag);
    if (step < 1 || step > params_.promotion_steps || msg.sender != proposer_) {
      out.drop(msg, "malformed");
      return std::nullopt;
    }
    PpbSendBody body;
    try {
      body = PpbSendBody::decode(msg.body, params_.sec_param, step);
    } catch (const Error&) {
      out.drop(msg, "malformed");
      return std::nullopt;
    }
    if (acked_.contains(step)) {
      out.drop(msg, acked_.at(step) == value_digest(body.value) ? "duplicate" : "equivocation");
      return std::nullopt;
    }
    PpbInstanceId id{epoch_, proposer_, step};
    auto vd = value_digest(body.value);
    SigShare attestation{proposer_, DealerCrypto::message_digest(ppb_statement(id, vd)), body.attestation};
    if (!crypto_->verify_share(attestation)) {
      out.drop(msg, "bad_attestation");
      return std::nullopt;
    }
    std::optional<DeliveryProof> carried;
    if (step >= 2) {
      carried = proof_from_wire({epoch_, proposer_, step - 1}, vd, *body.carried_proof);
      if (!verify_delivery_proof(*crypto_, *carried)) {
        out.drop(msg, "bad_proof");
        return std::nullopt;
      }
    }
    acked_.emplace(step, vd);
    if (carried) {
      PromotionSlot slot{body.value, *carried};
      if (step == 2) prepare_ = slot;
      if (step == 3) lock_ = slot;
      if (step == 4) commit_ = std::move(slot);
    }
    SigShare ack = crypto_->sign_share(self_, ppb_statement(id, vd));
    LocalEvent e{LocalEventKind::Ack};
    e.epoch = epoch_;
    e.tag = msg.tag;
    e.peer = proposer_;
    e.ref = vd.hex();
    out.emit(std::move(e));
    out.send(proposer_, Message{MessageKind::PpbAck, epoch_, self_, msg.tag, ack.share});
    return Accepted{step, std::move(body.value), vd};
  }

  /// Ignore this proposer's sends for every step from now on.
  void abandon() { abandoned_ = true; }
  bool abandoned() const { return abandoned_; }

  const std::optional<PromotionSlot>& prepare() const { return prepare_; }
  const std::optional<PromotionSlot>& lock() const { return lock_; }
  const std::optional<PromotionSlot>& commit() const { return commit_; }

 private:
  const ThresholdCrypto* crypto_;
  ProtocolParams params_;
  PartyId self_;
  Epoch epoch_;
  PartyId proposer_;
  bool abandoned_ = false;
  std::map<std::uint32_t, Digest> acked_;
  std::optional<PromotionSlot> prepare_, lock_, commit_;
};

/// Sender side: runs P-PB for steps 1..promotion_steps, threading each step's
/// proof into the next, and yields the final step's proof.
class Promoter {
 public:
  enum class Status { Idle, Running, Complete, Abandoned };

  Promoter(const ThresholdCrypto& crypto, const ProtocolParams& params, PartyId self, Epoch epoch, Bytes value)
      : crypto_(&crypto),
        params_(params),
        self_(self),
        epoch_(epoch),
        value_(std::move(value)),
        digest_(value_digest(value_)) {}

  void start(Outbox& out) {
    if (status_ != Status::Idle) throw Error(ErrorCode::DuplicateStart, "promotion already started");
    status_ = Status::Running;
    step_ = 1;
    send_step(std::nullopt, out);
  }

  std::optional<DeliveryProof> handle_ack(const Message& msg, Outbox& out) {
    if (status_ == Status::Abandoned) {
      out.drop(msg, "abandoned");
      return std::nullopt;
    }
    std::uint32_t step = ppb_tag_step(msg.tag);
    if (status_ != Status::Running || step != step_ || ppb_tag_proposer(msg.tag) != self_) {
      out.drop(msg, "stale_step");
      return std::nullopt;
    }
    PpbInstanceId id{epoch_, self_, step_};
    auto statement = ppb_statement(id, digest_);
    SigShare share{msg.sender, DealerCrypto::message_digest(statement), msg.body};
    if (!crypto_->verify_share(share)) {
      out.drop(msg, "invalid_share");
      return std::nullopt;
    }
    if (shares_.contains(msg.sender)) {
      out.drop(msg, "duplicate");
      return std::nullopt;
    }
    shares_.emplace(msg.sender, std::move(share));
    if (shares_.size() < derive_thresholds(params_).sig_t) return std::nullopt;

    std::vector<SigShare> shares;
    for (const auto& [_, s] : shares_) shares.push_back(s);
    DeliveryProof proof{id, digest_, crypto_->combine_signature(statement, shares, derive_thresholds(params_).sig_t)};
    proofs_.push_back(proof);
    LocalEvent e{LocalEventKind::Proof};
    e.epoch = epoch_;
    e.tag = ppb_tag(self_, step_);
    e.ref = digest_.hex();
    e.note = "formed";
    for (auto p : proof.sig.signers) e.set.push_back(p.index);
    out.emit(std::move(e));
    shares_.clear();

    if (step_ < params_.promotion_steps) {
      ++step_;
      send_step(proof.sig, out);
      return std::nullopt;
    }
    status_ = Status::Complete;
    return proof;
  }

  void abandon() {
    if (status_ != Status::Complete) status_ = Status::Abandoned;
  }

  Status status() const { return status_; }
  std::uint32_t step() const { return step_; }
  const Bytes& value() const { return value_; }
  const Digest& digest() const { return digest_; }
  /// One proof per completed step, in order.
  const std::vector<DeliveryProof>& step_proofs() const { return proofs_; }

  const DeliveryProof& final_proof() const {
    if (status_ == Status::Abandoned) throw Error(ErrorCode::Abandoned, "promotion abandoned before completion");
    if (status_ != Status::Complete) throw Error(ErrorCode::ConfigInvalid, "promotion still running");
    return proofs_.back();
  }

 private:
  void send_step(const std::optional<ThresholdSig>& carried, Outbox& out) {
    auto msgs = ppb_send(*crypto_, params_, self_, {epoch_, self_, step_}, value_, carried);
    for (std::size_t i = 0; i < msgs.size(); ++i) {
      out.send(PartyId{static_cast<std::uint16_t>(i)}, std::move(msgs[i]));
    }
  }

  const ThresholdCrypto* crypto_;
  ProtocolParams params_;
  PartyId self_;
  Epoch epoch_;
  Bytes value_;
  Digest digest_;
  Status status_ = Status::Idle;
  std::uint32_t step_ = 0;
  std::map<PartyId, SigShare> shares_;
  std::vector<DeliveryProof> proofs_;
};

}  // namespace slim_hbbft
