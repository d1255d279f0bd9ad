#pragma once

#include <map>
#include <optional>
#include <vector>

#include "slim_hbbft/crypto.hpp"
#include "slim_hbbft/outbox.hpp"
#include "slim_hbbft/types.hpp"

namespace slim_hbbft {

using Committee = std::vector<PartyId>;

// The epoch doubles as the coin id for committee selection.
inline Bytes committee_coin_id(Epoch epoch) { return ByteWriter().bytes(as_bytes("committee")).u32(epoch).take(); }
inline Bytes leader_coin_id(Epoch epoch) { return ByteWriter().bytes(as_bytes("leader")).u32(epoch).take(); }

/// One party's view of committee selection for one epoch: multicast own coin
/// share, collect verified shares (at most one per sender), toss once coin_t
/// have arrived.
class CommitteeSelection {
 public:
  CommitteeSelection(const ThresholdCrypto& crypto, const ProtocolParams& params, PartyId self, Epoch epoch)
      : crypto_(&crypto), params_(params), self_(self), epoch_(epoch), coin_id_(committee_coin_id(epoch)) {}

  void start(Outbox& out) {
    if (started_) throw Error(ErrorCode::DuplicateStart, "committee selection already started for epoch");
    started_ = true;
    Message m{MessageKind::CoinShare, epoch_, self_, 0, crypto_->coin_share(self_, coin_id_).share};
    out.multicast(params_.n, m);
  }

  /// Returns the committee exactly once, on the share that completes the set.
  std::optional<Committee> handle_share(const Message& msg, Outbox& out) {
    CoinShare share{msg.sender, coin_id_, msg.body};
    if (msg.body.size() != params_.sec_param || !crypto_->coin_verify(share)) {
      ++invalid_;
      out.drop(msg, "invalid_coin_share");
      return std::nullopt;
    }
    if (sigma_.contains(msg.sender)) {
      out.drop(msg, "duplicate");
      return std::nullopt;
    }
    sigma_.emplace(msg.sender, std::move(share));
    if (committee_ || sigma_.size() < crypto_->coin_t()) return std::nullopt;

    std::vector<CoinShare> shares;
    for (const auto& [_, s] : sigma_) shares.push_back(s);
    committee_ = crypto_->coin_toss(coin_id_, shares, params_.kappa);
    return committee_;
  }

  bool started() const { return started_; }
  const std::optional<Committee>& committee() const { return committee_; }
  std::size_t share_count() const { return sigma_.size(); }
  std::size_t invalid_count() const { return invalid_; }

 private:
  const ThresholdCrypto* crypto_;
  ProtocolParams params_;
  PartyId self_;
  Epoch epoch_;
  Bytes coin_id_;
  bool started_ = false;
  std::map<PartyId, CoinShare> sigma_;
  std::optional<Committee> committee_;
  std::size_t invalid_ = 0;
};

/// Single-party election over the leader coin of `epoch`.
inline PartyId elect_leader(const ThresholdCrypto& crypto, Epoch epoch, std::span<const CoinShare> shares) {
  return crypto.coin_toss(leader_coin_id(epoch), shares, 1).front();
}

inline std::optional<std::size_t> committee_index(const Committee& c, PartyId p) {
  for (std::size_t i = 0; i < c.size(); ++i) {
    if (c[i] == p) return i;
  }
  return std::nullopt;
}

}  // namespace slim_hbbft
