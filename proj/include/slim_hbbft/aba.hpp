#pragma once

#include <array>
#include <map>
#include <optional>
#include <set>
#include <vector>

#include "slim_hbbft/crypto.hpp"
#include "slim_hbbft/outbox.hpp"
#include "slim_hbbft/types.hpp"

namespace slim_hbbft {

inline Bytes aba_coin_id(Epoch epoch, std::uint32_t j, std::uint32_t round) {
  return ByteWriter().bytes(as_bytes("aba")).u32(epoch).u32(j).u32(round).take();
}

/// Coin schedule: rounds 1 and 2 use fixed values, later rounds the threshold coin.
inline std::optional<bool> fixed_coin(std::uint32_t round) {
  if (round == 1) return true;
  if (round == 2) return false;
  return std::nullopt;
}

/// Common-coin binary agreement (value broadcast + AUX + coin per round).
///
/// ABA_EST / ABA_AUX bodies are two bytes: the bit and a flag byte.
/// EST flag 1 = "sender holds the proposal" (only on the sender's own input).
/// AUX flag 1 = terminal: the sender decided `bit` in the tagged round and
/// halted. A terminal message counts as the sender's EST and AUX for every
/// later round, and f+1 matching terminal messages decide.
class BinaryAgreement {
 public:
  static constexpr std::uint8_t kHoldsFlag = 1;
  static constexpr std::uint8_t kFinalFlag = 1;
  static constexpr std::uint32_t kMaxRoundLead = 1000;

  BinaryAgreement(const ThresholdCrypto& crypto, const ProtocolParams& params, PartyId self, Epoch epoch,
                  std::uint32_t j)
      : crypto_(&crypto), params_(params), self_(self), epoch_(epoch), j_(j) {}

  /// First input multicasts EST(bit) for round 1. Repeating the same bit is a
  /// no-op; 0 followed by 1 is the upgrade path (extra EST(1) while still in
  /// round 1); 1 followed by 0 is rejected.
  void input(bool bit, bool holds, Outbox& out) {
    if (input_) {
      if (*input_ == bit) return;
      if (*input_ && !bit) throw Error(ErrorCode::DoubleInput, "ABA input 1 cannot be replaced by 0");
      input_ = true;
      emit_input(true, "upgrade", out);
      if (!decided_ && round_ == 1 && !round(1).est_sent[1]) send_est(1, true, holds, out);
      progress(out);
      return;
    }
    input_ = bit;
    if (round_ == 1) est_ = bit;
    emit_input(bit, "", out);
    if (!decided_ && round_ == 1 && !round(1).est_sent[bit]) send_est(1, bit, holds && bit, out);
    progress(out);
  }

  void handle(const Message& msg, Outbox& out) {
    if (halted_) {
      out.drop(msg, "halted");
      return;
    }
    std::uint32_t r = aba_tag_round(msg.tag);
    if (r == 0 || r > round_ + kMaxRoundLead) {
      out.drop(msg, "malformed");
      return;
    }
    switch (msg.kind) {
      case MessageKind::AbaEst: {
        if (msg.body.size() != 2 || msg.body[0] > 1 || (msg.body[1] & ~kHoldsFlag) != 0) {
          out.drop(msg, "malformed");
          return;
        }
        bool b = msg.body[0] == 1;
        auto& rs = round(r);
        if (!rs.est_from[b].insert(msg.sender).second) {
          out.drop(msg, "duplicate");
          return;
        }
        if (r == 1 && b && (msg.body[1] & kHoldsFlag)) holders_.insert(msg.sender);
        break;
      }
      case MessageKind::AbaAux: {
        if (msg.body.size() != 2 || msg.body[0] > 1 || (msg.body[1] & ~kFinalFlag) != 0) {
          out.drop(msg, "malformed");
          return;
        }
        bool b = msg.body[0] == 1;
        if (msg.body[1] & kFinalFlag) {
          if (finals_.contains(msg.sender)) {
            out.drop(msg, "duplicate");
            return;
          }
          finals_.emplace(msg.sender, Final{b, r});
          std::size_t matching = 0;
          for (const auto& [_, fin] : finals_) matching += fin.bit == b;
          if (matching >= params_.f + 1) {
            decide(b, out);
            return;
          }
        } else {
          auto& rs = round(r);
          if (!rs.aux_from.emplace(msg.sender, b).second) {
            out.drop(msg, "duplicate");
            return;
          }
        }
        break;
      }
      case MessageKind::AbaCoinShare: {
        if (fixed_coin(r)) {
          out.drop(msg, "malformed");
          return;
        }
        CoinShare share{msg.sender, aba_coin_id(epoch_, j_, r), msg.body};
        if (msg.body.size() != params_.sec_param || !crypto_->coin_verify(share)) {
          out.drop(msg, "invalid_coin_share");
          return;
        }
        if (!round(r).coin_shares.emplace(msg.sender, std::move(share)).second) {
          out.drop(msg, "duplicate");
          return;
        }
        break;
      }
      default:
        out.drop(msg, "malformed");
        return;
    }
    progress(out);
  }

  std::optional<bool> decided() const { return decided_; }
  std::uint32_t decided_round() const { return decided_round_; }
  bool halted() const { return halted_; }
  std::uint32_t current_round() const { return round_; }
  std::optional<bool> input_value() const { return input_; }
  /// Parties whose round-1 EST(1) carried the holds flag.
  const std::set<PartyId>& flagged_holders() const { return holders_; }

 private:
  struct Round {
    std::array<std::set<PartyId>, 2> est_from;
    std::array<bool, 2> est_sent{};
    std::array<bool, 2> bin{};
    bool aux_sent = false;
    std::map<PartyId, bool> aux_from;
    bool vals_ready = false;
    std::array<bool, 2> vals{};
    bool coin_sent = false;
    std::map<PartyId, CoinShare> coin_shares;
    std::optional<bool> coin;
  };

  struct Final {
    bool bit;
    std::uint32_t round;
  };

  Round& round(std::uint32_t r) { return rounds_[r]; }

  std::size_t est_support(std::uint32_t r, bool b) {
    auto& rs = round(r);
    std::size_t c = rs.est_from[b].size();
    for (const auto& [p, fin] : finals_) {
      if (fin.round < r && fin.bit == b && !rs.est_from[b].contains(p)) ++c;
    }
    return c;
  }

  void send_est(std::uint32_t r, bool b, bool holds, Outbox& out) {
    round(r).est_sent[b] = true;
    Bytes body{static_cast<std::uint8_t>(b), static_cast<std::uint8_t>(holds ? kHoldsFlag : 0)};
    out.multicast(params_.n, Message{MessageKind::AbaEst, epoch_, self_, aba_tag(j_, r), body});
  }

  void send_aux(std::uint32_t r, bool b, bool final_flag, Outbox& out) {
    Bytes body{static_cast<std::uint8_t>(b), static_cast<std::uint8_t>(final_flag ? kFinalFlag : 0)};
    out.multicast(params_.n, Message{MessageKind::AbaAux, epoch_, self_, aba_tag(j_, r), body});
  }

  void emit_input(bool bit, std::string note, Outbox& out) {
    LocalEvent e{LocalEventKind::Input};
    e.epoch = epoch_;
    e.j = static_cast<std::int32_t>(j_);
    e.bit = bit;
    e.round = round_;
    e.note = std::move(note);
    out.emit(std::move(e));
  }

  void decide(bool b, Outbox& out) {
    if (decided_) return;
    decided_ = b;
    decided_round_ = round_;
    halted_ = true;
    LocalEvent e{LocalEventKind::Decide};
    e.epoch = epoch_;
    e.j = static_cast<std::int32_t>(j_);
    e.bit = b;
    e.round = round_;
    out.emit(std::move(e));
    send_aux(round_, b, true, out);
  }

  // Relay EST at f+1, accept into bin_values at 2f+1, for every round reached so far.
  void value_broadcast(std::uint32_t r, Outbox& out) {
    for (int b = 0; b < 2; ++b) {
      std::size_t support = est_support(r, b);
      auto& rs = round(r);
      if (support >= params_.f + 1 && !rs.est_sent[b]) send_est(r, b, false, out);
      if (support >= 2 * params_.f + 1) rs.bin[b] = true;
    }
  }

  void progress(Outbox& out) {
    while (!halted_) {
      for (std::uint32_t r = 1; r <= round_; ++r) value_broadcast(r, out);
      auto& rs = round(round_);
      if (!rs.aux_sent && (rs.bin[0] || rs.bin[1])) {
        bool b = rs.bin[0] && rs.bin[1] ? est_ : rs.bin[1];
        rs.aux_sent = true;
        send_aux(round_, b, false, out);
      }
      if (!rs.vals_ready) {
        std::set<PartyId> senders;
        std::array<bool, 2> vals{};
        for (const auto& [p, b] : rs.aux_from) {
          if (rs.bin[b]) {
            senders.insert(p);
            vals[b] = true;
          }
        }
        for (const auto& [p, fin] : finals_) {
          if (fin.round < round_ && rs.bin[fin.bit] && senders.insert(p).second) vals[fin.bit] = true;
        }
        if (senders.size() < params_.n - params_.f) return;
        rs.vals_ready = true;
        rs.vals = vals;
        if (!fixed_coin(round_) && !rs.coin_sent) {
          rs.coin_sent = true;
          auto id = aba_coin_id(epoch_, j_, round_);
          out.multicast(params_.n, Message{MessageKind::AbaCoinShare, epoch_, self_, aba_tag(j_, round_),
                                           crypto_->coin_share(self_, id).share});
        }
      }
      if (!rs.coin) {
        if (auto fixed = fixed_coin(round_)) {
          rs.coin = *fixed;
        } else if (rs.coin_shares.size() >= crypto_->coin_t()) {
          std::vector<CoinShare> shares;
          for (const auto& [_, s] : rs.coin_shares) shares.push_back(s);
          rs.coin = (crypto_->coin_seed(aba_coin_id(epoch_, j_, round_), shares).bytes[0] & 1) == 1;
        } else {
          return;
        }
      }
      bool coin = *rs.coin;
      if (rs.vals[0] != rs.vals[1]) {
        bool b = rs.vals[1];
        est_ = b;
        if (b == coin) {
          decide(b, out);
          return;
        }
      } else {
        est_ = coin;
      }
      ++round_;
      if (!round(round_).est_sent[est_]) send_est(round_, est_, false, out);
    }
  }

  const ThresholdCrypto* crypto_;
  ProtocolParams params_;
  PartyId self_;
  Epoch epoch_;
  std::uint32_t j_;
  std::optional<bool> input_;
  bool est_ = false;
  std::uint32_t round_ = 1;
  std::map<std::uint32_t, Round> rounds_;
  std::map<PartyId, Final> finals_;
  std::set<PartyId> holders_;
  std::optional<bool> decided_;
  std::uint32_t decided_round_ = 0;
  bool halted_ = false;
};

}  // namespace slim_hbbft
