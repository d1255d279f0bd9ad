#pragma once

#include <algorithm>
#include <compare>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "slim_hbbft/bytes.hpp"
#include "slim_hbbft/error.hpp"

namespace slim_hbbft {

using Epoch = std::uint32_t;

struct PartyId {
  std::uint16_t index = 0;

  auto operator<=>(const PartyId&) const = default;
};

/// Validated protocol configuration. Construct through `validate_params`.
struct ProtocolParams {
  std::uint32_t n = 4;
  std::uint32_t f = 1;
  std::uint32_t kappa = 2;
  std::uint32_t batch_size = 1;
  std::uint32_t sec_param = 32;  // K: byte size of every share and signature
  std::uint64_t seed = 0;
  std::uint32_t promotion_steps = 1;
  std::size_t max_payload = 64 * 1024;

  auto operator<=>(const ProtocolParams&) const = default;
};

struct Thresholds {
  std::uint32_t sig_t;
  std::uint32_t coin_t;
  std::uint32_t dec_t;

  auto operator<=>(const Thresholds&) const = default;
};

inline ProtocolParams validate_params(std::uint32_t n, std::uint32_t f, std::uint32_t kappa,
                                      std::uint32_t batch_size, std::uint32_t sec_param,
                                      std::uint64_t seed, std::uint32_t promotion_steps = 1) {
  if (n != 3 * f + 1) {
    throw Error(ErrorCode::NotThreeFPlusOne,
                "n=" + std::to_string(n) + " but 3f+1=" + std::to_string(3 * f + 1));
  }
  if (n > std::numeric_limits<std::uint16_t>::max()) {
    throw Error(ErrorCode::TooManyParties, "party index must fit in 16 bits");
  }
  if (kappa < 1 || kappa > n) {
    throw Error(ErrorCode::KappaOutOfRange, "kappa=" + std::to_string(kappa) + " outside [1, n]");
  }
  if (batch_size == 0) throw Error(ErrorCode::ZeroBatchSize, "batch_size must be >= 1");
  if (sec_param == 0) throw Error(ErrorCode::ZeroSecurityParam, "K must be >= 1");
  if (promotion_steps != 1 && promotion_steps != 4) {
    throw Error(ErrorCode::ConfigInvalid, "promotion steps must be 1 or 4");
  }
  ProtocolParams p;
  p.n = n;
  p.f = f;
  p.kappa = kappa;
  p.batch_size = batch_size;
  p.sec_param = sec_param;
  p.seed = seed;
  p.promotion_steps = promotion_steps;
  return p;
}

/// Default committee size f+1.
inline ProtocolParams default_params(std::uint32_t f, std::uint32_t batch_size, std::uint32_t sec_param,
                                     std::uint64_t seed) {
  return validate_params(3 * f + 1, f, f + 1, batch_size, sec_param, seed);
}

inline Thresholds derive_thresholds(const ProtocolParams& p) {
  return Thresholds{2 * p.f + 1, p.f + 1, p.f + 1};
}

/// Client request. `client_tag` identifies the request for deduplication.
struct Request {
  std::string client_tag;
  Bytes payload;

  auto operator<=>(const Request&) const = default;

  Digest digest() const { return Hasher("request").field(client_tag).field(payload).finish(); }
};

// ---------------------------------------------------------------------------
// Canonical messages

enum class MessageKind : std::uint8_t {
  CoinShare = 1,
  PpbSend = 2,
  PpbAck = 3,
  Propose = 4,
  Suggest = 5,
  AbaEst = 6,
  AbaAux = 7,
  AbaCoinShare = 8,
  DecShare = 9,
  ProposalEcho = 10,
};

inline constexpr std::uint8_t kMaxMessageKind = 10;

inline std::string_view to_string(MessageKind k) {
  switch (k) {
    case MessageKind::CoinShare: return "COIN_SHARE";
    case MessageKind::PpbSend: return "PPB_SEND";
    case MessageKind::PpbAck: return "PPB_ACK";
    case MessageKind::Propose: return "PROPOSE";
    case MessageKind::Suggest: return "SUGGEST";
    case MessageKind::AbaEst: return "ABA_EST";
    case MessageKind::AbaAux: return "ABA_AUX";
    case MessageKind::AbaCoinShare: return "ABA_COIN_SHARE";
    case MessageKind::DecShare: return "DEC_SHARE";
    case MessageKind::ProposalEcho: return "PROPOSAL_ECHO";
  }
  return "UNKNOWN";
}

inline std::optional<MessageKind> message_kind_from_string(std::string_view s) {
  for (std::uint8_t k = 1; k <= kMaxMessageKind; ++k) {
    auto kind = static_cast<MessageKind>(k);
    if (to_string(kind) == s) return kind;
  }
  return std::nullopt;
}

inline constexpr std::size_t kHeaderSize = 16;

/// One protocol message. Header layout (16 bytes, big endian):
/// kind u8 | epoch u32 | sender u16 | tag u32 | body length u32 | reserved u8.
/// `tag` names the sub-instance: see ppb_tag / aba_tag / index_tag.
struct Message {
  MessageKind kind = MessageKind::CoinShare;
  Epoch epoch = 0;
  PartyId sender;
  std::uint32_t tag = 0;
  Bytes body;

  bool operator==(const Message&) const = default;

  std::size_t wire_size() const { return kHeaderSize + body.size(); }

  Bytes encode() const {
    ByteWriter w;
    w.u8(static_cast<std::uint8_t>(kind))
        .u32(epoch)
        .u16(sender.index)
        .u32(tag)
        .u32(static_cast<std::uint32_t>(body.size()))
        .u8(0)
        .bytes(body);
    return w.take();
  }

  static Message decode(ByteView data) {
    ByteReader r(data);
    Message m;
    std::uint8_t kind = r.u8();
    if (kind < 1 || kind > kMaxMessageKind) throw Error(ErrorCode::Malformed, "unknown message kind");
    m.kind = static_cast<MessageKind>(kind);
    m.epoch = r.u32();
    m.sender = PartyId{r.u16()};
    m.tag = r.u32();
    std::uint32_t len = r.u32();
    if (r.u8() != 0) throw Error(ErrorCode::Malformed, "reserved header byte set");
    if (r.remaining() != len) throw Error(ErrorCode::Malformed, "body length mismatch");
    m.body = r.bytes(len);
    return m;
  }

  Digest digest() const { return sha256(encode()); }
};

inline std::uint32_t ppb_tag(PartyId proposer, std::uint32_t step) {
  return (static_cast<std::uint32_t>(proposer.index) << 16) | (step & 0xFFFF);
}
inline PartyId ppb_tag_proposer(std::uint32_t tag) { return PartyId{static_cast<std::uint16_t>(tag >> 16)}; }
inline std::uint32_t ppb_tag_step(std::uint32_t tag) { return tag & 0xFFFF; }

inline std::uint32_t aba_tag(std::uint32_t j, std::uint32_t round) { return (j << 16) | (round & 0xFFFF); }
inline std::uint32_t aba_tag_index(std::uint32_t tag) { return tag >> 16; }
inline std::uint32_t aba_tag_round(std::uint32_t tag) { return tag & 0xFFFF; }

/// Body sizes as functions of K and the value/ciphertext length.
/// `value_len` is |ciphertext| for PROPOSE/SUGGEST/ECHO and |value| for PPB_SEND.
inline std::size_t body_size(MessageKind kind, std::size_t k, std::size_t value_len = 0, bool carries_proof = false) {
  switch (kind) {
    case MessageKind::CoinShare: return k;
    case MessageKind::PpbSend: return value_len + k + (carries_proof ? k : 0);
    case MessageKind::PpbAck: return k;
    case MessageKind::Propose: return value_len + k;
    case MessageKind::Suggest: return value_len + k + 2;
    case MessageKind::AbaEst:
    case MessageKind::AbaAux: return 2;
    case MessageKind::AbaCoinShare: return k;
    case MessageKind::DecShare: return k + 4;
    case MessageKind::ProposalEcho: return value_len + k;
  }
  return 0;
}

// ---------------------------------------------------------------------------
// Batches: the plaintext a committee member encrypts.
// Layout: count u32, then per request: tag length u16 | tag | payload length u32 | payload.

inline Bytes encode_batch(const std::vector<Request>& batch) {
  ByteWriter w;
  w.u32(static_cast<std::uint32_t>(batch.size()));
  for (const auto& r : batch) {
    w.u16(static_cast<std::uint16_t>(r.client_tag.size())).bytes(as_bytes(r.client_tag));
    w.u32(static_cast<std::uint32_t>(r.payload.size())).bytes(r.payload);
  }
  return w.take();
}

inline std::vector<Request> decode_batch(ByteView data, std::size_t max_payload) {
  ByteReader r(data);
  std::uint32_t count = r.u32();
  std::vector<Request> out;
  for (std::uint32_t i = 0; i < count; ++i) {
    Request req;
    auto tag = r.take(r.u16());
    req.client_tag.assign(tag.begin(), tag.end());
    std::uint32_t len = r.u32();
    if (len > max_payload) throw Error(ErrorCode::PayloadTooLarge, "request payload over limit");
    req.payload = r.bytes(len);
    out.push_back(std::move(req));
  }
  if (r.remaining() != 0) throw Error(ErrorCode::Malformed, "trailing bytes after batch");
  return out;
}

}  // namespace slim_hbbft
