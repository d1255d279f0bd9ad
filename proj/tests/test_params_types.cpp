#include <gtest/gtest.h>

#include "slim_hbbft/types.hpp"

using namespace slim_hbbft;

namespace {

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error raised";
  return ErrorCode::ConfigInvalid;
}

}  // namespace

TEST(Params, AcceptsThreeFPlusOne) {
  for (std::uint32_t f = 1; f <= 10; ++f) {
    auto p = validate_params(3 * f + 1, f, f + 1, 4, 32, 1);
    EXPECT_EQ(p.n, 3 * f + 1);
    EXPECT_EQ(p.kappa, f + 1);
  }
}

TEST(Params, RejectsBadConfigurations) {
  EXPECT_EQ(code_of([] { validate_params(5, 1, 2, 1, 32, 0); }), ErrorCode::NotThreeFPlusOne);
  EXPECT_EQ(code_of([] { validate_params(4, 1, 0, 1, 32, 0); }), ErrorCode::KappaOutOfRange);
  EXPECT_EQ(code_of([] { validate_params(4, 1, 5, 1, 32, 0); }), ErrorCode::KappaOutOfRange);
  EXPECT_EQ(code_of([] { validate_params(4, 1, 2, 0, 32, 0); }), ErrorCode::ZeroBatchSize);
  EXPECT_EQ(code_of([] { validate_params(4, 1, 2, 1, 0, 0); }), ErrorCode::ZeroSecurityParam);
  EXPECT_EQ(code_of([] { validate_params(4, 1, 2, 1, 32, 0, 2); }), ErrorCode::ConfigInvalid);
}

TEST(Params, DefaultKappaIsFPlusOne) {
  auto p = default_params(3, 8, 32, 9);
  EXPECT_EQ(p.n, 10u);
  EXPECT_EQ(p.kappa, 4u);
}

TEST(Params, ThresholdsFollowF) {
  for (std::uint32_t f = 1; f <= 6; ++f) {
    auto t = derive_thresholds(validate_params(3 * f + 1, f, f + 1, 1, 32, 0));
    EXPECT_EQ(t.sig_t, 2 * f + 1);
    EXPECT_EQ(t.coin_t, f + 1);
    EXPECT_EQ(t.dec_t, f + 1);
  }
}

TEST(Params, NMinusFEqualsTwoFPlusOne) {
  for (std::uint32_t f = 1; f <= 50; ++f) {
    auto p = validate_params(3 * f + 1, f, 1, 1, 32, 0);
    EXPECT_EQ(p.n - p.f, 2 * p.f + 1);
  }
}

TEST(Message, HeaderRoundTrip) {
  Message m{MessageKind::AbaAux, 77, PartyId{5}, aba_tag(3, 9), Bytes{1, 0}};
  Bytes wire = m.encode();
  ASSERT_EQ(wire.size(), kHeaderSize + 2);
  EXPECT_EQ(wire[0], static_cast<std::uint8_t>(MessageKind::AbaAux));
  EXPECT_EQ(wire[15], 0);  // reserved
  EXPECT_EQ(Message::decode(wire), m);
}

TEST(Message, DecodeRejectsCorruption) {
  Message m{MessageKind::PpbAck, 1, PartyId{2}, 3, Bytes(32, 7)};
  Bytes wire = m.encode();

  Bytes bad_kind = wire;
  bad_kind[0] = 0;
  EXPECT_EQ(code_of([&] { Message::decode(bad_kind); }), ErrorCode::Malformed);
  bad_kind[0] = 11;
  EXPECT_EQ(code_of([&] { Message::decode(bad_kind); }), ErrorCode::Malformed);

  Bytes reserved = wire;
  reserved[15] = 1;
  EXPECT_EQ(code_of([&] { Message::decode(reserved); }), ErrorCode::Malformed);

  Bytes truncated(wire.begin(), wire.end() - 1);
  EXPECT_EQ(code_of([&] { Message::decode(truncated); }), ErrorCode::Malformed);

  Bytes extra = wire;
  extra.push_back(0);
  EXPECT_EQ(code_of([&] { Message::decode(extra); }), ErrorCode::Malformed);
}

TEST(Message, KindNamesRoundTrip) {
  for (std::uint8_t k = 1; k <= kMaxMessageKind; ++k) {
    auto kind = static_cast<MessageKind>(k);
    EXPECT_EQ(message_kind_from_string(to_string(kind)), kind);
  }
  EXPECT_FALSE(message_kind_from_string("NOPE").has_value());
}

TEST(Message, TagsPackAndUnpack) {
  auto t = ppb_tag(PartyId{12}, 4);
  EXPECT_EQ(ppb_tag_proposer(t), PartyId{12});
  EXPECT_EQ(ppb_tag_step(t), 4u);
  auto a = aba_tag(6, 300);
  EXPECT_EQ(aba_tag_index(a), 6u);
  EXPECT_EQ(aba_tag_round(a), 300u);
}

// Hand-computed sizes at K = 32 and a 100-byte value.
TEST(Message, BodySizesAtK32) {
  const std::size_t k = 32, v = 100;
  EXPECT_EQ(body_size(MessageKind::CoinShare, k), 32u);
  EXPECT_EQ(body_size(MessageKind::PpbSend, k, v), 132u);
  EXPECT_EQ(body_size(MessageKind::PpbSend, k, v, true), 164u);
  EXPECT_EQ(body_size(MessageKind::PpbAck, k), 32u);
  EXPECT_EQ(body_size(MessageKind::Propose, k, v), 132u);
  EXPECT_EQ(body_size(MessageKind::Suggest, k, v), 134u);
  EXPECT_EQ(body_size(MessageKind::AbaEst, k), 2u);
  EXPECT_EQ(body_size(MessageKind::AbaAux, k), 2u);
  EXPECT_EQ(body_size(MessageKind::AbaCoinShare, k), 32u);
  EXPECT_EQ(body_size(MessageKind::DecShare, k), 36u);
  EXPECT_EQ(body_size(MessageKind::ProposalEcho, k, v), 132u);
}

TEST(Batch, RoundTrip) {
  std::vector<Request> batch{{"a", Bytes{1, 2, 3}}, {"client-7", Bytes(40, 9)}, {"", {}}};
  Bytes enc = encode_batch(batch);
  // count + per request (2 + tag + 4 + payload)
  EXPECT_EQ(enc.size(), 4u + (6 + 1 + 3) + (6 + 8 + 40) + 6);
  EXPECT_EQ(decode_batch(enc, 1024), batch);
}

TEST(Batch, RejectsOversizeAndTrailingBytes) {
  std::vector<Request> batch{{"x", Bytes(100, 1)}};
  Bytes enc = encode_batch(batch);
  EXPECT_EQ(code_of([&] { decode_batch(enc, 99); }), ErrorCode::PayloadTooLarge);
  enc.push_back(0);
  EXPECT_EQ(code_of([&] { decode_batch(enc, 1024); }), ErrorCode::Malformed);
  Bytes truncated(enc.begin(), enc.begin() + 5);
  EXPECT_EQ(code_of([&] { decode_batch(truncated, 1024); }), ErrorCode::Malformed);
}

TEST(Bytes, HexRoundTrip) {
  Bytes b{0x00, 0xab, 0xff, 0x10};
  EXPECT_EQ(to_hex(b), "00abff10");
  EXPECT_EQ(from_hex("00abff10"), b);
}

TEST(Bytes, Sha256KnownVector) {
  EXPECT_EQ(sha256(as_bytes("abc")).hex(), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Bytes, ExpandIsDeterministicAndLabelled) {
  Digest seed = sha256(as_bytes("seed"));
  EXPECT_EQ(expand(seed, "a", 100), expand(seed, "a", 100));
  EXPECT_NE(expand(seed, "a", 100), expand(seed, "b", 100));
  auto longer = expand(seed, "a", 200);
  EXPECT_TRUE(std::equal(longer.begin(), longer.begin() + 100, expand(seed, "a", 100).begin()));
}
