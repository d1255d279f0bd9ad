#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <span>
#include <vector>

#include "slim_hbbft/bytes.hpp"
#include "slim_hbbft/types.hpp"

namespace slim_hbbft {

struct SigShare {
  PartyId signer;
  Digest msg_digest;
  Bytes share;

  bool operator==(const SigShare&) const = default;
};

/// Combined threshold signature. `signers` is kept for audit only and is not
/// part of the wire encoding (only `sig` travels).
struct ThresholdSig {
  Digest msg_digest;
  Bytes sig;
  std::vector<PartyId> signers;
};

struct CoinShare {
  PartyId party;
  Bytes coin_id;
  Bytes share;

  bool operator==(const CoinShare&) const = default;
};

struct Ciphertext {
  Epoch epoch = 0;
  PartyId proposer;
  Bytes bytes;  // tag (K bytes) || masked plaintext

  bool operator==(const Ciphertext&) const = default;

  Digest ref() const {
    return Hasher("ct-ref").u64(epoch).u64(proposer.index).field(bytes).finish();
  }
};

struct DecShare {
  PartyId party;
  Digest ct_ref;
  Bytes share;

  bool operator==(const DecShare&) const = default;
};

/// Threshold signature, common coin and threshold encryption contract.
/// Implementations must be pure functions of their setup and inputs.
class ThresholdCrypto {
 public:
  virtual ~ThresholdCrypto() = default;

  virtual std::uint32_t n() const = 0;
  virtual std::uint32_t f() const = 0;
  virtual std::uint32_t k() const = 0;

  virtual SigShare sign_share(PartyId party, ByteView message) const = 0;
  virtual bool verify_share(const SigShare& share) const = 0;
  virtual ThresholdSig combine_signature(ByteView message, std::span<const SigShare> shares,
                                         std::uint32_t t) const = 0;
  virtual bool verify_threshold_sig(ByteView message, const ThresholdSig& sig) const = 0;

  virtual CoinShare coin_share(PartyId party, ByteView coin_id) const = 0;
  virtual bool coin_verify(const CoinShare& share) const = 0;
  /// Combined coin value; requires coin_t valid shares from distinct parties.
  virtual Digest coin_seed(ByteView coin_id, std::span<const CoinShare> shares) const = 0;

  virtual Ciphertext encrypt(Epoch epoch, PartyId proposer, ByteView plaintext) const = 0;
  virtual DecShare decryption_share(PartyId party, const Ciphertext& ct) const = 0;
  virtual bool verify_dec_share(const Ciphertext& ct, const DecShare& share) const = 0;
  virtual Bytes combine_decryption(const Ciphertext& ct, std::span<const DecShare> shares) const = 0;

  std::uint32_t coin_t() const { return f() + 1; }
  std::uint32_t dec_t() const { return f() + 1; }

  /// Pseudorandom size-k subset of [0, n), as the first k entries of a
  /// permutation seeded by the combined coin.
  std::vector<PartyId> coin_toss(ByteView coin_id, std::span<const CoinShare> shares, std::uint32_t k) const {
    return permutation_prefix(coin_seed(coin_id, shares), n(), k);
  }

  static std::vector<PartyId> permutation_prefix(const Digest& seed, std::uint32_t n, std::uint32_t k) {
    std::vector<std::uint16_t> order(n);
    std::iota(order.begin(), order.end(), std::uint16_t{0});
    Bytes stream = expand(seed, "permutation", 8 * static_cast<std::size_t>(n));
    ByteReader r(stream);
    for (std::uint32_t i = n; i > 1; --i) {
      std::uint64_t pick = r.u64() % i;
      std::swap(order[i - 1], order[pick]);
    }
    // Fisher-Yates from the back; read the permutation from the back too.
    std::vector<PartyId> out;
    k = std::min(k, n);
    for (std::uint32_t i = 0; i < k; ++i) out.push_back(PartyId{order[n - 1 - i]});
    return out;
  }
};

/// Per-party secret as handed out by the dealer.
struct KeyShare {
  PartyId party;
  Digest secret;
};

/// Trusted-setup output. Everything derives from `seed`.
struct DealerSetup {
  std::uint32_t n = 0;
  std::uint32_t f = 0;
  std::uint32_t k = 0;
  std::uint64_t seed = 0;
  Digest master;
  std::vector<Digest> party_secrets;

  static DealerSetup generate(std::uint32_t n, std::uint32_t f, std::uint32_t k, std::uint64_t seed) {
    DealerSetup s;
    s.n = n;
    s.f = f;
    s.k = k;
    s.seed = seed;
    s.master = Hasher("dealer-master").u64(seed).u64(n).u64(f).finish();
    for (std::uint32_t i = 0; i < n; ++i) {
      s.party_secrets.push_back(Hasher("dealer-party").field(s.master).u64(i).finish());
    }
    return s;
  }

  static DealerSetup generate(const ProtocolParams& p) { return generate(p.n, p.f, p.sec_param, p.seed); }

  KeyShare key_share(PartyId p) const { return {p, party_secrets.at(p.index)}; }

  // Key file: "SHBK" | version u16 | n u16 | f u16 | K u32 | seed u64 | n x 32-byte secrets.
  Bytes serialize() const {
    ByteWriter w;
    w.bytes(as_bytes("SHBK")).u16(1).u16(static_cast<std::uint16_t>(n)).u16(static_cast<std::uint16_t>(f));
    w.u32(k).u64(seed);
    for (const auto& s : party_secrets) w.bytes(s.view());
    return w.take();
  }

  static DealerSetup deserialize(ByteView data) {
    try {
      ByteReader r(data);
      auto magic = r.take(4);
      if (!std::equal(magic.begin(), magic.end(), as_bytes("SHBK").begin())) {
        throw Error(ErrorCode::KeyFileCorrupt, "bad magic");
      }
      if (r.u16() != 1) throw Error(ErrorCode::KeyFileCorrupt, "unsupported version");
      std::uint32_t n = r.u16();
      std::uint32_t f = r.u16();
      std::uint32_t k = r.u32();
      std::uint64_t seed = r.u64();
      DealerSetup expected = generate(n, f, k, seed);
      for (std::uint32_t i = 0; i < n; ++i) {
        auto s = r.take(32);
        if (!std::equal(s.begin(), s.end(), expected.party_secrets[i].bytes.begin())) {
          throw Error(ErrorCode::KeyFileCorrupt, "party secret does not match dealer seed");
        }
      }
      if (r.remaining() != 0) throw Error(ErrorCode::KeyFileCorrupt, "trailing bytes");
      return expected;
    } catch (const Error& e) {
      if (e.code() == ErrorCode::KeyFileCorrupt) throw;
      throw Error(ErrorCode::KeyFileCorrupt, e.what());
    }
  }

  void save(const std::filesystem::path& path) const {
    auto bytes = serialize();
    std::ofstream out(path, std::ios::binary);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(ErrorCode::ConfigInvalid, "cannot write key file " + path.string());
  }

  static DealerSetup load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::ConfigInvalid, "cannot read key file " + path.string());
    Bytes bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return deserialize(bytes);
  }
};

// Share derivations that only need a single party's key. Exposed so tests can
// model an adversary holding nothing but corrupted parties' key material.
namespace share_math {

inline Bytes sig_share(const KeyShare& key, const Digest& msg_digest, std::uint32_t k) {
  return expand(Hasher("sig-share").field(key.secret).field(msg_digest).finish(), "share", k);
}

inline Bytes coin_share(const KeyShare& key, ByteView coin_id, std::uint32_t k) {
  return expand(Hasher("coin-share").field(key.secret).field(coin_id).finish(), "share", k);
}

inline Bytes dec_share(const KeyShare& key, const Digest& ct_ref, std::uint32_t k) {
  return expand(Hasher("dec-share").field(key.secret).field(ct_ref).finish(), "share", k);
}

}  // namespace share_math

/// Simulation-grade provider: shares are keyed digests of per-party secrets;
/// combination checks count, distinctness and validity, then re-derives the
/// result from the dealer master secret. Not secure against a real attacker
/// that can read this object; the security model is "parties only use their
/// own KeyShare".
class DealerCrypto final : public ThresholdCrypto {
 public:
  explicit DealerCrypto(DealerSetup setup) : setup_(std::move(setup)) {}

  const DealerSetup& setup() const { return setup_; }

  std::uint32_t n() const override { return setup_.n; }
  std::uint32_t f() const override { return setup_.f; }
  std::uint32_t k() const override { return setup_.k; }

  static Digest message_digest(ByteView message) { return Hasher("sign-msg").field(message).finish(); }

  SigShare sign_share(PartyId party, ByteView message) const override {
    auto d = message_digest(message);
    return {party, d, share_math::sig_share(key(party), d, k())};
  }

  bool verify_share(const SigShare& s) const override {
    if (!valid_party(s.signer)) return false;
    return s.share == share_math::sig_share(key(s.signer), s.msg_digest, k());
  }

  ThresholdSig combine_signature(ByteView message, std::span<const SigShare> shares,
                                 std::uint32_t t) const override {
    auto d = message_digest(message);
    std::set<PartyId> signers;
    for (const auto& s : shares) {
      if (s.msg_digest != d || !verify_share(s)) {
        throw Error(ErrorCode::InvalidShare, "signature share from party " + std::to_string(s.signer.index),
                    s.signer.index);
      }
      signers.insert(s.signer);
    }
    if (signers.size() < t) {
      throw Error(ErrorCode::InsufficientShares,
                  std::to_string(signers.size()) + " distinct signers, need " + std::to_string(t));
    }
    return ThresholdSig{d, group_sig(d), {signers.begin(), signers.end()}};
  }

  bool verify_threshold_sig(ByteView message, const ThresholdSig& sig) const override {
    auto d = message_digest(message);
    return sig.msg_digest == d && sig.sig == group_sig(d);
  }

  CoinShare coin_share(PartyId party, ByteView coin_id) const override {
    return {party, Bytes(coin_id.begin(), coin_id.end()), share_math::coin_share(key(party), coin_id, k())};
  }

  bool coin_verify(const CoinShare& s) const override {
    if (!valid_party(s.party)) return false;
    return s.share == share_math::coin_share(key(s.party), s.coin_id, k());
  }

  Digest coin_seed(ByteView coin_id, std::span<const CoinShare> shares) const override {
    std::set<PartyId> parties;
    for (const auto& s : shares) {
      if (!std::equal(s.coin_id.begin(), s.coin_id.end(), coin_id.begin(), coin_id.end()) || !coin_verify(s)) {
        throw Error(ErrorCode::InvalidShare, "coin share from party " + std::to_string(s.party.index),
                    s.party.index);
      }
      parties.insert(s.party);
    }
    if (parties.size() < coin_t()) {
      throw Error(ErrorCode::InsufficientShares,
                  std::to_string(parties.size()) + " coin shares, need " + std::to_string(coin_t()));
    }
    return Hasher("coin").field(setup_.master).field(coin_id).finish();
  }

  Ciphertext encrypt(Epoch epoch, PartyId proposer, ByteView plaintext) const override {
    Bytes tag = expand(
        Hasher("ct-tag").field(setup_.master).u64(epoch).u64(proposer.index).field(plaintext).finish(), "tag",
        k());
    Bytes mask = keystream(epoch, proposer, tag, plaintext.size());
    Ciphertext ct{epoch, proposer, tag};
    ct.bytes.reserve(tag.size() + plaintext.size());
    for (std::size_t i = 0; i < plaintext.size(); ++i) ct.bytes.push_back(plaintext[i] ^ mask[i]);
    return ct;
  }

  DecShare decryption_share(PartyId party, const Ciphertext& ct) const override {
    auto ref = ct.ref();
    return {party, ref, share_math::dec_share(key(party), ref, k())};
  }

  bool verify_dec_share(const Ciphertext& ct, const DecShare& s) const override {
    if (!valid_party(s.party)) return false;
    auto ref = ct.ref();
    return s.ct_ref == ref && s.share == share_math::dec_share(key(s.party), ref, k());
  }

  Bytes combine_decryption(const Ciphertext& ct, std::span<const DecShare> shares) const override {
    std::set<PartyId> parties;
    for (const auto& s : shares) {
      if (!verify_dec_share(ct, s)) {
        throw Error(ErrorCode::InvalidShare, "decryption share from party " + std::to_string(s.party.index),
                    s.party.index);
      }
      parties.insert(s.party);
    }
    if (parties.size() < dec_t()) {
      throw Error(ErrorCode::InsufficientShares,
                  std::to_string(parties.size()) + " decryption shares, need " + std::to_string(dec_t()));
    }
    if (ct.bytes.size() < k()) throw Error(ErrorCode::InvalidCiphertext, "ciphertext shorter than tag");
    ByteView tag(ct.bytes.data(), k());
    ByteView body(ct.bytes.data() + k(), ct.bytes.size() - k());
    Bytes mask = keystream(ct.epoch, ct.proposer, tag, body.size());
    Bytes plain(body.size());
    for (std::size_t i = 0; i < body.size(); ++i) plain[i] = body[i] ^ mask[i];
    Bytes expected = expand(
        Hasher("ct-tag").field(setup_.master).u64(ct.epoch).u64(ct.proposer.index).field(plain).finish(), "tag",
        k());
    if (!std::equal(expected.begin(), expected.end(), tag.begin(), tag.end())) {
      throw Error(ErrorCode::InvalidCiphertext, "ciphertext tag mismatch");
    }
    return plain;
  }

 private:
  bool valid_party(PartyId p) const { return p.index < setup_.n; }
  KeyShare key(PartyId p) const { return setup_.key_share(p); }

  Bytes group_sig(const Digest& d) const {
    return expand(Hasher("group-sig").field(setup_.master).field(d).finish(), "sig", k());
  }

  Bytes keystream(Epoch epoch, PartyId proposer, ByteView tag, std::size_t len) const {
    return expand(Hasher("ct-key").field(setup_.master).u64(epoch).u64(proposer.index).field(tag).finish(), "mask",
                  len);
  }

  DealerSetup setup_;
};

}  // namespace slim_hbbft
