#pragma once

#include <openssl/evp.h>

#include <array>
#include <compare>
#include <cstdint>
#include <cstring>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "slim_hbbft/error.hpp"

namespace slim_hbbft {

using Bytes = std::vector<std::uint8_t>;
using ByteView = std::span<const std::uint8_t>;

inline ByteView as_bytes(std::string_view s) {
  return {reinterpret_cast<const std::uint8_t*>(s.data()), s.size()};
}

inline std::string to_hex(ByteView data) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out;
  out.reserve(data.size() * 2);
  for (auto b : data) {
    out.push_back(kDigits[b >> 4]);
    out.push_back(kDigits[b & 0xF]);
  }
  return out;
}

inline Bytes from_hex(std::string_view hex) {
  auto nibble = [](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
  };
  if (hex.size() % 2 != 0) throw Error(ErrorCode::Malformed, "odd-length hex string");
  Bytes out(hex.size() / 2);
  for (std::size_t i = 0; i < out.size(); ++i) {
    int hi = nibble(hex[2 * i]);
    int lo = nibble(hex[2 * i + 1]);
    if (hi < 0 || lo < 0) throw Error(ErrorCode::Malformed, "bad hex digit");
    out[i] = static_cast<std::uint8_t>((hi << 4) | lo);
  }
  return out;
}

/// SHA-256 output.
struct Digest {
  std::array<std::uint8_t, 32> bytes{};

  auto operator<=>(const Digest&) const = default;

  ByteView view() const { return {bytes.data(), bytes.size()}; }
  std::string hex() const { return to_hex(view()); }
  /// First 8 bytes as hex; used in traces and logs.
  std::string short_hex() const { return to_hex(view().first(8)); }
};

/// Incremental SHA-256 with length-prefixed field helpers so that
/// concatenations of variable-length fields are unambiguous.
class Hasher {
 public:
  Hasher() : ctx_(EVP_MD_CTX_new(), &EVP_MD_CTX_free) {
    if (!ctx_ || EVP_DigestInit_ex(ctx_.get(), EVP_sha256(), nullptr) != 1) {
      throw std::runtime_error("EVP sha256 init failed");
    }
  }

  explicit Hasher(std::string_view domain) : Hasher() { field(as_bytes(domain)); }

  Hasher& raw(ByteView data) {
    if (!data.empty()) EVP_DigestUpdate(ctx_.get(), data.data(), data.size());
    return *this;
  }

  Hasher& field(ByteView data) {
    u64(data.size());
    return raw(data);
  }
  Hasher& field(std::string_view s) { return field(as_bytes(s)); }
  Hasher& field(const Digest& d) { return raw(d.view()); }

  Hasher& u64(std::uint64_t v) {
    std::uint8_t buf[8];
    for (int i = 0; i < 8; ++i) buf[i] = static_cast<std::uint8_t>(v >> (56 - 8 * i));
    return raw({buf, 8});
  }

  Digest finish() {
    Digest d;
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx_.get(), d.bytes.data(), &len);
    return d;
  }

 private:
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx_;
};

inline Digest sha256(ByteView data) { return Hasher().raw(data).finish(); }

/// Counter-mode expansion of a seed into `len` pseudorandom bytes.
inline Bytes expand(const Digest& seed, std::string_view label, std::size_t len) {
  Bytes out;
  out.reserve(len + 32);
  for (std::uint64_t counter = 0; out.size() < len; ++counter) {
    Digest block = Hasher("expand").field(label).field(seed).u64(counter).finish();
    out.insert(out.end(), block.bytes.begin(), block.bytes.end());
  }
  out.resize(len);
  return out;
}

/// Big-endian writer for the canonical wire format.
class ByteWriter {
 public:
  ByteWriter& u8(std::uint8_t v) {
    buf_.push_back(v);
    return *this;
  }
  ByteWriter& u16(std::uint16_t v) {
    buf_.push_back(static_cast<std::uint8_t>(v >> 8));
    buf_.push_back(static_cast<std::uint8_t>(v));
    return *this;
  }
  ByteWriter& u32(std::uint32_t v) {
    for (int i = 3; i >= 0; --i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    return *this;
  }
  ByteWriter& u64(std::uint64_t v) {
    for (int i = 7; i >= 0; --i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    return *this;
  }
  ByteWriter& bytes(ByteView v) {
    buf_.insert(buf_.end(), v.begin(), v.end());
    return *this;
  }

  Bytes take() { return std::move(buf_); }
  std::size_t size() const { return buf_.size(); }

 private:
  Bytes buf_;
};

class ByteReader {
 public:
  explicit ByteReader(ByteView data) : data_(data) {}

  std::uint8_t u8() { return take(1)[0]; }
  std::uint16_t u16() {
    auto b = take(2);
    return static_cast<std::uint16_t>((b[0] << 8) | b[1]);
  }
  std::uint32_t u32() {
    auto b = take(4);
    std::uint32_t v = 0;
    for (auto x : b) v = (v << 8) | x;
    return v;
  }
  std::uint64_t u64() {
    auto b = take(8);
    std::uint64_t v = 0;
    for (auto x : b) v = (v << 8) | x;
    return v;
  }
  ByteView take(std::size_t n) {
    if (remaining() < n) throw Error(ErrorCode::Malformed, "truncated input");
    auto out = data_.subspan(pos_, n);
    pos_ += n;
    return out;
  }
  Bytes bytes(std::size_t n) {
    auto v = take(n);
    return {v.begin(), v.end()};
  }
  std::size_t remaining() const { return data_.size() - pos_; }

 private:
  ByteView data_;
  std::size_t pos_ = 0;
};

}  // namespace slim_hbbft
