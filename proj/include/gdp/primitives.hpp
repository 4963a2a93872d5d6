#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

namespace gdp {

using Bytes = std::vector<std::uint8_t>;
using ByteView = std::span<const std::uint8_t>;
using Tick = std::int64_t;

std::string to_hex(ByteView bytes);
Bytes from_hex(std::string_view hex);

ByteView as_bytes(std::string_view s) noexcept;

/// 32-byte SHA-256 output.
struct Digest {
  std::array<std::uint8_t, 32> bytes{};

  std::string hex() const { return to_hex(bytes); }
  static Digest from_hex(std::string_view hex);
  bool is_zero() const noexcept;

  auto operator<=>(const Digest&) const = default;
};

struct PublicKey {
  std::array<std::uint8_t, 32> bytes{};

  std::string hex() const { return to_hex(bytes); }
  auto operator<=>(const PublicKey&) const = default;
};

struct SecretKey {
  std::array<std::uint8_t, 32> bytes{};

  auto operator<=>(const SecretKey&) const = default;
};

struct Signature {
  std::array<std::uint8_t, 64> bytes{};
  PublicKey signer;

  std::string hex() const { return to_hex(bytes); }
  auto operator<=>(const Signature&) const = default;
};

/// Incremental SHA-256. `digest()` is the one-shot form.
class Sha256 {
 public:
  Sha256();
  Sha256& update(ByteView data);
  Sha256& update(std::string_view s) { return update(as_bytes(s)); }
  Sha256& update(const Digest& d) { return update(ByteView(d.bytes)); }
  Sha256& update_u64(std::uint64_t v);  // big-endian
  Digest finish();

 private:
  void compress(const std::uint8_t* block);

  std::array<std::uint32_t, 8> state_;
  std::array<std::uint8_t, 64> buffer_{};
  std::size_t buffered_ = 0;
  std::uint64_t total_bytes_ = 0;
};

Digest digest(ByteView data);
inline Digest digest(std::string_view s) { return digest(as_bytes(s)); }

Digest hmac_sha256(ByteView key, ByteView message);

struct DigestHash {
  std::size_t operator()(const Digest& d) const noexcept;
};

struct PublicKeyHash {
  std::size_t operator()(const PublicKey& k) const noexcept;
};

class SeededRng;

/// Ed25519 key pair: the secret is the 32-byte seed, the public key is derived from it.
class KeyPair {
 public:
  static KeyPair from_secret(const SecretKey& secret);
  static KeyPair generate(SeededRng& rng);

  const PublicKey& public_key() const noexcept { return public_key_; }
  const SecretKey& secret_key() const noexcept { return secret_key_; }

  Signature sign(ByteView message) const;

 private:
  PublicKey public_key_;
  SecretKey secret_key_;
  std::array<std::uint8_t, 64> expanded_{};
};

Signature sign(const SecretKey& secret, ByteView message);
bool verify(const PublicKey& key, ByteView message, const Signature& sig);

/// Memo of already-verified (key, message, signature) triples.
class SignatureCache {
 public:
  bool verify(const PublicKey& key, ByteView message, const Signature& sig);
  std::size_t size() const noexcept { return verified_.size(); }

 private:
  std::unordered_set<Digest, DigestHash> verified_;
};

}  // namespace gdp
