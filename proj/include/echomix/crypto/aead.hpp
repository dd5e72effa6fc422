#pragma once

#include <optional>

#include "echomix/bytes.hpp"

namespace echomix::crypto {

/// AES-256 block encryption (encrypt direction only; the AEAD mode below
/// never needs the inverse cipher).
class Aes256 {
  public:
    explicit Aes256(const Key256& key);
    void encrypt_block(const uint8_t in[16], uint8_t out[16]) const;

  private:
    uint8_t round_keys_[15][16];
};

/// AEAD_AES_256_GCM_SIV (RFC 8452). Nonce-misuse-resistant AEAD; seal
/// returns ciphertext || 16-byte tag, open authenticates before releasing
/// plaintext.
Bytes aead_seal(const Key256& key, const ByteArray<12>& nonce, ByteView plaintext,
                ByteView associated_data);

/// Returns nullopt on authentication failure.
std::optional<Bytes> aead_open(const Key256& key, const ByteArray<12>& nonce, ByteView sealed,
                               ByteView associated_data);

constexpr size_t AEAD_TAG_SIZE = 16;

/// POLYVAL universal hash over GF(2^128) (RFC 8452); exposed for tests.
ByteArray<16> polyval(const ByteArray<16>& h, ByteView data);

}  // namespace echomix::crypto
