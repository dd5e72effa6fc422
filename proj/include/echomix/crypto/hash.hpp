#pragma once

#include "echomix/bytes.hpp"

namespace echomix::crypto {

/// SHA-256 (FIPS 180-4), incremental interface.
class Sha256 {
  public:
    static constexpr size_t DIGEST_SIZE = 32;
    static constexpr size_t BLOCK_SIZE = 64;

    Sha256();
    void update(ByteView data);
    ByteArray<32> finish();

    static ByteArray<32> hash(ByteView data) {
        Sha256 h;
        h.update(data);
        return h.finish();
    }

  private:
    void compress(const uint8_t* block);

    uint32_t state_[8];
    uint64_t length_ = 0;
    uint8_t buf_[64];
    size_t buffered_ = 0;
};

/// SHA-512 (FIPS 180-4), incremental interface.
class Sha512 {
  public:
    static constexpr size_t DIGEST_SIZE = 64;
    static constexpr size_t BLOCK_SIZE = 128;

    Sha512();
    void update(ByteView data);
    ByteArray<64> finish();

    static ByteArray<64> hash(ByteView data) {
        Sha512 h;
        h.update(data);
        return h.finish();
    }

  private:
    void compress(const uint8_t* block);

    uint64_t state_[8];
    uint64_t length_lo_ = 0, length_hi_ = 0;
    uint8_t buf_[128];
    size_t buffered_ = 0;
};

ByteArray<32> hmac_sha256(ByteView key, ByteView msg);
ByteArray<64> hmac_sha512(ByteView key, ByteView msg);

/// HKDF with HMAC-SHA-256 (RFC 5869). This is the one KDF construction
/// used everywhere in the project; every derivation is an extract and/or
/// expand with a distinct info label.
ByteArray<32> hkdf_extract(ByteView salt, ByteView ikm);
Bytes hkdf_expand(const ByteArray<32>& prk, ByteView info, size_t length);

}  // namespace echomix::crypto
