#pragma once

#include "echomix/bytes.hpp"

namespace echomix::crypto {

/// ChaCha20 keystream generator (RFC 8439 quarter-round schedule).
/// Used as the Sphinx per-hop stream cipher, inside the wide-block
/// permutation, and as the simulator's counter-based random stream.
class ChaCha20 {
  public:
    ChaCha20(const Key256& key, const ByteArray<12>& nonce, uint32_t counter = 0);

    /// XORs the next `n` keystream bytes into `data`.
    void xor_stream(uint8_t* data, size_t n);

    /// Returns the next `n` keystream bytes.
    Bytes keystream(size_t n);

    /// Jump to an absolute 64-byte block index.
    void seek(uint32_t block);

  private:
    void block(uint8_t out[64]);

    uint32_t input_[16];
    uint8_t buf_[64];
    size_t avail_ = 0;
};

/// One-shot keystream with an all-zero nonce; key uniqueness is the
/// caller's contract.
Bytes chacha20_stream(const Key256& key, size_t n);

}  // namespace echomix::crypto
