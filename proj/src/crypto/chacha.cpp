#include "echomix/crypto/chacha.hpp"

namespace echomix::crypto {

namespace {

inline uint32_t rotl32(uint32_t x, int n) { return (x << n) | (x >> (32 - n)); }

inline void quarter(uint32_t& a, uint32_t& b, uint32_t& c, uint32_t& d) {
    a += b; d ^= a; d = rotl32(d, 16);
    c += d; b ^= c; b = rotl32(b, 12);
    a += b; d ^= a; d = rotl32(d, 8);
    c += d; b ^= c; b = rotl32(b, 7);
}

}  // namespace

ChaCha20::ChaCha20(const Key256& key, const ByteArray<12>& nonce, uint32_t counter) {
    input_[0] = 0x61707865;
    input_[1] = 0x3320646e;
    input_[2] = 0x79622d32;
    input_[3] = 0x6b206574;
    for (int i = 0; i < 8; ++i) input_[4 + i] = load_le32(key.data() + 4 * i);
    input_[12] = counter;
    for (int i = 0; i < 3; ++i) input_[13 + i] = load_le32(nonce.data() + 4 * i);
}

void ChaCha20::block(uint8_t out[64]) {
    uint32_t x[16];
    std::memcpy(x, input_, sizeof(x));
    for (int round = 0; round < 10; ++round) {
        quarter(x[0], x[4], x[8], x[12]);
        quarter(x[1], x[5], x[9], x[13]);
        quarter(x[2], x[6], x[10], x[14]);
        quarter(x[3], x[7], x[11], x[15]);
        quarter(x[0], x[5], x[10], x[15]);
        quarter(x[1], x[6], x[11], x[12]);
        quarter(x[2], x[7], x[8], x[13]);
        quarter(x[3], x[4], x[9], x[14]);
    }
    for (int i = 0; i < 16; ++i) store_le32(out + 4 * i, x[i] + input_[i]);
    ++input_[12];
}

void ChaCha20::seek(uint32_t blk) {
    input_[12] = blk;
    avail_ = 0;
}

void ChaCha20::xor_stream(uint8_t* data, size_t n) {
    while (n) {
        if (!avail_) {
            block(buf_);
            avail_ = 64;
        }
        size_t take = std::min(n, avail_);
        const uint8_t* ks = buf_ + (64 - avail_);
        for (size_t i = 0; i < take; ++i) data[i] ^= ks[i];
        data += take;
        n -= take;
        avail_ -= take;
    }
}

Bytes ChaCha20::keystream(size_t n) {
    Bytes out(n, 0);
    xor_stream(out.data(), n);
    return out;
}

Bytes chacha20_stream(const Key256& key, size_t n) {
    ChaCha20 c(key, ByteArray<12>{});
    return c.keystream(n);
}

}  // namespace echomix::crypto
