#include "echomix/crypto/aead.hpp"

namespace echomix::crypto {

namespace {

const uint8_t SBOX[256] = {
    0x63, 0x7c, 0x77, 0x7b, 0xf2, 0x6b, 0x6f, 0xc5, 0x30, 0x01, 0x67, 0x2b, 0xfe, 0xd7, 0xab,
    0x76, 0xca, 0x82, 0xc9, 0x7d, 0xfa, 0x59, 0x47, 0xf0, 0xad, 0xd4, 0xa2, 0xaf, 0x9c, 0xa4,
    0x72, 0xc0, 0xb7, 0xfd, 0x93, 0x26, 0x36, 0x3f, 0xf7, 0xcc, 0x34, 0xa5, 0xe5, 0xf1, 0x71,
    0xd8, 0x31, 0x15, 0x04, 0xc7, 0x23, 0xc3, 0x18, 0x96, 0x05, 0x9a, 0x07, 0x12, 0x80, 0xe2,
    0xeb, 0x27, 0xb2, 0x75, 0x09, 0x83, 0x2c, 0x1a, 0x1b, 0x6e, 0x5a, 0xa0, 0x52, 0x3b, 0xd6,
    0xb3, 0x29, 0xe3, 0x2f, 0x84, 0x53, 0xd1, 0x00, 0xed, 0x20, 0xfc, 0xb1, 0x5b, 0x6a, 0xcb,
    0xbe, 0x39, 0x4a, 0x4c, 0x58, 0xcf, 0xd0, 0xef, 0xaa, 0xfb, 0x43, 0x4d, 0x33, 0x85, 0x45,
    0xf9, 0x02, 0x7f, 0x50, 0x3c, 0x9f, 0xa8, 0x51, 0xa3, 0x40, 0x8f, 0x92, 0x9d, 0x38, 0xf5,
    0xbc, 0xb6, 0xda, 0x21, 0x10, 0xff, 0xf3, 0xd2, 0xcd, 0x0c, 0x13, 0xec, 0x5f, 0x97, 0x44,
    0x17, 0xc4, 0xa7, 0x7e, 0x3d, 0x64, 0x5d, 0x19, 0x73, 0x60, 0x81, 0x4f, 0xdc, 0x22, 0x2a,
    0x90, 0x88, 0x46, 0xee, 0xb8, 0x14, 0xde, 0x5e, 0x0b, 0xdb, 0xe0, 0x32, 0x3a, 0x0a, 0x49,
    0x06, 0x24, 0x5c, 0xc2, 0xd3, 0xac, 0x62, 0x91, 0x95, 0xe4, 0x79, 0xe7, 0xc8, 0x37, 0x6d,
    0x8d, 0xd5, 0x4e, 0xa9, 0x6c, 0x56, 0xf4, 0xea, 0x65, 0x7a, 0xae, 0x08, 0xba, 0x78, 0x25,
    0x2e, 0x1c, 0xa6, 0xb4, 0xc6, 0xe8, 0xdd, 0x74, 0x1f, 0x4b, 0xbd, 0x8b, 0x8a, 0x70, 0x3e,
    0xb5, 0x66, 0x48, 0x03, 0xf6, 0x0e, 0x61, 0x35, 0x57, 0xb9, 0x86, 0xc1, 0x1d, 0x9e, 0xe1,
    0xf8, 0x98, 0x11, 0x69, 0xd9, 0x8e, 0x94, 0x9b, 0x1e, 0x87, 0xe9, 0xce, 0x55, 0x28, 0xdf,
    0x8c, 0xa1, 0x89, 0x0d, 0xbf, 0xe6, 0x42, 0x68, 0x41, 0x99, 0x2d, 0x0f, 0xb0, 0x54, 0xbb,
    0x16};

inline uint8_t xtime(uint8_t x) { return uint8_t((x << 1) ^ ((x >> 7) * 0x1b)); }

}  // namespace

Aes256::Aes256(const Key256& key) {
    // Key expansion, Nk = 8, Nr = 14.
    uint8_t w[60][4];
    for (int i = 0; i < 8; ++i)
        for (int j = 0; j < 4; ++j) w[i][j] = key[4 * i + j];
    uint8_t rcon = 1;
    for (int i = 8; i < 60; ++i) {
        uint8_t t[4] = {w[i - 1][0], w[i - 1][1], w[i - 1][2], w[i - 1][3]};
        if (i % 8 == 0) {
            uint8_t tmp = t[0];
            t[0] = uint8_t(SBOX[t[1]] ^ rcon);
            t[1] = SBOX[t[2]];
            t[2] = SBOX[t[3]];
            t[3] = SBOX[tmp];
            rcon = xtime(rcon);
        } else if (i % 8 == 4) {
            for (int j = 0; j < 4; ++j) t[j] = SBOX[t[j]];
        }
        for (int j = 0; j < 4; ++j) w[i][j] = uint8_t(w[i - 8][j] ^ t[j]);
    }
    for (int r = 0; r < 15; ++r)
        for (int c = 0; c < 4; ++c)
            for (int j = 0; j < 4; ++j) round_keys_[r][4 * c + j] = w[4 * r + c][j];
}

void Aes256::encrypt_block(const uint8_t in[16], uint8_t out[16]) const {
    uint8_t s[16];
    for (int i = 0; i < 16; ++i) s[i] = in[i] ^ round_keys_[0][i];
    for (int round = 1; round <= 14; ++round) {
        uint8_t t[16];
        // SubBytes + ShiftRows
        for (int c = 0; c < 4; ++c)
            for (int r = 0; r < 4; ++r) t[4 * c + r] = SBOX[s[4 * ((c + r) % 4) + r]];
        if (round < 14) {
            // MixColumns
            for (int c = 0; c < 4; ++c) {
                uint8_t a0 = t[4 * c], a1 = t[4 * c + 1], a2 = t[4 * c + 2], a3 = t[4 * c + 3];
                s[4 * c] = uint8_t(xtime(a0) ^ (xtime(a1) ^ a1) ^ a2 ^ a3);
                s[4 * c + 1] = uint8_t(a0 ^ xtime(a1) ^ (xtime(a2) ^ a2) ^ a3);
                s[4 * c + 2] = uint8_t(a0 ^ a1 ^ xtime(a2) ^ (xtime(a3) ^ a3));
                s[4 * c + 3] = uint8_t((xtime(a0) ^ a0) ^ a1 ^ a2 ^ xtime(a3));
            }
        } else {
            std::memcpy(s, t, 16);
        }
        for (int i = 0; i < 16; ++i) s[i] ^= round_keys_[round][i];
    }
    std::memcpy(out, s, 16);
}

namespace {

// GF(2^128) element in GHASH bit order, held as two big-endian halves.
struct Gf128 {
    uint64_t hi = 0, lo = 0;
};

inline Gf128 load_gf(const uint8_t b[16]) {
    return {load_be64(b), load_be64(b + 8)};
}

inline void store_gf(const Gf128& v, uint8_t b[16]) {
    store_be64(b, v.hi);
    store_be64(b + 8, v.lo);
}

inline Gf128 mulx_ghash(Gf128 v) {
    uint64_t carry = v.lo & 1;
    v.lo = (v.lo >> 1) | (v.hi << 63);
    v.hi >>= 1;
    if (carry) v.hi ^= 0xe100000000000000ULL;
    return v;
}

Gf128 ghash_mul(const Gf128& x, const Gf128& y) {
    Gf128 z;
    Gf128 v = y;
    for (int i = 0; i < 128; ++i) {
        uint64_t bit = i < 64 ? (x.hi >> (63 - i)) & 1 : (x.lo >> (127 - i)) & 1;
        if (bit) {
            z.hi ^= v.hi;
            z.lo ^= v.lo;
        }
        v = mulx_ghash(v);
    }
    return z;
}

inline ByteArray<16> byte_reverse(const uint8_t b[16]) {
    ByteArray<16> r;
    for (int i = 0; i < 16; ++i) r[i] = b[15 - i];
    return r;
}

}  // namespace

// POLYVAL via the GHASH relation: POLYVAL(H, X_1..X_n) equals
// ByteReverse(GHASH(mulX_GHASH(ByteReverse(H)), ByteReverse(X_1)..)).
ByteArray<16> polyval(const ByteArray<16>& h, ByteView data) {
    if (data.size() % 16) throw std::invalid_argument("polyval: data not block aligned");
    auto hrev = byte_reverse(h.data());
    Gf128 hg = mulx_ghash(load_gf(hrev.data()));
    Gf128 acc;
    for (size_t off = 0; off < data.size(); off += 16) {
        auto blk = byte_reverse(data.data() + off);
        Gf128 x = load_gf(blk.data());
        acc.hi ^= x.hi;
        acc.lo ^= x.lo;
        acc = ghash_mul(acc, hg);
    }
    uint8_t out[16];
    store_gf(acc, out);
    return byte_reverse(out);
}

namespace {

struct SivKeys {
    ByteArray<16> auth_key;
    Key256 enc_key;
};

SivKeys derive_keys(const Key256& key, const ByteArray<12>& nonce) {
    Aes256 aes(key);
    uint8_t in[16];
    std::memcpy(in + 4, nonce.data(), 12);
    uint8_t blocks[6][16];
    for (uint32_t i = 0; i < 6; ++i) {
        store_le32(in, i);
        aes.encrypt_block(in, blocks[i]);
    }
    SivKeys out;
    std::memcpy(out.auth_key.data(), blocks[0], 8);
    std::memcpy(out.auth_key.data() + 8, blocks[1], 8);
    std::memcpy(out.enc_key.data(), blocks[2], 8);
    std::memcpy(out.enc_key.data() + 8, blocks[3], 8);
    std::memcpy(out.enc_key.data() + 16, blocks[4], 8);
    std::memcpy(out.enc_key.data() + 24, blocks[5], 8);
    return out;
}

ByteArray<16> siv_tag(const SivKeys& keys, const ByteArray<12>& nonce, ByteView plaintext,
                      ByteView aad) {
    Bytes input;
    input.reserve(((aad.size() + 15) / 16 + (plaintext.size() + 15) / 16 + 1) * 16);
    append(input, aad);
    input.resize((input.size() + 15) / 16 * 16, 0);
    append(input, plaintext);
    input.resize((input.size() + 15) / 16 * 16, 0);
    uint8_t len_block[16];
    uint64_t aad_bits = uint64_t(aad.size()) * 8;
    uint64_t pt_bits = uint64_t(plaintext.size()) * 8;
    for (int i = 0; i < 8; ++i) {
        len_block[i] = uint8_t(aad_bits >> (8 * i));
        len_block[8 + i] = uint8_t(pt_bits >> (8 * i));
    }
    append(input, ByteView(len_block, 16));

    auto s = polyval(keys.auth_key, input);
    for (int i = 0; i < 12; ++i) s[i] ^= nonce[i];
    s[15] &= 0x7f;
    ByteArray<16> tag;
    Aes256 aes(keys.enc_key);
    aes.encrypt_block(s.data(), tag.data());
    return tag;
}

void siv_ctr(const Key256& enc_key, const ByteArray<16>& tag, const uint8_t* in, uint8_t* out,
             size_t n) {
    Aes256 aes(enc_key);
    uint8_t counter[16];
    std::memcpy(counter, tag.data(), 16);
    counter[15] |= 0x80;
    uint8_t ks[16];
    size_t off = 0;
    while (off < n) {
        aes.encrypt_block(counter, ks);
        size_t take = std::min<size_t>(16, n - off);
        for (size_t i = 0; i < take; ++i) out[off + i] = uint8_t(in[off + i] ^ ks[i]);
        uint32_t ctr = load_le32(counter) + 1;
        store_le32(counter, ctr);
        off += take;
    }
}

}  // namespace

Bytes aead_seal(const Key256& key, const ByteArray<12>& nonce, ByteView plaintext,
                ByteView associated_data) {
    auto keys = derive_keys(key, nonce);
    auto tag = siv_tag(keys, nonce, plaintext, associated_data);
    Bytes out(plaintext.size() + AEAD_TAG_SIZE);
    siv_ctr(keys.enc_key, tag, plaintext.data(), out.data(), plaintext.size());
    std::memcpy(out.data() + plaintext.size(), tag.data(), AEAD_TAG_SIZE);
    return out;
}

std::optional<Bytes> aead_open(const Key256& key, const ByteArray<12>& nonce, ByteView sealed,
                               ByteView associated_data) {
    if (sealed.size() < AEAD_TAG_SIZE) return std::nullopt;
    auto keys = derive_keys(key, nonce);
    size_t ptlen = sealed.size() - AEAD_TAG_SIZE;
    ByteArray<16> tag;
    std::memcpy(tag.data(), sealed.data() + ptlen, AEAD_TAG_SIZE);
    Bytes plaintext(ptlen);
    siv_ctr(keys.enc_key, tag, sealed.data(), plaintext.data(), ptlen);
    auto expect = siv_tag(keys, nonce, plaintext, associated_data);
    uint8_t diff = 0;
    for (int i = 0; i < 16; ++i) diff |= uint8_t(tag[i] ^ expect[i]);
    if (diff) return std::nullopt;
    return plaintext;
}

}  // namespace echomix::crypto
