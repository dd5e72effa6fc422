#pragma once
#include <algorithm>

#include <array>
#include <cstdint>
#include <cstring>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace echomix {

using Bytes = std::vector<uint8_t>;
using ByteView = std::span<const uint8_t>;

template <size_t N>
using ByteArray = std::array<uint8_t, N>;

using Key256 = ByteArray<32>;

inline Bytes to_bytes(ByteView v) { return Bytes(v.begin(), v.end()); }

inline bool bytes_equal(ByteView a, ByteView b) {
    return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin());
}

inline Bytes to_bytes(const std::string& s) {
    return Bytes(s.begin(), s.end());
}

inline void append(Bytes& out, ByteView v) {
    if (v.empty()) return;
    size_t off = out.size();
    out.resize(off + v.size());
    std::memcpy(out.data() + off, v.data(), v.size());
}

inline void append(Bytes& out, const std::string& s) {
    out.insert(out.end(), s.begin(), s.end());
}

inline Bytes concat(std::initializer_list<ByteView> parts) {
    Bytes out;
    size_t total = 0;
    for (auto& p : parts) total += p.size();
    out.reserve(total);
    for (auto& p : parts) append(out, p);
    return out;
}

template <size_t N>
ByteArray<N> to_array(ByteView v) {
    if (v.size() != N) throw std::invalid_argument("to_array: length mismatch");
    ByteArray<N> a;
    std::memcpy(a.data(), v.data(), N);
    return a;
}

inline void store_be64(uint8_t* p, uint64_t x) {
    for (int i = 7; i >= 0; --i) {
        p[i] = uint8_t(x & 0xff);
        x >>= 8;
    }
}

inline uint64_t load_be64(const uint8_t* p) {
    uint64_t x = 0;
    for (int i = 0; i < 8; ++i) x = (x << 8) | p[i];
    return x;
}

inline void store_be32(uint8_t* p, uint32_t x) {
    p[0] = uint8_t(x >> 24);
    p[1] = uint8_t(x >> 16);
    p[2] = uint8_t(x >> 8);
    p[3] = uint8_t(x);
}

inline uint32_t load_be32(const uint8_t* p) {
    return (uint32_t(p[0]) << 24) | (uint32_t(p[1]) << 16) | (uint32_t(p[2]) << 8) | uint32_t(p[3]);
}

inline void store_le32(uint8_t* p, uint32_t x) {
    p[0] = uint8_t(x);
    p[1] = uint8_t(x >> 8);
    p[2] = uint8_t(x >> 16);
    p[3] = uint8_t(x >> 24);
}

inline uint32_t load_le32(const uint8_t* p) {
    return uint32_t(p[0]) | (uint32_t(p[1]) << 8) | (uint32_t(p[2]) << 16) | (uint32_t(p[3]) << 24);
}

inline Bytes be64_bytes(uint64_t x) {
    Bytes b(8);
    store_be64(b.data(), x);
    return b;
}

inline void xor_into(uint8_t* dst, const uint8_t* src, size_t n) {
    for (size_t i = 0; i < n; ++i) dst[i] ^= src[i];
}

inline std::string to_hex(ByteView v) {
    static const char* digits = "0123456789abcdef";
    std::string s;
    s.reserve(v.size() * 2);
    for (uint8_t b : v) {
        s.push_back(digits[b >> 4]);
        s.push_back(digits[b & 0xf]);
    }
    return s;
}

inline Bytes from_hex(const std::string& hex) {
    auto nib = [](char c) -> int {
        if (c >= '0' && c <= '9') return c - '0';
        if (c >= 'a' && c <= 'f') return c - 'a' + 10;
        if (c >= 'A' && c <= 'F') return c - 'A' + 10;
        throw std::invalid_argument("from_hex: bad digit");
    };
    if (hex.size() % 2) throw std::invalid_argument("from_hex: odd length");
    Bytes out(hex.size() / 2);
    for (size_t i = 0; i < out.size(); ++i)
        out[i] = uint8_t(nib(hex[2 * i]) << 4 | nib(hex[2 * i + 1]));
    return out;
}

/// Entropy source used for key generation. Deterministic when seeded,
/// so tests and the simulator can reproduce every value they mint.
class Rng {
  public:
    Rng() : Rng(std::random_device{}()) {}
    explicit Rng(uint64_t seed) : gen_(seed) {}

    uint64_t next_u64() { return gen_(); }

    void fill(uint8_t* p, size_t n) {
        while (n >= 8) {
            uint64_t x = gen_();
            std::memcpy(p, &x, 8);
            p += 8;
            n -= 8;
        }
        if (n) {
            uint64_t x = gen_();
            std::memcpy(p, &x, n);
        }
    }

    Bytes bytes(size_t n) {
        Bytes b(n);
        fill(b.data(), n);
        return b;
    }

    Key256 key256() {
        Key256 k;
        fill(k.data(), k.size());
        return k;
    }

    /// Uniform in [0, bound).
    uint64_t below(uint64_t bound) {
        uint64_t threshold = (~bound + 1) % bound;  // 2^64 mod bound
        for (;;) {
            uint64_t r = gen_();
            if (r >= threshold) return r % bound;
        }
    }

    double uniform01() {
        return double(gen_() >> 11) * 0x1.0p-53;
    }

  private:
    std::mt19937_64 gen_;
};

}  // namespace echomix
