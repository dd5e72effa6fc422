#include "echomix/sim/rng.hpp"

#include <cmath>

#include "echomix/crypto/hash.hpp"

namespace echomix::sim {

namespace {

crypto::ChaCha20 make_stream(uint64_t seed, const std::string& label) {
    Bytes ikm = be64_bytes(seed);
    append(ikm, label);
    Key256 key = crypto::Sha256::hash(ikm);
    return crypto::ChaCha20(key, ByteArray<12>{});
}

}  // namespace

SimRng::SimRng(uint64_t seed, const std::string& label)
    : seed_(seed), label_(label), stream_(make_stream(seed, label)) {}

uint64_t SimRng::next_u64() {
    uint8_t buf[8] = {0};
    stream_.xor_stream(buf, 8);
    uint64_t x = 0;
    for (int i = 0; i < 8; ++i) x |= uint64_t(buf[i]) << (8 * i);
    return x;
}

double SimRng::uniform01() { return double(next_u64() >> 11) * 0x1.0p-53; }

double SimRng::uniform(double a, double b) { return a + (b - a) * uniform01(); }

uint64_t SimRng::below(uint64_t bound) {
    uint64_t threshold = (~bound + 1) % bound;
    for (;;) {
        uint64_t r = next_u64();
        if (r >= threshold) return r % bound;
    }
}

double SimRng::exponential(double rate) {
    if (rate <= 0) throw std::invalid_argument("exponential: rate must be positive");
    double u;
    do {
        u = uniform01();
    } while (u == 0.0);
    return -std::log(u) / rate;
}

SimRng SimRng::fork(const std::string& suffix) const {
    return SimRng(seed_, label_ + "/" + suffix);
}

}  // namespace echomix::sim
