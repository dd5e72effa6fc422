#include "echomix/crypto/kdf.hpp"

namespace echomix::crypto {

std::vector<Key256> kdf_expand(const KdfState& state, ByteView info, size_t n_outputs) {
    Bytes raw = hkdf_expand(state, info, 32 * n_outputs);
    std::vector<Key256> out(n_outputs);
    for (size_t i = 0; i < n_outputs; ++i) std::memcpy(out[i].data(), raw.data() + 32 * i, 32);
    return out;
}

}  // namespace echomix::crypto
