#pragma once

#include "echomix/bytes.hpp"
#include "echomix/crypto/hash.hpp"

namespace echomix::crypto {

/// 256-bit forward-only KDF state. Chains are advanced by expanding the
/// current state under a label and never keep what they ratchet past.
using KdfState = Key256;

/// Expands `state` under `info` into n 256-bit values (HKDF-Expand with
/// the state as the PRK). Deterministic; outputs are independent of each
/// other and do not reveal the state.
std::vector<Key256> kdf_expand(const KdfState& state, ByteView info, size_t n_outputs);

/// Extract step for inputs that are not yet uniform (DH outputs, KEM
/// shared-secret concatenations).
inline KdfState kdf_extract(const std::string& label, ByteView ikm) {
    return hkdf_extract(to_bytes(label), ikm);
}

}  // namespace echomix::crypto
