#pragma once

#include <string>

#include "echomix/bytes.hpp"

namespace echomix::sphinx {

struct SphinxError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class SuiteKind { Nike, Kem };

/// Wire sizes of the primitive a geometry is built over. For NIKE suites
/// `key_or_ct_size` is the public-key size, for KEM suites the ciphertext
/// size (the alpha field carries one or the other).
struct SuiteSizes {
    std::string name;
    SuiteKind kind = SuiteKind::Nike;
    size_t key_or_ct_size = 32;
};

/// Byte layout of one packet family. Alpha carries the public key or KEM
/// ciphertext, beta holds max_hops fixed-size routing slots, gamma is the
/// header MAC, delta the wide-block-encrypted payload.
///
/// Per-hop routing slot (82 bytes + one KEM ciphertext for KEM suites,
/// which always leads the slot):
///   forward:  type (1) || next-node id (32) || next gamma (32) ||
///             delay (4) || spare (13)
///   terminal: type (1) || recipient-or-reply id (16) || spare (65)
struct SphinxGeometry {
    static constexpr size_t AD_SIZE = 2;        // version/ad prefix
    static constexpr size_t NODE_ID_SIZE = 32;
    static constexpr size_t MAC_SIZE = 32;
    static constexpr size_t CMD_EXTRA_SIZE = 18;  // type + delay + arg + spare
    static constexpr size_t SLOT_OVERHEAD = NODE_ID_SIZE + MAC_SIZE + CMD_EXTRA_SIZE;  // 82
    static constexpr size_t PAYLOAD_TAG_SIZE = 32;
    /// SURB trailer past the embedded header: ad (2) || first hop (32) ||
    /// surb id (16) || payload key (32) || tag key (32) || spare (16).
    static constexpr size_t SURB_EXTRA = 130;

    SuiteSizes suite;
    size_t max_hops = 5;
    size_t payload_size = 0;

    size_t alpha_size = 0;
    size_t slot_size = 0;
    size_t beta_size = 0;
    size_t gamma_size = MAC_SIZE;
    size_t header_size = 0;
    size_t delta_size = 0;   // payload + integrity tag
    size_t surb_size = 0;
    size_t packet_size = 0;  // header + delta

    bool operator==(const SphinxGeometry&) const = default;
};

/// Closed-form geometry; monotone in max_hops and payload_size.
SphinxGeometry geometry(const SuiteSizes& suite, size_t max_hops, size_t payload_size);

/// Catalog of suites the geometry table knows; includes size-only entries
/// for primitives that are not instantiated here. Throws on unknown names.
SuiteSizes suite_sizes(const std::string& name);
std::vector<std::string> known_suites();

}  // namespace echomix::sphinx
