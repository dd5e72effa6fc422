#include "echomix/sphinx/geometry.hpp"

namespace echomix::sphinx {

SphinxGeometry geometry(const SuiteSizes& suite, size_t max_hops, size_t payload_size) {
    if (max_hops < 1) throw SphinxError("geometry: max_hops must be >= 1");
    SphinxGeometry g;
    g.suite = suite;
    g.max_hops = max_hops;
    g.payload_size = payload_size;
    g.alpha_size = suite.key_or_ct_size;
    g.slot_size = SphinxGeometry::SLOT_OVERHEAD +
                  (suite.kind == SuiteKind::Kem ? suite.key_or_ct_size : 0);
    g.beta_size = g.slot_size * max_hops;
    g.header_size = SphinxGeometry::AD_SIZE + g.alpha_size + g.beta_size + g.gamma_size;
    g.delta_size = payload_size + SphinxGeometry::PAYLOAD_TAG_SIZE;
    g.surb_size = g.header_size + SphinxGeometry::SURB_EXTRA;
    g.packet_size = g.header_size + g.delta_size;
    return g;
}

SuiteSizes suite_sizes(const std::string& name) {
    // Key and ciphertext sizes; the x448 and hybrid rows exist for the
    // size tables even though only the x25519 family is instantiated.
    if (name == "x25519-nike") return {name, SuiteKind::Nike, 32};
    if (name == "x448-nike") return {name, SuiteKind::Nike, 56};
    if (name == "x25519-kem") return {name, SuiteKind::Kem, 32};
    if (name == "x448-kem") return {name, SuiteKind::Kem, 56};
    if (name == "mlkem768-x25519-kem") return {name, SuiteKind::Kem, 1088 + 32};
    throw SphinxError("unknown suite: " + name);
}

std::vector<std::string> known_suites() {
    return {"x25519-nike", "x448-nike", "x25519-kem", "x448-kem", "mlkem768-x25519-kem"};
}

}  // namespace echomix::sphinx
