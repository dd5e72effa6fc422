#include "echomix/crypto/nike.hpp"

#include "echomix/crypto/group.hpp"

namespace echomix::crypto {

namespace {

/// X25519 on the Montgomery u-line. Private keys are scalars mod the
/// group order rather than clamped integers, so that blinding factors
/// compose by scalar multiplication; every public key stays inside the
/// prime-order subgroup generated by the base point.
class X25519Nike final : public Nike {
  public:
    std::string name() const override { return "x25519"; }
    size_t public_key_size() const override { return 32; }
    size_t private_key_size() const override { return 32; }
    size_t shared_secret_size() const override { return 32; }

    std::pair<Bytes, Bytes> generate_keypair(Rng& rng) const override {
        GroupScalar s;
        do {
            s = GroupScalar::random(rng);
        } while (s.is_zero());
        auto pub = x25519_raw(s.le_bytes(), X25519_BASEPOINT_U);
        return {to_bytes(ByteView(s.le_bytes().data(), 32)), to_bytes(ByteView(pub.data(), 32))};
    }

    Bytes dh(ByteView priv, ByteView pub) const override {
        auto is_zero = [](const ByteArray<32>& v) {
            uint8_t acc = 0;
            for (auto b : v) acc |= b;
            return acc == 0;
        };
        // peers of order dividing 8 collapse to the identity under [8]
        ByteArray<32> eight{};
        eight[0] = 8;
        if (is_zero(x25519_raw(eight, to_array<32>(pub))))
            throw NikeError("x25519: small-order peer value");
        auto out = x25519_raw(to_array<32>(priv), to_array<32>(pub));
        if (is_zero(out)) throw NikeError("x25519: low-order shared secret");
        return to_bytes(ByteView(out.data(), 32));
    }

    Bytes blind_public(ByteView pub, ByteView factor32) const override {
        auto out = x25519_raw(to_array<32>(factor32), to_array<32>(pub));
        return to_bytes(ByteView(out.data(), 32));
    }

    Bytes compose_private(ByteView priv, ByteView factor32) const override {
        auto a = GroupScalar::from_le_bytes(priv);
        auto b = GroupScalar::from_le_bytes(factor32);
        auto c = a.mul(b);
        return to_bytes(ByteView(c.le_bytes().data(), 32));
    }
};

}  // namespace

const Nike& nike_x25519() {
    static const X25519Nike instance;
    return instance;
}

}  // namespace echomix::crypto
