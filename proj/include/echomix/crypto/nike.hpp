#pragma once

#include <atomic>
#include <memory>
#include <string>
#include <utility>

#include "echomix/bytes.hpp"

namespace echomix::crypto {

struct NikeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Non-interactive key exchange. Deterministic and symmetric:
/// dh(a_priv, b_pub) == dh(b_priv, a_pub). The blinding hooks are what
/// the Sphinx header construction composes per hop.
class Nike {
  public:
    virtual ~Nike() = default;

    virtual std::string name() const = 0;
    virtual size_t public_key_size() const = 0;
    virtual size_t private_key_size() const = 0;
    virtual size_t shared_secret_size() const = 0;

    /// Returns (private, public).
    virtual std::pair<Bytes, Bytes> generate_keypair(Rng& rng) const = 0;
    virtual Bytes dh(ByteView priv, ByteView pub) const = 0;

    /// Public-key blinding: blind(pub, f) commutes with dh so that
    /// dh(priv, blind(pub, f)) == dh(compose(priv, f), pub).
    virtual Bytes blind_public(ByteView pub, ByteView factor32) const = 0;
    virtual Bytes compose_private(ByteView priv, ByteView factor32) const = 0;
};

const Nike& nike_x25519();

/// Wraps a NIKE and counts public-key operations (dh and blind); used to
/// check per-hop operation-count claims without wall-clock timing.
class CountingNike : public Nike {
  public:
    explicit CountingNike(const Nike& inner) : inner_(inner) {}

    std::string name() const override { return inner_.name(); }
    size_t public_key_size() const override { return inner_.public_key_size(); }
    size_t private_key_size() const override { return inner_.private_key_size(); }
    size_t shared_secret_size() const override { return inner_.shared_secret_size(); }

    std::pair<Bytes, Bytes> generate_keypair(Rng& rng) const override {
        return inner_.generate_keypair(rng);
    }
    Bytes dh(ByteView priv, ByteView pub) const override {
        ++dh_count;
        return inner_.dh(priv, pub);
    }
    Bytes blind_public(ByteView pub, ByteView f) const override {
        ++blind_count;
        return inner_.blind_public(pub, f);
    }
    Bytes compose_private(ByteView priv, ByteView f) const override {
        return inner_.compose_private(priv, f);
    }

    mutable std::atomic<uint64_t> dh_count{0};
    mutable std::atomic<uint64_t> blind_count{0};

  private:
    const Nike& inner_;
};

}  // namespace echomix::crypto
