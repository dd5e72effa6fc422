#pragma once

#include <atomic>
#include <memory>
#include <string>
#include <vector>

#include "echomix/bytes.hpp"

namespace echomix::crypto {

struct KemError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Key encapsulation mechanism with 32-byte shared secrets.
class Kem {
  public:
    virtual ~Kem() = default;

    virtual std::string name() const = 0;
    virtual size_t public_key_size() const = 0;
    virtual size_t private_key_size() const = 0;
    virtual size_t ciphertext_size() const = 0;
    size_t shared_secret_size() const { return 32; }

    struct Encapsulated {
        Bytes ciphertext;
        Key256 shared;
    };

    /// Returns (private, public).
    virtual std::pair<Bytes, Bytes> generate_keypair(Rng& rng) const = 0;
    virtual Encapsulated encapsulate(ByteView pub, Rng& rng) const = 0;
    virtual Key256 decapsulate(ByteView priv, ByteView ciphertext) const = 0;
};

/// Hash-DH KEM over X25519: ct is an ephemeral public key, the secret is
/// a KDF over the DH output bound to both public values.
const Kem& kem_x25519();

/// Fixed-size stand-in whose key and ciphertext sizes match ML-KEM-768
/// (1184/1088 bytes); internally a padded hash-DH KEM. Exists so that
/// hybrid packet geometries can be computed and exercised end to end.
const Kem& kem_mlkem768_stub();

/// Generic combiner: ciphertext is the concatenation of member
/// ciphertexts, the shared secret a KDF over all member secrets and all
/// member ciphertexts. Throws KemError on an empty list.
std::unique_ptr<Kem> kem_combine(std::vector<const Kem*> members);

/// Operation-counting wrapper, mirroring CountingNike.
class CountingKem : public Kem {
  public:
    explicit CountingKem(const Kem& inner) : inner_(inner) {}

    std::string name() const override { return inner_.name(); }
    size_t public_key_size() const override { return inner_.public_key_size(); }
    size_t private_key_size() const override { return inner_.private_key_size(); }
    size_t ciphertext_size() const override { return inner_.ciphertext_size(); }

    std::pair<Bytes, Bytes> generate_keypair(Rng& rng) const override {
        return inner_.generate_keypair(rng);
    }
    Encapsulated encapsulate(ByteView pub, Rng& rng) const override {
        ++encap_count;
        return inner_.encapsulate(pub, rng);
    }
    Key256 decapsulate(ByteView priv, ByteView ct) const override {
        ++decap_count;
        return inner_.decapsulate(priv, ct);
    }

    mutable std::atomic<uint64_t> encap_count{0};
    mutable std::atomic<uint64_t> decap_count{0};

  private:
    const Kem& inner_;
};

}  // namespace echomix::crypto
