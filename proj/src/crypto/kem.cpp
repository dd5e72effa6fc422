#include "echomix/crypto/kem.hpp"

#include <numeric>

#include "echomix/crypto/hash.hpp"
#include "echomix/crypto/kdf.hpp"
#include "echomix/crypto/nike.hpp"

namespace echomix::crypto {

namespace {

class X25519HashDhKem final : public Kem {
  public:
    std::string name() const override { return "x25519-kem"; }
    size_t public_key_size() const override { return 32; }
    // private key carries the cached public key for the secret binding
    size_t private_key_size() const override { return 64; }
    size_t ciphertext_size() const override { return 32; }

    std::pair<Bytes, Bytes> generate_keypair(Rng& rng) const override {
        auto [priv, pub] = nike_x25519().generate_keypair(rng);
        Bytes full = concat({priv, pub});
        return {full, pub};
    }

    Encapsulated encapsulate(ByteView pub, Rng& rng) const override {
        if (pub.size() != 32) throw KemError("x25519-kem: bad public key size");
        auto [epriv, epub] = nike_x25519().generate_keypair(rng);
        auto shared = nike_x25519().dh(epriv, pub);
        Encapsulated out;
        out.ciphertext = epub;
        out.shared = kdf_extract("kem-x25519", concat({shared, epub, pub}));
        return out;
    }

    Key256 decapsulate(ByteView priv, ByteView ct) const override {
        if (priv.size() != 64) throw KemError("x25519-kem: bad private key size");
        if (ct.size() != 32) throw KemError("x25519-kem: bad ciphertext size");
        auto shared = nike_x25519().dh(priv.subspan(0, 32), ct);
        return kdf_extract("kem-x25519", concat({shared, ct, priv.subspan(32, 32)}));
    }
};

/// Pads the hash-DH KEM out to ML-KEM-768 wire sizes. The padding is
/// KDF filler derived from the real 32-byte prefix, and the shared
/// secret binds the full-size ciphertext and public key.
class BigStubKem final : public Kem {
  public:
    static constexpr size_t PUB = 1184, CT = 1088;

    std::string name() const override { return "mlkem768-stub"; }
    size_t public_key_size() const override { return PUB; }
    size_t private_key_size() const override { return 96; }
    size_t ciphertext_size() const override { return CT; }

    std::pair<Bytes, Bytes> generate_keypair(Rng& rng) const override {
        auto [ipriv, ipub] = inner_.generate_keypair(rng);
        Bytes pub = pad(ipub, PUB, "stub-pub-pad");
        auto pub_hash = Sha256::hash(pub);
        Bytes priv = concat({ipriv, ByteView(pub_hash.data(), 32)});
        return {priv, pub};
    }

    Encapsulated encapsulate(ByteView pub, Rng& rng) const override {
        if (pub.size() != PUB) throw KemError("stub-kem: bad public key size");
        auto inner = inner_.encapsulate(pub.subspan(0, 32), rng);
        Encapsulated out;
        out.ciphertext = pad(inner.ciphertext, CT, "stub-ct-pad");
        out.shared = bind(inner.shared, out.ciphertext, Sha256::hash(pub));
        return out;
    }

    Key256 decapsulate(ByteView priv, ByteView ct) const override {
        if (priv.size() != 96) throw KemError("stub-kem: bad private key size");
        if (ct.size() != CT) throw KemError("stub-kem: bad ciphertext size");
        auto inner = inner_.decapsulate(priv.subspan(0, 64), ct.subspan(0, 32));
        return bind(inner, ct, to_array<32>(priv.subspan(64, 32)));
    }

  private:
    static Bytes pad(ByteView head, size_t total, const std::string& label) {
        Bytes out = to_bytes(head);
        KdfState st = kdf_extract(label, head);
        Bytes filler = hkdf_expand(st, to_bytes(label), total - head.size());
        append(out, filler);
        return out;
    }

    static Key256 bind(const Key256& inner_shared, ByteView ct, const ByteArray<32>& pub_hash) {
        auto ct_hash = Sha256::hash(ct);
        return kdf_extract("stub-bind", concat({ByteView(inner_shared.data(), 32),
                                                ByteView(ct_hash.data(), 32),
                                                ByteView(pub_hash.data(), 32)}));
    }

    X25519HashDhKem inner_;
};

class CombinedKem final : public Kem {
  public:
    explicit CombinedKem(std::vector<const Kem*> members) : members_(std::move(members)) {
        name_ = members_[0]->name();
        for (size_t i = 1; i < members_.size(); ++i) name_ += "+" + members_[i]->name();
    }

    std::string name() const override { return name_; }
    size_t public_key_size() const override {
        return std::accumulate(members_.begin(), members_.end(), size_t(0),
                               [](size_t a, const Kem* k) { return a + k->public_key_size(); });
    }
    size_t private_key_size() const override {
        return std::accumulate(members_.begin(), members_.end(), size_t(0),
                               [](size_t a, const Kem* k) { return a + k->private_key_size(); });
    }
    size_t ciphertext_size() const override {
        return std::accumulate(members_.begin(), members_.end(), size_t(0),
                               [](size_t a, const Kem* k) { return a + k->ciphertext_size(); });
    }

    std::pair<Bytes, Bytes> generate_keypair(Rng& rng) const override {
        Bytes priv, pub;
        for (auto* k : members_) {
            auto [p, q] = k->generate_keypair(rng);
            append(priv, p);
            append(pub, q);
        }
        return {priv, pub};
    }

    Encapsulated encapsulate(ByteView pub, Rng& rng) const override {
        if (pub.size() != public_key_size()) throw KemError("combined: bad public key size");
        Bytes cts, secrets;
        size_t off = 0;
        for (auto* k : members_) {
            auto enc = k->encapsulate(pub.subspan(off, k->public_key_size()), rng);
            off += k->public_key_size();
            append(cts, enc.ciphertext);
            append(secrets, ByteView(enc.shared.data(), 32));
        }
        Encapsulated out;
        out.shared = combine(secrets, cts);
        out.ciphertext = std::move(cts);
        return out;
    }

    Key256 decapsulate(ByteView priv, ByteView ct) const override {
        if (priv.size() != private_key_size()) throw KemError("combined: bad private key size");
        if (ct.size() != ciphertext_size()) throw KemError("combined: bad ciphertext size");
        Bytes secrets;
        size_t poff = 0, coff = 0;
        for (auto* k : members_) {
            auto s = k->decapsulate(priv.subspan(poff, k->private_key_size()),
                                    ct.subspan(coff, k->ciphertext_size()));
            poff += k->private_key_size();
            coff += k->ciphertext_size();
            append(secrets, ByteView(s.data(), 32));
        }
        return combine(secrets, to_bytes(ct));
    }

  private:
    static Key256 combine(ByteView secrets, ByteView cts) {
        KdfState prk = kdf_extract("kem-combiner", concat({secrets, cts}));
        return kdf_expand(prk, to_bytes(std::string("combined-secret")), 1)[0];
    }

    std::vector<const Kem*> members_;
    std::string name_;
};

}  // namespace

const Kem& kem_x25519() {
    static const X25519HashDhKem instance;
    return instance;
}

const Kem& kem_mlkem768_stub() {
    static const BigStubKem instance;
    return instance;
}

std::unique_ptr<Kem> kem_combine(std::vector<const Kem*> members) {
    if (members.empty()) throw KemError("kem_combine: empty member list");
    return std::make_unique<CombinedKem>(std::move(members));
}

}  // namespace echomix::crypto
