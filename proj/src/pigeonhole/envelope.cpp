#include "echomix/pigeonhole/envelope.hpp"

#include "echomix/crypto/aead.hpp"
#include "echomix/crypto/hash.hpp"
#include "echomix/crypto/kdf.hpp"

namespace echomix::pigeonhole {

namespace {

constexpr uint8_t WIRE_VERSION = 1;

// DEK wrapping key from the NIKE shared secret, bound to both public keys.
Key256 dek_wrap_key(ByteView shared, const ByteArray<32>& eph_pub, ByteView replica_pub) {
    return crypto::kdf_extract("pigeonhole-dek",
                               concat({shared, ByteView(eph_pub.data(), 32), replica_pub}));
}

HybridEphemeral make_hybrid(const ByteArray<32>& classical) {
    HybridEphemeral e;
    e.classical = classical;
    // fixed-size stand-in for the second slot of the hybrid key
    auto filler = crypto::hkdf_expand(crypto::kdf_extract("pigeonhole-pq-slot", classical),
                                      to_bytes(std::string("pq-slot")), 128);
    std::memcpy(e.pq_slot.data(), filler.data(), 128);
    return e;
}

const ByteArray<12> ZERO_NONCE{};

}  // namespace

Bytes CourierEnvelope::serialize() const {
    Bytes out;
    out.push_back(WIRE_VERSION);
    out.push_back(uint8_t(kind));
    append(out, ByteView(ephemeral.classical.data(), 32));
    append(out, ByteView(ephemeral.pq_slot.data(), 128));
    out.push_back(uint8_t(deks.size()));
    for (const auto& d : deks) {
        append(out, ByteView(d.replica_id.data(), 32));
        if (d.sealed.size() != 48) throw PigeonholeError("envelope: bad sealed dek size");
        append(out, d.sealed);
    }
    append(out, ByteView(reply_handle.data(), REPLY_HANDLE_SIZE));
    Bytes len(4);
    store_be32(len.data(), uint32_t(enveloped.size()));
    append(out, len);
    append(out, enveloped);
    return out;
}

CourierEnvelope CourierEnvelope::deserialize(ByteView wire) {
    if (wire.size() < 2) throw PigeonholeError("envelope: truncated");
    if (wire[0] != WIRE_VERSION) throw PigeonholeError("envelope: unknown version");
    CourierEnvelope env;
    if (wire[1] != uint8_t(Kind::Write) && wire[1] != uint8_t(Kind::Read))
        throw PigeonholeError("envelope: unknown kind");
    env.kind = Kind(wire[1]);
    size_t off = 2;
    auto need = [&](size_t n) {
        if (wire.size() < off + n) throw PigeonholeError("envelope: truncated");
    };
    need(160 + 1);
    env.ephemeral.classical = to_array<32>(wire.subspan(off, 32));
    off += 32;
    std::memcpy(env.ephemeral.pq_slot.data(), wire.data() + off, 128);
    off += 128;
    size_t ndeks = wire[off++];
    for (size_t i = 0; i < ndeks; ++i) {
        need(SealedDek::WIRE_SIZE);
        SealedDek d;
        d.replica_id = to_array<32>(wire.subspan(off, 32));
        off += 32;
        d.sealed = to_bytes(wire.subspan(off, 48));
        off += 48;
        env.deks.push_back(std::move(d));
    }
    need(REPLY_HANDLE_SIZE + 4);
    env.reply_handle = to_array<REPLY_HANDLE_SIZE>(wire.subspan(off, REPLY_HANDLE_SIZE));
    off += REPLY_HANDLE_SIZE;
    uint32_t len = load_be32(wire.data() + off);
    off += 4;
    if (wire.size() != off + len) throw PigeonholeError("envelope: length mismatch");
    env.enveloped = to_bytes(wire.subspan(off, len));
    return env;
}

ByteArray<32> CourierEnvelope::digest() const {
    return crypto::Sha256::hash(serialize());
}

EnvelopeCrypto::Sealed EnvelopeCrypto::seal(
    ByteView plaintext, const std::vector<std::pair<ByteArray<32>, Bytes>>& replica_keys,
    Rng& rng) {
    const auto& nike = crypto::nike_x25519();
    auto [eph_priv, eph_pub] = nike.generate_keypair(rng);

    Sealed out;
    out.ephemeral = make_hybrid(to_array<32>(eph_pub));
    out.dek = rng.key256();
    out.enveloped = crypto::aead_seal(out.dek, ZERO_NONCE, plaintext, {});
    for (const auto& [replica_id, replica_pub] : replica_keys) {
        auto shared = nike.dh(eph_priv, replica_pub);
        auto wrap = dek_wrap_key(shared, out.ephemeral.classical, replica_pub);
        SealedDek d;
        d.replica_id = replica_id;
        d.sealed = crypto::aead_seal(wrap, ZERO_NONCE, ByteView(out.dek.data(), 32),
                                     ByteView(replica_id.data(), 32));
        out.deks.push_back(std::move(d));
    }
    return out;
}

std::optional<Key256> EnvelopeCrypto::unwrap_dek(const CourierEnvelope& env,
                                                 const ByteArray<32>& replica_id,
                                                 ByteView replica_private,
                                                 ByteView replica_public) {
    const auto& nike = crypto::nike_x25519();
    for (const auto& d : env.deks) {
        if (d.replica_id != replica_id) continue;
        Bytes shared;
        try {
            shared = nike.dh(replica_private, ByteView(env.ephemeral.classical.data(), 32));
        } catch (const crypto::NikeError&) {
            return std::nullopt;
        }
        auto wrap = dek_wrap_key(shared, env.ephemeral.classical, replica_public);
        auto dek = crypto::aead_open(wrap, ZERO_NONCE, d.sealed, ByteView(replica_id.data(), 32));
        if (!dek || dek->size() != 32) return std::nullopt;
        return to_array<32>(*dek);
    }
    return std::nullopt;
}

std::optional<Bytes> EnvelopeCrypto::open_enveloped(const CourierEnvelope& env, const Key256& dek) {
    return crypto::aead_open(dek, ZERO_NONCE, env.enveloped, {});
}

Bytes EnvelopeCrypto::seal_reply(const Key256& dek, ByteView plaintext, size_t padded_size) {
    if (plaintext.size() > padded_size) throw PigeonholeError("reply exceeds padded size");
    Bytes padded(padded_size, 0);
    std::memcpy(padded.data(), plaintext.data(), plaintext.size());
    return crypto::aead_seal(dek, ZERO_NONCE, padded, to_bytes(std::string("reply")));
}

std::optional<Bytes> EnvelopeCrypto::open_reply(const Key256& dek, ByteView sealed) {
    return crypto::aead_open(dek, ZERO_NONCE, sealed, to_bytes(std::string("reply")));
}

Bytes ReadReply::serialize(size_t max_ciphertext) const {
    Bytes out;
    out.push_back(found ? 1 : 0);
    Bytes area(32 + 4 + max_ciphertext + 64, 0);
    if (found) {
        if (!box) throw PigeonholeError("read reply: found without box");
        if (box->ciphertext.size() > max_ciphertext)
            throw PigeonholeError("read reply: ciphertext exceeds area");
        auto wire = box->serialize();
        std::memcpy(area.data(), wire.data(), wire.size());
    }
    append(out, area);
    return out;
}

ReadReply ReadReply::deserialize(ByteView wire) {
    if (wire.size() < 1 + 32 + 4 + 64) throw PigeonholeError("read reply: truncated");
    ReadReply r;
    r.found = wire[0] == 1;
    if (r.found) {
        uint32_t len = load_be32(wire.data() + 1 + 32);
        size_t box_wire = 32 + 4 + len + 64;
        if (wire.size() < 1 + box_wire) throw PigeonholeError("read reply: truncated box");
        r.box = bacap::BacapBox::deserialize(wire.subspan(1, box_wire));
    }
    return r;
}

size_t ReadReply::wire_size(size_t max_ciphertext) { return 1 + 32 + 4 + max_ciphertext + 64; }

Bytes WriteOrder::serialize() const {
    Bytes out;
    out.push_back(WIRE_VERSION);
    append(out, ByteView(ephemeral.classical.data(), 32));
    append(out, ByteView(ephemeral.pq_slot.data(), 128));
    out.push_back(uint8_t(deks.size()));
    for (const auto& d : deks) {
        append(out, ByteView(d.replica_id.data(), 32));
        append(out, d.sealed);
    }
    Bytes len(4);
    store_be32(len.data(), uint32_t(enveloped.size()));
    append(out, len);
    append(out, enveloped);
    return out;
}

WriteOrder WriteOrder::deserialize(ByteView wire) {
    if (wire.size() < 162) throw PigeonholeError("write order: truncated");
    if (wire[0] != WIRE_VERSION) throw PigeonholeError("write order: unknown version");
    WriteOrder w;
    size_t off = 1;
    w.ephemeral.classical = to_array<32>(wire.subspan(off, 32));
    off += 32;
    std::memcpy(w.ephemeral.pq_slot.data(), wire.data() + off, 128);
    off += 128;
    size_t ndeks = wire[off++];
    for (size_t i = 0; i < ndeks; ++i) {
        if (wire.size() < off + SealedDek::WIRE_SIZE) throw PigeonholeError("write order: truncated");
        SealedDek d;
        d.replica_id = to_array<32>(wire.subspan(off, 32));
        off += 32;
        d.sealed = to_bytes(wire.subspan(off, 48));
        off += 48;
        w.deks.push_back(std::move(d));
    }
    if (wire.size() < off + 4) throw PigeonholeError("write order: truncated");
    uint32_t len = load_be32(wire.data() + off);
    off += 4;
    if (wire.size() != off + len) throw PigeonholeError("write order: length mismatch");
    w.enveloped = to_bytes(wire.subspan(off, len));
    return w;
}

}  // namespace echomix::pigeonhole
