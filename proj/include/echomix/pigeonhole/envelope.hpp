#pragma once

#include <optional>

#include "echomix/bacap/bacap.hpp"
#include "echomix/crypto/nike.hpp"
#include "echomix/pigeonhole/shard.hpp"

namespace echomix::pigeonhole {

constexpr size_t REPLY_HANDLE_SIZE = 16;
using ReplyHandle = ByteArray<REPLY_HANDLE_SIZE>;

/// The sender's per-envelope ephemeral public key: a classical x25519
/// slot plus a fixed-size stand-in for the post-quantum slot (filler
/// derived from the classical key; the hybrid geometry is preserved, the
/// second primitive is not instantiated).
struct HybridEphemeral {
    ByteArray<32> classical{};
    ByteArray<128> pq_slot{};

    static constexpr size_t WIRE_SIZE = 160;
};

/// One replica's view of the key wrapping: which replica, and the
/// envelope DEK sealed to its epoch key.
struct SealedDek {
    ByteArray<32> replica_id{};
    Bytes sealed;  // 32-byte DEK + AEAD tag

    static constexpr size_t WIRE_SIZE = 32 + 32 + 16;
};

/// What couriers see. Routing fields are in the clear; the enveloped
/// message is opaque to them.
struct CourierEnvelope {
    enum class Kind : uint8_t { Write = 1, Read = 2 };

    Kind kind = Kind::Write;
    HybridEphemeral ephemeral;
    std::vector<SealedDek> deks;  // write: two intermediates; read: one
    ReplyHandle reply_handle{};   // write: ACK surb; read: immediate-use surb
    Bytes enveloped;              // AEAD under the DEK

    Bytes serialize() const;
    static CourierEnvelope deserialize(ByteView wire);

    /// Dedup key: hash of the full wire form.
    ByteArray<32> digest() const;
};

/// Client-side construction/opening of the envelope layers.
class EnvelopeCrypto {
  public:
    /// Fresh ephemeral + DEK; seals `plaintext` once and wraps the DEK to
    /// each replica key.
    struct Sealed {
        HybridEphemeral ephemeral;
        std::vector<SealedDek> deks;
        Bytes enveloped;
        Key256 dek;  // kept by the sender to open the reply
    };
    static Sealed seal(ByteView plaintext,
                       const std::vector<std::pair<ByteArray<32>, Bytes>>& replica_keys, Rng& rng);

    /// Replica side: recover the DEK with the epoch private key, then the
    /// plaintext. nullopt when the envelope is not addressed to this key.
    static std::optional<Key256> unwrap_dek(const CourierEnvelope& env,
                                            const ByteArray<32>& replica_id,
                                            ByteView replica_private, ByteView replica_public);
    static std::optional<Bytes> open_enveloped(const CourierEnvelope& env, const Key256& dek);

    /// Replies are sealed under the DEK with a fixed wire size so that
    /// positive and negative replies are indistinguishable in transit.
    static Bytes seal_reply(const Key256& dek, ByteView plaintext, size_t padded_size);
    static std::optional<Bytes> open_reply(const Key256& dek, ByteView sealed);
};

/// Replica-visible payloads (after the envelope layers come off).
struct WritePayload {
    bacap::BacapBox box;
    Bytes serialize() const { return box.serialize(); }
    static WritePayload deserialize(ByteView wire) { return {bacap::BacapBox::deserialize(wire)}; }
};

struct ReadPayload {
    ByteArray<32> box_id{};
    Bytes serialize() const { return to_bytes(ByteView(box_id.data(), 32)); }
    static ReadPayload deserialize(ByteView wire) {
        if (wire.size() != 32) throw PigeonholeError("read payload: need 32 bytes");
        return {to_array<32>(wire)};
    }
};

/// Replica read replies: status byte then a fixed-size box area.
struct ReadReply {
    bool found = false;
    std::optional<bacap::BacapBox> box;

    Bytes serialize(size_t max_ciphertext) const;
    static ReadReply deserialize(ByteView wire);
    static size_t wire_size(size_t max_ciphertext);
};

/// A write order as stored in a temporary backfill channel: everything a
/// courier needs to execute the write without learning the target box ID.
struct WriteOrder {
    HybridEphemeral ephemeral;
    std::vector<SealedDek> deks;
    Bytes enveloped;

    Bytes serialize() const;
    static WriteOrder deserialize(ByteView wire);
};

}  // namespace echomix::pigeonhole
