#pragma once

#include <optional>

#include "echomix/bytes.hpp"
#include "echomix/crypto/group.hpp"
#include "echomix/crypto/kdf.hpp"

namespace echomix::bacap {

struct BacapError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Signals a tombstone where a payload was required, or vice versa.
struct TombstoneError : BacapError {
    using BacapError::BacapError;
};

/// Blinding context: the 256-bit hash of some universally public value
/// (for Pigeonhole, the current weekly shared random value). Deriving the
/// same sequence under two contexts yields disjoint box IDs.
struct Context {
    Key256 value;

    static Context of(ByteView public_value);
    bool operator==(const Context&) const = default;
};

/// Everything needed to use one box: its ID, the payload key, the
/// blinding factor (kept so the writer can later sign a tombstone), and
/// the ratcheted chain state.
struct BoxKeys {
    uint64_t index = 0;
    crypto::GroupElement box_id = crypto::GroupElement::identity();
    Key256 enc_key{};               // message encryption key for this ctx
    crypto::GroupScalar blind;      // blinding factor for this ctx
    crypto::KdfState next_state{};  // chain state for index+1
};

struct ReadCap {
    crypto::GroupElement root_public = crypto::GroupElement::identity();
    crypto::KdfState state{};
    uint64_t first_index = 0;

    /// Fixed layout: root_public (32) || state (32) || index (8, big-endian).
    Bytes serialize() const;
    static ReadCap deserialize(ByteView data);
};

struct WriteCap {
    crypto::GroupScalar root_secret;
    crypto::GroupElement root_public = crypto::GroupElement::identity();
    uint64_t first_index = 0;
    crypto::KdfState state{};

    static WriteCap generate(Rng& rng);
    ReadCap read_cap() const;

    /// Fixed layout: root_secret (32) || state (32) || index (8, big-endian).
    Bytes serialize() const;
    static WriteCap deserialize(ByteView data);
};

/// One stored message: blinded public key, AEAD ciphertext, signature by
/// the per-box secret scalar. Empty ciphertext denotes a tombstone.
struct BacapBox {
    ByteArray<32> box_id{};
    Bytes ciphertext;
    ByteArray<64> signature{};

    bool is_tombstone() const { return ciphertext.empty(); }

    /// Fixed layout: box_id (32) || length (4, big-endian) || ciphertext ||
    /// signature (64).
    Bytes serialize() const;
    static BacapBox deserialize(ByteView data);
};

/// Symmetric part of one derivation step (no box-id scalar
/// multiplication): chain state + index + context -> payload key,
/// blinding factor, next state.
struct ChainKeys {
    Key256 enc_key;
    crypto::GroupScalar blind;
    crypto::KdfState next_state;
};
ChainKeys derive_chain(const crypto::KdfState& state, uint64_t index, const Context& ctx);

/// Ratchet the chain state past `index` without deriving any keys.
crypto::KdfState chain_next_state(const crypto::KdfState& state, uint64_t index);

/// One derivation step: chain state + index + context -> box keys.
/// The index feeds the KDF as control input; throws on index 2^64-1.
BoxKeys derive_next(const crypto::GroupElement& root_public, const crypto::KdfState& state,
                    uint64_t index, const Context& ctx);

/// Single-owner cursor walking a capability's sequence in index order.
class SequenceCursor {
  public:
    explicit SequenceCursor(const ReadCap& cap)
        : root_(cap.root_public), state_(cap.state), index_(cap.first_index) {}
    explicit SequenceCursor(const WriteCap& cap)
        : root_(cap.root_public), state_(cap.state), index_(cap.first_index) {}

    uint64_t index() const { return index_; }
    const crypto::KdfState& state() const { return state_; }

    /// Keys for the current index; advances the cursor.
    BoxKeys next(const Context& ctx);

  private:
    crypto::GroupElement root_;
    crypto::KdfState state_;
    uint64_t index_;
};

Bytes seal_payload(const BoxKeys& keys, ByteView message);
BacapBox seal(const BoxKeys& keys, const WriteCap& cap, ByteView message);
BacapBox make_tombstone(const BoxKeys& keys, const WriteCap& cap);

/// Universal verification: anyone holding the box alone can check it.
bool verify(const BacapBox& box);

/// Returns the plaintext, or nullopt for a tombstone. Throws BacapError
/// when the box does not match the keys or fails verification/decryption.
std::optional<Bytes> open(const BoxKeys& keys, const BacapBox& box);

/// S_R = S_i * K_i^-1 (mod l): why derived signing keys must never be
/// shared. Throws on a zero blinding factor.
crypto::GroupScalar recover_root(const crypto::GroupScalar& derived_secret,
                                 const crypto::GroupScalar& blind);

/// Ratchets a capability forward, discarding earlier chain states.
/// to_index must not be in the past; WriteCaps keep the root secret.
ReadCap advance_cap(const ReadCap& cap, uint64_t to_index);
WriteCap advance_cap(const WriteCap& cap, uint64_t to_index);

/// Bulk derivation of `count` consecutive box keys. The chain walk is
/// sequential; the per-index blinded box IDs are computed with the
/// parallel kernel (serial variant kept as the reference for tests and
/// the benchmark).
std::vector<BoxKeys> derive_range(const crypto::GroupElement& root_public,
                                  const crypto::KdfState& state, uint64_t first_index,
                                  size_t count, const Context& ctx);
std::vector<BoxKeys> derive_range_serial(const crypto::GroupElement& root_public,
                                         const crypto::KdfState& state, uint64_t first_index,
                                         size_t count, const Context& ctx);

}  // namespace echomix::bacap
