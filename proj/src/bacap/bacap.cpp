#include "echomix/bacap/bacap.hpp"

#include "echomix/crypto/aead.hpp"
#include "echomix/crypto/hash.hpp"
#include "echomix/support/par.hpp"

namespace echomix::bacap {

using crypto::GroupElement;
using crypto::GroupScalar;
using crypto::KdfState;

namespace {

constexpr uint64_t INDEX_CEILING = ~uint64_t(0);  // 2^64-1 never derivable



ByteArray<12> box_nonce(const ByteArray<32>& box_id) {
    auto h = crypto::Sha256::hash(box_id);
    ByteArray<12> nonce;
    std::memcpy(nonce.data(), h.data(), 12);
    return nonce;
}

// Deterministic signature nonce: KDF keyed by the per-box secret over the
// ciphertext, so a writer never reuses a nonce across distinct payloads.
GroupScalar signature_nonce(const GroupScalar& per_box_secret, ByteView ciphertext) {
    Bytes info = to_bytes(std::string("bacap-signonce"));
    append(info, ciphertext);
    auto outs = crypto::kdf_expand(per_box_secret.le_bytes(), info, 2);
    Bytes wide = concat({ByteView(outs[0].data(), 32), ByteView(outs[1].data(), 32)});
    auto nonce = GroupScalar::from_wide(wide);
    if (nonce.is_zero()) throw BacapError("signature nonce degenerated to zero");
    return nonce;
}

GroupScalar per_box_secret(const WriteCap& cap, const BoxKeys& keys) {
    auto s = cap.root_secret.mul(keys.blind);
    if (s.is_zero()) throw BacapError("derived signing scalar is zero");
    return s;
}

}  // namespace

Context Context::of(ByteView public_value) {
    return Context{crypto::Sha256::hash(public_value)};
}

// H_i, i -> H_{i+1}, E_i, K_i ; then E and K are bound to ctx.
ChainKeys derive_chain(const KdfState& state, uint64_t index, const Context& ctx) {
    Bytes info = to_bytes(std::string("bacap-chain"));
    append(info, be64_bytes(index));
    auto outs = crypto::kdf_expand(state, info, 3);

    ChainKeys step;
    step.next_state = outs[0];

    Bytes enc_info = to_bytes(std::string("bacap-enc"));
    append(enc_info, ByteView(ctx.value.data(), 32));
    step.enc_key = crypto::kdf_expand(outs[1], enc_info, 1)[0];

    // K reduced mod l; rejection-resample the (negligible) zero case.
    for (uint32_t attempt = 0;; ++attempt) {
        Bytes blind_info = to_bytes(std::string("bacap-blind"));
        append(blind_info, ByteView(ctx.value.data(), 32));
        if (attempt) {
            Bytes ctr(4);
            store_be32(ctr.data(), attempt);
            append(blind_info, ctr);
        }
        auto kb = crypto::kdf_expand(outs[2], blind_info, 1)[0];
        step.blind = GroupScalar::from_le_bytes(kb);
        if (!step.blind.is_zero()) break;
    }
    return step;
}

WriteCap WriteCap::generate(Rng& rng) {
    WriteCap cap;
    do {
        cap.root_secret = GroupScalar::random(rng);
    } while (cap.root_secret.is_zero());
    cap.root_public = GroupElement::base().mul(cap.root_secret);
    cap.first_index = rng.next_u64() >> 1;  // uniform in [0, 2^63)
    cap.state = rng.key256();
    return cap;
}

ReadCap WriteCap::read_cap() const {
    return ReadCap{root_public, state, first_index};
}

Bytes WriteCap::serialize() const {
    Bytes out;
    append(out, ByteView(root_secret.le_bytes().data(), 32));
    append(out, ByteView(state.data(), 32));
    append(out, be64_bytes(first_index));
    return out;
}

WriteCap WriteCap::deserialize(ByteView data) {
    if (data.size() != 72) throw BacapError("write cap: need 72 bytes");
    WriteCap cap;
    cap.root_secret = GroupScalar::from_le_bytes(data.subspan(0, 32));
    if (cap.root_secret.is_zero()) throw BacapError("write cap: zero root secret");
    cap.root_public = GroupElement::base().mul(cap.root_secret);
    cap.state = to_array<32>(data.subspan(32, 32));
    cap.first_index = load_be64(data.data() + 64);
    return cap;
}

Bytes ReadCap::serialize() const {
    Bytes out;
    auto enc = root_public.encode();
    append(out, ByteView(enc.data(), 32));
    append(out, ByteView(state.data(), 32));
    append(out, be64_bytes(first_index));
    return out;
}

ReadCap ReadCap::deserialize(ByteView data) {
    if (data.size() != 72) throw BacapError("read cap: need 72 bytes");
    ReadCap cap;
    cap.root_public = GroupElement::decode(data.subspan(0, 32));
    cap.state = to_array<32>(data.subspan(32, 32));
    cap.first_index = load_be64(data.data() + 64);
    return cap;
}

Bytes BacapBox::serialize() const {
    Bytes out;
    append(out, ByteView(box_id.data(), 32));
    Bytes len(4);
    store_be32(len.data(), uint32_t(ciphertext.size()));
    append(out, len);
    append(out, ciphertext);
    append(out, ByteView(signature.data(), 64));
    return out;
}

BacapBox BacapBox::deserialize(ByteView data) {
    if (data.size() < 32 + 4 + 64) throw BacapError("box: truncated");
    BacapBox box;
    box.box_id = to_array<32>(data.subspan(0, 32));
    uint32_t len = load_be32(data.data() + 32);
    if (data.size() != size_t(32 + 4 + 64) + len) throw BacapError("box: length mismatch");
    box.ciphertext = to_bytes(data.subspan(36, len));
    box.signature = to_array<64>(data.subspan(36 + len, 64));
    return box;
}

KdfState chain_next_state(const KdfState& state, uint64_t index) {
    Bytes info = to_bytes(std::string("bacap-chain"));
    append(info, be64_bytes(index));
    return crypto::kdf_expand(state, info, 1)[0];
}

BoxKeys derive_next(const GroupElement& root_public, const KdfState& state, uint64_t index,
                    const Context& ctx) {
    if (index == INDEX_CEILING) throw BacapError("sequence index overflow");
    auto step = derive_chain(state, index, ctx);
    BoxKeys keys;
    keys.index = index;
    keys.enc_key = step.enc_key;
    keys.blind = step.blind;
    keys.next_state = step.next_state;
    keys.box_id = root_public.mul(step.blind);
    if (keys.box_id.is_identity()) throw BacapError("degenerate box id");
    return keys;
}

BoxKeys SequenceCursor::next(const Context& ctx) {
    auto keys = derive_next(root_, state_, index_, ctx);
    state_ = keys.next_state;
    ++index_;
    return keys;
}

Bytes seal_payload(const BoxKeys& keys, ByteView message) {
    auto id = keys.box_id.encode();
    return crypto::aead_seal(keys.enc_key, box_nonce(id), message, id);
}

BacapBox seal(const BoxKeys& keys, const WriteCap& cap, ByteView message) {
    BacapBox box;
    box.box_id = keys.box_id.encode();
    box.ciphertext = seal_payload(keys, message);
    auto secret = per_box_secret(cap, keys);
    box.signature = crypto::sign_with_scalar(secret, box.box_id, box.ciphertext,
                                             signature_nonce(secret, box.ciphertext));
    return box;
}

BacapBox make_tombstone(const BoxKeys& keys, const WriteCap& cap) {
    BacapBox box;
    box.box_id = keys.box_id.encode();
    auto secret = per_box_secret(cap, keys);
    box.signature = crypto::sign_with_scalar(secret, box.box_id, {}, signature_nonce(secret, {}));
    return box;
}

bool verify(const BacapBox& box) {
    return crypto::verify_signature(box.box_id, box.ciphertext,
                                    ByteView(box.signature.data(), 64));
}

std::optional<Bytes> open(const BoxKeys& keys, const BacapBox& box) {
    auto id = keys.box_id.encode();
    if (id != box.box_id) throw BacapError("box id does not match keys");
    if (!verify(box)) throw BacapError("signature verification failed");
    if (box.is_tombstone()) return std::nullopt;
    auto plain = crypto::aead_open(keys.enc_key, box_nonce(id), box.ciphertext, id);
    if (!plain) throw BacapError("payload decryption failed");
    return plain;
}

GroupScalar recover_root(const GroupScalar& derived_secret, const GroupScalar& blind) {
    return derived_secret.mul(blind.invert());
}

namespace {

template <class Cap>
Cap advance_impl(Cap cap, uint64_t to_index) {
    if (to_index < cap.first_index) throw BacapError("cannot advance a capability backwards");
    // Context-free ratchet: only H is walked; E/K derivations are not kept.
    while (cap.first_index < to_index) {
        cap.state = chain_next_state(cap.state, cap.first_index);
        ++cap.first_index;
    }
    return cap;
}

}  // namespace

ReadCap advance_cap(const ReadCap& cap, uint64_t to_index) { return advance_impl(cap, to_index); }
WriteCap advance_cap(const WriteCap& cap, uint64_t to_index) { return advance_impl(cap, to_index); }

namespace {

template <class Loop>
std::vector<BoxKeys> derive_range_impl(const GroupElement& root_public, const KdfState& state,
                                       uint64_t first_index, size_t count, const Context& ctx,
                                       Loop&& loop) {
    std::vector<BoxKeys> out(count);
    KdfState st = state;
    for (size_t i = 0; i < count; ++i) {
        auto step = derive_chain(st, first_index + i, ctx);
        out[i].index = first_index + i;
        out[i].enc_key = step.enc_key;
        out[i].blind = step.blind;
        out[i].next_state = step.next_state;
        st = step.next_state;
    }
    loop(count, [&](size_t i) { out[i].box_id = root_public.mul(out[i].blind); });
    return out;
}

}  // namespace

std::vector<BoxKeys> derive_range(const GroupElement& root_public, const KdfState& state,
                                  uint64_t first_index, size_t count, const Context& ctx) {
    return derive_range_impl(root_public, state, first_index, count, ctx,
                             [](size_t n, auto&& f) { par::for_index(n, f); });
}

std::vector<BoxKeys> derive_range_serial(const GroupElement& root_public, const KdfState& state,
                                         uint64_t first_index, size_t count, const Context& ctx) {
    return derive_range_impl(root_public, state, first_index, count, ctx,
                             [](size_t n, auto&& f) { par::for_index_serial(n, f); });
}

}  // namespace echomix::bacap
