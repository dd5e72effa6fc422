#include "echomix/sphinx/sphinx.hpp"

#include "echomix/crypto/chacha.hpp"
#include "echomix/crypto/group.hpp"
#include "echomix/crypto/hash.hpp"
#include "echomix/crypto/kdf.hpp"

namespace echomix::sphinx {

namespace {

const uint8_t AD_BYTES[SphinxGeometry::AD_SIZE] = {0x01, 0x00};

struct HopKeys {
    Key256 mac_key{};
    Key256 stream_key{};
    Key256 sprp_master{};
    ByteArray<32> blind{};
    ByteArray<16> replay_tag{};
};

HopKeys derive_hop_keys(ByteView shared) {
    auto prk = crypto::kdf_extract("sphinx-hop-v1", shared);
    Bytes raw = crypto::hkdf_expand(prk, to_bytes(std::string("sphinx-keys")), 4 * 32 + 16);
    HopKeys k;
    std::memcpy(k.mac_key.data(), raw.data(), 32);
    std::memcpy(k.stream_key.data(), raw.data() + 32, 32);
    std::memcpy(k.sprp_master.data(), raw.data() + 64, 32);
    std::memcpy(k.blind.data(), raw.data() + 96, 32);
    std::memcpy(k.replay_tag.data(), raw.data() + 128, 16);
    return k;
}

Bytes hop_stream(const HopKeys& k, size_t n) {
    crypto::ChaCha20 c(k.stream_key, ByteArray<12>{});
    return c.keystream(n);
}

ByteArray<32> mac(const Key256& key, ByteView data) {
    return crypto::hmac_sha256(key, data);
}

// ---- wide-block permutation (LIONESS over ChaCha20 + HMAC-SHA-256) ----

std::array<Key256, 4> lioness_subkeys(const Key256& master) {
    Bytes raw = crypto::hkdf_expand(master, to_bytes(std::string("sprp-subkeys")), 128);
    std::array<Key256, 4> ks;
    for (int i = 0; i < 4; ++i) std::memcpy(ks[i].data(), raw.data() + 32 * i, 32);
    return ks;
}

Key256 xor_key(const uint8_t* l, const Key256& k) {
    Key256 out;
    for (int i = 0; i < 32; ++i) out[i] = uint8_t(l[i] ^ k[i]);
    return out;
}

void lioness_stream_round(uint8_t* r, size_t rn, const uint8_t* l, const Key256& k) {
    crypto::ChaCha20 s(xor_key(l, k), ByteArray<12>{});
    s.xor_stream(r, rn);
}

void lioness_hash_round(uint8_t* l, const uint8_t* r, size_t rn, const Key256& k) {
    auto h = crypto::hmac_sha256(k, ByteView(r, rn));
    for (int i = 0; i < 32; ++i) l[i] ^= h[i];
}

Bytes lioness_encrypt(const Key256& master, ByteView block) {
    if (block.size() < 64) throw SphinxError("sprp: block too small");
    auto ks = lioness_subkeys(master);
    Bytes out = to_bytes(block);
    uint8_t* l = out.data();
    uint8_t* r = out.data() + 32;
    size_t rn = out.size() - 32;
    lioness_stream_round(r, rn, l, ks[0]);
    lioness_hash_round(l, r, rn, ks[1]);
    lioness_stream_round(r, rn, l, ks[2]);
    lioness_hash_round(l, r, rn, ks[3]);
    return out;
}

Bytes lioness_decrypt(const Key256& master, ByteView block) {
    if (block.size() < 64) throw SphinxError("sprp: block too small");
    auto ks = lioness_subkeys(master);
    Bytes out = to_bytes(block);
    uint8_t* l = out.data();
    uint8_t* r = out.data() + 32;
    size_t rn = out.size() - 32;
    lioness_hash_round(l, r, rn, ks[3]);
    lioness_stream_round(r, rn, l, ks[2]);
    lioness_hash_round(l, r, rn, ks[1]);
    lioness_stream_round(r, rn, l, ks[0]);
    return out;
}

// ---- slot encoding ----

void write_forward_slot(const SphinxGeometry& g, uint8_t* slot, ByteView slot_ct,
                        const ByteArray<32>& next_id, const ByteArray<32>& next_gamma,
                        uint32_t delay) {
    std::memset(slot, 0, g.slot_size);
    size_t base = 0;
    if (!slot_ct.empty()) {
        std::memcpy(slot, slot_ct.data(), slot_ct.size());
        base = slot_ct.size();
    }
    slot[base] = uint8_t(CommandType::Forward);
    std::memcpy(slot + base + 1, next_id.data(), 32);
    std::memcpy(slot + base + 33, next_gamma.data(), 32);
    store_be32(slot + base + 65, delay);
}

void write_terminal_slot(const SphinxGeometry& g, uint8_t* slot, size_t ct_size,
                         const TerminalCommand& term) {
    std::memset(slot, 0, g.slot_size);
    if (term.type == CommandType::Forward) throw SphinxError("terminal command cannot be Forward");
    slot[ct_size] = uint8_t(term.type);
    std::memcpy(slot + ct_size + 1, term.id.data(), COMMAND_ID_SIZE);
}

struct HeaderMaterial {
    std::vector<HopKeys> keys;
    Bytes alpha0;
    std::vector<Bytes> slot_ct;  // per hop: ciphertext for the *next* hop
};

struct Header {
    Bytes beta;
    ByteArray<32> gamma{};
};

Header assemble_header(const SphinxGeometry& g, const PathSpec& path, const HeaderMaterial& m,
                       Rng& rng) {
    const size_t p = path.hops.size();
    const size_t c = g.slot_size;
    const size_t L = g.beta_size;
    if (p < 1 || p > g.max_hops) throw SphinxError("path length out of range");

    std::vector<Bytes> rho(p);
    for (size_t k = 0; k < p; ++k) rho[k] = hop_stream(m.keys[k], L + c);

    // filler: the tail every processed hop leaves behind
    Bytes phi;
    for (size_t k = 0; k + 1 < p; ++k) {
        phi.resize((k + 1) * c, 0);
        xor_into(phi.data(), rho[k].data() + (L - k * c), (k + 1) * c);
    }

    const size_t ct_size = g.slot_size - SphinxGeometry::SLOT_OVERHEAD;

    // last hop's beta: terminal slot, random tail, stream, then filler
    size_t fixed = L - (p - 1) * c;
    Bytes beta(fixed);
    write_terminal_slot(g, beta.data(), ct_size, path.terminal);
    if (fixed > c) rng.fill(beta.data() + c, fixed - c);
    xor_into(beta.data(), rho[p - 1].data(), fixed);
    append(beta, phi);

    Header h;
    h.gamma = mac(m.keys[p - 1].mac_key, beta);
    h.beta = std::move(beta);

    for (size_t ri = 1; ri < p; ++ri) {
        size_t k = p - 1 - ri;  // hop whose view we are building
        Bytes nb(L);
        write_forward_slot(g, nb.data(), m.slot_ct[k], path.hops[k + 1].node_id, h.gamma,
                           path.hops[k + 1].delay_hint);
        std::memcpy(nb.data() + c, h.beta.data(), L - c);
        xor_into(nb.data(), rho[k].data(), L);
        h.beta = std::move(nb);
        h.gamma = mac(m.keys[k].mac_key, h.beta);
    }
    return h;
}

Bytes layer_payload(const SphinxGeometry& g, const HeaderMaterial& m, ByteView payload) {
    if (payload.size() > g.payload_size) throw SphinxError("payload too large for geometry");
    if (g.payload_size < 32) throw SphinxError("geometry payload too small");
    Bytes delta(g.delta_size, 0);  // 32-byte zero integrity tag, then payload
    std::memcpy(delta.data() + SphinxGeometry::PAYLOAD_TAG_SIZE, payload.data(), payload.size());
    for (size_t ri = 0; ri < m.keys.size(); ++ri) {
        size_t k = m.keys.size() - 1 - ri;
        delta = lioness_encrypt(m.keys[k].sprp_master, delta);
    }
    return delta;
}

HeaderMaterial nike_material(const SphinxGeometry& g, const crypto::Nike& nike,
                             const PathSpec& path, Rng& rng) {
    if (g.suite.kind != SuiteKind::Nike) throw SphinxError("geometry is not a NIKE geometry");
    if (nike.public_key_size() != g.alpha_size) throw SphinxError("suite does not fit geometry");
    HeaderMaterial m;
    auto [x, alpha] = nike.generate_keypair(rng);
    m.alpha0 = alpha;
    m.slot_ct.assign(path.hops.size(), Bytes{});
    for (size_t k = 0; k < path.hops.size(); ++k) {
        if (path.hops[k].public_key.size() != nike.public_key_size())
            throw SphinxError("hop public key size mismatch");
        auto shared = nike.dh(x, path.hops[k].public_key);
        m.keys.push_back(derive_hop_keys(shared));
        if (k + 1 < path.hops.size()) {
            auto b = crypto::GroupScalar::from_le_bytes(m.keys.back().blind);
            if (b.is_zero()) throw SphinxError("degenerate blinding factor");
            x = nike.compose_private(x, b.le_bytes());
        }
    }
    return m;
}

HeaderMaterial kem_material(const SphinxGeometry& g, const crypto::Kem& kem, const PathSpec& path,
                            Rng& rng) {
    if (g.suite.kind != SuiteKind::Kem) throw SphinxError("geometry is not a KEM geometry");
    if (kem.ciphertext_size() != g.alpha_size) throw SphinxError("suite does not fit geometry");
    HeaderMaterial m;
    const size_t p = path.hops.size();
    std::vector<Bytes> cts(p);
    for (size_t k = 0; k < p; ++k) {
        if (path.hops[k].public_key.size() != kem.public_key_size())
            throw SphinxError("hop public key size mismatch");
        auto enc = kem.encapsulate(path.hops[k].public_key, rng);
        cts[k] = std::move(enc.ciphertext);
        m.keys.push_back(derive_hop_keys(ByteView(enc.shared.data(), 32)));
    }
    m.alpha0 = cts[0];
    m.slot_ct.resize(p);
    for (size_t k = 0; k + 1 < p; ++k) m.slot_ct[k] = cts[k + 1];
    m.slot_ct[p - 1] = Bytes(kem.ciphertext_size(), 0);  // terminal slot padding
    return m;
}

struct ParsedSlot {
    CommandType type;
    Bytes slot_ct;
    ByteArray<32> next_id{};
    ByteArray<32> next_gamma{};
    uint32_t delay = 0;
    ByteArray<COMMAND_ID_SIZE> id{};
};

ParsedSlot parse_slot(const SphinxGeometry& g, const uint8_t* slot) {
    const size_t ct_size = g.slot_size - SphinxGeometry::SLOT_OVERHEAD;
    ParsedSlot out;
    out.slot_ct = Bytes(slot, slot + ct_size);
    const uint8_t* base = slot + ct_size;
    switch (base[0]) {
        case uint8_t(CommandType::Forward):
            out.type = CommandType::Forward;
            std::memcpy(out.next_id.data(), base + 1, 32);
            std::memcpy(out.next_gamma.data(), base + 33, 32);
            out.delay = load_be32(base + 65);
            break;
        case uint8_t(CommandType::Deliver):
        case uint8_t(CommandType::SurbReply):
            out.type = CommandType(base[0]);
            std::memcpy(out.id.data(), base + 1, COMMAND_ID_SIZE);
            break;
        default:
            throw SphinxError("unknown routing command");
    }
    return out;
}

void check_packet_sizes(const SphinxGeometry& g, const SphinxPacket& pkt) {
    if (pkt.alpha.size() != g.alpha_size || pkt.beta.size() != g.beta_size ||
        pkt.gamma.size() != g.gamma_size || pkt.delta.size() != g.delta_size)
        throw SphinxError("packet does not match geometry");
}

UnwrapResult unwrap_common(const SphinxGeometry& g, const HopKeys& keys, Bytes next_alpha_nike,
                           bool is_nike, const SphinxPacket& packet, ReplayCache* replay) {
    auto expect = mac(keys.mac_key, packet.beta);
    if (!bytes_equal(ByteView(expect.data(), 32), packet.gamma))
        throw SphinxError("header authentication failed");
    if (replay && !replay->check_and_insert(keys.replay_tag))
        throw SphinxError("replay detected");

    const size_t c = g.slot_size;
    const size_t L = g.beta_size;
    Bytes b = packet.beta;
    b.resize(L + c, 0);
    Bytes rho = hop_stream(keys, L + c);
    xor_into(b.data(), rho.data(), L + c);

    auto slot = parse_slot(g, b.data());
    Bytes delta = lioness_decrypt(keys.sprp_master, packet.delta);

    UnwrapResult r;
    r.kind = slot.type;
    if (slot.type == CommandType::Forward) {
        r.next_node = slot.next_id;
        r.delay_hint = slot.delay;
        r.next.alpha = is_nike ? std::move(next_alpha_nike) : std::move(slot.slot_ct);
        r.next.beta = Bytes(b.begin() + c, b.begin() + c + L);
        r.next.gamma = Bytes(slot.next_gamma.begin(), slot.next_gamma.end());
        r.next.delta = std::move(delta);
    } else if (slot.type == CommandType::Deliver) {
        r.id = slot.id;
        for (size_t i = 0; i < SphinxGeometry::PAYLOAD_TAG_SIZE; ++i)
            if (delta[i] != 0) throw SphinxError("payload integrity check failed");
        r.payload = Bytes(delta.begin() + SphinxGeometry::PAYLOAD_TAG_SIZE, delta.end());
    } else {
        r.id = slot.id;
        r.payload = std::move(delta);  // creator-side keys undo the layers
    }
    return r;
}

std::pair<Surb, SurbKeySet> surb_create_common(const SphinxGeometry& g, const PathSpec& path,
                                               HeaderMaterial m, Rng& rng) {
    Surb surb;
    SurbKeySet ks;
    rng.fill(surb.surb_id.data(), COMMAND_ID_SIZE);
    ks.surb_id = surb.surb_id;
    surb.first_hop = path.hops[0].node_id;
    surb.payload_key = rng.key256();
    surb.tag_key = rng.key256();
    ks.payload_key = surb.payload_key;
    ks.tag_key = surb.tag_key;
    for (const auto& hk : m.keys) ks.hop_sprp_keys.push_back(hk.sprp_master);

    PathSpec p2 = path;
    p2.terminal = TerminalCommand{CommandType::SurbReply, surb.surb_id};
    auto h = assemble_header(g, p2, m, rng);
    surb.header.reserve(g.header_size);
    append(surb.header, ByteView(AD_BYTES, SphinxGeometry::AD_SIZE));
    append(surb.header, m.alpha0);
    append(surb.header, h.beta);
    append(surb.header, ByteView(h.gamma.data(), 32));
    return {std::move(surb), std::move(ks)};
}

}  // namespace

Bytes SphinxPacket::serialize() const {
    Bytes out;
    out.reserve(SphinxGeometry::AD_SIZE + alpha.size() + beta.size() + gamma.size() +
                delta.size());
    append(out, ByteView(AD_BYTES, SphinxGeometry::AD_SIZE));
    append(out, alpha);
    append(out, beta);
    append(out, gamma);
    append(out, delta);
    return out;
}

SphinxPacket SphinxPacket::parse(const SphinxGeometry& g, ByteView wire) {
    if (wire.size() != g.packet_size) throw SphinxError("packet size mismatch");
    if (std::memcmp(wire.data(), AD_BYTES, SphinxGeometry::AD_SIZE) != 0)
        throw SphinxError("unknown packet version");
    SphinxPacket p;
    size_t off = SphinxGeometry::AD_SIZE;
    p.alpha = to_bytes(wire.subspan(off, g.alpha_size));
    off += g.alpha_size;
    p.beta = to_bytes(wire.subspan(off, g.beta_size));
    off += g.beta_size;
    p.gamma = to_bytes(wire.subspan(off, g.gamma_size));
    off += g.gamma_size;
    p.delta = to_bytes(wire.subspan(off));
    return p;
}

bool ReplayCache::check_and_insert(const ByteArray<16>& tag) {
    std::string key(reinterpret_cast<const char*>(tag.data()), tag.size());
    std::lock_guard lock(mutex_);
    return seen_.insert(std::move(key)).second;
}

void ReplayCache::clear() {
    std::lock_guard lock(mutex_);
    seen_.clear();
}

size_t ReplayCache::size() const {
    std::lock_guard lock(mutex_);
    return seen_.size();
}

SphinxPacket nike_wrap(const SphinxGeometry& g, const crypto::Nike& nike, const PathSpec& path,
                       ByteView payload, Rng& rng) {
    auto m = nike_material(g, nike, path, rng);
    auto h = assemble_header(g, path, m, rng);
    SphinxPacket pkt;
    pkt.alpha = m.alpha0;
    pkt.beta = std::move(h.beta);
    pkt.gamma = Bytes(h.gamma.begin(), h.gamma.end());
    pkt.delta = layer_payload(g, m, payload);
    return pkt;
}

UnwrapResult nike_unwrap(const SphinxGeometry& g, const crypto::Nike& nike, ByteView node_priv,
                         const SphinxPacket& packet, ReplayCache* replay) {
    check_packet_sizes(g, packet);
    Bytes shared;
    try {
        shared = nike.dh(node_priv, packet.alpha);
    } catch (const crypto::NikeError& e) {
        throw SphinxError(std::string("malformed alpha: ") + e.what());
    }
    auto keys = derive_hop_keys(shared);
    auto b = crypto::GroupScalar::from_le_bytes(keys.blind);
    if (b.is_zero()) throw SphinxError("degenerate blinding factor");
    Bytes next_alpha = nike.blind_public(packet.alpha, b.le_bytes());
    return unwrap_common(g, keys, std::move(next_alpha), true, packet, replay);
}

SphinxPacket kem_wrap(const SphinxGeometry& g, const crypto::Kem& kem, const PathSpec& path,
                      ByteView payload, Rng& rng) {
    auto m = kem_material(g, kem, path, rng);
    auto h = assemble_header(g, path, m, rng);
    SphinxPacket pkt;
    pkt.alpha = m.alpha0;
    pkt.beta = std::move(h.beta);
    pkt.gamma = Bytes(h.gamma.begin(), h.gamma.end());
    pkt.delta = layer_payload(g, m, payload);
    return pkt;
}

UnwrapResult kem_unwrap(const SphinxGeometry& g, const crypto::Kem& kem, ByteView node_priv,
                        const SphinxPacket& packet, ReplayCache* replay) {
    check_packet_sizes(g, packet);
    Key256 shared;
    try {
        shared = kem.decapsulate(node_priv, packet.alpha);
    } catch (const crypto::KemError& e) {
        throw SphinxError(std::string("malformed alpha: ") + e.what());
    } catch (const crypto::NikeError& e) {
        throw SphinxError(std::string("malformed alpha: ") + e.what());
    }
    auto keys = derive_hop_keys(ByteView(shared.data(), 32));
    return unwrap_common(g, keys, {}, false, packet, replay);
}

std::pair<Surb, SurbKeySet> surb_create(const SphinxGeometry& g, const crypto::Nike& nike,
                                        const PathSpec& reply_path, Rng& rng) {
    return surb_create_common(g, reply_path, nike_material(g, nike, reply_path, rng), rng);
}

std::pair<Surb, SurbKeySet> surb_create(const SphinxGeometry& g, const crypto::Kem& kem,
                                        const PathSpec& reply_path, Rng& rng) {
    return surb_create_common(g, reply_path, kem_material(g, kem, reply_path, rng), rng);
}

SphinxPacket surb_reply(const SphinxGeometry& g, const Surb& surb, ByteView payload) {
    if (payload.size() > g.payload_size) throw SphinxError("payload too large for geometry");
    Bytes padded(g.payload_size, 0);
    std::memcpy(padded.data(), payload.data(), payload.size());
    auto tag = crypto::hmac_sha256(surb.tag_key, padded);
    Bytes plain;
    plain.reserve(g.delta_size);
    append(plain, ByteView(tag.data(), 32));
    append(plain, padded);

    SphinxPacket pkt;
    // header = ad || alpha || beta || gamma
    if (surb.header.size() != g.header_size) throw SphinxError("surb header size mismatch");
    size_t off = SphinxGeometry::AD_SIZE;
    pkt.alpha = to_bytes(ByteView(surb.header).subspan(off, g.alpha_size));
    off += g.alpha_size;
    pkt.beta = to_bytes(ByteView(surb.header).subspan(off, g.beta_size));
    off += g.beta_size;
    pkt.gamma = to_bytes(ByteView(surb.header).subspan(off, g.gamma_size));
    pkt.delta = lioness_encrypt(surb.payload_key, plain);
    return pkt;
}

Bytes Surb::serialize() const {
    Bytes out;
    append(out, ByteView(AD_BYTES, SphinxGeometry::AD_SIZE));
    append(out, ByteView(first_hop.data(), 32));
    append(out, ByteView(surb_id.data(), COMMAND_ID_SIZE));
    append(out, ByteView(payload_key.data(), 32));
    append(out, ByteView(tag_key.data(), 32));
    out.resize(out.size() + 16, 0);  // spare
    append(out, header);
    return out;
}

Surb Surb::deserialize(const SphinxGeometry& g, ByteView wire) {
    if (wire.size() != g.surb_size) throw SphinxError("surb size mismatch");
    if (std::memcmp(wire.data(), AD_BYTES, SphinxGeometry::AD_SIZE) != 0)
        throw SphinxError("unknown surb version");
    Surb s;
    size_t off = SphinxGeometry::AD_SIZE;
    s.first_hop = to_array<32>(wire.subspan(off, 32));
    off += 32;
    s.surb_id = to_array<COMMAND_ID_SIZE>(wire.subspan(off, COMMAND_ID_SIZE));
    off += COMMAND_ID_SIZE;
    s.payload_key = to_array<32>(wire.subspan(off, 32));
    off += 32;
    s.tag_key = to_array<32>(wire.subspan(off, 32));
    off += 32 + 16;  // spare
    s.header = to_bytes(wire.subspan(off));
    return s;
}

void SurbKeyStore::put(SurbKeySet keys) {
    std::string id(reinterpret_cast<const char*>(keys.surb_id.data()), COMMAND_ID_SIZE);
    std::lock_guard lock(mutex_);
    keys_.emplace(std::move(id), std::move(keys));
}

Bytes SurbKeyStore::decrypt(const ByteArray<COMMAND_ID_SIZE>& surb_id, ByteView delta) {
    std::string id(reinterpret_cast<const char*>(surb_id.data()), COMMAND_ID_SIZE);
    SurbKeySet ks;
    {
        std::lock_guard lock(mutex_);
        auto it = keys_.find(id);
        if (it == keys_.end()) throw SphinxError("unknown or already-consumed reply block");
        ks = std::move(it->second);
        keys_.erase(it);  // single use
    }
    Bytes tmp = to_bytes(delta);
    for (size_t ri = 0; ri < ks.hop_sprp_keys.size(); ++ri) {
        size_t k = ks.hop_sprp_keys.size() - 1 - ri;
        tmp = lioness_encrypt(ks.hop_sprp_keys[k], tmp);
    }
    Bytes plain = lioness_decrypt(ks.payload_key, tmp);
    if (plain.size() < 32) throw SphinxError("reply too short");
    Bytes payload(plain.begin() + 32, plain.end());
    auto tag = crypto::hmac_sha256(ks.tag_key, payload);
    if (std::memcmp(tag.data(), plain.data(), 32) != 0)
        throw SphinxError("reply integrity check failed");
    return payload;
}

size_t SurbKeyStore::pending() const {
    std::lock_guard lock(mutex_);
    return keys_.size();
}

}  // namespace echomix::sphinx
