#include "echomix/crypto/group.hpp"

#include "echomix/crypto/hash.hpp"

namespace echomix::crypto {

namespace {

using u128 = unsigned __int128;

constexpr uint64_t MASK51 = (uint64_t(1) << 51) - 1;

// ---- field arithmetic mod p = 2^255 - 19, 5 x 51-bit limbs ----

struct Fe {
    uint64_t v[5];
};

const Fe FE_ZERO = {{0, 0, 0, 0, 0}};
const Fe FE_ONE = {{1, 0, 0, 0, 0}};

inline Fe fe_add(const Fe& a, const Fe& b) {
    Fe r;
    for (int i = 0; i < 5; ++i) r.v[i] = a.v[i] + b.v[i];
    return r;
}

// a + 2p - b, keeps limbs positive
inline Fe fe_sub(const Fe& a, const Fe& b) {
    static const uint64_t TWO_P[5] = {0xfffffffffffda, 0xffffffffffffe, 0xffffffffffffe,
                                      0xffffffffffffe, 0xffffffffffffe};
    Fe r;
    for (int i = 0; i < 5; ++i) r.v[i] = a.v[i] + TWO_P[i] - b.v[i];
    return r;
}

inline Fe fe_carry(const Fe& a) {
    Fe r = a;
    uint64_t c;
    c = r.v[0] >> 51; r.v[0] &= MASK51; r.v[1] += c;
    c = r.v[1] >> 51; r.v[1] &= MASK51; r.v[2] += c;
    c = r.v[2] >> 51; r.v[2] &= MASK51; r.v[3] += c;
    c = r.v[3] >> 51; r.v[3] &= MASK51; r.v[4] += c;
    c = r.v[4] >> 51; r.v[4] &= MASK51; r.v[0] += c * 19;
    c = r.v[0] >> 51; r.v[0] &= MASK51; r.v[1] += c;
    return r;
}

Fe fe_mul(const Fe& a, const Fe& b) {
    u128 t0 = (u128)a.v[0] * b.v[0] + (u128)19 * ((u128)a.v[1] * b.v[4] + (u128)a.v[2] * b.v[3] +
                                                  (u128)a.v[3] * b.v[2] + (u128)a.v[4] * b.v[1]);
    u128 t1 = (u128)a.v[0] * b.v[1] + (u128)a.v[1] * b.v[0] +
              (u128)19 * ((u128)a.v[2] * b.v[4] + (u128)a.v[3] * b.v[3] + (u128)a.v[4] * b.v[2]);
    u128 t2 = (u128)a.v[0] * b.v[2] + (u128)a.v[1] * b.v[1] + (u128)a.v[2] * b.v[0] +
              (u128)19 * ((u128)a.v[3] * b.v[4] + (u128)a.v[4] * b.v[3]);
    u128 t3 = (u128)a.v[0] * b.v[3] + (u128)a.v[1] * b.v[2] + (u128)a.v[2] * b.v[1] +
              (u128)a.v[3] * b.v[0] + (u128)19 * ((u128)a.v[4] * b.v[4]);
    u128 t4 = (u128)a.v[0] * b.v[4] + (u128)a.v[1] * b.v[3] + (u128)a.v[2] * b.v[2] +
              (u128)a.v[3] * b.v[1] + (u128)a.v[4] * b.v[0];

    Fe r;
    uint64_t c;
    r.v[0] = uint64_t(t0) & MASK51; c = uint64_t(t0 >> 51);
    t1 += c;
    r.v[1] = uint64_t(t1) & MASK51; c = uint64_t(t1 >> 51);
    t2 += c;
    r.v[2] = uint64_t(t2) & MASK51; c = uint64_t(t2 >> 51);
    t3 += c;
    r.v[3] = uint64_t(t3) & MASK51; c = uint64_t(t3 >> 51);
    t4 += c;
    r.v[4] = uint64_t(t4) & MASK51; c = uint64_t(t4 >> 51);
    r.v[0] += c * 19;
    c = r.v[0] >> 51; r.v[0] &= MASK51; r.v[1] += c;
    return r;
}

inline Fe fe_sq(const Fe& a) { return fe_mul(a, a); }

Fe fe_from_bytes(const uint8_t b[32]) {
    auto load64 = [](const uint8_t* p) {
        uint64_t x = 0;
        for (int i = 7; i >= 0; --i) x = (x << 8) | p[i];
        return x;
    };
    Fe r;
    r.v[0] = load64(b) & MASK51;
    r.v[1] = (load64(b + 6) >> 3) & MASK51;
    r.v[2] = (load64(b + 12) >> 6) & MASK51;
    r.v[3] = (load64(b + 19) >> 1) & MASK51;
    r.v[4] = (load64(b + 24) >> 12) & MASK51;
    return r;
}

void fe_to_bytes(const Fe& a, uint8_t out[32]) {
    Fe t = fe_carry(fe_carry(a));
    // full reduction mod p
    uint64_t q = (t.v[0] + 19) >> 51;
    q = (t.v[1] + q) >> 51;
    q = (t.v[2] + q) >> 51;
    q = (t.v[3] + q) >> 51;
    q = (t.v[4] + q) >> 51;
    t.v[0] += 19 * q;
    uint64_t c;
    c = t.v[0] >> 51; t.v[0] &= MASK51; t.v[1] += c;
    c = t.v[1] >> 51; t.v[1] &= MASK51; t.v[2] += c;
    c = t.v[2] >> 51; t.v[2] &= MASK51; t.v[3] += c;
    c = t.v[3] >> 51; t.v[3] &= MASK51; t.v[4] += c;
    t.v[4] &= MASK51;

    uint64_t parts[4];
    parts[0] = t.v[0] | (t.v[1] << 51);
    parts[1] = (t.v[1] >> 13) | (t.v[2] << 38);
    parts[2] = (t.v[2] >> 26) | (t.v[3] << 25);
    parts[3] = (t.v[3] >> 39) | (t.v[4] << 12);
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 8; ++j) out[8 * i + j] = uint8_t(parts[i] >> (8 * j));
}

bool fe_is_zero(const Fe& a) {
    uint8_t b[32];
    fe_to_bytes(a, b);
    uint8_t acc = 0;
    for (int i = 0; i < 32; ++i) acc |= b[i];
    return acc == 0;
}

bool fe_eq(const Fe& a, const Fe& b) {
    uint8_t ba[32], bb[32];
    fe_to_bytes(a, ba);
    fe_to_bytes(b, bb);
    return std::memcmp(ba, bb, 32) == 0;
}

bool fe_is_odd(const Fe& a) {
    uint8_t b[32];
    fe_to_bytes(a, b);
    return b[0] & 1;
}

Fe fe_neg(const Fe& a) { return fe_sub(FE_ZERO, a); }

// exponent: 32 bytes little-endian
Fe fe_pow(const Fe& a, const uint8_t exp[32]) {
    Fe r = FE_ONE;
    bool started = false;
    for (int i = 255; i >= 0; --i) {
        if (started) r = fe_sq(r);
        if ((exp[i / 8] >> (i % 8)) & 1) {
            r = started ? fe_mul(r, a) : a;
            started = true;
        }
    }
    return started ? r : FE_ONE;
}

Fe fe_invert(const Fe& a) {
    // p - 2 = 2^255 - 21
    uint8_t e[32];
    std::memset(e, 0xff, 32);
    e[0] = 0xeb;
    e[31] = 0x7f;
    return fe_pow(a, e);
}

Fe fe_pow_p58(const Fe& a) {
    // (p - 5) / 8 = 2^252 - 3
    uint8_t e[32];
    std::memset(e, 0xff, 32);
    e[0] = 0xfd;
    e[31] = 0x0f;
    return fe_pow(a, e);
}

struct Constants {
    Fe d;        // -121665/121666
    Fe d2;       // 2d
    Fe sqrt_m1;  // sqrt(-1)
    GroupElement::Impl base;
};

Fe fe_from_u64(uint64_t x) {
    Fe r = FE_ZERO;
    r.v[0] = x & MASK51;
    r.v[1] = x >> 51;
    return r;
}

// ---- point ops, extended coordinates (x=X/Z, y=Y/Z, T=XY/Z), a=-1 ----

const Constants& consts();

using Pt = GroupElement::Impl;

inline Fe px(const Pt& p) { return Fe{{p.x[0], p.x[1], p.x[2], p.x[3], p.x[4]}}; }
inline Fe py(const Pt& p) { return Fe{{p.y[0], p.y[1], p.y[2], p.y[3], p.y[4]}}; }
inline Fe pz(const Pt& p) { return Fe{{p.z[0], p.z[1], p.z[2], p.z[3], p.z[4]}}; }
inline Fe pt(const Pt& p) { return Fe{{p.t[0], p.t[1], p.t[2], p.t[3], p.t[4]}}; }

inline Pt make_pt(const Fe& x, const Fe& y, const Fe& z, const Fe& t) {
    Pt p;
    std::memcpy(p.x, x.v, sizeof(x.v));
    std::memcpy(p.y, y.v, sizeof(y.v));
    std::memcpy(p.z, z.v, sizeof(z.v));
    std::memcpy(p.t, t.v, sizeof(t.v));
    return p;
}

const Pt PT_IDENTITY = [] {
    return make_pt(FE_ZERO, FE_ONE, FE_ONE, FE_ZERO);
}();

// Unified addition (valid for doubling too).
Pt pt_add(const Pt& p, const Pt& q) {
    Fe a = fe_mul(fe_carry(fe_sub(py(p), px(p))), fe_carry(fe_sub(py(q), px(q))));
    Fe b = fe_mul(fe_carry(fe_add(py(p), px(p))), fe_carry(fe_add(py(q), px(q))));
    Fe c = fe_mul(fe_mul(pt(p), consts().d2), pt(q));
    Fe d = fe_mul(fe_add(pz(p), pz(p)), pz(q));
    Fe e = fe_carry(fe_sub(b, a));
    Fe f = fe_carry(fe_sub(d, c));
    Fe g = fe_carry(fe_add(d, c));
    Fe h = fe_carry(fe_add(b, a));
    return make_pt(fe_mul(e, f), fe_mul(g, h), fe_mul(f, g), fe_mul(e, h));
}

Pt pt_scalar_mul(const Pt& p, const uint8_t scalar_le[32]) {
    Pt r = PT_IDENTITY;
    bool started = false;
    for (int i = 255; i >= 0; --i) {
        if (started) r = pt_add(r, r);
        if ((scalar_le[i / 8] >> (i % 8)) & 1) {
            r = started ? pt_add(r, p) : p;
            started = true;
        }
    }
    return started ? r : PT_IDENTITY;
}

bool pt_is_identity(const Pt& p) {
    // x == 0 and y == z
    return fe_is_zero(px(p)) && fe_eq(py(p), pz(p));
}

void pt_encode(const Pt& p, uint8_t out[32]) {
    Fe zinv = fe_invert(pz(p));
    Fe x = fe_mul(px(p), zinv);
    Fe y = fe_mul(py(p), zinv);
    fe_to_bytes(y, out);
    out[31] |= uint8_t(fe_is_odd(x) ? 0x80 : 0);
}

// Group order l, little-endian.
const uint8_t ORDER_LE[32] = {0xed, 0xd3, 0xf5, 0x5c, 0x1a, 0x63, 0x12, 0x58, 0xd6, 0x9c, 0xf7,
                              0xa2, 0xde, 0xf9, 0xde, 0x14, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00,
                              0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x10};

// Decompress with explicit curve constants (so constant setup itself can
// use it); returns false on invalid y or missing square root.
bool pt_decode_with(const Fe& d, const Fe& sqrt_m1, const uint8_t enc[32], Pt& out) {
    uint8_t yb[32];
    std::memcpy(yb, enc, 32);
    int sign = yb[31] >> 7;
    yb[31] &= 0x7f;
    Fe y = fe_from_bytes(yb);
    // canonical y < p
    uint8_t back[32];
    fe_to_bytes(y, back);
    if (std::memcmp(back, yb, 32) != 0) return false;

    Fe y2 = fe_sq(y);
    Fe u = fe_carry(fe_sub(y2, FE_ONE));
    Fe v = fe_carry(fe_add(fe_mul(y2, d), FE_ONE));
    // x = u v^3 (u v^7)^((p-5)/8)
    Fe v3 = fe_mul(fe_sq(v), v);
    Fe v7 = fe_mul(fe_sq(v3), v);
    Fe x = fe_mul(fe_mul(u, v3), fe_pow_p58(fe_mul(u, v7)));
    Fe vx2 = fe_mul(v, fe_sq(x));
    if (!fe_eq(vx2, u)) {
        if (fe_eq(vx2, fe_carry(fe_neg(u)))) {
            x = fe_mul(x, sqrt_m1);
        } else {
            return false;
        }
    }
    if (fe_is_zero(x) && sign) return false;  // -0 encoding
    if (fe_is_odd(x) != bool(sign)) x = fe_carry(fe_neg(x));
    out = make_pt(x, y, FE_ONE, fe_mul(x, y));
    return true;
}

bool pt_decode_unchecked(const uint8_t enc[32], Pt& out) {
    return pt_decode_with(consts().d, consts().sqrt_m1, enc, out);
}

const Constants& consts() {
    static const Constants c = [] {
        Constants k;
        // d = -121665/121666
        Fe num = fe_carry(fe_neg(fe_from_u64(121665)));
        k.d = fe_mul(num, fe_invert(fe_from_u64(121666)));
        k.d2 = fe_carry(fe_add(k.d, k.d));
        // sqrt(-1) = 2^((p-1)/4)
        uint8_t e[32];
        std::memset(e, 0xff, 32);
        e[0] = 0xfb;
        e[31] = 0x1f;  // 2^253 - 5
        k.sqrt_m1 = fe_pow(fe_from_u64(2), e);
        // base point: y = 4/5, even x
        Fe y = fe_mul(fe_from_u64(4), fe_invert(fe_from_u64(5)));
        uint8_t yb[32];
        fe_to_bytes(y, yb);
        Pt b;
        if (!pt_decode_with(k.d, k.sqrt_m1, yb, b)) throw GroupError("base point init failed");
        k.base = b;
        return k;
    }();
    return c;
}

// ---- scalar arithmetic mod l ----
//
// Scalars are handled as little-endian 64-bit limb vectors with a
// binary long-division reduction; slow but transparently correct.

void reduce_mod_order(uint64_t* limbs, int n) {
    uint64_t l[8] = {0};
    std::memcpy(l, ORDER_LE, 32);
    // shift limit: n*64 - 253 bits
    for (int shift = n * 64 - 253; shift >= 0; --shift) {
        // compare limbs with (l << shift)
        int limb_shift = shift / 64, bit_shift = shift % 64;
        uint64_t shifted[9] = {0};
        for (int i = 0; i < 4; ++i) {
            shifted[i + limb_shift] |= bit_shift ? (l[i] << bit_shift) : l[i];
            if (bit_shift && i + limb_shift + 1 < 9) shifted[i + limb_shift + 1] |= l[i] >> (64 - bit_shift);
        }
        bool ge = true;
        for (int i = n - 1; i >= 0; --i) {
            uint64_t s = i < 9 ? shifted[i] : 0;
            if (limbs[i] != s) {
                ge = limbs[i] > s;
                break;
            }
        }
        if (ge) {
            uint64_t borrow = 0;
            for (int i = 0; i < n; ++i) {
                uint64_t s = i < 9 ? shifted[i] : 0;
                u128 cur = (u128)limbs[i] - s - borrow;
                limbs[i] = uint64_t(cur);
                borrow = (cur >> 64) ? 1 : 0;
            }
        }
    }
}

}  // namespace

struct GroupOps {
    static GroupElement wrap(const Pt& p) { return GroupElement(p); }
};

GroupScalar GroupScalar::one() { return from_u64(1); }

GroupScalar GroupScalar::from_u64(uint64_t v) {
    ByteArray<32> b{};
    for (int i = 0; i < 8; ++i) b[i] = uint8_t(v >> (8 * i));
    GroupScalar s;
    s.bytes_ = b;
    return s;
}

GroupScalar GroupScalar::from_le_bytes(ByteView b32) {
    if (b32.size() != 32) throw GroupError("scalar: need 32 bytes");
    uint64_t limbs[4] = {0};
    std::memcpy(limbs, b32.data(), 32);
    reduce_mod_order(limbs, 4);
    GroupScalar s;
    std::memcpy(s.bytes_.data(), limbs, 32);
    return s;
}

GroupScalar GroupScalar::from_wide(ByteView b64) {
    if (b64.size() != 64) throw GroupError("scalar: need 64 bytes");
    uint64_t limbs[8] = {0};
    std::memcpy(limbs, b64.data(), 64);
    reduce_mod_order(limbs, 8);
    GroupScalar s;
    std::memcpy(s.bytes_.data(), limbs, 32);
    return s;
}

GroupScalar GroupScalar::random(Rng& rng) {
    ByteArray<32> b;
    rng.fill(b.data(), 32);
    return from_le_bytes(b);
}

GroupScalar GroupScalar::mul(const GroupScalar& other) const {
    uint64_t a[4], b[4];
    std::memcpy(a, bytes_.data(), 32);
    std::memcpy(b, other.bytes_.data(), 32);
    uint64_t r[8] = {0};
    for (int i = 0; i < 4; ++i) {
        uint64_t carry = 0;
        for (int j = 0; j < 4; ++j) {
            u128 cur = (u128)a[i] * b[j] + r[i + j] + carry;
            r[i + j] = uint64_t(cur);
            carry = uint64_t(cur >> 64);
        }
        r[i + 4] += carry;
    }
    reduce_mod_order(r, 8);
    GroupScalar s;
    std::memcpy(s.bytes_.data(), r, 32);
    return s;
}

GroupScalar GroupScalar::add(const GroupScalar& other) const {
    uint64_t r[5] = {0};
    uint64_t a[4], b[4];
    std::memcpy(a, bytes_.data(), 32);
    std::memcpy(b, other.bytes_.data(), 32);
    uint64_t carry = 0;
    for (int i = 0; i < 4; ++i) {
        u128 cur = (u128)a[i] + b[i] + carry;
        r[i] = uint64_t(cur);
        carry = uint64_t(cur >> 64);
    }
    r[4] = carry;
    reduce_mod_order(r, 5);
    GroupScalar s;
    std::memcpy(s.bytes_.data(), r, 32);
    return s;
}

GroupScalar GroupScalar::sub(const GroupScalar& other) const {
    // a + (l - b)
    uint64_t l[4];
    std::memcpy(l, ORDER_LE, 32);
    uint64_t b[4];
    std::memcpy(b, other.bytes_.data(), 32);
    uint64_t lb[4];
    unsigned char borrow = 0;
    for (int i = 0; i < 4; ++i) {
        u128 cur = (u128)l[i] - b[i] - borrow;
        lb[i] = uint64_t(cur);
        borrow = (cur >> 64) ? 1 : 0;
    }
    GroupScalar negb;
    std::memcpy(negb.bytes_.data(), lb, 32);
    if (other.is_zero()) negb = GroupScalar::zero();
    return add(negb);
}

bool GroupScalar::is_zero() const {
    uint8_t acc = 0;
    for (auto b : bytes_) acc |= b;
    return acc == 0;
}

GroupScalar GroupScalar::invert() const {
    if (is_zero()) throw GroupError("scalar inverse of zero");
    // l - 2, little-endian
    uint8_t e[32];
    std::memcpy(e, ORDER_LE, 32);
    e[0] -= 2;
    GroupScalar r = one();
    bool started = false;
    for (int i = 255; i >= 0; --i) {
        if (started) r = r.mul(r);
        if ((e[i / 8] >> (i % 8)) & 1) {
            r = started ? r.mul(*this) : *this;
            started = true;
        }
    }
    return r;
}

const GroupElement& GroupElement::base() {
    static const GroupElement b(consts().base);
    return b;
}

GroupElement GroupElement::identity() { return GroupElement(PT_IDENTITY); }

GroupElement GroupElement::decode(ByteView enc32) {
    if (enc32.size() != 32) throw GroupError("point: need 32 bytes");
    Pt p;
    if (!pt_decode_unchecked(enc32.data(), p)) throw GroupError("point: invalid encoding");
    if (pt_is_identity(p)) throw GroupError("point: identity");
    if (!pt_is_identity(pt_scalar_mul(p, ORDER_LE))) throw GroupError("point: not in prime-order subgroup");
    return GroupElement(p);
}

ByteArray<32> GroupElement::encode() const {
    ByteArray<32> out;
    pt_encode(p_, out.data());
    return out;
}

GroupElement GroupElement::mul(const GroupScalar& s) const {
    return GroupElement(pt_scalar_mul(p_, s.le_bytes().data()));
}

GroupElement GroupElement::add(const GroupElement& other) const {
    return GroupElement(pt_add(p_, other.p_));
}

bool GroupElement::is_identity() const { return pt_is_identity(p_); }

ByteArray<64> sign_with_scalar(const GroupScalar& secret, ByteView message,
                               const GroupScalar& nonce) {
    return sign_with_scalar(secret, GroupElement::base().mul(secret).encode(), message, nonce);
}

ByteArray<64> sign_with_scalar(const GroupScalar& secret, const ByteArray<32>& pub,
                               ByteView message, const GroupScalar& nonce) {
    if (secret.is_zero()) throw GroupError("sign: zero scalar");
    if (nonce.is_zero()) throw GroupError("sign: zero nonce");
    auto R = GroupElement::base().mul(nonce).encode();
    Sha512 h;
    h.update(ByteView(R.data(), 32));
    h.update(ByteView(pub.data(), 32));
    h.update(message);
    auto hr = GroupScalar::from_wide(h.finish());
    auto s = nonce.add(hr.mul(secret));
    ByteArray<64> sig;
    std::memcpy(sig.data(), R.data(), 32);
    std::memcpy(sig.data() + 32, s.le_bytes().data(), 32);
    return sig;
}

bool verify_signature(ByteView pub32, ByteView message, ByteView sig64) {
    if (pub32.size() != 32 || sig64.size() != 64) return false;
    try {
        auto A = GroupElement::decode(pub32);
        // R only needs to be on the curve; honest signers put it in the
        // subgroup and the verification equation pins it either way.
        Pt rp;
        if (!pt_decode_unchecked(sig64.data(), rp)) return false;
        auto R = GroupOps::wrap(rp);
        // reject non-canonical s (malleability)
        auto s = GroupScalar::from_le_bytes(sig64.subspan(32, 32));
        if (std::memcmp(s.le_bytes().data(), sig64.data() + 32, 32) != 0) return false;
        Sha512 h;
        h.update(sig64.subspan(0, 32));
        h.update(pub32);
        h.update(message);
        auto hr = GroupScalar::from_wide(h.finish());
        return GroupElement::base().mul(s) == R.add(A.mul(hr));
    } catch (const GroupError&) {
        return false;
    }
}

// ---- X25519 ----

const ByteArray<32> X25519_BASEPOINT_U = [] {
    ByteArray<32> u{};
    u[0] = 9;
    return u;
}();

ByteArray<32> x25519_raw(const ByteArray<32>& scalar, const ByteArray<32>& u_in) {
    uint8_t ub[32];
    std::memcpy(ub, u_in.data(), 32);
    ub[31] &= 0x7f;  // RFC 7748: mask the unused high bit
    Fe x1 = fe_from_bytes(ub);
    Fe x2 = FE_ONE, z2 = FE_ZERO, x3 = x1, z3 = FE_ONE;
    const Fe a24 = fe_from_u64(121665);
    unsigned swap = 0;
    auto cswap = [](unsigned s, Fe& a, Fe& b) {
        if (s) std::swap(a, b);
    };
    for (int t = 254; t >= 0; --t) {
        unsigned kt = (scalar[t / 8] >> (t % 8)) & 1;
        swap ^= kt;
        cswap(swap, x2, x3);
        cswap(swap, z2, z3);
        swap = kt;
        Fe a = fe_carry(fe_add(x2, z2));
        Fe aa = fe_sq(a);
        Fe b = fe_carry(fe_sub(x2, z2));
        Fe bb = fe_sq(b);
        Fe e = fe_carry(fe_sub(aa, bb));
        Fe c = fe_carry(fe_add(x3, z3));
        Fe d = fe_carry(fe_sub(x3, z3));
        Fe da = fe_mul(d, a);
        Fe cb = fe_mul(c, b);
        x3 = fe_sq(fe_carry(fe_add(da, cb)));
        z3 = fe_mul(x1, fe_sq(fe_carry(fe_sub(da, cb))));
        x2 = fe_mul(aa, bb);
        z2 = fe_mul(e, fe_carry(fe_add(aa, fe_mul(a24, e))));
    }
    cswap(swap, x2, x3);
    cswap(swap, z2, z3);
    Fe out = fe_mul(x2, fe_invert(z2));
    ByteArray<32> r;
    fe_to_bytes(out, r.data());
    return r;
}

ByteArray<32> x25519_clamped(ByteArray<32> scalar, const ByteArray<32>& u) {
    scalar[0] &= 248;
    scalar[31] &= 127;
    scalar[31] |= 64;
    return x25519_raw(scalar, u);
}

}  // namespace echomix::crypto
