#pragma once

#include "echomix/bytes.hpp"

namespace echomix::crypto {

struct GroupError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Scalar modulo the Ed25519 group order l = 2^252 + 27742...493.
/// Canonical little-endian representation; all arithmetic mod l.
class GroupScalar {
  public:
    GroupScalar() : bytes_{} {}

    static GroupScalar zero() { return GroupScalar(); }
    static GroupScalar one();

    /// Interprets 32 little-endian bytes, reduced mod l.
    static GroupScalar from_le_bytes(ByteView b32);
    /// Interprets 64 little-endian bytes, reduced mod l (for hash outputs).
    static GroupScalar from_wide(ByteView b64);
    static GroupScalar from_u64(uint64_t v);
    /// Uniform scalar; callers that need nonzero resample.
    static GroupScalar random(Rng& rng);

    GroupScalar mul(const GroupScalar& other) const;
    GroupScalar add(const GroupScalar& other) const;
    GroupScalar sub(const GroupScalar& other) const;
    /// Multiplicative inverse; throws GroupError on zero.
    GroupScalar invert() const;

    bool is_zero() const;
    const ByteArray<32>& le_bytes() const { return bytes_; }

    bool operator==(const GroupScalar&) const = default;

  private:
    ByteArray<32> bytes_;  // canonical, < l
};

/// Element of the prime-order subgroup of the Ed25519 curve.
/// decode() accepts only canonical encodings of points in the prime-order
/// subgroup and rejects the identity; the identity is representable
/// internally so that zero-scalar products have a value callers can test.
class GroupElement {
  public:
    static const GroupElement& base();
    static GroupElement identity();

    /// Throws GroupError on non-canonical encodings, points off the curve,
    /// small-order or mixed-order points.
    static GroupElement decode(ByteView enc32);

    ByteArray<32> encode() const;

    /// Scalar multiplication e*s.
    GroupElement mul(const GroupScalar& s) const;
    GroupElement add(const GroupElement& other) const;

    bool is_identity() const;
    bool operator==(const GroupElement& other) const { return encode() == other.encode(); }

    struct Impl {
        uint64_t x[5], y[5], z[5], t[5];
    };

  private:
    Impl p_;
    explicit GroupElement(const Impl& p) : p_(p) {}
    friend struct GroupOps;
};

/// Ed25519 signature where the private key is a raw scalar (the usual
/// SHA-512 key expansion step is skipped). The verification side is the
/// standard one and works for any public key encoding.
ByteArray<64> sign_with_scalar(const GroupScalar& secret, ByteView message,
                               const GroupScalar& nonce);
/// Same, with the public key (= base * secret) already at hand.
ByteArray<64> sign_with_scalar(const GroupScalar& secret, const ByteArray<32>& pub,
                               ByteView message, const GroupScalar& nonce);
bool verify_signature(ByteView pub32, ByteView message, ByteView sig64);

/// X25519 scalar multiplication on the Montgomery u-line (RFC 7748 ladder).
/// The _raw form applies no clamping and accepts any 32-byte scalar below
/// 2^255, which is what the Sphinx blinding composition needs.
ByteArray<32> x25519_raw(const ByteArray<32>& scalar, const ByteArray<32>& u);
ByteArray<32> x25519_clamped(ByteArray<32> scalar, const ByteArray<32>& u);

extern const ByteArray<32> X25519_BASEPOINT_U;

}  // namespace echomix::crypto
