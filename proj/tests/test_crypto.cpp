#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <set>

#include "echomix/crypto/aead.hpp"
#include "echomix/crypto/chacha.hpp"
#include "echomix/crypto/group.hpp"
#include "echomix/crypto/hash.hpp"
#include "echomix/crypto/kdf.hpp"
#include "echomix/crypto/kem.hpp"
#include "echomix/crypto/nike.hpp"

using namespace echomix;
using namespace echomix::crypto;

namespace {

Bytes H(const std::string& hex) { return from_hex(hex); }

std::string hex32(const ByteArray<32>& a) { return to_hex(ByteView(a.data(), 32)); }

// Independent modular multiplication oracle: Russian-peasant double-and-add
// on raw byte arrays, sharing no code with GroupScalar.
ByteArray<32> oracle_mulmod_l(const ByteArray<32>& a, const ByteArray<32>& b) {
    // l, little-endian
    static const uint8_t L[32] = {0xed, 0xd3, 0xf5, 0x5c, 0x1a, 0x63, 0x12, 0x58,
                                  0xd6, 0x9c, 0xf7, 0xa2, 0xde, 0xf9, 0xde, 0x14,
                                  0,    0,    0,    0,    0,    0,    0,    0,
                                  0,    0,    0,    0,    0,    0,    0,    0x10};
    auto geq = [](const uint8_t* x, const uint8_t* y) {
        for (int i = 31; i >= 0; --i)
            if (x[i] != y[i]) return x[i] > y[i];
        return true;
    };
    auto sub = [](uint8_t* x, const uint8_t* y) {
        int borrow = 0;
        for (int i = 0; i < 32; ++i) {
            int v = int(x[i]) - int(y[i]) - borrow;
            borrow = v < 0;
            x[i] = uint8_t(v & 0xff);
        }
    };
    auto addmod = [&](uint8_t* x, const uint8_t* y) {
        int carry = 0;
        for (int i = 0; i < 32; ++i) {
            int v = int(x[i]) + int(y[i]) + carry;
            carry = v >> 8;
            x[i] = uint8_t(v & 0xff);
        }
        // x < 2l always here, one conditional subtract suffices unless carry
        if (carry || geq(x, L)) sub(x, L);
    };
    ByteArray<32> acc{};
    ByteArray<32> addend = a;
    // ensure addend < l
    while (geq(addend.data(), L)) sub(addend.data(), L);
    for (int bit = 0; bit < 256; ++bit) {
        if ((b[bit / 8] >> (bit % 8)) & 1) addmod(acc.data(), addend.data());
        ByteArray<32> dbl = addend;
        addmod(dbl.data(), addend.data());
        addend = dbl;
    }
    return acc;
}

}  // namespace

TEST_SUITE_BEGIN("crypto");

TEST_CASE("sha256 vectors") {
    CHECK(to_hex(Sha256::hash(to_bytes(std::string("abc")))) ==
          "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    CHECK(to_hex(Sha256::hash({}))
          == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    // million 'a', fed in ragged chunks
    Sha256 h;
    Bytes chunk(997, 'a');
    size_t fed = 0;
    while (fed + chunk.size() <= 1000000) {
        h.update(chunk);
        fed += chunk.size();
    }
    Bytes rest(1000000 - fed, 'a');
    h.update(rest);
    CHECK(to_hex(h.finish()) == "cdc76e5c9914fb9281a1c7e284d73e67f1809a48a497200e046d39ccc7112cd0");
}

TEST_CASE("sha512 vectors") {
    CHECK(to_hex(Sha512::hash(to_bytes(std::string("abc")))) ==
          "ddaf35a193617abacc417349ae20413112e6fa4e89a97ea20a9eeee64b55d39a"
          "2192992a274fc1a836ba3c23a3feebbd454d4423643ce80e2a9ac94fa54ca49f");
    CHECK(to_hex(Sha512::hash({})) ==
          "cf83e1357eefb8bdf1542850d66d8007d620e4050b5715dc83f4a921d36ce9ce"
          "47d0d13c5d85f2b0ff8318d2877eec2f63b931bd47417a81a538327af927da3e");
}

TEST_CASE("hmac-sha256 rfc4231") {
    Bytes key1(20, 0x0b);
    auto mac1 = hmac_sha256(key1, to_bytes(std::string("Hi There")));
    CHECK(hex32(mac1) == "b0344c61d8db38535ca8afceaf0bf12b881dc200c9833da726e9376c2e32cff7");
    auto mac2 = hmac_sha256(to_bytes(std::string("Jefe")),
                            to_bytes(std::string("what do ya want for nothing?")));
    CHECK(hex32(mac2) == "5bdcc146bf60754e6a042426089575c75a003f089d2739839dec58b964ec3843");
}

TEST_CASE("hkdf rfc5869 case 1") {
    Bytes ikm(22, 0x0b);
    Bytes salt = H("000102030405060708090a0b0c");
    Bytes info = H("f0f1f2f3f4f5f6f7f8f9");
    auto prk = hkdf_extract(salt, ikm);
    CHECK(hex32(prk) == "077709362c2e32df0ddc3f0dc47bba6390b6c73bb50f9c3122ec844ad7c2b3e5");
    auto okm = hkdf_expand(prk, info, 42);
    CHECK(to_hex(okm) ==
          "3cb25f25faacd57a90434f64d0362f2a"
          "2d2d0a90cf1a5a4c5db02d56ecc4c5bf"
          "34007208d5b887185865");
}

TEST_CASE("chacha20 rfc8439 block") {
    Key256 key;
    for (int i = 0; i < 32; ++i) key[i] = uint8_t(i);
    ByteArray<12> nonce{};
    nonce[3] = 0x09;
    nonce[7] = 0x4a;
    ChaCha20 c(key, nonce, 1);
    auto ks = c.keystream(64);
    CHECK(to_hex(ks) ==
          "10f1e7e4d13b5915500fdd1fa32071c4c7d1f4c733c068030422aa9ac3d46c4e"
          "d2826446079faa0914c2d705d98b02a2b5129cd1de164eb9cbd083e8a2503c4e");
}

TEST_CASE("aes-256 block vectors") {
    {
        Aes256 aes(to_array<32>(H("603deb1015ca71be2b73aef0857d77811f352c073b6108d72d9810a30914dff4")));
        auto pt = H("6bc1bee22e409f96e93d7e117393172a");
        uint8_t ct[16];
        aes.encrypt_block(pt.data(), ct);
        CHECK(to_hex(ByteView(ct, 16)) == "f3eed1bdb5d2a03c064b5a7e3db181f8");
    }
    {
        Aes256 aes(to_array<32>(H("000102030405060708090a0b0c0d0e0f101112131415161718191a1b1c1d1e1f")));
        auto pt = H("00112233445566778899aabbccddeeff");
        uint8_t ct[16];
        aes.encrypt_block(pt.data(), ct);
        CHECK(to_hex(ByteView(ct, 16)) == "8ea2b7ca516745bfeafc49904b496089");
    }
}

TEST_CASE("polyval rfc8452 vector") {
    auto h = to_array<16>(H("25629347589242761d31f826ba4b757b"));
    auto data = H("4f4f95668c83dfb6401762bb2d01a262d1a24ddd2721d006bbe45f20d3c9f362");
    auto out = polyval(h, data);
    CHECK(to_hex(ByteView(out.data(), 16)) == "f7a3b47b846119fae5b7866cf5e5b77e");
}

TEST_CASE("aes-256-gcm-siv rfc8452 vectors") {
    Key256 key{};
    key[0] = 0x01;
    ByteArray<12> nonce{};
    nonce[0] = 0x03;
    SUBCASE("empty plaintext") {
        auto sealed = aead_seal(key, nonce, {}, {});
        CHECK(to_hex(sealed) == "07f5f4169bbf55a8400cd47ea6fd400f");
        auto opened = aead_open(key, nonce, sealed, {});
        REQUIRE(opened.has_value());
        CHECK(opened->empty());
    }
    SUBCASE("8-byte plaintext") {
        auto pt = H("0100000000000000");
        auto sealed = aead_seal(key, nonce, pt, {});
        CHECK(to_hex(sealed) == "c2ef328e5c71c83b843122130f7364b761e0b97427e3df28");
        auto opened = aead_open(key, nonce, sealed, {});
        REQUIRE(opened.has_value());
        CHECK(*opened == pt);
    }
}

TEST_CASE("aead round trip and tamper rejection") {
    Rng rng(7);
    Key256 key = rng.key256();
    ByteArray<12> nonce{};
    rng.fill(nonce.data(), 12);
    Bytes ad = rng.bytes(23);
    for (size_t len : {size_t(0), size_t(1), size_t(31), size_t(256), size_t(1000)}) {
        Bytes pt = rng.bytes(len);
        auto sealed = aead_seal(key, nonce, pt, ad);
        auto opened = aead_open(key, nonce, sealed, ad);
        REQUIRE(opened.has_value());
        CHECK(*opened == pt);
        // flip a sample of bits
        for (size_t i = 0; i < sealed.size() * 8; i += 17) {
            Bytes bad = sealed;
            bad[i / 8] ^= uint8_t(1 << (i % 8));
            CHECK(!aead_open(key, nonce, bad, ad).has_value());
        }
        CHECK(!aead_open(key, nonce, sealed, rng.bytes(23)).has_value());
    }
}

TEST_CASE("x25519 rfc7748 vectors") {
    auto k1 = to_array<32>(H("a546e36bf0527c9d3b16154b82465edd62144c0ac1fc5a18506a2244ba449ac4"));
    auto u1 = to_array<32>(H("e6db6867583030db3594c1a424b15f7c726624ec26b3353b10a903a6d0ab1c4c"));
    CHECK(hex32(x25519_clamped(k1, u1)) ==
          "c3da55379de9c6908e94ea4df28d084f32eccf03491c71f754b4075577a28552");

    auto k2 = to_array<32>(H("4b66e9d4d1b4673c5ad22691957d6af5c11b6421e0ea01d42ca4169e7918ba0d"));
    auto u2 = to_array<32>(H("e5210f12786811d3f4b7959d0538ae2c31dbe7106fc03c3efc4cd549c715a493"));
    CHECK(hex32(x25519_clamped(k2, u2)) ==
          "95cbde9476e8907d7aade45cb4b873f88b595a68799fa152e6f8f7647aac7957");

    // iterated vector, 1 and 1000 rounds
    ByteArray<32> k = X25519_BASEPOINT_U, u = X25519_BASEPOINT_U;
    for (int i = 0; i < 1000; ++i) {
        auto r = x25519_clamped(k, u);
        u = k;
        k = r;
        if (i == 0)
            CHECK(hex32(k) == "422c8e7a6227d7bca1350b3e2bb7279f7897b87bb6854b783c60e80311ae3079");
    }
    CHECK(hex32(k) == "684cf59ba83309552800ef566f2f4d3c1c3887c49360e3875f2eb94d99532c51");
}

TEST_CASE("nike symmetry and blinding") {
    const Nike& nike = nike_x25519();
    Rng rng(11);
    for (int i = 0; i < 100; ++i) {
        auto [apriv, apub] = nike.generate_keypair(rng);
        auto [bpriv, bpub] = nike.generate_keypair(rng);
        CHECK(nike.dh(apriv, bpub) == nike.dh(bpriv, apub));
    }
    // dh(priv, blind(pub, f)) == dh(compose(priv, f), pub)
    for (int i = 0; i < 20; ++i) {
        auto [apriv, apub] = nike.generate_keypair(rng);
        auto [bpriv, bpub] = nike.generate_keypair(rng);
        auto f = GroupScalar::random(rng);
        Bytes fb = to_bytes(ByteView(f.le_bytes().data(), 32));
        CHECK(nike.dh(apriv, nike.blind_public(bpub, fb)) ==
              nike.dh(nike.compose_private(apriv, fb), bpub));
    }
}

TEST_CASE("nike rejects low-order peer values") {
    const Nike& nike = nike_x25519();
    Rng rng(113);
    auto [priv, pub] = nike.generate_keypair(rng);
    Bytes zero_u(32, 0);  // order-2 point on the u-line
    CHECK_THROWS_AS(nike.dh(priv, zero_u), NikeError);
    Bytes one_u(32, 0);
    one_u[0] = 1;  // u = 1, also small order
    CHECK_THROWS_AS(nike.dh(priv, one_u), NikeError);
}

TEST_CASE("ed25519 rfc8032 vectors via raw-scalar signing") {
    struct V {
        const char* seed;
        const char* pub;
        const char* msg;
        const char* sig;
    };
    const V vectors[] = {
        {"9d61b19deffd5a60ba844af492ec2cc44449c5697b326919703bac031cae7f60",
         "d75a980182b10ab7d54bfed3c964073a0ee172f3daa62325af021a68f707511a", "",
         "e5564300c360ac729086e2cc806e828a84877f1eb8e5d974d873e06522490155"
         "5fb8821590a33bacc61e39701cf9b46bd25bf5f0595bbe24655141438e7a100b"},
        {"4ccd089b28ff96da9db6c346ec114e0f5b8a319f35aba624da8cf6ed4fb8a6fb",
         "3d4017c3e843895a92b70aa74d1b7ebc9c982ccf2ec4968cc0cd55f12af4660c", "72",
         "92a009a9f0d4cab8720e820b5f642540a2b27b5416503f8fb3762223ebdb69da"
         "085ac1e43e15996e458f3613d0f11d8c387b2eaeb4302aeeb00d291612bb0c00"},
    };
    for (const auto& v : vectors) {
        auto seed = H(v.seed);
        auto h = Sha512::hash(seed);
        ByteArray<32> sb;
        std::memcpy(sb.data(), h.data(), 32);
        sb[0] &= 248;
        sb[31] &= 127;
        sb[31] |= 64;
        auto s = GroupScalar::from_le_bytes(sb);
        auto pub = GroupElement::base().mul(s).encode();
        CHECK(hex32(pub) == v.pub);

        Bytes msg = H(v.msg);
        Sha512 rh;
        rh.update(ByteView(h.data() + 32, 32));
        rh.update(msg);
        auto nonce = GroupScalar::from_wide(rh.finish());
        auto sig = sign_with_scalar(s, msg, nonce);
        CHECK(to_hex(ByteView(sig.data(), 64)) == v.sig);
        CHECK(verify_signature(pub, msg, ByteView(sig.data(), 64)));

        auto bad = sig;
        bad[5] ^= 1;
        CHECK(!verify_signature(pub, msg, ByteView(bad.data(), 64)));
        if (!msg.empty()) {
            Bytes other = msg;
            other[0] ^= 1;
            CHECK(!verify_signature(pub, other, ByteView(sig.data(), 64)));
        }
    }
}

TEST_CASE("group scalar_mult basics") {
    CHECK(GroupElement::base().mul(GroupScalar::one()) == GroupElement::base());
    CHECK(GroupElement::base().mul(GroupScalar::zero()).is_identity());

    // blinding compatibility against the independent oracle, 1000 pairs
    Rng rng(13);
    for (int i = 0; i < 1000; ++i) {
        auto a = GroupScalar::random(rng);
        auto b = GroupScalar::random(rng);
        auto prod = oracle_mulmod_l(a.le_bytes(), b.le_bytes());
        CHECK(a.mul(b).le_bytes() == prod);
        auto lhs = GroupElement::base().mul(GroupScalar::from_le_bytes(prod));
        auto rhs = GroupElement::base().mul(a).mul(b);
        CHECK(lhs == rhs);
    }
}

TEST_CASE("group scalar inversion") {
    Rng rng(17);
    for (int i = 0; i < 50; ++i) {
        auto a = GroupScalar::random(rng);
        if (a.is_zero()) continue;
        CHECK(a.mul(a.invert()) == GroupScalar::one());
    }
    CHECK_THROWS_AS(GroupScalar::zero().invert(), GroupError);
}

TEST_CASE("point decode validation") {
    // identity
    ByteArray<32> ident{};
    ident[0] = 1;
    CHECK_THROWS_AS(GroupElement::decode(ident), GroupError);
    // identity with sign bit (non-canonical -0)
    ByteArray<32> identsign = ident;
    identsign[31] = 0x80;
    CHECK_THROWS_AS(GroupElement::decode(identsign), GroupError);
    // order-2 point y = -1
    auto order2 = to_array<32>(H("ecffffffffffffffffffffffffffffffffffffffffffffffffffffffffffff7f"));
    CHECK_THROWS_AS(GroupElement::decode(order2), GroupError);
    // non-canonical y >= p
    auto noncanon = to_array<32>(H("edffffffffffffffffffffffffffffffffffffffffffffffffffffffffffff7f"));
    CHECK_THROWS_AS(GroupElement::decode(noncanon), GroupError);
    // valid point round-trips
    Rng rng(19);
    auto s = GroupScalar::random(rng);
    auto p = GroupElement::base().mul(s);
    auto enc = p.encode();
    CHECK(GroupElement::decode(enc) == p);
}

TEST_CASE("kdf determinism, separation, avalanche") {
    Rng rng(23);
    KdfState st = rng.key256();
    Bytes info = to_bytes(std::string("label-a"));
    auto out1 = kdf_expand(st, info, 3);
    auto out2 = kdf_expand(st, info, 3);
    CHECK(out1 == out2);

    // distinct infos never collide over 10^4 random labels
    std::set<ByteArray<32>> seen;
    for (int i = 0; i < 10000; ++i) {
        Bytes label = rng.bytes(16);
        auto out = kdf_expand(st, label, 1);
        CHECK(seen.insert(out[0]).second);
    }

    // flipping one state bit changes every output
    KdfState st2 = st;
    st2[4] ^= 0x10;
    auto alt = kdf_expand(st2, info, 3);
    for (int i = 0; i < 3; ++i) CHECK(out1[i] != alt[i]);
}

TEST_CASE("kem round trips") {
    Rng rng(29);
    SUBCASE("x25519 hash-dh kem") {
        const Kem& kem = kem_x25519();
        auto [priv, pub] = kem.generate_keypair(rng);
        auto enc = kem.encapsulate(pub, rng);
        CHECK(kem.decapsulate(priv, enc.ciphertext) == enc.shared);
        CHECK(enc.ciphertext.size() == kem.ciphertext_size());
    }
    SUBCASE("mlkem768 stub sizes") {
        const Kem& kem = kem_mlkem768_stub();
        CHECK(kem.public_key_size() == 1184);
        CHECK(kem.ciphertext_size() == 1088);
        auto [priv, pub] = kem.generate_keypair(rng);
        CHECK(pub.size() == 1184);
        auto enc = kem.encapsulate(pub, rng);
        CHECK(enc.ciphertext.size() == 1088);
        CHECK(kem.decapsulate(priv, enc.ciphertext) == enc.shared);
    }
}

TEST_CASE("kem combiner") {
    Rng rng(31);
    SUBCASE("single member applies a kdf") {
        auto combined = kem_combine({&kem_x25519()});
        auto [priv, pub] = combined->generate_keypair(rng);
        auto enc = combined->encapsulate(pub, rng);
        CHECK(combined->decapsulate(priv, enc.ciphertext) == enc.shared);
        // shared secret differs from the member's raw secret
        auto raw = kem_x25519().decapsulate(priv, enc.ciphertext);
        CHECK(raw != enc.shared);
    }
    SUBCASE("two members round trip, corruption changes the secret") {
        auto combined = kem_combine({&kem_x25519(), &kem_mlkem768_stub()});
        CHECK(combined->ciphertext_size() == 32 + 1088);
        CHECK(combined->public_key_size() == 32 + 1184);
        auto [priv, pub] = combined->generate_keypair(rng);
        auto enc = combined->encapsulate(pub, rng);
        CHECK(combined->decapsulate(priv, enc.ciphertext) == enc.shared);
        for (size_t pos : {size_t(0), size_t(31), size_t(32), size_t(500), size_t(1119)}) {
            Bytes bad = enc.ciphertext;
            bad[pos] ^= 0x40;
            CHECK(combined->decapsulate(priv, bad) != enc.shared);
        }
    }
    SUBCASE("depth-3 composition") {
        auto inner = kem_combine({&kem_x25519(), &kem_x25519()});
        auto mid = kem_combine({inner.get(), &kem_x25519()});
        auto outer = kem_combine({mid.get(), &kem_mlkem768_stub()});
        auto [priv, pub] = outer->generate_keypair(rng);
        auto enc = outer->encapsulate(pub, rng);
        CHECK(outer->decapsulate(priv, enc.ciphertext) == enc.shared);
    }
    SUBCASE("empty list rejected") {
        CHECK_THROWS_AS(kem_combine({}), KemError);
    }
}

TEST_SUITE_END();
