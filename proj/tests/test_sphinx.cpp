#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <map>
#include <thread>

#include "echomix/sphinx/sphinx.hpp"
#include "echomix/stats.hpp"

using namespace echomix;
using namespace echomix::sphinx;
using crypto::CountingKem;
using crypto::CountingNike;
using crypto::kem_x25519;
using crypto::nike_x25519;

namespace {

struct TestNet {
    std::vector<PathHop> hops;
    std::vector<Bytes> privs;

    static TestNet make_nike(const crypto::Nike& nike, size_t n, Rng& rng) {
        TestNet net;
        for (size_t i = 0; i < n; ++i) {
            auto [priv, pub] = nike.generate_keypair(rng);
            PathHop hop;
            rng.fill(hop.node_id.data(), 32);
            hop.public_key = pub;
            net.hops.push_back(hop);
            net.privs.push_back(priv);
        }
        return net;
    }

    static TestNet make_kem(const crypto::Kem& kem, size_t n, Rng& rng) {
        TestNet net;
        for (size_t i = 0; i < n; ++i) {
            auto [priv, pub] = kem.generate_keypair(rng);
            PathHop hop;
            rng.fill(hop.node_id.data(), 32);
            hop.public_key = pub;
            net.hops.push_back(hop);
            net.privs.push_back(priv);
        }
        return net;
    }

    PathSpec path(size_t len, TerminalCommand term) const {
        PathSpec p;
        p.hops.assign(hops.begin(), hops.begin() + len);
        p.terminal = term;
        return p;
    }
};

TerminalCommand deliver_cmd() {
    TerminalCommand t;
    t.type = CommandType::Deliver;
    for (size_t i = 0; i < COMMAND_ID_SIZE; ++i) t.id[i] = uint8_t(i);
    return t;
}

}  // namespace

TEST_SUITE_BEGIN("sphinx");

TEST_CASE("geometry reproduces the published header sizes") {
    struct Row {
        const char* suite;
        size_t header;
        size_t header_plus_surb;
    };
    // 5-hop forward path, as used for the reference byte counts
    const Row rows[] = {
        {"x25519-nike", 476, 1082}, {"x448-nike", 500, 1130},
        {"x25519-kem", 636, 1402},  {"x448-kem", 780, 1690},
        {"mlkem768-x25519-kem", 7164, 14458},
    };
    for (const auto& row : rows) {
        auto g = geometry(suite_sizes(row.suite), 5, 30000);
        CHECK(g.header_size == row.header);
        CHECK(g.header_size + g.surb_size == row.header_plus_surb);
        CHECK(g.header_size == SphinxGeometry::AD_SIZE + g.alpha_size + g.beta_size + g.gamma_size);
    }
}

TEST_CASE("geometry is monotone and KEM dominates NIKE") {
    size_t prev = 0;
    for (size_t hops = 1; hops <= 10; ++hops) {
        auto g = geometry(suite_sizes("x25519-nike"), hops, 2048);
        CHECK(g.header_size > prev);
        prev = g.header_size;
    }
    for (size_t hops = 1; hops <= 10; ++hops) {
        auto n = geometry(suite_sizes("x25519-nike"), hops, 2048);
        auto k = geometry(suite_sizes("x25519-kem"), hops, 2048);
        CHECK(k.header_size > n.header_size);
    }
    CHECK_THROWS_AS(geometry(suite_sizes("x25519-nike"), 0, 2048), SphinxError);
    CHECK_THROWS_AS(suite_sizes("no-such-suite"), SphinxError);
}

TEST_CASE("single-hop KEM beta holds exactly one ciphertext slot") {
    auto g = geometry(suite_sizes("x25519-kem"), 1, 2048);
    CHECK(g.beta_size == g.slot_size);
    CHECK(g.slot_size == 32 + SphinxGeometry::SLOT_OVERHEAD);
}

TEST_CASE("nike wrap/unwrap round trips for all path lengths") {
    Rng rng(41);
    auto g = geometry(suite_sizes("x25519-nike"), 9, 512);
    auto net = TestNet::make_nike(nike_x25519(), 9, rng);
    for (size_t len = 1; len <= 9; ++len) {
        Bytes payload = rng.bytes(300);
        auto pkt = nike_wrap(g, nike_x25519(), net.path(len, deliver_cmd()), payload, rng);
        for (size_t k = 0; k < len; ++k) {
            CHECK(pkt.serialize().size() == g.packet_size);
            auto r = nike_unwrap(g, nike_x25519(), net.privs[k], pkt);
            if (k + 1 < len) {
                REQUIRE(r.kind == CommandType::Forward);
                CHECK(r.next_node == net.hops[k + 1].node_id);
                pkt = r.next;
            } else {
                REQUIRE(r.kind == CommandType::Deliver);
                CHECK(r.id == deliver_cmd().id);
                REQUIRE(r.payload.size() == g.payload_size);
                CHECK(bytes_equal(ByteView(r.payload).subspan(0, payload.size()), payload));
            }
        }
    }
}

TEST_CASE("kem wrap/unwrap round trips for all path lengths") {
    Rng rng(43);
    auto g = geometry(suite_sizes("x25519-kem"), 9, 512);
    auto net = TestNet::make_kem(kem_x25519(), 9, rng);
    for (size_t len : {size_t(1), size_t(3), size_t(5), size_t(9)}) {
        Bytes payload = rng.bytes(111);
        auto pkt = kem_wrap(g, kem_x25519(), net.path(len, deliver_cmd()), payload, rng);
        for (size_t k = 0; k < len; ++k) {
            CHECK(pkt.serialize().size() == g.packet_size);
            auto r = kem_unwrap(g, kem_x25519(), net.privs[k], pkt);
            if (k + 1 < len) {
                REQUIRE(r.kind == CommandType::Forward);
                CHECK(r.next_node == net.hops[k + 1].node_id);
                pkt = r.next;
            } else {
                REQUIRE(r.kind == CommandType::Deliver);
                CHECK(bytes_equal(ByteView(r.payload).subspan(0, payload.size()), payload));
            }
        }
    }
}

TEST_CASE("per-hop alpha is fresh and byte-uniform") {
    Rng rng(47);
    auto g = geometry(suite_sizes("x25519-nike"), 5, 256);
    auto net = TestNet::make_nike(nike_x25519(), 5, rng);
    std::vector<uint64_t> ones(248, 0);
    uint64_t samples = 0;
    for (int trial = 0; trial < 200; ++trial) {
        auto pkt = nike_wrap(g, nike_x25519(), net.path(5, deliver_cmd()), rng.bytes(64), rng);
        Bytes prev_alpha = pkt.alpha;
        for (size_t k = 0; k + 1 < 5; ++k) {
            auto r = nike_unwrap(g, nike_x25519(), net.privs[k], pkt);
            REQUIRE(r.kind == CommandType::Forward);
            CHECK(r.next.alpha != prev_alpha);
            prev_alpha = r.next.alpha;
            for (int b = 0; b < 248; ++b) ones[b] += (r.next.alpha[b / 8] >> (b % 8)) & 1;
            ++samples;
            pkt = r.next;
        }
    }
    // each low bit of the wire alpha is a fair coin across hops
    for (int b = 0; b < 248; ++b) {
        double z = (double(ones[b]) - 0.5 * double(samples)) / std::sqrt(0.25 * double(samples));
        CHECK(std::fabs(z) < 4.5);
    }
}

TEST_CASE("tampered header is rejected") {
    Rng rng(53);
    auto g = geometry(suite_sizes("x25519-nike"), 5, 256);
    auto net = TestNet::make_nike(nike_x25519(), 5, rng);
    auto pkt = nike_wrap(g, nike_x25519(), net.path(3, deliver_cmd()), rng.bytes(10), rng);
    for (size_t i = 0; i < 64; ++i) {
        auto bad = pkt;
        bad.gamma[i % bad.gamma.size()] ^= uint8_t(1 << (i % 8));
        CHECK_THROWS_AS(nike_unwrap(g, nike_x25519(), net.privs[0], bad), SphinxError);
    }
    auto bad = pkt;
    bad.beta[100] ^= 1;
    CHECK_THROWS_AS(nike_unwrap(g, nike_x25519(), net.privs[0], bad), SphinxError);
    // wrong node key
    CHECK_THROWS_AS(nike_unwrap(g, nike_x25519(), net.privs[2], pkt), SphinxError);
}

TEST_CASE("replay detection") {
    Rng rng(59);
    auto g = geometry(suite_sizes("x25519-nike"), 5, 256);
    auto net = TestNet::make_nike(nike_x25519(), 5, rng);
    auto pkt = nike_wrap(g, nike_x25519(), net.path(2, deliver_cmd()), rng.bytes(10), rng);
    ReplayCache cache;
    CHECK_NOTHROW(nike_unwrap(g, nike_x25519(), net.privs[0], pkt, &cache));
    CHECK_THROWS_WITH_AS(nike_unwrap(g, nike_x25519(), net.privs[0], pkt, &cache),
                         "replay detected", SphinxError);
    cache.clear();
    CHECK_NOTHROW(nike_unwrap(g, nike_x25519(), net.privs[0], pkt, &cache));
}

TEST_CASE("replay cache concurrent check-and-insert") {
    ReplayCache cache;
    std::vector<ByteArray<16>> tags(1000);
    Rng rng(61);
    for (auto& t : tags) rng.fill(t.data(), 16);
    std::atomic<uint64_t> fresh{0};
    std::vector<std::thread> threads;
    for (int t = 0; t < 4; ++t)
        threads.emplace_back([&] {
            for (const auto& tag : tags) fresh += cache.check_and_insert(tag) ? 1 : 0;
        });
    for (auto& t : threads) t.join();
    CHECK(fresh == 1000);
    CHECK(cache.size() == 1000);
}

TEST_CASE("payload corruption is caught at the terminal hop") {
    Rng rng(67);
    auto g = geometry(suite_sizes("x25519-nike"), 5, 256);
    auto net = TestNet::make_nike(nike_x25519(), 5, rng);
    for (int trial = 0; trial < 20; ++trial) {
        size_t corrupt_at = size_t(rng.below(4));  // hop after which delta gets hit
        auto pkt = nike_wrap(g, nike_x25519(), net.path(5, deliver_cmd()), rng.bytes(30), rng);
        bool caught = false;
        for (size_t k = 0; k < 5; ++k) {
            try {
                auto r = nike_unwrap(g, nike_x25519(), net.privs[k], pkt);
                if (k == 4) {
                    FAIL("corrupted payload delivered silently");
                }
                pkt = r.next;
                if (k == corrupt_at) {
                    size_t bit = size_t(rng.below(pkt.delta.size() * 8));
                    pkt.delta[bit / 8] ^= uint8_t(1 << (bit % 8));
                }
            } catch (const SphinxError&) {
                CHECK(k == 4);  // only the terminal integrity check fires
                caught = true;
                break;
            }
        }
        CHECK(caught);
    }
}

TEST_CASE("corrupted embedded kem ciphertext fails at the next hop") {
    Rng rng(71);
    auto g = geometry(suite_sizes("x25519-kem"), 5, 256);
    auto net = TestNet::make_kem(kem_x25519(), 5, rng);
    auto pkt = kem_wrap(g, kem_x25519(), net.path(3, deliver_cmd()), rng.bytes(10), rng);
    auto r = kem_unwrap(g, kem_x25519(), net.privs[0], pkt);
    REQUIRE(r.kind == CommandType::Forward);
    auto bad = r.next;
    bad.alpha[7] ^= 1;  // the ciphertext extracted from the routing slot
    CHECK_THROWS_AS(kem_unwrap(g, kem_x25519(), net.privs[1], bad), SphinxError);
}

TEST_CASE("public-key operation counts per unwrap") {
    Rng rng(73);
    {
        CountingNike counting(nike_x25519());
        auto g = geometry(suite_sizes("x25519-nike"), 5, 256);
        auto net = TestNet::make_nike(counting, 5, rng);
        auto pkt = nike_wrap(g, counting, net.path(5, deliver_cmd()), rng.bytes(10), rng);
        counting.dh_count = 0;
        counting.blind_count = 0;
        auto r = nike_unwrap(g, counting, net.privs[0], pkt);
        (void)r;
        CHECK(counting.dh_count + counting.blind_count == 2);  // one DH + one blind
        CHECK(counting.dh_count == 1);
    }
    {
        CountingKem counting(kem_x25519());
        auto g = geometry(suite_sizes("x25519-kem"), 5, 256);
        auto net = TestNet::make_kem(counting, 5, rng);
        auto pkt = kem_wrap(g, counting, net.path(5, deliver_cmd()), rng.bytes(10), rng);
        counting.encap_count = 0;
        counting.decap_count = 0;
        auto r = kem_unwrap(g, counting, net.privs[0], pkt);
        (void)r;
        CHECK(counting.encap_count + counting.decap_count == 1);  // one decapsulation
    }
}

TEST_CASE("surb echo round trip (9 processing steps)") {
    Rng rng(79);
    auto g = geometry(suite_sizes("x25519-nike"), 5, 2048);
    // forward: gateway, three mixes, service; return: three mixes, gateway
    auto fwd = TestNet::make_nike(nike_x25519(), 5, rng);
    auto ret = TestNet::make_nike(nike_x25519(), 4, rng);

    auto [surb, keyset] = surb_create(g, nike_x25519(), ret.path(4, deliver_cmd()), rng);
    SurbKeyStore store;
    store.put(keyset);

    // forward payload carries the serialized SURB plus the query
    Bytes query = to_bytes(std::string("echo-me"));
    Bytes fwd_payload = surb.serialize();
    CHECK(fwd_payload.size() == g.surb_size);
    append(fwd_payload, query);

    auto pkt = nike_wrap(g, nike_x25519(), fwd.path(5, deliver_cmd()), fwd_payload, rng);
    size_t steps = 0;
    for (size_t k = 0; k < 5; ++k) {
        auto r = nike_unwrap(g, nike_x25519(), fwd.privs[k], pkt);
        ++steps;
        if (k + 1 < 5) {
            pkt = r.next;
        } else {
            REQUIRE(r.kind == CommandType::Deliver);
            // service: parse the surb, echo the query back
            auto surb2 = Surb::deserialize(g, ByteView(r.payload).subspan(0, g.surb_size));
            Bytes echoed(r.payload.begin() + g.surb_size, r.payload.begin() + g.surb_size + 7);
            pkt = surb_reply(g, surb2, echoed);
            CHECK(surb2.first_hop == ret.hops[0].node_id);
        }
    }
    // return trip
    Bytes reply_delta;
    for (size_t k = 0; k < 4; ++k) {
        auto r = nike_unwrap(g, nike_x25519(), ret.privs[k], pkt);
        ++steps;
        if (k + 1 < 4) {
            pkt = r.next;
        } else {
            REQUIRE(r.kind == CommandType::SurbReply);
            CHECK(r.id == keyset.surb_id);
            reply_delta = r.payload;
        }
    }
    CHECK(steps == 9);
    auto plain = store.decrypt(keyset.surb_id, reply_delta);
    CHECK(bytes_equal(ByteView(plain).subspan(0, 7), to_bytes(std::string("echo-me"))));

    // single use: a second decrypt with the same id fails
    CHECK_THROWS_AS(store.decrypt(keyset.surb_id, reply_delta), SphinxError);
    CHECK(store.pending() == 0);
}

TEST_CASE("replier cannot recover the payload once the reply is in flight") {
    Rng rng(83);
    auto g = geometry(suite_sizes("x25519-nike"), 5, 256);
    auto ret = TestNet::make_nike(nike_x25519(), 3, rng);
    auto [surb, keyset] = surb_create(g, nike_x25519(), ret.path(3, deliver_cmd()), rng);

    auto pkt = surb_reply(g, surb, to_bytes(std::string("secret reply")));
    auto r = nike_unwrap(g, nike_x25519(), ret.privs[0], pkt);
    REQUIRE(r.kind == CommandType::Forward);

    // the service holds surb keys but no hop secrets; decryption must fail
    SurbKeyStore service_view;
    SurbKeySet partial;
    partial.surb_id = keyset.surb_id;
    partial.payload_key = surb.payload_key;
    partial.tag_key = surb.tag_key;
    service_view.put(partial);
    CHECK_THROWS_AS(service_view.decrypt(keyset.surb_id, r.next.delta), SphinxError);
}

TEST_CASE("packet and surb serialization") {
    Rng rng(89);
    auto g = geometry(suite_sizes("x25519-nike"), 5, 256);
    auto net = TestNet::make_nike(nike_x25519(), 5, rng);
    auto pkt = nike_wrap(g, nike_x25519(), net.path(4, deliver_cmd()), rng.bytes(99), rng);
    auto wire = pkt.serialize();
    CHECK(wire.size() == g.packet_size);
    auto back = SphinxPacket::parse(g, wire);
    CHECK(back.alpha == pkt.alpha);
    CHECK(back.beta == pkt.beta);
    CHECK(back.gamma == pkt.gamma);
    CHECK(back.delta == pkt.delta);

    Bytes short_wire(wire.begin(), wire.end() - 1);
    CHECK_THROWS_AS(SphinxPacket::parse(g, short_wire), SphinxError);
    auto bad_ad = wire;
    bad_ad[0] ^= 0xff;
    CHECK_THROWS_AS(SphinxPacket::parse(g, bad_ad), SphinxError);

    auto [surb, keyset] = surb_create(g, nike_x25519(), net.path(3, deliver_cmd()), rng);
    auto sw = surb.serialize();
    CHECK(sw.size() == g.surb_size);
    auto surb2 = Surb::deserialize(g, sw);
    CHECK(surb2.first_hop == surb.first_hop);
    CHECK(surb2.surb_id == surb.surb_id);
    CHECK(surb2.header == surb.header);
}

TEST_CASE("oversize payload and path are rejected") {
    Rng rng(97);
    auto g = geometry(suite_sizes("x25519-nike"), 3, 64);
    auto net = TestNet::make_nike(nike_x25519(), 4, rng);
    CHECK_THROWS_AS(nike_wrap(g, nike_x25519(), net.path(3, deliver_cmd()), rng.bytes(65), rng),
                    SphinxError);
    CHECK_THROWS_AS(nike_wrap(g, nike_x25519(), net.path(4, deliver_cmd()), rng.bytes(10), rng),
                    SphinxError);
}

TEST_SUITE_END();
