#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include "echomix/pigeonhole/channel.hpp"
#include "echomix/stats.hpp"

using namespace echomix;
using namespace echomix::pigeonhole;
using sim::EventQueue;

namespace {

bacap::BacapBox make_box(Rng& rng, const Bytes& payload, bacap::WriteCap* cap_out = nullptr,
                         bacap::BoxKeys* keys_out = nullptr) {
    auto cap = bacap::WriteCap::generate(rng);
    auto ctx = bacap::Context::of(to_bytes(std::string("test-ctx")));
    auto keys = bacap::derive_next(cap.root_public, cap.state, cap.first_index, ctx);
    auto box = bacap::seal(keys, cap, payload);
    if (cap_out) *cap_out = cap;
    if (keys_out) *keys_out = keys;
    return box;
}

PigeonholeNet::Config small_net_config(uint64_t seed) {
    PigeonholeNet::Config cfg;
    cfg.replicas = 6;
    cfg.couriers = 3;
    cfg.shard_k = 2;
    cfg.seed = seed;
    cfg.replica_cfg.pending_delay_min_s = 0.5;
    cfg.replica_cfg.pending_delay_max_s = 3.0;
    return cfg;
}

bool contains_bytes(const Bytes& haystack, ByteView needle) {
    if (needle.empty() || haystack.size() < needle.size()) return false;
    return std::search(haystack.begin(), haystack.end(), needle.begin(), needle.end()) !=
           haystack.end();
}

}  // namespace

TEST_SUITE_BEGIN("pigeonhole");

TEST_CASE("shard selection is deterministic and uniform") {
    Rng rng(1);
    ShardMap map;
    map.k = 2;
    for (int i = 0; i < 4; ++i) {
        ShardMap::Entry e;
        rng.fill(e.replica_id.data(), 32);
        e.public_key = rng.bytes(32);
        map.replicas.push_back(e);
    }

    auto id = rng.bytes(32);
    CHECK(map.select(id) == map.select(id));

    // frequencies of all C(4,2)=6 unordered pairs over 10^5 random ids
    std::map<std::pair<size_t, size_t>, uint64_t> freq;
    for (int i = 0; i < 100000; ++i) {
        auto box = rng.bytes(32);
        auto sel = map.select(box);
        auto pair = std::minmax(sel[0], sel[1]);
        ++freq[pair];
    }
    CHECK(freq.size() == 6);
    std::vector<uint64_t> counts;
    for (auto& [k, v] : freq) counts.push_back(v);
    CHECK(stats::chi_square_uniform_pvalue(counts) > 0.01);

    ShardMap small = map;
    small.k = 5;
    CHECK_THROWS_AS(small.select(id), PigeonholeError);
}

TEST_CASE("removing a replica reassigns about k/n of the boxes") {
    Rng rng(2);
    ShardMap map;
    map.k = 2;
    for (int i = 0; i < 10; ++i) {
        ShardMap::Entry e;
        rng.fill(e.replica_id.data(), 32);
        e.public_key = rng.bytes(32);
        map.replicas.push_back(e);
    }
    ShardMap reduced = map;
    reduced.replicas.erase(reduced.replicas.begin() + 7);

    auto key_of = [](const ShardMap& m, const std::vector<size_t>& sel) {
        std::set<std::string> ids;
        for (auto i : sel)
            ids.insert(std::string(reinterpret_cast<const char*>(m.replicas[i].replica_id.data()), 32));
        return ids;
    };
    uint64_t moved = 0;
    const int N = 100000;
    for (int i = 0; i < N; ++i) {
        auto box = rng.bytes(32);
        if (key_of(map, map.select(box)) != key_of(reduced, reduced.select(box))) ++moved;
    }
    double fraction = double(moved) / N;
    CHECK(fraction > 0.18);  // k/n = 0.2, within 2% absolute
    CHECK(fraction < 0.22);
}

TEST_CASE("envelope serialization and opacity") {
    Rng rng(3);
    auto box = make_box(rng, rng.bytes(120));

    std::vector<std::pair<ByteArray<32>, Bytes>> replica_keys;
    auto [priv1, pub1] = crypto::nike_x25519().generate_keypair(rng);
    auto [priv2, pub2] = crypto::nike_x25519().generate_keypair(rng);
    ByteArray<32> id1, id2;
    rng.fill(id1.data(), 32);
    rng.fill(id2.data(), 32);
    replica_keys.push_back({id1, pub1});
    replica_keys.push_back({id2, pub2});

    auto sealed = EnvelopeCrypto::seal(WritePayload{box}.serialize(), replica_keys, rng);
    CourierEnvelope env;
    env.kind = CourierEnvelope::Kind::Write;
    env.ephemeral = sealed.ephemeral;
    env.deks = sealed.deks;
    env.enveloped = sealed.enveloped;
    rng.fill(env.reply_handle.data(), REPLY_HANDLE_SIZE);

    auto wire = env.serialize();
    auto back = CourierEnvelope::deserialize(wire);
    CHECK(back.kind == env.kind);
    CHECK(back.ephemeral.classical == env.ephemeral.classical);
    CHECK(back.deks.size() == 2);
    CHECK(back.enveloped == env.enveloped);

    // both replicas recover the DEK; an outsider key does not
    auto dek1 = EnvelopeCrypto::unwrap_dek(back, id1, priv1, pub1);
    auto dek2 = EnvelopeCrypto::unwrap_dek(back, id2, priv2, pub2);
    REQUIRE(dek1.has_value());
    REQUIRE(dek2.has_value());
    CHECK(*dek1 == *dek2);
    auto [priv3, pub3] = crypto::nike_x25519().generate_keypair(rng);
    CHECK(!EnvelopeCrypto::unwrap_dek(back, id1, priv3, pub3).has_value());

    auto plain = EnvelopeCrypto::open_enveloped(back, *dek1);
    REQUIRE(plain.has_value());
    CHECK(WritePayload::deserialize(*plain).box.box_id == box.box_id);

    // the courier-visible wire never carries the box id in the clear
    CHECK(!contains_bytes(wire, ByteView(box.box_id.data(), 32)));

    // truncation and version errors
    Bytes bad = wire;
    bad.pop_back();
    CHECK_THROWS_AS(CourierEnvelope::deserialize(bad), PigeonholeError);
    bad = wire;
    bad[0] = 9;
    CHECK_THROWS_AS(CourierEnvelope::deserialize(bad), PigeonholeError);
}

TEST_CASE("read replies are size-uniform") {
    Rng rng(4);
    bacap::BoxKeys keys;
    auto box = make_box(rng, rng.bytes(333), nullptr, &keys);
    ReadReply pos{true, box};
    ReadReply neg{false, std::nullopt};
    auto w1 = pos.serialize(2048);
    auto w2 = neg.serialize(2048);
    CHECK(w1.size() == w2.size());
    CHECK(w1.size() == ReadReply::wire_size(2048));
    auto back = ReadReply::deserialize(w1);
    REQUIRE(back.found);
    CHECK(back.box->ciphertext == box.ciphertext);
    CHECK(!ReadReply::deserialize(w2).found);

    // sealed forms are equally indistinguishable by length
    Key256 dek = rng.key256();
    auto s1 = EnvelopeCrypto::seal_reply(dek, w1, ReadReply::wire_size(2048));
    auto s2 = EnvelopeCrypto::seal_reply(dek, w2, ReadReply::wire_size(2048));
    CHECK(s1.size() == s2.size());
    auto opened = EnvelopeCrypto::open_reply(dek, s1);
    REQUIRE(opened.has_value());
    CHECK(ReadReply::deserialize(*opened).found);
}

TEST_CASE("replica store: tombstone precedence and gc") {
    Rng rng(5);
    ReplicaStore store(3);
    store.enter_week(10);

    bacap::WriteCap cap;
    bacap::BoxKeys keys;
    auto box = make_box(rng, rng.bytes(64), &cap, &keys);
    auto tomb = bacap::make_tombstone(keys, cap);

    SUBCASE("message then tombstone: payload deleted for good") {
        CHECK(store.put(box, 10) == ReplicaStore::PutResult::Stored);
        CHECK(store.put(box, 10) == ReplicaStore::PutResult::Duplicate);
        CHECK(store.put(tomb, 10) == ReplicaStore::PutResult::TombstoneApplied);
        auto got = store.get(box.box_id);
        REQUIRE(got.has_value());
        CHECK(got->is_tombstone());
        // a later re-write cannot revert it
        CHECK(store.put(box, 10) == ReplicaStore::PutResult::RejectedTombstoneStands);
        CHECK(store.get(box.box_id)->is_tombstone());
    }
    SUBCASE("tombstone then message: tombstone stands") {
        CHECK(store.put(tomb, 10) == ReplicaStore::PutResult::TombstoneApplied);
        CHECK(store.put(box, 10) == ReplicaStore::PutResult::RejectedTombstoneStands);
        CHECK(store.get(box.box_id)->is_tombstone());
    }
    SUBCASE("weekly buckets are capped and the oldest is dropped") {
        CHECK(store.put(box, 10) == ReplicaStore::PutResult::Stored);
        store.enter_week(11);
        store.enter_week(12);
        CHECK(store.get(box.box_id).has_value());
        CHECK(store.bucket_count() <= 3);
        store.enter_week(13);  // week 10 falls out of retention
        CHECK(!store.get(box.box_id).has_value());
    }
}

TEST_CASE("replica store persistence round trip") {
    Rng rng(6);
    std::string dir = "/tmp/echomix-test-store";
    std::filesystem::remove_all(dir);
    ReplicaStore store(4);
    store.enter_week(3);
    std::vector<bacap::BacapBox> boxes;
    for (int i = 0; i < 5; ++i) {
        auto box = make_box(rng, rng.bytes(40 + i));
        boxes.push_back(box);
        store.put(box, 3 + uint64_t(i % 2));
    }
    store.persist(dir);
    auto loaded = ReplicaStore::load(dir, 4);
    CHECK(loaded.record_count() == store.record_count());
    for (const auto& b : boxes) {
        auto got = loaded.get(b.box_id);
        REQUIRE(got.has_value());
        CHECK(got->ciphertext == b.ciphertext);
    }
    std::filesystem::remove_all(dir);

    // corrupted log header is rejected
    std::filesystem::create_directories(dir);
    {
        std::ofstream bad(dir + "/bucket-9.log", std::ios::binary);
        bad << "XXXX";
    }
    CHECK_THROWS_AS(ReplicaStore::load(dir, 4), PigeonholeError);
    std::filesystem::remove_all(dir);

    // snapshot/restore
    auto snap = store.snapshot();
    auto extra = make_box(rng, rng.bytes(10));
    store.put(extra, 4);
    CHECK(store.record_count() == snap.record_count() + 1);
    store.restore(snap);
    CHECK(!store.get(extra.box_id).has_value());
}

TEST_CASE("write path: ack once, both finals hold the box") {
    EventQueue queue;
    PigeonholeNet net(queue, small_net_config(7));
    Rng rng(7);

    auto cap = bacap::WriteCap::generate(rng);
    ChannelWriter writer(cap, net, 7);

    int done_count = 0;
    bool ok = false;
    writer.send_message(to_bytes(std::string("hello dead drop")), [&](bool b) {
        ++done_count;
        ok = b;
    });
    queue.run_until(300);

    CHECK(done_count == 1);
    CHECK(ok);
    CHECK(writer.acks_received() == 1);
    CHECK(writer.last_acked() == cap.first_index + 1);

    // the final replicas selected by the shard map hold the box
    auto ctx = net.pki().current_context();
    auto keys = bacap::derive_next(cap.root_public, cap.state, cap.first_index, ctx);
    auto box_id = keys.box_id.encode();
    auto finals = net.pki().shard_map().select(box_id);
    size_t holders = 0;
    for (size_t r = 0; r < net.replica_count(); ++r)
        if (net.replica(r).store().get(box_id)) ++holders;
    for (size_t f : finals) CHECK(net.replica(f).store().get(box_id).has_value());
    CHECK(holders >= net.pki().shard_k);
}

TEST_CASE("write retry: replica outage delays the ack, same envelope succeeds") {
    EventQueue queue;
    PigeonholeNet net(queue, small_net_config(8));
    Rng rng(8);

    for (size_t r = 0; r < net.replica_count(); ++r) net.set_replica_online(r, false);

    auto cap = bacap::WriteCap::generate(rng);
    ChannelWriter writer(cap, net, 8);
    bool ok = false;
    int cb = 0;
    writer.send_message(to_bytes(std::string("persistent")), [&](bool b) {
        ok = b;
        ++cb;
    });
    queue.run_until(40);
    CHECK(cb == 0);  // no ack while everything is down

    queue.at(queue.now(), [&] {
        for (size_t r = 0; r < net.replica_count(); ++r) net.set_replica_online(r, true);
    });
    queue.run_until(400);
    CHECK(cb == 1);
    CHECK(ok);
}

TEST_CASE("read path: stored box, negative ack, pending read") {
    EventQueue queue;
    PigeonholeNet net(queue, small_net_config(9));
    Rng rng(9);

    auto cap = bacap::WriteCap::generate(rng);
    ChannelWriter writer(cap, net, 9);
    ChannelReader reader(cap.read_cap(), net, 10);

    SUBCASE("written box is read and opened") {
        writer.send_message(to_bytes(std::string("first message")), [](bool) {});
        queue.run_until(120);
        reader.start(1.0);
        queue.run_until(400);
        REQUIRE(reader.received().size() == 1);
        CHECK(reader.received()[0].payload == to_bytes(std::string("first message")));
        CHECK(reader.cursor() == cap.first_index + 1);
    }
    SUBCASE("write after read fires the pending listener") {
        reader.start(1.0);
        queue.run_until(60);  // reader is polling an empty box
        CHECK(reader.received().empty());
        writer.send_message(to_bytes(std::string("late arrival")), [](bool) {});
        queue.run_until(500);
        REQUIRE(reader.received().size() == 1);
        CHECK(reader.received()[0].payload == to_bytes(std::string("late arrival")));
    }
}

TEST_CASE("pending read delays are uniform in the configured interval") {
    EventQueue queue;
    auto cfg = small_net_config(11);
    cfg.replicas = 2;
    cfg.shard_k = 1;
    cfg.replica_cfg.pending_delay_min_s = 1.0;
    cfg.replica_cfg.pending_delay_max_s = 30.0;
    PigeonholeNet net(queue, cfg);
    Rng rng(11);

    // drive the replica state machine directly: many listeners, then the write
    auto& replica = net.replica(0);
    std::vector<double> delays;
    auto ctx = net.pki().current_context();
    for (int trial = 0; trial < 10000; ++trial) {
        bacap::WriteCap cap = bacap::WriteCap::generate(rng);
        auto keys = bacap::derive_next(cap.root_public, cap.state, cap.first_index, ctx);
        auto box = bacap::seal(keys, cap, to_bytes(std::string("x")));

        auto sealed = EnvelopeCrypto::seal(ReadPayload{keys.box_id.encode()}.serialize(),
                                           {{replica.id(), replica.epoch_public()}}, rng);
        CourierEnvelope env;
        env.kind = CourierEnvelope::Kind::Read;
        env.ephemeral = sealed.ephemeral;
        env.deks = sealed.deks;
        env.enveloped = sealed.enveloped;

        double asked_at = queue.now();
        int replies = 0;
        replica.handle_read(env, [&, asked_at](const ReplyHandle&, Bytes) {
            ++replies;
            if (replies == 2) delays.push_back(queue.now() - asked_at);
        });
        replica.accept_replicated(box);
        queue.run_until(queue.now() + 40.0);
        CHECK(replies == 2);  // immediate negative + exactly one pending fire
    }
    REQUIRE(delays.size() == 10000);
    std::vector<uint64_t> bins(10, 0);
    for (double d : delays) {
        CHECK(d >= 1.0);
        CHECK(d <= 30.0);
        size_t b = std::min<size_t>(9, size_t((d - 1.0) / 29.0 * 10.0));
        ++bins[b];
    }
    CHECK(stats::chi_square_uniform_pvalue(bins) > 0.01);
}

TEST_CASE("courier dedup: five resends, one replica request") {
    EventQueue queue;
    PigeonholeNet net(queue, small_net_config(12));
    Rng rng(12);

    auto cap = bacap::WriteCap::generate(rng);
    auto ctx = net.pki().current_context();
    auto keys = bacap::derive_next(cap.root_public, cap.state, cap.first_index, ctx);
    auto box_id = keys.box_id.encode();
    auto finals = net.pki().shard_map().select(box_id);
    size_t replica = finals[0];

    auto sealed = EnvelopeCrypto::seal(
        ReadPayload{box_id}.serialize(),
        {{net.pki().replicas[replica].id, net.pki().replicas[replica].epoch_public}}, rng);
    CourierEnvelope env;
    env.kind = CourierEnvelope::Kind::Read;
    env.ephemeral = sealed.ephemeral;
    env.deks = sealed.deks;
    env.enveloped = sealed.enveloped;

    auto& courier = net.courier(0);
    uint64_t before_reads = net.replica(replica).reads_served;
    int replies = 0;
    for (int i = 0; i < 5; ++i) {
        queue.after(2.0 * i, [&, i] {
            Rng hrng(uint64_t(100 + i));
            auto handle = net.fresh_handle(hrng);
            env.reply_handle = handle;
            net.client_send(0, env.serialize(), handle, [&](Bytes) { ++replies; });
        });
    }
    queue.run_until(120);
    CHECK(net.replica(replica).reads_served - before_reads == 1);
    CHECK(replies == 5);  // cached negative replayed to each fresh handle
    CHECK(courier.replica_requests_sent >= 1);

    // a different envelope for the same box is a new request
    Rng rng2(13);
    auto sealed2 = EnvelopeCrypto::seal(
        ReadPayload{box_id}.serialize(),
        {{net.pki().replicas[replica].id, net.pki().replicas[replica].epoch_public}}, rng2);
    CourierEnvelope env2;
    env2.kind = CourierEnvelope::Kind::Read;
    env2.ephemeral = sealed2.ephemeral;
    env2.deks = sealed2.deks;
    env2.enveloped = sealed2.enveloped;
    Rng hrng(999);
    auto handle = net.fresh_handle(hrng);
    env2.reply_handle = handle;
    net.client_send(0, env2.serialize(), handle, [&](Bytes) {});
    queue.run_until(queue.now() + 60);
    CHECK(net.replica(replica).reads_served - before_reads == 2);
}

TEST_CASE("intermediate replicas are independent of the finals") {
    EventQueue queue;
    auto cfg = small_net_config(14);
    cfg.replicas = 6;
    PigeonholeNet net(queue, cfg);
    Rng rng(14);

    auto cap = bacap::WriteCap::generate(rng);
    ChannelWriter writer(cap, net, 14);
    auto ctx = net.pki().current_context();
    auto lt_keys = bacap::derive_range(cap.root_public, cap.state, cap.first_index, 2000, ctx);

    // statistical check: intermediates drawn uniformly match the final
    // pair only at chance rate 1/C(6,2)
    uint64_t matches = 0;
    const int N = 2000;
    size_t n = net.replica_count();
    double chance = 1.0 / 15.0;
    sim::SimRng srng(14, "check");
    for (int i = 0; i < N; ++i) {
        const auto& keys = lt_keys[size_t(i)];
        auto finals = net.pki().shard_map().select(keys.box_id.encode());
        std::set<size_t> final_set(finals.begin(), finals.end());
        std::set<size_t> inter = {size_t(srng.below(n)), size_t(srng.below(n))};
        if (inter == final_set) ++matches;
    }
    double freq = double(matches) / N;
    // allow 4 sigma around the chance rate (pairs with repeats make the
    // true rate slightly lower than 1/15)
    double sigma = std::sqrt(chance * (1 - chance) / N);
    CHECK(freq < chance + 4 * sigma);
}

TEST_CASE("end-to-end backfill with garbage collection") {
    EventQueue queue;
    auto cfg = small_net_config(15);
    cfg.replica_cfg.retention_weeks = 2;
    PigeonholeNet net(queue, cfg);
    Rng rng(15);

    auto cap = bacap::WriteCap::generate(rng);
    ChannelWriter writer(cap, net, 15);

    // writer sends nine messages
    int acked = 0;
    for (int i = 0; i < 9; ++i) {
        queue.after(5.0 * i, [&, i] {
            writer.send_message(to_bytes("msg-" + std::to_string(i)), [&](bool b) {
                if (b) ++acked;
            });
        });
    }
    queue.run_until(600);
    CHECK(acked == 9);

    // weeks pass; retention wipes the boxes
    net.rotate_wsrv(to_bytes(std::string("wsrv-week-2")));
    net.rotate_wsrv(to_bytes(std::string("wsrv-week-3")));
    net.rotate_wsrv(to_bytes(std::string("wsrv-week-4")));
    size_t total_records = 0;
    for (size_t r = 0; r < net.replica_count(); ++r)
        total_records += net.replica(r).store().record_count();
    CHECK(total_records == 0);

    // reader comes online; polls find nothing yet
    ChannelReader reader(cap.read_cap(), net, 16);
    reader.start(1.0);
    queue.run_until(queue.now() + 30);
    CHECK(reader.received().empty());

    // the tenth message triggers an all-or-nothing backfill
    bool backfill_ok = false;
    writer.send_with_backfill(to_bytes(std::string("msg-9")), [&](bool b) { backfill_ok = b; });
    queue.run_until(queue.now() + 3000);

    CHECK(backfill_ok);
    REQUIRE(reader.received().size() == 10);
    for (int i = 0; i < 10; ++i) {
        CHECK(!reader.received()[size_t(i)].tombstone);
        CHECK(reader.received()[size_t(i)].payload == to_bytes("msg-" + std::to_string(i)));
    }

    // the temporary channel is fully tombstoned
    uint64_t tombstones = 0;
    for (size_t r = 0; r < net.replica_count(); ++r)
        for (const auto& rec : net.replica(r).store().records())
            if (rec.tombstoned) ++tombstones;
    CHECK(tombstones >= 10);  // ten temp boxes, each tombstoned on >= 1 replica

    // courier blindness: no courier retains a long-term box id
    auto ctx = net.pki().current_context();
    auto lt_keys = bacap::derive_range(cap.root_public, cap.state, cap.first_index, 10, ctx);
    for (size_t c = 0; c < net.courier_count(); ++c) {
        auto state = net.courier(c).observable_state();
        for (const auto& k : lt_keys) {
            auto id = k.box_id.encode();
            CHECK(!contains_bytes(state, ByteView(id.data(), 32)));
        }
    }
    // the couriers did observe how many items were copied
    uint64_t copied = 0;
    for (size_t c = 0; c < net.courier_count(); ++c)
        copied += net.courier(c).copied_items_observed;
    CHECK(copied == 10);
}

TEST_CASE("reads spanning a context rotation") {
    EventQueue queue;
    PigeonholeNet net(queue, small_net_config(17));
    Rng rng(17);

    auto cap = bacap::WriteCap::generate(rng);
    ChannelWriter writer(cap, net, 17);
    writer.send_message(to_bytes(std::string("pre-rotation")), [](bool) {});
    queue.run_until(150);

    // a new weekly value arrives; the box stays under the old context
    net.rotate_wsrv(to_bytes(std::string("wsrv-week-2")));

    ChannelReader::Config rc;
    rc.poll_period_s = 2.0;
    rc.retries_before_rotate = 2;  // cycle contexts quickly
    ChannelReader reader(cap.read_cap(), net, 18, rc);
    reader.start(1.0);
    queue.run_until(queue.now() + 300);
    REQUIRE(reader.received().size() == 1);
    CHECK(reader.received()[0].payload == to_bytes(std::string("pre-rotation")));
}

TEST_CASE("tombstoned long-term box reads back as deleted") {
    EventQueue queue;
    PigeonholeNet net(queue, small_net_config(19));
    Rng rng(19);

    auto cap = bacap::WriteCap::generate(rng);
    auto ctx = net.pki().current_context();
    auto keys = bacap::derive_next(cap.root_public, cap.state, cap.first_index, ctx);

    ChannelWriter writer(cap, net, 19);
    writer.send_message(to_bytes(std::string("now you see me")), [](bool) {});
    queue.run_until(150);

    // the writer deletes it: a tombstone through the normal write path
    auto tomb = bacap::make_tombstone(keys, cap);
    auto sealed = EnvelopeCrypto::seal(
        WritePayload{tomb}.serialize(),
        {{net.pki().replicas[0].id, net.pki().replicas[0].epoch_public},
         {net.pki().replicas[1].id, net.pki().replicas[1].epoch_public}},
        rng);
    CourierEnvelope env;
    env.kind = CourierEnvelope::Kind::Write;
    env.ephemeral = sealed.ephemeral;
    env.deks = sealed.deks;
    env.enveloped = sealed.enveloped;
    Rng hrng(20);
    auto handle = net.fresh_handle(hrng);
    env.reply_handle = handle;
    net.client_send(0, env.serialize(), handle, [](Bytes) {});
    queue.run_until(queue.now() + 150);

    ChannelReader reader(cap.read_cap(), net, 21);
    reader.start(1.0);
    queue.run_until(queue.now() + 120);
    REQUIRE(reader.received().size() == 1);
    CHECK(reader.received()[0].tombstone);
}

TEST_CASE("replica records from interleaved channels are indistinguishable") {
    EventQueue queue;
    auto cfg = small_net_config(22);
    cfg.replicas = 2;
    cfg.shard_k = 2;  // every box lands on both replicas
    PigeonholeNet net(queue, cfg);
    Rng rng(22);

    auto cap_a = bacap::WriteCap::generate(rng);
    auto cap_b = bacap::WriteCap::generate(rng);
    auto ctx = net.pki().current_context();
    auto ka = bacap::derive_range(cap_a.root_public, cap_a.state, cap_a.first_index, 300, ctx);
    auto kb = bacap::derive_range(cap_b.root_public, cap_b.state, cap_b.first_index, 300, ctx);
    for (int i = 0; i < 300; ++i) {
        net.replica(0).accept_replicated(bacap::seal(ka[size_t(i)], cap_a, rng.bytes(32)));
        net.replica(0).accept_replicated(bacap::seal(kb[size_t(i)], cap_b, rng.bytes(32)));
    }
    // bit-profile classifier on the stored box ids, trained on half
    auto records = net.replica(0).store().records();
    REQUIRE(records.size() == 600);
    std::set<ByteArray<32>> a_ids;
    for (const auto& k : ka) a_ids.insert(k.box_id.encode());

    std::array<std::vector<double>, 2> profile;
    profile[0].assign(256, 0.0);
    profile[1].assign(256, 0.0);
    std::array<int, 2> trained{0, 0};
    size_t half = records.size() / 2;
    auto bit = [](const ByteArray<32>& id, int b) { return (id[size_t(b) / 8] >> (b % 8)) & 1; };
    for (size_t i = 0; i < half; ++i) {
        int label = a_ids.contains(records[i].box.box_id) ? 0 : 1;
        ++trained[size_t(label)];
        for (int b = 0; b < 255; ++b) profile[size_t(label)][size_t(b)] += bit(records[i].box.box_id, b);
    }
    for (int l = 0; l < 2; ++l)
        for (int b = 0; b < 255; ++b)
            profile[size_t(l)][size_t(b)] =
                std::clamp(profile[size_t(l)][size_t(b)] / std::max(1, trained[size_t(l)]), 0.01, 0.99);
    size_t correct = 0, total = 0;
    for (size_t i = half; i < records.size(); ++i) {
        double ll0 = 0, ll1 = 0;
        for (int b = 0; b < 255; ++b) {
            int v = bit(records[i].box.box_id, b);
            ll0 += std::log(v ? profile[0][size_t(b)] : 1 - profile[0][size_t(b)]);
            ll1 += std::log(v ? profile[1][size_t(b)] : 1 - profile[1][size_t(b)]);
        }
        int guess = ll0 >= ll1 ? 0 : 1;
        int truth = a_ids.contains(records[i].box.box_id) ? 0 : 1;
        correct += guess == truth;
        ++total;
    }
    double accuracy = double(correct) / double(total);
    double sigma = 0.5 / std::sqrt(double(total));
    CHECK(std::fabs(accuracy - 0.5) <= 2.5 * sigma);
}

TEST_CASE("ack monotonicity") {
    EventQueue queue;
    PigeonholeNet net(queue, small_net_config(23));
    Rng rng(23);
    auto cap = bacap::WriteCap::generate(rng);
    ChannelWriter writer(cap, net, 23);

    uint64_t prev = 0;
    for (int i = 0; i < 5; ++i) {
        writer.send_message(rng.bytes(16), [](bool) {});
        queue.run_until(queue.now() + 120);
        CHECK(writer.last_acked() >= prev);
        prev = writer.last_acked();
    }
    CHECK(writer.acks_received() == 5);
    CHECK(writer.last_acked() == cap.first_index + 5);
    // acks exist only because the user sent; an idle channel gains none
    queue.run_until(queue.now() + 300);
    CHECK(writer.acks_received() == 5);
}

TEST_SUITE_END();
