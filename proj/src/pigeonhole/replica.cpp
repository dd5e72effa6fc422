#include "echomix/pigeonhole/replica.hpp"

#include <filesystem>
#include <fstream>

#include "echomix/crypto/hash.hpp"

namespace echomix::pigeonhole {

ReplicaStore::PutResult ReplicaStore::put(const bacap::BacapBox& box, uint64_t week) {
    auto it = index_.find(box.box_id);
    if (it == index_.end()) {
        auto& bucket = buckets_[week];
        bucket.push_back(Record{box, week, box.is_tombstone()});
        index_[box.box_id] = {week, bucket.size() - 1};
        return box.is_tombstone() ? PutResult::TombstoneApplied : PutResult::Stored;
    }
    auto& rec = buckets_[it->second.first][it->second.second];
    if (rec.tombstoned) return PutResult::RejectedTombstoneStands;
    if (box.is_tombstone()) {
        // the tombstone deletes the stored payload pair for good
        rec.box.ciphertext.clear();
        rec.box.signature = box.signature;
        rec.tombstoned = true;
        return PutResult::TombstoneApplied;
    }
    return PutResult::Duplicate;
}

std::optional<bacap::BacapBox> ReplicaStore::get(const ByteArray<32>& box_id) const {
    auto it = index_.find(box_id);
    if (it == index_.end()) return std::nullopt;
    return buckets_.at(it->second.first)[it->second.second].box;
}

void ReplicaStore::enter_week(uint64_t week) {
    if (week_set_ && week <= week_) return;
    week_ = week;
    week_set_ = true;
    // retain the newest retention_weeks_ buckets, discard the rest
    while (!buckets_.empty() && buckets_.begin()->first + retention_weeks_ <= week) {
        for (const auto& rec : buckets_.begin()->second) index_.erase(rec.box.box_id);
        buckets_.erase(buckets_.begin());
    }
}

size_t ReplicaStore::record_count() const {
    size_t n = 0;
    for (const auto& [w, b] : buckets_) n += b.size();
    return n;
}

std::vector<ReplicaStore::Record> ReplicaStore::records() const {
    std::vector<Record> out;
    for (const auto& [w, b] : buckets_) out.insert(out.end(), b.begin(), b.end());
    return out;
}

void ReplicaStore::persist(const std::string& dir) const {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    for (const auto& [week, bucket] : buckets_) {
        std::ofstream f(dir + "/bucket-" + std::to_string(week) + ".log", std::ios::binary);
        f.write("PHB1", 4);
        uint8_t wk[8];
        store_be64(wk, week);
        f.write(reinterpret_cast<const char*>(wk), 8);
        for (const auto& rec : bucket) {
            auto wire = rec.box.serialize();
            uint8_t len[4];
            store_be32(len, uint32_t(wire.size()));
            f.write(reinterpret_cast<const char*>(len), 4);
            f.put(rec.tombstoned ? 1 : 0);
            f.write(reinterpret_cast<const char*>(wire.data()), long(wire.size()));
        }
    }
}

ReplicaStore ReplicaStore::load(const std::string& dir, size_t retention_weeks) {
    namespace fs = std::filesystem;
    ReplicaStore store(retention_weeks);
    if (!fs::exists(dir)) return store;
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.path().filename().string().starts_with("bucket-")) files.push_back(e.path());
    std::sort(files.begin(), files.end());
    uint64_t max_week = 0;
    for (const auto& path : files) {
        std::ifstream f(path, std::ios::binary);
        char magic[4];
        f.read(magic, 4);
        if (std::memcmp(magic, "PHB1", 4) != 0)
            throw PigeonholeError("bucket log: bad magic in " + path.string());
        uint8_t wk[8];
        f.read(reinterpret_cast<char*>(wk), 8);
        uint64_t week = load_be64(wk);
        max_week = std::max(max_week, week);
        for (;;) {
            uint8_t len[4];
            if (!f.read(reinterpret_cast<char*>(len), 4)) break;
            uint32_t n = load_be32(len);
            int tomb = f.get();
            Bytes wire(n);
            if (!f.read(reinterpret_cast<char*>(wire.data()), n))
                throw PigeonholeError("bucket log: truncated record in " + path.string());
            auto box = bacap::BacapBox::deserialize(wire);
            (void)tomb;  // tombstone state is implied by the empty payload
            store.put(box, week);
        }
    }
    if (!files.empty()) {
        store.week_ = max_week;
        store.week_set_ = true;
    }
    return store;
}

ShardMap PkiView::shard_map() const {
    ShardMap map;
    map.k = shard_k;
    for (const auto& r : replicas) map.replicas.push_back({r.id, r.epoch_public});
    return map;
}

const Key256& PkiView::current_wsrv() const {
    if (wsrv_history.empty()) throw PigeonholeError("pki: no wsrv published");
    return wsrv_history.back();
}

bacap::Context PkiView::current_context() const {
    return bacap::Context::of(current_wsrv());
}

Replica::Replica(size_t index, sim::EventQueue& queue, uint64_t seed, Config cfg)
    : index_(index),
      queue_(queue),
      rng_(seed, "replica/" + std::to_string(index)),
      cfg_(cfg),
      store_(cfg.retention_weeks) {
    Bytes label = to_bytes(std::string("replica-id-") + std::to_string(index));
    id_ = crypto::Sha256::hash(label);
    rotate_epoch_keys();
}

void Replica::rotate_epoch_keys() {
    // fresh NIKE keypair per epoch, published in the PKI view
    Rng krng(rng_.next_u64());
    auto [priv, pub] = crypto::nike_x25519().generate_keypair(krng);
    epoch_private_ = priv;
    epoch_public_ = pub;
}

void Replica::enter_week(uint64_t week) { store_.enter_week(week); }

void Replica::set_forward(ForwardFn forward, double retry_period_s) {
    forward_ = std::move(forward);
    retry_period_s_ = retry_period_s;
}

void Replica::on_forward_ack(uint64_t seq) { outbox_.erase(seq); }

void Replica::sweep_outbox() {
    if (outbox_.empty()) {
        sweeping_ = false;
        return;
    }
    if (online && forward_) {
        for (const auto& [seq, entry] : outbox_) forward_(entry.dest, seq, entry.box);
    }
    queue_.after(retry_period_s_, [this] { sweep_outbox(); });
}

bool Replica::handle_write(const CourierEnvelope& env, const ShardMap& shard) {
    if (!online) return false;
    auto dek = EnvelopeCrypto::unwrap_dek(env, id_, epoch_private_, epoch_public_);
    if (!dek) return false;
    auto plain = EnvelopeCrypto::open_enveloped(env, *dek);
    if (!plain) return false;
    bacap::BacapBox box;
    try {
        box = WritePayload::deserialize(*plain).box;
    } catch (const std::exception&) {
        return false;
    }
    if (!bacap::verify(box)) return false;  // signature invalid: reject
    if (box.ciphertext.size() > cfg_.max_ciphertext) return false;

    // commit locally (intermediate custody); delivering to the final
    // replicas is now this replica's responsibility, so the outbox keeps
    // retrying until each final acknowledges
    commit_and_reply_pending(box);
    for (size_t f : shard.select(box.box_id)) {
        if (f == index_) continue;
        uint64_t seq = next_seq_++;
        outbox_.emplace(seq, OutboxEntry{f, box});
        if (forward_) forward_(f, seq, box);
    }
    if (!outbox_.empty() && !sweeping_) {
        sweeping_ = true;
        queue_.after(retry_period_s_, [this] { sweep_outbox(); });
    }
    return true;
}

void Replica::accept_replicated(const bacap::BacapBox& box) {
    if (!online) return;
    if (!bacap::verify(box)) return;
    commit_and_reply_pending(box);
}

void Replica::commit_and_reply_pending(const bacap::BacapBox& box) {
    auto result = store_.put(box, store_.current_week());
    if (result == ReplicaStore::PutResult::Stored ||
        result == ReplicaStore::PutResult::TombstoneApplied)
        ++writes_committed;

    if (result == ReplicaStore::PutResult::RejectedTombstoneStands) return;

    // wake pending listeners for this box, each on its own uniform delay
    for (auto& p : pending_) {
        if (p->fired || p->box_id != box.box_id) continue;
        p->fired = true;
        auto stored = store_.get(box.box_id);
        if (!stored) continue;
        double delay = rng_.uniform(cfg_.pending_delay_min_s, cfg_.pending_delay_max_s);
        auto self = p;
        Bytes reply = EnvelopeCrypto::seal_reply(
            p->dek, ReadReply{true, stored}.serialize(cfg_.max_ciphertext),
            ReadReply::wire_size(cfg_.max_ciphertext));
        ++pending_fired;
        queue_.after(delay, [self, reply = std::move(reply)]() mutable {
            self->reply(self->handle, std::move(reply));
        });
    }
    std::erase_if(pending_, [](const auto& p) { return p->fired; });
}

void Replica::handle_read(const CourierEnvelope& env, const ReplyFn& reply) {
    if (!online) return;
    auto dek = EnvelopeCrypto::unwrap_dek(env, id_, epoch_private_, epoch_public_);
    if (!dek) return;
    auto plain = EnvelopeCrypto::open_enveloped(env, *dek);
    if (!plain) return;
    ReadPayload req;
    try {
        req = ReadPayload::deserialize(*plain);
    } catch (const std::exception&) {
        return;
    }
    ++reads_served;

    auto box = store_.get(req.box_id);
    ReadReply rep;
    rep.found = box.has_value();
    rep.box = box;
    if (!box) {
        // listener for a write arriving in the near future
        auto p = std::make_shared<PendingRead>();
        p->box_id = req.box_id;
        p->dek = *dek;
        p->handle = env.reply_handle;
        p->reply = reply;
        pending_.push_back(std::move(p));
    }
    // exactly one reply either way, same wire size either way
    reply(env.reply_handle,
          EnvelopeCrypto::seal_reply(*dek, rep.serialize(cfg_.max_ciphertext),
                                     ReadReply::wire_size(cfg_.max_ciphertext)));
}

}  // namespace echomix::pigeonhole
