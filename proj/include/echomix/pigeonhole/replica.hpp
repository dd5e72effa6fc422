#pragma once

#include <functional>
#include <map>

#include "echomix/pigeonhole/envelope.hpp"
#include "echomix/sim/event_queue.hpp"
#include "echomix/sim/rng.hpp"

namespace echomix::pigeonhole {

/// Weekly-bucketed box storage. A tombstone deletes the stored payload
/// and can never be reverted; entering a new week drops the oldest
/// bucket once the retention limit is reached.
class ReplicaStore {
  public:
    enum class PutResult { Stored, TombstoneApplied, RejectedTombstoneStands, Duplicate };

    explicit ReplicaStore(size_t retention_weeks = 3) : retention_weeks_(retention_weeks) {}

    /// Requires a verified box; callers check the signature first.
    PutResult put(const bacap::BacapBox& box, uint64_t week);
    std::optional<bacap::BacapBox> get(const ByteArray<32>& box_id) const;

    void enter_week(uint64_t week);
    uint64_t current_week() const { return week_; }
    size_t bucket_count() const { return buckets_.size(); }
    size_t record_count() const;

    /// Append-log persistence: one `bucket-<week>.log` per bucket under
    /// `dir`, each starting with the magic "PHB1" and the week number.
    void persist(const std::string& dir) const;
    static ReplicaStore load(const std::string& dir, size_t retention_weeks);

    /// In-memory snapshot/restore for crash tests.
    ReplicaStore snapshot() const { return *this; }
    void restore(const ReplicaStore& snap) { *this = snap; }

    /// All records of one bucket in insertion order (tests and GC audits).
    struct Record {
        bacap::BacapBox box;
        uint64_t week;
        bool tombstoned;
    };
    std::vector<Record> records() const;

  private:
    size_t retention_weeks_;
    uint64_t week_ = 0;
    bool week_set_ = false;
    // bucket -> insertion-ordered records; index maps box id -> (week, pos)
    std::map<uint64_t, std::vector<Record>> buckets_;
    std::map<ByteArray<32>, std::pair<uint64_t, size_t>> index_;
};

/// Values every participant reads from the trusted directory: replica
/// epoch keys, the shard map, and the weekly shared random value history.
struct PkiView {
    struct ReplicaInfo {
        ByteArray<32> id{};
        Bytes epoch_public;
    };
    std::vector<ReplicaInfo> replicas;
    size_t shard_k = 2;
    std::vector<Key256> wsrv_history;  // newest last
    uint64_t week = 0;

    ShardMap shard_map() const;
    const Key256& current_wsrv() const;
    bacap::Context current_context() const;
};

/// Replica state machine. Handles decrypted-or-not envelopes arriving
/// over the courier links, serves reads with size-uniform replies,
/// schedules pending-read listeners, and replicates committed writes to
/// the box's final replicas.
class Replica {
  public:
    struct Config {
        size_t retention_weeks = 3;
        double pending_delay_min_s = 1.0;
        double pending_delay_max_s = 30.0;
        size_t max_ciphertext = 2048;
    };

    Replica(size_t index, sim::EventQueue& queue, uint64_t seed, Config cfg);

    const ByteArray<32>& id() const { return id_; }
    const Bytes& epoch_public() const { return epoch_public_; }

    void rotate_epoch_keys();
    void enter_week(uint64_t week);

    /// Send a (courier-id, reply-handle, sealed-reply) back over the link.
    using ReplyFn = std::function<void(const ReplyHandle&, Bytes sealed_reply)>;
    /// Transmit one replication frame to another replica. Delivery is
    /// unreliable; the outbox retries until the peer acknowledges.
    using ForwardFn = std::function<void(size_t replica_index, uint64_t seq,
                                         const bacap::BacapBox& box)>;
    void set_forward(ForwardFn forward, double retry_period_s);

    /// A write envelope from a courier. Returns true when this replica
    /// accepted responsibility (courier then ACKs the client); the box is
    /// then delivered to its final replicas until each acknowledges.
    bool handle_write(const CourierEnvelope& env, const ShardMap& shard);
    void on_forward_ack(uint64_t seq);

    /// A read envelope from a courier; always produces exactly one
    /// size-uniform reply now, and may add a pending listener that fires
    /// on a later write.
    void handle_read(const CourierEnvelope& env, const ReplyFn& reply);

    /// Direct replica-to-replica delivery of a committed box.
    void accept_replicated(const bacap::BacapBox& box);

    ReplicaStore& store() { return store_; }
    const Config& config() const { return cfg_; }

    /// Offline replicas drop everything silently (fault injection).
    bool online = true;

    uint64_t writes_committed = 0;
    uint64_t reads_served = 0;
    uint64_t pending_fired = 0;
    size_t outbox_size() const { return outbox_.size(); }

  private:
    struct PendingRead {
        ByteArray<32> box_id{};
        Key256 dek{};
        ReplyHandle handle{};
        ReplyFn reply;
        bool fired = false;
    };

    void commit_and_reply_pending(const bacap::BacapBox& box);
    void sweep_outbox();

    struct OutboxEntry {
        size_t dest;
        bacap::BacapBox box;
    };

    size_t index_;
    ByteArray<32> id_{};
    sim::EventQueue& queue_;
    sim::SimRng rng_;
    Config cfg_;
    ReplicaStore store_;
    Bytes epoch_private_;
    Bytes epoch_public_;
    std::vector<std::shared_ptr<PendingRead>> pending_;
    ForwardFn forward_;
    double retry_period_s_ = 10.0;
    uint64_t next_seq_ = 1;
    std::map<uint64_t, OutboxEntry> outbox_;
    bool sweeping_ = false;
};

}  // namespace echomix::pigeonhole
