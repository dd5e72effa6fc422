#pragma once

#include <deque>
#include <map>

#include "echomix/pigeonhole/replica.hpp"

namespace echomix::pigeonhole {

/// Copy command: the write capability for a temporary channel whose
/// boxes hold encrypted write orders, the number of boxes, and the ACK
/// reply block. Wire: version (1) || kind=3 (1) || write cap (72) ||
/// count (4, big-endian) || ack handle (16).
struct CopyCommand {
    bacap::WriteCap temp_cap;
    uint32_t count = 0;
    ReplyHandle ack_handle{};

    Bytes serialize() const;
    static CopyCommand deserialize(ByteView wire);
};

constexpr uint8_t CLIENT_MSG_COPY = 3;

/// Courier: the blind service-layer relay. Parses envelope routing
/// fields, never the enveloped message; acknowledges writes once a
/// replica has accepted them; deduplicates read envelopes and replays the
/// replica's latest response; executes copy commands without learning the
/// long-term box IDs inside the orders.
class Courier {
  public:
    struct Config {
        double cache_ttl_s = 1200.0;  // one epoch
        double rpc_timeout_s = 5.0;
        int copy_attempts = 5;
        size_t max_ciphertext = 2048;
    };

    struct Deps {
        std::function<void(size_t replica, CourierEnvelope::Kind kind, Bytes wire,
                           uint64_t req_id)>
            send_to_replica;
        std::function<void(const ReplyHandle&, Bytes reply)> send_client_reply;
        std::function<const PkiView&()> pki;
        sim::EventQueue* queue = nullptr;
    };

    Courier(size_t index, uint64_t seed, Deps deps, Config cfg);

    size_t index() const { return index_; }

    /// Entry point for anything a client sends through the mixnet.
    void handle_client_message(Bytes wire);

    /// Replies coming back over the replica links.
    void on_write_ack(uint64_t req_id, bool accepted);
    void on_read_reply(uint64_t req_id, Bytes sealed_reply);

    /// Serialization of everything the courier retains; lets tests assert
    /// structurally that no long-term box ID ever enters courier state.
    Bytes observable_state() const;

    uint64_t replica_requests_sent = 0;
    uint64_t client_acks_sent = 0;
    uint64_t copies_completed = 0;
    uint64_t copied_items_observed = 0;  // counts only; never IDs
    bool online = true;

  private:
    struct WriteEntry {
        bool acked = false;
        bool in_flight = false;
        double sent_at = 0;
        ReplyHandle handle{};
        double created = 0;
    };
    struct ReadEntry {
        bool have_reply = false;
        Bytes reply;
        bool in_flight = false;
        double sent_at = 0;
        ReplyHandle handle{};
        double created = 0;
        ByteArray<32> digest{};
    };

    struct CopyRun;

    void handle_envelope(CourierEnvelope env, Bytes wire);
    void handle_copy(CopyCommand cmd);
    void ack_client(const ReplyHandle& handle);
    size_t replica_index_for(const ByteArray<32>& replica_id) const;
    bool expired(double created) const;

    // copy-run helpers
    void copy_read_next(std::shared_ptr<CopyRun> run);
    void copy_execute_next(std::shared_ptr<CopyRun> run);
    void copy_tombstone_next(std::shared_ptr<CopyRun> run);

    size_t index_;
    sim::SimRng rng_;
    Deps deps_;
    Config cfg_;

    uint64_t next_req_ = 1;
    std::map<std::string, WriteEntry> writes_;  // digest -> state
    std::map<std::string, ReadEntry> reads_;
    std::map<uint64_t, std::string> req_to_write_;
    std::map<uint64_t, std::string> req_to_read_;
    // copy runs keyed by req id for their in-flight replica rpcs
    std::map<uint64_t, std::pair<std::shared_ptr<CopyRun>, int>> req_to_copy_;

    friend struct CopyRunAccess;
};

}  // namespace echomix::pigeonhole
