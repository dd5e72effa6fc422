#pragma once

#include "echomix/pigeonhole/courier.hpp"

namespace echomix::pigeonhole {

/// Constant-rate unidirectional link. Messages depart at fixed spacing;
/// idle slots stand for dummy fill, so a watcher of the link sees the
/// same cadence whether or not real traffic flows (tracked by the slot
/// counters, not simulated per-slot).
class FixedRateLink {
  public:
    FixedRateLink(sim::EventQueue& queue, double rate, std::function<void(Bytes)> deliver)
        : queue_(queue), spacing_(1.0 / rate), deliver_(std::move(deliver)) {}

    void send(Bytes msg);

    bool dropped = false;  // fault injection: slots keep ticking, payloads vanish
    uint64_t slots_used = 0;

  private:
    sim::EventQueue& queue_;
    double spacing_;
    std::function<void(Bytes)> deliver_;
    sim::Time next_slot_ = 0;
};

/// Wires clients, couriers, replicas and the links between them onto one
/// event queue. The client-courier leg abstracts the mixnet: forward
/// messages arrive after an Erlang(5) delay, replies after Erlang(4);
/// reply handles stand in for single-use reply blocks and are consumed on
/// first use.
class PigeonholeNet {
  public:
    struct Config {
        size_t replicas = 10;
        size_t couriers = 4;
        size_t shard_k = 2;
        double link_rate = 200.0;     // messages/s on each fixed-rate link
        double mix_hop_mu_s = 0.05;   // per-hop mean for the abstracted mixnet legs
        uint64_t seed = 1;
        Replica::Config replica_cfg;
        Courier::Config courier_cfg;
    };

    PigeonholeNet(sim::EventQueue& queue, Config cfg);

    sim::EventQueue& queue() { return queue_; }
    const PkiView& pki() const { return pki_; }
    Replica& replica(size_t i) { return *replicas_[i]; }
    Courier& courier(size_t i) { return *couriers_[i]; }
    size_t replica_count() const { return replicas_.size(); }
    size_t courier_count() const { return couriers_.size(); }

    /// Publish a new weekly value: replicas open a new bucket and drop
    /// the oldest; clients pick up the context from the PKI view.
    void rotate_wsrv(ByteView public_value);
    /// Epoch boundary: replicas rotate their envelope keys.
    void rotate_epoch();

    using ReplyFn = std::function<void(Bytes)>;
    /// Client-side send through the mixnet to a courier; on_reply fires
    /// for each reply block consumed (each send carries exactly one).
    void client_send(size_t courier, Bytes message, ReplyHandle handle, ReplyFn on_reply);
    ReplyHandle fresh_handle(Rng& rng);

    // fault injection
    void set_replica_online(size_t i, bool online);
    void set_courier_online(size_t i, bool online);

    uint64_t replies_delivered = 0;
    uint64_t replies_dropped_spent_handle = 0;

  private:
    void wire_courier(size_t c);

    sim::EventQueue& queue_;
    Config cfg_;
    sim::SimRng delay_rng_;
    PkiView pki_;
    std::vector<std::unique_ptr<Replica>> replicas_;
    std::vector<std::unique_ptr<Courier>> couriers_;
    // link[c][r]: courier->replica; rlink[c][r]: replica->courier
    std::vector<std::vector<std::unique_ptr<FixedRateLink>>> to_replica_;
    std::vector<std::vector<std::unique_ptr<FixedRateLink>>> to_courier_;
    std::vector<std::vector<std::unique_ptr<FixedRateLink>>> replica_mesh_;
    std::map<std::string, ReplyFn> handles_;
};

struct BackfillRun;
struct WriteAttempt;

/// Writer endpoint of one BACAP channel. Sends are user-triggered; an
/// acknowledgement only ever advances. Retransmission happens solely
/// through send_with_backfill, which rides a new message.
class ChannelWriter {
  public:
    ChannelWriter(bacap::WriteCap cap, PigeonholeNet& net, uint64_t seed);

    /// Write the next message; done(true) once a courier acknowledges.
    /// Unacknowledged envelopes are re-sent unchanged on a timer, as the
    /// user-visible part of one send.
    void send_message(Bytes payload, std::function<void(bool)> done);

    /// All-or-nothing backfill: re-writes every message sent so far plus
    /// `new_payload` (the triggering message, last in the temporary
    /// channel), via the copy command.
    void send_with_backfill(Bytes new_payload, std::function<void(bool)> done);

    uint64_t last_acked() const { return last_acked_; }
    uint64_t acks_received() const { return acks_received_; }
    size_t messages_sent() const { return history_.size(); }
    const bacap::WriteCap& cap() const { return cap_; }

  private:
    struct Sent {
        uint64_t index;
        Bytes payload;
    };

    WriteOrder make_order(const bacap::BoxKeys& keys, ByteView payload);
    void send_attempt(std::shared_ptr<WriteAttempt> attempt, int tries,
                      std::function<void(bool)> done, uint64_t idx);
    void write_temp_box(std::shared_ptr<BackfillRun> run, size_t i);
    void send_temp_attempt(std::shared_ptr<BackfillRun> run, std::shared_ptr<WriteAttempt> attempt,
                           size_t i, int tries);
    void send_copy(std::shared_ptr<BackfillRun> run, int tries);

    bacap::WriteCap cap_;
    PigeonholeNet& net_;
    sim::SimRng rng_;
    uint64_t next_index_;
    crypto::KdfState state_;
    uint64_t last_acked_ = 0;
    uint64_t acks_received_ = 0;
    std::vector<Sent> history_;
};

/// Reader endpoint: polls the next box, retries with the same envelope
/// through the same courier, rotates courier (with a fresh envelope)
/// after a configurable number of retries, and tries recent weekly
/// contexts so reads spanning a rotation still land.
class ChannelReader {
  public:
    struct Config {
        double poll_period_s = 3.0;
        int retries_before_rotate = 8;
        size_t wsrv_lookback = 3;
    };

    ChannelReader(bacap::ReadCap cap, PigeonholeNet& net, uint64_t seed, Config cfg);
    ChannelReader(bacap::ReadCap cap, PigeonholeNet& net, uint64_t seed)
        : ChannelReader(std::move(cap), net, seed, Config()) {}

    void start(double first_delay_s = 1.0);
    void stop() { running_ = false; }

    /// Messages received so far, channel order. Tombstoned boxes appear
    /// as empty payload markers.
    struct Received {
        uint64_t index;
        bool tombstone;
        Bytes payload;
    };
    const std::vector<Received>& received() const { return received_; }
    uint64_t cursor() const { return cursor_; }

  private:
    void poll();
    void handle_reply(Bytes sealed);
    void build_envelope();

    bacap::ReadCap cap_;
    PigeonholeNet& net_;
    sim::SimRng rng_;
    Config cfg_;
    uint64_t cursor_;
    crypto::KdfState state_;
    bool running_ = false;
    std::vector<Received> received_;

    // current poll target
    size_t ctx_choice_ = 0;  // 0 = newest wsrv, 1 = previous, ...
    int retries_ = 0;
    size_t courier_ = 0;
    std::optional<bacap::BoxKeys> keys_;
    std::optional<CourierEnvelope> env_;
    Key256 envelope_dek_{};
    ReplyHandle pending_handle_{};
};

}  // namespace echomix::pigeonhole
