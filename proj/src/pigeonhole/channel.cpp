#include "echomix/pigeonhole/channel.hpp"

#include "echomix/crypto/hash.hpp"

namespace echomix::pigeonhole {

void FixedRateLink::send(Bytes msg) {
    sim::Time depart = std::max(queue_.now(), next_slot_);
    next_slot_ = depart + spacing_;
    ++slots_used;
    if (dropped) return;
    queue_.at(depart, [this, msg = std::move(msg)]() mutable { deliver_(std::move(msg)); });
}

PigeonholeNet::PigeonholeNet(sim::EventQueue& queue, Config cfg)
    : queue_(queue), cfg_(cfg), delay_rng_(cfg.seed, "pigeonhole/mixnet") {
    pki_.shard_k = cfg.shard_k;
    for (size_t r = 0; r < cfg.replicas; ++r) {
        replicas_.push_back(std::make_unique<Replica>(r, queue_, cfg.seed, cfg.replica_cfg));
        pki_.replicas.push_back({replicas_[r]->id(), replicas_[r]->epoch_public()});
    }
    // replica mesh links; frame: type (1) || seq (8) || payload.
    // type 0 delivers a box (acked), type 1 is the delivery ack.
    replica_mesh_.resize(cfg.replicas);
    for (size_t a = 0; a < cfg.replicas; ++a) {
        for (size_t b = 0; b < cfg.replicas; ++b) {
            if (a == b) {
                replica_mesh_[a].push_back(nullptr);
                continue;
            }
            replica_mesh_[a].push_back(std::make_unique<FixedRateLink>(
                queue_, cfg.link_rate, [this, a, b](Bytes wire) {
                    uint8_t type = wire[0];
                    uint64_t seq = load_be64(wire.data() + 1);
                    if (type == 1) {
                        replicas_[b]->on_forward_ack(seq);
                        return;
                    }
                    if (!replicas_[b]->online) return;
                    auto box = bacap::BacapBox::deserialize(ByteView(wire).subspan(9));
                    replicas_[b]->accept_replicated(box);
                    Bytes ack(9);
                    ack[0] = 1;
                    store_be64(ack.data() + 1, seq);
                    replica_mesh_[b][a]->send(std::move(ack));
                }));
        }
    }
    for (size_t r = 0; r < cfg.replicas; ++r) {
        replicas_[r]->set_forward(
            [this, r](size_t dest, uint64_t seq, const bacap::BacapBox& box) {
                Bytes framed(9);
                framed[0] = 0;
                store_be64(framed.data() + 1, seq);
                append(framed, box.serialize());
                replica_mesh_[r][dest]->send(std::move(framed));
            },
            10.0);
    }
    to_replica_.resize(cfg.couriers);
    to_courier_.resize(cfg.couriers);
    for (size_t c = 0; c < cfg.couriers; ++c) wire_courier(c);
    rotate_wsrv(to_bytes(std::string("wsrv-genesis")));
}

void PigeonholeNet::wire_courier(size_t c) {
    Courier::Deps deps;
    deps.queue = &queue_;
    deps.pki = [this]() -> const PkiView& { return pki_; };
    deps.send_client_reply = [this](const ReplyHandle& handle, Bytes reply) {
        std::string key(reinterpret_cast<const char*>(handle.data()), handle.size());
        auto it = handles_.find(key);
        if (it == handles_.end()) {
            ++replies_dropped_spent_handle;  // single-use reply block already consumed
            return;
        }
        auto fn = std::move(it->second);
        handles_.erase(it);
        double delay = 0;
        for (int h = 0; h < 4; ++h) delay += delay_rng_.exponential(1.0 / cfg_.mix_hop_mu_s);
        ++replies_delivered;
        queue_.after(delay, [fn = std::move(fn), reply = std::move(reply)]() mutable {
            fn(std::move(reply));
        });
    };
    deps.send_to_replica = [this, c](size_t r, CourierEnvelope::Kind kind, Bytes wire,
                                     uint64_t req) {
        Bytes framed(9);
        store_be64(framed.data(), req);
        framed[8] = uint8_t(kind);
        append(framed, wire);
        to_replica_[c][r]->send(std::move(framed));
    };
    couriers_.push_back(std::make_unique<Courier>(c, cfg_.seed, std::move(deps),
                                                  cfg_.courier_cfg));

    for (size_t r = 0; r < cfg_.replicas; ++r) {
        to_courier_[c].push_back(std::make_unique<FixedRateLink>(
            queue_, cfg_.link_rate, [this, c](Bytes framed) {
                uint64_t req = load_be64(framed.data());
                uint8_t tag = framed[8];
                ByteView rest = ByteView(framed).subspan(9);
                if (tag == 0) {
                    couriers_[c]->on_write_ack(req, rest[0] == 1);
                } else {
                    couriers_[c]->on_read_reply(req, to_bytes(rest));
                }
            }));
        to_replica_[c].push_back(std::make_unique<FixedRateLink>(
            queue_, cfg_.link_rate, [this, c, r](Bytes framed) {
                uint64_t req = load_be64(framed.data());
                auto kind = CourierEnvelope::Kind(framed[8]);
                if (!replicas_[r]->online) return;  // dead replicas answer nothing
                CourierEnvelope env;
                try {
                    env = CourierEnvelope::deserialize(ByteView(framed).subspan(9));
                } catch (const std::exception&) {
                    return;
                }
                if (kind == CourierEnvelope::Kind::Write) {
                    bool ok = replicas_[r]->handle_write(env, pki_.shard_map());
                    Bytes framed_reply(9);
                    store_be64(framed_reply.data(), req);
                    framed_reply[8] = 0;
                    framed_reply.push_back(ok ? 1 : 0);
                    to_courier_[c][r]->send(std::move(framed_reply));
                } else {
                    replicas_[r]->handle_read(env, [this, c, r, req](const ReplyHandle&,
                                                                     Bytes sealed) {
                        Bytes framed_reply(9);
                        store_be64(framed_reply.data(), req);
                        framed_reply[8] = 1;
                        append(framed_reply, sealed);
                        to_courier_[c][r]->send(std::move(framed_reply));
                    });
                }
            }));
    }
}

void PigeonholeNet::rotate_wsrv(ByteView public_value) {
    pki_.wsrv_history.push_back(crypto::Sha256::hash(public_value));
    ++pki_.week;
    for (auto& r : replicas_) r->enter_week(pki_.week);
}

void PigeonholeNet::rotate_epoch() {
    for (size_t r = 0; r < replicas_.size(); ++r) {
        replicas_[r]->rotate_epoch_keys();
        pki_.replicas[r].epoch_public = replicas_[r]->epoch_public();
    }
}

ReplyHandle PigeonholeNet::fresh_handle(Rng& rng) {
    ReplyHandle h;
    rng.fill(h.data(), h.size());
    return h;
}

void PigeonholeNet::client_send(size_t courier, Bytes message, ReplyHandle handle,
                                ReplyFn on_reply) {
    std::string key(reinterpret_cast<const char*>(handle.data()), handle.size());
    handles_[key] = std::move(on_reply);
    double delay = 0;
    for (int h = 0; h < 5; ++h) delay += delay_rng_.exponential(1.0 / cfg_.mix_hop_mu_s);
    queue_.after(delay, [this, courier, message = std::move(message)]() mutable {
        couriers_[courier]->handle_client_message(std::move(message));
    });
}

void PigeonholeNet::set_replica_online(size_t i, bool online) { replicas_[i]->online = online; }
void PigeonholeNet::set_courier_online(size_t i, bool online) { couriers_[i]->online = online; }

// ---- channel writer ----

struct WriteAttempt {
    CourierEnvelope env;
    size_t courier = 0;
    bool acked = false;
};

namespace {
constexpr double CLIENT_TIMEOUT_S = 25.0;
constexpr int CLIENT_ATTEMPTS = 8;
}  // namespace

struct BackfillRun {
    bacap::WriteCap temp_cap;
    std::vector<Bytes> order_wires;  // temp-channel order, new message last
    std::vector<bacap::BoxKeys> temp_keys;
    size_t write_pos = 0;
    int attempts = 0;
    int copy_attempts = 0;
    std::function<void(bool)> done;
    uint64_t new_index = 0;
    std::optional<CourierEnvelope> inflight_env;
};

ChannelWriter::ChannelWriter(bacap::WriteCap cap, PigeonholeNet& net, uint64_t seed)
    : cap_(std::move(cap)),
      net_(net),
      rng_(seed, "writer/" + to_hex(ByteView(cap_.root_public.encode().data(), 4))),
      next_index_(cap_.first_index),
      state_(cap_.state) {}

WriteOrder ChannelWriter::make_order(const bacap::BoxKeys& keys, ByteView payload) {
    auto box = bacap::seal(keys, cap_, payload);
    const auto& pki = net_.pki();
    // two intermediate replicas, chosen independently of the finals
    size_t r1 = size_t(rng_.below(pki.replicas.size()));
    size_t r2 = size_t(rng_.below(pki.replicas.size()));
    Rng erng(rng_.next_u64());
    auto sealed = EnvelopeCrypto::seal(WritePayload{box}.serialize(),
                                       {{pki.replicas[r1].id, pki.replicas[r1].epoch_public},
                                        {pki.replicas[r2].id, pki.replicas[r2].epoch_public}},
                                       erng);
    return WriteOrder{sealed.ephemeral, sealed.deks, sealed.enveloped};
}

void ChannelWriter::send_message(Bytes payload, std::function<void(bool)> done) {
    auto ctx = net_.pki().current_context();
    auto keys = bacap::derive_next(cap_.root_public, state_, next_index_, ctx);
    uint64_t idx = next_index_;
    auto order = make_order(keys, payload);

    CourierEnvelope env;
    env.kind = CourierEnvelope::Kind::Write;
    env.ephemeral = order.ephemeral;
    env.deks = order.deks;
    env.enveloped = order.enveloped;

    history_.push_back(Sent{idx, payload});
    state_ = keys.next_state;
    ++next_index_;

    auto attempt = std::make_shared<WriteAttempt>();
    attempt->env = std::move(env);
    attempt->courier = size_t(rng_.below(net_.courier_count()));
    send_attempt(attempt, 0, std::move(done), idx);
}

void ChannelWriter::send_attempt(std::shared_ptr<WriteAttempt> attempt, int tries,
                                 std::function<void(bool)> done, uint64_t idx) {
    if (tries >= CLIENT_ATTEMPTS) {
        done(false);
        return;
    }
    Rng hrng(rng_.next_u64());
    auto handle = net_.fresh_handle(hrng);
    attempt->env.reply_handle = handle;
    net_.client_send(attempt->courier, attempt->env.serialize(), handle,
                     [this, attempt, done, idx](Bytes) {
                         if (attempt->acked) return;
                         attempt->acked = true;
                         ++acks_received_;
                         last_acked_ = std::max(last_acked_, idx + 1);
                         done(true);
                     });
    net_.queue().after(CLIENT_TIMEOUT_S, [this, attempt, tries, done, idx] {
        if (attempt->acked) return;
        // same envelope, fresh reply block; the courier deduplicates
        send_attempt(attempt, tries + 1, done, idx);
    });
}

void ChannelWriter::send_with_backfill(Bytes new_payload, std::function<void(bool)> done) {
    auto ctx = net_.pki().current_context();
    uint64_t new_idx = next_index_;

    auto run = std::make_shared<BackfillRun>();
    Rng crng(rng_.next_u64());
    run->temp_cap = bacap::WriteCap::generate(crng);
    run->done = std::move(done);
    run->new_index = new_idx;

    // orders for every message sent so far plus the triggering one, which
    // goes last in the temporary channel
    size_t count = history_.size() + 1;
    auto lt_keys = bacap::derive_range(cap_.root_public, cap_.state, cap_.first_index,
                                       next_index_ - cap_.first_index + 1, ctx);
    for (const auto& sent : history_) {
        const auto& keys = lt_keys[sent.index - cap_.first_index];
        run->order_wires.push_back(make_order(keys, sent.payload).serialize());
    }
    run->order_wires.push_back(
        make_order(lt_keys[new_idx - cap_.first_index], new_payload).serialize());

    history_.push_back(Sent{new_idx, new_payload});
    state_ = bacap::chain_next_state(state_, new_idx);
    ++next_index_;

    run->temp_keys = bacap::derive_range(run->temp_cap.root_public, run->temp_cap.state,
                                         run->temp_cap.first_index, count, ctx);
    write_temp_box(run, 0);
}

void ChannelWriter::write_temp_box(std::shared_ptr<BackfillRun> run, size_t i) {
    if (i >= run->order_wires.size()) {
        send_copy(run, 0);
        return;
    }
    const auto& pki = net_.pki();
    auto box = bacap::seal(run->temp_keys[i], run->temp_cap, run->order_wires[i]);
    size_t r1 = size_t(rng_.below(pki.replicas.size()));
    size_t r2 = size_t(rng_.below(pki.replicas.size()));
    Rng erng(rng_.next_u64());
    auto sealed = EnvelopeCrypto::seal(WritePayload{box}.serialize(),
                                       {{pki.replicas[r1].id, pki.replicas[r1].epoch_public},
                                        {pki.replicas[r2].id, pki.replicas[r2].epoch_public}},
                                       erng);
    auto attempt = std::make_shared<WriteAttempt>();
    attempt->env.kind = CourierEnvelope::Kind::Write;
    attempt->env.ephemeral = sealed.ephemeral;
    attempt->env.deks = sealed.deks;
    attempt->env.enveloped = sealed.enveloped;
    attempt->courier = size_t(rng_.below(net_.courier_count()));
    send_temp_attempt(run, attempt, i, 0);
}

void ChannelWriter::send_temp_attempt(std::shared_ptr<BackfillRun> run,
                                      std::shared_ptr<WriteAttempt> attempt, size_t i,
                                      int tries) {
    if (tries >= CLIENT_ATTEMPTS) {
        run->done(false);  // backfill failed before the copy was issued
        return;
    }
    Rng hrng(rng_.next_u64());
    auto handle = net_.fresh_handle(hrng);
    attempt->env.reply_handle = handle;
    net_.client_send(attempt->courier, attempt->env.serialize(), handle,
                     [this, run, attempt, i](Bytes) {
                         if (attempt->acked) return;
                         attempt->acked = true;
                         write_temp_box(run, i + 1);
                     });
    net_.queue().after(CLIENT_TIMEOUT_S, [this, run, attempt, i, tries] {
        if (attempt->acked) return;
        attempt->courier = size_t(rng_.below(net_.courier_count()));
        send_temp_attempt(run, attempt, i, tries + 1);
    });
}

void ChannelWriter::send_copy(std::shared_ptr<BackfillRun> run, int tries) {
    if (tries >= CLIENT_ATTEMPTS) {
        run->done(false);
        return;
    }
    CopyCommand cmd;
    cmd.temp_cap = run->temp_cap;
    cmd.count = uint32_t(run->order_wires.size());
    Rng hrng(rng_.next_u64());
    cmd.ack_handle = net_.fresh_handle(hrng);
    size_t courier = size_t(rng_.below(net_.courier_count()));

    auto acked = std::make_shared<bool>(false);
    net_.client_send(courier, cmd.serialize(), cmd.ack_handle, [this, run, acked](Bytes) {
        if (*acked) return;
        *acked = true;
        ++acks_received_;
        last_acked_ = std::max(last_acked_, run->new_index + 1);
        run->done(true);
    });
    net_.queue().after(CLIENT_TIMEOUT_S * 3, [this, run, acked, tries] {
        if (*acked) return;
        send_copy(run, tries + 1);  // a different random courier each time
    });
}

// ---- channel reader ----

ChannelReader::ChannelReader(bacap::ReadCap cap, PigeonholeNet& net, uint64_t seed, Config cfg)
    : cap_(std::move(cap)),
      net_(net),
      rng_(seed, "reader/" + to_hex(ByteView(cap_.root_public.encode().data(), 4))),
      cfg_(cfg),
      cursor_(cap_.first_index),
      state_(cap_.state),
      courier_(0) {}

void ChannelReader::start(double first_delay_s) {
    running_ = true;
    courier_ = size_t(rng_.below(net_.courier_count()));
    net_.queue().after(first_delay_s, [this] { poll(); });
}

void ChannelReader::build_envelope() {
    const auto& pki = net_.pki();
    size_t lookback = std::min(cfg_.wsrv_lookback, pki.wsrv_history.size());
    size_t which = ctx_choice_ % lookback;
    const auto& wsrv = pki.wsrv_history[pki.wsrv_history.size() - 1 - which];
    auto ctx = bacap::Context::of(wsrv);
    keys_ = bacap::derive_next(cap_.root_public, state_, cursor_, ctx);

    auto box_id = keys_->box_id.encode();
    auto finals = pki.shard_map().select(box_id);
    size_t replica = finals[size_t(rng_.below(finals.size()))];

    Rng erng(rng_.next_u64());
    auto sealed =
        EnvelopeCrypto::seal(ReadPayload{box_id}.serialize(),
                             {{pki.replicas[replica].id, pki.replicas[replica].epoch_public}},
                             erng);
    CourierEnvelope env;
    env.kind = CourierEnvelope::Kind::Read;
    env.ephemeral = sealed.ephemeral;
    env.deks = sealed.deks;
    envelope_dek_ = sealed.dek;
    env.enveloped = sealed.enveloped;
    env_ = env;
}

void ChannelReader::poll() {
    if (!running_) return;
    if (!env_ || !keys_) build_envelope();

    Rng hrng(rng_.next_u64());
    pending_handle_ = net_.fresh_handle(hrng);
    env_->reply_handle = pending_handle_;
    net_.client_send(courier_, env_->serialize(), pending_handle_,
                     [this](Bytes sealed) { handle_reply(std::move(sealed)); });
    net_.queue().after(cfg_.poll_period_s, [this] { poll(); });
}

void ChannelReader::handle_reply(Bytes sealed) {
    if (!running_ || !keys_) return;
    auto plain = EnvelopeCrypto::open_reply(envelope_dek_, sealed);
    if (!plain) return;
    ReadReply reply;
    try {
        reply = ReadReply::deserialize(*plain);
    } catch (const std::exception&) {
        return;
    }
    if (reply.found && reply.box && reply.box->box_id == keys_->box_id.encode()) {
        std::optional<Bytes> payload;
        try {
            payload = bacap::open(*keys_, *reply.box);
        } catch (const bacap::BacapError&) {
            return;  // replica lied; keep polling
        }
        if (payload) {
            received_.push_back(Received{cursor_, false, std::move(*payload)});
        } else {
            received_.push_back(Received{cursor_, true, {}});
        }
        // ratchet forward, drop the passed state
        state_ = bacap::chain_next_state(state_, cursor_);
        ++cursor_;
        ctx_choice_ = 0;
        retries_ = 0;
        env_.reset();
        keys_.reset();
        courier_ = size_t(rng_.below(net_.courier_count()));
        return;
    }
    // negative acknowledgement: retry the same envelope through the same
    // courier; rotate courier and context after a while
    ++retries_;
    if (retries_ % cfg_.retries_before_rotate == 0) {
        courier_ = size_t(rng_.below(net_.courier_count()));
        ++ctx_choice_;
        env_.reset();  // fresh envelope (new ephemeral) for the new courier
    }
}

}  // namespace echomix::pigeonhole
