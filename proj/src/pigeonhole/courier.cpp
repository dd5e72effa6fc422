#include "echomix/pigeonhole/courier.hpp"

namespace echomix::pigeonhole {

Bytes CopyCommand::serialize() const {
    Bytes out;
    out.push_back(1);
    out.push_back(CLIENT_MSG_COPY);
    append(out, temp_cap.serialize());
    Bytes cnt(4);
    store_be32(cnt.data(), count);
    append(out, cnt);
    append(out, ByteView(ack_handle.data(), REPLY_HANDLE_SIZE));
    return out;
}

CopyCommand CopyCommand::deserialize(ByteView wire) {
    if (wire.size() != 2 + 72 + 4 + REPLY_HANDLE_SIZE)
        throw PigeonholeError("copy command: bad size");
    if (wire[0] != 1 || wire[1] != CLIENT_MSG_COPY)
        throw PigeonholeError("copy command: bad header");
    CopyCommand cmd;
    cmd.temp_cap = bacap::WriteCap::deserialize(wire.subspan(2, 72));
    cmd.count = load_be32(wire.data() + 74);
    cmd.ack_handle = to_array<REPLY_HANDLE_SIZE>(wire.subspan(78, REPLY_HANDLE_SIZE));
    return cmd;
}

namespace {

std::string digest_key(const CourierEnvelope& env) {
    // the dedup digest covers the stable envelope fields, not the reply
    // block, so a re-poll with a fresh reply block still deduplicates
    CourierEnvelope stripped = env;
    stripped.reply_handle = ReplyHandle{};
    auto d = stripped.digest();
    return std::string(reinterpret_cast<const char*>(d.data()), d.size());
}

}  // namespace

struct Courier::CopyRun {
    CopyCommand cmd;
    bacap::Context ctx{};
    std::vector<bacap::BoxKeys> keys;
    std::vector<Bytes> orders;    // decrypted write orders, temp-channel order
    size_t read_pos = 0;
    size_t read_replica_choice = 0;
    int attempts_left = 0;
    Key256 pending_dek{};
    size_t exec_pos = 0;          // counts executed orders (newest first)
    size_t tomb_pos = 0;
    uint64_t generation = 0;      // invalidates stale timeouts
};

Courier::Courier(size_t index, uint64_t seed, Deps deps, Config cfg)
    : index_(index),
      rng_(seed, "courier/" + std::to_string(index)),
      deps_(std::move(deps)),
      cfg_(cfg) {}

bool Courier::expired(double created) const {
    return deps_.queue->now() - created > cfg_.cache_ttl_s;
}

size_t Courier::replica_index_for(const ByteArray<32>& replica_id) const {
    const auto& pki = deps_.pki();
    for (size_t i = 0; i < pki.replicas.size(); ++i)
        if (pki.replicas[i].id == replica_id) return i;
    throw PigeonholeError("courier: envelope names an unknown replica");
}

void Courier::ack_client(const ReplyHandle& handle) {
    ++client_acks_sent;
    Bytes ok;
    ok.push_back(1);
    deps_.send_client_reply(handle, std::move(ok));
}

void Courier::handle_client_message(Bytes wire) {
    if (!online || wire.size() < 2) return;
    if (wire[1] == CLIENT_MSG_COPY) {
        try {
            handle_copy(CopyCommand::deserialize(wire));
        } catch (const std::exception&) {
        }
        return;
    }
    try {
        auto env = CourierEnvelope::deserialize(wire);
        handle_envelope(std::move(env), std::move(wire));
    } catch (const std::exception&) {
    }
}

void Courier::handle_envelope(CourierEnvelope env, Bytes wire) {
    auto key = digest_key(env);
    double now = deps_.queue->now();

    if (env.kind == CourierEnvelope::Kind::Write) {
        auto it = writes_.find(key);
        if (it != writes_.end() && expired(it->second.created)) {
            writes_.erase(it);
            it = writes_.end();
        }
        if (it == writes_.end()) {
            it = writes_.emplace(key, WriteEntry{}).first;
            it->second.created = now;
        }
        auto& entry = it->second;
        entry.handle = env.reply_handle;
        if (entry.acked) {
            ack_client(entry.handle);  // replayed acknowledgement
            return;
        }
        if (entry.in_flight && now - entry.sent_at < cfg_.rpc_timeout_s) return;
        entry.in_flight = true;
        entry.sent_at = now;
        for (const auto& dek : env.deks) {
            uint64_t req = next_req_++;
            req_to_write_[req] = key;
            ++replica_requests_sent;
            deps_.send_to_replica(replica_index_for(dek.replica_id), env.kind, wire, req);
        }
        return;
    }

    // read envelope
    auto it = reads_.find(key);
    if (it != reads_.end() && expired(it->second.created)) {
        reads_.erase(it);
        it = reads_.end();
    }
    if (it != reads_.end()) {
        auto& entry = it->second;
        entry.handle = env.reply_handle;
        if (entry.have_reply) {
            deps_.send_client_reply(entry.handle, entry.reply);  // replay, no replica contact
            return;
        }
        if (entry.in_flight && now - entry.sent_at < cfg_.rpc_timeout_s) return;
    } else {
        it = reads_.emplace(key, ReadEntry{}).first;
        it->second.created = now;
        it->second.handle = env.reply_handle;
    }
    auto& entry = it->second;
    entry.in_flight = true;
    entry.sent_at = now;
    if (env.deks.empty()) return;
    uint64_t req = next_req_++;
    req_to_read_[req] = key;
    ++replica_requests_sent;
    deps_.send_to_replica(replica_index_for(env.deks[0].replica_id), env.kind, wire, req);
}

void Courier::on_write_ack(uint64_t req_id, bool accepted) {
    if (!online) return;
    if (auto cit = req_to_copy_.find(req_id); cit != req_to_copy_.end()) {
        auto [run, phase] = cit->second;
        req_to_copy_.erase(cit);
        if (!accepted) return;  // the timeout path retries
        ++run->generation;
        run->attempts_left = cfg_.copy_attempts;
        if (phase == 1) {
            ++run->exec_pos;
            copy_execute_next(run);
        } else {
            ++run->tomb_pos;
            copy_tombstone_next(run);
        }
        return;
    }
    auto it = req_to_write_.find(req_id);
    if (it == req_to_write_.end()) return;
    auto key = it->second;
    req_to_write_.erase(it);
    auto wit = writes_.find(key);
    if (wit == writes_.end() || !accepted) return;
    auto& entry = wit->second;
    entry.in_flight = false;
    if (!entry.acked) {
        entry.acked = true;  // at least one replica took responsibility
        ack_client(entry.handle);
    }
}

void Courier::on_read_reply(uint64_t req_id, Bytes sealed_reply) {
    if (!online) return;
    if (auto cit = req_to_copy_.find(req_id); cit != req_to_copy_.end()) {
        auto run = cit->second.first;
        req_to_copy_.erase(cit);
        ++run->generation;
        auto plain = EnvelopeCrypto::open_reply(run->pending_dek, sealed_reply);
        bool ok = false;
        if (plain) {
            try {
                auto reply = ReadReply::deserialize(*plain);
                if (reply.found && reply.box && bacap::verify(*reply.box)) {
                    auto payload = bacap::open(run->keys[run->read_pos], *reply.box);
                    if (payload) {
                        run->orders.push_back(std::move(*payload));
                        ok = true;
                    }
                }
            } catch (const std::exception&) {
            }
        }
        if (ok) {
            ++run->read_pos;
            run->attempts_left = cfg_.copy_attempts;
            run->read_replica_choice = 0;
            copy_read_next(run);
        } else {
            ++run->read_replica_choice;
            copy_read_next(run);  // falls through to attempt accounting
        }
        return;
    }

    auto it = req_to_read_.find(req_id);
    if (it == req_to_read_.end()) return;
    // the mapping stays: a pending-read listener can answer this request
    // id again much later, and the latest response must refresh the cache
    auto key = it->second;
    auto rit = reads_.find(key);
    if (rit == reads_.end()) return;
    auto& entry = rit->second;
    // cache the latest response and answer the latest reply block
    entry.have_reply = true;
    entry.reply = std::move(sealed_reply);
    entry.in_flight = false;
    deps_.send_client_reply(entry.handle, entry.reply);
}

// ---- copy command ----

void Courier::handle_copy(CopyCommand cmd) {
    auto run = std::make_shared<CopyRun>();
    run->cmd = std::move(cmd);
    run->ctx = deps_.pki().current_context();
    auto rcap = run->cmd.temp_cap.read_cap();
    run->keys = bacap::derive_range(rcap.root_public, rcap.state, rcap.first_index,
                                    run->cmd.count, run->ctx);
    run->attempts_left = cfg_.copy_attempts;
    copy_read_next(run);
}

void Courier::copy_read_next(std::shared_ptr<CopyRun> run) {
    if (run->read_pos >= run->cmd.count) {
        // all orders in hand; execute newest first so that an aborted run
        // leaves no reader-visible prefix
        run->attempts_left = cfg_.copy_attempts;
        copy_execute_next(run);
        return;
    }
    const auto& pki = deps_.pki();
    auto shard = pki.shard_map();
    auto box_id = run->keys[run->read_pos].box_id.encode();
    auto finals = shard.select(box_id);
    if (run->read_replica_choice >= finals.size()) {
        run->read_replica_choice = 0;
        if (--run->attempts_left <= 0) return;  // abort: no ack, client retries
    }
    size_t replica = finals[run->read_replica_choice];

    Rng ephemeral_rng(rng_.next_u64());
    auto sealed = EnvelopeCrypto::seal(
        ReadPayload{to_array<32>(box_id)}.serialize(),
        {{pki.replicas[replica].id, pki.replicas[replica].epoch_public}}, ephemeral_rng);
    run->pending_dek = sealed.dek;
    CourierEnvelope env;
    env.kind = CourierEnvelope::Kind::Read;
    env.ephemeral = sealed.ephemeral;
    env.deks = sealed.deks;
    env.enveloped = sealed.enveloped;

    uint64_t req = next_req_++;
    req_to_copy_[req] = {run, 0};
    ++replica_requests_sent;
    deps_.send_to_replica(replica, env.kind, env.serialize(), req);

    uint64_t gen = run->generation;
    deps_.queue->after(cfg_.rpc_timeout_s, [this, run, req, gen] {
        if (run->generation != gen) return;  // answered in time
        req_to_copy_.erase(req);
        ++run->generation;
        ++run->read_replica_choice;
        copy_read_next(run);
    });
}

void Courier::copy_execute_next(std::shared_ptr<CopyRun> run) {
    if (run->exec_pos >= run->cmd.count) {
        run->attempts_left = cfg_.copy_attempts;
        copy_tombstone_next(run);
        return;
    }
    // newest first
    size_t idx = run->cmd.count - 1 - run->exec_pos;
    WriteOrder order;
    try {
        order = WriteOrder::deserialize(run->orders[idx]);
    } catch (const std::exception&) {
        return;  // malformed order: abort silently
    }
    if (order.deks.empty()) return;
    CourierEnvelope env;
    env.kind = CourierEnvelope::Kind::Write;
    env.ephemeral = order.ephemeral;
    env.deks = order.deks;
    env.enveloped = order.enveloped;
    auto wire = env.serialize();

    if (--run->attempts_left < 0) return;  // abort
    // alternate between the designated intermediate replicas on retries
    size_t choice = size_t(cfg_.copy_attempts - 1 - run->attempts_left) % order.deks.size();
    size_t replica = replica_index_for(order.deks[choice].replica_id);
    uint64_t req = next_req_++;
    req_to_copy_[req] = {run, 1};
    ++replica_requests_sent;
    deps_.send_to_replica(replica, env.kind, wire, req);

    uint64_t gen = run->generation;
    deps_.queue->after(cfg_.rpc_timeout_s, [this, run, req, gen] {
        if (run->generation != gen) return;
        req_to_copy_.erase(req);
        ++run->generation;
        copy_execute_next(run);
    });
}

void Courier::copy_tombstone_next(std::shared_ptr<CopyRun> run) {
    if (run->tomb_pos >= run->cmd.count) {
        ++copies_completed;
        copied_items_observed += run->cmd.count;
        ack_client(run->cmd.ack_handle);
        return;
    }
    const auto& pki = deps_.pki();
    size_t idx = run->tomb_pos;
    auto tomb = bacap::make_tombstone(run->keys[idx], run->cmd.temp_cap);

    if (--run->attempts_left < 0) return;  // abort
    // tombstones travel like any write: two uniform intermediate replicas
    size_t r1 = size_t(rng_.below(pki.replicas.size()));
    size_t r2 = size_t(rng_.below(pki.replicas.size()));
    Rng ephemeral_rng(rng_.next_u64());
    auto sealed = EnvelopeCrypto::seal(WritePayload{tomb}.serialize(),
                                       {{pki.replicas[r1].id, pki.replicas[r1].epoch_public},
                                        {pki.replicas[r2].id, pki.replicas[r2].epoch_public}},
                                       ephemeral_rng);
    CourierEnvelope env;
    env.kind = CourierEnvelope::Kind::Write;
    env.ephemeral = sealed.ephemeral;
    env.deks = sealed.deks;
    env.enveloped = sealed.enveloped;
    auto wire = env.serialize();

    uint64_t req = next_req_++;
    req_to_copy_[req] = {run, 2};
    ++replica_requests_sent;
    deps_.send_to_replica(r1, env.kind, wire, req);

    uint64_t gen = run->generation;
    deps_.queue->after(cfg_.rpc_timeout_s, [this, run, req, gen] {
        if (run->generation != gen) return;
        req_to_copy_.erase(req);
        ++run->generation;
        copy_tombstone_next(run);
    });
}

Bytes Courier::observable_state() const {
    // everything the courier retains between events, serialized; tests
    // scan this for box-id bytes to prove blindness
    Bytes out;
    for (const auto& [key, entry] : writes_) {
        append(out, to_bytes(key));
        append(out, ByteView(entry.handle.data(), REPLY_HANDLE_SIZE));
    }
    for (const auto& [key, entry] : reads_) {
        append(out, to_bytes(key));
        append(out, ByteView(entry.handle.data(), REPLY_HANDLE_SIZE));
        append(out, entry.reply);
    }
    for (const auto& [req, run_phase] : req_to_copy_) {
        const auto& run = run_phase.first;
        append(out, run->cmd.serialize());
        for (const auto& o : run->orders) append(out, o);
        for (const auto& k : run->keys) {
            auto enc = k.box_id.encode();
            append(out, ByteView(enc.data(), 32));  // temp channel ids: the courier holds these
        }
    }
    Bytes counters(32);
    store_be64(counters.data(), replica_requests_sent);
    store_be64(counters.data() + 8, client_acks_sent);
    store_be64(counters.data() + 16, copies_completed);
    store_be64(counters.data() + 24, copied_items_observed);
    append(out, counters);
    return out;
}

}  // namespace echomix::pigeonhole
