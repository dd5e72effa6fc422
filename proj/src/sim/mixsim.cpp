#include "echomix/sim/mixsim.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "echomix/sphinx/geometry.hpp"
#include "echomix/stats.hpp"

namespace echomix::sim {

double RunStats::mean_rtt() const {
    if (rtts.empty()) return 0;
    double s = 0;
    for (double r : rtts) s += r;
    return s / double(rtts.size());
}

double RunStats::rtt_tail_fraction(double threshold) const {
    if (rtts.empty()) return 0;
    uint64_t n = 0;
    for (double r : rtts) n += r > threshold;
    return double(n) / double(rtts.size());
}

std::vector<double> final_hop_z_scores(const RunStats& stats) {
    const auto& counts = stats.final_hop_counts;
    if (counts.empty()) return {};
    double total = 0;
    for (auto c : counts) total += double(c);
    double mean = total / double(counts.size());
    std::vector<double> z(counts.size());
    for (size_t i = 0; i < counts.size(); ++i) z[i] = stats::poisson_z(double(counts[i]), mean);
    return z;
}

double coupon_bound_packets_per_mu(size_t layer_width, size_t gateways) {
    double n = double(layer_width);
    return n * stats::harmonic(unsigned(layer_width)) * n / double(gateways);
}

namespace {

enum class PacketKind { Decoy, App, Heartbeat };

struct Packet {
    uint64_t id = 0;
    PacketKind kind = PacketKind::Decoy;
    std::vector<int> route;     // delay-node indices, in order
    Time emitted = 0;
    int origin_endpoint = -1;   // client id or heartbeat origin node
    int dest_service = -1;      // index into the service/provider family
    size_t final_hop_pos = 0;   // route position of the counted final hop
    uint64_t hb_seq = 0;
};

struct QueueEntry {
    uint64_t packet_id;
    Time release;
    uint64_t arrival_seq;
};

struct HeartbeatState {
    std::vector<std::pair<int, int>> links;
    bool returned = false;
};

constexpr size_t SNAPSHOT_BINS = 10;
constexpr uint64_t WARMUP_WINDOWS = 25;

}  // namespace

struct MixSim::Impl {
    ScenarioConfig cfg;
    EventQueue queue;
    RunStats stats;
    ObservationSink sink;

    // topology: gateways/providers, 3 mix layers, services
    size_t G, N, S;
    size_t delay_nodes;  // G + 3N + S
    double lambda;
    size_t wire_size;

    std::vector<SimRng> node_rng;       // per delay node
    std::vector<SimRng> client_rng;     // per client
    std::vector<std::vector<QueueEntry>> queues;
    uint64_t arrival_seq = 0;
    uint64_t next_packet_id = 0;

    // coupling state per client
    std::vector<std::vector<int>> app_queue;   // pending app destinations
    std::vector<uint64_t> emission_counter;
    std::vector<int> last_dest;

    // faults
    struct ActiveFault {
        std::string src, dst;
        bool node_down;
    };
    std::vector<ActiveFault> active_faults;

    // link-coverage windows (forward mix-layer crossings)
    int64_t cur_window = -1;
    std::vector<bool> window_links;
    size_t window_active = 0;

    // heartbeats
    std::map<uint64_t, HeartbeatState> hb_inflight;
    uint64_t hb_seq = 0;
    std::map<std::pair<int, int>, std::pair<uint64_t, uint64_t>> hb_link_counts;  // sent, returned

    // gateway decoys
    std::vector<double> gw_decoy_rate;
    std::vector<uint64_t> gw_client_traffic_epoch;

    explicit Impl(const ScenarioConfig& c) : cfg(c) {
        G = cfg.gateways;
        N = cfg.layer_width;
        S = cfg.services;
        delay_nodes = G + 3 * N + S;
        lambda = 1.0 / cfg.mu_s;
        auto geom = sphinx::geometry(sphinx::suite_sizes(cfg.sphinx_suite), 5, cfg.payload_size);
        wire_size = geom.packet_size;

        for (size_t i = 0; i < delay_nodes; ++i)
            node_rng.emplace_back(cfg.seed, "node/" + node_name(int(i)));
        for (size_t i = 0; i < cfg.clients; ++i)
            client_rng.emplace_back(cfg.seed, "client/" + std::to_string(i));
        queues.resize(delay_nodes);
        app_queue.resize(cfg.clients);
        emission_counter.assign(cfg.clients, 0);
        last_dest.assign(cfg.clients, 0);
        stats.emission_dest_counts.assign(S, 0);
        stats.final_hop_counts.assign(final_hop_family_size(), 0);
        stats.snapshot_bins.assign(SNAPSHOT_BINS, 0);
        stats.snapshot_expected.assign(SNAPSHOT_BINS, 0.0);
        window_links.assign(2 * N * N, false);
        gw_decoy_rate.assign(G, 0.0);
        gw_client_traffic_epoch.assign(G, 0);
    }

    // ---- node naming ----

    size_t final_hop_family_size() const { return cfg.mode == Mode::Loopix ? G : S; }

    int gw_idx(size_t i) const { return int(i); }
    int mix_idx(size_t layer, size_t i) const { return int(G + layer * N + i); }
    int svc_idx(size_t i) const { return int(G + 3 * N + i); }
    int client_endpoint(size_t i) const { return int(delay_nodes + i); }

    bool is_mix(int idx) const { return idx >= int(G) && idx < int(G + 3 * N); }
    int mix_layer(int idx) const { return (idx - int(G)) / int(N); }  // 0,1,2
    int mix_pos(int idx) const { return (idx - int(G)) % int(N); }

    std::string node_name(int idx) const {
        if (idx < 0) return "none";
        if (idx < int(G)) {
            return (cfg.mode == Mode::Loopix ? "prov" : "gw") + std::to_string(idx);
        }
        if (idx < int(G + 3 * N)) {
            int layer = mix_layer(idx) + 1;
            return "mix" + std::to_string(layer) + "-" + std::to_string(mix_pos(idx));
        }
        if (idx < int(delay_nodes)) return "svc" + std::to_string(idx - int(G + 3 * N));
        return "client" + std::to_string(idx - int(delay_nodes));
    }

    int node_index(const std::string& name) const {
        for (size_t i = 0; i < delay_nodes + cfg.clients; ++i)
            if (node_name(int(i)) == name) return int(i);
        throw ConfigError("unknown node name '" + name + "'");
    }

    // ---- faults ----

    bool link_faulted(int a, int b) const {
        if (active_faults.empty()) return false;
        auto an = node_name(a), bn = node_name(b);
        for (const auto& f : active_faults) {
            if (f.node_down) {
                if (f.src == an || f.src == bn) return true;
            } else if (f.src == an && f.dst == bn) {
                return true;
            }
        }
        return false;
    }

    // ---- observations ----

    void fold_hash(uint64_t x) {
        uint64_t h = stats.trace_hash ? stats.trace_hash : 0xcbf29ce484222325ULL;
        for (int i = 0; i < 8; ++i) {
            h ^= (x >> (8 * i)) & 0xff;
            h *= 0x100000001b3ULL;
        }
        stats.trace_hash = h;
    }

    void crossing(int src, int dst, Time t) {
        uint64_t tbits;
        static_assert(sizeof(double) == 8);
        std::memcpy(&tbits, &t, 8);
        fold_hash(tbits);
        fold_hash((uint64_t(uint32_t(src)) << 32) | uint32_t(dst));
        if (sink) sink(LinkObservation{t, src, dst, wire_size}, node_name(src), node_name(dst));

        // forward inter-layer windows
        if (is_mix(src) && is_mix(dst)) {
            int ls = mix_layer(src), ld = mix_layer(dst);
            if (ld == ls + 1) {
                size_t link = size_t(ls) * N * N + size_t(mix_pos(src)) * N + size_t(mix_pos(dst));
                int64_t w = int64_t(t / cfg.mu_s);
                roll_window(w);
                if (!window_links[link]) {
                    window_links[link] = true;
                    ++window_active;
                }
            }
        }
    }

    void roll_window(int64_t w) {
        if (cur_window < 0) {
            cur_window = w;
            return;
        }
        while (cur_window < w) {
            if (uint64_t(cur_window) >= WARMUP_WINDOWS) {
                ++stats.windows_total;
                if (window_active == window_links.size()) ++stats.windows_all_links_active;
            }
            std::fill(window_links.begin(), window_links.end(), false);
            window_active = 0;
            ++cur_window;
        }
    }

    // ---- packet movement ----

    void emit(Packet pkt, int from_endpoint) {
        ++stats.emitted;
        pkt.id = next_packet_id++;
        Time t = queue.now();
        pkt.emitted = t;
        if (link_faulted(from_endpoint, pkt.route[0])) {
            ++stats.dropped_fault;
            return;
        }
        crossing(from_endpoint, pkt.route[0], t);
        arrive(std::move(pkt), 0);
    }

    void arrive(Packet pkt, size_t pos) {
        Time t = queue.now();
        int node = pkt.route[pos];

        if (pkt.kind == PacketKind::Heartbeat && pos + 1 == pkt.route.size()) {
            // back at the origin; loops past their timeout no longer count
            auto it = hb_inflight.find(pkt.hb_seq);
            if (it != hb_inflight.end() && !it->second.returned) {
                it->second.returned = true;
                ++stats.heartbeats_returned;
                for (auto& l : it->second.links) ++hb_link_counts[l].second;
            }
            ++stats.delivered;
            return;
        }

        if (pkt.kind != PacketKind::Heartbeat && pos == pkt.final_hop_pos && pkt.dest_service >= 0)
            ++stats.final_hop_counts[size_t(pkt.dest_service)];

        double d = node_rng[size_t(node)].exponential(lambda);
        if (stats.hop_delays.size() < cfg.max_hop_delay_samples) stats.hop_delays.push_back(d);
        queues[size_t(node)].push_back(QueueEntry{pkt.id, t + d, arrival_seq++});
        uint64_t id = pkt.id;
        queue.at(t + d, [this, pkt = std::move(pkt), pos, node, id]() mutable {
            auto& q = queues[size_t(node)];
            for (size_t i = 0; i < q.size(); ++i) {
                if (q[i].packet_id == id) {
                    q.erase(q.begin() + long(i));
                    break;
                }
            }
            release(std::move(pkt), pos);
        });
    }

    void release(Packet pkt, size_t pos) {
        Time t = queue.now();
        int node = pkt.route[pos];
        if (pos + 1 == pkt.route.size()) {
            if (pkt.kind == PacketKind::Heartbeat) return;  // handled on arrival
            ++stats.delivered;
            if (cfg.mode == Mode::Echomix && pkt.origin_endpoint >= 0) {
                // echo reply reaches the waiting client
                crossing(node, client_endpoint(size_t(pkt.origin_endpoint)), t);
                ++stats.echoes_completed;
                if (stats.rtts.size() < cfg.max_rtt_samples) stats.rtts.push_back(t - pkt.emitted);
            } else if (cfg.mode == Mode::Loopix && pkt.origin_endpoint >= 0) {
                // one-way delivery latency (5 delay nodes)
                if (stats.rtts.size() < cfg.max_rtt_samples) stats.rtts.push_back(t - pkt.emitted);
            }
            // gateway decoy loops end at the node itself
            return;
        }
        int next = pkt.route[pos + 1];
        if (link_faulted(node, next)) {
            ++stats.dropped_fault;
            return;
        }
        crossing(node, next, t);
        arrive(std::move(pkt), pos + 1);
    }

    // ---- route construction ----

    std::vector<int> echo_route(SimRng& rng, int gw, int svc) {
        std::vector<int> r;
        r.reserve(9);
        r.push_back(gw);
        r.push_back(mix_idx(0, rng.below(N)));
        r.push_back(mix_idx(1, rng.below(N)));
        r.push_back(mix_idx(2, rng.below(N)));
        r.push_back(svc_idx(size_t(svc)));
        r.push_back(mix_idx(2, rng.below(N)));
        r.push_back(mix_idx(1, rng.below(N)));
        r.push_back(mix_idx(0, rng.below(N)));
        r.push_back(gw);
        return r;
    }

    std::vector<int> loopix_route(SimRng& rng, int provider, int dest_provider) {
        std::vector<int> r;
        r.reserve(5);
        r.push_back(provider);
        r.push_back(mix_idx(0, rng.below(N)));
        r.push_back(mix_idx(1, rng.below(N)));
        r.push_back(mix_idx(2, rng.below(N)));
        r.push_back(dest_provider);
        return r;
    }

    int provider_of(size_t client) const { return int(client % G); }

    // ---- client scheduling ----

    bool take_app(size_t client) {
        if (app_queue[client].empty()) return false;
        const auto& policy = cfg.coupling_policy;
        if (policy == "app-first") return true;
        if (policy == "burst") return (emission_counter[client] / 10) % 2 == 0;
        if (policy == "parity") return last_dest[client] % 2 == 0;
        return true;
    }

    bool client_offline(size_t client, Time t) const {
        if (cfg.churn_period_s <= 0 || cfg.churn_offline_fraction <= 0) return false;
        uint64_t period = uint64_t(t / cfg.churn_period_s);
        SimRng probe(cfg.seed,
                     "churn/" + std::to_string(client) + "/" + std::to_string(period));
        return probe.uniform01() < cfg.churn_offline_fraction;
    }

    void client_emit(size_t client) {
        Time t = queue.now();
        if (t >= cfg.duration_s) return;
        auto& rng = client_rng[client];
        if (client_offline(client, t)) {
            double gap = rng.exponential(cfg.client_send_rate);
            if (t + gap < cfg.duration_s)
                queue.at(t + gap, [this, client] { client_emit(client); });
            return;
        }

        bool app = take_app(client);
        int dest;
        bool covered = true;
        if (app) {
            dest = app_queue[client].front();
            app_queue[client].erase(app_queue[client].begin());
            if (cfg.broken_client && client == 0) covered = false;
            if (cfg.mode == Mode::Loopix) covered = false;  // fixed final hop
        } else {
            dest = int(rng.below(cfg.mode == Mode::Loopix ? G : S));
        }
        if (!covered) ++stats.coupling_violations;
        ++emission_counter[client];
        last_dest[client] = dest;

        Packet pkt;
        pkt.kind = app ? PacketKind::App : PacketKind::Decoy;
        pkt.origin_endpoint = int(client);
        pkt.dest_service = dest;
        if (cfg.mode == Mode::Echomix) {
            ++stats.emission_dest_counts[size_t(dest)];
            int gw = int(rng.below(G));
            gw_client_traffic_epoch[size_t(gw)]++;
            pkt.route = echo_route(rng, gw_idx(size_t(gw)), dest);
            pkt.final_hop_pos = 4;
        } else {
            int prov = provider_of(client);
            pkt.route = loopix_route(rng, prov, gw_idx(size_t(dest)));
            pkt.final_hop_pos = 4;
        }
        emit(std::move(pkt), client_endpoint(client));

        double gap = rng.exponential(cfg.client_send_rate);
        if (t + gap < cfg.duration_s)
            queue.at(t + gap, [this, client] { client_emit(client); });
    }

    // ---- gateway decoys ----

    void gateway_emit(size_t gw) {
        Time t = queue.now();
        if (t >= cfg.duration_s || gw_decoy_rate[gw] <= 0) return;
        auto& rng = node_rng[size_t(gw_idx(gw))];
        Packet pkt;
        pkt.kind = PacketKind::Decoy;
        pkt.origin_endpoint = -1;
        pkt.dest_service = int(rng.below(S));
        pkt.route = echo_route(rng, gw_idx(gw), pkt.dest_service);
        pkt.final_hop_pos = 4;
        // node-originated: enters the network at the gateway itself
        ++stats.emitted;
        pkt.id = next_packet_id++;
        pkt.emitted = t;
        arrive_from_gateway(std::move(pkt));

        double gap = rng.exponential(gw_decoy_rate[gw]);
        if (t + gap < cfg.duration_s)
            queue.at(t + gap, [this, gw] { gateway_emit(gw); });
    }

    void arrive_from_gateway(Packet pkt) { arrive(std::move(pkt), 0); }

    void recompute_decoy_rates() {
        if (!cfg.gateway_decoys) return;
        double target =
            cfg.gateway_coupon_factor * coupon_bound_packets_per_mu(N, G) / cfg.mu_s;
        for (size_t g = 0; g < G; ++g) {
            double measured = double(gw_client_traffic_epoch[g]) / cfg.epoch_s;
            double rate = std::max(0.0, target - measured);
            bool was_idle = gw_decoy_rate[g] <= 0;
            gw_decoy_rate[g] = rate;
            gw_client_traffic_epoch[g] = 0;
            if (was_idle && rate > 0 && queue.now() < cfg.duration_s)
                queue.after(node_rng[size_t(gw_idx(g))].exponential(rate),
                            [this, g] { gateway_emit(g); });
        }
    }

    // ---- heartbeats ----

    std::vector<int> heartbeat_route(int origin, SimRng& rng) {
        std::vector<int> r;
        if (origin < int(G)) {
            r = echo_route(rng, origin, int(rng.below(S)));
        } else if (is_mix(origin)) {
            int layer = mix_layer(origin);
            r.push_back(origin);
            for (int l = layer + 1; l < 3; ++l) r.push_back(mix_idx(size_t(l), rng.below(N)));
            r.push_back(svc_idx(rng.below(S)));
            for (int l = 2; l > layer; --l) r.push_back(mix_idx(size_t(l), rng.below(N)));
            r.push_back(origin);
        }
        return r;
    }

    void heartbeat_emit(int origin) {
        Time t = queue.now();
        if (t >= cfg.duration_s) return;
        auto& rng = node_rng[size_t(origin)];
        Packet pkt;
        pkt.kind = PacketKind::Heartbeat;
        pkt.origin_endpoint = origin;
        pkt.hb_seq = hb_seq++;
        pkt.route = heartbeat_route(origin, rng);

        HeartbeatState st;
        for (size_t i = 0; i + 1 < pkt.route.size(); ++i) {
            auto link = std::make_pair(pkt.route[i], pkt.route[i + 1]);
            st.links.push_back(link);
            ++hb_link_counts[link].first;
        }
        uint64_t id = pkt.hb_seq;
        hb_inflight.emplace(id, std::move(st));
        ++stats.heartbeats_sent;
        queue.at(t + cfg.heartbeat_timeout_s, [this, id] { hb_inflight.erase(id); });

        ++stats.emitted;
        pkt.id = next_packet_id++;
        pkt.emitted = t;
        arrive(std::move(pkt), 0);

        double gap = rng.exponential(1.0 / cfg.heartbeat_period_s);
        if (t + gap < cfg.duration_s)
            queue.at(t + gap, [this, origin] { heartbeat_emit(origin); });
    }

    void upload_ratings() {
        std::map<std::string, double> ratings;
        for (auto& [link, counts] : hb_link_counts) {
            if (counts.first == 0) continue;
            ratings[node_name(link.first) + ">" + node_name(link.second)] =
                double(counts.second) / double(counts.first);
        }
        stats.epoch_link_ratings.push_back(std::move(ratings));
        hb_link_counts.clear();
    }

    // ---- snapshots ----

    void snapshot() {
        Time t = queue.now();
        if (t >= cfg.duration_s) return;
        for (size_t n = G; n < G + 3 * N; ++n) {
            const auto& q = queues[n];
            size_t qs = q.size();
            if (qs < 2) continue;
            size_t next_i = 0;
            for (size_t i = 1; i < qs; ++i)
                if (q[i].release < q[next_i].release) next_i = i;
            size_t rank = 0;
            for (size_t i = 0; i < qs; ++i)
                if (q[i].arrival_seq < q[next_i].arrival_seq) ++rank;
            ++stats.snapshot_bins[rank * SNAPSHOT_BINS / qs];
            for (size_t j = 0; j < qs; ++j)
                stats.snapshot_expected[j * SNAPSHOT_BINS / qs] += 1.0 / double(qs);
            ++stats.snapshots_taken;
        }
        queue.after(cfg.snapshot_period_s, [this] { snapshot(); });
    }

    // ---- conversation ----

    void conversation_tick() {
        Time t = queue.now();
        if (!cfg.conversation || t >= cfg.duration_s) return;
        auto conv = *cfg.conversation;
        if (cfg.mode == Mode::Loopix) {
            // the receiver's provider is the unavoidable final hop
            app_queue[conv.sender].push_back(provider_of(conv.receiver));
        } else {
            // writes go to a fresh uniformly chosen courier; the receiver
            // polls an equally uniform one
            SimRng& srng = client_rng[conv.sender];
            app_queue[conv.sender].push_back(int(srng.below(S)));
            SimRng& rrng = client_rng[conv.receiver];
            app_queue[conv.receiver].push_back(int(rrng.below(S)));
        }
        queue.after(conv.period_s, [this] { conversation_tick(); });
    }

    void broken_client_tick() {
        Time t = queue.now();
        if (!cfg.broken_client || t >= cfg.duration_s || cfg.clients == 0) return;
        app_queue[0].push_back(0);  // always the same favourite service
        queue.after(0.5, [this] { broken_client_tick(); });
    }

    // ---- run ----

    RunStats run() {
        // faults
        for (const auto& f : cfg.faults) {
            queue.at(f.at, [this, f] {
                active_faults.push_back(
                    ActiveFault{f.src, f.dst, f.kind == "node_down"});
            });
            if (f.duration > 0)
                queue.at(f.at + f.duration, [this, f] {
                    for (size_t i = 0; i < active_faults.size(); ++i) {
                        if (active_faults[i].src == f.src && active_faults[i].dst == f.dst) {
                            active_faults.erase(active_faults.begin() + long(i));
                            break;
                        }
                    }
                });
        }

        // clients
        for (size_t c = 0; c < cfg.clients; ++c) {
            if (cfg.client_send_rate <= 0) break;
            double first = client_rng[c].exponential(cfg.client_send_rate);
            queue.at(first, [this, c] { client_emit(c); });
        }

        // conversation and negative control
        if (cfg.conversation) queue.at(cfg.conversation->period_s, [this] { conversation_tick(); });
        if (cfg.broken_client) queue.at(0.25, [this] { broken_client_tick(); });

        // gateway decoys start at the configured target immediately
        if (cfg.gateway_decoys) {
            double target =
                cfg.gateway_coupon_factor * coupon_bound_packets_per_mu(N, G) / cfg.mu_s;
            for (size_t g = 0; g < G; ++g) {
                gw_decoy_rate[g] = target;
                queue.at(node_rng[size_t(gw_idx(g))].exponential(target),
                         [this, g] { gateway_emit(g); });
            }
        }

        // heartbeats from gateways and mixes
        if (cfg.heartbeats) {
            for (size_t i = 0; i < G + 3 * N; ++i) {
                double first = node_rng[i].exponential(1.0 / cfg.heartbeat_period_s);
                queue.at(first, [this, i] { heartbeat_emit(int(i)); });
            }
        }

        // epochs
        schedule_epoch(cfg.epoch_s);

        if (cfg.snapshot_period_s > 0)
            queue.at(cfg.snapshot_period_s, [this] { snapshot(); });

        queue.run_until(cfg.duration_s);

        roll_window(cur_window + 1);
        for (const auto& q : queues) stats.queued_end += q.size();
        stats.in_flight_end = stats.emitted - stats.delivered - stats.dropped_fault;
        stats.events_executed = queue.executed();
        stats.end_time = queue.now();
        return std::move(stats);
    }

    void schedule_epoch(Time at) {
        if (at > cfg.duration_s) return;
        queue.at(at, [this, at] {
            if (cfg.heartbeats) upload_ratings();
            recompute_decoy_rates();
            schedule_epoch(at + cfg.epoch_s);
        });
    }
};

MixSim::MixSim(const ScenarioConfig& config) : impl_(std::make_unique<Impl>(config)) {
    config.validate();
}

MixSim::~MixSim() = default;

void MixSim::set_observation_sink(ObservationSink sink) { impl_->sink = std::move(sink); }

RunStats MixSim::run() { return impl_->run(); }

std::string MixSim::node_name(int idx) const { return impl_->node_name(idx); }
int MixSim::node_index(const std::string& name) const { return impl_->node_index(name); }

RunStats run_scenario(const ScenarioConfig& config) {
    MixSim sim(config);
    return sim.run();
}

}  // namespace echomix::sim
