#pragma once

#include <functional>
#include <map>
#include <memory>

#include "echomix/sim/event_queue.hpp"
#include "echomix/sim/rng.hpp"
#include "echomix/sim/scenario.hpp"

namespace echomix::sim {

/// One link event as the global passive observer sees it: timing, the two
/// endpoints and the (uniform) wire size. No payload material.
struct LinkObservation {
    Time t;
    int src;
    int dst;
    size_t size;
};

struct RunStats {
    // conservation: every packet is delivered, dropped with cause, or
    // still queued when the run ends
    uint64_t emitted = 0;
    uint64_t delivered = 0;
    uint64_t dropped_fault = 0;
    uint64_t in_flight_end = 0;
    uint64_t queued_end = 0;

    uint64_t echoes_completed = 0;
    std::vector<double> rtts;        // echo round trips, capped
    std::vector<double> hop_delays;  // individual sampled mix delays, capped

    /// Merged decoy+application destination stream (per service index).
    std::vector<uint64_t> emission_dest_counts;
    uint64_t coupling_violations = 0;

    /// Arrivals on the final forward hop (per service / provider index).
    std::vector<uint64_t> final_hop_counts;

    /// Fraction of mean-delay windows in which every forward inter-layer
    /// link carried at least one packet.
    uint64_t windows_total = 0;
    uint64_t windows_all_links_active = 0;

    /// Memorylessness snapshots: position-of-next-release histogram with
    /// its exact expectation under per-queue uniformity.
    std::vector<uint64_t> snapshot_bins;
    std::vector<double> snapshot_expected;
    uint64_t snapshots_taken = 0;

    /// Heartbeat link ratings as uploaded at each epoch boundary.
    std::vector<std::map<std::string, double>> epoch_link_ratings;
    uint64_t heartbeats_sent = 0;
    uint64_t heartbeats_returned = 0;

    uint64_t trace_hash = 0;
    uint64_t events_executed = 0;
    Time end_time = 0;

    double mean_rtt() const;
    double rtt_tail_fraction(double threshold) const;
};

/// z-scores of the final-hop arrival counts against the mean (Poisson
/// approximation); index = service/provider.
std::vector<double> final_hop_z_scores(const RunStats& stats);

/// Decoy output a gateway must add per mean-delay period so that every
/// link to and between layers of width n stays busy: n*H_n coupons for
/// one fan-out, scaled by n/g gateways' share.
double coupon_bound_packets_per_mu(size_t layer_width, size_t gateways);

class MixSim {
  public:
    explicit MixSim(const ScenarioConfig& config);
    ~MixSim();

    using ObservationSink =
        std::function<void(const LinkObservation&, const std::string& src, const std::string& dst)>;
    void set_observation_sink(ObservationSink sink);

    RunStats run();

    std::string node_name(int idx) const;
    int node_index(const std::string& name) const;

  private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

/// Convenience: configure, run, return stats.
RunStats run_scenario(const ScenarioConfig& config);

}  // namespace echomix::sim
