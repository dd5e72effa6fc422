#pragma once

#include <optional>
#include <string>
#include <vector>

#include "echomix/bytes.hpp"

namespace echomix::sim {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class Mode { Echomix, Loopix };

struct FaultSpec {
    double at = 0;
    double duration = 0;
    std::string kind;  // "link_drop" | "node_down"
    std::string src;   // node name; dst empty for node_down
    std::string dst;
};

struct ConversationSpec {
    size_t sender = 0;
    size_t receiver = 1;
    double period_s = 10.0;
};

/// Scenario schema, version 1. Unknown fields and wrong types are
/// rejected with the offending field named.
struct ScenarioConfig {
    std::string name = "unnamed";
    uint64_t seed = 1;
    Mode mode = Mode::Echomix;
    double duration_s = 100.0;

    size_t clients = 10;
    size_t gateways = 3;        // providers in loopix mode
    size_t layer_width = 3;     // n, per mix layer (3 layers)
    size_t services = 4;        // couriers/echo services behind the mixes

    double mu_s = 0.2;             // mean per-hop delay, lambda = 1/mu
    double client_send_rate = 1.0; // per-client Poisson rate, packets/s

    bool gateway_decoys = false;
    double gateway_coupon_factor = 3.5;  // multiplier on the coupon bound

    bool heartbeats = false;
    double heartbeat_period_s = 5.0;
    double heartbeat_timeout_s = 10.0;

    double epoch_s = 1200.0;

    /// Client churn for intersection-attack studies: each churn period a
    /// client is offline with the given probability and emits nothing.
    double churn_period_s = 0.0;  // 0 disables churn
    double churn_offline_fraction = 0.0;

    std::optional<ConversationSpec> conversation;
    std::string coupling_policy = "app-first";  // app-first|burst|parity
    bool broken_client = false;  // client 0 pins all app traffic to service 0

    std::vector<FaultSpec> faults;

    size_t payload_size = 30000;
    std::string sphinx_suite = "x25519-nike";

    double snapshot_period_s = 0.0;  // 0 = no queue snapshots
    size_t max_rtt_samples = 200000;
    size_t max_hop_delay_samples = 100000;

    static ScenarioConfig from_json_text(const std::string& text);
    std::string to_json_text() const;

    /// Bundled scenarios compiled into the library; throws ConfigError
    /// for unknown names.
    static ScenarioConfig builtin(const std::string& name);
    static std::vector<std::string> builtin_names();

    void validate() const;
};

}  // namespace echomix::sim
