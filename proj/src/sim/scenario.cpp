#include "echomix/sim/scenario.hpp"

#include <set>

#include "json.hpp"

namespace echomix::sim {

using nlohmann::json;

namespace {

[[noreturn]] void bad_field(const std::string& field, const std::string& why) {
    throw ConfigError("config field '" + field + "': " + why);
}

template <class T>
T get_as(const json& j, const std::string& field);

template <>
double get_as<double>(const json& j, const std::string& field) {
    if (!j.is_number()) bad_field(field, "expected a number");
    return j.get<double>();
}

template <>
uint64_t get_as<uint64_t>(const json& j, const std::string& field) {
    if (!j.is_number_unsigned()) bad_field(field, "expected a non-negative integer");
    return j.get<uint64_t>();
}

template <>
bool get_as<bool>(const json& j, const std::string& field) {
    if (!j.is_boolean()) bad_field(field, "expected a boolean");
    return j.get<bool>();
}

template <>
std::string get_as<std::string>(const json& j, const std::string& field) {
    if (!j.is_string()) bad_field(field, "expected a string");
    return j.get<std::string>();
}

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (!allowed.contains(it.key()))
            throw ConfigError("unknown config field '" + (where.empty() ? it.key() : where + "." + it.key()) + "'");
    }
}

}  // namespace

ScenarioConfig ScenarioConfig::from_json_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw ConfigError("config must be a JSON object");

    static const std::set<std::string> allowed = {
        "version",       "name",           "seed",
        "mode",          "duration_s",     "clients",
        "gateways",      "layer_width",    "services",
        "mu_s",          "client_send_rate", "gateway_decoys",
        "gateway_coupon_factor",           "heartbeats",
        "heartbeat_period_s",              "heartbeat_timeout_s",
        "epoch_s",       "conversation",   "coupling_policy",
        "churn_period_s", "churn_offline_fraction",
        "broken_client", "faults",         "payload_size",
        "sphinx_suite",  "snapshot_period_s"};
    check_keys(j, allowed, "");

    ScenarioConfig c;
    if (j.contains("version") && get_as<uint64_t>(j["version"], "version") != 1)
        bad_field("version", "only version 1 is supported");
    if (j.contains("name")) c.name = get_as<std::string>(j["name"], "name");
    if (j.contains("seed")) c.seed = get_as<uint64_t>(j["seed"], "seed");
    if (j.contains("mode")) {
        auto m = get_as<std::string>(j["mode"], "mode");
        if (m == "echomix")
            c.mode = Mode::Echomix;
        else if (m == "loopix")
            c.mode = Mode::Loopix;
        else
            bad_field("mode", "expected \"echomix\" or \"loopix\"");
    }
    if (j.contains("duration_s")) c.duration_s = get_as<double>(j["duration_s"], "duration_s");
    if (j.contains("clients")) c.clients = get_as<uint64_t>(j["clients"], "clients");
    if (j.contains("gateways")) c.gateways = get_as<uint64_t>(j["gateways"], "gateways");
    if (j.contains("layer_width")) c.layer_width = get_as<uint64_t>(j["layer_width"], "layer_width");
    if (j.contains("services")) c.services = get_as<uint64_t>(j["services"], "services");
    if (j.contains("mu_s")) c.mu_s = get_as<double>(j["mu_s"], "mu_s");
    if (j.contains("client_send_rate"))
        c.client_send_rate = get_as<double>(j["client_send_rate"], "client_send_rate");
    if (j.contains("gateway_decoys"))
        c.gateway_decoys = get_as<bool>(j["gateway_decoys"], "gateway_decoys");
    if (j.contains("gateway_coupon_factor"))
        c.gateway_coupon_factor =
            get_as<double>(j["gateway_coupon_factor"], "gateway_coupon_factor");
    if (j.contains("heartbeats")) c.heartbeats = get_as<bool>(j["heartbeats"], "heartbeats");
    if (j.contains("heartbeat_period_s"))
        c.heartbeat_period_s = get_as<double>(j["heartbeat_period_s"], "heartbeat_period_s");
    if (j.contains("heartbeat_timeout_s"))
        c.heartbeat_timeout_s = get_as<double>(j["heartbeat_timeout_s"], "heartbeat_timeout_s");
    if (j.contains("epoch_s")) c.epoch_s = get_as<double>(j["epoch_s"], "epoch_s");
    if (j.contains("churn_period_s"))
        c.churn_period_s = get_as<double>(j["churn_period_s"], "churn_period_s");
    if (j.contains("churn_offline_fraction"))
        c.churn_offline_fraction =
            get_as<double>(j["churn_offline_fraction"], "churn_offline_fraction");
    if (j.contains("conversation")) {
        const auto& conv = j["conversation"];
        if (!conv.is_object()) bad_field("conversation", "expected an object");
        check_keys(conv, {"sender", "receiver", "period_s"}, "conversation");
        ConversationSpec spec;
        if (conv.contains("sender")) spec.sender = get_as<uint64_t>(conv["sender"], "conversation.sender");
        if (conv.contains("receiver"))
            spec.receiver = get_as<uint64_t>(conv["receiver"], "conversation.receiver");
        if (conv.contains("period_s"))
            spec.period_s = get_as<double>(conv["period_s"], "conversation.period_s");
        c.conversation = spec;
    }
    if (j.contains("coupling_policy"))
        c.coupling_policy = get_as<std::string>(j["coupling_policy"], "coupling_policy");
    if (j.contains("broken_client"))
        c.broken_client = get_as<bool>(j["broken_client"], "broken_client");
    if (j.contains("faults")) {
        if (!j["faults"].is_array()) bad_field("faults", "expected an array");
        for (const auto& f : j["faults"]) {
            if (!f.is_object()) bad_field("faults", "expected objects");
            check_keys(f, {"at", "duration", "kind", "src", "dst"}, "faults");
            FaultSpec spec;
            spec.at = get_as<double>(f.at("at"), "faults.at");
            if (f.contains("duration")) spec.duration = get_as<double>(f["duration"], "faults.duration");
            spec.kind = get_as<std::string>(f.at("kind"), "faults.kind");
            spec.src = get_as<std::string>(f.at("src"), "faults.src");
            if (f.contains("dst")) spec.dst = get_as<std::string>(f["dst"], "faults.dst");
            c.faults.push_back(spec);
        }
    }
    if (j.contains("payload_size")) c.payload_size = get_as<uint64_t>(j["payload_size"], "payload_size");
    if (j.contains("sphinx_suite"))
        c.sphinx_suite = get_as<std::string>(j["sphinx_suite"], "sphinx_suite");
    if (j.contains("snapshot_period_s"))
        c.snapshot_period_s = get_as<double>(j["snapshot_period_s"], "snapshot_period_s");

    c.validate();
    return c;
}

std::string ScenarioConfig::to_json_text() const {
    json j;
    j["version"] = 1;
    j["name"] = name;
    j["seed"] = seed;
    j["mode"] = mode == Mode::Echomix ? "echomix" : "loopix";
    j["duration_s"] = duration_s;
    j["clients"] = clients;
    j["gateways"] = gateways;
    j["layer_width"] = layer_width;
    j["services"] = services;
    j["mu_s"] = mu_s;
    j["client_send_rate"] = client_send_rate;
    j["gateway_decoys"] = gateway_decoys;
    j["gateway_coupon_factor"] = gateway_coupon_factor;
    j["heartbeats"] = heartbeats;
    j["heartbeat_period_s"] = heartbeat_period_s;
    j["heartbeat_timeout_s"] = heartbeat_timeout_s;
    j["epoch_s"] = epoch_s;
    j["churn_period_s"] = churn_period_s;
    j["churn_offline_fraction"] = churn_offline_fraction;
    if (conversation) {
        j["conversation"] = {{"sender", conversation->sender},
                             {"receiver", conversation->receiver},
                             {"period_s", conversation->period_s}};
    }
    j["coupling_policy"] = coupling_policy;
    j["broken_client"] = broken_client;
    if (!faults.empty()) {
        j["faults"] = json::array();
        for (const auto& f : faults)
            j["faults"].push_back({{"at", f.at},
                                   {"duration", f.duration},
                                   {"kind", f.kind},
                                   {"src", f.src},
                                   {"dst", f.dst}});
    }
    j["payload_size"] = payload_size;
    j["sphinx_suite"] = sphinx_suite;
    j["snapshot_period_s"] = snapshot_period_s;
    return j.dump(2);
}

void ScenarioConfig::validate() const {
    if (duration_s <= 0) bad_field("duration_s", "must be positive");
    if (mu_s <= 0) bad_field("mu_s", "must be positive");
    if (gateways < 1) bad_field("gateways", "need at least one gateway");
    if (layer_width < 1) bad_field("layer_width", "need at least one mix per layer");
    if (services < 1) bad_field("services", "need at least one service");
    if (client_send_rate < 0) bad_field("client_send_rate", "must be non-negative");
    if (clients > 0 && client_send_rate > 0 && duration_s * client_send_rate * double(clients) > 5e7)
        bad_field("client_send_rate", "scenario would emit more than 5e7 packets");
    if (conversation) {
        if (conversation->sender >= clients) bad_field("conversation.sender", "no such client");
        if (conversation->receiver >= clients) bad_field("conversation.receiver", "no such client");
        if (conversation->sender == conversation->receiver)
            bad_field("conversation.receiver", "sender and receiver must differ");
        if (conversation->period_s <= 0) bad_field("conversation.period_s", "must be positive");
    }
    if (churn_offline_fraction < 0 || churn_offline_fraction > 1)
        bad_field("churn_offline_fraction", "must be in [0, 1]");
    if (coupling_policy != "app-first" && coupling_policy != "burst" && coupling_policy != "parity")
        bad_field("coupling_policy", "expected app-first, burst or parity");
    for (const auto& f : faults) {
        if (f.kind != "link_drop" && f.kind != "node_down")
            bad_field("faults.kind", "expected link_drop or node_down");
        if (f.kind == "link_drop" && f.dst.empty()) bad_field("faults.dst", "link_drop needs dst");
    }
}

ScenarioConfig ScenarioConfig::builtin(const std::string& name) {
    ScenarioConfig c;
    c.name = name;
    if (name == "echomix-baseline") {
        c.mode = Mode::Echomix;
        c.seed = 20;
        c.clients = 20;
        c.gateways = 3;
        c.layer_width = 3;
        c.services = 4;
        c.client_send_rate = 2.5;
        c.duration_s = 2100.0;
        c.snapshot_period_s = 1.0;
        return c;
    }
    if (name == "loopix-leak") {
        c.mode = Mode::Loopix;
        c.seed = 21;
        c.clients = 20;
        c.gateways = 10;  // providers
        c.layer_width = 3;
        c.services = 10;
        c.client_send_rate = 0.5;
        c.duration_s = 7200.0;
        c.conversation = ConversationSpec{0, 1, 10.0};
        return c;
    }
    if (name == "echomix-conversation") {
        c.mode = Mode::Echomix;
        c.seed = 21;
        c.clients = 20;
        c.gateways = 10;
        c.layer_width = 3;
        c.services = 10;
        c.client_send_rate = 0.5;
        c.duration_s = 7200.0;
        c.conversation = ConversationSpec{0, 1, 10.0};
        return c;
    }
    if (name == "coupon-bound") {
        c.mode = Mode::Echomix;
        c.seed = 22;
        c.clients = 0;
        c.gateways = 3;
        c.layer_width = 10;
        c.services = 10;
        c.client_send_rate = 0;
        c.gateway_decoys = true;
        c.duration_s = 130.0;
        return c;
    }
    if (name == "heartbeat-fault") {
        c.mode = Mode::Echomix;
        c.seed = 23;
        c.clients = 4;
        c.gateways = 2;
        c.layer_width = 4;
        c.services = 3;
        c.client_send_rate = 1.0;
        c.heartbeats = true;
        c.heartbeat_period_s = 0.5;
        c.heartbeat_timeout_s = 8.0;
        c.epoch_s = 90.0;
        c.duration_s = 200.0;
        c.faults.push_back(FaultSpec{30.0, 160.0, "link_drop", "mix1-0", "mix2-1"});
        return c;
    }
    throw ConfigError("unknown builtin scenario '" + name + "'");
}

std::vector<std::string> ScenarioConfig::builtin_names() {
    return {"echomix-baseline", "loopix-leak", "echomix-conversation", "coupon-bound",
            "heartbeat-fault"};
}

}  // namespace echomix::sim
