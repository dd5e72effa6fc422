#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "json.hpp"

#include "echomix/selftest.hpp"
#include "echomix/sim/mixsim.hpp"
#include "echomix/sphinx/geometry.hpp"
#include "echomix/stats.hpp"

namespace {

using namespace echomix;

constexpr int EXIT_FAILED_CHECK = 1;
constexpr int EXIT_USAGE = 2;

sim::ScenarioConfig load_config(const std::string& spec) {
    if (std::filesystem::exists(spec)) {
        std::ifstream f(spec);
        std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
        return sim::ScenarioConfig::from_json_text(text);
    }
    return sim::ScenarioConfig::builtin(spec);
}

int cmd_simulate(const std::string& config_spec, std::optional<uint64_t> seed,
                 const std::string& out_dir, bool records, size_t max_records) {
    auto cfg = load_config(config_spec);
    if (seed) cfg.seed = *seed;

    std::ofstream events;
    uint64_t written = 0, suppressed = 0;
    sim::MixSim simulator(cfg);
    if (records) {
        std::filesystem::create_directories(out_dir);
        events.open(out_dir + "/events.jsonl");
        simulator.set_observation_sink([&](const sim::LinkObservation& obs, const std::string& src,
                                           const std::string& dst) {
            if (written >= max_records) {
                ++suppressed;
                return;
            }
            nlohmann::json j{{"v", 1},   {"type", "link"}, {"t", obs.t},
                             {"src", src}, {"dst", dst},     {"size", obs.size}};
            events << j.dump() << "\n";
            ++written;
        });
    }

    auto stats = simulator.run();

    bool conserved =
        stats.emitted == stats.delivered + stats.dropped_fault + stats.in_flight_end &&
        stats.in_flight_end == stats.queued_end;

    nlohmann::json summary{
        {"v", 1},
        {"scenario", cfg.name},
        {"seed", cfg.seed},
        {"mode", cfg.mode == sim::Mode::Echomix ? "echomix" : "loopix"},
        {"duration_s", stats.end_time},
        {"events", stats.events_executed},
        {"packets_emitted", stats.emitted},
        {"packets_delivered", stats.delivered},
        {"packets_dropped_fault", stats.dropped_fault},
        {"packets_in_flight_end", stats.in_flight_end},
        {"conservation_ok", conserved},
        {"echoes_completed", stats.echoes_completed},
        {"mean_rtt_s", stats.mean_rtt()},
        {"rtt_over_4s_fraction", stats.rtt_tail_fraction(4.0)},
        {"coupling_violations", stats.coupling_violations},
        {"trace_hash", stats.trace_hash},
    };
    auto z = sim::final_hop_z_scores(stats);
    if (!z.empty()) summary["final_hop_z"] = z;
    if (stats.windows_total) {
        summary["link_windows_total"] = stats.windows_total;
        summary["link_windows_all_active"] = stats.windows_all_links_active;
    }
    if (!stats.epoch_link_ratings.empty())
        summary["epochs_rated"] = stats.epoch_link_ratings.size();

    if (records) {
        if (suppressed) {
            nlohmann::json j{{"v", 1}, {"type", "truncated"}, {"suppressed", suppressed}};
            events << j.dump() << "\n";
        }
        nlohmann::json j = summary;
        j["type"] = "summary";
        events << j.dump() << "\n";
        std::ofstream(out_dir + "/summary.json") << summary.dump(2) << "\n";
    }

    std::cout << "scenario        " << cfg.name << " (seed " << cfg.seed << ")\n";
    std::cout << "events          " << stats.events_executed << "\n";
    std::cout << "packets         " << stats.emitted << " emitted / " << stats.delivered
              << " delivered / " << stats.dropped_fault << " dropped / " << stats.in_flight_end
              << " in flight\n";
    if (stats.echoes_completed) {
        std::cout << "echoes          " << stats.echoes_completed << "\n";
        std::cout << "mean RTT        " << stats.mean_rtt() << " s\n";
        std::cout << "P(RTT > 4 s)    " << stats.rtt_tail_fraction(4.0) << "\n";
    }
    if (!z.empty()) {
        std::cout << "final-hop z     ";
        for (double zi : z) std::cout << zi << " ";
        std::cout << "\n";
    }
    if (stats.windows_total)
        std::cout << "link coverage   " << stats.windows_all_links_active << "/"
                  << stats.windows_total << " windows all-active\n";
    std::cout << "conservation    " << (conserved ? "ok" : "VIOLATED") << "\n";
    if (records) std::cout << "records         " << out_dir << "/events.jsonl\n";

    return conserved ? 0 : EXIT_FAILED_CHECK;
}

int cmd_geometry(const std::string& suite, size_t hops, size_t payload, bool all) {
    std::vector<std::string> suites = all ? sphinx::known_suites() : std::vector{suite};
    printf("%-22s %-6s %7s %7s %7s %8s %8s %12s %9s\n", "suite (bytes)", "kind", "alpha", "beta",
           "gamma", "header", "surb", "header+surb", "rt hops");
    for (const auto& name : suites) {
        auto g = sphinx::geometry(sphinx::suite_sizes(name), hops, payload);
        printf("%-22s %-6s %7zu %7zu %7zu %8zu %8zu %12zu %9zu\n", name.c_str(),
               g.suite.kind == sphinx::SuiteKind::Nike ? "nike" : "kem", g.alpha_size, g.beta_size,
               g.gamma_size, g.header_size, g.surb_size, g.header_size + g.surb_size,
               2 * hops - 1);
    }
    printf("forward hops %zu, payload %zu B (+%zu B integrity tag), packet %zu B\n", hops, payload,
           sphinx::SphinxGeometry::PAYLOAD_TAG_SIZE,
           sphinx::geometry(sphinx::suite_sizes(all ? suites[0] : suite), hops, payload)
               .packet_size);
    return 0;
}

int cmd_bandwidth(double rate, const std::string& suite, size_t hops, size_t payload) {
    auto rep = selftest::bandwidth_report(rate, suite, hops, payload);
    printf("suite                 %s, %zu forward hops\n", suite.c_str(), hops);
    printf("per-packet total      %.0f B (payload %zu B + header/surb/tag overhead)\n",
           rep.packet_bytes, payload);
    printf("rate                  %.2f packets/s\n", rate);
    printf("client traffic        %.1f kB/s sent and received\n", rep.bytes_per_second / 1000.0);
    printf("per day               %.2f GB\n", rep.bytes_per_day / 1e9);
    printf("payload efficiency    %.1f %%\n", 100.0 * rep.payload_efficiency);
    return 0;
}

int cmd_selftest(const std::optional<std::string>& only, const std::optional<std::string>& fault,
                 bool records) {
    bool all_ok = true;
    auto names = only ? std::vector{*only} : selftest::check_names();
    for (const auto& name : names) {
        auto r = selftest::run_check(name, fault);
        all_ok = all_ok && r.passed;
        if (records) {
            nlohmann::json j{{"v", 1},
                             {"check", r.name},
                             {"passed", r.passed},
                             {"seconds", r.seconds},
                             {"detail", r.detail}};
            std::cout << j.dump() << "\n";
        } else {
            printf("[%s] %-22s (%6.1fs)  %s\n", r.passed ? "PASS" : "FAIL", r.name.c_str(),
                   r.seconds, r.detail.c_str());
        }
        fflush(stdout);
    }
    return all_ok ? 0 : EXIT_FAILED_CHECK;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"echomix protocol workbench"};
    app.require_subcommand(1);

    // simulate
    auto* sim_cmd = app.add_subcommand("simulate", "run a scenario and report statistics");
    std::string config_spec;
    std::optional<uint64_t> seed;
    std::string out_dir = "out";
    bool records = false;
    bool list = false;
    size_t max_records = 500000;
    sim_cmd->add_option("--config", config_spec,
                        "scenario file or builtin name (see --list)");
    sim_cmd->add_option("--seed", seed, "override the scenario seed");
    sim_cmd->add_option("--out", out_dir, "output directory for records");
    sim_cmd->add_flag("--records", records, "write line-delimited event records");
    sim_cmd->add_option("--max-records", max_records, "cap on event records");
    sim_cmd->add_flag("--list", list, "list builtin scenarios");

    // geometry
    auto* geo_cmd = app.add_subcommand("geometry", "print packet geometry tables");
    std::string suite = "x25519-nike";
    size_t hops = 5;
    size_t payload = 30000;
    bool all_suites = false;
    geo_cmd->add_option("--suite", suite, "suite name");
    geo_cmd->add_option("--hops", hops, "forward path length")->check(CLI::PositiveNumber);
    geo_cmd->add_option("--payload", payload, "payload size in bytes");
    geo_cmd->add_flag("--all", all_suites, "print every known suite");

    // bandwidth
    auto* bw_cmd = app.add_subcommand("bandwidth", "client bandwidth arithmetic");
    double rate = 2.5;
    std::string bw_suite = "x25519-nike";
    size_t bw_hops = 5;
    size_t bw_payload = 30000;
    bw_cmd->add_option("--rate", rate, "packets per second")->check(CLI::PositiveNumber);
    bw_cmd->add_option("--suite", bw_suite, "suite name");
    bw_cmd->add_option("--hops", bw_hops, "forward path length");
    bw_cmd->add_option("--payload", bw_payload, "payload size in bytes");

    // selftest
    auto* st_cmd = app.add_subcommand("selftest", "run the statistical acceptance checks");
    std::optional<std::string> only_check;
    std::optional<std::string> inject_fault;
    bool st_records = false;
    st_cmd->add_option("--check", only_check, "run a single named check");
    st_cmd->add_option("--inject-fault", inject_fault,
                       "deliberately break a subsystem (coupling|loopix|pigeonhole)");
    st_cmd->add_flag("--records", st_records, "machine-readable verdict lines");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return EXIT_USAGE;
    }

    try {
        if (sim_cmd->parsed()) {
            if (list) {
                for (const auto& n : sim::ScenarioConfig::builtin_names()) std::cout << n << "\n";
                return 0;
            }
            if (config_spec.empty()) {
                std::cerr << "simulate: --config is required (or --list)\n";
                return EXIT_USAGE;
            }
            return cmd_simulate(config_spec, seed, out_dir, records, max_records);
        }
        if (geo_cmd->parsed()) return cmd_geometry(suite, hops, payload, all_suites);
        if (bw_cmd->parsed()) return cmd_bandwidth(rate, bw_suite, bw_hops, bw_payload);
        if (st_cmd->parsed()) return cmd_selftest(only_check, inject_fault, st_records);
    } catch (const sim::ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return EXIT_USAGE;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return EXIT_FAILED_CHECK;
    }
    return EXIT_USAGE;
}
