#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <set>
#include "doctest.h"

#include "echomix/sim/mixsim.hpp"
#include "echomix/sphinx/geometry.hpp"
#include "echomix/stats.hpp"

using namespace echomix;
using namespace echomix::sim;

TEST_SUITE_BEGIN("sim");

TEST_CASE("substream rng is deterministic and label-separated") {
    SimRng a(7, "client/0");
    SimRng a2(7, "client/0");
    SimRng b(7, "client/1");
    bool any_diff = false;
    for (int i = 0; i < 64; ++i) {
        uint64_t x = a.next_u64();
        CHECK(x == a2.next_u64());
        any_diff |= (x != b.next_u64());
    }
    CHECK(any_diff);
}

TEST_CASE("exponential sampler matches its distribution") {
    SimRng rng(11, "exp-test");
    const double lambda = 5.0;
    const size_t n = 1000000;
    stats::Accumulator acc;
    uint64_t over_2mu = 0;
    std::vector<double> residuals;
    const double t = 1.0 / lambda;
    for (size_t i = 0; i < n; ++i) {
        double x = rng.exponential(lambda);
        acc.add(x);
        if (x > 2.0 / lambda) ++over_2mu;
        if (x > t && residuals.size() < 400000) residuals.push_back(x - t);
    }
    // mean within 0.5% of 1/lambda
    CHECK(std::fabs(acc.mean - 1.0 / lambda) < 0.005 / lambda);
    // tail mass P(X > 2/lambda) = e^-2 within 0.005
    double tail = double(over_2mu) / double(n);
    CHECK(std::fabs(tail - std::exp(-2.0)) < 0.005);
    // memorylessness: residual beyond t has the original mean
    stats::Accumulator res;
    for (double r : residuals) res.add(r);
    CHECK(std::fabs(res.mean - 1.0 / lambda) < 0.01 / lambda);
    CHECK_THROWS(rng.exponential(0.0));
}

TEST_CASE("erlang distribution closed form") {
    stats::Erlang e{9, 5.0};
    CHECK(e.mean() == doctest::Approx(1.8));
    CHECK(e.stddev() == doctest::Approx(0.6));
    // tail beyond 20*mu (= 4s at mu = 0.2s), frozen from quadrature of the pdf
    CHECK(1.0 - e.cdf(4.0) == doctest::Approx(0.002087259049).epsilon(1e-6));
    // cdf against numeric integration of the pdf
    for (double x : {0.5, 1.0, 1.8, 3.0, 4.0}) {
        const int steps = 20000;
        double h = x / steps;
        double sum = e.pdf(0) + e.pdf(x);
        for (int i = 1; i < steps; ++i) sum += e.pdf(i * h) * (i % 2 ? 4.0 : 2.0);
        double quad = sum * h / 3.0;
        CHECK(e.cdf(x) == doctest::Approx(quad).epsilon(1e-7));
    }
    // k=1 reduces to the exponential
    stats::Erlang one{1, 2.0};
    CHECK(one.cdf(0.7) == doctest::Approx(1.0 - std::exp(-1.4)));
    CHECK(one.pdf(0.0) == doctest::Approx(2.0));
}

TEST_CASE("chi-square and ks plumbing") {
    // chi2 with 1 df: stat 3.841 is the 5% point
    CHECK(stats::chi_square_pvalue(3.841, 1) == doctest::Approx(0.05).epsilon(0.01));
    // uniform counts pass, a skewed bin fails
    std::vector<uint64_t> good(10, 1000);
    good[3] = 1040;
    good[7] = 962;
    CHECK(stats::chi_square_uniform_pvalue(good) > 0.01);
    std::vector<uint64_t> bad(10, 1000);
    bad[0] = 2000;
    CHECK(stats::chi_square_uniform_pvalue(bad) < 1e-6);

    // KS of exponential samples against the true cdf
    SimRng rng(13, "ks");
    std::vector<double> xs(20000);
    for (auto& x : xs) x = rng.exponential(3.0);
    double p = stats::ks_test(xs, [](double x) { return 1.0 - std::exp(-3.0 * x); });
    CHECK(p > 0.01);
    // and against a wrong cdf it must fail
    double pbad = stats::ks_test(xs, [](double x) { return 1.0 - std::exp(-2.0 * x); });
    CHECK(pbad < 1e-6);
}

TEST_CASE("coupon bound formula and monte-carlo") {
    CHECK(coupon_bound_packets_per_mu(1, 4) == doctest::Approx(0.25));  // 1/g
    CHECK(coupon_bound_packets_per_mu(10, 3) ==
          doctest::Approx(10.0 * 2.9289682539682538 * 10.0 / 3.0));

    // draws to cover 10 coupons: mean 10*H_10 within 2% over 10^4 trials
    SimRng rng(17, "coupon");
    stats::Accumulator acc;
    for (int trial = 0; trial < 10000; ++trial) {
        uint32_t seen = 0;
        int draws = 0;
        while (seen != (1u << 10) - 1) {
            seen |= 1u << rng.below(10);
            ++draws;
        }
        acc.add(double(draws));
    }
    CHECK(std::fabs(acc.mean - 29.289682539682538) < 0.02 * 29.29);
}

TEST_CASE("event queue ordering and tie-break") {
    EventQueue q;
    std::vector<int> order;
    q.at(2.0, [&] { order.push_back(3); });
    q.at(1.0, [&] { order.push_back(1); });
    q.at(1.0, [&] { order.push_back(2); });  // same time: insertion order
    q.run_all();
    CHECK(order == std::vector<int>{1, 2, 3});
    CHECK(q.now() == 2.0);
    q.at(5.0, [] {});
    CHECK_THROWS(q.at(1.0, [] {}));
}

TEST_CASE("scenario json round trip and diagnostics") {
    auto base = ScenarioConfig::builtin("echomix-baseline");
    auto text = base.to_json_text();
    auto back = ScenarioConfig::from_json_text(text);
    CHECK(back.clients == base.clients);
    CHECK(back.seed == base.seed);
    CHECK(back.mu_s == base.mu_s);

    CHECK_THROWS_WITH_AS(ScenarioConfig::from_json_text("{\"bogus_field\": 1}"),
                         "unknown config field 'bogus_field'", ConfigError);
    CHECK_THROWS_WITH_AS(ScenarioConfig::from_json_text("{\"mu_s\": \"fast\"}"),
                         "config field 'mu_s': expected a number", ConfigError);
    CHECK_THROWS_AS(ScenarioConfig::from_json_text("not json"), ConfigError);
    CHECK_THROWS_AS(ScenarioConfig::builtin("no-such"), ConfigError);

    // every builtin validates
    for (const auto& name : ScenarioConfig::builtin_names())
        CHECK_NOTHROW(ScenarioConfig::builtin(name).validate());
}

namespace {

ScenarioConfig small_echo_scenario() {
    ScenarioConfig c;
    c.name = "small";
    c.seed = 5;
    c.clients = 5;
    c.gateways = 2;
    c.layer_width = 2;
    c.services = 3;
    c.client_send_rate = 2.0;
    c.duration_s = 120.0;
    c.snapshot_period_s = 0.5;
    return c;
}

}  // namespace

TEST_CASE("identical seeds give identical traces") {
    auto cfg = small_echo_scenario();
    auto s1 = run_scenario(cfg);
    auto s2 = run_scenario(cfg);
    auto s3 = run_scenario(cfg);
    CHECK(s1.trace_hash == s2.trace_hash);
    CHECK(s2.trace_hash == s3.trace_hash);
    CHECK(s1.emitted == s2.emitted);
    CHECK(s1.rtts == s2.rtts);
    CHECK(s1.events_executed == s3.events_executed);

    auto cfg2 = cfg;
    cfg2.seed = 6;
    auto other = run_scenario(cfg2);
    CHECK(other.trace_hash != s1.trace_hash);
}

TEST_CASE("packet conservation") {
    auto stats = run_scenario(small_echo_scenario());
    CHECK(stats.emitted > 0);
    CHECK(stats.emitted == stats.delivered + stats.dropped_fault + stats.in_flight_end);
    CHECK(stats.in_flight_end == stats.queued_end);
    CHECK(stats.dropped_fault == 0);
}

TEST_CASE("echo round trips concentrate near nine hops") {
    auto stats = run_scenario(small_echo_scenario());
    REQUIRE(stats.echoes_completed > 500);
    double mean = stats.mean_rtt();
    CHECK(mean > 1.8 * 0.9);
    CHECK(mean < 1.8 * 1.1);
    // simulated rtt distribution against the closed form
    stats::Erlang e{9, 5.0};
    double p = stats::ks_test(stats.rtts, [&](double x) { return e.cdf(x); });
    CHECK(p > 0.01);
}

TEST_CASE("zero clients means only node-generated traffic") {
    auto cfg = small_echo_scenario();
    cfg.clients = 0;
    cfg.client_send_rate = 0;
    cfg.duration_s = 30;
    auto quiet = run_scenario(cfg);
    CHECK(quiet.emitted == 0);

    cfg.heartbeats = true;
    cfg.heartbeat_period_s = 1.0;
    auto hb = run_scenario(cfg);
    CHECK(hb.emitted > 0);
    CHECK(hb.emitted == hb.heartbeats_sent);
}

TEST_CASE("link fault drops packets and is accounted") {
    auto cfg = small_echo_scenario();
    cfg.duration_s = 60;
    cfg.faults.push_back(FaultSpec{10.0, 40.0, "link_drop", "mix1-0", "mix2-0"});
    auto stats = run_scenario(cfg);
    CHECK(stats.dropped_fault > 0);
    CHECK(stats.emitted == stats.delivered + stats.dropped_fault + stats.in_flight_end);
}

TEST_CASE("memorylessness of queued packets") {
    auto cfg = small_echo_scenario();
    cfg.clients = 8;
    cfg.client_send_rate = 4.0;  // build real queues
    cfg.duration_s = 400.0;
    cfg.snapshot_period_s = 0.25;
    auto stats = run_scenario(cfg);
    REQUIRE(stats.snapshots_taken > 5000);
    std::vector<double> observed(stats.snapshot_bins.begin(), stats.snapshot_bins.end());
    double stat = stats::pearson_stat(observed, stats.snapshot_expected);
    double p = stats::chi_square_pvalue(stat, int(observed.size()) - 1);
    CHECK(p > 0.01);
}

TEST_CASE("heartbeat ratings isolate a dead link") {
    auto cfg = ScenarioConfig::builtin("heartbeat-fault");
    auto stats = run_scenario(cfg);
    REQUIRE(stats.epoch_link_ratings.size() >= 2);
    // fault active from 30s; epochs close at 60/120/180 -> the second
    // uploaded rating set must show the dead link isolated
    const auto& ratings = stats.epoch_link_ratings[1];
    const std::string dead = "mix1-0>mix2-1";
    REQUIRE(ratings.contains(dead));
    CHECK(ratings.at(dead) < 0.2);
    // all other links stay healthy
    size_t healthy = 0, collapsed = 0;
    for (const auto& [link, r] : ratings) {
        if (link == dead) continue;
        if (r > 0.75) ++healthy;
        if (r < 0.5) ++collapsed;
    }
    CHECK(collapsed == 0);
    CHECK(healthy > 10);
}

TEST_CASE("node outage collapses many links") {
    auto cfg = ScenarioConfig::builtin("heartbeat-fault");
    cfg.faults.clear();
    cfg.faults.push_back(FaultSpec{30.0, 150.0, "node_down", "mix2-2", ""});
    auto stats = run_scenario(cfg);
    REQUIRE(stats.epoch_link_ratings.size() >= 2);
    const auto& ratings = stats.epoch_link_ratings[1];
    size_t collapsed = 0;
    for (const auto& [link, r] : ratings)
        if (r < 0.3 && link.find("mix2-2") != std::string::npos) ++collapsed;
    // every rated link touching the dead node collapses
    CHECK(collapsed >= 4);
}

TEST_CASE("every wire observation has the geometry size") {
    auto cfg = small_echo_scenario();
    cfg.duration_s = 30;
    MixSim sim(cfg);
    std::set<size_t> sizes;
    uint64_t observations = 0;
    sim.set_observation_sink([&](const LinkObservation& obs, const std::string&, const std::string&) {
        sizes.insert(obs.size);
        ++observations;
    });
    sim.run();
    CHECK(observations > 1000);
    CHECK(sizes.size() == 1);  // uniform packet size on every link
    auto g = sphinx::geometry(sphinx::suite_sizes(cfg.sphinx_suite), 5, cfg.payload_size);
    CHECK(*sizes.begin() == g.packet_size);
}

TEST_CASE("simulated latency matches the analytic distribution for 1, 5 and 9 hops") {
    // k = 9: echo round trips
    auto cfg = small_echo_scenario();
    cfg.duration_s = 400;
    auto echo = run_scenario(cfg);
    REQUIRE(echo.rtts.size() > 2000);
    stats::Erlang nine{9, 5.0};
    CHECK(stats::ks_test(echo.rtts, [&](double x) { return nine.cdf(x); }) > 0.01);

    // k = 1: individual mix delays
    std::vector<double> one_hop(echo.hop_delays.begin(),
                                echo.hop_delays.begin() + std::min<size_t>(20000, echo.hop_delays.size()));
    stats::Erlang one{1, 5.0};
    CHECK(stats::ks_test(one_hop, [&](double x) { return one.cdf(x); }) > 0.01);

    // k = 5: loopix one-way deliveries
    auto lcfg = ScenarioConfig::builtin("loopix-leak");
    lcfg.conversation.reset();
    lcfg.duration_s = 1500;
    auto loopix = run_scenario(lcfg);
    REQUIRE(loopix.rtts.size() > 2000);
    stats::Erlang five{5, 5.0};
    CHECK(stats::ks_test(loopix.rtts, [&](double x) { return five.cdf(x); }) > 0.01);
}

TEST_CASE("all-decoy emission stream is uniform over services") {
    ScenarioConfig cfg;
    cfg.name = "all-decoy";
    cfg.seed = 31;
    cfg.clients = 10;
    cfg.gateways = 3;
    cfg.layer_width = 3;
    cfg.services = 8;
    cfg.client_send_rate = 10.0;
    cfg.duration_s = 1001.0;  // ~10^5 emissions, no application traffic
    auto stats = run_scenario(cfg);
    uint64_t total = 0;
    for (auto c : stats.emission_dest_counts) total += c;
    CHECK(total > 99000);
    CHECK(stats::chi_square_uniform_pvalue(stats.emission_dest_counts) > 0.01);
    CHECK(stats.coupling_violations == 0);
}

TEST_CASE("client churn suppresses emissions while offline") {
    auto cfg = small_echo_scenario();
    cfg.duration_s = 300;
    auto base = run_scenario(cfg);
    cfg.churn_period_s = 10.0;
    cfg.churn_offline_fraction = 0.5;
    auto churned = run_scenario(cfg);
    double ratio = double(churned.emitted) / double(base.emitted);
    CHECK(ratio > 0.35);
    CHECK(ratio < 0.65);
    CHECK(churned.emitted ==
          churned.delivered + churned.dropped_fault + churned.in_flight_end);
}

TEST_CASE("final hop stays uniform without a conversation") {
    for (auto mode : {Mode::Echomix, Mode::Loopix}) {
        auto cfg = ScenarioConfig::builtin("loopix-leak");
        cfg.mode = mode;
        cfg.conversation.reset();
        cfg.duration_s = 1200.0;
        auto stats = run_scenario(cfg);
        auto z = final_hop_z_scores(stats);
        REQUIRE(!z.empty());
        for (double zi : z) CHECK(std::fabs(zi) < 4.0);
    }
}

TEST_SUITE_END();
