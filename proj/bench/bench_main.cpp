// Micro-benchmarks comparing the OpenMP kernels against their serial
// reference, plus per-operation costs of the packet processing paths.
// Wall-clock numbers are hardware-specific; the acceptance suite relies
// on operation counts instead.

#include <chrono>
#include <cstdio>

#include "echomix/bacap/bacap.hpp"
#include "echomix/sphinx/sphinx.hpp"
#include "echomix/support/par.hpp"

using namespace echomix;

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

template <class F>
double timed(F&& fn) {
    auto t0 = std::chrono::steady_clock::now();
    fn();
    return seconds_since(t0);
}

}  // namespace

int main() {
    std::printf("threads: %d\n\n", par::thread_count());
    Rng rng(42);

    // bulk box-id derivation: serial reference vs parallel kernel
    {
        auto cap = bacap::WriteCap::generate(rng);
        auto ctx = bacap::Context::of(to_bytes(std::string("bench")));
        const size_t n = 4000;
        std::vector<bacap::BoxKeys> serial, parallel;
        double ts = timed([&] {
            serial = bacap::derive_range_serial(cap.root_public, cap.state, cap.first_index, n, ctx);
        });
        double tp = timed([&] {
            parallel = bacap::derive_range(cap.root_public, cap.state, cap.first_index, n, ctx);
        });
        bool same = true;
        for (size_t i = 0; i < n; ++i) same = same && serial[i].box_id == parallel[i].box_id;
        std::printf("derive_range (%zu boxes)\n", n);
        std::printf("  serial    %8.1f us/box\n", 1e6 * ts / double(n));
        std::printf("  parallel  %8.1f us/box  (speedup %.2fx, outputs %s)\n\n",
                    1e6 * tp / double(n), ts / tp, same ? "identical" : "DIFFER");
    }

    // sphinx unwrap costs per variant
    {
        const auto& nike = crypto::nike_x25519();
        const auto& kem = crypto::kem_x25519();
        auto gn = sphinx::geometry(sphinx::suite_sizes("x25519-nike"), 5, 2048);
        auto gk = sphinx::geometry(sphinx::suite_sizes("x25519-kem"), 5, 2048);

        sphinx::PathSpec pn, pk;
        std::vector<Bytes> privs_n, privs_k;
        for (int i = 0; i < 5; ++i) {
            auto [np, npub] = nike.generate_keypair(rng);
            auto [kp, kpub] = kem.generate_keypair(rng);
            sphinx::PathHop hn, hk;
            rng.fill(hn.node_id.data(), 32);
            rng.fill(hk.node_id.data(), 32);
            hn.public_key = npub;
            hk.public_key = kpub;
            pn.hops.push_back(hn);
            pk.hops.push_back(hk);
            privs_n.push_back(np);
            privs_k.push_back(kp);
        }
        pn.terminal.type = sphinx::CommandType::Deliver;
        pk.terminal.type = sphinx::CommandType::Deliver;

        const int iters = 200;
        std::vector<sphinx::SphinxPacket> pkts_n, pkts_k;
        for (int i = 0; i < iters; ++i) {
            pkts_n.push_back(sphinx::nike_wrap(gn, nike, pn, rng.bytes(100), rng));
            pkts_k.push_back(sphinx::kem_wrap(gk, kem, pk, rng.bytes(100), rng));
        }
        double tn = timed([&] {
            for (auto& p : pkts_n) sphinx::nike_unwrap(gn, nike, privs_n[0], p);
        });
        double tk = timed([&] {
            for (auto& p : pkts_k) sphinx::kem_unwrap(gk, kem, privs_k[0], p);
        });
        std::printf("sphinx unwrap (one hop, %d packets, 2 kB payload)\n", iters);
        std::printf("  nike      %8.0f ns/op  (2 public-key ops)\n", 1e9 * tn / iters);
        std::printf("  kem       %8.0f ns/op  (1 public-key op, %.2fx faster)\n\n",
                    1e9 * tk / iters, tn / tk);
    }

    // parallel map over independent seal operations
    {
        auto cap = bacap::WriteCap::generate(rng);
        auto ctx = bacap::Context::of(to_bytes(std::string("bench2")));
        const size_t n = 1500;
        auto keys = bacap::derive_range(cap.root_public, cap.state, cap.first_index, n, ctx);
        std::vector<Bytes> payloads(n);
        for (auto& p : payloads) p = rng.bytes(512);
        std::vector<bacap::BacapBox> out_s(n), out_p(n);
        double ts = timed([&] {
            par::for_index_serial(n, [&](size_t i) { out_s[i] = bacap::seal(keys[i], cap, payloads[i]); });
        });
        double tp = timed([&] {
            par::for_index(n, [&](size_t i) { out_p[i] = bacap::seal(keys[i], cap, payloads[i]); });
        });
        std::printf("seal (%zu boxes, 512 B payloads)\n", n);
        std::printf("  serial    %8.1f us/box\n", 1e6 * ts / double(n));
        std::printf("  parallel  %8.1f us/box  (speedup %.2fx)\n", 1e6 * tp / double(n), ts / tp);
    }
    return 0;
}
