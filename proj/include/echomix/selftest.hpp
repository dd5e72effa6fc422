#pragma once

#include <optional>
#include <string>
#include <vector>

namespace echomix::selftest {

struct CheckResult {
    std::string name;
    bool passed = false;
    std::string detail;  // metrics, one line
    double seconds = 0;
};

/// Names of the acceptance checks, in run order.
std::vector<std::string> check_names();

/// Runs one named check with its pinned seeds and tolerances.
/// `inject_fault` deliberately breaks the named subsystem so the
/// corresponding check must fail (negative control of the detectors).
CheckResult run_check(const std::string& name, const std::optional<std::string>& inject_fault = {});

std::vector<CheckResult> run_all(const std::optional<std::string>& inject_fault = {});

/// Bandwidth arithmetic used by both the CLI and the acceptance check.
struct BandwidthReport {
    double packet_bytes = 0;       // payload + tag + header + surb
    double bytes_per_second = 0;   // one direction
    double bytes_per_day = 0;
    double payload_efficiency = 0; // usable payload / wire bytes
};
BandwidthReport bandwidth_report(double packets_per_second, const std::string& suite,
                                 size_t hops, size_t payload_size);

}  // namespace echomix::selftest
