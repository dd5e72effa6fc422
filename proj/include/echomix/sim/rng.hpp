#pragma once

#include <string>

#include "echomix/bytes.hpp"
#include "echomix/crypto/chacha.hpp"

namespace echomix::sim {

/// Deterministic random stream keyed by (seed, label). Every simulated
/// entity draws from its own labelled substream, so adding an entity
/// never perturbs the draws of the others.
class SimRng {
  public:
    SimRng(uint64_t seed, const std::string& label);

    uint64_t next_u64();
    /// Uniform in [0, 1) with 53 random bits.
    double uniform01();
    double uniform(double a, double b);
    /// Uniform integer in [0, bound).
    uint64_t below(uint64_t bound);
    /// Exponential with the given rate (mean 1/rate).
    double exponential(double rate);

    /// Forked substream ("label/suffix").
    SimRng fork(const std::string& suffix) const;

  private:
    uint64_t seed_;
    std::string label_;
    crypto::ChaCha20 stream_;
};

}  // namespace echomix::sim
