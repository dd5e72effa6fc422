#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

namespace echomix::stats {

/// Regularized incomplete gamma functions P(a,x) and Q(a,x) = 1 - P(a,x).
double gamma_p(double a, double x);
double gamma_q(double a, double x);

/// Upper-tail p-value for a chi-square statistic with `df` degrees of freedom.
double chi_square_pvalue(double stat, int df);

/// Pearson statistic of observed counts against explicit expected counts.
double pearson_stat(const std::vector<double>& observed, const std::vector<double>& expected);

/// Uniformity test: expected count = total/bins for every bin.
/// Returns the p-value (df = bins - 1).
double chi_square_uniform_pvalue(const std::vector<uint64_t>& counts);

/// Kolmogorov-Smirnov: p-value for statistic `d` over `n` samples
/// (asymptotic Kolmogorov distribution with the Stephens correction).
double ks_pvalue(double d, size_t n);

/// Erlang distribution: sum of k independent Exponential(lambda) delays.
struct Erlang {
    int k;
    double lambda;

    double pdf(double x) const;
    /// Closed-form cdf 1 - sum_{n<k} e^(-lx) (lx)^n / n!.
    double cdf(double x) const;
    double mean() const { return k / lambda; }
    double stddev() const { return std::sqrt(double(k)) / lambda; }
};

/// n-th harmonic number.
double harmonic(unsigned n);

/// z-score of `value` against a Poisson-like expectation.
inline double poisson_z(double value, double expected) {
    return expected > 0 ? (value - expected) / std::sqrt(expected) : 0.0;
}

struct Accumulator {
    void add(double x) {
        ++n;
        double d = x - mean;
        mean += d / double(n);
        m2 += d * (x - mean);
    }
    double variance() const { return n > 1 ? m2 / double(n - 1) : 0.0; }
    double stddev() const { return std::sqrt(variance()); }

    uint64_t n = 0;
    double mean = 0, m2 = 0;
};

namespace detail {
double ks_statistic(const std::vector<double>& sorted_cdf_values);
}

/// KS test of samples against a cdf; samples need not be sorted.
template <class Cdf>
double ks_test(std::vector<double> samples, Cdf&& cdf) {
    std::sort(samples.begin(), samples.end());
    std::vector<double> cv(samples.size());
    for (size_t i = 0; i < samples.size(); ++i) cv[i] = cdf(samples[i]);
    double d = detail::ks_statistic(cv);
    return ks_pvalue(d, samples.size());
}

}  // namespace echomix::stats
