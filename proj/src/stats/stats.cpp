#include "echomix/stats.hpp"

#include <stdexcept>

namespace echomix::stats {

namespace {

// Series expansion of P(a,x), good for x < a+1.
double gamma_p_series(double a, double x) {
    double ap = a;
    double sum = 1.0 / a;
    double del = sum;
    for (int i = 0; i < 500; ++i) {
        ap += 1.0;
        del *= x / ap;
        sum += del;
        if (std::fabs(del) < std::fabs(sum) * 1e-15) break;
    }
    return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Continued fraction for Q(a,x), good for x >= a+1 (modified Lentz).
double gamma_q_cf(double a, double x) {
    const double tiny = 1e-300;
    double b = x + 1.0 - a;
    double c = 1.0 / tiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i < 500; ++i) {
        double an = -double(i) * (double(i) - a);
        b += 2.0;
        d = an * d + b;
        if (std::fabs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < 1e-15) break;
    }
    return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

}  // namespace

double gamma_p(double a, double x) {
    if (x < 0 || a <= 0) throw std::invalid_argument("gamma_p: bad arguments");
    if (x == 0) return 0.0;
    if (x < a + 1.0) return gamma_p_series(a, x);
    return 1.0 - gamma_q_cf(a, x);
}

double gamma_q(double a, double x) {
    if (x < 0 || a <= 0) throw std::invalid_argument("gamma_q: bad arguments");
    if (x == 0) return 1.0;
    if (x < a + 1.0) return 1.0 - gamma_p_series(a, x);
    return gamma_q_cf(a, x);
}

double chi_square_pvalue(double stat, int df) {
    if (df <= 0) throw std::invalid_argument("chi_square_pvalue: df must be positive");
    return gamma_q(df / 2.0, stat / 2.0);
}

double pearson_stat(const std::vector<double>& observed, const std::vector<double>& expected) {
    if (observed.size() != expected.size())
        throw std::invalid_argument("pearson_stat: size mismatch");
    double stat = 0;
    for (size_t i = 0; i < observed.size(); ++i) {
        if (expected[i] <= 0) throw std::invalid_argument("pearson_stat: nonpositive expectation");
        double d = observed[i] - expected[i];
        stat += d * d / expected[i];
    }
    return stat;
}

double chi_square_uniform_pvalue(const std::vector<uint64_t>& counts) {
    if (counts.size() < 2) throw std::invalid_argument("chi_square_uniform: need >= 2 bins");
    uint64_t total = 0;
    for (auto c : counts) total += c;
    double expected = double(total) / double(counts.size());
    double stat = 0;
    for (auto c : counts) {
        double d = double(c) - expected;
        stat += d * d / expected;
    }
    return chi_square_pvalue(stat, int(counts.size()) - 1);
}

double ks_pvalue(double d, size_t n) {
    if (n == 0) return 1.0;
    double sq = std::sqrt(double(n));
    double lambda = (sq + 0.12 + 0.11 / sq) * d;
    // Q_KS(lambda) = 2 sum_{j>=1} (-1)^{j-1} exp(-2 j^2 lambda^2)
    double sum = 0;
    double sign = 1;
    for (int j = 1; j <= 100; ++j) {
        double term = std::exp(-2.0 * j * j * lambda * lambda);
        sum += sign * term;
        if (term < 1e-12) break;
        sign = -sign;
    }
    return std::clamp(2.0 * sum, 0.0, 1.0);
}

namespace detail {

double ks_statistic(const std::vector<double>& cv) {
    double n = double(cv.size());
    double d = 0;
    for (size_t i = 0; i < cv.size(); ++i) {
        double lo = double(i) / n;
        double hi = double(i + 1) / n;
        d = std::max(d, std::max(std::fabs(cv[i] - lo), std::fabs(hi - cv[i])));
    }
    return d;
}

}  // namespace detail

double Erlang::pdf(double x) const {
    if (x < 0) return 0;
    if (x == 0) return k == 1 ? lambda : 0.0;
    return std::exp(double(k) * std::log(lambda) + double(k - 1) * std::log(x) - lambda * x -
                    std::lgamma(double(k)));
}

double Erlang::cdf(double x) const {
    if (x <= 0) return 0;
    double lx = lambda * x;
    double sum = 0;
    double term = 1;  // (lx)^0 / 0!
    for (int n = 0; n < k; ++n) {
        if (n > 0) term *= lx / double(n);
        sum += term;
    }
    return 1.0 - std::exp(-lx) * sum;
}

double harmonic(unsigned n) {
    double h = 0;
    for (unsigned i = 1; i <= n; ++i) h += 1.0 / double(i);
    return h;
}

}  // namespace echomix::stats
