#include "flowrecon/stats.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace flowrecon {

namespace {

double gamma_p_series(double a, double x) {
    // P(a,x) = x^a e^-x / Gamma(a) * sum_n x^n / (a (a+1) ... (a+n))
    double term = 1.0 / a;
    double sum = term;
    double ap = a;
    for (int n = 0; n < 500; ++n) {
        ap += 1.0;
        term *= x / ap;
        sum += term;
        if (std::abs(term) < std::abs(sum) * 1e-16) break;
    }
    return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

double gamma_q_continued_fraction(double a, double x) {
    // Q(a,x) via modified Lentz
    const double tiny = 1e-300;
    double b = x + 1.0 - a;
    double c = 1.0 / tiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i <= 500; ++i) {
        const double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
        b += 2.0;
        d = an * d + b;
        if (std::abs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double delta = d * c;
        h *= delta;
        if (std::abs(delta - 1.0) < 1e-16) break;
    }
    return h * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

} // namespace

double regularized_gamma_p(double a, double x) {
    if (!(a > 0.0)) throw std::invalid_argument("regularized_gamma_p: a must be > 0");
    if (x < 0.0) throw std::invalid_argument("regularized_gamma_p: x must be >= 0");
    if (x == 0.0) return 0.0;
    if (x < a + 1.0) return gamma_p_series(a, x);
    return 1.0 - gamma_q_continued_fraction(a, x);
}

double chi_squared_cdf(int k, double x) {
    if (k < 1) throw std::invalid_argument("chi_squared_cdf: k must be >= 1");
    if (x <= 0.0) return 0.0;
    return regularized_gamma_p(0.5 * static_cast<double>(k), 0.5 * x);
}

double chi_squared_quantile(int k, double p) {
    if (k < 1) throw std::invalid_argument("chi_squared_quantile: k must be >= 1");
    if (!(p > 0.0 && p < 1.0)) {
        throw std::invalid_argument("chi_squared_quantile: p must lie in (0,1)");
    }
    // bracket: the mean k is a reliable interior point; expand upward
    double lo = 0.0;
    double hi = static_cast<double>(k);
    while (chi_squared_cdf(k, hi) < p) {
        hi *= 2.0;
        if (hi > 1e12) throw std::runtime_error("chi_squared_quantile: bracket failure");
    }
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (chi_squared_cdf(k, mid) < p) {
            lo = mid;
        } else {
            hi = mid;
        }
        if (hi - lo <= 1e-10 * std::max(1.0, hi)) break;
    }
    return 0.5 * (lo + hi);
}

} // namespace flowrecon
