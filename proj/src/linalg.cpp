#include "flowrecon/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace flowrecon {

std::optional<std::vector<double>> cholesky_solve(std::vector<double> a, std::vector<double> b,
                                                  int n) {
    if (static_cast<int>(a.size()) != n * n || static_cast<int>(b.size()) != n) {
        throw std::invalid_argument("cholesky_solve: dimension mismatch");
    }
    double max_diag = 0.0;
    for (int i = 0; i < n; ++i) max_diag = std::max(max_diag, std::abs(a[i * n + i]));
    const double floor = std::max(max_diag, 1.0) * 1e-13;

    // In-place lower Cholesky.
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j <= i; ++j) {
            double s = a[i * n + j];
            for (int k = 0; k < j; ++k) s -= a[i * n + k] * a[j * n + k];
            if (i == j) {
                if (s <= floor) return std::nullopt;
                a[i * n + j] = std::sqrt(s);
            } else {
                a[i * n + j] = s / a[j * n + j];
            }
        }
    }
    // Forward then backward substitution.
    for (int i = 0; i < n; ++i) {
        double s = b[i];
        for (int k = 0; k < i; ++k) s -= a[i * n + k] * b[k];
        b[i] = s / a[i * n + i];
    }
    for (int i = n - 1; i >= 0; --i) {
        double s = b[i];
        for (int k = i + 1; k < n; ++k) s -= a[k * n + i] * b[k];
        b[i] = s / a[i * n + i];
    }
    return b;
}

SymmetricEigen jacobi_eigh(std::vector<double> a, int n) {
    if (static_cast<int>(a.size()) != n * n) {
        throw std::invalid_argument("jacobi_eigh: dimension mismatch");
    }
    std::vector<double> v(static_cast<std::size_t>(n) * n, 0.0);
    for (int i = 0; i < n; ++i) v[i * n + i] = 1.0;

    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (int p = 0; p < n; ++p)
            for (int q = p + 1; q < n; ++q) off += a[p * n + q] * a[p * n + q];
        if (off < 1e-300) break;
        double scale = 0.0;
        for (int i = 0; i < n; ++i) scale = std::max(scale, std::abs(a[i * n + i]));
        if (std::sqrt(off) <= 1e-15 * std::max(scale, 1.0)) break;

        for (int p = 0; p < n; ++p) {
            for (int q = p + 1; q < n; ++q) {
                const double apq = a[p * n + q];
                if (apq == 0.0) continue;
                const double app = a[p * n + p];
                const double aqq = a[q * n + q];
                const double tau = (aqq - app) / (2.0 * apq);
                const double t = (tau >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(tau) + std::sqrt(1.0 + tau * tau));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = t * c;
                for (int k = 0; k < n; ++k) {
                    const double akp = a[k * n + p];
                    const double akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for (int k = 0; k < n; ++k) {
                    const double apk = a[p * n + k];
                    const double aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                for (int k = 0; k < n; ++k) {
                    const double vkp = v[k * n + p];
                    const double vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }

    std::vector<int> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::vector<double> diag(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) diag[static_cast<std::size_t>(i)] = a[i * n + i];
    std::stable_sort(order.begin(), order.end(),
                     [&](int x, int y) { return diag[static_cast<std::size_t>(x)] >
                                                diag[static_cast<std::size_t>(y)]; });

    SymmetricEigen out;
    out.values.resize(static_cast<std::size_t>(n));
    out.vectors.resize(static_cast<std::size_t>(n) * n);
    for (int c = 0; c < n; ++c) {
        out.values[static_cast<std::size_t>(c)] = diag[static_cast<std::size_t>(order[c])];
        for (int r = 0; r < n; ++r) {
            out.vectors[r * n + c] = v[r * n + order[c]];
        }
    }
    return out;
}

std::vector<double> symmetric_least_norm_solve(const std::vector<double>& a,
                                               const std::vector<double>& b, int n,
                                               double rel_tol) {
    const SymmetricEigen eig = jacobi_eigh(a, n);
    double max_abs = 0.0;
    for (const double e : eig.values) max_abs = std::max(max_abs, std::abs(e));
    const double cut = max_abs * rel_tol;
    std::vector<double> x(static_cast<std::size_t>(n), 0.0);
    for (int c = 0; c < n; ++c) {
        const double lam = eig.values[static_cast<std::size_t>(c)];
        if (std::abs(lam) <= cut) continue;
        double proj = 0.0;
        for (int r = 0; r < n; ++r) proj += eig.vectors[r * n + c] * b[static_cast<std::size_t>(r)];
        const double coef = proj / lam;
        for (int r = 0; r < n; ++r) x[static_cast<std::size_t>(r)] += coef * eig.vectors[r * n + c];
    }
    return x;
}

} // namespace flowrecon
