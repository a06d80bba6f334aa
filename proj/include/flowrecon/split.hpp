#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "flowrecon/grid.hpp"
#include "flowrecon/rng.hpp"

namespace flowrecon {

enum class SplitMode { sequential, random };

struct SplitSpec {
    SplitMode mode = SplitMode::sequential;
    double test_fraction = 0.15;
    double validation_fraction = 0.30;
    std::uint64_t seed = 0;

    void validate() const {
        if (!(test_fraction > 0.0 && test_fraction < 1.0) ||
            !(validation_fraction > 0.0 && validation_fraction < 1.0)) {
            throw std::invalid_argument("SplitSpec: fractions must lie in (0,1)");
        }
        if (test_fraction + (1.0 - test_fraction) * validation_fraction >= 1.0) {
            throw std::invalid_argument("SplitSpec: fractions leave no training data");
        }
    }
};

struct SplitResult {
    FlowSeries train;
    FlowSeries validation;
    FlowSeries test;
};

/// Sizes: test = floor(K * test_fraction) of the end (sequential mode),
/// validation = round(remaining * validation_fraction), train = the rest.
/// Random mode draws the same sizes uniformly without replacement; every
/// subset keeps chronological order.
inline SplitResult split(const FlowSeries& series, const SplitSpec& spec) {
    spec.validate();
    const std::size_t k = series.size();
    const std::size_t n_test = static_cast<std::size_t>(
        std::floor(static_cast<double>(k) * spec.test_fraction));
    const std::size_t remaining = k - n_test;
    const std::size_t n_val = static_cast<std::size_t>(
        std::llround(static_cast<double>(remaining) * spec.validation_fraction));
    if (n_test == 0 || n_val == 0 || n_test + n_val >= k) {
        throw std::invalid_argument("split: a subset would be empty");
    }
    const std::size_t n_train = k - n_test - n_val;

    std::vector<std::size_t> order(k);
    std::iota(order.begin(), order.end(), std::size_t{0});
    if (spec.mode == SplitMode::random) {
        Rng rng(derive_seed(spec.seed, "split"));
        for (std::size_t i = k - 1; i > 0; --i) {
            const std::size_t j = rng.uniform_index(i + 1);
            std::swap(order[i], order[j]);
        }
    }

    auto subset = [&](std::size_t begin, std::size_t count) {
        std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(begin),
                                     order.begin() + static_cast<std::ptrdiff_t>(begin + count));
        std::sort(idx.begin(), idx.end());
        std::vector<FlowSnapshot> snaps;
        snaps.reserve(count);
        for (const std::size_t s : idx) snaps.push_back(series.snapshots[s]);
        return FlowSeries(series.grid, std::move(snaps));
    };

    return SplitResult{subset(0, n_train), subset(n_train, n_val), subset(n_train + n_val, n_test)};
}

} // namespace flowrecon
