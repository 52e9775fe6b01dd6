#pragma once

#include <cstddef>
#include <span>

namespace hk {

// All reductions in the library run in index order by default, so repeated
// runs are reproducible bit for bit. Pairwise summation is available where
// long sums warrant the extra accuracy; it is deterministic as well.
enum class SumMode { ordered, pairwise };

inline double sum_ordered(std::span<const double> xs) {
    double s = 0.0;
    for (double x : xs) s += x;
    return s;
}

// Cascade summation, rounding error O(eps log n) instead of O(eps n).
inline double sum_pairwise(std::span<const double> xs) {
    const std::size_t n = xs.size();
    if (n <= 8) {
        double s = 0.0;
        for (double x : xs) s += x;
        return s;
    }
    const std::size_t half = n / 2;
    return sum_pairwise(xs.first(half)) + sum_pairwise(xs.subspan(half));
}

inline double sum(std::span<const double> xs, SumMode mode) {
    return mode == SumMode::ordered ? sum_ordered(xs) : sum_pairwise(xs);
}

}  // namespace hk
