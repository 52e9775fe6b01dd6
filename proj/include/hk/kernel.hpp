#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "hk/particles.hpp"
#include "hk/summation.hpp"

namespace hk {

// Parameters of the interaction law eta(z) = exp(-z/nu). nu sets how
// broad-minded the opinion holders are; alpha is the rate at which they
// conform and multiplies every velocity uniformly (default 1).
struct KernelParams {
    double nu = 0.5;
    double alpha = 1.0;

    void validate() const {
        if (!(nu > 0.0)) throw std::invalid_argument("KernelParams: nu must be > 0");
        if (!(alpha > 0.0)) throw std::invalid_argument("KernelParams: alpha must be > 0");
    }
};

// Influence of an opinion at distance z >= 0; strictly decreasing, eta(0)=1.
inline double eta(double z, const KernelParams& p) {
    if (!(z >= 0.0)) throw std::invalid_argument("eta: distance must be nonnegative");
    return std::exp(-z / p.nu);
}

// g(x) = sum_j w_j exp(-|x-X_j|/nu), the locally averaged opinion holder
// density. Strictly positive; integrates to 2*nu per unit mass.
inline double field_g(const ParticleEnsemble& ens, double x, const KernelParams& p,
                      SumMode mode = SumMode::ordered) {
    const std::size_t n = ens.size();
    if (mode == SumMode::ordered) {
        double s = 0.0;
        for (std::size_t j = 0; j < n; ++j)
            s += ens.weights[j] * std::exp(-std::abs(x - ens.positions[j]) / p.nu);
        return s;
    }
    std::vector<double> terms(n);
    for (std::size_t j = 0; j < n; ++j)
        terms[j] = ens.weights[j] * std::exp(-std::abs(x - ens.positions[j]) / p.nu);
    return sum_pairwise(terms);
}

// h(x) = sum_j w_j (x-X_j) exp(-|x-X_j|/nu). The drift velocity of the
// opinion density at x is -h(x)/g(x) (times alpha).
inline double field_h(const ParticleEnsemble& ens, double x, const KernelParams& p,
                      SumMode mode = SumMode::ordered) {
    const std::size_t n = ens.size();
    if (mode == SumMode::ordered) {
        double s = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            const double d = x - ens.positions[j];
            s += ens.weights[j] * d * std::exp(-std::abs(d) / p.nu);
        }
        return s;
    }
    std::vector<double> terms(n);
    for (std::size_t j = 0; j < n; ++j) {
        const double d = x - ens.positions[j];
        terms[j] = ens.weights[j] * d * std::exp(-std::abs(d) / p.nu);
    }
    return sum_pairwise(terms);
}

namespace detail {
// Antiderivative of u exp(-|u|/nu) from -inf to u, per unit weight:
//   u <= 0:  exp(u/nu) * nu * (u - nu)
//   u  > 0: -exp(-u/nu) * nu * (u + nu)  (continuous at 0, both -> 0 at +-inf)
inline double h_antiderivative(double u, double nu) {
    if (u <= 0.0) return std::exp(u / nu) * nu * (u - nu);
    return -std::exp(-u / nu) * nu * (u + nu);
}
}  // namespace detail

// H(x) = integral of h from -inf to x. Nonpositive everywhere, vanishing at
// both infinities; only decaying exponentials appear, so no overflow.
inline double field_H(const ParticleEnsemble& ens, double x, const KernelParams& p,
                      SumMode mode = SumMode::ordered) {
    const std::size_t n = ens.size();
    if (mode == SumMode::ordered) {
        double s = 0.0;
        for (std::size_t j = 0; j < n; ++j)
            s += ens.weights[j] * detail::h_antiderivative(x - ens.positions[j], p.nu);
        return s;
    }
    std::vector<double> terms(n);
    for (std::size_t j = 0; j < n; ++j)
        terms[j] = ens.weights[j] * detail::h_antiderivative(x - ens.positions[j], p.nu);
    return sum_pairwise(terms);
}

// ||g||^2_{L2} = sum_i sum_j w_i w_j exp(-d_ij/nu) (nu + d_ij) with
// d_ij = |X_i - X_j|; the exact integral of g^2. A translation-invariant
// measure of how concentrated the opinions are, nondecreasing along the flow.
inline double concentration(const ParticleEnsemble& ens, const KernelParams& p,
                            SumMode mode = SumMode::ordered) {
    const std::size_t n = ens.size();
    // diagonal d=0 terms, then each unordered pair once, doubled
    if (mode == SumMode::ordered) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += ens.weights[i] * ens.weights[i] * p.nu;
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = i + 1; j < n; ++j) {
                const double d = std::abs(ens.positions[i] - ens.positions[j]);
                s += 2.0 * ens.weights[i] * ens.weights[j] * std::exp(-d / p.nu) * (p.nu + d);
            }
        }
        return s;
    }
    std::vector<double> row(n);
    std::vector<double> rows(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            const double d = std::abs(ens.positions[i] - ens.positions[j]);
            row[j] = ens.weights[i] * ens.weights[j] * std::exp(-d / p.nu) * (p.nu + d);
        }
        rows[i] = sum_pairwise(row);
    }
    return sum_pairwise(rows);
}

}  // namespace hk
