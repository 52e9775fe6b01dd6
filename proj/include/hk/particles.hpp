#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "hk/summation.hpp"

namespace hk {

struct GaussianComponent {
    double weight;
    double mean;
    double variance;
};

// Gaussian-mixture description of an initial opinion density.
struct DensitySpec {
    std::vector<GaussianComponent> components;

    void validate() const {
        if (components.empty())
            throw std::invalid_argument("DensitySpec: no components");
        double total = 0.0;
        for (const auto& c : components) {
            if (!(c.weight > 0.0))
                throw std::invalid_argument("DensitySpec: component weights must be positive");
            if (!(c.variance > 0.0))
                throw std::invalid_argument("DensitySpec: component variances must be positive");
            total += c.weight;
        }
        if (std::abs(total - 1.0) > 1e-12)
            throw std::invalid_argument("DensitySpec: component weights must sum to 1");
    }

    double pdf(double x) const {
        double s = 0.0;
        for (const auto& c : components) {
            const double d = x - c.mean;
            s += c.weight * std::exp(-d * d / (2.0 * c.variance)) /
                 std::sqrt(2.0 * std::numbers::pi * c.variance);
        }
        return s;
    }

    double cdf(double x) const {
        double s = 0.0;
        for (const auto& c : components)
            s += c.weight * 0.5 * std::erfc(-(x - c.mean) / std::sqrt(2.0 * c.variance));
        return s;
    }

    double mean() const {
        double s = 0.0;
        for (const auto& c : components) s += c.weight * c.mean;
        return s;
    }

    double second_moment() const {
        double s = 0.0;
        for (const auto& c : components) s += c.weight * (c.mean * c.mean + c.variance);
        return s;
    }
};

// Weighted sum of point opinions. Positions are strictly increasing at
// construction; weights are positive and sum to 1, and stay fixed while the
// positions evolve. Near consensus neighboring positions may round to equal
// doubles; ties are kept, only inversions are repaired.
struct ParticleEnsemble {
    std::vector<double> positions;
    std::vector<double> weights;

    std::size_t size() const { return positions.size(); }
    double total_weight() const { return sum_ordered(weights); }
};

inline ParticleEnsemble make_ensemble(std::vector<double> positions, std::vector<double> weights) {
    if (positions.empty() || positions.size() != weights.size())
        throw std::invalid_argument("make_ensemble: need matching nonempty positions/weights");
    for (std::size_t i = 0; i + 1 < positions.size(); ++i)
        if (!(positions[i] < positions[i + 1]))
            throw std::invalid_argument("make_ensemble: positions must be strictly increasing");
    double total = 0.0;
    for (double w : weights) {
        if (!(w > 0.0))
            throw std::invalid_argument("make_ensemble: weights must be positive");
        total += w;
    }
    for (double& w : weights) w /= total;
    return ParticleEnsemble{std::move(positions), std::move(weights)};
}

// Cell weights for the grid discretization: either the density value at the
// cell midpoint times dx, or the exact cell integral via the Gaussian
// cumulative function.
enum class WeightRule { midpoint, exact };

struct DiscretizeResult {
    ParticleEnsemble ensemble;
    double raw_weight_sum = 0.0;  // captured mass before renormalization
    std::size_t dropped = 0;      // cells whose weight underflowed
};

// Places 2m-1 particles at i*dx, i = -m+1 .. m-1, weights renormalized to
// sum to 1. Cells with weight below 1e-300 are dropped so every remaining
// weight is strictly positive.
inline DiscretizeResult discretize(const DensitySpec& spec, int m, double dx,
                                   WeightRule rule = WeightRule::midpoint) {
    spec.validate();
    if (m < 1) throw std::invalid_argument("discretize: m must be >= 1");
    if (!(dx > 0.0)) throw std::invalid_argument("discretize: dx must be > 0");

    std::vector<double> pos, w;
    pos.reserve(2 * static_cast<std::size_t>(m) - 1);
    w.reserve(2 * static_cast<std::size_t>(m) - 1);
    double raw_sum = 0.0;
    std::size_t dropped = 0;
    for (int i = -m + 1; i <= m - 1; ++i) {
        const double x = i * dx;
        const double raw = (rule == WeightRule::midpoint)
                               ? spec.pdf(x) * dx
                               : spec.cdf(x + 0.5 * dx) - spec.cdf(x - 0.5 * dx);
        raw_sum += raw;
        if (!(raw >= 1e-300)) {
            ++dropped;
            continue;
        }
        pos.push_back(x);
        w.push_back(raw);
    }
    if (pos.empty())
        throw std::invalid_argument("discretize: all particle weights vanished");
    const double total = sum_ordered(w);
    for (double& wi : w) wi /= total;
    return DiscretizeResult{ParticleEnsemble{std::move(pos), std::move(w)}, raw_sum, dropped};
}

// Smooth density reconstruction: sum_i w_i N(x - X_i; sigma^2). Full sum,
// no cutoff, so linearity in the weights holds to rounding.
inline std::vector<double> mollify(const ParticleEnsemble& ens, double sigma,
                                   std::span<const double> xs) {
    if (!(sigma > 0.0)) throw std::invalid_argument("mollify: sigma must be > 0");
    const double norm = 1.0 / (sigma * std::sqrt(2.0 * std::numbers::pi));
    const double inv2s2 = 1.0 / (2.0 * sigma * sigma);
    std::vector<double> out(xs.size());
    for (std::size_t k = 0; k < xs.size(); ++k) {
        double s = 0.0;
        for (std::size_t i = 0; i < ens.size(); ++i) {
            const double d = xs[k] - ens.positions[i];
            s += ens.weights[i] * std::exp(-d * d * inv2s2);
        }
        out[k] = norm * s;
    }
    return out;
}

inline double mollify_at(const ParticleEnsemble& ens, double sigma, double x) {
    const double xs[1] = {x};
    return mollify(ens, sigma, xs)[0];
}

}  // namespace hk
