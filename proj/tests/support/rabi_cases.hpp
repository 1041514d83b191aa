#pragma once

// Shared generators for Rabi round-trip checks.

#include "p1aug/rabi.hpp"

#include <random>

namespace rabi_cases {

/// Random but well-sampled damped sinusoid on a 200-point, 10 us grid.
inline p1aug::DampedSinusoidParams random_params(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> s0(0.005, 0.05), td(3.0, 20.0), n(0.8, 2.5), f(0.3, 2.0), base(0.9, 1.0);
    p1aug::DampedSinusoidParams p;
    p.s0 = s0(rng);
    p.t_d = td(rng);
    p.n = n(rng);
    p.omega = 2.0 * std::numbers::pi * f(rng);
    p.baseline = base(rng);
    return p;
}

inline p1aug::DampedSinusoidParams reference_params() {
    return {0.01, 5.0, 1.5, 2.0 * std::numbers::pi * 1.0, 0.99};
}

inline double max_relative_error(const p1aug::DampedSinusoidParams& got, const p1aug::DampedSinusoidParams& want) {
    auto rel = [](double a, double b) { return std::abs(a - b) / std::abs(b); };
    return std::max({rel(got.s0, want.s0), rel(got.t_d, want.t_d), rel(got.n, want.n), rel(got.omega, want.omega),
                     rel(got.baseline, want.baseline)});
}

} // namespace rabi_cases
