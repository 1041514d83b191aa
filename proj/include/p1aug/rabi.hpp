#pragma once

// Nuclear Rabi traces: the stretched-exponential damped cos^2 model, seeded
// synthetic traces, a multi-start Levenberg-Marquardt fit and the
// normalization used to compare fitted frequencies/amplitudes across fields.
//
// Units: time in us, omega in rad/us. rabi_frequency() reports Omega/2pi in MHz.

#include "p1aug/augmentation.hpp"
#include "p1aug/errors.hpp"
#include "p1aug/p1_model.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace p1aug {

/// Omega / 2pi in MHz for a drive of b_rf Gauss.
inline double rabi_frequency(double alpha_raw, double gamma_n, double b_rf) {
    if (!std::isfinite(alpha_raw) || !std::isfinite(gamma_n) || !std::isfinite(b_rf) || b_rf < 0.0)
        throw InvalidInput("rabi_frequency: inputs must be finite with b_rf >= 0");
    return alpha_raw * gamma_n * b_rf;
}

struct DampedSinusoidParams {
    double s0 = 0.0;
    double t_d = 1.0;       // us
    double n = 1.0;
    double omega = 0.0;     // rad/us
    double baseline = 0.0;

    void validate() const {
        if (!(t_d > 0.0) || !(n > 0.0) || !std::isfinite(t_d) || !std::isfinite(n))
            throw InvalidInput("DampedSinusoidParams: t_d and n must be finite and > 0");
        if (!std::isfinite(s0) || !std::isfinite(omega) || !std::isfinite(baseline))
            throw InvalidInput("DampedSinusoidParams: parameters must be finite");
    }

    double operator()(double t) const {
        const double c = std::cos(0.5 * omega * t);
        return baseline + s0 * std::exp(-std::pow(t / t_d, n)) * c * c;
    }
};

struct TraceMeta {
    Transition transition;
    double field = 0.0;   // G
    OrientationClass orientation;
    RfDrive drive;
};

struct RabiTrace {
    std::vector<double> times;    // us
    std::vector<double> signal;
    std::optional<TraceMeta> meta;

    void validate() const {
        if (times.size() != signal.size()) throw InvalidInput("RabiTrace: times and signal lengths differ");
        if (times.size() < 8) throw InvalidInput("RabiTrace: need at least 8 samples");
        for (std::size_t k = 0; k < times.size(); ++k) {
            if (!std::isfinite(times[k]) || !std::isfinite(signal[k]))
                throw InvalidInput("RabiTrace: non-finite sample at row " + std::to_string(k));
            if (times[k] < 0.0) throw InvalidInput("RabiTrace: times must be >= 0");
            if (k > 0 && !(times[k] > times[k - 1]))
                throw InvalidInput("RabiTrace: times must be strictly increasing (row " + std::to_string(k) + ")");
        }
    }
};

inline RabiTrace simulate_trace(const DampedSinusoidParams& params, std::span<const double> times,
                                double noise_sigma, std::uint64_t seed) {
    params.validate();
    if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma))
        throw InvalidInput("simulate_trace: noise_sigma must be finite and >= 0");
    RabiTrace trace;
    trace.times.assign(times.begin(), times.end());
    trace.signal.resize(times.size());
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, 1.0);
    for (std::size_t k = 0; k < times.size(); ++k) {
        trace.signal[k] = params(times[k]);
        if (noise_sigma > 0.0) trace.signal[k] += noise_sigma * noise(rng);
    }
    trace.validate();
    return trace;
}

inline std::vector<double> uniform_times(double t_max, std::size_t points) {
    if (!(t_max > 0.0) || points < 2) throw InvalidInput("uniform_times: need t_max > 0 and points >= 2");
    std::vector<double> t(points);
    for (std::size_t k = 0; k < points; ++k)
        t[k] = t_max * static_cast<double>(k) / static_cast<double>(points - 1);
    return t;
}

struct FitResult {
    DampedSinusoidParams params;
    DampedSinusoidParams std_errors;   // per-parameter standard errors, same fields
    double residual_rms = 0.0;
    bool converged = false;
    int iterations = 0;
};

struct FitOptions {
    std::optional<double> fix_n;
    double n_min = 0.5;
    double n_max = 3.0;
    int max_iterations = 500;
    double relative_cost_tolerance = 1e-10;
};

namespace detail {

/// Frequencies (cycles/us) of the strongest local maxima of the DFT power of the
/// mean-subtracted signal on a 4x zero-padded grid, strongest first. Bins below
/// the first unpadded bin are skipped.
inline std::vector<double> spectral_peaks(const RabiTrace& trace, std::size_t count) {
    const std::size_t n = trace.times.size();
    const double dt = (trace.times.back() - trace.times.front()) / static_cast<double>(n - 1);
    double mean = 0.0;
    for (double y : trace.signal) mean += y;
    mean /= static_cast<double>(n);

    constexpr std::size_t pad = 4;
    const std::size_t bins = pad * n;
    std::vector<std::pair<double, double>> spectrum;   // (frequency, power)
    for (std::size_t j = pad; j <= bins / 2; ++j) {
        const double f = static_cast<double>(j) / (static_cast<double>(bins) * dt);
        std::complex<double> acc = 0.0;
        const double w = -2.0 * std::numbers::pi * f;
        for (std::size_t k = 0; k < n; ++k)
            acc += (trace.signal[k] - mean) * std::polar(1.0, w * (trace.times[k] - trace.times.front()));
        spectrum.emplace_back(f, std::norm(acc));
    }

    std::vector<std::pair<double, double>> peaks;
    for (std::size_t j = 0; j < spectrum.size(); ++j) {
        const bool left = j == 0 || spectrum[j].second >= spectrum[j - 1].second;
        const bool right = j + 1 == spectrum.size() || spectrum[j].second > spectrum[j + 1].second;
        if (left && right) peaks.push_back(spectrum[j]);
    }
    std::stable_sort(peaks.begin(), peaks.end(), [](const auto& x, const auto& y) { return x.second > y.second; });
    std::vector<double> out;
    for (std::size_t k = 0; k < std::min(count, peaks.size()); ++k) out.push_back(peaks[k].first);
    if (out.empty()) out.push_back(1.0 / (static_cast<double>(n) * dt));
    return out;
}

inline double dominant_frequency(const RabiTrace& trace) { return spectral_peaks(trace, 1).front(); }

/// Unconstrained coordinates: s0, log t_d, logit-scaled n, omega, baseline.
struct FitModel {
    std::span<const double> t;
    std::span<const double> y;
    FitOptions opts;

    std::size_t dim() const { return opts.fix_n ? 4 : 5; }

    double sigmoid(double u) const { return 1.0 / (1.0 + std::exp(-u)); }

    DampedSinusoidParams decode(const Eigen::VectorXd& u) const {
        DampedSinusoidParams p;
        p.s0 = u[0];
        p.t_d = std::exp(u[1]);
        std::size_t k = 2;
        if (opts.fix_n) {
            p.n = *opts.fix_n;
        } else {
            p.n = opts.n_min + (opts.n_max - opts.n_min) * sigmoid(u[k++]);
        }
        p.omega = u[k++];
        p.baseline = u[k];
        return p;
    }

    Eigen::VectorXd encode(const DampedSinusoidParams& p) const {
        Eigen::VectorXd u(dim());
        u[0] = p.s0;
        u[1] = std::log(p.t_d);
        std::size_t k = 2;
        if (!opts.fix_n) {
            const double frac = std::clamp((p.n - opts.n_min) / (opts.n_max - opts.n_min), 1e-6, 1.0 - 1e-6);
            u[k++] = std::log(frac / (1.0 - frac));
        }
        u[k++] = p.omega;
        u[k] = p.baseline;
        return u;
    }

    /// Residuals and Jacobian with respect to the natural parameters
    /// (s0, t_d, n, omega, baseline); column for n present only when free.
    void natural(const DampedSinusoidParams& p, Eigen::VectorXd& r, Eigen::MatrixXd& jac) const {
        const std::size_t m = t.size();
        r.resize(static_cast<Eigen::Index>(m));
        jac.resize(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(dim()));
        for (std::size_t k = 0; k < m; ++k) {
            const double tk = t[k];
            const double ratio = tk / p.t_d;
            const double x = tk > 0.0 ? std::pow(ratio, p.n) : 0.0;
            const double env = std::exp(-x);
            const double c = std::cos(0.5 * p.omega * tk);
            const double osc = c * c;
            const auto row = static_cast<Eigen::Index>(k);
            r[row] = p.baseline + p.s0 * env * osc - y[k];
            Eigen::Index col = 0;
            jac(row, col++) = env * osc;
            jac(row, col++) = p.s0 * osc * env * p.n * x / p.t_d;
            if (!opts.fix_n) jac(row, col++) = tk > 0.0 ? -p.s0 * osc * env * x * std::log(ratio) : 0.0;
            jac(row, col++) = -0.5 * p.s0 * env * tk * std::sin(p.omega * tk);
            jac(row, col) = 1.0;
        }
    }

    void internal(const Eigen::VectorXd& u, Eigen::VectorXd& r, Eigen::MatrixXd& jac) const {
        const auto p = decode(u);
        natural(p, r, jac);
        jac.col(1) *= p.t_d;
        if (!opts.fix_n) {
            const double s = sigmoid(u[2]);
            jac.col(2) *= (opts.n_max - opts.n_min) * s * (1.0 - s);
        }
    }
};

struct LmOutcome {
    Eigen::VectorXd u;
    double cost = std::numeric_limits<double>::infinity();
    bool converged = false;
    int iterations = 0;
};

inline LmOutcome levenberg_marquardt(const FitModel& model, Eigen::VectorXd u) {
    Eigen::VectorXd r;
    Eigen::MatrixXd jac;
    model.internal(u, r, jac);
    double cost = r.squaredNorm();

    LmOutcome out;
    double lambda = 1e-3;
    int it = 0;
    for (; it < model.opts.max_iterations; ++it) {
        if (cost == 0.0) {
            out.converged = true;
            break;
        }
        const Eigen::MatrixXd a = jac.transpose() * jac;
        const Eigen::VectorXd g = jac.transpose() * r;
        bool accepted = false;
        while (!accepted) {
            Eigen::MatrixXd damped = a;
            for (Eigen::Index i = 0; i < a.rows(); ++i) damped(i, i) += lambda * std::max(a(i, i), 1e-12);
            const Eigen::VectorXd step = damped.ldlt().solve(-g);
            const Eigen::VectorXd trial = u + step;
            Eigen::VectorXd r_trial;
            Eigen::MatrixXd j_trial;
            double trial_cost = std::numeric_limits<double>::infinity();
            if (step.allFinite()) {
                model.internal(trial, r_trial, j_trial);
                trial_cost = r_trial.squaredNorm();
            }
            if (std::isfinite(trial_cost) && trial_cost < cost) {
                const double drop = cost - trial_cost;
                u = trial;
                r = std::move(r_trial);
                jac = std::move(j_trial);
                const double previous = cost;
                cost = trial_cost;
                lambda = std::max(lambda / 3.0, 1e-12);
                accepted = true;
                if (drop <= model.opts.relative_cost_tolerance * previous) out.converged = true;
            } else {
                lambda *= 4.0;
                // No representable decrease left: the current point is a minimum to working precision.
                if (lambda > 1e12) {
                    out.converged = true;
                    break;
                }
            }
        }
        if (out.converged) break;
    }
    out.u = u;
    out.cost = cost;
    out.iterations = it + 1;
    return out;
}

} // namespace detail

/// Least-squares fit of baseline + s0 exp(-(t/t_d)^n) cos^2(omega t / 2).
///
/// Starting omega comes from DFT peaks f* of the mean-subtracted signal.
/// cos^2(omega t/2) = (1 + cos(omega t))/2 oscillates at omega/2pi, so
/// omega0 = 2pi f*. A fast envelope can outweigh the oscillation at low
/// frequency, so the three strongest peaks are each tried at 0.5x, 1x and 2x;
/// lowest cost wins.
inline FitResult fit_damped_sinusoid(const RabiTrace& trace, const FitOptions& opts = {}) {
    trace.validate();
    if (opts.fix_n && !(*opts.fix_n > 0.0)) throw InvalidInput("fit_damped_sinusoid: fixed n must be > 0");
    const auto [lo_it, hi_it] = std::minmax_element(trace.signal.begin(), trace.signal.end());
    const double lo = *lo_it, hi = *hi_it;
    if (!(hi > lo)) throw InvalidInput("fit_damped_sinusoid: signal is constant");

    const std::size_t m = trace.times.size();
    const double t0 = trace.times.front();
    const double span = trace.times.back() - t0;

    DampedSinusoidParams init;
    init.baseline = lo;
    init.s0 = hi - lo;
    init.n = opts.fix_n.value_or(1.0);
    {
        const std::size_t quarter = std::max<std::size_t>(m / 4, 2);
        const double first = *std::max_element(trace.signal.begin(), trace.signal.begin() + quarter) - lo;
        const double last = *std::max_element(trace.signal.end() - quarter, trace.signal.end()) - lo;
        const double ratio = first > 0.0 ? last / first : 1.0;
        init.t_d = (ratio > 0.0 && ratio < 1.0) ? std::clamp(span / -std::log(ratio), 0.1 * span, 100.0 * span)
                                                : 10.0 * span;
    }
    const detail::FitModel model{trace.times, trace.signal, opts};
    detail::LmOutcome best;
    bool any_converged = false;
    for (double f : detail::spectral_peaks(trace, 3)) {
        const double omega0 = 2.0 * std::numbers::pi * f;
        for (double scale : {1.0, 0.5, 2.0}) {
            DampedSinusoidParams start = init;
            start.omega = scale * omega0;
            auto run = detail::levenberg_marquardt(model, model.encode(start));
            const bool better = run.cost < best.cost;
            if (run.converged && (!any_converged || better)) {
                best = std::move(run);
                any_converged = true;
            } else if (!any_converged && better) {
                best = std::move(run);
            }
        }
    }

    FitResult result;
    result.params = model.decode(best.u);
    result.params.omega = std::abs(result.params.omega);
    result.converged = best.converged;
    result.iterations = best.iterations;
    result.residual_rms = std::sqrt(best.cost / static_cast<double>(m));

    // Covariance s^2 (J^T J)^-1 in natural parameters; directions the data
    // cannot resolve get an infinite standard error.
    Eigen::VectorXd r;
    Eigen::MatrixXd jac;
    model.natural(result.params, r, jac);
    const auto p = static_cast<Eigen::Index>(model.dim());
    const double dof = static_cast<double>(m) - static_cast<double>(p);
    const double s2 = dof > 0.0 ? r.squaredNorm() / dof : 0.0;
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(jac.transpose() * jac);
    const Eigen::VectorXd ev = es.eigenvalues();
    const double ev_max = ev.cwiseAbs().maxCoeff();
    Eigen::VectorXd var = Eigen::VectorXd::Zero(p);
    for (Eigen::Index i = 0; i < p; ++i) {
        for (Eigen::Index k = 0; k < p; ++k) {
            const double v2 = es.eigenvectors()(i, k) * es.eigenvectors()(i, k);
            if (ev[k] > 1e-15 * ev_max) {
                var[i] += v2 / ev[k];
            } else if (v2 > 1e-12) {
                var[i] = std::numeric_limits<double>::infinity();
            }
        }
    }
    auto se = [&](Eigen::Index i) { return std::isinf(var[i]) ? var[i] : std::sqrt(s2 * var[i]); };
    Eigen::Index col = 0;
    result.std_errors.s0 = se(col++);
    result.std_errors.t_d = se(col++);
    result.std_errors.n = opts.fix_n ? 0.0 : se(col++);
    result.std_errors.omega = se(col++);
    result.std_errors.baseline = se(col);
    return result;
}

enum class NormalizationMode { DatasetMax, At35G };
enum class NormalizedKind { Frequency, Amplitude };

struct FitEntry {
    double field = 0.0;   // G
    Transition transition;
    OrientationKind orientation = OrientationKind::OffAxis;
    FitResult fit;
};

struct NormalizedPoint {
    double field = 0.0;
    double value = 0.0;
    NormalizedKind kind = NormalizedKind::Frequency;
    Transition transition;
    OrientationKind orientation = OrientationKind::OffAxis;
};

using GroupKey = std::pair<Transition, OrientationKind>;

inline std::string group_name(const GroupKey& g) {
    return g.first.name() + (g.second == OrientationKind::OnAxis ? "/on" : "/off");
}

/// DatasetMax: frequencies and amplitudes divided by their maxima over the whole
/// dataset. At35G: each (transition, orientation) group is scaled so its 35 G
/// point equals `theory_at_35g` for that group.
inline std::vector<NormalizedPoint> normalize_dataset(const std::vector<FitEntry>& entries, NormalizationMode mode,
                                                      const std::map<GroupKey, double>& theory_at_35g = {}) {
    if (entries.empty()) throw InvalidInput("normalize_dataset: dataset is empty");

    std::map<GroupKey, std::pair<double, double>> scale;   // (frequency, amplitude) divisors
    std::map<GroupKey, double> target;
    if (mode == NormalizationMode::DatasetMax) {
        double fmax = 0.0, amax = 0.0;
        for (const auto& e : entries) {
            fmax = std::max(fmax, e.fit.params.omega);
            amax = std::max(amax, e.fit.params.s0);
        }
        if (!(fmax > 0.0) || !(amax > 0.0)) throw InvalidInput("normalize_dataset: maxima must be positive");
        for (const auto& e : entries) {
            scale[{e.transition, e.orientation}] = {fmax, amax};
            target[{e.transition, e.orientation}] = 1.0;
        }
    } else {
        for (const auto& e : entries) {
            const GroupKey key{e.transition, e.orientation};
            if (std::abs(e.field - 35.0) <= 1e-9) scale[key] = {e.fit.params.omega, e.fit.params.s0};
        }
        for (const auto& e : entries) {
            const GroupKey key{e.transition, e.orientation};
            if (!scale.contains(key)) throw InvalidInput("normalize_dataset: no 35 G anchor for group " + group_name(key));
            const auto th = theory_at_35g.find(key);
            if (th == theory_at_35g.end())
                throw InvalidInput("normalize_dataset: no theory value at 35 G for group " + group_name(key));
            const auto [f, a] = scale[key];
            if (!(f > 0.0) || !(a > 0.0))
                throw InvalidInput("normalize_dataset: 35 G anchor of group " + group_name(key) + " is not positive");
            target[key] = th->second;
        }
    }

    std::vector<NormalizedPoint> out;
    out.reserve(2 * entries.size());
    for (const auto& e : entries) {
        const GroupKey key{e.transition, e.orientation};
        const auto [f, a] = scale.at(key);
        const double t = target.at(key);
        out.push_back({e.field, t * e.fit.params.omega / f, NormalizedKind::Frequency, e.transition, e.orientation});
        out.push_back({e.field, t * e.fit.params.s0 / a, NormalizedKind::Amplitude, e.transition, e.orientation});
    }
    return out;
}

} // namespace p1aug
