#pragma once

// DEER spectrum synthesis. Line contrast is modeled as orientation degeneracy
// times the rf drive matrix element, with uniform level populations.

#include "p1aug/augmentation.hpp"
#include "p1aug/errors.hpp"
#include "p1aug/p1_model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <utility>
#include <vector>

namespace p1aug {

struct SpectralLine {
    double frequency = 0.0;   // MHz
    double amplitude = 0.0;
    Transition transition;
    TransitionClass kind = TransitionClass::DoubleQuantum;
    OrientationClass orientation;
};

enum class Lineshape { Lorentzian, Gaussian };

struct SpectrumConfig {
    double f_min = 0.0;        // MHz
    double f_max = 500.0;      // MHz
    std::size_t samples = 2001;
    double linewidth = 1.0;    // MHz, FWHM
    Lineshape lineshape = Lineshape::Lorentzian;
    double amplitude_floor = 0.0;

    void validate() const {
        if (!(f_min < f_max) || !std::isfinite(f_min) || !std::isfinite(f_max))
            throw InvalidInput("SpectrumConfig: require finite f_min < f_max");
        if (samples < 2) throw InvalidInput("SpectrumConfig: samples must be >= 2");
        if (!(linewidth > 0.0) || !std::isfinite(linewidth)) throw InvalidInput("SpectrumConfig: linewidth must be > 0");
        if (!(amplitude_floor >= 0.0)) throw InvalidInput("SpectrumConfig: amplitude_floor must be >= 0");
    }
};

struct Spectrum {
    SpectrumConfig config;
    std::vector<SpectralLine> sticks;
    std::vector<std::pair<double, double>> curve;   // (MHz, contrast)
};

/// Stick lines for the on-axis class followed by the off-axis class, each in
/// transition_table order. The strongest weighted line has amplitude 1.
inline std::vector<SpectralLine> stick_spectrum(const P1Parameters& p, double field, const RfDrive& drive) {
    const ComplexMatrix hrf = rf_hamiltonian(p, drive);
    std::vector<SpectralLine> lines;
    for (const auto& orientation : {OrientationClass::on_axis(), OrientationClass::off_axis()}) {
        const auto sys = label_states(p, field, orientation);
        for (const auto& rec : transition_table(sys)) {
            const double element =
                std::abs(matrix_element(sys.state(rec.transition.from), hrf, sys.state(rec.transition.to)));
            lines.push_back({rec.frequency, orientation.degeneracy * element, rec.transition, rec.kind, orientation});
        }
    }
    double peak = 0.0;
    for (const auto& l : lines) peak = std::max(peak, l.amplitude);
    for (auto& l : lines) l.amplitude = peak > 0.0 ? l.amplitude / peak : 0.0;
    return lines;
}

/// Unit-peak line profile at detuning x for full width at half maximum `fwhm`.
inline double line_profile(Lineshape shape, double x, double fwhm) {
    const double u = 2.0 * x / fwhm;
    if (shape == Lineshape::Lorentzian) return 1.0 / (1.0 + u * u);
    return std::exp(-std::numbers::ln2 * u * u);
}

inline Spectrum broaden(const std::vector<SpectralLine>& sticks, const SpectrumConfig& config) {
    config.validate();
    Spectrum s;
    s.config = config;
    for (const auto& l : sticks)
        if (l.amplitude >= config.amplitude_floor) s.sticks.push_back(l);

    const double lo = config.f_min - 10.0 * config.linewidth;
    const double hi = config.f_max + 10.0 * config.linewidth;
    s.curve.resize(config.samples);
    for (std::size_t k = 0; k < config.samples; ++k) {
        const double f = k + 1 == config.samples
                             ? config.f_max
                             : config.f_min + (config.f_max - config.f_min) * static_cast<double>(k) /
                                                  static_cast<double>(config.samples - 1);
        double y = 0.0;
        for (const auto& l : s.sticks) {
            if (l.frequency < lo || l.frequency > hi) continue;
            y += l.amplitude * line_profile(config.lineshape, f - l.frequency, config.linewidth);
        }
        s.curve[k] = {f, y};
    }
    return s;
}

/// max NuclearSQ amplitude / max ElectronSQ amplitude over a stick list.
inline double nuclear_to_electron_ratio(const std::vector<SpectralLine>& lines) {
    double nuc = 0.0, ele = 0.0;
    for (const auto& l : lines) {
        if (l.kind == TransitionClass::NuclearSQ) nuc = std::max(nuc, l.amplitude);
        if (l.kind == TransitionClass::ElectronSQ) ele = std::max(ele, l.amplitude);
    }
    return ele > 0.0 ? nuc / ele : 0.0;
}

} // namespace p1aug
