#pragma once

// Hyperfine augmentation of the nuclear gyromagnetic ratio: the rf drive
// operator is moved into the labeled eigenbasis and its matrix element between
// two labeled states is expressed in units of the bare nuclear coupling.

#include "p1aug/errors.hpp"
#include "p1aug/p1_model.hpp"
#include "p1aug/spin_core.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <span>
#include <vector>

namespace p1aug {

struct RfDrive {
    double amplitude = 1.0;                          // G
    std::array<double, 3> polarization{1.0, 0.0, 0.0};  // unit vector, P1 frame

    /// Normalizes `direction`; rejects a zero vector.
    static RfDrive along(double amplitude, const std::array<double, 3>& direction) {
        RfDrive d;
        d.amplitude = amplitude;
        d.polarization = normalized(direction);
        return d;
    }

    static std::array<double, 3> normalized(const std::array<double, 3>& v) {
        const double n = std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
        if (!(n > 0.0) || !std::isfinite(n)) throw InvalidInput("RfDrive: polarization must be a nonzero finite vector");
        return {v[0] / n, v[1] / n, v[2] / n};
    }
};

/// B_rf (gamma_e S.n + gamma_N I.n) in rad/us.
inline ComplexMatrix rf_hamiltonian(const P1Parameters& p, const RfDrive& drive) {
    p.validate();
    if (!std::isfinite(drive.amplitude) || drive.amplitude < 0.0)
        throw InvalidInput("rf_hamiltonian: amplitude must be finite and >= 0");
    const auto n = RfDrive::normalized(drive.polarization);
    const auto& ops = ProductOperators::get();
    ComplexMatrix h = p.gamma_e * ops.s_along(n) + p.gamma_n * ops.i_along(n);
    h *= kTwoPi * drive.amplitude;
    return h;
}

struct AugmentationResult {
    Transition transition;
    double alpha_raw = 0.0;    // |<a|H_rf|b>| / (gamma_N B_rf)
    double alpha_norm = 0.0;   // alpha_raw / bare high-field element; 0 when that element vanishes
    double electron_normalized = 0.0;  // |<a|H_rf|b>| / (|gamma_e| B_rf)
    double field = 0.0;        // G
    OrientationClass orientation;
};

/// |<x| (gamma_e/gamma_N) S.n + I.n |y>| between the asymptotic product states of
/// a transition: electron quantized along the static field, nucleus along the
/// hyperfine field direction A.b.
inline double bare_matrix_element(const P1Parameters& p, const OrientationClass& orientation,
                                  const std::array<double, 3>& polarization, const SpinId& x, const SpinId& y) {
    const auto b = orientation.field(1.0).unit_vector();
    std::array<double, 3> h{p.a_perp * b[0], p.a_perp * b[1], p.a_par * b[2]};
    const double hn = std::sqrt(h[0] * h[0] + h[1] * h[1] + h[2] * h[2]);
    if (hn > 0.0) {
        for (auto& v : h) v /= hn;
    } else {
        h = b;
    }
    const auto e = spin_operators(0.5);
    const auto nuc = spin_operators(1.0);
    const ComplexMatrix se = b[0] * e.sx + b[1] * e.sy + b[2] * e.sz;
    const ComplexMatrix in = h[0] * nuc.sx + h[1] * nuc.sy + h[2] * nuc.sz;
    const auto eig_e = hermitian_eig(se);    // ascending: m_S = -1/2, +1/2
    const auto eig_n = hermitian_eig(in);    // ascending: m_I = -1, 0, +1

    auto product_state = [&](const SpinId& id) {
        const std::size_t ce = id.twice_ms > 0 ? 1 : 0;
        const std::size_t cn = static_cast<std::size_t>(id.mi + 1);
        std::vector<Complex> v(kNumLevels);
        for (std::size_t r = 0; r < 2; ++r)
            for (std::size_t k = 0; k < 3; ++k) v[r * 3 + k] = eig_e.eigenvectors(r, ce) * eig_n.eigenvectors(k, cn);
        return v;
    };

    const auto n = RfDrive::normalized(polarization);
    const auto& ops = ProductOperators::get();
    const ComplexMatrix op = (p.gamma_e / p.gamma_n) * ops.s_along(n) + ops.i_along(n);
    return std::abs(matrix_element(product_state(x), op, product_state(y)));
}

/// Augmentation factor for `t` using an already labeled eigensystem.
inline AugmentationResult augmentation_factor(const P1Parameters& p, const LabeledEigensystem& sys,
                                              const RfDrive& drive, Transition t) {
    if (t.from == t.to) throw InvalidInput("augmentation_factor: transition labels must differ");
    if (!(drive.amplitude > 0.0)) throw InvalidInput("augmentation_factor: rf amplitude must be > 0");
    if (p.gamma_n == 0.0) throw InvalidInput("augmentation_factor: gamma_n must be nonzero");

    const ComplexMatrix hrf = rf_hamiltonian(p, drive);
    const double element = std::abs(matrix_element(sys.state(t.from), hrf, sys.state(t.to)));

    AugmentationResult r;
    r.transition = t;
    r.field = sys.field.magnitude;
    r.orientation = sys.orientation;
    r.alpha_raw = element / (kTwoPi * std::abs(p.gamma_n) * drive.amplitude);
    r.electron_normalized = p.gamma_e != 0.0 ? element / (kTwoPi * std::abs(p.gamma_e) * drive.amplitude) : 0.0;
    const double bare = bare_matrix_element(p, sys.orientation, drive.polarization,
                                            sys.asymptotic_id[index(t.from)], sys.asymptotic_id[index(t.to)]);
    r.alpha_norm = bare > 1e-12 ? r.alpha_raw / bare : 0.0;
    return r;
}

inline AugmentationResult augmentation_factor(const P1Parameters& p, double field_magnitude,
                                              const OrientationClass& orientation, const RfDrive& drive,
                                              Label from, Label to) {
    if (from == to) throw InvalidInput("augmentation_factor: transition labels must differ");
    return augmentation_factor(p, label_states(p, field_magnitude, orientation), drive, Transition{from, to});
}

struct AugmentationSample {
    double field = 0.0;
    double alpha_raw = 0.0;
    double alpha_norm = 0.0;
    double relative_to_max = 0.0;   // alpha_raw / max over the sweep
};

struct AugmentationCurve {
    Transition transition;
    OrientationClass orientation;
    std::vector<AugmentationSample> samples;
};

inline AugmentationCurve alpha_sweep(const P1Parameters& p, std::span<const double> fields,
                                     const OrientationClass& orientation, const RfDrive& drive, Transition t) {
    if (fields.empty()) throw InvalidInput("alpha_sweep: need at least one field");
    for (std::size_t k = 1; k < fields.size(); ++k)
        if (!(fields[k] > fields[k - 1])) throw InvalidInput("alpha_sweep: fields must be strictly increasing");

    const auto systems = continue_labels(p, orientation, fields);
    AugmentationCurve curve;
    curve.transition = t;
    curve.orientation = orientation;
    double peak = 0.0;
    for (const auto& sys : systems) {
        const auto r = augmentation_factor(p, sys, drive, t);
        curve.samples.push_back({sys.field.magnitude, r.alpha_raw, r.alpha_norm, 0.0});
        peak = std::max(peak, r.alpha_raw);
    }
    for (auto& s : curve.samples) s.relative_to_max = peak > 0.0 ? s.alpha_raw / peak : 0.0;
    return curve;
}

inline AugmentationCurve alpha_sweep(const P1Parameters& p, double b_min, double b_max, std::size_t points,
                                     const OrientationClass& orientation, const RfDrive& drive, Transition t) {
    const auto grid = linear_grid(b_min, b_max, points);
    return alpha_sweep(p, grid, orientation, drive, t);
}

} // namespace p1aug
