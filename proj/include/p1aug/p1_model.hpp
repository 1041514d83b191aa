#pragma once

// Coupled electron (S = 1/2) / 14N (I = 1) spin Hamiltonian of the P1 center,
// eigenstate labeling by continuation from high field, and transition tables.
//
// Conventions:
//   * configuration and reports in MHz and Gauss, matrices in rad/us
//     (factor 2*pi applied once, in build_hamiltonian);
//   * basis |m_S, m_I>, m_S in {+1/2, -1/2} outer, m_I in {+1, 0, -1} inner;
//   * the defect axis is z of the P1 frame and the static field is tilted.

#include "p1aug/errors.hpp"
#include "p1aug/spin_core.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace p1aug {

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;
inline constexpr std::size_t kNumLevels = 6;

struct P1Parameters {
    double gamma_e = -2.8;      // MHz/G, gamma_e / 2pi
    double gamma_n = 3.077e-4;  // MHz/G, gamma_N / 2pi
    double a_par = 114.0;       // MHz
    double a_perp = 81.34;      // MHz
    double q = -4.2;            // MHz

    void validate() const {
        for (double v : {gamma_e, gamma_n, a_par, a_perp, q})
            if (!std::isfinite(v)) throw InvalidInput("P1Parameters: all constants must be finite");
    }

    friend bool operator==(const P1Parameters&, const P1Parameters&) = default;
};

struct FieldConfig {
    double magnitude = 0.0;        // G
    double polar_theta = 0.0;      // degrees from the defect axis
    double azimuth_phi = 0.0;      // degrees

    void validate() const {
        if (!std::isfinite(magnitude) || magnitude < 0.0)
            throw InvalidInput("FieldConfig: magnitude must be finite and >= 0");
        if (!(polar_theta >= 0.0 && polar_theta <= 180.0))
            throw InvalidInput("FieldConfig: polar_theta must lie in [0, 180] degrees");
        if (!std::isfinite(azimuth_phi)) throw InvalidInput("FieldConfig: azimuth_phi must be finite");
    }

    std::array<double, 3> unit_vector() const {
        const double th = polar_theta * std::numbers::pi / 180.0;
        const double ph = azimuth_phi * std::numbers::pi / 180.0;
        return {std::sin(th) * std::cos(ph), std::sin(th) * std::sin(ph), std::cos(th)};
    }
};

enum class OrientationKind { OnAxis, OffAxis };

/// Jahn-Teller orientation class relative to the applied field.
///
/// Off-axis classes sit at the tetrahedral angle arccos(-1/3). Their field is
/// placed at azimuth 90 degrees so that the P1-frame x axis, the default rf
/// polarization, is perpendicular to the static field for both classes.
struct OrientationClass {
    OrientationKind kind = OrientationKind::OnAxis;
    double theta = 0.0;   // degrees
    double phi = 0.0;     // degrees
    int degeneracy = 1;

    static OrientationClass on_axis() { return {OrientationKind::OnAxis, 0.0, 0.0, 1}; }
    static OrientationClass off_axis() {
        return {OrientationKind::OffAxis, std::acos(-1.0 / 3.0) * 180.0 / std::numbers::pi, 90.0, 3};
    }
    static OrientationClass of(OrientationKind k) {
        return k == OrientationKind::OnAxis ? on_axis() : off_axis();
    }

    FieldConfig field(double magnitude) const { return {magnitude, theta, phi}; }
    std::string name() const { return kind == OrientationKind::OnAxis ? "on" : "off"; }

    friend bool operator==(const OrientationClass&, const OrientationClass&) = default;
};

enum class Label : std::size_t { a = 0, b, c, d, e, f };

inline constexpr std::array<Label, kNumLevels> kAllLabels{Label::a, Label::b, Label::c,
                                                          Label::d, Label::e, Label::f};

inline std::size_t index(Label l) noexcept { return static_cast<std::size_t>(l); }
inline char to_char(Label l) noexcept { return static_cast<char>('a' + index(l)); }

inline Label label_from_char(char ch) {
    if (ch < 'a' || ch > 'f') throw InvalidInput(std::string("unknown state label '") + ch + "'");
    return static_cast<Label>(ch - 'a');
}

/// High-field quantum numbers of a labeled state. m_S is stored doubled.
struct SpinId {
    int twice_ms = 1;
    int mi = 0;

    double ms() const noexcept { return 0.5 * twice_ms; }
    friend bool operator==(const SpinId&, const SpinId&) = default;
};

struct LabeledEigensystem {
    FieldConfig field;
    OrientationClass orientation;
    std::array<double, kNumLevels> energies{};     // MHz, indexed by label
    ComplexMatrix states;                           // column = label
    std::array<SpinId, kNumLevels> asymptotic_id{};

    double energy(Label l) const { return energies[index(l)]; }
    std::vector<Complex> state(Label l) const { return states.column(index(l)); }
};

/// Spin operators of the six-level product space, P1-frame components.
struct ProductOperators {
    std::array<ComplexMatrix, 3> s;
    std::array<ComplexMatrix, 3> i;

    static const ProductOperators& get() {
        static const ProductOperators ops = [] {
            const SpinOperatorSet e = spin_operators(0.5);
            const SpinOperatorSet n = spin_operators(1.0);
            const ComplexMatrix ie = ComplexMatrix::identity(2);
            const ComplexMatrix in = ComplexMatrix::identity(3);
            ProductOperators p;
            p.s = {kron(e.sx, in), kron(e.sy, in), kron(e.sz, in)};
            p.i = {kron(ie, n.sx), kron(ie, n.sy), kron(ie, n.sz)};
            return p;
        }();
        return ops;
    }

    ComplexMatrix s_along(const std::array<double, 3>& n) const {
        return n[0] * s[0] + n[1] * s[1] + n[2] * s[2];
    }
    ComplexMatrix i_along(const std::array<double, 3>& n) const {
        return n[0] * i[0] + n[1] * i[1] + n[2] * i[2];
    }
};

/// Static Hamiltonian in rad/us.
inline ComplexMatrix build_hamiltonian(const P1Parameters& p, const FieldConfig& field) {
    p.validate();
    field.validate();
    const auto& ops = ProductOperators::get();
    const auto u = field.unit_vector();
    const std::array<double, 3> b{field.magnitude * u[0], field.magnitude * u[1], field.magnitude * u[2]};

    ComplexMatrix h = -p.gamma_e * ops.s_along(b) - p.gamma_n * ops.i_along(b);
    h += p.a_par * (ops.s[2] * ops.i[2]);
    h += p.a_perp * (ops.s[0] * ops.i[0] + ops.s[1] * ops.i[1]);
    h += p.q * (ops.i[2] * ops.i[2]);
    h *= kTwoPi;
    // Products of Hermitian operators leave rounding-level asymmetry.
    return 0.5 * (h + h.adjoint());
}

struct ContinuationOptions {
    double reference_field = 1.0e4;   // G
    double max_ratio = 1.05;
    double min_step = 0.5;            // G, floor on the geometric step
    double hard_floor_step = 0.01;    // G, smallest step after halving
    double min_overlap = 0.5;
};

namespace detail {

/// Greedy bijection maximizing |<old_i|new_j>|^2. Returns new index per old index
/// and the smallest assigned overlap.
inline std::pair<std::array<std::size_t, kNumLevels>, double>
greedy_assignment(const ComplexMatrix& old_states, const ComplexMatrix& new_states) {
    std::array<std::array<double, kNumLevels>, kNumLevels> ov{};
    for (std::size_t i = 0; i < kNumLevels; ++i) {
        const auto u = old_states.column(i);
        for (std::size_t j = 0; j < kNumLevels; ++j) ov[i][j] = std::norm(inner_product(u, new_states.column(j)));
    }
    std::array<std::size_t, kNumLevels> match{};
    std::array<bool, kNumLevels> used_old{}, used_new{};
    double worst = 1.0;
    for (std::size_t round = 0; round < kNumLevels; ++round) {
        double best = -1.0;
        std::size_t bi = 0, bj = 0;
        for (std::size_t i = 0; i < kNumLevels; ++i) {
            if (used_old[i]) continue;
            for (std::size_t j = 0; j < kNumLevels; ++j) {
                if (!used_new[j] && ov[i][j] > best) {
                    best = ov[i][j];
                    bi = i;
                    bj = j;
                }
            }
        }
        used_old[bi] = used_new[bj] = true;
        match[bi] = bj;
        worst = std::min(worst, best);
    }
    return {match, worst};
}

/// Within each cluster of (numerically) degenerate eigenvalues, rotate the
/// eigenbasis onto the projections of the incoming states so that labels stay
/// well defined at exact degeneracies (Kramers doublets at zero field).
inline void align_degenerate_clusters(EigenDecomposition& eig, const ComplexMatrix& previous) {
    const std::size_t n = eig.eigenvalues.size();
    double scale = 1.0;
    for (double e : eig.eigenvalues) scale = std::max(scale, std::abs(e));
    const double tol = 1e-9 * scale;

    std::size_t start = 0;
    while (start < n) {
        std::size_t end = start + 1;
        while (end < n && eig.eigenvalues[end] - eig.eigenvalues[end - 1] <= tol) ++end;
        const std::size_t size = end - start;
        if (size > 1) {
            // Weight of each previous state inside the cluster subspace.
            std::vector<std::pair<double, std::size_t>> weight;
            for (std::size_t i = 0; i < previous.cols(); ++i) {
                const auto u = previous.column(i);
                double w = 0.0;
                for (std::size_t k = start; k < end; ++k)
                    w += std::norm(inner_product(eig.eigenvectors.column(k), u));
                weight.emplace_back(-w, i);
            }
            std::sort(weight.begin(), weight.end());

            std::vector<std::vector<Complex>> basis;
            for (std::size_t pick = 0; pick < previous.cols() && basis.size() < size; ++pick) {
                const auto u = previous.column(weight[pick].second);
                std::vector<Complex> proj(n, 0.0);
                for (std::size_t k = start; k < end; ++k) {
                    const auto vk = eig.eigenvectors.column(k);
                    const Complex c = inner_product(vk, u);
                    for (std::size_t r = 0; r < n; ++r) proj[r] += c * vk[r];
                }
                for (const auto& q : basis) {
                    const Complex c = inner_product(q, proj);
                    for (std::size_t r = 0; r < n; ++r) proj[r] -= c * q[r];
                }
                double norm = 0.0;
                for (const auto& z : proj) norm += std::norm(z);
                norm = std::sqrt(norm);
                if (norm < 1e-6) continue;
                for (auto& z : proj) z /= norm;
                basis.push_back(std::move(proj));
            }
            if (basis.size() == size) {
                for (std::size_t k = 0; k < size; ++k)
                    for (std::size_t r = 0; r < n; ++r) eig.eigenvectors(r, start + k) = basis[k][r];
            }
        }
        start = end;
    }
}

inline std::array<SpinId, kNumLevels> identify_asymptotic_states(const P1Parameters& p,
                                                                  const FieldConfig& field,
                                                                  const ComplexMatrix& states) {
    const auto& ops = ProductOperators::get();
    const auto b = field.unit_vector();
    // Nuclear quantization axis follows the hyperfine field A.b of the electron.
    std::array<double, 3> h{p.a_perp * b[0], p.a_perp * b[1], p.a_par * b[2]};
    const double hn = std::sqrt(h[0] * h[0] + h[1] * h[1] + h[2] * h[2]);
    if (hn > 0.0) {
        for (auto& x : h) x /= hn;
    } else {
        h = b;
    }
    const ComplexMatrix sb = ops.s_along(b);
    const ComplexMatrix ih = ops.i_along(h);

    std::array<SpinId, kNumLevels> ids{};
    std::array<int, kNumLevels> seen{};
    for (std::size_t k = 0; k < kNumLevels; ++k) {
        const auto v = states.column(k);
        const double sexp = matrix_element(v, sb, v).real();
        const double iexp = matrix_element(v, ih, v).real();
        ids[k].twice_ms = sexp >= 0.0 ? 1 : -1;
        ids[k].mi = static_cast<int>(std::lround(iexp));
        if (std::abs(ids[k].mi) > 1) throw NumericalFailure("asymptotic identification: |m_I| > 1");
        ++seen[static_cast<std::size_t>((ids[k].twice_ms > 0 ? 0 : 3) + (ids[k].mi + 1))];
    }
    for (int count : seen) {
        if (count != 1) {
            throw TrackingFailure("asymptotic (m_S, m_I) identification is not a bijection at the reference field",
                                  field.magnitude);
        }
    }
    return ids;
}

/// Reorder columns of `eig` according to `match` (old label -> new column).
inline LabeledEigensystem make_system(const EigenDecomposition& eig,
                                      const std::array<std::size_t, kNumLevels>& match,
                                      const FieldConfig& field, const OrientationClass& orientation,
                                      const std::array<SpinId, kNumLevels>& ids) {
    LabeledEigensystem sys;
    sys.field = field;
    sys.orientation = orientation;
    sys.states = ComplexMatrix(kNumLevels, kNumLevels);
    sys.asymptotic_id = ids;
    for (std::size_t l = 0; l < kNumLevels; ++l) {
        const std::size_t col = match[l];
        sys.energies[l] = eig.eigenvalues[col] / kTwoPi;
        for (std::size_t r = 0; r < kNumLevels; ++r) sys.states(r, l) = eig.eigenvectors(r, col);
    }
    return sys;
}

} // namespace detail

/// Labels eigenstates at every requested field by adiabatic continuation from the
/// reference field, where a..f are assigned in descending energy. Fields below
/// the reference are reached stepping down, fields above stepping up. Output
/// order matches the input order.
inline std::vector<LabeledEigensystem>
continue_labels(const P1Parameters& params, const OrientationClass& orientation,
                std::span<const double> fields, const ContinuationOptions& opts = {}) {
    params.validate();
    for (double b : fields)
        if (!std::isfinite(b) || b < 0.0) throw InvalidInput("continuation: field magnitudes must be finite and >= 0");

    const FieldConfig ref_field = orientation.field(opts.reference_field);
    const EigenDecomposition ref = hermitian_eig(build_hamiltonian(params, ref_field), {}, "H(reference field)");
    std::array<std::size_t, kNumLevels> descending{};
    for (std::size_t l = 0; l < kNumLevels; ++l) descending[l] = kNumLevels - 1 - l;
    const LabeledEigensystem ref_sys = detail::make_system(ref, descending, ref_field, orientation, {});
    const auto ids = detail::identify_asymptotic_states(params, ref_field, ref_sys.states);

    std::vector<LabeledEigensystem> out(fields.size());

    auto walk = [&](bool downward) {
        std::vector<std::size_t> targets;
        for (std::size_t k = 0; k < fields.size(); ++k)
            if (downward ? fields[k] <= opts.reference_field : fields[k] > opts.reference_field) targets.push_back(k);
        std::stable_sort(targets.begin(), targets.end(), [&](std::size_t x, std::size_t y) {
            return downward ? fields[x] > fields[y] : fields[x] < fields[y];
        });

        double current = opts.reference_field;
        ComplexMatrix states = ref_sys.states;
        LabeledEigensystem last = ref_sys;
        last.asymptotic_id = ids;

        for (std::size_t k : targets) {
            const double target = fields[k];
            while (current != target) {
                double step = std::max(downward ? current * (1.0 - 1.0 / opts.max_ratio)
                                                : current * (opts.max_ratio - 1.0),
                                       opts.min_step);
                bool accepted = false;
                while (!accepted) {
                    const double next = downward ? std::max(current - step, target) : std::min(current + step, target);
                    const FieldConfig fc = orientation.field(next);
                    EigenDecomposition eig = hermitian_eig(build_hamiltonian(params, fc), {}, "H(B)");
                    detail::align_degenerate_clusters(eig, states);
                    const auto [match, worst] = detail::greedy_assignment(states, eig.eigenvectors);
                    if (worst >= opts.min_overlap) {
                        last = detail::make_system(eig, match, fc, orientation, ids);
                        states = last.states;
                        current = next;
                        accepted = true;
                    } else if (step <= opts.hard_floor_step) {
                        throw TrackingFailure("eigenstate continuation is ambiguous near B = " +
                                                  std::to_string(next) + " G",
                                              next);
                    } else {
                        step = std::max(0.5 * step, opts.hard_floor_step);
                    }
                }
            }
            out[k] = last;
            out[k].field = orientation.field(target);
        }
    };
    walk(true);
    walk(false);
    return out;
}

inline LabeledEigensystem label_states(const P1Parameters& params, double field_magnitude,
                                       const OrientationClass& orientation, const ContinuationOptions& opts = {}) {
    if (!std::isfinite(field_magnitude) || field_magnitude < 0.0)
        throw InvalidInput("label_states: field magnitude must be finite and >= 0");
    const double f[1] = {field_magnitude};
    return continue_labels(params, orientation, f, opts).front();
}

inline std::vector<double> linear_grid(double b_min, double b_max, std::size_t points) {
    if (!(b_min >= 0.0) || !(b_max > b_min) || !std::isfinite(b_max))
        throw InvalidInput("field grid: require 0 <= b_min < b_max");
    if (points < 2) throw InvalidInput("field grid: require points >= 2");
    std::vector<double> g(points);
    for (std::size_t k = 0; k < points; ++k)
        g[k] = k + 1 == points ? b_max
                               : b_min + (b_max - b_min) * static_cast<double>(k) / static_cast<double>(points - 1);
    return g;
}

inline std::vector<LabeledEigensystem> energy_sweep(const P1Parameters& params, double b_min, double b_max,
                                                    std::size_t points, const OrientationClass& orientation) {
    const auto grid = linear_grid(b_min, b_max, points);
    return continue_labels(params, orientation, grid);
}

enum class TransitionClass { ElectronSQ, NuclearSQ, DoubleQuantum };

inline std::string to_string(TransitionClass c) {
    switch (c) {
    case TransitionClass::ElectronSQ: return "electron";
    case TransitionClass::NuclearSQ: return "nuclear";
    case TransitionClass::DoubleQuantum: return "double";
    }
    return "?";
}

inline TransitionClass classify(const SpinId& x, const SpinId& y) {
    const int dms = std::abs(x.twice_ms - y.twice_ms) / 2;
    const int dmi = std::abs(x.mi - y.mi);
    if (dms == 1 && dmi == 0) return TransitionClass::ElectronSQ;
    if (dms == 0 && dmi == 1) return TransitionClass::NuclearSQ;
    return TransitionClass::DoubleQuantum;
}

struct Transition {
    Label from = Label::a;
    Label to = Label::b;

    std::string name() const { return {to_char(from), to_char(to)}; }
    friend auto operator<=>(const Transition&, const Transition&) = default;
};

inline Transition parse_transition(const std::string& s) {
    if (s.size() != 2) throw InvalidInput("transition must be two labels such as 'de', got '" + s + "'");
    const Transition t{label_from_char(s[0]), label_from_char(s[1])};
    if (t.from == t.to) throw InvalidInput("transition labels must differ: '" + s + "'");
    return t;
}

struct TransitionRecord {
    Transition transition;
    double frequency = 0.0;   // MHz
    TransitionClass kind = TransitionClass::DoubleQuantum;
    double delta_ms = 0.0;
    int delta_mi = 0;
    OrientationClass orientation;
};

/// All 15 unordered level pairs in (a,b), (a,c), ..., (e,f) order.
inline std::vector<TransitionRecord> transition_table(const LabeledEigensystem& sys) {
    std::vector<TransitionRecord> out;
    out.reserve(15);
    for (std::size_t i = 0; i < kNumLevels; ++i) {
        for (std::size_t j = i + 1; j < kNumLevels; ++j) {
            const SpinId& x = sys.asymptotic_id[i];
            const SpinId& y = sys.asymptotic_id[j];
            TransitionRecord r;
            r.transition = {static_cast<Label>(i), static_cast<Label>(j)};
            r.frequency = std::abs(sys.energies[i] - sys.energies[j]);
            r.kind = classify(x, y);
            r.delta_ms = y.ms() - x.ms();
            r.delta_mi = y.mi - x.mi;
            r.orientation = sys.orientation;
            out.push_back(r);
        }
    }
    return out;
}

} // namespace p1aug
