#include "p1aug/p1_model.hpp"

#include <catch_amalgamated.hpp>

#include <algorithm>
#include <random>
#include <map>
#include <set>

using namespace p1aug;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

std::vector<double> sorted_energies(const LabeledEigensystem& sys) {
    std::vector<double> e(sys.energies.begin(), sys.energies.end());
    std::sort(e.begin(), e.end());
    return e;
}

std::vector<double> direct_energies(const P1Parameters& p, const FieldConfig& f) {
    auto ev = hermitian_eig(build_hamiltonian(p, f)).eigenvalues;
    for (auto& x : ev) x /= kTwoPi;
    return ev;
}

} // namespace

TEST_CASE("default parameters", "[p1_model]") {
    const P1Parameters p;
    CHECK(p.gamma_e == -2.8);
    CHECK(p.gamma_n == 3.077e-4);
    CHECK(p.a_par == 114.0);
    CHECK(p.a_perp == 81.34);
    CHECK(p.q == -4.2);

    CHECK(OrientationClass::on_axis().degeneracy == 1);
    CHECK(OrientationClass::off_axis().degeneracy == 3);
    CHECK_THAT(OrientationClass::off_axis().theta, WithinAbs(109.4712206, 1e-6));
}

TEST_CASE("Hamiltonian trace depends only on the quadrupole term", "[p1_model][property]") {
    const P1Parameters p;
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> mag(0.0, 2000.0), th(0.0, 180.0), ph(0.0, 360.0);
    for (int k = 0; k < 100; ++k) {
        const FieldConfig f{mag(rng), th(rng), ph(rng)};
        const ComplexMatrix h = build_hamiltonian(p, f);
        CHECK(h.is_hermitian(1e-12));
        CHECK_THAT(h.trace().real() / kTwoPi, WithinAbs(4.0 * p.q, 1e-9));
    }
}

TEST_CASE("on-axis extremal state is exact at 100 G", "[p1_model]") {
    const P1Parameters p;
    const ComplexMatrix h = build_hamiltonian(p, {100.0, 0.0, 0.0});
    CHECK_THAT(h(0, 0).real() / kTwoPi, WithinAbs(192.76923, 1e-9));
    for (std::size_t c = 1; c < 6; ++c) CHECK(std::abs(h(0, c)) <= 1e-12);

    const auto sys = label_states(p, 100.0, OrientationClass::on_axis());
    CHECK_THAT(sys.energy(Label::a), WithinAbs(192.76923, 1e-6));
}

TEST_CASE("on-axis Hamiltonian conserves Sz + Iz", "[p1_model][property]") {
    const P1Parameters p;
    const auto& ops = ProductOperators::get();
    const ComplexMatrix fz = ops.s[2] + ops.i[2];
    for (double b : {0.0, 12.5, 35.0, 300.0}) {
        const ComplexMatrix h = build_hamiltonian(p, {b, 0.0, 0.0});
        CHECK(commutator(h, fz).max_abs() <= 1e-12 * std::max(1.0, h.max_abs()));
        // |+1/2,+1> and |-1/2,-1> are unmixed.
        for (std::size_t c = 0; c < 6; ++c) {
            if (c != 0) CHECK(std::abs(h(0, c)) <= 1e-12);
            if (c != 5) CHECK(std::abs(h(5, c)) <= 1e-12);
        }
    }
}

TEST_CASE("zero field removes the orientation dependence", "[p1_model]") {
    const P1Parameters p;
    const auto on = direct_energies(p, OrientationClass::on_axis().field(0.0));
    const auto off = direct_energies(p, OrientationClass::off_axis().field(0.0));
    for (std::size_t k = 0; k < 6; ++k) CHECK_THAT(on[k], WithinAbs(off[k], 1e-12));
}

TEST_CASE("eigenvalues do not depend on the field azimuth", "[p1_model][property]") {
    const P1Parameters p;
    const double theta = OrientationClass::off_axis().theta;
    for (double b : {5.0, 35.0, 100.0, 1000.0}) {
        const auto ref = direct_energies(p, {b, theta, 0.0});
        for (double phi : {30.0, 90.0, 120.0, 240.0, 317.0}) {
            const auto e = direct_energies(p, {b, theta, phi});
            for (std::size_t k = 0; k < 6; ++k) CHECK_THAT(e[k], WithinAbs(ref[k], 1e-10));
        }
    }
}

TEST_CASE("labels at the reference field follow the high-field quantum numbers", "[p1_model]") {
    const P1Parameters p;
    const auto sys = label_states(p, 1.0e4, OrientationClass::on_axis());
    const std::array<SpinId, 6> expected{SpinId{1, 1},  SpinId{1, 0},  SpinId{1, -1},
                                         SpinId{-1, -1}, SpinId{-1, 0}, SpinId{-1, 1}};
    for (std::size_t l = 0; l < 6; ++l) CHECK(sys.asymptotic_id[l] == expected[l]);
    for (std::size_t l = 1; l < 6; ++l) CHECK(sys.energies[l - 1] > sys.energies[l]);

    // Oracle: dominant basis component of each directly diagonalized state.
    const auto eig = hermitian_eig(build_hamiltonian(p, {1.0e4, 0.0, 0.0}));
    for (std::size_t l = 0; l < 6; ++l) {
        const std::size_t col = 5 - l;
        std::size_t best = 0;
        for (std::size_t r = 0; r < 6; ++r)
            if (std::abs(eig.eigenvectors(r, col)) > std::abs(eig.eigenvectors(best, col))) best = r;
        const SpinId id{best < 3 ? 1 : -1, 1 - static_cast<int>(best % 3)};
        CHECK(id == expected[l]);
        CHECK(std::norm(eig.eigenvectors(best, col)) > 1.0 - 1e-3);
    }

    const auto off = label_states(p, 1.0e4, OrientationClass::off_axis());
    for (std::size_t l = 0; l < 6; ++l) CHECK(off.asymptotic_id[l] == expected[l]);
}

TEST_CASE("labels at zero field still form a bijection", "[p1_model]") {
    const P1Parameters p;
    for (const auto& o : {OrientationClass::on_axis(), OrientationClass::off_axis()}) {
        const auto sys = label_states(p, 0.0, o);
        const auto direct = direct_energies(p, o.field(0.0));
        const auto labeled = sorted_energies(sys);
        for (std::size_t k = 0; k < 6; ++k) CHECK_THAT(labeled[k], WithinAbs(direct[k], 1e-9));
        const ComplexMatrix gram = sys.states.adjoint() * sys.states;
        CHECK((gram - ComplexMatrix::identity(6)).max_abs() <= 1e-9);
        std::set<std::pair<int, int>> ids;
        for (const auto& id : sys.asymptotic_id) ids.insert({id.twice_ms, id.mi});
        CHECK(ids.size() == 6);
    }
}

TEST_CASE("on-axis and off-axis levels differ at 35 G", "[p1_model]") {
    const P1Parameters p;
    const auto on = label_states(p, 35.0, OrientationClass::on_axis());
    const auto off = label_states(p, 35.0, OrientationClass::off_axis());
    const auto don = direct_energies(p, OrientationClass::on_axis().field(35.0));
    const auto doff = direct_energies(p, OrientationClass::off_axis().field(35.0));
    const auto son = sorted_energies(on), soff = sorted_energies(off);
    double biggest = 0.0;
    for (std::size_t k = 0; k < 6; ++k) {
        CHECK_THAT(son[k], WithinAbs(don[k], 1e-9));
        CHECK_THAT(soff[k], WithinAbs(doff[k], 1e-9));
        biggest = std::max(biggest, std::abs(on.energies[k] - off.energies[k]));
    }
    CHECK(biggest > 0.1);
}

TEST_CASE("energy sweep is continuous and consistent", "[p1_model]") {
    const P1Parameters p;
    const auto on = OrientationClass::on_axis();
    const auto sweep = energy_sweep(p, 0.0, 100.0, 101, on);
    REQUIRE(sweep.size() == 101);
    for (std::size_t k = 0; k < sweep.size(); ++k) {
        const auto direct = direct_energies(p, on.field(sweep[k].field.magnitude));
        const auto labeled = sorted_energies(sweep[k]);
        for (std::size_t i = 0; i < 6; ++i) CHECK_THAT(labeled[i], WithinAbs(direct[i], 1e-9));
        if (k > 0) {
            CHECK(std::abs(sweep[k].energy(Label::a) - sweep[k - 1].energy(Label::a)) < 3.0);
            CHECK(sweep[k].energy(Label::a) > sweep[k - 1].energy(Label::a));
            // Label permanence between neighbours.
            for (std::size_t l = 0; l < 6; ++l)
                CHECK(std::norm(inner_product(sweep[k].states.column(l), sweep[k - 1].states.column(l))) > 0.5);
        }
    }

    // Midpoint check: re-diagonalize between grid points, each label keeps its state.
    for (std::size_t k = 0; k + 1 < sweep.size(); k += 10) {
        const double mid = 0.5 * (sweep[k].field.magnitude + sweep[k + 1].field.magnitude);
        const auto m = label_states(p, mid, on);
        for (std::size_t l = 0; l < 6; ++l)
            CHECK(std::norm(inner_product(m.states.column(l), sweep[k].states.column(l))) > 0.5);
    }
}

TEST_CASE("sweep input validation", "[p1_model]") {
    const P1Parameters p;
    CHECK_THROWS_AS(energy_sweep(p, 10.0, 5.0, 11, OrientationClass::on_axis()), InvalidInput);
    CHECK_THROWS_AS(energy_sweep(p, 0.0, 5.0, 1, OrientationClass::on_axis()), InvalidInput);
    CHECK_THROWS_AS(label_states(p, -1.0, OrientationClass::on_axis()), InvalidInput);
}

TEST_CASE("continuation failure reports the field", "[p1_model]") {
    ContinuationOptions strict;
    strict.min_overlap = 1.5;   // unattainable
    try {
        label_states(P1Parameters{}, 50.0, OrientationClass::on_axis(), strict);
        FAIL("expected TrackingFailure");
    } catch (const TrackingFailure& e) {
        CHECK(e.field_gauss() < 1.0e4);
        CHECK(e.field_gauss() >= 50.0);
    }
}

TEST_CASE("labels continue above the reference field", "[p1_model]") {
    const P1Parameters p;
    const auto sys = label_states(p, 1.0e6, OrientationClass::on_axis());
    // Nuclear Zeeman overtakes the hyperfine splitting near 1.7e5 G, so the
    // m_S = +1/2 levels are no longer in descending label order.
    CHECK(sys.energy(Label::b) > sys.energy(Label::a));
    // |+1/2,+1> keeps label a: it is an exact eigenstate on axis.
    CHECK(std::norm(sys.states(0, 0)) > 1.0 - 1e-12);
}

TEST_CASE("transition table classification", "[p1_model]") {
    const P1Parameters p;
    for (double b : {0.0, 35.0, 100.0}) {
        const auto table = transition_table(label_states(p, b, OrientationClass::off_axis()));
        REQUIRE(table.size() == 15);
        int e = 0, n = 0, d = 0;
        std::set<std::string> nuclear;
        for (const auto& r : table) {
            CHECK(r.frequency >= 0.0);
            if (r.kind == TransitionClass::ElectronSQ) ++e;
            if (r.kind == TransitionClass::NuclearSQ) {
                ++n;
                nuclear.insert(r.transition.name());
            }
            if (r.kind == TransitionClass::DoubleQuantum) ++d;
        }
        CHECK(e == 3);
        CHECK(n == 4);
        CHECK(d == 8);
        CHECK(nuclear == std::set<std::string>{"ab", "bc", "de", "ef"});
    }
}

TEST_CASE("electron lines at 100 G", "[p1_model][golden]") {
    // Golden values from independent dense diagonalization (numpy eigh, 1e4 G continuation).
    const P1Parameters p;
    auto electron = [&](const OrientationClass& o) {
        std::map<std::string, double> out;
        for (const auto& r : transition_table(label_states(p, 100.0, o)))
            if (r.kind == TransitionClass::ElectronSQ) out[r.transition.name()] = r.frequency;
        return out;
    };
    const auto on = electron(OrientationClass::on_axis());
    CHECK_THAT(on.at("af"), WithinAbs(403.4337955, 1e-6));
    CHECK_THAT(on.at("be"), WithinAbs(303.6299968, 1e-6));
    CHECK_THAT(on.at("cd"), WithinAbs(180.1962013, 1e-6));
    // On-axis lines are split by roughly A_par.
    CHECK_THAT(on.at("af") - on.at("be"), WithinRel(114.0, 0.15));
    CHECK_THAT(on.at("be") - on.at("cd"), WithinRel(114.0, 0.15));

    const auto off = electron(OrientationClass::off_axis());
    CHECK_THAT(off.at("af"), WithinAbs(380.2087517, 1e-6));
    CHECK_THAT(off.at("be"), WithinAbs(311.8151592, 1e-6));
    CHECK_THAT(off.at("cd"), WithinAbs(213.0463464, 1e-6));
}

TEST_CASE("ab and de are isolated at 35 G on axis", "[p1_model]") {
    const auto table = transition_table(label_states(P1Parameters{}, 35.0, OrientationClass::on_axis()));
    for (const char* name : {"ab", "de"}) {
        const auto it = std::find_if(table.begin(), table.end(), [&](const auto& r) { return r.transition.name() == name; });
        REQUIRE(it != table.end());
        for (const auto& r : table)
            if (r.transition != it->transition) CHECK(std::abs(r.frequency - it->frequency) > 2.0);
    }
}
