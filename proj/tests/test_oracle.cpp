#include "oracle/mp_oracle.hpp"
#include "p1aug/augmentation.hpp"
#include "p1aug/p1_model.hpp"

#include <catch_amalgamated.hpp>

using namespace p1aug;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

double overlap(const LabeledEigensystem& sys, std::size_t l, const oracle::MpVector& v) {
    Complex s = 0.0;
    for (std::size_t r = 0; r < kNumLevels; ++r)
        s += std::conj(sys.states(r, l)) *
             Complex(static_cast<double>(v[r].real()), static_cast<double>(v[r].imag()));
    return std::norm(s);
}

} // namespace

TEST_CASE("labeled levels agree with the multiprecision oracle", "[oracle]") {
    const P1Parameters p;
    const std::vector<double> fields{10.0, 20.0, 35.0, 50.0, 75.0, 100.0};
    for (const auto& o : {OrientationClass::on_axis(), OrientationClass::off_axis()}) {
        const auto systems = continue_labels(p, o, fields);
        for (std::size_t k = 0; k < fields.size(); ++k) {
            INFO(o.name() << " at " << fields[k] << " G");
            const auto ref = oracle::labeled(p, fields[k], o.theta, o.phi);
            for (std::size_t l = 0; l < kNumLevels; ++l) {
                const double e = static_cast<double>(ref.energies[l]);
                CHECK_THAT(systems[k].energies[l], WithinAbs(e, 1e-9 * std::max(1.0, std::abs(e))));
                CHECK(overlap(systems[k], l, ref.states[l]) > 1.0 - 1e-10);
            }
        }
    }
}

TEST_CASE("nuclear matrix elements agree with the multiprecision oracle", "[oracle]") {
    const P1Parameters p;
    const RfDrive drive;
    const std::pair<Label, Label> nuclear[] = {
        {Label::a, Label::b}, {Label::b, Label::c}, {Label::d, Label::e}, {Label::e, Label::f}};
    for (const auto& o : {OrientationClass::on_axis(), OrientationClass::off_axis()}) {
        for (double b : {20.0, 35.0, 100.0}) {
            const auto sys = label_states(p, b, o);
            const auto ref = oracle::labeled(p, b, o.theta, o.phi);
            for (const auto& [x, y] : nuclear) {
                INFO(o.name() << " " << to_char(x) << to_char(y) << " at " << b << " G");
                const double expected = oracle::alpha_raw(p, ref, static_cast<int>(index(x)), static_cast<int>(index(y)));
                CHECK_THAT(augmentation_factor(p, sys, drive, Transition{x, y}).alpha_raw, WithinRel(expected, 1e-9));
            }
        }
    }
}
