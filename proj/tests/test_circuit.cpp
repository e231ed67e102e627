#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "ionwire/circuit.hpp"
#include "ionwire/geometry.hpp"

using namespace ionwire;
using namespace ionwire::circuit;

namespace {

const IonSpecies ca = IonSpecies::calcium40();
const WireSpec wire = WireSpec::reference_device();

TrapSite site_at(double height, double omega) {
    TrapSite s;
    s.vertical_frequency = omega;
    s.physical_height = height;
    s.effective_distance = geometry::paddle_effective_distance(wire, height);
    return s;
}

double kappa_hz(const TrapSite& a, const TrapSite& b) {
    return angular_to_hz(wire_coupling_rate(ca, a, b, wire));
}

}  // namespace

TEST(Equivalent, InductanceOfCalciumBranch) {
    TrapSite s{hz_to_angular(2e6), 50e-6, 130e-6, 0, 0, 0};
    const auto c = circuit_equivalent(ca, s);
    // Direct arithmetic: m D^2 / q^2.
    const double m = ca.mass();
    const double q = constants::elementary_charge;
    EXPECT_NEAR(c.inductance / (m * 130e-6 * 130e-6 / (q * q)), 1.0, 1e-14);
    EXPECT_NEAR(c.inductance, 4.369e4, 0.01e4);
    const double w = s.vertical_frequency;
    EXPECT_NEAR(w * w * c.inductance * c.capacitance, 1.0, 1e-12);
}

TEST(Equivalent, ScalingWithDistanceAndCharge) {
    TrapSite s{hz_to_angular(2e6), 50e-6, 130e-6, 0, 0, 0};
    const auto base = circuit_equivalent(ca, s);
    auto s2 = s;
    s2.effective_distance *= 2;
    const auto doubled = circuit_equivalent(ca, s2);
    EXPECT_NEAR(doubled.inductance / base.inductance, 4.0, 1e-12);
    EXPECT_NEAR(doubled.capacitance / base.capacitance, 0.25, 1e-12);
    auto ca2 = ca;
    ca2.charge_number = 2;
    EXPECT_NEAR(circuit_equivalent(ca2, s).inductance / base.inductance, 0.25, 1e-12);
}

TEST(Coupling, ExpectedRateAtSixtyMicrons) {
    const auto s = site_at(60e-6, hz_to_angular(2e6));
    const double k = kappa_hz(s, s);
    EXPECT_GE(k, 7.5);
    EXPECT_LE(k, 12.5);
    EXPECT_NEAR(k, 9.6264, 1e-3);
}

TEST(Coupling, PredictedRateAtUnequalHeights) {
    const double w = hz_to_angular(1.990e6);
    const double k = kappa_hz(site_at(50e-6, w), site_at(70e-6, w));
    EXPECT_NEAR(k / 10.2, 1.0, 0.25);
    EXPECT_NEAR(k, 9.6428, 1e-3);
}

TEST(Coupling, TwoFormsAgree) {
    for (double h : {30e-6, 50e-6, 90e-6}) {
        for (double f : {0.5e6, 2e6, 7e6}) {
            const auto s = site_at(h, hz_to_angular(f));
            const auto branch = circuit_equivalent(ca, s);
            EXPECT_NEAR(wire_coupling_rate_from_circuit(branch, wire.capacitance) /
                            wire_coupling_rate(ca, s, s, wire),
                        1.0, 1e-12);
        }
    }
}

TEST(Coupling, InverseFrequencyScaling) {
    const auto s1 = site_at(60e-6, hz_to_angular(1e6));
    const auto s2 = site_at(60e-6, hz_to_angular(2e6));
    EXPECT_NEAR(kappa_hz(s2, s2) / kappa_hz(s1, s1), 0.5, 1e-12);
    // Moving from 1.368 MHz to 1.990 MHz reduces kappa by ~sqrt(2).
    EXPECT_NEAR(1.990 / 1.368, std::sqrt(2.0), 0.03 * std::sqrt(2.0));
}

TEST(Coupling, ScalingLaws) {
    const double w = hz_to_angular(2e6);
    const double base = wire_coupling_rate(ca, w, 130e-6, 170e-6, 30e-15);
    const double k = 3.0;
    auto heavy = ca;
    heavy.mass_number *= k;
    auto charged = ca;
    charged.charge_number = 3;
    EXPECT_NEAR(wire_coupling_rate(heavy, w, 130e-6, 170e-6, 30e-15) / base, 1.0 / k, 1e-12);
    EXPECT_NEAR(wire_coupling_rate(charged, w, 130e-6, 170e-6, 30e-15) / base, 9.0, 1e-12);
    EXPECT_NEAR(wire_coupling_rate(ca, k * w, 130e-6, 170e-6, 30e-15) / base, 1.0 / k, 1e-12);
    EXPECT_NEAR(wire_coupling_rate(ca, w, 130e-6, 170e-6, k * 30e-15) / base, 1.0 / k, 1e-12);
    EXPECT_NEAR(wire_coupling_rate(ca, w, k * 130e-6, 170e-6, 30e-15) / base, 1.0 / k, 1e-12);
    EXPECT_NEAR(wire_coupling_rate(ca, w, 130e-6, k * 170e-6, 30e-15) / base, 1.0 / k, 1e-12);
}

TEST(Coupling, DimensionalConsistencyUnderMassAndCharge) {
    // 10x mass and 10x charge: q^2/m scales by 10.
    const double w = hz_to_angular(2e6);
    IonSpecies scaled{10, ca.mass_number * 10, "scaled"};
    EXPECT_NEAR(wire_coupling_rate(scaled, w, 130e-6, 130e-6, 30e-15) /
                    wire_coupling_rate(ca, w, 130e-6, 130e-6, 30e-15),
                10.0, 1e-12);
}

TEST(Coupling, ElectronSwap) {
    const double k_ca = wire_coupling_rate(ca, hz_to_angular(2e6), 130e-6, 130e-6, 30e-15);
    const double k_e = wire_coupling_rate(IonSpecies::electron(), hz_to_angular(100e6), 130e-6,
                                          130e-6, 30e-15);
    const double expected = (ca.mass() / constants::electron_mass) * (2e6 / 100e6);
    EXPECT_NEAR(k_e / k_ca, expected, 1e-9 * expected);
    EXPECT_NEAR(expected, 1457.0, 1.0);
}

TEST(Coupling, RejectsOffResonantSites) {
    const auto a = site_at(60e-6, hz_to_angular(2.000e6));
    const auto b = site_at(60e-6, hz_to_angular(2.005e6));
    EXPECT_THROW(wire_coupling_rate(ca, a, b, wire), OffResonance);
}

TEST(Coulomb, ReferenceRate) {
    const double w = hz_to_angular(1.99e6);
    const double om = coulomb_coupling_rate(ca, w, 620e-6);
    EXPECT_NEAR(angular_to_hz(om), 0.18568, 1e-4);
    const double ratio = hz_to_angular(11.1) / om;
    EXPECT_NEAR(ratio, 60.0, 15.0);
    EXPECT_NEAR(ratio, 59.779, 1e-2);
}

TEST(Coulomb, InverseCubeLaw) {
    const double w = hz_to_angular(1.99e6);
    EXPECT_NEAR(coulomb_coupling_rate(ca, w, 310e-6) / coulomb_coupling_rate(ca, w, 620e-6), 8.0,
                1e-12);
    EXPECT_THROW(coulomb_coupling_rate(ca, w, 0.0), InvalidInput);
}

TEST(Coulomb, CrossoverRadius) {
    const double w = hz_to_angular(1.99e6);
    const double kappa = hz_to_angular(11.1);
    const double r = coulomb_crossover_radius(ca, w, kappa);
    EXPECT_NEAR(coulomb_coupling_rate(ca, w, r) / kappa, 1.0, 1e-12);
    EXPECT_NEAR(r * 1e6, 158.57, 0.05);
    // At 50 um the free-space rate dominates.
    EXPECT_GT(coulomb_coupling_rate(ca, w, 50e-6), kappa);
}

TEST(Report, RatioAndPurity) {
    const double w = hz_to_angular(1.99e6);
    const auto a = enhancement_report(ca, site_at(50e-6, w), site_at(70e-6, w), wire);
    const auto b = enhancement_report(ca, site_at(50e-6, w), site_at(70e-6, w), wire);
    EXPECT_EQ(a.kappa, b.kappa);
    EXPECT_EQ(a.enhancement_ratio, b.enhancement_ratio);
    EXPECT_DOUBLE_EQ(a.enhancement_ratio, a.kappa / a.coulomb_rate);
    EXPECT_NEAR(a.enhancement_ratio, 60.0, 15.0);
}

TEST(Report, RatioIndependentOfSpecies) {
    const double w = hz_to_angular(1.99e6);
    const auto s1 = site_at(50e-6, w), s2 = site_at(70e-6, w);
    const double ref = enhancement_report(ca, s1, s2, wire).enhancement_ratio;
    for (const IonSpecies& sp : {IonSpecies{1, 9.012, "9Be+"}, IonSpecies{2, 88.0, "88Sr2+"},
                                 IonSpecies::electron()}) {
        EXPECT_NEAR(enhancement_report(sp, s1, s2, wire).enhancement_ratio / ref, 1.0, 1e-12);
    }
}
