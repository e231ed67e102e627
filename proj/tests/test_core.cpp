#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "ionwire/core.hpp"

using namespace ionwire;

namespace {
const double w2mhz = hz_to_angular(2e6);
const double hbar = constants::reduced_planck;
}  // namespace

TEST(Conversions, ZeroPointEnergy) {
    EXPECT_NEAR(quanta_to_energy(0.0, w2mhz), 6.626070e-28, 1e-33);
    EXPECT_DOUBLE_EQ(quanta_to_energy(0.0, w2mhz), 0.5 * hbar * w2mhz);
}

TEST(Conversions, LinearInOccupation) {
    EXPECT_DOUBLE_EQ(quanta_to_energy(200.0, w2mhz), 200.5 * hbar * w2mhz);
}

TEST(Conversions, EnergyToQuanta) {
    EXPECT_NEAR(energy_to_quanta(0.5 * hbar * w2mhz, w2mhz), 0.0, 1e-12);
    EXPECT_NEAR(energy_to_quanta(1.5 * hbar * w2mhz, w2mhz), 1.0, 1e-12);
    EXPECT_THROW(energy_to_quanta(0.49 * hbar * w2mhz, w2mhz), Unphysical);
}

TEST(Conversions, RejectsNonFinite) {
    EXPECT_THROW(quanta_to_energy(NAN, w2mhz), InvalidInput);
    EXPECT_THROW(quanta_to_energy(1.0, INFINITY), InvalidInput);
    EXPECT_THROW(quanta_to_energy(-1.0, w2mhz), InvalidInput);
}

TEST(Conversions, EnergyRoundTripProperty) {
    std::mt19937_64 gen(7);
    std::uniform_real_distribution<double> logn(-3.0, 6.0), logw(5.0, 9.0);
    for (int k = 0; k < 1000; ++k) {
        const double n = std::pow(10.0, logn(gen));
        const double w = std::pow(10.0, logw(gen));
        const double back = energy_to_quanta(quanta_to_energy(n, w), w);
        EXPECT_NEAR(back, n, 1e-9 * n + 1e-12) << n << " " << w;
    }
}

TEST(Temperature, GroundStateScale) {
    const double n = 1.0 / (std::numbers::e - 1.0);
    const double T = quanta_to_temperature(n, w2mhz);
    EXPECT_NEAR(T, hbar * w2mhz / constants::boltzmann, 1e-15);
    EXPECT_NEAR(T, 96e-6, 0.5e-6);
}

TEST(Temperature, HighTemperatureLimit) {
    for (double n : {50.0, 200.0, 1e4}) {
        const double T = quanta_to_temperature(n, w2mhz);
        const double classical = n * hbar * w2mhz / constants::boltzmann;
        EXPECT_NEAR(T / classical, 1.0, 0.01);
    }
}

TEST(Temperature, HundredMillikelvin) {
    // Inverse of the Bose relation evaluated independently, and the
    // classical estimate k_B T / (hbar w).
    const double x = hbar * w2mhz / (constants::boltzmann * 0.1);
    const double n_exact = 1.0 / std::expm1(x);
    EXPECT_NEAR(temperature_to_quanta(0.1, w2mhz), n_exact, 1e-9 * n_exact);
    EXPECT_NEAR(n_exact, 1041.3, 0.1);
    EXPECT_NEAR(1.0 / x, 1041.8, 0.1);
    EXPECT_NEAR(quanta_to_temperature(n_exact, w2mhz), 0.1, 1e-12);
}

TEST(Temperature, ZeroOccupationIsUndefined) {
    EXPECT_THROW(quanta_to_temperature(0.0, w2mhz), Unphysical);
}

TEST(Temperature, RoundTripAndMonotonicity) {
    double last_T = 0.0;
    for (double logn = -3.0; logn <= 6.0; logn += 0.25) {
        const double n = std::pow(10.0, logn);
        const double T = quanta_to_temperature(n, w2mhz);
        EXPECT_GT(T, last_T);
        last_T = T;
        EXPECT_NEAR(temperature_to_quanta(T, w2mhz), n, 1e-9 * n);
        EXPECT_GT(quanta_to_temperature(n, 1.01 * w2mhz), T);
    }
}

TEST(Species, Invariants) {
    EXPECT_THROW((IonSpecies{0, 40.0, "bad"}.validate()), InvalidInput);
    EXPECT_THROW((IonSpecies{1, 0.0, "bad"}.validate()), InvalidInput);
    const auto ca = IonSpecies::calcium40();
    EXPECT_NO_THROW(ca.validate());
    EXPECT_NEAR(ca.mass(), 39.9620 * constants::atomic_mass_unit, 1e-4 * constants::atomic_mass_unit);
    EXPECT_DOUBLE_EQ(IonSpecies::electron().mass(), constants::electron_mass);
}

TEST(Site, Invariants) {
    TrapSite s{hz_to_angular(2e6), 50e-6, 130e-6, 0.0, 0.0, 0.0};
    EXPECT_NO_THROW(s.validate());
    auto bad = s;
    bad.effective_distance = 40e-6;
    EXPECT_THROW(bad.validate(), InvalidInput);
    bad = s;
    bad.vertical_frequency = 0.0;
    EXPECT_THROW(bad.validate(), InvalidInput);
    bad = s;
    bad.jitter_sigma = -1.0;
    EXPECT_THROW(bad.validate(), InvalidInput);
}

TEST(Wire, Invariants) {
    EXPECT_NO_THROW(WireSpec::reference_device().validate());
    auto w = WireSpec::reference_device();
    w.center_separation = 100e-6;
    EXPECT_THROW(w.validate(), InvalidInput);
    w = WireSpec::reference_device();
    w.capacitance = 0.0;
    EXPECT_THROW(w.validate(), InvalidInput);
}
