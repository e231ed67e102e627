// Lumped-circuit picture of the ion-wire-ion system.
//
// Each ion's vertical motion is an LC branch with L = m D_eff^2 / q^2 and
// C = 1 / (omega^2 L). The wire is a shunt capacitance C_w; on resonance
// the exchange rate is kappa = (pi/2) q^2 / (m omega) / (C_w D_eff^2),
// which in branch quantities reads (pi/2) omega C / C_w = (pi/2) sqrt(C/L) / C_w.
// For sites at different heights D_eff^2 is replaced by D_1 D_2.
#pragma once

#include <cmath>
#include <numbers>
#include <string>

#include "ionwire/core.hpp"

namespace ionwire::circuit {

struct CircuitEquivalent {
    double inductance = 0.0;   // H
    double capacitance = 0.0;  // F
};

struct CouplingPrediction {
    double kappa = 0.0;         // rad/s
    double coulomb_rate = 0.0;  // rad/s
    double enhancement_ratio = 0.0;
};

/// Relative mismatch above which the resonant formula is refused.
inline constexpr double resonance_tolerance = 1e-3;

class OffResonance : public InvalidInput {
public:
    using InvalidInput::InvalidInput;
};

inline CircuitEquivalent circuit_equivalent(const IonSpecies& species, const TrapSite& site) {
    species.validate();
    site.validate();
    const double q = species.charge();
    const double L = species.mass() * site.effective_distance * site.effective_distance / (q * q);
    const double w = site.vertical_frequency;
    return {L, 1.0 / (w * w * L)};
}

/// Closed form from charge, mass and distances.
inline double wire_coupling_rate(const IonSpecies& species, double omega, double d1, double d2,
                                 double wire_capacitance) {
    species.validate();
    require(omega > 0.0 && d1 > 0.0 && d2 > 0.0 && wire_capacitance > 0.0,
            "coupling inputs must be positive");
    const double q = species.charge();
    return std::numbers::pi / 2.0 * q * q / (species.mass() * omega) /
           (wire_capacitance * d1 * d2);
}

inline double wire_coupling_rate(const IonSpecies& species, const TrapSite& site1,
                                 const TrapSite& site2, const WireSpec& wire) {
    site1.validate();
    site2.validate();
    wire.validate();
    const double w1 = site1.vertical_frequency;
    const double w2 = site2.vertical_frequency;
    if (std::abs(w1 - w2) / w1 >= resonance_tolerance)
        throw OffResonance(
            "sites are not resonant; use the dynamics integrators for detuned exchange");
    const double omega = 0.5 * (w1 + w2);
    return wire_coupling_rate(species, omega, site1.effective_distance, site2.effective_distance,
                              wire.capacitance);
}

/// Same rate from the branch elements: (pi/2) sqrt(C/L) / C_w.
inline double wire_coupling_rate_from_circuit(const CircuitEquivalent& branch,
                                              double wire_capacitance) {
    require(branch.inductance > 0.0 && branch.capacitance > 0.0 && wire_capacitance > 0.0,
            "circuit values must be positive");
    return std::numbers::pi / 2.0 * std::sqrt(branch.capacitance / branch.inductance) /
           wire_capacitance;
}

/// Free-space dipole-dipole exchange rate q^2 / (4 pi eps0 m omega r^3).
inline double coulomb_coupling_rate(const IonSpecies& species, double omega, double separation) {
    species.validate();
    require(omega > 0.0, "omega must be > 0");
    require(std::isfinite(separation) && separation > 0.0, "separation must be > 0");
    const double q = species.charge();
    return q * q /
           (4.0 * std::numbers::pi * constants::vacuum_permittivity * species.mass() * omega *
            separation * separation * separation);
}

/// Separation at which the Coulomb rate equals `kappa`.
inline double coulomb_crossover_radius(const IonSpecies& species, double omega, double kappa) {
    require(kappa > 0.0, "kappa must be > 0");
    // Omega_ex r^3 is separation independent.
    return std::cbrt(coulomb_coupling_rate(species, omega, 1.0) / kappa);
}

inline CouplingPrediction enhancement_report(const IonSpecies& species, const TrapSite& site1,
                                             const TrapSite& site2, const WireSpec& wire) {
    const double kappa = wire_coupling_rate(species, site1, site2, wire);
    const double omega = 0.5 * (site1.vertical_frequency + site2.vertical_frequency);
    const double coulomb = coulomb_coupling_rate(species, omega, wire.center_separation);
    return {kappa, coulomb, kappa / coulomb};
}

/// Ratio of a given (e.g. measured) rate to the Coulomb rate.
inline CouplingPrediction enhancement_report(const IonSpecies& species, double kappa,
                                             double omega, double separation) {
    require(kappa > 0.0, "kappa must be > 0");
    const double coulomb = coulomb_coupling_rate(species, omega, separation);
    return {kappa, coulomb, kappa / coulomb};
}

}  // namespace ionwire::circuit
