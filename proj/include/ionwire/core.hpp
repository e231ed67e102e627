// Physical constants, domain types and occupation conversions shared by
// every other module. All quantities are SI internally; frequencies are
// angular (rad/s) unless a field name says otherwise.
#pragma once

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace ionwire {

/// CODATA 2018 values.
struct PhysicalConstants {
    static constexpr double elementary_charge = 1.602176634e-19;     // C
    static constexpr double atomic_mass_unit = 1.66053906660e-27;    // kg
    static constexpr double reduced_planck = 1.054571817e-34;        // J s
    static constexpr double vacuum_permittivity = 8.8541878128e-12;  // F/m
    static constexpr double boltzmann = 1.380649e-23;                // J/K
    static constexpr double electron_mass = 9.1093837015e-31;        // kg
};

using constants = PhysicalConstants;

inline constexpr double two_pi = 2.0 * std::numbers::pi;

constexpr double hz_to_angular(double hz) { return two_pi * hz; }
constexpr double angular_to_hz(double omega) { return omega / two_pi; }

/// Thrown when an input violates a type invariant or an operation's
/// precondition.
class InvalidInput : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Thrown for physically meaningless requests (energy below zero point,
/// temperature at zero occupation, ...).
class Unphysical : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

inline void require(bool condition, const std::string& message) {
    if (!condition) throw InvalidInput(message);
}

inline void require_finite(double value, const char* name) {
    if (!std::isfinite(value)) throw InvalidInput(std::string(name) + " must be finite");
}

struct IonSpecies {
    int charge_number = 1;      // units of e
    double mass_number = 40.0;  // units of u
    std::string label;

    double charge() const { return charge_number * constants::elementary_charge; }
    double mass() const { return mass_number * constants::atomic_mass_unit; }

    void validate() const {
        require(charge_number != 0, "species charge_number must be nonzero");
        require(std::isfinite(mass_number) && mass_number > 0.0, "species mass_number must be > 0");
    }

    static IonSpecies calcium40() {
        // 40Ca atomic mass minus one electron.
        constexpr double me_u = constants::electron_mass / constants::atomic_mass_unit;
        return {1, 39.962590863 - me_u, "40Ca+"};
    }

    static IonSpecies electron() {
        return {-1, constants::electron_mass / constants::atomic_mass_unit, "e-"};
    }
};

struct TrapSite {
    double vertical_frequency = 0.0;      // rad/s
    double physical_height = 0.0;         // m
    double effective_distance = 0.0;      // m, D_eff
    double heating_rate_reference = 0.0;  // quanta/s at reference_frequency
    double reference_frequency = 0.0;     // rad/s
    double jitter_sigma = 0.0;            // Hz, rms slow frequency fluctuation

    void validate() const {
        require(std::isfinite(vertical_frequency) && vertical_frequency > 0.0,
                "site vertical_frequency must be > 0");
        require(std::isfinite(physical_height) && physical_height > 0.0,
                "site physical_height must be > 0");
        require(std::isfinite(effective_distance) && effective_distance >= physical_height,
                "site effective_distance must be >= physical_height");
        require(std::isfinite(heating_rate_reference) && heating_rate_reference >= 0.0,
                "site heating rate must be >= 0");
        require(heating_rate_reference == 0.0 ||
                    (std::isfinite(reference_frequency) && reference_frequency > 0.0),
                "site reference_frequency must be > 0 when a heating rate is given");
        require(std::isfinite(jitter_sigma) && jitter_sigma >= 0.0, "site jitter_sigma must be >= 0");
    }
};

struct WireSpec {
    double capacitance = 0.0;        // F, C_w
    double paddle_side = 0.0;        // m
    double center_separation = 0.0;  // m, r
    double resistance = 0.0;         // ohm; carried for reference, does not enter the coupling

    void validate() const {
        require(std::isfinite(capacitance) && capacitance > 0.0, "wire capacitance must be > 0");
        require(std::isfinite(paddle_side) && paddle_side > 0.0, "wire paddle_side must be > 0");
        require(std::isfinite(center_separation) && center_separation > paddle_side,
                "wire center_separation must exceed paddle_side");
        require(std::isfinite(resistance) && resistance >= 0.0, "wire resistance must be >= 0");
    }

    /// Dual-trap wire: 120 um square paddles, 620 um apart, 30 fF total.
    static WireSpec reference_device() { return {30e-15, 120e-6, 620e-6, 0.0}; }
};

// Occupation bookkeeping for a harmonic mode of angular frequency omega.

inline double quanta_to_energy(double n_bar, double omega) {
    require_finite(n_bar, "n_bar");
    require_finite(omega, "omega");
    require(n_bar >= 0.0, "n_bar must be >= 0");
    require(omega > 0.0, "omega must be > 0");
    return (n_bar + 0.5) * constants::reduced_planck * omega;
}

inline double energy_to_quanta(double energy, double omega) {
    require_finite(energy, "energy");
    require_finite(omega, "omega");
    require(omega > 0.0, "omega must be > 0");
    const double quantum = constants::reduced_planck * omega;
    const double n = energy / quantum - 0.5;
    // Allow rounding noise right at the zero point.
    if (n < -1e-12) throw Unphysical("energy below the zero-point energy");
    return n < 0.0 ? 0.0 : n;
}

/// Exact Bose relation T = hbar omega / (k_B ln(1 + 1/n)).
inline double quanta_to_temperature(double n_bar, double omega) {
    require_finite(n_bar, "n_bar");
    require_finite(omega, "omega");
    require(omega > 0.0, "omega must be > 0");
    if (n_bar <= 0.0) throw Unphysical("temperature undefined for n_bar <= 0");
    return constants::reduced_planck * omega / (constants::boltzmann * std::log1p(1.0 / n_bar));
}

inline double temperature_to_quanta(double temperature, double omega) {
    require_finite(temperature, "temperature");
    require(omega > 0.0, "omega must be > 0");
    if (temperature <= 0.0) throw Unphysical("temperature must be > 0");
    return 1.0 / std::expm1(constants::reduced_planck * omega / (constants::boltzmann * temperature));
}

}  // namespace ionwire
