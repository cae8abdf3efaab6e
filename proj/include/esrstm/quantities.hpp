#pragma once

#include <cmath>
#include <compare>

#include "esrstm/constants.hpp"
#include "esrstm/errors.hpp"

namespace esrstm {

// ===========================================================================
//  Unit-safe scalar kinds
// ===========================================================================
//
// One wrapper per physical kind so that a frequency cannot be passed where
// a field is expected. Deliberately minimal: same-kind addition, scalar
// multiplication, ratios. This is not a general units library.

template <class Tag>
struct Quantity {
    double v = 0.0;

    constexpr Quantity() = default;
    constexpr explicit Quantity(double value) : v(value) {}

    constexpr double value() const { return v; }

    friend constexpr Quantity operator+(Quantity a, Quantity b) { return Quantity{a.v + b.v}; }
    friend constexpr Quantity operator-(Quantity a, Quantity b) { return Quantity{a.v - b.v}; }
    friend constexpr Quantity operator-(Quantity a) { return Quantity{-a.v}; }
    friend constexpr Quantity operator*(double s, Quantity a) { return Quantity{s * a.v}; }
    friend constexpr Quantity operator*(Quantity a, double s) { return Quantity{s * a.v}; }
    friend constexpr Quantity operator/(Quantity a, double s) { return Quantity{a.v / s}; }
    /// Ratio of two same-kind quantities is dimensionless.
    friend constexpr double operator/(Quantity a, Quantity b) { return a.v / b.v; }

    friend constexpr auto operator<=>(Quantity a, Quantity b) = default;
};

struct FrequencyTag {};
struct MagneticFieldTag {};
struct CurrentTag {};
struct VoltageTag {};
struct EnergyTag {};
struct PowerDbmTag {};

using Frequency = Quantity<FrequencyTag>;         // Hz
using MagneticField = Quantity<MagneticFieldTag>; // T
using Current = Quantity<CurrentTag>;             // A
using Voltage = Quantity<VoltageTag>;             // V
using Energy = Quantity<EnergyTag>;               // J
using PowerDbm = Quantity<PowerDbmTag>;           // dBm (log scale, referenced to 1 mW)

constexpr Frequency hertz(double x) { return Frequency{x}; }
constexpr Frequency megahertz(double x) { return Frequency{x * 1e6}; }
constexpr Frequency gigahertz(double x) { return Frequency{x * 1e9}; }
constexpr MagneticField tesla(double x) { return MagneticField{x}; }
constexpr MagneticField millitesla(double x) { return MagneticField{x * 1e-3}; }
constexpr Current ampere(double x) { return Current{x}; }
constexpr Current picoampere(double x) { return Current{x * 1e-12}; }
constexpr Voltage volt(double x) { return Voltage{x}; }
constexpr Voltage millivolt(double x) { return Voltage{x * 1e-3}; }
constexpr Energy joule(double x) { return Energy{x}; }
constexpr PowerDbm dbm(double x) { return PowerDbm{x}; }

/// Energy viewed in electron volts.
constexpr double to_electron_volts(Energy e) { return e.v / constants::kElectronVoltJ; }

// ===========================================================================
//  Energy <-> frequency conversion, E = h f exactly
// ===========================================================================

/// Photon energy of a frequency. Throws DomainError for negative or
/// non-finite input.
inline Energy energy_of_frequency(Frequency f) {
    if (!std::isfinite(f.v) || f.v < 0.0)
        throw DomainError("energy_of_frequency: frequency must be finite and >= 0");
    return Energy{constants::kPlanckJs * f.v};
}

/// Inverse of energy_of_frequency.
inline Frequency frequency_of_energy(Energy e) {
    if (!std::isfinite(e.v) || e.v < 0.0)
        throw DomainError("frequency_of_energy: energy must be finite and >= 0");
    return Frequency{e.v / constants::kPlanckJs};
}

} // namespace esrstm
