// Physical constants (SI, CODATA 2018 exact values where defined).
#pragma once

namespace etrap {

inline constexpr double kElectronCharge = 1.602176634e-19;   // [C]
inline constexpr double kElectronMass   = 9.1093837015e-31;  // [kg]
inline constexpr double kBoltzmann      = 1.380649e-23;      // [J/K]
inline constexpr double kHBar           = 1.054571817e-34;   // [J s]
inline constexpr double kElectronVolt   = 1.602176634e-19;   // [J]
inline constexpr double kPi             = 3.14159265358979323846;
inline constexpr double kTwoPi          = 2.0 * kPi;

/// A charged particle species. Everything here is species-agnostic, but
/// the shipped configurations are for a single electron.
struct Particle {
    double charge;  // [C], sign carried
    double mass;    // [kg]
};

inline constexpr Particle electron() {
    return Particle{-kElectronCharge, kElectronMass};
}

/// Mean thermal occupation of a harmonic mode in the classical
/// (equipartition) limit, in energy quanta of hbar*omega.
inline double thermal_quanta(double temperature_K, double omega) {
    return kBoltzmann * temperature_K / (kHBar * omega);
}

}  // namespace etrap
