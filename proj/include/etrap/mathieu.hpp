// Motion in an oscillating quadrupole field: stability parameters,
// characteristic exponents, trajectory integration and the
// pseudo-potential approximation.
#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "etrap/constants.hpp"
#include "etrap/errors.hpp"

namespace etrap {

/// Oscillating drive of the trap. The instantaneous axial field is
/// E(z, t) = gradient * z * cos(Omega t) with
/// gradient = field_gradient_per_volt * drive_amplitude.
struct TrapDrive {
    double drive_angular_frequency;  // Omega [rad/s]
    double drive_amplitude;          // pin voltage scale [V]
    double field_gradient_per_volt;  // [(V/m^2)/V], geometry calibration
    double calibration_voltage;      // V_ref [V]
    double calibration_omega_z;      // omega_z at V_ref [rad/s]

    /// Secular frequency from the linear amplitude calibration,
    /// omega_z(V) = omega_z_ref * V / V_ref.
    double calibrated_secular_frequency(double amplitude_V) const {
        return calibration_omega_z * amplitude_V / calibration_voltage;
    }

    void validate() const;
};

/// Build a drive whose geometry constant is fixed by a measured
/// calibration point: amplitude V_ref produces stability parameter
/// q_ref and secular frequency omega_z_ref.
TrapDrive make_calibrated_drive(double drive_angular_frequency,
                                double calibration_voltage, double q_at_calibration,
                                double calibration_omega_z,
                                const Particle& particle = electron(),
                                double operating_amplitude = -1.0);

/// Dimensionless Mathieu parameters of x'' + (a - 2 q cos 2tau) x = 0.
struct MathieuParams {
    double a = 0.0;
    double q = 0.0;
};

/// Uniformly sampled single-axis trajectory. `escape_time` is set when
/// the motion left the field domain; integration stops there.
struct Trajectory {
    double time_step = 0.0;                              // [s]
    std::vector<std::pair<double, double>> samples;      // (position [m], velocity [m/s])
    std::optional<double> escape_time;                   // [s]

    double duration() const {
        return samples.empty() ? 0.0 : time_step * static_cast<double>(samples.size() - 1);
    }
};

/// Convert a drive to Mathieu (a, q) for the given particle.
/// q = 2 |charge| * gradient / (mass * Omega^2); a = 0 without a
/// static bias (a static-bias overload exists for tests).
MathieuParams stability_parameters(const TrapDrive& drive, const Particle& particle = electron());
MathieuParams stability_parameters(const TrapDrive& drive, const Particle& particle,
                                   double static_curvature_per_m2);

/// Characteristic exponent beta of the lowest stability band, from the
/// standard continued-fraction characteristic equation
///   beta^2 = a + q^2 [ F+(beta) + F-(beta) ],
///   F+-(beta) = 1 / ((2 +- beta)^2 - a - q^2 / ((4 +- beta)^2 - a - ...)).
/// Solved by bisection on beta in (0, 1) to `tolerance`.
double beta_continued_fraction(const MathieuParams& params, double tolerance = 1e-12);

/// omega_z = beta(a, q) * Omega / 2.
double secular_frequency(const MathieuParams& params, double omega_drive);

/// Monodromy matrix of one drive period (tau in [0, pi]) from two
/// independent initial conditions, integrated with fixed-step RK4.
/// Row-major 2x2 acting on (x, dx/dtau).
struct Monodromy {
    double m[2][2];
    double trace() const { return m[0][0] + m[1][1]; }
};
Monodromy monodromy_matrix(const MathieuParams& params, int steps_per_period = 8192);

/// beta recovered from the monodromy eigenvalue phase,
/// cos(pi beta) = tr(M)/2. Throws InstabilityError when |tr| > 2.
double beta_floquet(const MathieuParams& params, int steps_per_period = 8192);

bool is_stable(const MathieuParams& params);

/// Edge of the lowest stability band at fixed `a`, located by bisecting
/// |tr(M)| - 2 in q to `tolerance_q`.
double stability_boundary_q(double a = 0.0, double tolerance_q = 1e-4);

/// Anharmonic drive field consistent with a fitted pseudo-potential:
/// E(z) = sqrt(2) * Omega * m * omega_z * z * sqrt(1 + C4 z^2 + C6 z^4) / |charge|.
/// Coefficients are in the 1/um^2 and 1/um^4 convention used by the
/// potential model; domain_radius bounds the valid region [m].
struct AnharmonicField {
    double omega_z;        // [rad/s]
    double c4_per_um2;     // [um^-2]
    double c6_per_um4;     // [um^-4]
    double domain_radius;  // [m]
};

struct IntegrationOptions {
    // Escape is declared when |z| exceeds this radius [m]. Defaults to
    // half the 400 um pin separation.
    double domain_radius = 200e-6;
    std::optional<AnharmonicField> field;  // pure quadrupole when unset
};

/// Integrate z'' = (charge/mass) E(z) cos(Omega t) with a fixed-step
/// velocity-Verlet scheme in scaled time tau = Omega t / 2.
/// Requires time_step <= (2 pi / Omega) / 50.
Trajectory integrate_equation_of_motion(const TrapDrive& drive,
                                        std::pair<double, double> initial,
                                        double duration, double time_step,
                                        const Particle& particle = electron(),
                                        const IntegrationOptions& options = {});

/// Dominant sub-drive spectral component of a trajectory [rad/s], via a
/// Hann-windowed FFT with parabolic peak interpolation. Throws
/// NoOscillationError when no peak clears the spectral floor and
/// ResolutionError when fewer than 16 cycles fit in the record.
double extract_frequency(const Trajectory& trajectory);

/// Pseudo-potential of an oscillating field of local amplitude E:
/// U_eff = charge^2 E^2 / (4 m Omega^2)  [J].
double pseudo_potential(double field_amplitude, double omega_drive,
                        const Particle& particle = electron());

}  // namespace etrap
