// Readout-mode physics: loaded linewidth, electron-cavity coupled-mode
// dynamics with thermal drives, resistive cooling with detuning, output
// power through the filter/amplifier chain, and the thermal noise floor.
#pragma once

#include <complex>
#include <string>
#include <vector>

#include "etrap/constants.hpp"
#include "etrap/errors.hpp"
#include "etrap/noise.hpp"

namespace etrap {

struct CavityMode {
    double resonance_frequency;  // [rad/s]
    double q_internal;
    double q_external;
    double mode_temperature;     // [K]

    void validate() const;
};

struct Linewidths {
    double kappa;     // total photon loss rate [rad/s]
    double kappa_in;  // internal [rad/s]
    double kappa_ex;  // external (port) [rad/s]
};

/// kappa_in = w/Q_in, kappa_ex = w/Q_ex, kappa = kappa_in + kappa_ex.
Linewidths loaded_linewidth(const CavityMode& mode);

struct CouplingParams {
    double g;         // single-electron coupling [rad/s]
    double detuning;  // w_z - w_cavity [rad/s]
};

/// Complex mode amplitudes, normalized so |amplitude|^2 is the mean
/// energy of the mode in quanta of hbar*w.
struct CoupledState {
    std::complex<double> electron_amplitude{0.0, 0.0};
    std::complex<double> photon_amplitude{0.0, 0.0};
    double n_electrons = 0.0;
    double electron_temperature = 0.0;  // [K], bath for the electron drive

    double electron_energy() const { return std::norm(electron_amplitude); }
    double photon_energy() const { return std::norm(photon_amplitude); }
};

/// Resistive cooling rate with detuning,
/// gamma_z(D) = 4 g^2 kappa / (kappa^2 + 4 D^2); the collective rate
/// uses g -> g sqrt(N).
double cooling_rate(const CouplingParams& coupling, double kappa);

/// Bath and rate parameters of one stepping context.
struct ModeBaths {
    double kappa;                       // cavity energy loss rate [rad/s]
    double gamma_e0 = 0.0;              // intrinsic electron damping [1/s]
    double mode_temperature = 0.0;      // cavity bath [K]
    double heating_quanta_per_s = 0.0;  // phenomenological electron heating
    double omega_electron;              // [rad/s], for quanta conversion
    double omega_cavity;                // [rad/s]
};

/// Exact one-step propagator of the rotating-frame linear system
///   da_e/dt = (-i D - g0/2) a_e - i G a_p
///   da_p/dt = -i G a_e - (kappa/2) a_p
/// built from the closed-form 2x2 matrix exponential.
class TwoModePropagator {
  public:
    TwoModePropagator() = default;
    TwoModePropagator(double collective_g, double detuning, double kappa, double gamma_e0,
                      double dt);

    void apply(std::complex<double>& a_e, std::complex<double>& a_p) const;

  private:
    std::complex<double> u00_{1, 0}, u01_{0, 0}, u10_{0, 0}, u11_{1, 0};
};

/// Advance the coupled state by dt. The electron mode is driven by its
/// own bath (gamma_e0 at the state's electron_temperature, plus the
/// heating knob); the photon mode by the cavity bath at
/// mode_temperature. Deterministic for a given noise stream.
/// Requires dt * max(kappa, g sqrt(N), |detuning|, gamma_e0) < 0.1.
void step_coupled_modes(CoupledState& state, const CouplingParams& coupling,
                        const ModeBaths& baths, double dt, NoiseStream& noise);

struct FilterStage {
    std::string name;
    double suppression_dB;   // at the trap drive frequency
    double transmission_dB;  // at the readout frequency (0 = lossless)
};

struct FilterChain {
    std::vector<FilterStage> stages;
    double gain_dB = 0.0;

    /// Net linear power factor seen by the readout signal.
    double readout_power_factor() const;
};

struct PowerReading {
    double watts;
    double dbm;
};

PowerReading to_power_reading(double watts);

/// Power leaving the cavity port from the current photon amplitude,
/// routed through the chain: kappa_ex * hbar * w * |a_p|^2 * chain.
PowerReading output_power(const CoupledState& state, const CavityMode& mode,
                          const FilterChain& chain);

/// Total suppression of the trap drive across the chain [dB].
double filter_budget(const FilterChain& chain);

struct NoiseFloor {
    double total_W;
    double thermal_W;   // intracavity-photon component
    double residual_W;  // everything else, sized by the thermal share
};

/// Thermal floor kB * T * B * (kappa_ex/kappa) within the resolution
/// bandwidth, amplified, plus a residual so the thermal component is
/// `thermal_share` of the total.
NoiseFloor noise_floor(const CavityMode& mode, double resolution_bandwidth_Hz, double gain_dB,
                       double thermal_share = 0.87);

}  // namespace etrap
