#include "etrap/cavity.hpp"

#include <algorithm>
#include <cmath>

namespace etrap {

void CavityMode::validate() const {
    if (!(resonance_frequency > 0.0) || !(q_internal > 0.0) || !(q_external > 0.0) ||
        mode_temperature < 0.0)
        throw Error("cavity mode parameters must be positive (temperature non-negative)");
}

Linewidths loaded_linewidth(const CavityMode& mode) {
    mode.validate();
    Linewidths lw;
    lw.kappa_in = mode.resonance_frequency / mode.q_internal;
    lw.kappa_ex = mode.resonance_frequency / mode.q_external;
    lw.kappa = lw.kappa_in + lw.kappa_ex;
    return lw;
}

double cooling_rate(const CouplingParams& coupling, double kappa) {
    if (!(kappa > 0.0)) throw Error("kappa must be positive");
    if (coupling.g < 0.0) throw Error("coupling g must be non-negative");
    const double d = coupling.detuning;
    return 4.0 * coupling.g * coupling.g * kappa / (kappa * kappa + 4.0 * d * d);
}

TwoModePropagator::TwoModePropagator(double collective_g, double detuning, double kappa,
                                     double gamma_e0, double dt) {
    using cplx = std::complex<double>;
    // M = [[-iD - g0/2, -iG], [-iG, -kappa/2]]; exp(M dt) via
    // M = m I + B with B traceless, B^2 = s^2 I:
    // exp(M dt) = e^{m dt} (cosh(s dt) I + sinh(s dt)/s B).
    const cplx m00(-0.5 * gamma_e0, -detuning);
    const cplx m11(-0.5 * kappa, 0.0);
    const cplx m01(0.0, -collective_g);
    const cplx m = 0.5 * (m00 + m11);
    const cplx b = m00 - m;  // = -(m11 - m)
    const cplx s = std::sqrt(b * b + m01 * m01);
    const cplx em = std::exp(m * dt);
    cplx ch, sh_over_s;
    if (std::abs(s) * dt < 1e-8) {
        const cplx sdt = s * dt;
        ch = 1.0 + 0.5 * sdt * sdt;
        sh_over_s = dt * (1.0 + sdt * sdt / 6.0);
    } else {
        ch = std::cosh(s * dt);
        sh_over_s = std::sinh(s * dt) / s;
    }
    u00_ = em * (ch + sh_over_s * b);
    u01_ = em * (sh_over_s * m01);
    u10_ = u01_;
    u11_ = em * (ch - sh_over_s * b);
}

void TwoModePropagator::apply(std::complex<double>& a_e, std::complex<double>& a_p) const {
    const std::complex<double> e = u00_ * a_e + u01_ * a_p;
    const std::complex<double> p = u10_ * a_e + u11_ * a_p;
    a_e = e;
    a_p = p;
}

void step_coupled_modes(CoupledState& state, const CouplingParams& coupling,
                        const ModeBaths& baths, double dt, NoiseStream& noise) {
    if (!(dt > 0.0)) throw ResolutionError("time step must be positive");
    const double collective_g = coupling.g * std::sqrt(std::max(state.n_electrons, 0.0));
    const double fastest = std::max({baths.kappa, collective_g, std::abs(coupling.detuning),
                                     baths.gamma_e0});
    if (dt * fastest >= 0.1)
        throw ResolutionError("time step too coarse for the rotating frame: dt * max rate = " +
                              std::to_string(dt * fastest) + " >= 0.1");

    const TwoModePropagator prop(collective_g, coupling.detuning, baths.kappa, baths.gamma_e0,
                                 dt);
    prop.apply(state.electron_amplitude, state.photon_amplitude);

    // Exact per-mode OU noise variances keep each bath's stationary
    // occupation correct at any resolved dt.
    double var_e = baths.heating_quanta_per_s * dt;
    if (baths.gamma_e0 > 0.0 && state.electron_temperature > 0.0)
        var_e += thermal_quanta(state.electron_temperature, baths.omega_electron) *
                 (1.0 - std::exp(-baths.gamma_e0 * dt));
    const double var_p =
        baths.mode_temperature > 0.0
            ? thermal_quanta(baths.mode_temperature, baths.omega_cavity) *
                  (1.0 - std::exp(-baths.kappa * dt))
            : 0.0;
    state.electron_amplitude += noise.next_complex(var_e);
    state.photon_amplitude += noise.next_complex(var_p);
}

double FilterChain::readout_power_factor() const {
    double db = gain_dB;
    for (const auto& s : stages) db += s.transmission_dB;
    return std::pow(10.0, db / 10.0);
}

PowerReading to_power_reading(double watts) {
    PowerReading r;
    r.watts = watts;
    r.dbm = 10.0 * std::log10(std::max(watts, 1e-40) / 1e-3);
    return r;
}

PowerReading output_power(const CoupledState& state, const CavityMode& mode,
                          const FilterChain& chain) {
    const Linewidths lw = loaded_linewidth(mode);
    const double raw =
        lw.kappa_ex * kHBar * mode.resonance_frequency * state.photon_energy();
    return to_power_reading(raw * chain.readout_power_factor());
}

double filter_budget(const FilterChain& chain) {
    double total = 0.0;
    for (const auto& s : chain.stages) total += s.suppression_dB;
    return total;
}

NoiseFloor noise_floor(const CavityMode& mode, double resolution_bandwidth_Hz, double gain_dB,
                       double thermal_share) {
    if (!(resolution_bandwidth_Hz > 0.0)) throw Error("resolution bandwidth must be positive");
    if (!(thermal_share > 0.0) || thermal_share > 1.0)
        throw Error("thermal share must lie in (0, 1]");
    const Linewidths lw = loaded_linewidth(mode);
    const double gain = std::pow(10.0, gain_dB / 10.0);
    NoiseFloor floor;
    floor.thermal_W = kBoltzmann * mode.mode_temperature * resolution_bandwidth_Hz *
                      (lw.kappa_ex / lw.kappa) * gain;
    floor.residual_W = floor.thermal_W * (1.0 - thermal_share) / thermal_share;
    floor.total_W = floor.thermal_W + floor.residual_W;
    return floor;
}

}  // namespace etrap
