// Quantitative extraction from traces: exponential decay fits, Gaussian
// spectral fits, SNR and electron-number estimation.
#pragma once

#include <string>

#include "etrap/cavity.hpp"
#include "etrap/potential.hpp"
#include "etrap/trace.hpp"

namespace etrap {

/// y(t) = amplitude * exp(-(t - t_ref)/time_constant) + offset, with
/// t_ref the start of the fit window.
struct DecayFit {
    double amplitude;      // [W]
    double time_constant;  // [s]
    double offset;         // [W]
    double rms_residual;   // [W]
    double se_amplitude;
    double se_time_constant;
    double se_offset;
    double window_start;
    double window_end;
};

struct GaussianFit {
    double center;    // [Hz]
    double sigma;     // [Hz]
    double height;    // [W]
    double baseline;  // [W]
    double rms_residual;
    double se_center;
    double se_sigma;
    double se_height;
    double se_baseline;

    double fwhm() const { return 2.3548200450309493 * sigma; }
};

/// Least-squares A exp(-t/tau) + B over the window (damped
/// Gauss-Newton with analytic Jacobian; tau seeded by log-linear
/// regression of the baseline-subtracted data). Needs >= 20 samples in
/// the window; throws FitError on non-decaying data.
DecayFit fit_exponential_decay(const Trace& trace, std::pair<double, double> window);

/// Gaussian + flat baseline on a spectrum trace; center and width
/// seeded from the first and second moments. Requires a peak above
/// baseline + 3 sigma_noise; throws FitError otherwise.
GaussianFit fit_gaussian(const Trace& trace);

/// (peak excess power over the floor) / (thermal component of the
/// floor). The thermal component is thermal_share * floor.
double snr(const Trace& trace, double floor_W, double thermal_share = 0.87);

/// N = snr / degradation_fraction, rounded to the nearest count.
long long estimate_electron_number(double snr_value, double degradation_fraction);

/// Computed degradation mode: overlap of the Boltzmann-weighted secular
/// frequency distribution with the cavity Lorentzian, normalized to 1
/// for a harmonic ensemble.
double overlap_degradation(const PotentialModel& model, double temperature_K, double kappa,
                           int bins = 4096);

std::string decay_fit_report(const DecayFit& fit);
std::string gaussian_fit_report(const GaussianFit& fit);

}  // namespace etrap
