// Anharmonic pseudo-potential model: ingest sampled wells, fit the even
// polynomial U(z) = (1/2) m w^2 (z^2 + C4 z^4 + C6 z^6), and evaluate
// amplitude-dependent frequency shifts and thermal broadening.
#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "etrap/constants.hpp"
#include "etrap/errors.hpp"

namespace etrap {

enum class Axis { z, r };

/// Sampled pseudo-potential along one axis. Coordinates are strictly
/// increasing, at least 7 points, and the domain must include 0.
struct PotentialSamples {
    Axis axis = Axis::z;
    std::vector<std::pair<double, double>> points;  // (coordinate [um], potential [eV])

    void validate() const;
};

/// Load samples from the text field-map format: a mandatory header line
/// `coordinate_um potential_eV` (comma or whitespace separated), `#`
/// comment lines, one sample per row.
PotentialSamples load_potential_samples(std::istream& in, Axis axis = Axis::z);
PotentialSamples load_potential_samples_file(const std::string& path, Axis axis = Axis::z);

struct PotentialModel {
    double omega_z;      // [rad/s]
    double c4_per_um2;   // C4 [um^-2]
    double c6_per_um4;   // C6 [um^-4]
    double mass;         // [kg]
};

struct PotentialFit {
    PotentialModel model;
    double residual_rms_eV;
    int n_points_used;
};

/// Model potential at coordinate z [um], in eV.
double potential_energy_eV(const PotentialModel& model, double z_um);

/// Depth of the axial well of the fitted model: the barrier maximum of
/// U(z) between the center and the polynomial turnover [eV].
double well_depth_eV(const PotentialModel& model);

/// Weighted least squares of the even polynomial over |z| <= window_um
/// (the whole sampled domain when window_um <= 0).
PotentialFit fit_even_polynomial(const PotentialSamples& samples, double particle_mass,
                                 double window_um = 0.0);

/// Relative secular-frequency shift of the series expansion,
/// (3 C4 / 4) z^2 - (21 C4^2 / 64) z^4, z in um. No validity guard.
double series_relative_shift(const PotentialModel& model, double z_um);

/// Largest |z| [um] where the series correction stays below 10%.
double validity_radius_um(const PotentialModel& model);

/// Secular frequency at oscillation amplitude z [um] from the series
/// expansion. Throws OutOfRangeError outside the validity radius and
/// points at anharmonic_oscillation_frequency instead.
double frequency_at_amplitude(const PotentialModel& model, double z_um);

/// Oscillation frequency at amplitude [um] by direct quadrature of the
/// period integral over the model well; valid up to the turnover.
double anharmonic_oscillation_frequency(const PotentialModel& model, double amplitude_um);

/// Harmonic thermal position spread sqrt(kB T / (m w^2)) [um].
double thermal_amplitude(const PotentialModel& model, double temperature_K);

/// Bandwidth proxy: |frequency_at_amplitude(sigma_thermal) - w_z| [rad/s].
double inhomogeneous_linewidth(const PotentialModel& model, double temperature_K);

/// Secondary bandwidth estimator: FWHM of the Boltzmann-weighted secular
/// frequency distribution [rad/s].
double boltzmann_linewidth_fwhm(const PotentialModel& model, double temperature_K);

/// Stratified relative frequency offsets of a thermal ensemble: the k-th
/// entry is the series shift at the (k+1/2)/n quantile of the thermal
/// amplitude distribution, clamped to |s| <= 0.5. Harmonic models give
/// all zeros.
std::vector<double> boltzmann_frequency_offsets(const PotentialModel& model,
                                                double temperature_K, int n_bins);

/// Machine-readable key-value report of a fit (JSON text).
std::string potential_fit_report(const PotentialFit& fit);

}  // namespace etrap
