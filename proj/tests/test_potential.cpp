#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>

#include "etrap/noise.hpp"
#include "etrap/potential.hpp"

using namespace etrap;

namespace {

const double kOmegaZ = kTwoPi * 619e6;

PotentialModel paper_model(double c4 = -1.5e-5, double c6 = 0.0) {
    return PotentialModel{kOmegaZ, c4, c6, kElectronMass};
}

PotentialSamples synthesize(const PotentialModel& model, double half_range_um, int n,
                            double noise_sigma_eV = 0.0, std::uint64_t seed = 7) {
    NoiseStream rng(seed);
    PotentialSamples s;
    for (int i = 0; i < n; ++i) {
        const double z = -half_range_um + 2.0 * half_range_um * i / (n - 1);
        double u = potential_energy_eV(model, z);
        if (noise_sigma_eV > 0.0) u += noise_sigma_eV * rng.next_normal();
        s.points.emplace_back(z, u);
    }
    return s;
}

}  // namespace

TEST_CASE("field map loader enforces the format") {
    {
        std::istringstream in(
            "# z-axis well\n"
            "coordinate_um, potential_eV\n"
            "-30, 0.0388\n-20, 0.01722\n-10, 0.0043\n0, 0\n10, 0.0043\n20, 0.01722\n30, "
            "0.0388\n");
        const PotentialSamples s = load_potential_samples(in);
        CHECK(s.points.size() == 7);
        CHECK(s.points[3].first == 0.0);
    }
    {
        std::istringstream in("0, 0.0\n1, 0.1\n");  // header missing
        CHECK_THROWS_AS(load_potential_samples(in), ConfigError);
    }
    {
        std::istringstream in(
            "coordinate_um potential_eV\n-3 1\n-2 0.5\n-1 0.1\n0 0\n1 0.1\n1 0.1\n2 0.5\n");
        CHECK_THROWS_AS(load_potential_samples(in), ConfigError);  // not increasing
    }
    {
        std::istringstream in("coordinate_um potential_eV\n1 1\n2 2\n3 3\n4 4\n5 5\n6 6\n7 7\n");
        CHECK_THROWS_AS(load_potential_samples(in), ConfigError);  // domain misses 0
    }
    {
        std::istringstream in("coordinate_um potential_eV\n-1 1\n0 0\n1 1\n");
        CHECK_THROWS_AS(load_potential_samples(in), ConfigError);  // too few points
    }
    {
        std::istringstream in("coordinate_um potential_eV\n-2 1\n-1 x\n0 0\n1 1\n2 2\n3 3\n4 4\n");
        CHECK_THROWS_AS(load_potential_samples(in), ConfigError);  // non-numeric
    }
}

TEST_CASE("even-polynomial fit round-trips noiseless synthetic wells") {
    const PotentialModel truth = paper_model(-1.5e-5, 2.0e-9);
    const PotentialFit fit = fit_even_polynomial(synthesize(truth, 50.0, 101), kElectronMass);
    CHECK(fit.model.omega_z / truth.omega_z == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(fit.model.c4_per_um2 / truth.c4_per_um2 == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(fit.model.c6_per_um4 / truth.c6_per_um4 == doctest::Approx(1.0).epsilon(1e-4));
    CHECK(fit.residual_rms_eV < 1e-12);
}

TEST_CASE("fit recovers coefficients from noisy samples") {
    const PotentialModel truth = paper_model();
    const double u_max = potential_energy_eV(truth, 50.0);
    const PotentialFit fit = fit_even_polynomial(
        synthesize(truth, 50.0, 201, 1e-3 * u_max, 12345), kElectronMass);
    CHECK(fit.model.omega_z / truth.omega_z == doctest::Approx(1.0).epsilon(0.05));
    CHECK(fit.model.c4_per_um2 / truth.c4_per_um2 == doctest::Approx(1.0).epsilon(0.05));
    CHECK(fit.residual_rms_eV < 3e-3 * u_max);
}

TEST_CASE("fit of a measured-style well recovers the quoted anharmonicity") {
    // Shape with the published coefficients plus mild noise, fitted over
    // the default +-50 um window.
    const PotentialModel truth = paper_model();
    const double u_max = potential_energy_eV(truth, 50.0);
    const PotentialFit fit = fit_even_polynomial(
        synthesize(truth, 50.0, 161, 5e-4 * u_max, 99), kElectronMass, 50.0);
    CHECK(fit.model.c4_per_um2 / -1.5e-5 == doctest::Approx(1.0).epsilon(0.10));
    CHECK(std::abs(fit.model.c6_per_um4) < 2e-9);
}

TEST_CASE("harmonic samples fit to zero anharmonicity") {
    const PotentialModel truth = paper_model(0.0, 0.0);
    const PotentialFit fit = fit_even_polynomial(synthesize(truth, 50.0, 101), kElectronMass);
    CHECK(std::abs(fit.model.c4_per_um2) < 1e-10);
    CHECK(std::abs(fit.model.c6_per_um4) < 1e-12);
}

TEST_CASE("degenerate fits fail loudly") {
    // A tight fit window can leave fewer than 3 distinct |z|: with 7
    // strictly increasing points the rank check needs the window path.
    PotentialSamples sparse;
    for (const double z : {-50.0, -30.0, -1.0, 0.0, 1.0, 30.0, 50.0})
        sparse.points.emplace_back(z, potential_energy_eV(paper_model(), z));
    CHECK_THROWS_AS(fit_even_polynomial(sparse, kElectronMass, 31.0), FitError);
    CHECK_THROWS_AS(fit_even_polynomial(sparse, kElectronMass, 2.0), FitError);

    // Flat potential: no curvature to fit.
    PotentialSamples flat;
    for (int i = -5; i <= 5; ++i) flat.points.emplace_back(double(i) * 10.0, 0.25);
    CHECK_THROWS_AS(fit_even_polynomial(flat, kElectronMass), FitError);
}

TEST_CASE("amplitude-dependent frequency: shift values and symmetry") {
    const PotentialModel model = paper_model();
    CHECK(frequency_at_amplitude(model, 0.0) == model.omega_z);

    // The thermal-scale amplitude gives the ~2 pi x 2 MHz shift.
    const double shift = model.omega_z - frequency_at_amplitude(model, 17.3);
    CHECK(shift / kTwoPi == doctest::Approx(2.088e6).epsilon(0.01));
    CHECK(shift / kTwoPi > 1.9e6);
    CHECK(shift / kTwoPi < 2.1e6);

    // Even in z, decreasing in |z| for C4 < 0.
    for (const double z : {5.0, 12.0, 31.0}) {
        CHECK(frequency_at_amplitude(model, z) == frequency_at_amplitude(model, -z));
        CHECK(frequency_at_amplitude(model, z) < model.omega_z);
    }
    CHECK(frequency_at_amplitude(model, 20.0) < frequency_at_amplitude(model, 10.0));

    // Outside the series validity radius the caller is redirected.
    CHECK_THROWS_AS(frequency_at_amplitude(model, 120.0), OutOfRangeError);
    try {
        frequency_at_amplitude(model, 120.0);
    } catch (const OutOfRangeError& e) {
        CHECK(std::string(e.what()).find("anharmonic_oscillation_frequency") !=
              std::string::npos);
    }
}

TEST_CASE("series shift agrees with the quadrature oracle inside its radius") {
    const PotentialModel model = paper_model();
    for (const double z : {5.0, 10.0, 17.3, 30.0}) {
        const double w_series = frequency_at_amplitude(model, z);
        const double w_exact = anharmonic_oscillation_frequency(model, z);
        const double shift_series = model.omega_z - w_series;
        const double shift_exact = model.omega_z - w_exact;
        CHECK(std::abs(w_series - w_exact) / w_exact < 0.01);
        CHECK(shift_series == doctest::Approx(shift_exact).epsilon(0.05));
    }
}

TEST_CASE("quadrature frequency: harmonic limit and turnover guard") {
    const PotentialModel harmonic = paper_model(0.0, 0.0);
    CHECK(anharmonic_oscillation_frequency(harmonic, 25.0) ==
          doctest::Approx(harmonic.omega_z).epsilon(1e-10));
    CHECK(anharmonic_oscillation_frequency(paper_model(), 0.0) == kOmegaZ);
    CHECK_THROWS_AS(anharmonic_oscillation_frequency(paper_model(), 200.0), OutOfRangeError);
}

TEST_CASE("thermal amplitude: value and exact scalings") {
    const PotentialModel model = paper_model();
    const double sigma300 = thermal_amplitude(model, 300.0);
    CHECK(sigma300 == doctest::Approx(17.3).epsilon(0.01));
    CHECK(thermal_amplitude(model, 0.0) == 0.0);
    CHECK(thermal_amplitude(model, 2950.0) ==
          doctest::Approx(sigma300 * std::sqrt(2950.0 / 300.0)).epsilon(1e-12));
    CHECK(thermal_amplitude(model, 4.0 * 300.0) == doctest::Approx(2.0 * sigma300).epsilon(1e-12));

    PotentialModel stiffer = model;
    stiffer.omega_z *= 2.0;
    CHECK(thermal_amplitude(stiffer, 300.0) == doctest::Approx(0.5 * sigma300).epsilon(1e-12));
    CHECK_THROWS_AS(thermal_amplitude(model, -1.0), OutOfRangeError);
}

TEST_CASE("inhomogeneous linewidth: thermal-sigma convention") {
    const PotentialModel model = paper_model();
    const double width = inhomogeneous_linewidth(model, 300.0);
    CHECK(width / kTwoPi == doctest::Approx(2.09e6).epsilon(0.05));

    // Leading-order hand evaluation.
    const double sigma = thermal_amplitude(model, 300.0);
    const double first_order = model.omega_z * 0.75 * std::abs(model.c4_per_um2) * sigma * sigma;
    CHECK(width == doctest::Approx(first_order).epsilon(0.01));
    CHECK(first_order / kTwoPi == doctest::Approx(2.08e6).epsilon(0.01));

    CHECK(inhomogeneous_linewidth(paper_model(0.0, 0.0), 300.0) == 0.0);
}

TEST_CASE("Boltzmann-weighted width estimator") {
    const PotentialModel model = paper_model();
    const double fwhm = boltzmann_linewidth_fwhm(model, 300.0);
    // One-sided exponential of the amplitude-squared distribution:
    // FWHM ~ ln 2 * 2 * (shift at sigma).
    const double expected = std::log(2.0) * 2.0 * inhomogeneous_linewidth(model, 300.0);
    CHECK(fwhm == doctest::Approx(expected).epsilon(0.25));
    CHECK(boltzmann_linewidth_fwhm(paper_model(0.0, 0.0), 300.0) == 0.0);
    CHECK(boltzmann_linewidth_fwhm(model, 2950.0) > fwhm);
}

TEST_CASE("thermal ensemble frequency offsets") {
    const PotentialModel model = paper_model();
    const auto offsets = boltzmann_frequency_offsets(model, 300.0, 64);
    REQUIRE(offsets.size() == 64);
    for (std::size_t k = 1; k < offsets.size(); ++k) CHECK(offsets[k] <= offsets[k - 1]);
    CHECK(offsets.front() < 0.0);
    CHECK(offsets.front() > -1e-3);
    CHECK(offsets.back() > -0.05);

    // Harmonic ensembles carry no offsets; huge temperatures clamp.
    for (const double s : boltzmann_frequency_offsets(paper_model(0.0, 0.0), 300.0, 16))
        CHECK(s == 0.0);
    const auto hot = boltzmann_frequency_offsets(model, 3e7, 16);
    CHECK(hot.back() == doctest::Approx(-0.5));
}

TEST_CASE("well depth of the fitted model matches the quoted trap depth") {
    CHECK(well_depth_eV(paper_model()) == doctest::Approx(0.7165).epsilon(0.01));
    CHECK(well_depth_eV(paper_model()) == doctest::Approx(0.8).epsilon(0.15));
}

TEST_CASE("fit report is machine-readable") {
    const PotentialFit fit =
        fit_even_polynomial(synthesize(paper_model(), 50.0, 101), kElectronMass);
    const std::string report = potential_fit_report(fit);
    CHECK(report.find("c4_per_um2") != std::string::npos);
    CHECK(report.find("residual_rms_eV") != std::string::npos);
}
