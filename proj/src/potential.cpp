#include "etrap/potential.hpp"

#include <Eigen/Dense>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace etrap {

namespace {

constexpr double kUm2 = 1e-12;  // m^2 per um^2

// 48-point Gauss-Legendre rule on [-1, 1], built once by Newton
// iteration on the Legendre recurrence.
struct GaussLegendre {
    std::vector<double> x, w;
    explicit GaussLegendre(int n) : x(n), w(n) {
        for (int i = 0; i < n; ++i) {
            double xi = std::cos(kPi * (i + 0.75) / (n + 0.5));
            for (int it = 0; it < 100; ++it) {
                double p0 = 1.0, p1 = xi;
                for (int k = 2; k <= n; ++k) {
                    const double p2 = ((2.0 * k - 1.0) * xi * p1 - (k - 1.0) * p0) / k;
                    p0 = p1;
                    p1 = p2;
                }
                const double dp = n * (xi * p1 - p0) / (xi * xi - 1.0);
                const double step = p1 / dp;
                xi -= step;
                if (std::abs(step) < 1e-15) break;
            }
            double p0 = 1.0, p1 = xi;
            for (int k = 2; k <= n; ++k) {
                const double p2 = ((2.0 * k - 1.0) * xi * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            const double dp = n * (xi * p1 - p0) / (xi * xi - 1.0);
            x[i] = xi;
            w[i] = 2.0 / ((1.0 - xi * xi) * dp * dp);
        }
    }
};

const GaussLegendre& quad_rule() {
    static const GaussLegendre rule(48);
    return rule;
}

// Dimensionless well shape u(z) = z^2 + C4 z^4 + C6 z^6, z in um.
double well_shape(const PotentialModel& m, double z_um) {
    const double z2 = z_um * z_um;
    return z2 * (1.0 + m.c4_per_um2 * z2 + m.c6_per_um4 * z2 * z2);
}

}  // namespace

void PotentialSamples::validate() const {
    if (points.size() < 7)
        throw ConfigError("potential samples need at least 7 points, got " +
                          std::to_string(points.size()));
    for (std::size_t i = 1; i < points.size(); ++i)
        if (!(points[i].first > points[i - 1].first))
            throw ConfigError("potential sample coordinates must be strictly increasing");
    if (points.front().first > 0.0 || points.back().first < 0.0)
        throw ConfigError("potential sample domain must include 0");
}

PotentialSamples load_potential_samples(std::istream& in, Axis axis) {
    PotentialSamples samples;
    samples.axis = axis;
    std::string line;
    bool header_seen = false;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        for (char& c : line)
            if (c == ',') c = ' ';
        std::istringstream row(line);
        std::string first_tok;
        if (!(row >> first_tok)) continue;  // blank line
        if (!header_seen) {
            std::string second_tok;
            row >> second_tok;
            if (first_tok != "coordinate_um" || second_tok != "potential_eV")
                throw ConfigError("field map line " + std::to_string(line_no) +
                                  ": expected header 'coordinate_um potential_eV'");
            header_seen = true;
            continue;
        }
        std::string second_tok;
        if (!(row >> second_tok))
            throw ConfigError("field map line " + std::to_string(line_no) +
                              ": expected two columns");
        try {
            samples.points.emplace_back(std::stod(first_tok), std::stod(second_tok));
        } catch (const std::exception&) {
            throw ConfigError("field map line " + std::to_string(line_no) +
                              ": non-numeric sample");
        }
    }
    if (!header_seen) throw ConfigError("field map is missing its header line");
    samples.validate();
    return samples;
}

PotentialSamples load_potential_samples_file(const std::string& path, Axis axis) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open field map '" + path + "'");
    return load_potential_samples(in, axis);
}

double potential_energy_eV(const PotentialModel& model, double z_um) {
    const double u_J =
        0.5 * model.mass * model.omega_z * model.omega_z * kUm2 * well_shape(model, z_um);
    return u_J / kElectronVolt;
}

double well_depth_eV(const PotentialModel& model) {
    // Barrier = max of u(z) out to where u starts decreasing (quartic
    // turnover) or, absent one, out to a 1 mm cap.
    double z = 0.0, step = 0.5, u_prev = 0.0, u_max = 0.0;
    while (z < 1000.0) {
        z += step;
        const double u = well_shape(model, z);
        if (u < u_prev) break;
        u_prev = u;
        u_max = u;
    }
    return 0.5 * model.mass * model.omega_z * model.omega_z * kUm2 * u_max / kElectronVolt;
}

PotentialFit fit_even_polynomial(const PotentialSamples& samples, double particle_mass,
                                 double window_um) {
    samples.validate();
    if (!(particle_mass > 0.0)) throw FitError("particle mass must be positive");

    double u_min = samples.points.front().second, u_max = u_min;
    for (const auto& p : samples.points) {
        u_min = std::min(u_min, p.second);
        u_max = std::max(u_max, p.second);
    }
    if (u_max - u_min <= 1e-12 * std::max(std::abs(u_max), 1.0))
        throw FitError("degenerate potential: all samples are equal");

    std::vector<std::pair<double, double>> pts;
    for (const auto& p : samples.points)
        if (window_um <= 0.0 || std::abs(p.first) <= window_um) pts.push_back(p);
    if (pts.size() < 4)
        throw FitError("fit window keeps only " + std::to_string(pts.size()) +
                       " samples; need at least 4");

    // Count distinct |z| away from the center; three are needed for the
    // three even coefficients.
    std::set<long long> magnitudes;
    for (const auto& p : pts)
        if (std::abs(p.first) > 1e-9)
            magnitudes.insert(static_cast<long long>(std::llround(std::abs(p.first) * 1e6)));
    if (magnitudes.size() < 3)
        throw FitError("design matrix is rank deficient: fewer than 3 distinct |z| values");

    const auto n = static_cast<Eigen::Index>(pts.size());
    Eigen::MatrixXd design(n, 3);
    Eigen::VectorXd target(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double z2 = pts[i].first * pts[i].first;
        design(i, 0) = z2;
        design(i, 1) = z2 * z2;
        design(i, 2) = z2 * z2 * z2;
        target(i) = pts[i].second;
    }
    const Eigen::Vector3d coef = design.colPivHouseholderQr().solve(target);
    const double p2 = coef(0);  // [eV/um^2]
    if (!(p2 > 0.0))
        throw FitError("degenerate potential: fitted quadratic term is not positive");

    PotentialFit fit;
    fit.model.mass = particle_mass;
    fit.model.omega_z = std::sqrt(2.0 * p2 * kElectronVolt / (particle_mass * kUm2));
    fit.model.c4_per_um2 = coef(1) / p2;
    fit.model.c6_per_um4 = coef(2) / p2;
    fit.residual_rms_eV = std::sqrt((design * coef - target).squaredNorm() / double(n));
    fit.n_points_used = static_cast<int>(n);
    return fit;
}

double series_relative_shift(const PotentialModel& model, double z_um) {
    const double z2 = z_um * z_um;
    const double c4 = model.c4_per_um2;
    return 0.75 * c4 * z2 - (21.0 / 64.0) * c4 * c4 * z2 * z2;
}

double validity_radius_um(const PotentialModel& model) {
    if (model.c4_per_um2 == 0.0) return 1e6;
    double lo = 0.0, hi = 1.0;
    while (std::abs(series_relative_shift(model, hi)) < 0.1 && hi < 1e6) hi *= 2.0;
    for (int i = 0; i < 80; ++i) {
        const double mid = 0.5 * (lo + hi);
        (std::abs(series_relative_shift(model, mid)) < 0.1 ? lo : hi) = mid;
    }
    return lo;
}

double frequency_at_amplitude(const PotentialModel& model, double z_um) {
    const double shift = series_relative_shift(model, z_um);
    if (std::abs(shift) >= 0.1)
        throw OutOfRangeError(
            "amplitude " + std::to_string(z_um) + " um exceeds the series validity radius (" +
            std::to_string(validity_radius_um(model)) +
            " um); use anharmonic_oscillation_frequency for large amplitudes");
    return model.omega_z * (1.0 + shift);
}

double anharmonic_oscillation_frequency(const PotentialModel& model, double amplitude_um) {
    const double a = std::abs(amplitude_um);
    if (a == 0.0) return model.omega_z;
    // The period integral needs u monotone on (0, A].
    const double u_a = well_shape(model, a);
    for (double f = 0.05; f < 1.0; f += 0.05)
        if (well_shape(model, f * a) >= u_a)
            throw OutOfRangeError("amplitude beyond the potential turnover");

    // T = (4/w) Int_0^A dz / sqrt(u(A) - u(z)), z = A sin(theta).
    const auto& rule = quad_rule();
    double integral = 0.0;
    for (std::size_t i = 0; i < rule.x.size(); ++i) {
        const double theta = 0.25 * kPi * (rule.x[i] + 1.0);
        const double z = a * std::sin(theta);
        const double du = u_a - well_shape(model, z);
        if (!(du > 0.0)) throw OutOfRangeError("amplitude beyond the potential turnover");
        integral += rule.w[i] * a * std::cos(theta) / std::sqrt(du);
    }
    integral *= 0.25 * kPi;
    const double period = 4.0 * integral / model.omega_z;
    return kTwoPi / period;
}

double thermal_amplitude(const PotentialModel& model, double temperature_K) {
    if (temperature_K < 0.0) throw OutOfRangeError("temperature must be non-negative");
    return std::sqrt(kBoltzmann * temperature_K / model.mass) / model.omega_z * 1e6;
}

double inhomogeneous_linewidth(const PotentialModel& model, double temperature_K) {
    const double sigma = thermal_amplitude(model, temperature_K);
    if (sigma == 0.0) return 0.0;
    return std::abs(frequency_at_amplitude(model, sigma) - model.omega_z);
}

std::vector<double> boltzmann_frequency_offsets(const PotentialModel& model,
                                                double temperature_K, int n_bins) {
    if (n_bins < 1) throw OutOfRangeError("need at least one bin");
    std::vector<double> offsets(static_cast<std::size_t>(n_bins), 0.0);
    if (model.c4_per_um2 == 0.0 && model.c6_per_um4 == 0.0) return offsets;
    const double sigma = thermal_amplitude(model, temperature_K);
    // Amplitude^2 of a thermal 1-D oscillator is exponential with mean
    // 2 sigma^2; stratify on its quantiles.
    const double mean_a2 = 2.0 * sigma * sigma;
    for (int k = 0; k < n_bins; ++k) {
        const double p = (k + 0.5) / n_bins;
        const double a2 = -mean_a2 * std::log(1.0 - p);
        const double s = series_relative_shift(model, std::sqrt(a2));
        offsets[static_cast<std::size_t>(k)] = std::clamp(s, -0.5, 0.5);
    }
    return offsets;
}

double boltzmann_linewidth_fwhm(const PotentialModel& model, double temperature_K) {
    const auto offsets = boltzmann_frequency_offsets(model, temperature_K, 8192);
    double lo = offsets.front(), hi = offsets.back();
    if (lo > hi) std::swap(lo, hi);
    if (hi - lo <= 0.0) return 0.0;
    const int n_hist = 256;
    std::vector<double> hist(n_hist, 0.0);
    const double width = (hi - lo) * (1.0 + 1e-9);
    for (const double s : offsets) {
        auto bin = static_cast<int>((s - lo) / width * n_hist);
        bin = std::clamp(bin, 0, n_hist - 1);
        hist[static_cast<std::size_t>(bin)] += 1.0;
    }
    const double peak = *std::max_element(hist.begin(), hist.end());
    int first = n_hist, last = -1;
    for (int i = 0; i < n_hist; ++i) {
        if (hist[static_cast<std::size_t>(i)] >= 0.5 * peak) {
            first = std::min(first, i);
            last = std::max(last, i);
        }
    }
    const double fwhm_rel = (last - first + 1) * width / n_hist;
    return fwhm_rel * model.omega_z;
}

std::string potential_fit_report(const PotentialFit& fit) {
    nlohmann::json j;
    j["model"]["omega_z_rad_per_s"] = fit.model.omega_z;
    j["model"]["secular_frequency_Hz"] = fit.model.omega_z / kTwoPi;
    j["model"]["c4_per_um2"] = fit.model.c4_per_um2;
    j["model"]["c6_per_um4"] = fit.model.c6_per_um4;
    j["model"]["mass_kg"] = fit.model.mass;
    j["residual_rms_eV"] = fit.residual_rms_eV;
    j["n_points_used"] = fit.n_points_used;
    return j.dump(2);
}

}  // namespace etrap
