#include "etrap/mathieu.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <sstream>

namespace etrap {

namespace {

std::string fmt(double v) {
    std::ostringstream os;
    os << v;
    return os.str();
}

}  // namespace

void TrapDrive::validate() const {
    if (!(drive_angular_frequency > 0.0))
        throw InvalidDriveError("drive angular frequency must be positive, got " +
                                fmt(drive_angular_frequency) + " rad/s");
    if (drive_amplitude < 0.0)
        throw InvalidDriveError("drive amplitude must be non-negative, got " +
                                fmt(drive_amplitude) + " V");
    if (!(calibration_voltage > 0.0) || !(calibration_omega_z > 0.0))
        throw InvalidDriveError("calibration pair must be positive");
}

TrapDrive make_calibrated_drive(double drive_angular_frequency, double calibration_voltage,
                                double q_at_calibration, double calibration_omega_z,
                                const Particle& particle, double operating_amplitude) {
    if (!(drive_angular_frequency > 0.0))
        throw InvalidDriveError("drive angular frequency must be positive");
    if (!(calibration_voltage > 0.0) || !(q_at_calibration >= 0.0))
        throw InvalidDriveError("calibration requires V_ref > 0 and q >= 0");
    const double omega2 = drive_angular_frequency * drive_angular_frequency;
    TrapDrive drive;
    drive.drive_angular_frequency = drive_angular_frequency;
    drive.field_gradient_per_volt =
        q_at_calibration * particle.mass * omega2 /
        (2.0 * std::abs(particle.charge) * calibration_voltage);
    drive.calibration_voltage = calibration_voltage;
    drive.calibration_omega_z = calibration_omega_z;
    drive.drive_amplitude =
        operating_amplitude < 0.0 ? calibration_voltage : operating_amplitude;
    drive.validate();
    return drive;
}

MathieuParams stability_parameters(const TrapDrive& drive, const Particle& particle) {
    return stability_parameters(drive, particle, 0.0);
}

MathieuParams stability_parameters(const TrapDrive& drive, const Particle& particle,
                                   double static_curvature_per_m2) {
    drive.validate();
    if (particle.charge == 0.0 || particle.mass <= 0.0)
        throw InvalidDriveError("particle must have nonzero charge and positive mass");
    const double omega2 = drive.drive_angular_frequency * drive.drive_angular_frequency;
    const double gradient = drive.field_gradient_per_volt * drive.drive_amplitude;
    MathieuParams p;
    p.q = 2.0 * std::abs(particle.charge) * gradient / (particle.mass * omega2);
    p.a = 4.0 * particle.charge * static_curvature_per_m2 / (particle.mass * omega2);
    return p;
}

namespace {

// One branch of the continued fraction,
// F(beta) = 1/((2s+beta)^2 - a - q^2/((4s+beta)^2 - a - ...)), s = +-1.
double cf_branch(double a, double q, double beta, double sign, int depth) {
    double base = 2.0 * depth + sign * beta;
    double denom = base * base - a;
    for (int k = depth - 1; k >= 1; --k) {
        base = 2.0 * k + sign * beta;
        denom = base * base - a - q * q / denom;
    }
    return 1.0 / denom;
}

double characteristic_residual(double a, double q, double beta) {
    if (q == 0.0) return beta * beta - a;
    const double fp = cf_branch(a, q, beta, +1.0, 40);
    const double fm = cf_branch(a, q, beta, -1.0, 40);
    return beta * beta - a - q * q * (fp + fm);
}

void rk4_mathieu_step(double a, double q, double tau, double h, double& u, double& w) {
    auto acc = [a, q](double t, double x) { return -(a - 2.0 * q * std::cos(2.0 * t)) * x; };
    const double k1u = w, k1w = acc(tau, u);
    const double k2u = w + 0.5 * h * k1w, k2w = acc(tau + 0.5 * h, u + 0.5 * h * k1u);
    const double k3u = w + 0.5 * h * k2w, k3w = acc(tau + 0.5 * h, u + 0.5 * h * k2u);
    const double k4u = w + h * k3w, k4w = acc(tau + h, u + h * k3u);
    u += h / 6.0 * (k1u + 2.0 * k2u + 2.0 * k3u + k4u);
    w += h / 6.0 * (k1w + 2.0 * k2w + 2.0 * k3w + k4w);
}

}  // namespace

Monodromy monodromy_matrix(const MathieuParams& params, int steps_per_period) {
    const double h = kPi / steps_per_period;
    double u1 = 1.0, w1 = 0.0;  // column for (x0, v0) = (1, 0)
    double u2 = 0.0, w2 = 1.0;  // column for (x0, v0) = (0, 1)
    for (int i = 0; i < steps_per_period; ++i) {
        const double tau = i * h;
        rk4_mathieu_step(params.a, params.q, tau, h, u1, w1);
        rk4_mathieu_step(params.a, params.q, tau, h, u2, w2);
    }
    Monodromy m;
    m.m[0][0] = u1;
    m.m[1][0] = w1;
    m.m[0][1] = u2;
    m.m[1][1] = w2;
    return m;
}

double beta_floquet(const MathieuParams& params, int steps_per_period) {
    const double half_trace = 0.5 * monodromy_matrix(params, steps_per_period).trace();
    if (std::abs(half_trace) > 1.0)
        throw InstabilityError("Floquet multiplier magnitude exceeds 1: |tr M|/2 = " +
                               fmt(std::abs(half_trace)) + " at (a=" + fmt(params.a) +
                               ", q=" + fmt(params.q) + ")");
    return std::acos(half_trace) / kPi;
}

bool is_stable(const MathieuParams& params) {
    return std::abs(monodromy_matrix(params).trace()) <= 2.0;
}

double stability_boundary_q(double a, double tolerance_q) {
    double lo = 0.0, hi = 1.5;
    if (!is_stable({a, lo}))
        throw InstabilityError("no stable band found at q = 0 for a = " + fmt(a));
    if (is_stable({a, hi}))
        throw InstabilityError("stability boundary not bracketed below q = 1.5");
    while (hi - lo > tolerance_q) {
        const double mid = 0.5 * (lo + hi);
        (is_stable({a, mid}) ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

double beta_continued_fraction(const MathieuParams& params, double tolerance) {
    if (!(tolerance > 0.0)) throw Error("tolerance must be positive");
    const MathieuParams p{params.a, std::abs(params.q)};
    if (p.q == 0.0 && p.a == 0.0) return 0.0;

    const double eps = 1e-12;
    double lo = eps, hi = 1.0 - eps;
    double flo = characteristic_residual(p.a, p.q, lo);
    double fhi = characteristic_residual(p.a, p.q, hi);
    if (flo * fhi > 0.0) {
        // No root in (0, 1): outside the lowest stability band. Diagnose
        // with the Floquet multiplier so the message names the bound.
        const double half_trace = 0.5 * monodromy_matrix(p).trace();
        throw InstabilityError(
            "(a=" + fmt(params.a) + ", q=" + fmt(params.q) +
            ") is outside the lowest stability band: |tr M|/2 = " + fmt(std::abs(half_trace)) +
            " > 1 (boundary near q = 0.908 at a = 0)");
    }
    while (hi - lo > tolerance) {
        const double mid = 0.5 * (lo + hi);
        const double fmid = characteristic_residual(p.a, p.q, mid);
        if (fmid == 0.0) return mid;
        if (flo * fmid < 0.0) {
            hi = mid;
        } else {
            lo = mid;
            flo = fmid;
        }
    }
    return 0.5 * (lo + hi);
}

double secular_frequency(const MathieuParams& params, double omega_drive) {
    if (!(omega_drive > 0.0))
        throw InvalidDriveError("drive angular frequency must be positive");
    if (params.a == 0.0 && params.q == 0.0) return 0.0;
    return beta_continued_fraction(params) * omega_drive / 2.0;
}

namespace {

// Field gradient factor for the anharmonic drive, in SI with the
// polynomial coefficients in um^-2 / um^-4.
double anharmonic_shape(const AnharmonicField& f, double z_m) {
    const double zu = z_m * 1e6;
    const double zu2 = zu * zu;
    const double s = 1.0 + f.c4_per_um2 * zu2 + f.c6_per_um4 * zu2 * zu2;
    return s > 0.0 ? std::sqrt(s) : 0.0;
}

}  // namespace

Trajectory integrate_equation_of_motion(const TrapDrive& drive,
                                        std::pair<double, double> initial, double duration,
                                        double time_step, const Particle& particle,
                                        const IntegrationOptions& options) {
    drive.validate();
    if (!(duration > 0.0) || !(time_step > 0.0))
        throw ResolutionError("duration and time step must be positive");
    const double omega = drive.drive_angular_frequency;
    const double drive_period = kTwoPi / omega;
    if (time_step > drive_period / 50.0)
        throw ResolutionError("time step " + fmt(time_step) + " s too coarse: need <= " +
                              fmt(drive_period / 50.0) + " s to resolve micromotion");

    // Work in tau = Omega t / 2; velocity scales as v_tau = 2 v / Omega.
    const double h = time_step * omega / 2.0;
    const double v_scale = omega / 2.0;
    const std::size_t n_steps =
        static_cast<std::size_t>(std::floor(duration / time_step + 1e-9));
    if (n_steps < 1)
        throw ResolutionError("duration shorter than one time step");

    const double gradient = drive.field_gradient_per_volt * drive.drive_amplitude;
    const double charge_over_mass = particle.charge / particle.mass;
    const double amp_scale =
        drive.calibration_voltage > 0.0 ? drive.drive_amplitude / drive.calibration_voltage : 1.0;
    const double tau_factor = 4.0 / (omega * omega);

    // Acceleration in tau units: d2z/dtau^2 = (4/Omega^2)(charge/mass) E(z) cos(2 tau).
    auto acc = [&](double z, double tau) {
        double field;
        if (options.field) {
            const AnharmonicField& f = *options.field;
            field = std::sqrt(2.0) * omega * particle.mass * f.omega_z * z *
                    anharmonic_shape(f, z) / std::abs(particle.charge) * amp_scale;
        } else {
            field = gradient * z;
        }
        return tau_factor * charge_over_mass * field * std::cos(2.0 * tau);
    };

    const double domain =
        options.field ? std::min(options.domain_radius, options.field->domain_radius)
                      : options.domain_radius;

    Trajectory traj;
    traj.time_step = time_step;
    traj.samples.reserve(n_steps + 1);

    double z = initial.first;
    double v = initial.second / v_scale;
    double tau = 0.0;
    traj.samples.emplace_back(z, v * v_scale);
    for (std::size_t i = 0; i < n_steps; ++i) {
        v += 0.5 * h * acc(z, tau);
        z += h * v;
        tau += h;
        v += 0.5 * h * acc(z, tau);
        traj.samples.emplace_back(z, v * v_scale);
        if (std::abs(z) > domain) {
            traj.escape_time = static_cast<double>(i + 1) * time_step;
            break;
        }
    }
    return traj;
}

double extract_frequency(const Trajectory& trajectory) {
    const std::size_t n = trajectory.samples.size();
    if (n < 64 || trajectory.time_step <= 0.0)
        throw ResolutionError("trajectory too short for spectral estimation");

    std::vector<double> buf(n);
    double mean = 0.0;
    for (const auto& s : trajectory.samples) mean += s.first;
    mean /= static_cast<double>(n);
    double max_dev = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        const double w = 0.5 * (1.0 - std::cos(kTwoPi * static_cast<double>(k) /
                                               static_cast<double>(n - 1)));
        buf[k] = w * (trajectory.samples[k].first - mean);
        max_dev = std::max(max_dev, std::abs(trajectory.samples[k].first - mean));
    }
    if (max_dev == 0.0) throw NoOscillationError("trajectory carries no oscillation");

    const std::size_t n_out = n / 2 + 1;
    std::vector<std::complex<double>> out(n_out);
    fftw_plan plan = fftw_plan_dft_r2c_1d(static_cast<int>(n), buf.data(),
                                          reinterpret_cast<fftw_complex*>(out.data()),
                                          FFTW_ESTIMATE);
    fftw_execute(plan);
    fftw_destroy_plan(plan);

    std::vector<double> power(n_out);
    for (std::size_t k = 0; k < n_out; ++k) power[k] = std::norm(out[k]);

    // Skip DC and window-leakage bins; a valid record holds >= 16 cycles
    // so the physical peak sits at bin >= 16 anyway.
    const std::size_t k_min = 3;
    if (n_out <= k_min + 2) throw ResolutionError("spectrum too short");
    std::size_t k_peak = k_min;
    for (std::size_t k = k_min; k + 1 < n_out; ++k)
        if (power[k] > power[k_peak]) k_peak = k;

    std::vector<double> sorted(power.begin() + k_min, power.end() - 1);
    std::nth_element(sorted.begin(), sorted.begin() + sorted.size() / 2, sorted.end());
    const double median = sorted[sorted.size() / 2];
    if (!(power[k_peak] > 1e3 * median) || power[k_peak] <= 0.0)
        throw NoOscillationError("no spectral peak above the noise floor");

    const double log_l = std::log(std::max(power[k_peak - 1], 1e-300));
    const double log_c = std::log(power[k_peak]);
    const double log_r = std::log(std::max(power[k_peak + 1], 1e-300));
    const double denom = log_l - 2.0 * log_c + log_r;
    double delta = 0.0;
    if (denom < 0.0) delta = 0.5 * (log_l - log_r) / denom;
    delta = std::clamp(delta, -0.5, 0.5);

    const double cycles = static_cast<double>(k_peak) + delta;
    if (cycles < 16.0)
        throw ResolutionError("record holds fewer than 16 oscillation periods");
    const double freq = cycles / (static_cast<double>(n) * trajectory.time_step);
    return kTwoPi * freq;
}

double pseudo_potential(double field_amplitude, double omega_drive, const Particle& particle) {
    if (!(omega_drive > 0.0))
        throw InvalidDriveError("drive angular frequency must be positive");
    const double qe = particle.charge;
    return qe * qe * field_amplitude * field_amplitude /
           (4.0 * particle.mass * omega_drive * omega_drive);
}

}  // namespace etrap
