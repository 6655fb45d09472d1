#include "etrap/analysis.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>

#include "etrap/levmar.hpp"

namespace etrap {

namespace {

double median_of(std::vector<double> v) {
    const auto mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + static_cast<long>(mid), v.end());
    return v[mid];
}

}  // namespace

DecayFit fit_exponential_decay(const Trace& trace, std::pair<double, double> window) {
    if (trace.x.size() != trace.y.size() || trace.x.empty())
        throw FitError("trace is empty or malformed");
    std::vector<double> t, y;
    for (std::size_t i = 0; i < trace.x.size(); ++i) {
        if (trace.x[i] >= window.first && trace.x[i] <= window.second) {
            t.push_back(trace.x[i] - window.first);
            y.push_back(trace.y[i]);
        }
    }
    const auto n = t.size();
    if (n < 20)
        throw FitError("fit window holds " + std::to_string(n) + " samples; need >= 20");

    // Seed: offset from the window tail, tau from log-linear regression
    // of the baseline-subtracted first part.
    const std::size_t tail = std::max<std::size_t>(n / 10, 3);
    double b0 = 0.0;
    for (std::size_t i = n - tail; i < n; ++i) b0 += y[i];
    b0 /= double(tail);
    const double a0_raw = y.front() - b0;
    double y_scale = std::abs(a0_raw);
    for (const double v : y) y_scale = std::max(y_scale, std::abs(v - b0));
    if (y_scale <= 0.0 || a0_raw <= 0.0)
        throw FitError("data do not decay toward the tail level");

    double sum_t = 0.0, sum_t2 = 0.0, sum_l = 0.0, sum_tl = 0.0;
    std::size_t m = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double excess = y[i] - b0;
        if (excess > 0.05 * a0_raw) {
            const double l = std::log(excess);
            sum_t += t[i];
            sum_t2 += t[i] * t[i];
            sum_l += l;
            sum_tl += t[i] * l;
            ++m;
        }
    }
    double tau0 = (window.second - window.first) / 3.0;
    if (m >= 3) {
        const double denom = double(m) * sum_t2 - sum_t * sum_t;
        if (denom > 0.0) {
            const double slope = (double(m) * sum_tl - sum_t * sum_l) / denom;
            if (slope < 0.0) tau0 = -1.0 / slope;
        }
    }

    auto eval = [&](const Eigen::VectorXd& p, Eigen::VectorXd& r, Eigen::MatrixXd& jac) {
        const double a = p(0), tau = p(1), b = p(2);
        r.resize(static_cast<Eigen::Index>(n));
        jac.resize(static_cast<Eigen::Index>(n), 3);
        for (std::size_t i = 0; i < n; ++i) {
            const double e = std::exp(-t[i] / tau);
            const auto row = static_cast<Eigen::Index>(i);
            r(row) = a * e + b - y[i];
            jac(row, 0) = e;
            jac(row, 1) = a * e * t[i] / (tau * tau);
            jac(row, 2) = 1.0;
        }
    };

    Eigen::VectorXd p0(3);
    p0 << a0_raw, std::max(tau0, 1e-12), b0;
    const LevMarResult res = levmar_fit(eval, p0);

    DecayFit fit;
    fit.amplitude = res.params(0);
    fit.time_constant = res.params(1);
    fit.offset = res.params(2);
    fit.rms_residual = res.rms_residual;
    fit.se_amplitude = std::sqrt(std::max(res.covariance(0, 0), 0.0));
    fit.se_time_constant = std::sqrt(std::max(res.covariance(1, 1), 0.0));
    fit.se_offset = std::sqrt(std::max(res.covariance(2, 2), 0.0));
    fit.window_start = window.first;
    fit.window_end = window.second;

    const double span = window.second - window.first;
    if (!(fit.time_constant > 0.0) || fit.time_constant > 50.0 * span)
        throw FitError("decay time diverged: data are not decaying over the window");
    if (!(fit.amplitude > 0.0) || fit.amplitude < 3.0 * fit.rms_residual)
        throw FitError("no significant decaying component above the residual level");
    return fit;
}

GaussianFit fit_gaussian(const Trace& trace) {
    if (trace.x.size() != trace.y.size() || trace.x.size() < 8)
        throw FitError("spectrum needs at least 8 samples");
    const auto& x = trace.x;
    const auto& y = trace.y;
    const auto n = x.size();

    // Baseline statistics from the lowest quartile so a peak that spans
    // much of the record does not contaminate them.
    std::vector<double> sorted_y(y.begin(), y.end());
    std::sort(sorted_y.begin(), sorted_y.end());
    const std::size_t quartile = std::max<std::size_t>(n / 4, 4);
    const std::vector<double> base_set(sorted_y.begin(),
                                       sorted_y.begin() + static_cast<long>(quartile));
    const double baseline0 = base_set[quartile / 2];
    std::vector<double> dev(quartile);
    for (std::size_t i = 0; i < quartile; ++i) dev[i] = std::abs(base_set[i] - baseline0);
    const double sigma_noise = 1.4826 * median_of(dev);
    const double peak = sorted_y.back();
    if (!(peak > baseline0 + 3.0 * sigma_noise))
        throw FitError("no detectable peak: max does not clear baseline + 3 sigma");

    // Moment seeds over the baseline-subtracted positive part.
    double w_sum = 0.0, c0 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double w = std::max(y[i] - baseline0, 0.0);
        w_sum += w;
        c0 += w * x[i];
    }
    c0 /= w_sum;
    double var0 = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        var0 += std::max(y[i] - baseline0, 0.0) * (x[i] - c0) * (x[i] - c0);
    var0 /= w_sum;
    const double span = x.back() - x.front();
    double s0 = std::sqrt(std::max(var0, 1e-12 * span * span));

    auto eval = [&](const Eigen::VectorXd& p, Eigen::VectorXd& r, Eigen::MatrixXd& jac) {
        const double h = p(0), c = p(1), s = p(2), b = p(3);
        r.resize(static_cast<Eigen::Index>(n));
        jac.resize(static_cast<Eigen::Index>(n), 4);
        for (std::size_t i = 0; i < n; ++i) {
            const double u = (x[i] - c) / s;
            const double e = std::exp(-0.5 * u * u);
            const auto row = static_cast<Eigen::Index>(i);
            r(row) = h * e + b - y[i];
            jac(row, 0) = e;
            jac(row, 1) = h * e * u / s;
            jac(row, 2) = h * e * u * u / s;
            jac(row, 3) = 1.0;
        }
    };

    Eigen::VectorXd p0(4);
    p0 << peak - baseline0, c0, s0, baseline0;
    const LevMarResult res = levmar_fit(eval, p0);

    GaussianFit fit;
    fit.height = res.params(0);
    fit.center = res.params(1);
    fit.sigma = std::abs(res.params(2));
    fit.baseline = res.params(3);
    fit.rms_residual = res.rms_residual;
    fit.se_height = std::sqrt(std::max(res.covariance(0, 0), 0.0));
    fit.se_center = std::sqrt(std::max(res.covariance(1, 1), 0.0));
    fit.se_sigma = std::sqrt(std::max(res.covariance(2, 2), 0.0));
    fit.se_baseline = std::sqrt(std::max(res.covariance(3, 3), 0.0));

    if (!(fit.sigma > 0.0) || fit.sigma > 10.0 * span)
        throw FitError("Gaussian width diverged");
    // A pure-noise record can pass the 3-sigma pre-gate with its largest
    // excursion (~3.3 sigma for hundreds of samples); require the peak
    // model to actually explain variance that a flat baseline cannot.
    double mean_y = 0.0;
    for (const double v : y) mean_y += v;
    mean_y /= double(n);
    double var_flat = 0.0;
    for (const double v : y) var_flat += (v - mean_y) * (v - mean_y);
    const double rms_flat = std::sqrt(var_flat / double(n));
    if (!(fit.height > 0.0) || rms_flat < 1.25 * fit.rms_residual)
        throw FitError("no significant peak: a flat baseline fits almost as well");
    return fit;
}

double snr(const Trace& trace, double floor_W, double thermal_share) {
    if (!(floor_W > 0.0)) throw Error("noise floor must be positive");
    if (!(thermal_share > 0.0) || thermal_share > 1.0)
        throw Error("thermal share must lie in (0, 1]");
    const double peak = *std::max_element(trace.y.begin(), trace.y.end());
    return std::max(peak - floor_W, 0.0) / (thermal_share * floor_W);
}

long long estimate_electron_number(double snr_value, double degradation_fraction) {
    if (!(degradation_fraction > 0.0) || degradation_fraction > 1.0)
        throw OutOfRangeError("degradation fraction must lie in (0, 1], got " +
                              std::to_string(degradation_fraction));
    return std::llround(snr_value / degradation_fraction);
}

double overlap_degradation(const PotentialModel& model, double temperature_K, double kappa,
                           int bins) {
    const auto offsets = boltzmann_frequency_offsets(model, temperature_K, bins);
    double acc = 0.0;
    for (const double s : offsets) {
        const double detuning = model.omega_z * s;
        acc += kappa * kappa / (kappa * kappa + 4.0 * detuning * detuning);
    }
    return acc / static_cast<double>(offsets.size());
}

std::string decay_fit_report(const DecayFit& fit) {
    nlohmann::json j;
    j["model"] = "A*exp(-(t-t0)/tau) + B";
    j["window_s"] = {fit.window_start, fit.window_end};
    j["amplitude_W"] = fit.amplitude;
    j["time_constant_s"] = fit.time_constant;
    j["offset_W"] = fit.offset;
    j["rms_residual_W"] = fit.rms_residual;
    j["standard_errors"] = {{"amplitude_W", fit.se_amplitude},
                            {"time_constant_s", fit.se_time_constant},
                            {"offset_W", fit.se_offset}};
    return j.dump(2);
}

std::string gaussian_fit_report(const GaussianFit& fit) {
    nlohmann::json j;
    j["model"] = "h*exp(-(x-c)^2/(2 sigma^2)) + b";
    j["center_Hz"] = fit.center;
    j["sigma_Hz"] = fit.sigma;
    j["fwhm_Hz"] = fit.fwhm();
    j["height_W"] = fit.height;
    j["baseline_W"] = fit.baseline;
    j["rms_residual_W"] = fit.rms_residual;
    j["standard_errors"] = {{"center_Hz", fit.se_center},
                            {"sigma_Hz", fit.se_sigma},
                            {"height_W", fit.se_height},
                            {"baseline_W", fit.se_baseline}};
    return j.dump(2);
}

}  // namespace etrap
