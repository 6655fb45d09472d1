#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "etrap/analysis.hpp"
#include "etrap/sequence.hpp"
#include "test_util.hpp"

using namespace etrap;

namespace {

const double kOmegaDrive = kTwoPi * 3.105e9;
const double kOmegaZRef = kTwoPi * 619e6;

RunSetup scaled_setup(double gamma_target, double n_electrons = 1260.0) {
    RunSetup s;
    s.drive = make_calibrated_drive(kOmegaDrive, 92.0, 0.56, kOmegaZRef);
    s.cavity = CavityMode{kOmegaZRef, 1300.0, 20000.0, 300.0};
    const double kappa = loaded_linewidth(s.cavity).kappa;
    const double collective_g = 0.5 * std::sqrt(gamma_target * kappa);
    s.coupling_g = collective_g / std::sqrt(n_electrons);
    s.chain.gain_dB = 62.0;
    s.options.noise = false;
    return s;
}

SequenceProgram constant_program(double load_T = 1e6) {
    SequenceProgram p;
    p.segments = {{0.0, 0.02, 92.0, 92.0}, {0.02, 0.25, 92.0, 92.0}};
    p.loading = {0.02, 0.001, 1260.0, load_T};
    p.acquisition = {0.0025, 10e3};
    return p;
}

double floor_of(const Trace& trace) {
    return std::stod(*trace.meta.find("noise_floor_W"));
}

}  // namespace

TEST_CASE("program validation catches bad structure") {
    SequenceProgram p = constant_program();
    p.segments[1].start_s = 0.015;  // overlap
    CHECK_THROWS_AS(p.validate(), ProgramError);

    p = constant_program();
    p.segments[1].start_s = 0.030;  // gap
    CHECK_THROWS_AS(p.validate(), ProgramError);

    p = constant_program();
    p.loading.time_s = 0.40;  // outside span
    CHECK_THROWS_AS(p.validate(), ProgramError);

    p = constant_program();
    p.segments[0].end_s = p.segments[0].start_s;  // empty segment
    CHECK_THROWS_AS(p.validate(), ProgramError);

    p = constant_program();
    p.acquisition.sample_interval_s = 0.0;
    CHECK_THROWS_AS(p.validate(), ProgramError);
}

TEST_CASE("compiled schedule follows the linear amplitude calibration") {
    const RunSetup s = scaled_setup(100.0);
    SequenceProgram p = constant_program();
    const CompiledSchedule sched = compile_sequence(p, s.drive);
    CHECK(sched.omega_at(0.01) == doctest::Approx(kOmegaZRef).epsilon(1e-12));

    // -10% amplitude shifts by -61.9 MHz; +20% by +123.8 MHz.
    SequenceProgram detuned = constant_program();
    detuned.segments[1].amplitude_start_V = 92.0 * 0.9;
    detuned.segments[1].amplitude_end_V = 92.0 * 0.9;
    const CompiledSchedule sd = compile_sequence(detuned, s.drive);
    CHECK((sd.omega_at(0.01) - sd.omega_at(0.1)) / kTwoPi ==
          doctest::Approx(61.9e6).epsilon(1e-9));

    SequenceProgram boosted = constant_program();
    boosted.segments[1].amplitude_start_V = 92.0 * 1.2;
    boosted.segments[1].amplitude_end_V = 92.0 * 1.2;
    const CompiledSchedule sb = compile_sequence(boosted, s.drive);
    CHECK((sb.omega_at(0.1) - kOmegaZRef) / kTwoPi == doctest::Approx(123.8e6).epsilon(1e-9));

    // Ramps interpolate linearly.
    SequenceProgram ramped = constant_program();
    ramped.segments[1].amplitude_end_V = 92.0 * 1.2;
    const CompiledSchedule sr = compile_sequence(ramped, s.drive);
    const double mid = 0.5 * (0.02 + 0.25);
    CHECK(sr.omega_at(mid) == doctest::Approx(kOmegaZRef * 1.1).epsilon(1e-9));
}

TEST_CASE("acquisition sample count is floor(span/interval) + 1") {
    RunSetup s = scaled_setup(100.0);
    {
        SequenceProgram p = constant_program();
        p.segments = {{0.0, 0.030, 92.0, 92.0}};
        p.loading.n_loaded = 0.0;
        p.loading.time_s = 0.001;
        p.loading.duration_s = 0.0005;
        p.acquisition.sample_interval_s = 0.001;
        CHECK(run_sequence(p, s, 1).x.size() == 31);
    }
    {
        SequenceProgram p = constant_program();
        p.segments = {{0.0, 0.025, 92.0, 92.0}};
        p.loading.n_loaded = 0.0;
        p.acquisition.sample_interval_s = 0.004;
        CHECK(run_sequence(p, s, 1).x.size() == 7);
    }
}

TEST_CASE("traces are deterministic per seed and differ across seeds") {
    const RunSetup s = [] {
        RunSetup base = scaled_setup(100.0);
        base.options.noise = true;
        return base;
    }();
    const SequenceProgram p = constant_program();
    const Trace a = run_sequence(p, s, 42);
    const Trace b = run_sequence(p, s, 42);
    const Trace c = run_sequence(p, s, 43);
    REQUIRE(a.y.size() == b.y.size());
    CHECK(a.x == b.x);
    CHECK(a.y == b.y);
    CHECK(a.y != c.y);
}

TEST_CASE("time translation shifts the trace exactly") {
    RunSetup s = scaled_setup(100.0);
    s.options.noise = true;
    SequenceProgram p;
    p.segments = {{0.0, 0.015625, 92.0, 92.0}, {0.015625, 0.25, 92.0, 92.0}};
    p.loading = {0.015625, 0.00078125, 1260.0, 1e6};
    p.acquisition = {0.0009765625, 10e3};  // binary fractions keep shifts exact

    SequenceProgram shifted = p;
    const double dt_shift = 0.5;
    for (auto& seg : shifted.segments) {
        seg.start_s += dt_shift;
        seg.end_s += dt_shift;
    }
    shifted.loading.time_s += dt_shift;

    const Trace base = run_sequence(p, s, 7);
    const Trace moved = run_sequence(shifted, s, 7);
    REQUIRE(base.x.size() == moved.x.size());
    for (std::size_t i = 0; i < base.x.size(); ++i) {
        CHECK(moved.x[i] == base.x[i] + dt_shift);
        CHECK(moved.y[i] == base.y[i]);
    }
}

TEST_CASE("noise-off resonant decay is log-affine at the cooling rate") {
    const double gamma_target = 100.0;
    const RunSetup s = scaled_setup(gamma_target);
    const SequenceProgram p = constant_program();
    const Trace trace = run_sequence(p, s, 11);
    const double floor_W = floor_of(trace);

    const double kappa = loaded_linewidth(s.cavity).kappa;
    const double collective_g = s.coupling_g * std::sqrt(1260.0);
    const double gamma = cooling_rate({collective_g, 0.0}, kappa);

    std::vector<double> ts, logs;
    for (std::size_t i = 0; i < trace.x.size(); ++i) {
        const double t = trace.x[i];
        if (t > 0.03 && t < 0.08) {
            ts.push_back(t);
            logs.push_back(std::log(trace.y[i] - floor_W));
        }
    }
    REQUIRE(ts.size() > 10);
    const double slope = test::regression_slope(ts, logs);
    CHECK(std::abs(-slope - gamma) / gamma < 0.02);
}

TEST_CASE("empty trap is statistically indistinguishable from the noise floor") {
    RunSetup s = scaled_setup(100.0);
    s.options.noise = true;
    SequenceProgram p = constant_program();
    p.loading.n_loaded = 0.0;

    const Trace trace = run_sequence(p, s, 101);
    const Trace reference = run_sequence(p, s, 707);
    CHECK(test::ks_two_sample_p(trace.y, reference.y) > 0.01);

    // The mean sits on the configured floor.
    double mean = 0.0;
    for (const double v : trace.y) mean += v;
    mean /= double(trace.y.size());
    CHECK(mean / floor_of(trace) == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("loading lights up the trace") {
    const RunSetup s = scaled_setup(100.0);
    const SequenceProgram p = constant_program();
    const Trace trace = run_sequence(p, s, 3);
    const double floor_W = floor_of(trace);
    // Quiet before loading (noise off: exactly the floor), strong
    // excess right after.
    for (std::size_t i = 0; i < trace.x.size(); ++i) {
        if (trace.x[i] < 0.019) CHECK(trace.y[i] == floor_W);
    }
    double peak = 0.0;
    for (const double v : trace.y) peak = std::max(peak, v);
    CHECK(peak > 5.0 * floor_W);
}

TEST_CASE("detune epoch halts the decay and the signal revives") {
    const double gamma_target = 100.0;
    RunSetup s = scaled_setup(gamma_target);
    SequenceProgram p;
    p.segments = {{0.0, 0.010, 92.0, 92.0},
                  {0.010, 0.020, 92.0, 92.0},
                  {0.020, 0.070, 82.8, 82.8},
                  {0.070, 0.120, 92.0, 92.0}};
    p.loading = {0.010, 0.001, 1260.0, 1e6};
    p.acquisition = {0.0005, 10e3};
    const Trace trace = run_sequence(p, s, 5);
    const double floor_W = floor_of(trace);

    auto excess_at = [&](double t) {
        for (std::size_t i = 0; i < trace.x.size(); ++i)
            if (std::abs(trace.x[i] - t) < 1e-9) return trace.y[i] - floor_W;
        FAIL("sample not found");
        return 0.0;
    };

    const double pre = excess_at(0.020);      // last fully resonant sample
    const double during = excess_at(0.045);
    const double revived = excess_at(0.0705);  // first fully resonant sample
    CHECK(pre > 0.0);
    // Off resonance the emitted power collapses to the floor.
    CHECK(during < 0.01 * pre);
    // The stored energy bridges the 50 ms epoch: only the 0.5 ms of
    // resonant decay inside the revival window is lost.
    const double ratio = revived / pre;
    CHECK(ratio > 0.93);
    CHECK(ratio < 0.97);

    // After revival the decay resumes at the resonant rate.
    const DecayFit fit = fit_exponential_decay(trace, {0.073, 0.120});
    CHECK(fit.time_constant * gamma_target == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("harmonic sweep peaks at the cavity resonance with near-kappa width") {
    RunSetup s = scaled_setup(1.0, 100.0);
    SequenceProgram p;
    // +-10 MHz around resonance over 2 ms: fully adiabatic crossing.
    const double v_lo = 92.0 * (1.0 - 10e6 / 619e6);
    const double v_hi = 92.0 * (1.0 + 10e6 / 619e6);
    p.segments = {{0.0, 0.0005, v_lo, v_lo},
                  {0.0005, 0.0025, v_lo, v_hi},
                  {0.0025, 0.003, v_hi, v_hi}};
    p.loading = {0.0001, 0.0001, 100.0, 300.0};
    p.acquisition = {1e-5, 150e3};

    const Trace spectrum = sweep_com_frequency(p, s, 17);
    CHECK(spectrum.kind == TraceKind::spectrum_vs_frequency);
    CHECK(spectrum.meta.warnings.empty());

    const GaussianFit fit = fit_gaussian(spectrum);
    const double kappa_Hz = loaded_linewidth(s.cavity).kappa / kTwoPi;
    CHECK(fit.center == doctest::Approx(619e6).epsilon(2e-4));
    CHECK(fit.fwhm() > 0.3 * kappa_Hz);
    CHECK(fit.fwhm() < 3.0 * kappa_Hz);
}

TEST_CASE("anharmonic ensembles broaden the swept spectrum with temperature") {
    RunSetup s = scaled_setup(1.0, 1260.0);
    s.coupling_g = kTwoPi * 30e3;
    s.options.potential = PotentialModel{kOmegaZRef, -1.5e-5, 0.0, kElectronMass};
    s.options.broadening_bins = 256;

    SequenceProgram p;
    p.segments = {{0.0, 0.005, 92.0, 92.0},
                  {0.005, 0.010, 92.0, 82.8},
                  {0.010, 0.060, 82.8, 110.4},
                  {0.060, 0.065, 110.4, 110.4}};
    p.loading = {0.0025, 0.001, 1260.0, 2950.0};
    p.acquisition = {1e-4, 150e3};

    const Trace hot = sweep_com_frequency(p, s, 29);
    SequenceProgram p_cold = p;
    p_cold.loading.initial_temperature_K = 300.0;
    const Trace cold = sweep_com_frequency(p_cold, s, 29);

    const GaussianFit hot_fit = fit_gaussian(hot);
    const GaussianFit cold_fit = fit_gaussian(cold);
    const double kappa_Hz = loaded_linewidth(s.cavity).kappa / kTwoPi;
    CHECK(hot_fit.fwhm() > kappa_Hz);
    CHECK(hot_fit.fwhm() > cold_fit.fwhm());
    // Heated ensembles cross resonance at higher commanded frequency.
    CHECK(hot_fit.center > 619e6);
}

TEST_CASE("double-pass ramp shows both crossings and the full span") {
    RunSetup s = scaled_setup(1.0, 100.0);
    SequenceProgram p;
    p.segments = {{0.0, 0.002, 92.0, 92.0},
                  {0.002, 0.012, 92.0, 82.8},
                  {0.012, 0.042, 82.8, 110.4},
                  {0.042, 0.044, 110.4, 110.4}};
    p.loading = {0.001, 0.0005, 100.0, 300.0};
    p.acquisition = {5e-5, 150e3};

    const Trace time_trace = run_sequence(p, s, 31);
    const double floor_W = floor_of(time_trace);
    // Two distinct crossings in the time trace, judged against the
    // trace's own peak excess.
    double max_excess = 0.0;
    for (const double v : time_trace.y) max_excess = std::max(max_excess, v - floor_W);
    int crossings = 0;
    bool above = false;
    for (const double v : time_trace.y) {
        const bool now = v - floor_W > 0.3 * max_excess;
        if (now && !above) ++crossings;
        above = now;
    }
    CHECK(crossings == 2);

    const Trace spectrum = sweep_com_frequency(p, s, 31);
    const double span = spectrum.x.back() - spectrum.x.front();
    CHECK(span == doctest::Approx(185.7e6).epsilon(0.02));
    for (std::size_t i = 1; i < spectrum.x.size(); ++i)
        CHECK(spectrum.x[i] > spectrum.x[i - 1]);
}

TEST_CASE("sweep that misses resonance is flagged") {
    RunSetup s = scaled_setup(1.0, 100.0);
    SequenceProgram p;
    const double v_lo = 92.0 * 1.05, v_hi = 92.0 * 1.15;
    p.segments = {{0.0, 0.001, v_lo, v_lo}, {0.001, 0.003, v_lo, v_hi}};
    p.loading = {0.0005, 0.0002, 100.0, 300.0};
    p.acquisition = {1e-5, 150e3};
    const Trace spectrum = sweep_com_frequency(p, s, 37);
    REQUIRE(!spectrum.meta.warnings.empty());
    CHECK(spectrum.meta.warnings.front().find("does not cross") != std::string::npos);

    // A rampless program cannot be swept at all.
    SequenceProgram flat = constant_program();
    CHECK_THROWS_AS(sweep_com_frequency(flat, s, 1), ProgramError);
}
