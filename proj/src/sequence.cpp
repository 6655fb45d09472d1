#include "etrap/sequence.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <sstream>

namespace etrap {

namespace {

std::string fmt_time(double t) {
    std::ostringstream os;
    os << t;
    return os.str();
}

}  // namespace

void SequenceProgram::validate() const {
    if (segments.empty()) throw ProgramError("program has no segments");
    for (const auto& s : segments) {
        if (!(s.end_s > s.start_s))
            throw ProgramError("segment duration must be positive at t = " +
                               fmt_time(s.start_s));
        if (s.amplitude_start_V < 0.0 || s.amplitude_end_V < 0.0)
            throw ProgramError("segment amplitudes must be non-negative");
    }
    for (std::size_t i = 1; i < segments.size(); ++i) {
        const double gap = segments[i].start_s - segments[i - 1].end_s;
        if (gap < -1e-12)
            throw ProgramError("segments overlap at t = " + fmt_time(segments[i].start_s));
        if (gap > 1e-12)
            throw ProgramError("segments must be contiguous; gap before t = " +
                               fmt_time(segments[i].start_s));
    }
    if (loading.n_loaded > 0.0) {
        if (!(loading.duration_s > 0.0))
            throw ProgramError("loading duration must be positive");
        if (loading.time_s < start_s() || loading.time_s + loading.duration_s > end_s())
            throw ProgramError("loading event lies outside the program span");
        if (loading.initial_temperature_K < 0.0)
            throw ProgramError("loading temperature must be non-negative");
    }
    if (!(acquisition.sample_interval_s > 0.0))
        throw ProgramError("sample interval must be positive");
    if (!(acquisition.resolution_bandwidth_Hz > 0.0))
        throw ProgramError("resolution bandwidth must be positive");
}

std::string SequenceProgram::digest() const {
    std::ostringstream os;
    os.precision(17);
    for (const auto& s : segments)
        os << "seg " << s.start_s << ' ' << s.end_s << ' ' << s.amplitude_start_V << ' '
           << s.amplitude_end_V << '\n';
    os << "load " << loading.time_s << ' ' << loading.duration_s << ' ' << loading.n_loaded
       << ' ' << loading.initial_temperature_K << '\n';
    os << "acq " << acquisition.sample_interval_s << ' ' << acquisition.resolution_bandwidth_Hz
       << '\n';
    return fnv1a_digest(os.str());
}

double CompiledSchedule::omega_at(double t_s) const {
    if (pieces.empty()) throw ProgramError("empty schedule");
    if (t_s <= pieces.front().start_s) return pieces.front().omega_start;
    for (const auto& p : pieces) {
        if (t_s <= p.end_s) {
            if (!p.is_ramp) return p.omega_start;
            const double frac = (t_s - p.start_s) / (p.end_s - p.start_s);
            return p.omega_start + frac * (p.omega_end - p.omega_start);
        }
    }
    return pieces.back().omega_end;
}

double CompiledSchedule::max_ramp_rate() const {
    double rate = 0.0;
    for (const auto& p : pieces)
        if (p.is_ramp)
            rate = std::max(rate, std::abs(p.omega_end - p.omega_start) / (p.end_s - p.start_s));
    return rate;
}

CompiledSchedule compile_sequence(const SequenceProgram& program, const TrapDrive& drive) {
    program.validate();
    drive.validate();
    CompiledSchedule sched;
    sched.pieces.reserve(program.segments.size());
    for (const auto& s : program.segments) {
        CompiledSchedule::Piece p;
        p.start_s = s.start_s;
        p.end_s = s.end_s;
        p.omega_start = drive.calibrated_secular_frequency(s.amplitude_start_V);
        p.omega_end = drive.calibrated_secular_frequency(s.amplitude_end_V);
        p.is_ramp = s.is_ramp();
        sched.pieces.push_back(p);
    }
    return sched;
}

namespace {

using cplx = std::complex<double>;

// Per-bin state of the simulated ensemble. A single bin holds the full
// collective COM mode; several bins realize inhomogeneous broadening,
// each an independent sub-ensemble of N/K electrons detuned by its
// thermal frequency offset.
struct Engine {
    const RunSetup& setup;
    Linewidths lw;
    double omega_cavity;
    double chain_factor;
    double dt;
    bool two_mode;  // exact two-mode propagator vs per-bin cavity elimination

    std::vector<double> offsets;  // relative frequency offsets per bin
    std::vector<cplx> bins;       // electron amplitudes per bin
    cplx a_p{0.0, 0.0};           // cavity amplitude (two-mode engine)
    double n_electrons = 0.0;
    double bath_T_e;
    double coupling_per_bin = 0.0;  // g sqrt(N/K), set at loading

    // Cached per-substep quantities, recomputed when omega_z changes.
    double cached_omega_z = -1.0;
    TwoModePropagator prop;
    double var_e_cached = 0.0;
    std::vector<cplx> bin_factor;
    std::vector<cplx> bin_response;
    std::vector<double> bin_var;

    Engine(const RunSetup& s, std::vector<double> offs, bool tm, double step)
        : setup(s),
          lw(loaded_linewidth(s.cavity)),
          omega_cavity(s.cavity.resonance_frequency),
          chain_factor(s.chain.readout_power_factor()),
          dt(step),
          two_mode(tm),
          offsets(std::move(offs)),
          bins(offsets.size(), cplx{0.0, 0.0}),
          bath_T_e(s.options.electron_bath_temperature_K),
          bin_factor(offsets.size()),
          bin_response(offsets.size()),
          bin_var(offsets.size(), 0.0) {}

    void load(double n, double temperature_K, double omega_z, NoiseStream& noise) {
        n_electrons = n;
        coupling_per_bin =
            setup.coupling_g * std::sqrt(n / static_cast<double>(offsets.size()));
        const double quanta = temperature_K > 0.0 ? thermal_quanta(temperature_K, omega_z) : 0.0;
        for (auto& b : bins) b = std::sqrt(quanta) * noise.next_phase();
        cached_omega_z = -1.0;
    }

    void refresh(double omega_z) {
        if (omega_z == cached_omega_z) return;
        cached_omega_z = omega_z;
        const double gamma_e0 = setup.options.gamma_e0;
        const double heat = setup.options.heating_quanta_per_s;
        const double n_mode = setup.cavity.mode_temperature > 0.0
                                  ? thermal_quanta(setup.cavity.mode_temperature, omega_cavity)
                                  : 0.0;
        const double n_bath = (gamma_e0 > 0.0 && bath_T_e > 0.0)
                                  ? thermal_quanta(bath_T_e, omega_cavity)
                                  : 0.0;
        if (two_mode) {
            const double detuning = omega_z - omega_cavity;
            prop = TwoModePropagator(coupling_per_bin, detuning, lw.kappa, gamma_e0, dt);
            // The cavity bath reaches the electron at the (collective)
            // detuned cooling rate; the recorded cavity amplitude itself
            // carries no bath drive - its in-band thermal occupation is
            // accounted analytically by the noise floor.
            const double gz = std::min(
                cooling_rate({coupling_per_bin, detuning}, lw.kappa), 0.5 * lw.kappa);
            var_e_cached = heat * dt + n_bath * (1.0 - std::exp(-gamma_e0 * dt)) +
                           n_mode * (1.0 - std::exp(-gz * dt));
        } else {
            for (std::size_t k = 0; k < offsets.size(); ++k) {
                const double detuning = omega_z * (1.0 + offsets[k]) - omega_cavity;
                const double gz = cooling_rate({coupling_per_bin, detuning}, lw.kappa);
                bin_factor[k] =
                    std::exp(cplx(-0.5 * (gz + gamma_e0) * dt, -detuning * dt));
                bin_response[k] = cplx(0.0, -coupling_per_bin) /
                                  cplx(0.5 * lw.kappa, -detuning);
                bin_var[k] = heat * dt + n_bath * (1.0 - std::exp(-gamma_e0 * dt)) +
                             n_mode * (1.0 - std::exp(-gz * dt));
            }
        }
    }

    void step(double omega_z, NoiseStream& noise, bool noise_on) {
        refresh(omega_z);
        if (two_mode) {
            prop.apply(bins[0], a_p);
            if (noise_on && n_electrons > 0.0) bins[0] += noise.next_complex(var_e_cached);
        } else {
            for (std::size_t k = 0; k < bins.size(); ++k) {
                bins[k] *= bin_factor[k];
                if (noise_on && n_electrons > 0.0) bins[k] += noise.next_complex(bin_var[k]);
            }
        }
    }

    double signal_power() const {
        // The sub-ensembles sit at distinct secular frequencies, so
        // their emission is mutually incoherent over any acquisition
        // interval: powers add. The single collective mode stays
        // coherent.
        double quanta;
        if (two_mode) {
            quanta = std::norm(a_p);
        } else {
            quanta = 0.0;
            for (std::size_t k = 0; k < bins.size(); ++k)
                quanta += std::norm(bin_response[k] * bins[k]);
        }
        return lw.kappa_ex * kHBar * omega_cavity * quanta * chain_factor;
    }
};

}  // namespace

Trace run_sequence(const SequenceProgram& program, const RunSetup& setup, std::uint64_t seed) {
    program.validate();
    setup.cavity.validate();
    if (setup.coupling_g < 0.0) throw Error("coupling g must be non-negative");
    const CompiledSchedule sched = compile_sequence(program, setup.drive);
    const Linewidths lw = loaded_linewidth(setup.cavity);
    const SimOptions& opt = setup.options;

    // Broadening bins: only meaningful with an anharmonic model and a
    // nonzero loading temperature.
    std::vector<double> offsets{0.0};
    if (opt.potential && opt.broadening_bins > 1 && program.loading.n_loaded > 0.0 &&
        program.loading.initial_temperature_K > 0.0 &&
        (opt.potential->c4_per_um2 != 0.0 || opt.potential->c6_per_um4 != 0.0)) {
        offsets = boltzmann_frequency_offsets(*opt.potential,
                                              program.loading.initial_temperature_K,
                                              opt.broadening_bins);
    }
    const bool two_mode = offsets.size() == 1;

    const double t0 = program.start_s();
    const double span = program.end_s() - t0;
    const double interval = program.acquisition.sample_interval_s;
    const auto n_samples =
        static_cast<std::size_t>(std::floor(span / interval + 1e-9)) + 1;

    const double g_bin =
        setup.coupling_g *
        std::sqrt(std::max(program.loading.n_loaded, 0.0) / double(offsets.size()));

    // Step size: resolve the fastest retained rate and any ramp. The
    // two-mode propagator is exact in the detuning, so only kappa, the
    // coupling and the damping rates constrain it.
    double dt_max = interval / 4.0;
    if (two_mode) {
        const double fastest = std::max({lw.kappa, g_bin, opt.gamma_e0});
        if (fastest > 0.0) dt_max = std::min(dt_max, 0.1 / fastest);
    } else {
        const double gz0 = 4.0 * g_bin * g_bin / lw.kappa;
        const double fastest = std::max(gz0, opt.gamma_e0);
        if (fastest > 0.0) dt_max = std::min(dt_max, 0.1 / fastest);
    }
    const double ramp_rate = sched.max_ramp_rate();
    if (ramp_rate > 0.0) {
        dt_max = std::min(dt_max, std::sqrt(0.05 / ramp_rate));
        dt_max = std::min(dt_max, 0.3 * lw.kappa / ramp_rate);
    }
    const auto steps_per_sample = static_cast<std::size_t>(std::ceil(interval / dt_max));
    const double dt = interval / double(steps_per_sample);

    Engine engine(setup, offsets, two_mode, dt);
    NoiseStream noise(seed);

    const double load_mid = program.loading.time_s + 0.5 * program.loading.duration_s;
    const auto load_step = program.loading.n_loaded > 0.0
                               ? static_cast<long long>(std::llround((load_mid - t0) / dt))
                               : -1;

    const NoiseFloor floor = noise_floor(setup.cavity, program.acquisition.resolution_bandwidth_Hz,
                                         setup.chain.gain_dB, opt.noise_floor_thermal_share);
    const double radiometer_sigma =
        1.0 / std::sqrt(program.acquisition.resolution_bandwidth_Hz * interval);

    Trace trace;
    trace.kind = TraceKind::zero_span_time;
    trace.x.reserve(n_samples);
    trace.y.reserve(n_samples);

    auto floor_sample = [&]() {
        if (!opt.noise) return floor.total_W;
        return floor.total_W * (1.0 + radiometer_sigma * noise.next_normal());
    };

    long long global_step = 0;
    // Sample 0 is the instantaneous reading at the program start; each
    // later sample is the boxcar mean over the interval ending at it.
    engine.refresh(sched.omega_at(t0));
    trace.x.push_back(t0);
    trace.y.push_back(std::max(engine.signal_power() + floor_sample(), 0.0));
    for (std::size_t k = 1; k < n_samples; ++k) {
        double acc = 0.0;
        for (std::size_t i = 0; i < steps_per_sample; ++i, ++global_step) {
            if (global_step == load_step)
                engine.load(program.loading.n_loaded, program.loading.initial_temperature_K,
                            sched.omega_at(t0 + double(global_step) * dt), noise);
            const double t_mid = (double(global_step) + 0.5) * dt;
            engine.step(sched.omega_at(t0 + t_mid), noise, opt.noise);
            acc += engine.signal_power();
        }
        trace.x.push_back(t0 + double(k) * interval);
        trace.y.push_back(std::max(acc / double(steps_per_sample) + floor_sample(), 0.0));
    }

    trace.meta.seed = seed;
    trace.meta.program_digest = program.digest();
    trace.meta.x_unit = "s";
    trace.meta.y_unit = "W";
    trace.meta.annotate("engine", two_mode ? "two_mode" : "ensemble");
    auto num = [](double v) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.17g", v);
        return std::string(buf);
    };
    trace.meta.annotate("bins", std::to_string(offsets.size()));
    trace.meta.annotate("dt_s", num(dt));
    trace.meta.annotate("noise", opt.noise ? "on" : "off");
    trace.meta.annotate("rbw_Hz", num(program.acquisition.resolution_bandwidth_Hz));
    trace.meta.annotate("noise_floor_W", num(floor.total_W));
    trace.meta.annotate("noise_floor_thermal_W", num(floor.thermal_W));
    trace.meta.annotate("n_loaded", num(program.loading.n_loaded));
    if (!two_mode && g_bin > 0.25 * lw.kappa)
        trace.meta.warnings.push_back(
            "per-bin coupling exceeds the adiabatic-elimination regime (g_bin > kappa/4)");
    if (two_mode && g_bin > 0.5 * lw.kappa)
        trace.meta.warnings.push_back("collective coupling is in the strong-coupling regime");
    return trace;
}

Trace sweep_com_frequency(const SequenceProgram& program, const RunSetup& setup,
                          std::uint64_t seed) {
    bool has_ramp = false;
    for (const auto& s : program.segments) has_ramp |= s.is_ramp();
    if (!has_ramp) throw ProgramError("sweep program needs at least one ramp segment");

    const Trace time_trace = run_sequence(program, setup, seed);
    const CompiledSchedule sched = compile_sequence(program, setup.drive);

    std::vector<std::pair<double, double>> points;  // (frequency Hz, power W)
    for (std::size_t i = 0; i < time_trace.x.size(); ++i) {
        const double t = time_trace.x[i];
        for (const auto& p : sched.pieces) {
            if (p.is_ramp && t >= p.start_s && t <= p.end_s) {
                points.emplace_back(sched.omega_at(t) / kTwoPi, time_trace.y[i]);
                break;
            }
        }
    }
    std::sort(points.begin(), points.end());

    Trace spec;
    spec.kind = TraceKind::spectrum_vs_frequency;
    spec.meta = time_trace.meta;
    spec.meta.x_unit = "Hz";
    spec.meta.annotate("frequency_axis", "commanded");
    for (const auto& [f, y] : points) {
        if (!spec.x.empty() && f == spec.x.back()) {
            spec.y.back() = 0.5 * (spec.y.back() + y);  // merge equal commanded points
        } else {
            spec.x.push_back(f);
            spec.y.push_back(y);
        }
    }
    if (spec.x.size() < 8) throw ProgramError("ramp epochs hold too few samples for a spectrum");

    const double f_cav = setup.cavity.resonance_frequency / kTwoPi;
    if (f_cav < spec.x.front() || f_cav > spec.x.back())
        spec.meta.warnings.push_back("sweep does not cross the cavity resonance");
    return spec;
}

}  // namespace etrap
