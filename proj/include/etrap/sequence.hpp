// Measurement sequences: drive-amplitude schedules, electron loading,
// zero-span acquisition and swept spectra.
#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "etrap/cavity.hpp"
#include "etrap/mathieu.hpp"
#include "etrap/potential.hpp"
#include "etrap/trace.hpp"

namespace etrap {

/// One drive-amplitude segment. Constant when the endpoints match;
/// otherwise a linear ramp in amplitude.
struct Segment {
    double start_s;
    double end_s;
    double amplitude_start_V;
    double amplitude_end_V;

    bool is_ramp() const { return amplitude_start_V != amplitude_end_V; }
};

struct LoadingEvent {
    double time_s = 0.0;      // start of the loading pulse
    double duration_s = 0.0;
    double n_loaded = 0.0;
    double initial_temperature_K = 0.0;
};

struct Acquisition {
    double sample_interval_s;
    double resolution_bandwidth_Hz;
};

struct SequenceProgram {
    std::vector<Segment> segments;
    LoadingEvent loading;
    Acquisition acquisition;

    double start_s() const { return segments.empty() ? 0.0 : segments.front().start_s; }
    double end_s() const { return segments.empty() ? 0.0 : segments.back().end_s; }
    void validate() const;
    std::string digest() const;
};

/// Piecewise-linear commanded secular frequency omega_z(t).
struct CompiledSchedule {
    struct Piece {
        double start_s, end_s;
        double omega_start, omega_end;  // [rad/s]
        bool is_ramp;
    };
    std::vector<Piece> pieces;

    double omega_at(double t_s) const;
    double max_ramp_rate() const;  // max |d omega/dt| [rad/s^2]
};

/// Map the program's amplitudes onto omega_z(t) through the drive's
/// linear amplitude calibration.
CompiledSchedule compile_sequence(const SequenceProgram& program, const TrapDrive& drive);

/// Simulation knobs that are not part of the physical hardware
/// description.
struct SimOptions {
    double gamma_e0 = 0.0;                   // intrinsic electron damping [1/s]
    double electron_bath_temperature_K = 300.0;
    double heating_quanta_per_s = 0.0;
    int broadening_bins = 64;                // ensemble sub-bins when anharmonic
    std::optional<PotentialModel> potential; // enables inhomogeneous broadening
    double noise_floor_thermal_share = 0.87;
    bool noise = true;
};

/// Everything a sequence run needs besides the program itself.
struct RunSetup {
    TrapDrive drive;
    CavityMode cavity;
    double coupling_g;  // single-electron coupling [rad/s]
    FilterChain chain;
    SimOptions options;
};

/// Execute the program: step the electron-cavity system along the
/// compiled omega_z(t), inject the loading event, and record the chain
/// output power at each acquisition sample. Deterministic per seed.
Trace run_sequence(const SequenceProgram& program, const RunSetup& setup, std::uint64_t seed);

/// Run the program and re-parameterize the ramp epochs onto the
/// commanded-frequency axis (power vs secular frequency). Flags the
/// trace when the ramp never crosses the cavity resonance.
Trace sweep_com_frequency(const SequenceProgram& program, const RunSetup& setup,
                          std::uint64_t seed);

}  // namespace etrap
