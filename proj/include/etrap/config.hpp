// Run-config files: flat sectioned key=value text with mandatory unit
// suffixes on every physical quantity. Unknown keys are rejected with
// line numbers.
#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>

#include "etrap/sequence.hpp"

namespace etrap {

struct RunConfig {
    TrapDrive drive;
    double q_target = 0.0;

    std::optional<std::string> field_map_path;
    std::optional<PotentialFit> potential_fit;  // present when a field map was fitted

    CavityMode cavity;
    std::optional<double> explicit_kappa;  // [rad/s], when the file pins kappa directly
    double kappa_q_derived = 0.0;          // [rad/s], cross-check from the Q values

    double coupling_g = 0.0;  // [rad/s]
    FilterChain chain;
    SimOptions sim;
    SequenceProgram program;
    std::uint64_t seed = 0;

    std::string digest;       // of the raw file bytes
    std::string source_path;
};

RunConfig parse_run_config(std::istream& in, const std::string& source_label,
                           const std::string& base_dir = "");
RunConfig load_run_config(const std::string& path);

/// Assemble the simulation inputs from a parsed config.
RunSetup make_run_setup(const RunConfig& config);

}  // namespace etrap
