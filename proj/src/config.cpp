#include "etrap/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <vector>

namespace etrap {

namespace {

struct ParseContext {
    std::string source;
    int line = 0;

    [[noreturn]] void fail(const std::string& message) const {
        throw ConfigError(source + ":" + std::to_string(line) + ": " + message);
    }
};

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::size_t pos = 0;
    while (true) {
        const auto next = s.find(sep, pos);
        if (next == std::string::npos) {
            out.push_back(trim(s.substr(pos)));
            break;
        }
        out.push_back(trim(s.substr(pos, next - pos)));
        pos = next + 1;
    }
    return out;
}

double parse_number(const std::string& tok, const ParseContext& ctx) {
    try {
        std::size_t used = 0;
        const double v = std::stod(tok, &used);
        if (used != tok.size()) ctx.fail("malformed number '" + tok + "'");
        return v;
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception&) {
        ctx.fail("malformed number '" + tok + "'");
    }
}

struct UnitTable {
    const char* dimension;
    std::map<std::string, double> scales;
};

const UnitTable kFrequency{"frequency",
                           {{"Hz", 1.0}, {"kHz", 1e3}, {"MHz", 1e6}, {"GHz", 1e9}}};
const UnitTable kTime{"time", {{"s", 1.0}, {"ms", 1e-3}, {"us", 1e-6}, {"ns", 1e-9}}};
const UnitTable kVoltage{"voltage", {{"V", 1.0}, {"mV", 1e-3}, {"kV", 1e3}}};
const UnitTable kTemperature{"temperature", {{"K", 1.0}}};
const UnitTable kDecibel{"level", {{"dB", 1.0}}};
const UnitTable kRate{"rate", {{"1/s", 1.0}}};
const UnitTable kLength{"length", {{"um", 1.0}, {"mm", 1e3}}};
const UnitTable kPerUm2{"curvature", {{"um^-2", 1.0}}};
const UnitTable kPerUm4{"curvature", {{"um^-4", 1.0}}};

double parse_unit_value(const std::string& value, const UnitTable& table,
                        const ParseContext& ctx) {
    std::istringstream is(value);
    std::string num_tok, unit_tok, extra;
    is >> num_tok >> unit_tok;
    if (num_tok.empty()) ctx.fail("empty value");
    if (unit_tok.empty()) {
        std::string expected;
        for (const auto& [u, s] : table.scales) expected += (expected.empty() ? "" : ", ") + u;
        ctx.fail("a " + std::string(table.dimension) + " needs a unit suffix (" + expected +
                 "); got '" + value + "'");
    }
    if (is >> extra) ctx.fail("trailing tokens after '" + unit_tok + "'");
    const auto it = table.scales.find(unit_tok);
    if (it == table.scales.end()) {
        std::string expected;
        for (const auto& [u, s] : table.scales) expected += (expected.empty() ? "" : ", ") + u;
        ctx.fail("unknown " + std::string(table.dimension) + " unit '" + unit_tok +
                 "' (expected " + expected + ")");
    }
    return parse_number(num_tok, ctx) * it->second;
}

double parse_plain(const std::string& value, const ParseContext& ctx) {
    std::istringstream is(value);
    std::string tok, extra;
    is >> tok;
    if (is >> extra)
        ctx.fail("dimensionless value must be a single number; got '" + value + "'");
    return parse_number(tok, ctx);
}

// Amplitudes inside segments: "<num> %" (of the calibration voltage) or
// an absolute voltage.
struct PendingAmplitude {
    double value;
    bool is_percent;
};

PendingAmplitude parse_amplitude(const std::string& text, const ParseContext& ctx) {
    std::istringstream is(text);
    std::string num_tok, unit_tok, extra;
    is >> num_tok >> unit_tok;
    if (num_tok.empty() || unit_tok.empty())
        ctx.fail("amplitude needs a unit ('%' of calibration, or V/mV/kV); got '" + text + "'");
    if (is >> extra) ctx.fail("trailing tokens in amplitude '" + text + "'");
    const double num = parse_number(num_tok, ctx);
    if (unit_tok == "%") return {num, true};
    const auto it = kVoltage.scales.find(unit_tok);
    if (it == kVoltage.scales.end())
        ctx.fail("unknown amplitude unit '" + unit_tok + "' (expected %, V, mV, kV)");
    return {num * it->second, false};
}

struct PendingSegment {
    double start_s, end_s;
    PendingAmplitude a0, a1;
};

}  // namespace

RunConfig parse_run_config(std::istream& in, const std::string& source_label,
                           const std::string& base_dir) {
    ParseContext ctx{source_label, 0};
    RunConfig cfg;

    // Raw values gathered first; cross-field resolution happens at the end.
    std::map<std::string, double> vals;
    std::map<std::string, bool> flags;
    std::vector<PendingSegment> segments;
    std::optional<std::string> field_map;
    std::optional<double> fit_window_um;
    bool have_loading = false;
    LoadingEvent loading;
    std::string section;
    std::string raw_bytes;

    auto set_once = [&](const std::string& key, double v) {
        if (vals.count(key)) ctx.fail("duplicate key '" + key + "'");
        vals[key] = v;
    };

    std::string line;
    while (std::getline(in, line)) {
        ++ctx.line;
        raw_bytes += line;
        raw_bytes += '\n';
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;

        if (line.front() == '[') {
            if (line.back() != ']') ctx.fail("malformed section header '" + line + "'");
            section = line.substr(1, line.size() - 2);
            const char* known[] = {"trap", "potential", "cavity", "coupling",
                                   "chain", "sequence", "run"};
            if (std::find(std::begin(known), std::end(known), section) == std::end(known))
                ctx.fail("unknown section [" + section + "]");
            continue;
        }

        const auto eq = line.find('=');
        if (eq == std::string::npos) ctx.fail("expected 'key = value'");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (section.empty()) ctx.fail("key '" + key + "' appears before any [section]");
        const std::string skey = section + "." + key;

        if (skey == "trap.drive_frequency") {
            set_once(skey, kTwoPi * parse_unit_value(value, kFrequency, ctx));
        } else if (skey == "trap.calibration_voltage") {
            set_once(skey, parse_unit_value(value, kVoltage, ctx));
        } else if (skey == "trap.calibration_secular_frequency") {
            set_once(skey, kTwoPi * parse_unit_value(value, kFrequency, ctx));
        } else if (skey == "trap.stability_q") {
            set_once(skey, parse_plain(value, ctx));
        } else if (skey == "trap.drive_amplitude") {
            set_once(skey, parse_unit_value(value, kVoltage, ctx));
        } else if (skey == "potential.field_map") {
            field_map = value;
        } else if (skey == "potential.secular_frequency") {
            set_once(skey, kTwoPi * parse_unit_value(value, kFrequency, ctx));
        } else if (skey == "potential.c4") {
            set_once(skey, parse_unit_value(value, kPerUm2, ctx));
        } else if (skey == "potential.c6") {
            set_once(skey, parse_unit_value(value, kPerUm4, ctx));
        } else if (skey == "potential.fit_window") {
            fit_window_um = parse_unit_value(value, kLength, ctx);
        } else if (skey == "cavity.resonance_frequency") {
            set_once(skey, kTwoPi * parse_unit_value(value, kFrequency, ctx));
        } else if (skey == "cavity.q_internal" || skey == "cavity.q_external") {
            set_once(skey, parse_plain(value, ctx));
        } else if (skey == "cavity.kappa") {
            set_once(skey, kTwoPi * parse_unit_value(value, kFrequency, ctx));
        } else if (skey == "cavity.mode_temperature") {
            set_once(skey, parse_unit_value(value, kTemperature, ctx));
        } else if (skey == "coupling.g") {
            set_once(skey, kTwoPi * parse_unit_value(value, kFrequency, ctx));
        } else if (skey == "coupling.electron_damping") {
            set_once(skey, parse_unit_value(value, kRate, ctx));
        } else if (skey == "coupling.electron_bath_temperature") {
            set_once(skey, parse_unit_value(value, kTemperature, ctx));
        } else if (skey == "coupling.heating_rate") {
            set_once(skey, parse_unit_value(value, kRate, ctx));
        } else if (skey == "chain.stage") {
            const auto parts = split(value, ',');
            if (parts.size() != 3)
                ctx.fail("stage needs '<name>, <suppression dB>, <transmission dB>'");
            FilterStage stage;
            stage.name = parts[0];
            stage.suppression_dB = parse_unit_value(parts[1], kDecibel, ctx);
            stage.transmission_dB = parse_unit_value(parts[2], kDecibel, ctx);
            cfg.chain.stages.push_back(stage);
        } else if (skey == "chain.gain") {
            set_once(skey, parse_unit_value(value, kDecibel, ctx));
        } else if (skey == "sequence.segment") {
            const auto parts = split(value, ',');
            if (parts.size() != 3)
                ctx.fail("segment needs '<start>, <end>, <amplitude>[ -> <amplitude>]'");
            PendingSegment seg;
            seg.start_s = parse_unit_value(parts[0], kTime, ctx);
            seg.end_s = parse_unit_value(parts[1], kTime, ctx);
            const auto arrow = parts[2].find("->");
            if (arrow == std::string::npos) {
                seg.a0 = parse_amplitude(parts[2], ctx);
                seg.a1 = seg.a0;
            } else {
                seg.a0 = parse_amplitude(trim(parts[2].substr(0, arrow)), ctx);
                seg.a1 = parse_amplitude(trim(parts[2].substr(arrow + 2)), ctx);
            }
            segments.push_back(seg);
        } else if (skey == "sequence.loading") {
            const auto parts = split(value, ',');
            if (parts.size() != 4)
                ctx.fail("loading needs '<time>, <duration>, <count>, <temperature>'");
            loading.time_s = parse_unit_value(parts[0], kTime, ctx);
            loading.duration_s = parse_unit_value(parts[1], kTime, ctx);
            loading.n_loaded = parse_plain(parts[2], ctx);
            loading.initial_temperature_K = parse_unit_value(parts[3], kTemperature, ctx);
            have_loading = true;
        } else if (skey == "sequence.sample_interval") {
            set_once(skey, parse_unit_value(value, kTime, ctx));
        } else if (skey == "sequence.resolution_bandwidth") {
            set_once(skey, parse_unit_value(value, kFrequency, ctx));
        } else if (skey == "sequence.broadening_bins") {
            set_once(skey, parse_plain(value, ctx));
        } else if (skey == "run.seed") {
            set_once(skey, parse_plain(value, ctx));
        } else if (skey == "run.noise") {
            if (value != "on" && value != "off") ctx.fail("noise must be 'on' or 'off'");
            flags["noise"] = value == "on";
        } else if (skey == "run.thermal_noise_share") {
            set_once(skey, parse_plain(value, ctx));
        } else {
            ctx.fail("unknown key '" + key + "' in section [" + section + "]");
        }
    }

    ctx.line = 0;  // end-of-file diagnostics
    auto require = [&](const char* key) {
        const auto it = vals.find(key);
        if (it == vals.end())
            throw ConfigError(source_label + ": missing required key '" + std::string(key) +
                              "'");
        return it->second;
    };

    // Trap and calibration.
    const double omega_drive = require("trap.drive_frequency");
    const double v_ref = require("trap.calibration_voltage");
    const double omega_z_ref = require("trap.calibration_secular_frequency");
    cfg.q_target = require("trap.stability_q");
    const double amplitude =
        vals.count("trap.drive_amplitude") ? vals["trap.drive_amplitude"] : v_ref;
    cfg.drive =
        make_calibrated_drive(omega_drive, v_ref, cfg.q_target, omega_z_ref, electron(),
                              amplitude);

    // Potential: explicit model, fitted field map, or absent (harmonic).
    if (field_map && vals.count("potential.secular_frequency"))
        throw ConfigError(source_label +
                          ": give either a field_map or an explicit potential model, not both");
    if (field_map) {
        std::string path = *field_map;
        if (!base_dir.empty() && !path.empty() && path.front() != '/')
            path = base_dir + "/" + path;
        cfg.field_map_path = path;
        const PotentialSamples samples = load_potential_samples_file(path);
        cfg.potential_fit = fit_even_polynomial(samples, kElectronMass,
                                                fit_window_um.value_or(50.0));
        cfg.sim.potential = cfg.potential_fit->model;
    } else if (vals.count("potential.secular_frequency")) {
        PotentialModel model;
        model.omega_z = vals["potential.secular_frequency"];
        model.c4_per_um2 = vals.count("potential.c4") ? vals["potential.c4"] : 0.0;
        model.c6_per_um4 = vals.count("potential.c6") ? vals["potential.c6"] : 0.0;
        model.mass = kElectronMass;
        cfg.sim.potential = model;
    } else if (vals.count("potential.c4") || vals.count("potential.c6")) {
        throw ConfigError(source_label +
                          ": potential coefficients need a secular_frequency");
    }

    // Cavity; an explicit kappa overrides the internal Q, the Q-derived
    // value is kept as a cross-check.
    cfg.cavity.resonance_frequency = require("cavity.resonance_frequency");
    cfg.cavity.q_external = require("cavity.q_external");
    cfg.cavity.mode_temperature = require("cavity.mode_temperature");
    const double kappa_ex = cfg.cavity.resonance_frequency / cfg.cavity.q_external;
    if (vals.count("cavity.q_internal")) {
        cfg.cavity.q_internal = vals["cavity.q_internal"];
        cfg.kappa_q_derived = cfg.cavity.resonance_frequency / cfg.cavity.q_internal + kappa_ex;
    }
    if (vals.count("cavity.kappa")) {
        cfg.explicit_kappa = vals["cavity.kappa"];
        if (*cfg.explicit_kappa <= kappa_ex)
            throw ConfigError(source_label + ": kappa must exceed the external rate w/Q_ex");
        cfg.cavity.q_internal =
            cfg.cavity.resonance_frequency / (*cfg.explicit_kappa - kappa_ex);
    } else if (!vals.count("cavity.q_internal")) {
        throw ConfigError(source_label + ": cavity needs q_internal or an explicit kappa");
    }
    cfg.cavity.validate();

    // Coupling and simulation knobs.
    cfg.coupling_g = require("coupling.g");
    cfg.sim.gamma_e0 = vals.count("coupling.electron_damping")
                           ? vals["coupling.electron_damping"]
                           : 0.0;
    cfg.sim.electron_bath_temperature_K = vals.count("coupling.electron_bath_temperature")
                                              ? vals["coupling.electron_bath_temperature"]
                                              : cfg.cavity.mode_temperature;
    cfg.sim.heating_quanta_per_s =
        vals.count("coupling.heating_rate") ? vals["coupling.heating_rate"] : 0.0;
    if (vals.count("sequence.broadening_bins")) {
        const double bins = vals["sequence.broadening_bins"];
        if (bins < 1.0 || bins != std::floor(bins))
            throw ConfigError(source_label + ": broadening_bins must be a positive integer");
        cfg.sim.broadening_bins = static_cast<int>(bins);
    }
    if (flags.count("noise")) cfg.sim.noise = flags["noise"];
    if (vals.count("run.thermal_noise_share"))
        cfg.sim.noise_floor_thermal_share = vals["run.thermal_noise_share"];

    cfg.chain.gain_dB = vals.count("chain.gain") ? vals["chain.gain"] : 0.0;

    // Sequence program.
    if (segments.empty())
        throw ConfigError(source_label + ": [sequence] needs at least one segment");
    for (const auto& ps : segments) {
        Segment seg;
        seg.start_s = ps.start_s;
        seg.end_s = ps.end_s;
        seg.amplitude_start_V = ps.a0.is_percent ? v_ref * ps.a0.value / 100.0 : ps.a0.value;
        seg.amplitude_end_V = ps.a1.is_percent ? v_ref * ps.a1.value / 100.0 : ps.a1.value;
        cfg.program.segments.push_back(seg);
    }
    if (have_loading) cfg.program.loading = loading;
    cfg.program.acquisition.sample_interval_s = require("sequence.sample_interval");
    cfg.program.acquisition.resolution_bandwidth_Hz = require("sequence.resolution_bandwidth");
    cfg.program.validate();

    const double seed_val = require("run.seed");
    if (seed_val < 0.0 || seed_val != std::floor(seed_val))
        throw ConfigError(source_label + ": seed must be a non-negative integer");
    cfg.seed = static_cast<std::uint64_t>(seed_val);

    cfg.digest = fnv1a_digest(raw_bytes);
    cfg.source_path = source_label;
    return cfg;
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    std::string base_dir = ".";
    const auto slash = path.find_last_of('/');
    if (slash != std::string::npos) base_dir = path.substr(0, slash);
    return parse_run_config(in, path, base_dir);
}

RunSetup make_run_setup(const RunConfig& config) {
    RunSetup setup;
    setup.drive = config.drive;
    setup.cavity = config.cavity;
    setup.coupling_g = config.coupling_g;
    setup.chain = config.chain;
    setup.options = config.sim;
    return setup;
}

}  // namespace etrap
