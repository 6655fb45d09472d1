#include "etrap/trace_io.hpp"

#include <json.hpp>

#include <cinttypes>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "etrap/errors.hpp"

namespace etrap {

std::string fnv1a_digest(const std::string& bytes) {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (const unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001B3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016" PRIx64, h);
    return std::string(buf);
}

namespace {

const char* kind_name(TraceKind kind) {
    return kind == TraceKind::zero_span_time ? "zero_span_time" : "spectrum_vs_frequency";
}

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
}

}  // namespace

void write_trace_csv(const Trace& trace, std::ostream& out) {
    out << "# etrap trace\n";
    out << "# kind = " << kind_name(trace.kind) << "\n";
    out << "# seed = " << trace.meta.seed << "\n";
    out << "# config_digest = " << trace.meta.config_digest << "\n";
    out << "# program_digest = " << trace.meta.program_digest << "\n";
    out << "# x_unit = " << trace.meta.x_unit << "\n";
    out << "# y_unit = " << trace.meta.y_unit << "\n";
    for (const auto& [k, v] : trace.meta.annotations) out << "# note." << k << " = " << v << "\n";
    for (const auto& w : trace.meta.warnings) out << "# warning = " << w << "\n";
    out << "# columns = x,y\n";
    for (std::size_t i = 0; i < trace.x.size(); ++i)
        out << num(trace.x[i]) << ',' << num(trace.y[i]) << '\n';
}

void write_trace_csv_file(const Trace& trace, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write trace to '" + path + "'");
    write_trace_csv(trace, out);
}

Trace read_trace_csv(std::istream& in) {
    Trace trace;
    std::string line;
    int line_no = 0;
    auto meta_value = [](const std::string& l) {
        const auto eq = l.find('=');
        if (eq == std::string::npos) return std::string();
        auto v = l.substr(eq + 1);
        const auto b = v.find_first_not_of(" \t");
        return b == std::string::npos ? std::string() : v.substr(b);
    };
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        if (line[0] == '#') {
            if (line.rfind("# kind", 0) == 0)
                trace.kind = meta_value(line) == "spectrum_vs_frequency"
                                 ? TraceKind::spectrum_vs_frequency
                                 : TraceKind::zero_span_time;
            else if (line.rfind("# seed", 0) == 0)
                trace.meta.seed = std::strtoull(meta_value(line).c_str(), nullptr, 10);
            else if (line.rfind("# config_digest", 0) == 0)
                trace.meta.config_digest = meta_value(line);
            else if (line.rfind("# program_digest", 0) == 0)
                trace.meta.program_digest = meta_value(line);
            else if (line.rfind("# x_unit", 0) == 0)
                trace.meta.x_unit = meta_value(line);
            else if (line.rfind("# y_unit", 0) == 0)
                trace.meta.y_unit = meta_value(line);
            else if (line.rfind("# warning", 0) == 0)
                trace.meta.warnings.push_back(meta_value(line));
            else if (line.rfind("# note.", 0) == 0) {
                const auto key_end = line.find(' ', 7);
                if (key_end != std::string::npos)
                    trace.meta.annotate(line.substr(7, key_end - 7), meta_value(line));
            }
            continue;
        }
        const auto comma = line.find(',');
        if (comma == std::string::npos)
            throw ConfigError("trace line " + std::to_string(line_no) + ": expected 'x,y'");
        try {
            trace.x.push_back(std::stod(line.substr(0, comma)));
            trace.y.push_back(std::stod(line.substr(comma + 1)));
        } catch (const std::exception&) {
            throw ConfigError("trace line " + std::to_string(line_no) + ": non-numeric row");
        }
    }
    if (trace.x.empty()) throw ConfigError("trace file holds no samples");
    return trace;
}

Trace read_trace_csv_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open trace '" + path + "'");
    return read_trace_csv(in);
}

std::string trace_to_json(const Trace& trace) {
    nlohmann::json j;
    j["kind"] = kind_name(trace.kind);
    j["seed"] = trace.meta.seed;
    j["config_digest"] = trace.meta.config_digest;
    j["program_digest"] = trace.meta.program_digest;
    j["x_unit"] = trace.meta.x_unit;
    j["y_unit"] = trace.meta.y_unit;
    j["warnings"] = trace.meta.warnings;
    nlohmann::json notes = nlohmann::json::object();
    for (const auto& [k, v] : trace.meta.annotations) notes[k] = v;
    j["notes"] = notes;
    j["x"] = trace.x;
    j["y"] = trace.y;
    return j.dump(2);
}

void write_trace_json_file(const Trace& trace, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write trace to '" + path + "'");
    out << trace_to_json(trace) << '\n';
}

}  // namespace etrap
