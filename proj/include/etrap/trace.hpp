// Acquired records: uniformly sampled power-vs-time (zero span) or
// power-vs-frequency (spectrum), with full provenance metadata.
#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace etrap {

enum class TraceKind { zero_span_time, spectrum_vs_frequency };

struct TraceMeta {
    std::uint64_t seed = 0;
    std::string config_digest;
    std::string program_digest;
    std::string x_unit;
    std::string y_unit;
    std::vector<std::string> warnings;
    std::vector<std::pair<std::string, std::string>> annotations;

    void annotate(std::string key, std::string value) {
        annotations.emplace_back(std::move(key), std::move(value));
    }
    const std::string* find(const std::string& key) const {
        for (const auto& [k, v] : annotations)
            if (k == key) return &v;
        return nullptr;
    }
};

struct Trace {
    TraceKind kind = TraceKind::zero_span_time;
    std::vector<double> x;
    std::vector<double> y;
    TraceMeta meta;
};

/// FNV-1a 64-bit digest rendered as 16 hex characters.
std::string fnv1a_digest(const std::string& bytes);

}  // namespace etrap
