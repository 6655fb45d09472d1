// Trace persistence: CSV with a `#` metadata header, and JSON with the
// same provenance. Payload bytes are reproducible: no timestamps, fixed
// number formatting.
#pragma once

#include <iosfwd>
#include <string>

#include "etrap/trace.hpp"

namespace etrap {

void write_trace_csv(const Trace& trace, std::ostream& out);
void write_trace_csv_file(const Trace& trace, const std::string& path);

Trace read_trace_csv(std::istream& in);
Trace read_trace_csv_file(const std::string& path);

std::string trace_to_json(const Trace& trace);
void write_trace_json_file(const Trace& trace, const std::string& path);

}  // namespace etrap
