#pragma once

// Trace serialization. Doubles are written with %.17g so files round-trip and
// two runs with the same seed differ only in the time_s column.

#include "bigap/solver.hpp"

#include <iosfwd>
#include <string>
#include <string_view>

namespace bigap {

enum class TraceFormat { Csv, JsonLines };

/// "csv", "json-lines" (or "jsonl").
TraceFormat parse_trace_format(std::string_view text);

inline constexpr std::string_view kTraceHeader =
    "k,time_s,c_k,F,gap_proxy,res_proxy,gap_exact,res_exact,merit_V,ref_rel_err,status";

std::string format_double(double v);

/// Unsampled diagnostics are empty fields; status is set on the last row only.
void write_trace_csv(std::ostream &out, const RunTrace &trace);

/// One JSON object per row with the CSV column names as keys; empty fields are null.
void write_trace_jsonl(std::ostream &out, const RunTrace &trace);

void write_trace(std::ostream &out, const RunTrace &trace, TraceFormat format);

/// Throws ConfigError when the file cannot be opened.
void write_trace_file(const std::string &path, const RunTrace &trace, TraceFormat format);

} // namespace bigap
