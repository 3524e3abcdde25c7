#include "bigap/trace_io.hpp"

#include "json.hpp"

#include <cstdio>
#include <fstream>
#include <ostream>

namespace bigap {

TraceFormat parse_trace_format(std::string_view text) {
    if (text == "csv")
        return TraceFormat::Csv;
    if (text == "json-lines" || text == "jsonl")
        return TraceFormat::JsonLines;
    throw ConfigError("unknown trace format '" + std::string(text) + "' (expected csv or json-lines)");
}

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

namespace {

std::string opt_field(const std::optional<double> &v) { return v ? format_double(*v) : std::string(); }

std::string row_status(const RunTrace &trace, std::size_t index) {
    return index + 1 == trace.rows.size() ? to_string(trace.status) : std::string();
}

} // namespace

void write_trace_csv(std::ostream &out, const RunTrace &trace) {
    out << kTraceHeader << '\n';
    for (std::size_t i = 0; i < trace.rows.size(); ++i) {
        const TraceRow &r = trace.rows[i];
        out << r.k << ',' << format_double(r.time_s) << ',' << format_double(r.c_k) << ','
            << format_double(r.F) << ',' << format_double(r.gap_proxy) << ',' << format_double(r.res_proxy)
            << ',' << opt_field(r.gap_exact) << ',' << opt_field(r.res_exact) << ',' << opt_field(r.merit_V)
            << ',' << opt_field(r.ref_rel_err) << ',' << row_status(trace, i) << '\n';
    }
}

void write_trace_jsonl(std::ostream &out, const RunTrace &trace) {
    auto opt = [](const std::optional<double> &v) { return v ? nlohmann::json(*v) : nlohmann::json(); };
    for (std::size_t i = 0; i < trace.rows.size(); ++i) {
        const TraceRow &r = trace.rows[i];
        // ordered_json keeps the CSV column order.
        nlohmann::ordered_json row;
        row["k"] = r.k;
        row["time_s"] = r.time_s;
        row["c_k"] = r.c_k;
        row["F"] = r.F;
        row["gap_proxy"] = r.gap_proxy;
        row["res_proxy"] = r.res_proxy;
        row["gap_exact"] = opt(r.gap_exact);
        row["res_exact"] = opt(r.res_exact);
        row["merit_V"] = opt(r.merit_V);
        row["ref_rel_err"] = opt(r.ref_rel_err);
        const std::string status = row_status(trace, i);
        row["status"] = status.empty() ? nlohmann::json() : nlohmann::json(status);
        out << row.dump() << '\n';
    }
}

void write_trace(std::ostream &out, const RunTrace &trace, TraceFormat format) {
    if (format == TraceFormat::Csv)
        write_trace_csv(out, trace);
    else
        write_trace_jsonl(out, trace);
}

void write_trace_file(const std::string &path, const RunTrace &trace, TraceFormat format) {
    std::ofstream out(path);
    if (!out)
        throw ConfigError("cannot open trace output '" + path + "'");
    write_trace(out, trace, format);
}

} // namespace bigap
