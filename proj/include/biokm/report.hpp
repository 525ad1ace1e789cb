#pragma once

// Bio-computing vs Little's Law comparison and the end-to-end analysis
// pipeline: captures -> per-run rates -> averaged rates -> aggregate response
// and M/M/1 statistics -> comparison, rendered as Markdown and CSV.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "biokm/capture.hpp"
#include "biokm/error.hpp"
#include "biokm/queueing.hpp"
#include "biokm/telemetry.hpp"

namespace biokm::report {

enum class Mode { Exact, TablePrecision };

inline std::string_view mode_name(Mode m) noexcept { return m == Mode::Exact ? "exact" : "table"; }

struct ComparisonReport {
    double bio_utilization = 0.0;
    double bio_idle = 0.0;
    double little_utilization = 0.0;
    double little_idle = 0.0;
    double util_diff_pct = 0.0;
    double idle_diff_pct = 0.0;
    Mode mode = Mode::Exact;
};

/// |a - b| relative to the larger magnitude, in percent.
inline double difference_pct(double a, double b) noexcept {
    const double denom = std::max(std::fabs(a), std::fabs(b));
    if (denom == 0.0) return 0.0;
    return std::fabs(a - b) / denom * 100.0;
}

inline ComparisonReport compare(const telemetry::BioStats& bio, const queueing::QueueStats& little,
                                Mode mode = Mode::Exact) {
    ComparisonReport r;
    r.bio_utilization = bio.q;
    r.bio_idle = bio.idle;
    r.little_utilization = little.rho;
    r.little_idle = little.idle;
    r.util_diff_pct = difference_pct(bio.q, little.rho);
    r.idle_diff_pct = difference_pct(bio.idle, little.idle);
    r.mode = mode;
    return r;
}

/// Half-away-from-zero rounding to `decimals` places, as a spreadsheet does.
inline double round_to(double x, int decimals) {
    const double scale = std::pow(10.0, decimals);
    return std::round(x * scale) / scale;
}

/// One run column: derived rates plus the raw counters behind them.
struct RunColumn {
    telemetry::RunMetrics metrics;
    std::size_t clients = 0;
    std::uint64_t packets_sent = 0;
    std::uint64_t bytes_sent = 0;
};

inline RunColumn column_from_capture(const capture::Capture& cap) {
    RunColumn c;
    try {
        c.metrics = capture::run_metrics(cap);
    } catch (const Error& e) {
        throw Error(e.code(), "run '" + cap.run.label + "': " + e.what());
    }
    c.clients = cap.sessions.size();
    c.packets_sent = cap.run.packets_sent;
    c.bytes_sent = cap.run.bytes_sent;
    return c;
}

struct RunAnalysis {
    RunColumn column;  // rates as used (rounded in table-precision mode)
    telemetry::BioStats bio;
    queueing::QueueStats little;
    ComparisonReport comparison;
};

struct PipelineResult {
    Mode mode = Mode::Exact;
    std::vector<RunAnalysis> runs;
    telemetry::RunMetrics average;
    telemetry::BioStats bio;
    queueing::QueueStats little;
    ComparisonReport comparison;
    std::vector<queueing::SteadyStateRow> steady_state;
};

namespace detail {

inline telemetry::RunMetrics rounded_rates(telemetry::RunMetrics m) {
    m.lambda = round_to(m.lambda, 1);
    m.mu = round_to(m.mu, 1);
    m.byte_size = round_to(m.byte_size, 1);
    m.capacity = round_to(m.capacity, 1);
    return m;
}

inline queueing::QueueStats little_for(const telemetry::RunMetrics& m) {
    try {
        return queueing::mm1_stats(m.lambda, m.mu);
    } catch (const Error& e) {
        throw Error(e.code(), "run '" + m.label + "': " + e.what());
    }
}

inline telemetry::BioStats bio_for(const telemetry::RunMetrics& m) {
    try {
        return telemetry::aggregate_response(m.byte_size, m.capacity);
    } catch (const Error& e) {
        throw Error(e.code(), "run '" + m.label + "': " + e.what());
    }
}

}  // namespace detail

/// In table-precision mode every per-run rate is rounded to one decimal
/// before averaging and the averages are rounded again, the way hand-tabulated
/// figures are usually produced.
inline PipelineResult analyze_runs(std::vector<RunColumn> columns, Mode mode, double epsilon = queueing::kDefaultEpsilon,
                                   std::size_t j_max = queueing::kDefaultJMax) {
    if (columns.empty()) throw Error(ErrorCode::ParseError, "EmptyInput: no captures given");
    PipelineResult out;
    out.mode = mode;
    std::vector<telemetry::RunMetrics> used;
    for (auto& col : columns) {
        if (mode == Mode::TablePrecision) col.metrics = detail::rounded_rates(col.metrics);
        RunAnalysis a;
        a.column = col;
        a.bio = detail::bio_for(col.metrics);
        a.little = detail::little_for(col.metrics);
        a.comparison = compare(a.bio, a.little, mode);
        used.push_back(col.metrics);
        out.runs.push_back(std::move(a));
    }
    out.average = telemetry::average_runs(used);
    if (columns.size() > 1) out.average.label = "average";
    if (mode == Mode::TablePrecision) out.average = detail::rounded_rates(out.average);
    out.bio = detail::bio_for(out.average);
    out.little = detail::little_for(out.average);
    out.comparison = compare(out.bio, out.little, mode);
    out.steady_state = queueing::steady_state_table(out.average.lambda, out.average.mu, epsilon, j_max);
    return out;
}

inline PipelineResult full_pipeline(const std::vector<std::filesystem::path>& captures, Mode mode) {
    if (captures.empty()) throw Error(ErrorCode::ParseError, "EmptyInput: no captures given");
    std::vector<RunColumn> columns;
    for (const auto& p : captures) columns.push_back(column_from_capture(capture::read_capture(p)));
    return analyze_runs(std::move(columns), mode);
}

// ---------------------------------------------------------------------------
// Rendering

namespace detail {

inline std::string fmt(const char* spec, double v) {
    char buf[64];
    if (v == 0.0) v = 0.0;
    std::snprintf(buf, sizeof buf, spec, v);
    return buf;
}

inline std::string count(std::uint64_t v) { return std::to_string(v); }

struct MetricsRow {
    std::string name;
    std::vector<std::string> cells;
};

inline std::vector<MetricsRow> metrics_rows(const std::vector<RunAnalysis>& runs) {
    std::vector<MetricsRow> rows = {
        {"No. of Online Clients", {}},
        {"No. of Servers", {}},
        {"Packet Sent (Packet)", {}},
        {"Packet Sent Length (Byte)", {}},
        {"Packet Received (Packet)", {}},
        {"Packet Receive Length (Byte)", {}},
        {"Total Service Time (Mili Second)", {}},
        {"Total Time (Mili Second)", {}},
        {"Arrival Rate (Packet/Second)", {}},
        {"Service Rate (Packet/Second)", {}},
        {"Byte Size (Bit/Second)", {}},
        {"Capacity (Bit/Second)", {}},
        {"Bio-Computing Total Aggregate Response", {}},
        {"Bio-Computing Expected Idle Time", {}},
        {"Little's Law Traffic Intensity/Utilization", {}},
        {"Little's Law Expected Idle Time", {}},
    };
    for (const auto& r : runs) {
        const auto& m = r.column.metrics;
        std::size_t k = 0;
        rows[k++].cells.push_back(count(r.column.clients));
        rows[k++].cells.push_back("1");
        rows[k++].cells.push_back(count(r.column.packets_sent));
        rows[k++].cells.push_back(count(r.column.bytes_sent));
        rows[k++].cells.push_back(fmt("%.0f", m.packets));
        rows[k++].cells.push_back(fmt("%.0f", m.opl_bytes));
        rows[k++].cells.push_back(fmt("%.3f", m.service_time_ms));
        rows[k++].cells.push_back(fmt("%.3f", m.total_time_ms));
        rows[k++].cells.push_back(fmt("%.4f", m.lambda));
        rows[k++].cells.push_back(fmt("%.4f", m.mu));
        rows[k++].cells.push_back(fmt("%.4f", m.byte_size));
        rows[k++].cells.push_back(fmt("%.4f", m.capacity));
        rows[k++].cells.push_back(fmt("%.9f", r.bio.q));
        rows[k++].cells.push_back(fmt("%.9f", r.bio.idle));
        rows[k++].cells.push_back(fmt("%.9f", r.little.rho));
        rows[k++].cells.push_back(fmt("%.9f", r.little.idle));
    }
    return rows;
}

}  // namespace detail

/// Measurement-factor rows, one column per run.
inline void write_metrics_csv(const std::vector<RunAnalysis>& runs, std::ostream& out) {
    out << "Measurement Factors";
    for (const auto& r : runs) out << ',' << r.column.metrics.label;
    out << '\n';
    for (const auto& row : detail::metrics_rows(runs)) {
        out << row.name;
        for (const auto& c : row.cells) out << ',' << c;
        out << '\n';
    }
}

inline void write_report_csv(const PipelineResult& p, std::ostream& out) {
    using detail::fmt;
    out << "section,quantity,bio_computing,littles_law,difference_pct\n";
    for (const auto& r : p.runs) {
        out << "run:" << r.column.metrics.label << ",utilization," << fmt("%.9f", r.comparison.bio_utilization) << ','
            << fmt("%.9f", r.comparison.little_utilization) << ',' << fmt("%.9f", r.comparison.util_diff_pct) << '\n';
        out << "run:" << r.column.metrics.label << ",idle," << fmt("%.9f", r.comparison.bio_idle) << ','
            << fmt("%.9f", r.comparison.little_idle) << ',' << fmt("%.9f", r.comparison.idle_diff_pct) << '\n';
    }
    out << "average,utilization," << fmt("%.9f", p.comparison.bio_utilization) << ','
        << fmt("%.9f", p.comparison.little_utilization) << ',' << fmt("%.9f", p.comparison.util_diff_pct) << '\n';
    out << "average,idle," << fmt("%.9f", p.comparison.bio_idle) << ',' << fmt("%.9f", p.comparison.little_idle)
        << ',' << fmt("%.9f", p.comparison.idle_diff_pct) << '\n';
}

inline std::string render_markdown(const PipelineResult& p) {
    using detail::fmt;
    std::ostringstream md;
    md << "# TCP performance report\n\n";
    md << "Mode: `" << mode_name(p.mode) << "`\n\n";

    md << "## Performance values per run\n\n| Measurement Factors |";
    for (const auto& r : p.runs) md << ' ' << r.column.metrics.label << " |";
    md << "\n|---|";
    for (std::size_t k = 0; k < p.runs.size(); ++k) md << "---:|";
    md << '\n';
    for (const auto& row : detail::metrics_rows(p.runs)) {
        md << "| " << row.name << " |";
        for (const auto& c : row.cells) md << ' ' << c << " |";
        md << '\n';
    }

    md << "\n## Biological performance (averaged)\n\n| Quantity | Value |\n|---|---:|\n";
    md << "| Average byte size BS (bit/s) | " << fmt("%.4f", p.average.byte_size) << " |\n";
    md << "| Capacity C (bit/s) | " << fmt("%.4f", p.average.capacity) << " |\n";
    md << "| Total aggregate response Q | " << fmt("%.9f", p.bio.q) << " |\n";
    md << "| Expected idle time 1 - Q | " << fmt("%.9f", p.bio.idle) << " |\n";
    md << "| BS <= C | " << (p.bio.constraint_ok ? "yes" : "no") << " |\n";

    md << "\n## Steady-state performance (M/M/1)\n\n| Quantity | Value |\n|---|---:|\n";
    md << "| Arrival rate lambda (packet/s) | " << fmt("%.4f", p.little.lambda) << " |\n";
    md << "| Service rate mu (packet/s) | " << fmt("%.4f", p.little.mu) << " |\n";
    md << "| Utilization rho | " << fmt("%.9f", p.little.rho) << " |\n";
    md << "| L | " << fmt("%.9f", p.little.L) << " |\n";
    md << "| Lq | " << fmt("%.9f", p.little.Lq) << " |\n";
    md << "| Ls | " << fmt("%.9f", p.little.Ls) << " |\n";
    md << "| W (s) | " << fmt("%.9f", p.little.W) << " |\n";
    md << "| Wq (s) | " << fmt("%.9f", p.little.Wq) << " |\n";
    md << "| Ws (s) | " << fmt("%.9f", p.little.Ws) << " |\n";
    md << "| Expected idle time | " << fmt("%.9f", p.little.idle) << " |\n";

    md << "\n| Messages | Steady-State Probability | Packets In Queue |\n|---:|---:|---:|\n";
    const std::size_t shown = std::min<std::size_t>(p.steady_state.size(), 11);
    for (std::size_t k = 0; k < shown; ++k) {
        const auto& row = p.steady_state[k];
        md << "| " << row.j << " | " << fmt("%.9f", row.pi) << " | " << row.in_queue << " |\n";
    }

    md << "\n## Comparison\n\n| Quantity | Bio-computing | Little's Law | Difference |\n|---|---:|---:|---:|\n";
    md << "| Utilization | " << fmt("%.9f", p.comparison.bio_utilization) << " | "
       << fmt("%.9f", p.comparison.little_utilization) << " | " << fmt("%.9f", p.comparison.util_diff_pct) << "% |\n";
    md << "| Expected idle time | " << fmt("%.9f", p.comparison.bio_idle) << " | "
       << fmt("%.9f", p.comparison.little_idle) << " | " << fmt("%.9f", p.comparison.idle_diff_pct) << "% |\n";
    return md.str();
}

inline void write_reports(const PipelineResult& p, const std::filesystem::path& markdown_path,
                          const std::filesystem::path& csv_path) {
    if (!markdown_path.empty()) {
        std::ofstream md(markdown_path, std::ios::binary);
        if (!md) throw Error(ErrorCode::IoError, "cannot write " + markdown_path.string());
        md << render_markdown(p);
    }
    if (!csv_path.empty()) {
        std::ofstream csv(csv_path, std::ios::binary);
        if (!csv) throw Error(ErrorCode::IoError, "cannot write " + csv_path.string());
        write_report_csv(p, csv);
    }
}

}  // namespace biokm::report
