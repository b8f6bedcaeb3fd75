#pragma once

#include "spg/pg_engine.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace spg {

// File names used inside a run directory.
inline constexpr const char* kTraceCsv = "trace.csv";
inline constexpr const char* kTraceJsonl = "trace.jsonl";
inline constexpr const char* kCrossingsCsv = "crossings.csv";
inline constexpr const char* kSummaryJson = "summary.json";

/// One row per (snapshot, monitored state):
/// iter,state,class,V,theta_a0,theta_a1,theta_a2,pi_a1,d,sup_err,mean_err
void write_trace_csv(std::ostream& out, const RunResult& run);
void write_trace_jsonl(std::ostream& out, const RunResult& run);
/// state,threshold_name,threshold_value,t (t empty when never crossed)
void write_crossings_csv(std::ostream& out, const RunResult& run);
void write_summary_json(std::ostream& out, const RunResult& run);

struct TraceTable {
    std::vector<StateId> states;       // monitored states in first-seen order
    std::vector<StateLabel> labels;    // parallel to states (copy index is not recorded)
    std::vector<IterationSnapshot> snapshots;
};

TraceTable read_trace_csv(std::istream& in);
std::vector<CrossingRecord> read_crossings_csv(std::istream& in);

/// Writes all four files into `dir` (created if missing).
void write_run(const std::filesystem::path& dir, const RunResult& run);
/// Reconstructs a run from the summary, trace CSV and crossing CSV in `dir`.
/// pi(a1) at each crossing is recovered from the snapshot forced at that iteration.
RunResult read_run(const std::filesystem::path& dir);

} // namespace spg
