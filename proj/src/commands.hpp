#pragma once

// Command implementations behind the CLI: select, analyze, bench. Outputs
// are strings (JSON / CSV) with probabilities printed at 12 significant
// digits so equal runs produce byte-identical files.

#include <string>
#include <vector>

#include "config.hpp"

namespace gt {

inline constexpr const char* kEngineName = "gtlattice";
inline constexpr const char* kEngineVersion = "0.1.0";

// Formats a double with 12 significant digits (%.12g).
std::string format_probability(double value);

// Builds the lattice, replays the history and runs the skip-optimized
// selector (staged parallel unless worker_count is exactly 1). Returns the
// selection and replay commits as JSON.
std::string cmd_select(const RunConfig& config,
                       const std::vector<HistoryStep>& history,
                       int workers_override = -1);

struct AnalyzeOutput {
  std::string report_json;
  std::string per_subject_csv;
};

AnalyzeOutput cmd_analyze(const RunConfig& config, int workers_override = -1);

// Benchmarks the requested selection algorithms on the configured lattice:
// median wall time over the trials, evaluated-state counts and instrumented
// probability-array reads, as CSV. Verifies that all algorithms agree on the
// selection gap.
std::string cmd_bench(const RunConfig& config,
                      const std::vector<std::string>& algos, int trials);

}  // namespace gt
