#pragma once

// File-facing configuration: JSON in, validated RunConfig out, plus the
// inverse for round-trip serialization. Unknown keys are rejected.

#include <cstdint>
#include <string>
#include <vector>

#include "tree.hpp"

namespace gt {

struct RunConfig {
  std::vector<SubjectPrior> priors;
  std::vector<std::string> labels;  // aligned with priors
  ResponseModel model;
  Thresholds thresholds;
  int max_stages = 1;
  Scheme scheme = Scheme::Single;
  double prune_threshold = 0.0;
  bool symmetry = false;
  double retained_prior_mass = 1.0;
  int worker_count = 0;           // 0 = hardware parallelism
  int chunk_exponent_offset = 8;  // chunk = min(2^(n/2 + offset), 2^n)
  std::uint64_t seed = 0;         // harness randomness only; the engine is deterministic

  AnalysisConfig analysis() const;
  int subject_index(const std::string& label) const;  // -1 when unknown

  bool operator==(const RunConfig&) const = default;
};

struct HistoryStep {
  std::vector<int> pool_ids;
  Response response = Response::Negative;
};

// Spreadsheet-style default labels: A..Z, AA, AB, ...
std::string subject_label(int index);

RunConfig parse_config_text(const std::string& json_text);
RunConfig parse_config_file(const std::string& path);
std::string write_config(const RunConfig& config);
std::string write_config_compact(const RunConfig& config);  // single line

std::vector<HistoryStep> parse_history_text(const std::string& json_text,
                                            const RunConfig& config);
std::vector<HistoryStep> parse_history_file(const std::string& path,
                                            const RunConfig& config);

const char* scheme_name(Scheme scheme);

}  // namespace gt
