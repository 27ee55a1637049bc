#include "commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace gt {

namespace {

const char* decision_name(Decision decision) {
  switch (decision) {
    case Decision::Negative: return "negative";
    case Decision::Positive: return "positive";
    case Decision::Unclassified: return "unclassified";
  }
  return "unclassified";
}

std::string json_escape(const std::string& raw) {
  std::string out;
  out.reserve(raw.size());
  for (char c : raw) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      default: out += c;
    }
  }
  return out;
}

// Minimal ordered-JSON writer; nlohmann reorders keys and reformats numbers,
// and the report files are golden-tested byte for byte.
class JsonWriter {
 public:
  void begin_object() { item(); out_ << '{'; fresh_ = true; }
  void end_object() { out_ << '}'; fresh_ = false; }
  void begin_array(const std::string& key) {
    item(); quoted(key); out_ << ":["; fresh_ = true;
  }
  void end_array() { out_ << ']'; fresh_ = false; }
  void array_item_raw(const std::string& raw) { item(); out_ << raw; }

  void field(const std::string& key, const std::string& string_value) {
    item(); quoted(key); out_ << ':'; quoted(string_value);
  }
  void field(const std::string& key, const char* string_value) {
    field(key, std::string(string_value));
  }
  void field_raw(const std::string& key, const std::string& raw) {
    item(); quoted(key); out_ << ':' << raw;
  }
  void field(const std::string& key, double value) {
    field_raw(key, format_probability(value));
  }
  void field(const std::string& key, std::uint64_t value) {
    field_raw(key, std::to_string(value));
  }
  void field(const std::string& key, int value) {
    field_raw(key, std::to_string(value));
  }
  void field(const std::string& key, bool value) {
    field_raw(key, value ? "true" : "false");
  }

  std::string str() const { return out_.str(); }

 private:
  void item() {
    if (!fresh_) out_ << ',';
    fresh_ = false;
  }
  void quoted(const std::string& s) { out_ << '"' << json_escape(s) << '"'; }

  std::ostringstream out_;
  bool fresh_ = true;
};

std::string label_of(const RunConfig& config, int subject_id) {
  return config.labels[static_cast<std::size_t>(subject_id)];
}

Selection run_selector(const Lattice& lattice, const RunConfig& config,
                       int workers) {
  if (workers == 1) return select_op_bha(lattice);
  const std::uint64_t chunk = default_chunk_size(
      lattice.active_count(), config.chunk_exponent_offset);
  return select_op_bha_parallel(lattice, chunk, workers);
}

}  // namespace

std::string format_probability(double value) {
  char buffer[64];
  std::snprintf(buffer, sizeof(buffer), "%.12g", value);
  return buffer;
}

std::string cmd_select(const RunConfig& config,
                       const std::vector<HistoryStep>& history,
                       int workers_override) {
  const int workers =
      workers_override >= 0 ? workers_override : config.worker_count;
  Lattice lattice = Lattice::build(config.priors);

  struct ReplayCommit {
    CommitEvent event;
    int stage;
  };
  std::vector<ReplayCommit> commits;
  for (std::size_t step = 0; step < history.size(); ++step) {
    const HistoryStep& h = history[step];
    StateIndex pool = 0;
    try {
      pool = lattice.encode(h.pool_ids);
      lattice.update_posterior(pool, h.response, config.model);
    } catch (const Error& e) {
      throw Error(e.code(), std::string(e.what()) + " at step " +
                                std::to_string(step + 1));
    }
    for (const CommitEvent& event : lattice.classify_and_shrink(
             config.thresholds, static_cast<int>(step + 1))) {
      commits.push_back(ReplayCommit{event, static_cast<int>(step + 1)});
    }
  }

  JsonWriter w;
  w.begin_object();
  w.field("all_classified", lattice.all_classified());
  if (!lattice.all_classified()) {
    const Selection selection = run_selector(lattice, config, workers);
    const std::vector<int> pool_ids = lattice.decode(selection.pool);
    std::string pool = "[";
    for (std::size_t i = 0; i < pool_ids.size(); ++i) {
      if (i) pool += ',';
      pool += '"' + json_escape(label_of(config, pool_ids[i])) + '"';
    }
    pool += ']';
    w.field_raw("pool", pool);
    w.field("pool_state", static_cast<std::uint64_t>(selection.pool));
    w.field("pool_mass", selection.pool_mass);
    w.field("gap", std::abs(selection.pool_mass - 0.5));
    w.field("evaluated_states", selection.evaluated_states);
    w.field("skipped_states", selection.skipped_states);
  }
  w.begin_array("commits");
  for (const ReplayCommit& commit : commits) {
    JsonWriter c;
    c.begin_object();
    c.field("subject", label_of(config, commit.event.subject_id));
    c.field("decision", decision_name(commit.event.decision));
    c.field("residual_error", commit.event.residual_error);
    c.field("stage", commit.stage);
    c.end_object();
    w.array_item_raw(c.str());
  }
  w.end_array();
  w.end_object();
  return w.str();
}

AnalyzeOutput cmd_analyze(const RunConfig& config, int workers_override) {
  RunConfig effective = config;
  if (workers_override >= 0) effective.worker_count = workers_override;

  // Projected worst case: one branch set per tree, 2^stages branches each.
  const int n = static_cast<int>(effective.priors.size());
  std::uint64_t trees = 1;
  if (effective.scheme == Scheme::Multi) {
    trees = effective.symmetry ? static_cast<std::uint64_t>(n) + 1
                               : std::uint64_t{1} << std::min(n, 20);
  }
  const std::uint64_t projected = trees << std::min(effective.max_stages, 16);
  if (projected > (std::uint64_t{1} << 20)) {
    std::fprintf(stderr,
                 "warning: up to %llu branches projected; expect a long run\n",
                 static_cast<unsigned long long>(projected));
  }

  const AnalysisReport report = run_analysis(effective.analysis());

  const std::size_t subjects = config.priors.size();
  double prior_positive_mass = 0.0;
  double prior_negative_mass = 0.0;
  for (const SubjectPrior& prior : config.priors) {
    prior_positive_mass += prior.risk;
    prior_negative_mass += 1.0 - prior.risk;
  }

  JsonWriter w;
  w.begin_object();
  w.field("engine", std::string(kEngineName) + " " + kEngineVersion);
  w.field_raw("config", write_config_compact(effective));
  w.field("scheme", scheme_name(config.scheme));
  w.field("expected_tests", report.expected_tests);
  w.field("decisive_rate", report.decisive_rate);
  w.field("aggregate_fn_mass", report.aggregate_fn_mass);
  w.field("aggregate_fp_mass", report.aggregate_fp_mass);
  w.field("aggregate_fn_rate",
          prior_positive_mass > 0.0
              ? report.aggregate_fn_mass / prior_positive_mass
              : 0.0);
  w.field("aggregate_fp_rate",
          prior_negative_mass > 0.0
              ? report.aggregate_fp_mass / prior_negative_mass
              : 0.0);
  w.field("retained_mass", report.retained_mass);
  w.field("unaccounted_mass", report.unaccounted_mass);
  w.field("branches_terminal", report.branches_terminal);
  w.field("branches_pruned", report.branches_pruned);
  w.field("nodes_expanded", report.nodes_expanded);
  w.field("trees_built", report.trees_built);
  w.begin_array("per_subject");
  for (std::size_t i = 0; i < subjects; ++i) {
    const SubjectStats& stats = report.per_subject[i];
    const double risk = config.priors[i].risk;
    JsonWriter s;
    s.begin_object();
    s.field("id", static_cast<int>(i));
    s.field("label", config.labels[i]);
    s.field("risk", risk);
    s.field("fn_mass", stats.fn_mass);
    s.field("fp_mass", stats.fp_mass);
    s.field("fn_rate", stats.fn_mass / risk);
    s.field("fp_rate", stats.fp_mass / (1.0 - risk));
    s.end_object();
    w.array_item_raw(s.str());
  }
  w.end_array();
  w.end_object();

  std::ostringstream csv;
  csv << "id,label,risk,fn_mass,fp_mass,fn_rate,fp_rate\n";
  for (std::size_t i = 0; i < subjects; ++i) {
    const SubjectStats& stats = report.per_subject[i];
    const double risk = config.priors[i].risk;
    csv << i << ',' << config.labels[i] << ',' << format_probability(risk)
        << ',' << format_probability(stats.fn_mass) << ','
        << format_probability(stats.fp_mass) << ','
        << format_probability(stats.fn_mass / risk) << ','
        << format_probability(stats.fp_mass / (1.0 - risk)) << '\n';
  }

  return AnalyzeOutput{w.str(), csv.str()};
}

std::string cmd_bench(const RunConfig& config,
                      const std::vector<std::string>& algos, int trials) {
  if (trials < 1) {
    throw Error(ErrorCode::Config, "trials must be at least 1");
  }
  for (const std::string& algo : algos) {
    if (algo != "bha" && algo != "opbha" && algo != "opbha_par") {
      throw Error(ErrorCode::Config, "unknown algorithm '" + algo + "'");
    }
  }
  const int n = static_cast<int>(config.priors.size());
  if (std::find(algos.begin(), algos.end(), "bha") != algos.end() && n > 20) {
    throw Error(ErrorCode::ScaleGuard,
                "exhaustive selection is limited to 20 subjects");
  }

  Lattice lattice = Lattice::build(config.priors);

  std::ostringstream csv;
  csv << "algorithm,subjects,trials,median_ms,evaluated_states,"
         "skipped_states,prob_reads,pool,pool_mass,gap\n";

  bool have_reference = false;
  double reference_gap = 0.0;
  for (const std::string& algo : algos) {
    std::vector<double> times_ms;
    Selection selection;
    std::uint64_t reads = 0;
    for (int t = 0; t < trials; ++t) {
      lattice.reset_prob_reads();
      const auto start = std::chrono::steady_clock::now();
      if (algo == "bha") {
        selection = select_bha(lattice);
      } else if (algo == "opbha") {
        selection = select_op_bha(lattice);
      } else {
        selection = select_op_bha_parallel(
            lattice, default_chunk_size(n, config.chunk_exponent_offset),
            config.worker_count);
      }
      const auto stop = std::chrono::steady_clock::now();
      times_ms.push_back(
          std::chrono::duration<double, std::milli>(stop - start).count());
      reads = lattice.prob_reads();
    }
    std::sort(times_ms.begin(), times_ms.end());
    const double median = times_ms[times_ms.size() / 2];

    const double gap = std::abs(selection.pool_mass - 0.5);
    if (!have_reference) {
      reference_gap = gap;
      have_reference = true;
    } else if (std::abs(gap - reference_gap) > 1e-12) {
      throw Error(ErrorCode::Internal,
                  "selection gap disagreement between algorithms");
    }

    std::string pool_text;
    for (int id : lattice.decode(selection.pool)) {
      if (!pool_text.empty()) pool_text += '+';
      pool_text += label_of(config, id);
    }
    csv << algo << ',' << n << ',' << trials << ','
        << format_probability(median) << ',' << selection.evaluated_states
        << ',' << selection.skipped_states << ',' << reads << ','
        << pool_text << ',' << format_probability(selection.pool_mass) << ','
        << format_probability(gap) << '\n';
  }
  return csv.str();
}

}  // namespace gt
