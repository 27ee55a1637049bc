#include "config.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace gt {

namespace {

using nlohmann::json;

[[noreturn]] void config_error(const std::string& message) {
  throw Error(ErrorCode::Config, message);
}

json parse_json(const std::string& text, const char* what) {
  json parsed = json::parse(text, nullptr, /*allow_exceptions=*/false);
  if (parsed.is_discarded()) {
    config_error(std::string("malformed JSON in ") + what);
  }
  return parsed;
}

double require_number(const json& j, const std::string& key) {
  if (!j.is_number()) config_error("field '" + key + "' must be a number");
  return j.get<double>();
}

Scheme parse_scheme(const std::string& name) {
  if (name == "single") return Scheme::Single;
  if (name == "multi") return Scheme::Multi;
  if (name == "fusion") return Scheme::Fusion;
  config_error("field 'scheme' must be one of single, multi, fusion");
}

Response parse_response(const std::string& name) {
  if (name == "negative") return Response::Negative;
  if (name == "positive") return Response::Positive;
  config_error("field 'response' must be \"negative\" or \"positive\"");
}

}  // namespace

std::string subject_label(int index) {
  std::string label;
  int v = index;
  while (v >= 0) {
    label.insert(label.begin(), static_cast<char>('A' + v % 26));
    v = v / 26 - 1;
  }
  return label;
}

const char* scheme_name(Scheme scheme) {
  switch (scheme) {
    case Scheme::Single: return "single";
    case Scheme::Multi: return "multi";
    case Scheme::Fusion: return "fusion";
  }
  return "single";
}

AnalysisConfig RunConfig::analysis() const {
  AnalysisConfig config;
  config.priors = priors;
  config.model = model;
  config.thresholds = thresholds;
  config.max_stages = max_stages;
  config.scheme = scheme;
  config.prune_threshold = prune_threshold;
  config.symmetry = symmetry;
  config.retained_prior_mass = retained_prior_mass;
  config.worker_count = worker_count;
  return config;
}

int RunConfig::subject_index(const std::string& label) const {
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == label) return static_cast<int>(i);
  }
  return -1;
}

RunConfig parse_config_text(const std::string& json_text) {
  const json root = parse_json(json_text, "config");
  if (!root.is_object()) config_error("config must be a JSON object");

  static const std::set<std::string> known_keys = {
      "subjects",        "priors",
      "risk",            "sensitivity",
      "specificity",     "dilution_exponent",
      "upper_eps",       "lower_eps",
      "max_stages",      "scheme",
      "prune_threshold", "symmetry",
      "retained_prior_mass", "worker_count",
      "chunk_exponent_offset", "seed"};
  for (const auto& [key, value] : root.items()) {
    if (!known_keys.count(key)) config_error("unknown config key '" + key + "'");
  }

  RunConfig config;

  const bool has_subjects = root.contains("subjects");
  const bool has_priors = root.contains("priors");
  if (has_subjects == has_priors) {
    config_error("config requires exactly one of 'subjects' or 'priors'");
  }
  if (has_subjects) {
    if (!root["subjects"].is_number_integer()) {
      config_error("field 'subjects' must be an integer");
    }
    const int count = root["subjects"].get<int>();
    if (count < 1 || count > kMaxSubjects) {
      config_error("subject count unsupported");
    }
    if (!root.contains("risk")) {
      config_error("field 'risk' is required with 'subjects'");
    }
    const double risk = require_number(root["risk"], "risk");
    for (int i = 0; i < count; ++i) {
      config.priors.push_back(SubjectPrior{i, risk});
      config.labels.push_back(subject_label(i));
    }
  } else {
    if (root.contains("risk")) {
      config_error("field 'risk' conflicts with 'priors'");
    }
    const json& priors = root["priors"];
    if (!priors.is_array() || priors.empty()) {
      config_error("field 'priors' must be a non-empty array");
    }
    if (static_cast<int>(priors.size()) > kMaxSubjects) {
      config_error("subject count unsupported");
    }
    int index = 0;
    for (const json& entry : priors) {
      double risk = 0.0;
      std::string label = subject_label(index);
      if (entry.is_number()) {
        risk = entry.get<double>();
      } else if (entry.is_object()) {
        for (const auto& [key, value] : entry.items()) {
          if (key != "risk" && key != "label") {
            config_error("unknown prior key '" + key + "'");
          }
        }
        if (!entry.contains("risk")) config_error("prior entry missing 'risk'");
        risk = require_number(entry["risk"], "priors[].risk");
        if (entry.contains("label")) {
          if (!entry["label"].is_string() ||
              entry["label"].get<std::string>().empty()) {
            config_error("prior label must be a non-empty string");
          }
          label = entry["label"].get<std::string>();
        }
      } else {
        config_error("prior entries must be numbers or objects");
      }
      config.priors.push_back(SubjectPrior{index, risk});
      config.labels.push_back(std::move(label));
      ++index;
    }
    std::set<std::string> seen;
    for (const std::string& label : config.labels) {
      if (!seen.insert(label).second) {
        config_error("duplicate subject label '" + label + "'");
      }
    }
  }

  for (const SubjectPrior& prior : config.priors) {
    if (!(prior.risk > 0.0 && prior.risk < 1.0)) config_error("invalid prior");
  }

  if (root.contains("sensitivity")) {
    config.model.sensitivity = require_number(root["sensitivity"], "sensitivity");
  }
  if (root.contains("specificity")) {
    config.model.specificity = require_number(root["specificity"], "specificity");
  }
  if (root.contains("dilution_exponent")) {
    config.model.dilution_exponent =
        require_number(root["dilution_exponent"], "dilution_exponent");
  }
  if (root.contains("upper_eps")) {
    config.thresholds.upper_eps = require_number(root["upper_eps"], "upper_eps");
  }
  if (root.contains("lower_eps")) {
    config.thresholds.lower_eps = require_number(root["lower_eps"], "lower_eps");
  }
  if (root.contains("max_stages")) {
    if (!root["max_stages"].is_number_integer()) {
      config_error("field 'max_stages' must be an integer");
    }
    config.max_stages = root["max_stages"].get<int>();
  }
  if (root.contains("scheme")) {
    if (!root["scheme"].is_string()) config_error("field 'scheme' must be a string");
    config.scheme = parse_scheme(root["scheme"].get<std::string>());
  }
  if (root.contains("prune_threshold")) {
    config.prune_threshold =
        require_number(root["prune_threshold"], "prune_threshold");
  }
  if (root.contains("symmetry")) {
    if (!root["symmetry"].is_boolean()) {
      config_error("field 'symmetry' must be a boolean");
    }
    config.symmetry = root["symmetry"].get<bool>();
  }
  if (root.contains("retained_prior_mass")) {
    config.retained_prior_mass =
        require_number(root["retained_prior_mass"], "retained_prior_mass");
  }
  if (root.contains("worker_count")) {
    if (!root["worker_count"].is_number_integer()) {
      config_error("field 'worker_count' must be an integer");
    }
    config.worker_count = root["worker_count"].get<int>();
  }
  if (root.contains("chunk_exponent_offset")) {
    if (!root["chunk_exponent_offset"].is_number_integer()) {
      config_error("field 'chunk_exponent_offset' must be an integer");
    }
    config.chunk_exponent_offset = root["chunk_exponent_offset"].get<int>();
    if (config.chunk_exponent_offset < 0 || config.chunk_exponent_offset > 62) {
      config_error("chunk_exponent_offset out of range");
    }
  }
  if (root.contains("seed")) {
    if (!root["seed"].is_number_unsigned() && !root["seed"].is_number_integer()) {
      config_error("field 'seed' must be an integer");
    }
    config.seed = root["seed"].get<std::uint64_t>();
  }

  // Everything that has an engine-side validator goes through it now, so a
  // bad file fails at parse time rather than mid-run. Validator errors keep
  // their own codes (the scale guard maps to a distinct exit status).
  config.analysis().validate();
  return config;
}

RunConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) config_error("cannot open config file '" + path + "'");
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config_text(text.str());
}

namespace {

json config_to_json(const RunConfig& config) {
  json priors = json::array();
  for (std::size_t i = 0; i < config.priors.size(); ++i) {
    priors.push_back({{"label", config.labels[i]},
                      {"risk", config.priors[i].risk}});
  }
  return json{
      {"priors", priors},
      {"sensitivity", config.model.sensitivity},
      {"specificity", config.model.specificity},
      {"dilution_exponent", config.model.dilution_exponent},
      {"upper_eps", config.thresholds.upper_eps},
      {"lower_eps", config.thresholds.lower_eps},
      {"max_stages", config.max_stages},
      {"scheme", scheme_name(config.scheme)},
      {"prune_threshold", config.prune_threshold},
      {"symmetry", config.symmetry},
      {"retained_prior_mass", config.retained_prior_mass},
      {"worker_count", config.worker_count},
      {"chunk_exponent_offset", config.chunk_exponent_offset},
      {"seed", config.seed},
  };
}

}  // namespace

std::string write_config(const RunConfig& config) {
  return config_to_json(config).dump(2);
}

std::string write_config_compact(const RunConfig& config) {
  return config_to_json(config).dump();
}

std::vector<HistoryStep> parse_history_text(const std::string& json_text,
                                            const RunConfig& config) {
  const json root = parse_json(json_text, "history");
  if (!root.is_array()) config_error("history must be a JSON array");
  std::vector<HistoryStep> steps;
  for (const json& entry : root) {
    if (!entry.is_object()) config_error("history entries must be objects");
    for (const auto& [key, value] : entry.items()) {
      if (key != "pool" && key != "response") {
        config_error("unknown history key '" + key + "'");
      }
    }
    if (!entry.contains("pool") || !entry["pool"].is_array() ||
        entry["pool"].empty()) {
      config_error("history entries need a non-empty 'pool' array");
    }
    if (!entry.contains("response") || !entry["response"].is_string()) {
      config_error("history entries need a 'response' string");
    }
    HistoryStep step;
    for (const json& member : entry["pool"]) {
      int id = -1;
      if (member.is_string()) {
        id = config.subject_index(member.get<std::string>());
        if (id < 0) {
          config_error("unknown subject label '" +
                       member.get<std::string>() + "' in history pool");
        }
      } else if (member.is_number_integer()) {
        id = member.get<int>();
        if (id < 0 || id >= static_cast<int>(config.priors.size())) {
          config_error("subject index out of range in history pool");
        }
      } else {
        config_error("history pool members must be labels or indices");
      }
      step.pool_ids.push_back(id);
    }
    step.response = parse_response(entry["response"].get<std::string>());
    steps.push_back(std::move(step));
  }
  return steps;
}

std::vector<HistoryStep> parse_history_file(const std::string& path,
                                            const RunConfig& config) {
  std::ifstream in(path);
  if (!in) config_error("cannot open history file '" + path + "'");
  std::ostringstream text;
  text << in.rdbuf();
  return parse_history_text(text.str(), config);
}

}  // namespace gt
