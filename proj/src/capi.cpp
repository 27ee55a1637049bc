#include "gtlattice.h"

#include <cstring>
#include <new>
#include <string>

#include "commands.hpp"
#include "config.hpp"
#include "halving.hpp"
#include "lattice.hpp"
#include "response.hpp"

namespace {

thread_local std::string g_last_error;

gt_status status_of(gt::ErrorCode code) {
  switch (code) {
    case gt::ErrorCode::InvalidArgument: return GT_ERROR_INVALID_ARGUMENT;
    case gt::ErrorCode::InactiveSubject: return GT_ERROR_INACTIVE_SUBJECT;
    case gt::ErrorCode::ImpossibleResponse: return GT_ERROR_IMPOSSIBLE_RESPONSE;
    case gt::ErrorCode::Config: return GT_ERROR_CONFIG;
    case gt::ErrorCode::ScaleGuard: return GT_ERROR_SCALE_GUARD;
    case gt::ErrorCode::Internal: return GT_ERROR_INTERNAL;
  }
  return GT_ERROR_INTERNAL;
}

template <typename Fn>
gt_status guarded(Fn&& fn) {
  try {
    fn();
    return GT_OK;
  } catch (const gt::Error& e) {
    g_last_error = e.what();
    return status_of(e.code());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return GT_ERROR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return GT_ERROR_INTERNAL;
  }
}

gt_status invalid(const char* message) {
  g_last_error = message;
  return GT_ERROR_INVALID_ARGUMENT;
}

char* copy_string(const std::string& text) {
  char* out = new char[text.size() + 1];
  std::memcpy(out, text.c_str(), text.size() + 1);
  return out;
}

gt::ResponseModel to_model(const gt_response_model* model) {
  gt::ResponseModel out;
  if (model != nullptr) {
    out.sensitivity = model->sensitivity;
    out.specificity = model->specificity;
    out.dilution_exponent = model->dilution_exponent;
  }
  out.validate();
  return out;
}

gt_decision decision_of(gt::Decision decision) {
  switch (decision) {
    case gt::Decision::Unclassified: return GT_DECISION_UNCLASSIFIED;
    case gt::Decision::Negative: return GT_DECISION_NEGATIVE;
    case gt::Decision::Positive: return GT_DECISION_POSITIVE;
  }
  return GT_DECISION_UNCLASSIFIED;
}

}  // namespace

struct gt_lattice {
  gt::Lattice impl;
};

extern "C" {

const char* gt_version(void) { return gt::kEngineVersion; }

const char* gt_status_name(gt_status status) {
  switch (status) {
    case GT_OK: return "ok";
    case GT_ERROR_INVALID_ARGUMENT: return "invalid argument";
    case GT_ERROR_INACTIVE_SUBJECT: return "inactive subject";
    case GT_ERROR_IMPOSSIBLE_RESPONSE: return "impossible response";
    case GT_ERROR_CONFIG: return "config error";
    case GT_ERROR_SCALE_GUARD: return "scale guard";
    case GT_ERROR_INTERNAL: return "internal error";
  }
  return "unknown";
}

const char* gt_last_error(void) { return g_last_error.c_str(); }

void gt_string_free(char* text) { delete[] text; }

gt_status gt_lattice_create(const double* risks, size_t count,
                            gt_lattice** out) {
  if (risks == nullptr || out == nullptr) return invalid("null argument");
  return guarded([&] {
    std::vector<gt::SubjectPrior> priors(count);
    for (size_t i = 0; i < count; ++i) {
      priors[i] = gt::SubjectPrior{static_cast<int>(i), risks[i]};
    }
    *out = new gt_lattice{gt::Lattice::build(priors)};
  });
}

gt_status gt_lattice_clone(const gt_lattice* lattice, gt_lattice** out) {
  if (lattice == nullptr || out == nullptr) return invalid("null argument");
  return guarded([&] { *out = new gt_lattice{lattice->impl}; });
}

void gt_lattice_free(gt_lattice* lattice) { delete lattice; }

gt_status gt_lattice_active_count(const gt_lattice* lattice, int* out) {
  if (lattice == nullptr || out == nullptr) return invalid("null argument");
  *out = lattice->impl.active_count();
  return GT_OK;
}

gt_status gt_lattice_state_count(const gt_lattice* lattice, uint64_t* out) {
  if (lattice == nullptr || out == nullptr) return invalid("null argument");
  *out = lattice->impl.size();
  return GT_OK;
}

gt_status gt_lattice_mass(const gt_lattice* lattice, uint64_t state,
                          double* out) {
  if (lattice == nullptr || out == nullptr) return invalid("null argument");
  return guarded([&] {
    if (state >= lattice->impl.size()) {
      throw gt::Error(gt::ErrorCode::InvalidArgument, "state out of range");
    }
    *out = lattice->impl.mass(static_cast<gt::StateIndex>(state));
  });
}

gt_status gt_lattice_marginal(const gt_lattice* lattice, int subject_id,
                              double* out) {
  if (lattice == nullptr || out == nullptr) return invalid("null argument");
  return guarded([&] { *out = lattice->impl.subject_marginal(subject_id); });
}

gt_status gt_lattice_update(gt_lattice* lattice, uint64_t pool,
                            gt_response response,
                            const gt_response_model* model) {
  if (lattice == nullptr) return invalid("null argument");
  return guarded([&] {
    if (pool >= lattice->impl.size()) {
      throw gt::Error(gt::ErrorCode::InvalidArgument, "pool out of range");
    }
    lattice->impl.update_posterior(
        static_cast<gt::StateIndex>(pool),
        response == GT_RESPONSE_NEGATIVE ? gt::Response::Negative
                                         : gt::Response::Positive,
        to_model(model));
  });
}

gt_status gt_lattice_classify_and_shrink(gt_lattice* lattice, double upper_eps,
                                         double lower_eps, int stage,
                                         gt_commit* commits, size_t capacity,
                                         size_t* out_count) {
  if (lattice == nullptr || out_count == nullptr) {
    return invalid("null argument");
  }
  return guarded([&] {
    const auto events = lattice->impl.classify_and_shrink(
        gt::Thresholds{upper_eps, lower_eps}, stage);
    *out_count = events.size();
    if (commits != nullptr) {
      for (size_t i = 0; i < events.size() && i < capacity; ++i) {
        commits[i] = gt_commit{events[i].subject_id,
                               decision_of(events[i].decision),
                               events[i].residual_error};
      }
    }
  });
}

gt_status gt_lattice_select(const gt_lattice* lattice, gt_algorithm algorithm,
                            int worker_count, uint64_t chunk_size,
                            gt_selection* out) {
  if (lattice == nullptr || out == nullptr) return invalid("null argument");
  return guarded([&] {
    gt::Selection selection;
    switch (algorithm) {
      case GT_ALGORITHM_BHA:
        selection = gt::select_bha(lattice->impl);
        break;
      case GT_ALGORITHM_OPBHA:
        selection = gt::select_op_bha(lattice->impl);
        break;
      case GT_ALGORITHM_OPBHA_PAR:
        selection = gt::select_op_bha_parallel(lattice->impl, chunk_size,
                                               worker_count);
        break;
      default:
        throw gt::Error(gt::ErrorCode::InvalidArgument, "unknown algorithm");
    }
    *out = gt_selection{selection.pool, selection.pool_mass,
                        selection.evaluated_states, selection.skipped_states};
  });
}

gt_status gt_run_select(const char* config_json, const char* history_json,
                        int workers_override, char** result_json) {
  if (config_json == nullptr || result_json == nullptr) {
    return invalid("null argument");
  }
  return guarded([&] {
    const gt::RunConfig config = gt::parse_config_text(config_json);
    std::vector<gt::HistoryStep> history;
    if (history_json != nullptr) {
      history = gt::parse_history_text(history_json, config);
    }
    *result_json =
        copy_string(gt::cmd_select(config, history, workers_override));
  });
}

gt_status gt_run_analyze(const char* config_json, int workers_override,
                         char** report_json, char** per_subject_csv) {
  if (config_json == nullptr || report_json == nullptr ||
      per_subject_csv == nullptr) {
    return invalid("null argument");
  }
  return guarded([&] {
    const gt::RunConfig config = gt::parse_config_text(config_json);
    const gt::AnalyzeOutput output = gt::cmd_analyze(config, workers_override);
    *report_json = copy_string(output.report_json);
    *per_subject_csv = copy_string(output.per_subject_csv);
  });
}

gt_status gt_run_bench(const char* config_json, const char* algos_csv,
                       int trials, char** table_csv) {
  if (config_json == nullptr || algos_csv == nullptr || table_csv == nullptr) {
    return invalid("null argument");
  }
  return guarded([&] {
    const gt::RunConfig config = gt::parse_config_text(config_json);
    std::vector<std::string> algos;
    std::string current;
    for (const char* p = algos_csv;; ++p) {
      if (*p == ',' || *p == '\0') {
        if (!current.empty()) algos.push_back(current);
        current.clear();
        if (*p == '\0') break;
      } else {
        current += *p;
      }
    }
    if (algos.empty()) {
      throw gt::Error(gt::ErrorCode::Config, "no algorithms requested");
    }
    *table_csv = copy_string(gt::cmd_bench(config, algos, trials));
  });
}

}  // extern "C"
