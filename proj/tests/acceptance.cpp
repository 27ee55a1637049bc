// Acceptance suite: one test case per shipping criterion, each printing a
// single [PASS]/[FAIL] line. Run via ctest or directly.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <random>

#include "commands.hpp"
#include "config.hpp"
#include "halving.hpp"
#include "oracles.hpp"
#include "tree.hpp"

using gt::AnalysisConfig;
using gt::AnalysisReport;
using gt::Lattice;
using gt::ResponseModel;
using gt::Scheme;
using gt::Selection;
using gt::StateIndex;
using gt::Thresholds;

namespace {

void report_line(int criterion, bool ok, const char* text) {
  std::printf("[%s] criterion %2d: %s\n", ok ? "PASS" : "FAIL", criterion,
              text);
  std::fflush(stdout);
}

double gap_of(const Selection& selection) {
  return std::abs(selection.pool_mass - 0.5);
}

AnalysisReport run_scheme(AnalysisConfig config, Scheme scheme) {
  config.scheme = scheme;
  return gt::run_analysis(config);
}

bool close(double a, double b, double tol) { return std::abs(a - b) <= tol; }

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

}  // namespace

TEST_CASE("criterion 1: topmost mass identity and single-evaluation pick") {
  const Lattice wide = Lattice::build(oracle::homogeneous_priors(20, 0.02));
  const double closed_form = std::pow(0.98, 20);
  bool ok = std::abs(wide.mass(wide.top()) - closed_form) <= 1e-12;

  const Selection selection = gt::select_op_bha(wide);
  ok = ok && selection.evaluated_states == 1 && selection.pool == wide.top();

  // The 30-subject figure needs no materialized lattice.
  ok = ok && std::abs(std::pow(0.98, 30) - 0.545) <= 5e-4;

  report_line(1, ok, "topmost mass == (1-risk)^n; one evaluation suffices");
  CHECK(ok);
}

TEST_CASE("criterion 2: skip-optimized selection matches the exhaustive scan") {
  const auto start = Clock::now();
  std::mt19937_64 rng(20260810);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  bool ok = true;
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 2 + static_cast<int>(rng() % 11);  // 2..12
    Lattice lattice =
        Lattice::build(oracle::random_priors(rng, n, 0.01, 0.5));
    const ResponseModel model{0.7 + 0.3 * unit(rng), 0.9 + 0.1 * unit(rng),
                              2.0 * unit(rng)};
    oracle::apply_random_history(rng, lattice, model,
                                 static_cast<int>(rng() % 5));
    const Selection exhaustive = gt::select_bha(lattice);
    const Selection skipping = gt::select_op_bha(lattice);
    if (std::abs(gap_of(exhaustive) - gap_of(skipping)) > 1e-12) {
      ok = false;
      break;
    }
  }
  const double elapsed = seconds_since(start);
  ok = ok && elapsed < 60.0;
  report_line(2, ok, "200 random instances agree on the gap within 1e-12");
  CHECK(ok);
}

TEST_CASE("criterion 3: strict mass ordering along containment") {
  bool ok = true;
  std::mt19937_64 rng(3);
  int trials = 0;
  for (int n = 2; n <= 8 && ok; ++n) {
    for (int t = 0; t < 16 && ok; ++t, ++trials) {
      const Lattice lattice = oracle::random_posterior(rng, n);
      std::vector<double> mass(lattice.size());
      for (StateIndex s = 0; s < lattice.size(); ++s) {
        mass[s] = lattice.mass(s);
      }
      for (StateIndex b = 0; b < lattice.size() && ok; ++b) {
        for (StateIndex a : lattice.up_set(b)) {
          if (a != b && !(mass[a] < mass[b])) ok = false;
        }
        for (StateIndex a : lattice.down_set(b)) {
          if (a != b && !(mass[a] > mass[b])) ok = false;
        }
      }
    }
  }
  ok = ok && trials >= 100;
  report_line(3, ok, "mass strictly decreases upward, increases downward");
  CHECK(ok);
}

TEST_CASE("criterion 4: the three schemes report identical statistics") {
  const auto start = Clock::now();
  bool ok = true;
  const double risks[4] = {0.1, 0.05, 0.2, 0.3};
  for (int n = 2; n <= 4 && ok; ++n) {
    for (int stages : {4, 6}) {
      for (const ResponseModel model :
           {ResponseModel{}, ResponseModel{0.8, 0.95, 1.0}}) {
        AnalysisConfig config;
        for (int i = 0; i < n; ++i) {
          config.priors.push_back(gt::SubjectPrior{i, risks[i]});
        }
        config.model = model;
        config.thresholds = {0.05, 0.05};
        config.max_stages = stages;
        const AnalysisReport single = run_scheme(config, Scheme::Single);
        const AnalysisReport multi = run_scheme(config, Scheme::Multi);
        const AnalysisReport fusion = run_scheme(config, Scheme::Fusion);
        for (const AnalysisReport* other : {&multi, &fusion}) {
          ok = ok && close(single.expected_tests, other->expected_tests, 1e-9);
          ok = ok && close(single.decisive_rate, other->decisive_rate, 1e-9);
          ok = ok &&
               close(single.aggregate_fn_mass, other->aggregate_fn_mass, 1e-9);
          ok = ok &&
               close(single.aggregate_fp_mass, other->aggregate_fp_mass, 1e-9);
          for (std::size_t i = 0; i < single.per_subject.size(); ++i) {
            ok = ok && close(single.per_subject[i].fn_mass,
                             other->per_subject[i].fn_mass, 1e-9);
            ok = ok && close(single.per_subject[i].fp_mass,
                             other->per_subject[i].fp_mass, 1e-9);
          }
        }
        ok = ok && multi.trees_built == (std::uint64_t{1} << n);
      }
    }
  }
  const double elapsed = seconds_since(start);
  ok = ok && elapsed < 120.0;
  report_line(4, ok, "multi == single == fusion within 1e-9, both models");
  CHECK(ok);
}

TEST_CASE("criterion 5: n+1 class trees equal full enumeration") {
  bool ok = true;
  for (int n = 3; n <= 5 && ok; ++n) {
    AnalysisConfig config;
    config.priors = oracle::homogeneous_priors(n, 0.1);
    config.model = ResponseModel{0.9, 1.0, 1.0};
    config.thresholds = {0.02, 0.02};
    config.max_stages = 6;
    config.scheme = Scheme::Multi;

    AnalysisConfig reduced = config;
    reduced.symmetry = true;
    const AnalysisReport full = gt::run_multi_tree(config);
    const AnalysisReport sym = gt::run_multi_tree(reduced);
    ok = ok && sym.trees_built == static_cast<std::uint64_t>(n) + 1;
    ok = ok && full.trees_built == (std::uint64_t{1} << n);
    ok = ok && close(full.expected_tests, sym.expected_tests, 1e-9);
    ok = ok && close(full.decisive_rate, sym.decisive_rate, 1e-9);
    ok = ok && close(full.aggregate_fn_mass, sym.aggregate_fn_mass, 1e-9);
    ok = ok && close(full.aggregate_fp_mass, sym.aggregate_fp_mass, 1e-9);
  }
  report_line(5, ok, "symmetry reduction: aggregates equal within 1e-9");
  CHECK(ok);
}

TEST_CASE("criterion 6: prior-mass trade-off stays within its bound") {
  AnalysisConfig config;
  config.priors = oracle::homogeneous_priors(5, 0.1);
  config.thresholds = {0.02, 0.02};
  config.max_stages = 6;
  config.scheme = Scheme::Multi;
  const AnalysisReport full = gt::run_multi_tree(config);

  AnalysisConfig trimmed_config = config;
  trimmed_config.retained_prior_mass = 0.999;
  const AnalysisReport trimmed = gt::run_multi_tree(trimmed_config);

  bool ok = trimmed.retained_mass >= 0.999;
  ok = ok && trimmed.trees_built < full.trees_built;
  // The bound is tight here (every discarded tree runs to the stage cap),
  // so allow the accumulated rounding of the two runs.
  ok = ok && std::abs(trimmed.expected_tests - full.expected_tests) <=
                 (1.0 - trimmed.retained_mass) * config.max_stages + 1e-12;
  report_line(6, ok, "retained mass >= 0.999; error within discarded bound");
  CHECK(ok);
}

TEST_CASE("criterion 7: posterior updates and shrinking are sound") {
  bool ok = true;
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int trial = 0; trial < 100 && ok; ++trial) {
    const int n = 2 + static_cast<int>(rng() % 5);  // 2..6
    Lattice lattice =
        Lattice::build(oracle::random_priors(rng, n, 0.05, 0.5));
    const ResponseModel model{0.7 + 0.3 * unit(rng), 0.85 + 0.15 * unit(rng),
                              2.0 * unit(rng)};
    for (int step = 0; step < 3 && ok; ++step) {
      std::uniform_int_distribution<StateIndex> pools(
          1, static_cast<StateIndex>(lattice.size() - 1));
      const StateIndex pool = pools(rng);
      const gt::Response response = unit(rng) < 0.5 ? gt::Response::Negative
                                                    : gt::Response::Positive;
      const auto expected = oracle::bayes_joint_table(
          lattice, lattice.decode(pool), response, model);
      try {
        lattice.update_posterior(pool, response, model);
      } catch (const gt::Error&) {
        break;  // zero-likelihood observation; draw a new trial
      }
      for (StateIndex s = 0; s < lattice.size(); ++s) {
        if (std::abs(lattice.prob(s) - static_cast<double>(expected[s])) >
            1e-12) {
          ok = false;
        }
      }
    }

    // Force a few commits and confirm the fold preserves what remains.
    std::vector<double> before(static_cast<std::size_t>(n), -1.0);
    for (int id = 0; id < n; ++id) {
      if (lattice.bit_of_subject(id) >= 0) {
        before[id] = lattice.subject_marginal(id);
      }
    }
    const std::size_t size_before = lattice.size();
    const auto commits = lattice.classify_and_shrink({0.45, 0.45});
    ok = ok && lattice.size() == (size_before >> commits.size());
    for (int id = 0; id < n && ok; ++id) {
      if (lattice.bit_of_subject(id) >= 0 && before[id] >= 0.0) {
        ok = std::abs(lattice.subject_marginal(id) - before[id]) <= 1e-12;
      }
    }
  }
  report_line(7, ok, "joint-table Bayes within 1e-12; shrink preserves marginals");
  CHECK(ok);
}

TEST_CASE("criterion 8: hand-traced miss mass") {
  AnalysisConfig config;
  config.priors = {{0, 0.3}};
  config.model = ResponseModel{0.8, 1.0, 0.0};
  config.thresholds = {0.05, 0.05};
  config.max_stages = 2;
  config.scheme = Scheme::Single;
  const AnalysisReport report = gt::run_single_tree(config);
  const bool ok = std::abs(report.per_subject[0].fn_mass - 0.012) <= 1e-12;
  report_line(8, ok, "one diluted subject: fn mass == 0.012 within 1e-12");
  CHECK(ok);
}

TEST_CASE("criterion 9: worker count never changes a result") {
  bool ok = true;
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int trial = 0; trial < 20 && ok; ++trial) {
    const int n = 2 + static_cast<int>(rng() % 9);  // 2..10
    AnalysisConfig config;
    config.priors = oracle::random_priors(rng, n, 0.05, 0.4);
    config.model = ResponseModel{0.75 + 0.2 * unit(rng),
                                 0.9 + 0.1 * unit(rng), unit(rng) < 0.5 ? 0.0 : 1.0};
    config.thresholds = {0.02 + 0.08 * unit(rng), 0.02 + 0.08 * unit(rng)};
    config.max_stages = 2 + static_cast<int>(rng() % 7);  // 2..8
    switch (trial % 3) {
      case 0: config.scheme = Scheme::Single; break;
      case 1: config.scheme = Scheme::Fusion;
              config.prune_threshold = unit(rng) < 0.5 ? 0.0 : 1e-7;
              break;
      default:
        config.scheme = Scheme::Multi;
        while (config.priors.size() > 5) config.priors.pop_back();
        break;
    }

    // Selection invariance on the (possibly updated) lattice.
    Lattice lattice = Lattice::build(config.priors);
    oracle::apply_random_history(rng, lattice, config.model,
                                 static_cast<int>(rng() % 3));
    const std::uint64_t chunk =
        gt::default_chunk_size(lattice.active_count(), 0);
    const Selection w1 = gt::select_op_bha_parallel(lattice, chunk, 1);
    const Selection w2 = gt::select_op_bha_parallel(lattice, chunk, 2);
    const Selection w8 = gt::select_op_bha_parallel(lattice, chunk, 8);
    ok = ok && w1.pool == w2.pool && w1.pool == w8.pool;
    ok = ok && w1.pool_mass == w2.pool_mass && w1.pool_mass == w8.pool_mass;

    // Full analyze invariance, bitwise on every statistic.
    AnalysisReport reference;
    bool first = true;
    for (int workers : {1, 2, 8}) {
      config.worker_count = workers;
      const AnalysisReport report = gt::run_analysis(config);
      if (first) {
        reference = report;
        first = false;
        continue;
      }
      ok = ok && report.expected_tests == reference.expected_tests;
      ok = ok && report.decisive_rate == reference.decisive_rate;
      ok = ok && report.aggregate_fn_mass == reference.aggregate_fn_mass;
      ok = ok && report.aggregate_fp_mass == reference.aggregate_fp_mass;
      ok = ok && report.branches_terminal == reference.branches_terminal;
      ok = ok && report.branches_pruned == reference.branches_pruned;
      ok = ok && report.nodes_expanded == reference.nodes_expanded;
      for (std::size_t i = 0; i < report.per_subject.size(); ++i) {
        ok = ok &&
             report.per_subject[i].fn_mass == reference.per_subject[i].fn_mass;
        ok = ok &&
             report.per_subject[i].fp_mass == reference.per_subject[i].fp_mass;
      }
    }
  }
  report_line(9, ok, "20 random configs identical across 1/2/8 workers");
  CHECK(ok);
}

TEST_CASE("criterion 10: relative performance stand-ins") {
  // (a) Instrumented reads: the skip selector does a vanishing fraction of
  // the exhaustive work on a fresh homogeneous lattice.
  const Lattice wide = Lattice::build(oracle::homogeneous_priors(16, 0.02));
  wide.reset_prob_reads();
  gt::select_bha(wide);
  const std::uint64_t reads_exhaustive = wide.prob_reads();
  wide.reset_prob_reads();
  gt::select_op_bha(wide);
  const std::uint64_t reads_skipping = wide.prob_reads();
  bool ok_a = reads_skipping * 100 <= reads_exhaustive;

  // (b) One breadth-first tree beats 2^10 per-state trees by at least 2x.
  AnalysisConfig config;
  config.priors = oracle::homogeneous_priors(10, 0.1);
  config.thresholds = {0.02, 0.02};
  config.max_stages = 10;
  auto time_scheme = [&](Scheme scheme) {
    const auto start = Clock::now();
    (void)run_scheme(config, scheme);
    return seconds_since(start);
  };
  const double single_seconds = time_scheme(Scheme::Single);
  const double multi_seconds = time_scheme(Scheme::Multi);
  const bool ok_b = multi_seconds >= 2.0 * single_seconds;

  // (c) Stage pruning only ever shrinks the workload, without moving the
  // statistics.
  AnalysisConfig deep;
  deep.priors = oracle::homogeneous_priors(6, 0.05);
  deep.model = ResponseModel{0.9, 0.99, 1.0};
  deep.thresholds = {0.01, 0.01};
  deep.max_stages = 12;
  const AnalysisReport single = run_scheme(deep, Scheme::Single);
  deep.prune_threshold = 1e-9;
  const AnalysisReport fusion = run_scheme(deep, Scheme::Fusion);
  bool ok_c = fusion.nodes_expanded <= single.nodes_expanded;
  ok_c = ok_c && close(fusion.expected_tests, single.expected_tests, 1e-4);
  ok_c = ok_c && close(fusion.decisive_rate, single.decisive_rate, 1e-4);
  ok_c = ok_c &&
         close(fusion.aggregate_fn_mass, single.aggregate_fn_mass, 1e-4);

  std::printf("    reads %llu vs %llu; wall %.2fs vs %.2fs; nodes %llu vs %llu\n",
              static_cast<unsigned long long>(reads_skipping),
              static_cast<unsigned long long>(reads_exhaustive),
              single_seconds, multi_seconds,
              static_cast<unsigned long long>(fusion.nodes_expanded),
              static_cast<unsigned long long>(single.nodes_expanded));
  const bool ok = ok_a && ok_b && ok_c;
  report_line(10, ok, "reads <= 1%; single >= 2x multi; pruning only trims");
  CHECK(ok_a);
  CHECK(ok_b);
  CHECK(ok_c);
}

TEST_CASE("criterion 11: branch caps and weight conservation hold everywhere") {
  // Conservation and the cap are engine invariants that throw on violation;
  // a spread of configurations exercises them, and the cap is re-checked
  // from the reports.
  bool ok = true;
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int trial = 0; trial < 12 && ok; ++trial) {
    const int n = 2 + static_cast<int>(rng() % 5);
    AnalysisConfig config;
    config.priors = oracle::random_priors(rng, n, 0.05, 0.4);
    config.model = ResponseModel{0.8 + 0.2 * unit(rng), 0.9 + 0.1 * unit(rng),
                                 unit(rng)};
    config.thresholds = {0.05, 0.05};
    config.max_stages = 3 + static_cast<int>(rng() % 6);
    config.scheme = trial % 2 ? Scheme::Single : Scheme::Multi;
    if (config.scheme == Scheme::Multi && config.priors.size() > 5) {
      config.priors.resize(5);
    }
    try {
      const AnalysisReport report = gt::run_analysis(config);
      if (config.scheme == Scheme::Single) {
        ok = ok && report.branches_terminal <=
                       (std::uint64_t{1} << config.max_stages);
        ok = ok && report.unaccounted_mass <= 1e-9;
      }
    } catch (const gt::Error&) {
      ok = false;  // a conservation or cap violation surfaced
    }
  }
  report_line(11, ok, "branch count <= 2^stages; stage weights sum to one");
  CHECK(ok);
}
