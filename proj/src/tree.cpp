#include "tree.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <functional>
#include <map>
#include <unordered_map>

#include "parallel.hpp"

namespace gt {

namespace {

constexpr double kConservationTolerance = 1e-9;

std::unordered_map<int, int> subject_index_map(const AnalysisConfig& config) {
  std::unordered_map<int, int> map;
  map.reserve(config.priors.size());
  for (std::size_t i = 0; i < config.priors.size(); ++i) {
    map.emplace(config.priors[i].subject_id, static_cast<int>(i));
  }
  return map;
}

// Children of a node under an arbitrary response-probability rule; the rule
// receives the selected pool both as a state of the (possibly shrunk) node
// lattice and as original subject ids.
using NegativeProbability =
    std::function<double(StateIndex pool, const std::vector<int>& pool_ids)>;

ExpandResult expand_with(const TreeNode& node, const AnalysisConfig& config,
                         const NegativeProbability& negative_probability,
                         double birth_threshold) {
  ExpandResult out;
  if (node.lattice.all_classified()) {
    out.terminal = true;
    out.decisive = true;
    return out;
  }
  if (node.depth >= config.max_stages) {
    out.terminal = true;
    out.decisive = false;
    return out;
  }

  const Selection selection = select_op_bha(node.lattice);
  const std::vector<int> pool_ids = node.lattice.decode(selection.pool);
  const double p_negative = negative_probability(selection.pool, pool_ids);

  for (const Response response : {Response::Negative, Response::Positive}) {
    const double p = (response == Response::Negative) ? p_negative
                                                      : 1.0 - p_negative;
    const double weight = node.weight * p;
    if (weight <= birth_threshold || p < 1e-300) {
      ++out.pruned_children;
      continue;
    }
    TreeNode child(node.lattice);
    try {
      child.lattice.update_posterior(selection.pool, response, config.model);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::ImpossibleResponse) {
        ++out.pruned_children;
        continue;
      }
      throw;
    }
    child.weight = weight;
    child.depth = node.depth + 1;
    child.path = node.path;
    child.path.push_back(PathStep{pool_ids, response});
    child.commits = node.commits;
    const auto fresh =
        child.lattice.classify_and_shrink(config.thresholds, child.depth);
    for (const CommitEvent& event : fresh) {
      child.commits.push_back(WeightedCommit{event, child.weight, child.depth});
    }
    out.fresh_commits.push_back(fresh.size());
    out.children.push_back(std::move(child));
  }
  return out;
}

// Statistics of one tree before any prior weighting.
struct TreeStats {
  double expected_tests = 0.0;
  double decisive = 0.0;
  double terminal_weight = 0.0;
  std::vector<double> fn_mass;
  std::vector<double> fp_mass;
  std::uint64_t terminal = 0;
  std::uint64_t pruned = 0;
  std::uint64_t expanded = 0;

  explicit TreeStats(std::size_t subjects)
      : fn_mass(subjects, 0.0), fp_mass(subjects, 0.0) {}
};

void check_branch_cap(std::uint64_t branches, int max_stages) {
  if (branches > (std::uint64_t{1} << max_stages)) {
    throw Error(ErrorCode::Internal, "branch count exceeded 2^max_stages");
  }
}

AnalysisReport run_big_tree(const AnalysisConfig& config, bool fusion) {
  config.validate();
  const std::size_t subjects = config.priors.size();
  const auto index_of = subject_index_map(config);

  AnalysisReport report;
  report.per_subject.assign(subjects, SubjectStats{});
  report.trees_built = 1;

  std::vector<TreeNode> frontier;
  frontier.push_back(TreeNode(Lattice::build(config.priors)));

  double terminal_weight = 0.0;
  // Pruning removes mass, so conservation is only checkable at threshold 0.
  const bool check_conservation = config.prune_threshold == 0.0;

  while (!frontier.empty()) {
    // Task alignment: nodes of equal lattice size cost the same, so each
    // size class is dispatched as one unit, largest first.
    std::vector<ExpandResult> results(frontier.size());
    std::map<int, std::vector<std::size_t>, std::greater<int>> groups;
    for (std::size_t i = 0; i < frontier.size(); ++i) {
      groups[frontier[i].lattice.active_count()].push_back(i);
    }
    for (const auto& [active, members] : groups) {
      parallel_for(members.size(), config.worker_count, [&](std::size_t j) {
        const std::size_t i = members[j];
        results[i] = expand_node(frontier[i], config);
      });
    }

    // Deterministic merge in frontier order.
    std::vector<TreeNode> next;
    for (std::size_t i = 0; i < frontier.size(); ++i) {
      TreeNode& node = frontier[i];
      ExpandResult& result = results[i];
      report.branches_pruned += result.pruned_children;
      if (result.terminal) {
        ++report.branches_terminal;
        report.expected_tests += node.weight * node.depth;
        terminal_weight += node.weight;
        if (result.decisive) report.decisive_rate += node.weight;
        continue;
      }
      ++report.nodes_expanded;
      for (std::size_t c = 0; c < result.children.size(); ++c) {
        TreeNode& child = result.children[c];
        const std::size_t fresh = result.fresh_commits[c];
        for (std::size_t k = child.commits.size() - fresh;
             k < child.commits.size(); ++k) {
          const WeightedCommit& commit = child.commits[k];
          SubjectStats& stats =
              report.per_subject[index_of.at(commit.event.subject_id)];
          if (commit.event.decision == Decision::Negative) {
            stats.fn_mass += commit.weight * commit.event.residual_error;
          } else {
            stats.fp_mass += commit.weight * commit.event.residual_error;
          }
        }
        next.push_back(std::move(child));
      }
    }

    if (fusion && config.prune_threshold > 0.0) {
      std::vector<TreeNode> kept;
      kept.reserve(next.size());
      for (TreeNode& node : next) {
        if (node.weight <= config.prune_threshold) {
          ++report.branches_pruned;
        } else {
          kept.push_back(std::move(node));
        }
      }
      next = std::move(kept);
    }

    if (check_conservation) {
      double frontier_weight = 0.0;
      for (const TreeNode& node : next) frontier_weight += node.weight;
      if (std::abs(terminal_weight + frontier_weight - 1.0) >
          kConservationTolerance) {
        throw Error(ErrorCode::Internal, "branch weight conservation violated");
      }
    }
    check_branch_cap(report.branches_terminal + next.size(), config.max_stages);
    frontier = std::move(next);
  }

  check_branch_cap(report.branches_terminal, config.max_stages);
  for (const SubjectStats& stats : report.per_subject) {
    report.aggregate_fn_mass += stats.fn_mass;
    report.aggregate_fp_mass += stats.fp_mass;
  }
  report.unaccounted_mass = std::max(0.0, 1.0 - terminal_weight);
  return report;
}

// One depth-first tree conditioned on a cardinality class (exactly k
// positives among homogeneous subjects). Selections and commitments follow
// the ordinary information lattice; branch weights and error charges come
// from a parallel lattice conditioned on the class. A single representative
// state cannot stand in for its class here: the selector's deterministic
// tie-breaks treat specific subjects differently, so same-cardinality states
// can follow different test sequences. Conditioning on the class keeps the
// N+1-tree aggregate exactly equal to full enumeration.
TreeStats analyze_cardinality_class(
    const AnalysisConfig& config, int positives,
    const std::unordered_map<int, int>& index_of) {
  const int n = static_cast<int>(config.priors.size());
  TreeStats stats(config.priors.size());

  const Lattice prior_lattice = Lattice::build(config.priors);
  std::vector<double> restricted(prior_lattice.size(), 0.0);
  for (std::size_t s = 0; s < prior_lattice.size(); ++s) {
    if (std::popcount(s) == n - positives) {
      restricted[s] = prior_lattice.prob(static_cast<StateIndex>(s));
    }
  }
  Lattice conditioned_root =
      Lattice::with_distribution(config.priors, std::move(restricted));

  struct Frame {
    TreeNode info;
    Lattice conditioned;
  };

  std::function<void(const Frame&)> descend = [&](const Frame& frame) {
    const TreeNode& node = frame.info;
    if (node.lattice.all_classified()) {
      ++stats.terminal;
      stats.expected_tests += node.weight * node.depth;
      stats.terminal_weight += node.weight;
      stats.decisive += node.weight;
      return;
    }
    if (node.depth >= config.max_stages) {
      ++stats.terminal;
      stats.expected_tests += node.weight * node.depth;
      stats.terminal_weight += node.weight;
      return;
    }
    ++stats.expanded;

    const Selection selection = select_op_bha(node.lattice);
    const std::vector<int> pool_ids = node.lattice.decode(selection.pool);
    const double p_negative =
        predictive_negative(frame.conditioned, selection.pool, config.model);
    for (const Response response : {Response::Negative, Response::Positive}) {
      const double p = (response == Response::Negative) ? p_negative
                                                        : 1.0 - p_negative;
      const double weight = node.weight * p;
      if (weight <= config.prune_threshold || p < 1e-300) {
        ++stats.pruned;
        continue;
      }
      Frame child{TreeNode(node.lattice), frame.conditioned};
      try {
        child.info.lattice.update_posterior(selection.pool, response,
                                            config.model);
        child.conditioned.update_posterior(selection.pool, response,
                                           config.model);
      } catch (const Error& e) {
        if (e.code() == ErrorCode::ImpossibleResponse) {
          ++stats.pruned;
          continue;
        }
        throw;
      }
      child.info.weight = weight;
      child.info.depth = node.depth + 1;
      child.info.path = node.path;
      child.info.path.push_back(PathStep{pool_ids, response});
      child.info.commits = node.commits;
      const auto fresh = child.info.lattice.classify_and_shrink(
          config.thresholds, child.info.depth);
      for (const CommitEvent& event : fresh) {
        const int idx = index_of.at(event.subject_id);
        const double class_negative =
            child.conditioned.subject_marginal(event.subject_id);
        if (event.decision == Decision::Negative) {
          stats.fn_mass[idx] += weight * (1.0 - class_negative);
        } else {
          stats.fp_mass[idx] += weight * class_negative;
        }
        child.conditioned.marginalize_subject(event.subject_id);
        child.info.commits.push_back(
            WeightedCommit{event, weight, child.info.depth});
      }
      descend(child);
    }
  };

  descend(Frame{TreeNode(Lattice::build(config.priors)),
                std::move(conditioned_root)});

  if (config.prune_threshold == 0.0 &&
      std::abs(stats.terminal_weight - 1.0) > kConservationTolerance) {
    throw Error(ErrorCode::Internal, "branch weight conservation violated");
  }
  check_branch_cap(stats.terminal, config.max_stages);
  return stats;
}

// One depth-first tree conditioned on a true state; branch weights are the
// response probabilities the true state implies, and classification errors
// are charged by ground truth rather than by residual.
TreeStats analyze_true_state(const AnalysisConfig& config, StateIndex truth,
                             const std::unordered_map<int, int>& index_of) {
  const int n = static_cast<int>(config.priors.size());
  TreeStats stats(config.priors.size());

  auto positive_in_truth = [&](int subject_index) {
    const int bit = n - 1 - subject_index;
    return ((truth >> bit) & 1u) == 0;
  };

  const NegativeProbability conditional =
      [&](StateIndex, const std::vector<int>& pool_ids) {
        int positives = 0;
        for (int id : pool_ids) {
          if (positive_in_truth(index_of.at(id))) ++positives;
        }
        return config.model.negative_given_counts(
            positives, static_cast<int>(pool_ids.size()));
      };

  std::function<void(const TreeNode&)> descend = [&](const TreeNode& node) {
    ExpandResult result =
        expand_with(node, config, conditional, config.prune_threshold);
    stats.pruned += result.pruned_children;
    if (result.terminal) {
      ++stats.terminal;
      stats.expected_tests += node.weight * node.depth;
      stats.terminal_weight += node.weight;
      if (result.decisive) stats.decisive += node.weight;
      return;
    }
    ++stats.expanded;
    for (std::size_t c = 0; c < result.children.size(); ++c) {
      const TreeNode& child = result.children[c];
      const std::size_t fresh = result.fresh_commits[c];
      for (std::size_t k = child.commits.size() - fresh;
           k < child.commits.size(); ++k) {
        const WeightedCommit& commit = child.commits[k];
        const int idx = index_of.at(commit.event.subject_id);
        if (commit.event.decision == Decision::Negative &&
            positive_in_truth(idx)) {
          stats.fn_mass[idx] += commit.weight;
        } else if (commit.event.decision == Decision::Positive &&
                   !positive_in_truth(idx)) {
          stats.fp_mass[idx] += commit.weight;
        }
      }
      descend(child);
    }
  };

  descend(TreeNode(Lattice::build(config.priors)));

  if (config.prune_threshold == 0.0 &&
      std::abs(stats.terminal_weight - 1.0) > kConservationTolerance) {
    throw Error(ErrorCode::Internal, "branch weight conservation violated");
  }
  check_branch_cap(stats.terminal, config.max_stages);
  return stats;
}

}  // namespace

bool AnalysisConfig::homogeneous() const {
  for (const SubjectPrior& prior : priors) {
    if (prior.risk != priors.front().risk) return false;
  }
  return true;
}

void AnalysisConfig::validate() const {
  if (priors.empty() || static_cast<int>(priors.size()) > kMaxSubjects) {
    throw Error(ErrorCode::Config, "subject count unsupported");
  }
  for (const SubjectPrior& prior : priors) {
    if (!(prior.risk > 0.0 && prior.risk < 1.0)) {
      throw Error(ErrorCode::Config, "invalid prior");
    }
  }
  model.validate();
  thresholds.validate();
  if (max_stages < 1) {
    throw Error(ErrorCode::Config, "max_stages must be at least 1");
  }
  if (max_stages > 16) {
    throw Error(ErrorCode::ScaleGuard,
                "max_stages " + std::to_string(max_stages) + " projects up to 2^" +
                    std::to_string(max_stages) +
                    " branches; the desk-scale cap is 16 stages");
  }
  if (!(prune_threshold >= 0.0 && prune_threshold < 1.0)) {
    throw Error(ErrorCode::Config, "prune_threshold must lie in [0, 1)");
  }
  if (!(retained_prior_mass > 0.0 && retained_prior_mass <= 1.0)) {
    throw Error(ErrorCode::Config, "retained_prior_mass must lie in (0, 1]");
  }
  if (symmetry && !homogeneous()) {
    throw Error(ErrorCode::Config, "symmetry requires homogeneous risks");
  }
  if (worker_count < 0) {
    throw Error(ErrorCode::Config, "worker_count must be nonnegative");
  }
}

ExpandResult expand_node(const TreeNode& node, const AnalysisConfig& config) {
  const NegativeProbability predictive =
      [&](StateIndex pool, const std::vector<int>&) {
        return predictive_negative(node.lattice, pool, config.model);
      };
  // Only exact-zero branches are dropped at birth; the fusion scheme prunes
  // small weights at stage boundaries instead.
  return expand_with(node, config, predictive, 0.0);
}

std::vector<TrueState> enumerate_true_states(const AnalysisConfig& config) {
  const int n = static_cast<int>(config.priors.size());
  if (n > 20) {
    throw Error(ErrorCode::ScaleGuard,
                "true-state enumeration too large (2^" + std::to_string(n) +
                    " states)");
  }
  const Lattice prior_lattice = Lattice::build(config.priors);
  std::vector<TrueState> states;
  states.reserve(prior_lattice.size());
  for (std::size_t s = 0; s < prior_lattice.size(); ++s) {
    states.push_back(
        TrueState{static_cast<StateIndex>(s), prior_lattice.prob(
                      static_cast<StateIndex>(s))});
  }
  return states;
}

std::vector<TrueState> apply_symmetry(const AnalysisConfig& config) {
  if (!config.homogeneous()) {
    throw Error(ErrorCode::InvalidArgument, "symmetry requires homogeneous risks");
  }
  const int n = static_cast<int>(config.priors.size());
  const double p = config.priors.front().risk;
  std::vector<TrueState> representatives;
  representatives.reserve(n + 1);
  for (int k = 0; k <= n; ++k) {
    // Representative with the k lowest-indexed subjects positive; exchange-
    // ability makes any member of the cardinality class equivalent.
    const StateIndex state =
        static_cast<StateIndex>((std::uint64_t{1} << (n - k)) - 1);
    const double weight = static_cast<double>(binomial(n, k)) *
                          std::pow(p, k) * std::pow(1.0 - p, n - k);
    representatives.push_back(TrueState{state, weight});
  }
  return representatives;
}

RetainedStates apply_prior_mass_tradeoff(const AnalysisConfig& config) {
  std::vector<TrueState> candidates =
      config.symmetry ? apply_symmetry(config) : enumerate_true_states(config);
  if (config.retained_prior_mass >= 1.0) {
    return RetainedStates{std::move(candidates), 1.0};
  }
  std::sort(candidates.begin(), candidates.end(),
            [](const TrueState& a, const TrueState& b) {
              if (a.weight != b.weight) return a.weight > b.weight;
              return a.state < b.state;
            });
  RetainedStates retained;
  double cumulative = 0.0;
  // Slack of a few ulps so a rounding shortfall cannot drag in one more
  // state than the requested mass actually needs.
  const double target = config.retained_prior_mass * (1.0 - 1e-12);
  for (const TrueState& candidate : candidates) {
    retained.states.push_back(candidate);
    cumulative += candidate.weight;
    if (cumulative >= target) break;
  }
  retained.retained_mass = cumulative;
  return retained;
}

AnalysisReport run_single_tree(const AnalysisConfig& config) {
  if (config.scheme != Scheme::Single) {
    throw Error(ErrorCode::Config, "config scheme is not single");
  }
  return run_big_tree(config, /*fusion=*/false);
}

AnalysisReport run_fusion_tree(const AnalysisConfig& config) {
  if (config.scheme != Scheme::Fusion) {
    throw Error(ErrorCode::Config, "config scheme is not fusion");
  }
  return run_big_tree(config, /*fusion=*/true);
}

AnalysisReport run_multi_tree(const AnalysisConfig& config) {
  if (config.scheme != Scheme::Multi) {
    throw Error(ErrorCode::Config, "config scheme is not multi");
  }
  config.validate();
  const std::size_t subjects = config.priors.size();
  if (!config.symmetry && subjects > 20) {
    throw Error(ErrorCode::ScaleGuard,
                "true-state enumeration too large (2^" +
                    std::to_string(subjects) + " trees)");
  }
  const auto index_of = subject_index_map(config);
  const RetainedStates plan = apply_prior_mass_tradeoff(config);

  AnalysisReport report;
  report.per_subject.assign(subjects, SubjectStats{});
  report.trees_built = plan.states.size();
  report.retained_mass = plan.retained_mass;

  // Inter-tree parallelism: every true state (or cardinality class, under
  // the symmetry reduction) grows its own tree.
  const int n = static_cast<int>(subjects);
  std::vector<TreeStats> per_tree(plan.states.size(), TreeStats(subjects));
  parallel_for(plan.states.size(), config.worker_count, [&](std::size_t i) {
    if (config.symmetry) {
      const int positives = n - std::popcount(plan.states[i].state);
      per_tree[i] = analyze_cardinality_class(config, positives, index_of);
    } else {
      per_tree[i] = analyze_true_state(config, plan.states[i].state, index_of);
    }
  });

  double accounted = 0.0;
  for (std::size_t i = 0; i < plan.states.size(); ++i) {
    const double weight = plan.states[i].weight;
    const TreeStats& stats = per_tree[i];
    report.expected_tests += weight * stats.expected_tests;
    report.decisive_rate += weight * stats.decisive;
    for (std::size_t j = 0; j < subjects; ++j) {
      report.per_subject[j].fn_mass += weight * stats.fn_mass[j];
      report.per_subject[j].fp_mass += weight * stats.fp_mass[j];
    }
    report.branches_terminal += stats.terminal;
    report.branches_pruned += stats.pruned;
    report.nodes_expanded += stats.expanded;
    accounted += weight * stats.terminal_weight;
  }
  for (const SubjectStats& stats : report.per_subject) {
    report.aggregate_fn_mass += stats.fn_mass;
    report.aggregate_fp_mass += stats.fp_mass;
  }
  report.unaccounted_mass = std::max(0.0, report.retained_mass - accounted);
  return report;
}

AnalysisReport run_analysis(const AnalysisConfig& config) {
  switch (config.scheme) {
    case Scheme::Single:
      return run_single_tree(config);
    case Scheme::Multi:
      return run_multi_tree(config);
    case Scheme::Fusion:
      return run_fusion_tree(config);
  }
  throw Error(ErrorCode::Config, "unknown scheme");
}

}  // namespace gt
