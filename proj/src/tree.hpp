#pragma once

// Exhaustive response-tree construction for evaluating pooling strategies.
//
// A tree enumerates every test sequence the selector can generate up to a
// stage limit: each node holds the lattice after its history, each edge is
// one test response. Three schemes produce the same statistics by different
// routes: one breadth-first tree over marginal branch probabilities
// (single), one depth-first tree per true state over conditional branch
// probabilities (multi), and the breadth-first tree with per-stage pruning
// of negligible branches (fusion).

#include <cstdint>
#include <vector>

#include "halving.hpp"
#include "lattice.hpp"
#include "response.hpp"

namespace gt {

enum class Scheme { Multi, Single, Fusion };

struct AnalysisConfig {
  std::vector<SubjectPrior> priors;
  ResponseModel model;
  Thresholds thresholds;
  int max_stages = 1;
  Scheme scheme = Scheme::Single;
  double prune_threshold = 0.0;  // branch-weight cutoff; 0 prunes exact zeros
  bool symmetry = false;         // homogeneous priors only
  double retained_prior_mass = 1.0;
  int worker_count = 0;  // 0 = hardware; results do not depend on it

  void validate() const;
  bool homogeneous() const;
};

struct PathStep {
  std::vector<int> pool;  // original subject ids
  Response response = Response::Negative;
};

struct WeightedCommit {
  CommitEvent event;
  double weight = 0.0;  // path weight at commit time
  int stage = 0;
};

struct TreeNode {
  Lattice lattice;
  double weight = 1.0;  // marginal (single/fusion) or conditional (multi)
  int depth = 0;
  std::vector<PathStep> path;
  std::vector<WeightedCommit> commits;

  explicit TreeNode(Lattice l) : lattice(std::move(l)) {}
};

struct SubjectStats {
  double fn_mass = 0.0;
  double fp_mass = 0.0;
};

struct AnalysisReport {
  double expected_tests = 0.0;
  double decisive_rate = 0.0;
  std::vector<SubjectStats> per_subject;  // aligned with config prior order
  double aggregate_fn_mass = 0.0;
  double aggregate_fp_mass = 0.0;
  std::uint64_t branches_terminal = 0;
  std::uint64_t branches_pruned = 0;
  std::uint64_t nodes_expanded = 0;
  std::uint64_t trees_built = 0;
  double retained_mass = 1.0;    // < 1 only for the accuracy trade-off
  double unaccounted_mass = 0.0; // mass lost to pruning / retention
};

struct ExpandResult {
  bool terminal = false;
  bool decisive = false;
  std::uint64_t pruned_children = 0;
  std::vector<TreeNode> children;           // negative response first
  std::vector<std::size_t> fresh_commits;   // per child, count of new commits
};

// Terminal when every subject is classified (decisive) or the stage limit is
// reached (indecisive); otherwise selects a pool and spawns one child per
// response with weight = node.weight * predictive probability. Children with
// zero branch probability are dropped, not errored.
ExpandResult expand_node(const TreeNode& node, const AnalysisConfig& config);

// A true state with its prior weight (or class weight under symmetry).
struct TrueState {
  StateIndex state = 0;  // over the full, unshrunk bit space
  double weight = 0.0;
};

// All 2^N true states with their prior products.
std::vector<TrueState> enumerate_true_states(const AnalysisConfig& config);

// Homogeneous reduction to N+1 representatives: for k = 0..N the state whose
// k lowest-indexed subjects are positive, weighted by the binomial mass of
// its cardinality class.
std::vector<TrueState> apply_symmetry(const AnalysisConfig& config);

struct RetainedStates {
  std::vector<TrueState> states;
  double retained_mass = 1.0;
};

// Keeps the highest-prior states until the requested mass is covered;
// statistics over the kept set stay unnormalized.
RetainedStates apply_prior_mass_tradeoff(const AnalysisConfig& config);

AnalysisReport run_single_tree(const AnalysisConfig& config);
AnalysisReport run_multi_tree(const AnalysisConfig& config);
AnalysisReport run_fusion_tree(const AnalysisConfig& config);
AnalysisReport run_analysis(const AnalysisConfig& config);

}  // namespace gt
