#pragma once

// Pool selection. The halving rule picks the nonempty state whose posterior
// mass sits closest to 0.5, bisecting the posterior as evenly as possible.
//
// Masses are strictly ordered along containment: everything strictly above a
// state has strictly smaller mass, everything strictly below has strictly
// larger mass. The skip-optimized selector exploits this: once a state's
// mass lands below 0.5 its whole up-set can only be farther from 0.5, and
// symmetrically for the down-set, so those states are marked off in a
// checklist and never evaluated.

#include <cstdint>
#include <vector>

#include "lattice.hpp"

namespace gt {

struct Selection {
  StateIndex pool = 0;
  double pool_mass = 0.0;
  std::uint64_t evaluated_states = 0;
  std::uint64_t skipped_states = 0;  // marked skippable, never evaluated
};

// One bit per state; set = evaluated or provably skippable. Merging two
// checklists is bitwise OR.
class Checklist {
 public:
  explicit Checklist(int n_active);

  bool test(StateIndex s) const {
    return (words_[s >> 6] >> (s & 63)) & 1u;
  }
  void set(StateIndex s) {
    std::uint64_t& word = words_[s >> 6];
    const std::uint64_t bit = std::uint64_t{1} << (s & 63);
    count_ += !(word & bit);
    word |= bit;
  }
  // Marks every state in the up-set / down-set of s, s included. Bulk
  // marking is word-batched (one OR per 64-state block).
  void set_up_set(StateIndex s, StateIndex top);
  void set_down_set(StateIndex s);
  void merge(const Checklist& other);

  std::uint64_t count() const { return count_; }
  std::uint64_t capacity() const { return capacity_; }
  bool full() const { return count_ == capacity_; }

 private:
  void mark_word(std::size_t index, std::uint64_t mask);

  std::vector<std::uint64_t> words_;
  std::uint64_t capacity_ = 0;
  std::uint64_t count_ = 0;
};

// Emits every state exactly once, grouped by cardinality in the order
// n, 0, n-1, 1, n-2, 2, ... (extremes first, middle last), ascending numeric
// value within a group. Extreme states can skip the most, so they go first.
class TraversalCursor {
 public:
  explicit TraversalCursor(int n);
  bool next(StateIndex& out);

 private:
  bool advance_group();

  int n_;
  std::vector<int> cardinalities_;
  std::size_t group_ = 0;
  StateIndex value_ = 0;
  std::uint64_t remaining_in_group_ = 0;
};

std::vector<StateIndex> traversal_order(int n);

std::uint64_t binomial(int n, int k);

// Exhaustive baseline: evaluates every nonempty state in traversal order,
// first strict improvement of |mass - 0.5| wins.
Selection select_bha(const Lattice& lattice);

// Checklist-skipping selector; same pool gap as the exhaustive baseline.
Selection select_op_bha(const Lattice& lattice);

// Chunked multi-stage map/reduce over candidate states. Workers evaluate
// slices of the chunk with local skip logic; the reduce step merges
// checklists by OR and picks the best gap with ties broken by traversal
// rank, so the result is identical for any worker count. chunk_size == 0
// selects the default.
Selection select_op_bha_parallel(const Lattice& lattice,
                                 std::uint64_t chunk_size, int worker_count);

std::uint64_t default_chunk_size(int n_active, int exponent_offset = 8);

}  // namespace gt
