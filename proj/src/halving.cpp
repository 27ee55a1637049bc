#include "halving.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>

#include "parallel.hpp"

namespace gt {

std::uint64_t binomial(int n, int k) {
  if (k < 0 || k > n) return 0;
  k = std::min(k, n - k);
  std::uint64_t result = 1;
  for (int i = 1; i <= k; ++i) {
    result = result * static_cast<std::uint64_t>(n - k + i) /
             static_cast<std::uint64_t>(i);
  }
  return result;
}

namespace {

// Next larger integer with the same popcount (Gosper's hack).
StateIndex next_same_cardinality(StateIndex v) {
  const StateIndex t = v | (v - 1);
  return (t + 1) | (((~t & (t + 1)) - 1) >> (std::countr_zero(v) + 1));
}

struct Best {
  double gap = std::numeric_limits<double>::infinity();
  std::uint64_t rank = std::numeric_limits<std::uint64_t>::max();
  StateIndex state = 0;
  double mass = 0.0;

  // Lexicographic (gap, rank): earlier traversal rank wins ties, which
  // reproduces the serial first-seen rule.
  bool improves(double candidate_gap, std::uint64_t candidate_rank) const {
    return candidate_gap < gap || (candidate_gap == gap && candidate_rank < rank);
  }
};

// All 6-bit submasks / supermasks of a pattern, as one bitset word. Bulk
// marking works per 64-state block: block membership is decided on the high
// bits, the low six bits contribute the same in-block pattern every time.
std::uint64_t word_of_submasks(unsigned low) {
  std::uint64_t mask = 0;
  std::uint64_t j = low;
  while (true) {
    mask |= std::uint64_t{1} << j;
    if (j == 0) break;
    j = (j - 1) & low;
  }
  return mask;
}

std::uint64_t word_of_supermasks(unsigned low, unsigned limit) {
  const unsigned absent = limit & ~low;
  std::uint64_t mask = 0;
  std::uint64_t extra = absent;
  while (true) {
    mask |= std::uint64_t{1} << (low | extra);
    if (extra == 0) break;
    extra = (extra - 1) & absent;
  }
  return mask;
}

}  // namespace

Checklist::Checklist(int n_active) {
  capacity_ = std::uint64_t{1} << n_active;
  words_.assign((capacity_ + 63) / 64, 0);
}

void Checklist::mark_word(std::size_t index, std::uint64_t mask) {
  std::uint64_t& word = words_[index];
  count_ += static_cast<std::uint64_t>(std::popcount(mask & ~word));
  word |= mask;
}

void Checklist::set_up_set(StateIndex s, StateIndex top) {
  // Blocks at base h*64 hold a superset of s iff h covers s's high bits.
  const std::uint64_t mask =
      word_of_supermasks(s & 63u, static_cast<unsigned>(top) & 63u);
  const StateIndex s_high = s >> 6;
  const StateIndex absent_high = (top >> 6) & ~s_high;
  StateIndex extra = absent_high;
  while (true) {
    mark_word(s_high | extra, mask);
    if (extra == 0) break;
    extra = (extra - 1) & absent_high;
  }
}

void Checklist::set_down_set(StateIndex s) {
  const std::uint64_t mask = word_of_submasks(s & 63u);
  const StateIndex s_high = s >> 6;
  StateIndex h = s_high;
  while (true) {
    mark_word(h, mask);
    if (h == 0) break;
    h = (h - 1) & s_high;
  }
}

void Checklist::merge(const Checklist& other) {
  std::uint64_t total = 0;
  for (std::size_t w = 0; w < words_.size(); ++w) {
    words_[w] |= other.words_[w];
    total += static_cast<std::uint64_t>(std::popcount(words_[w]));
  }
  count_ = total;
}

TraversalCursor::TraversalCursor(int n) : n_(n) {
  if (n < 1 || n > kMaxSubjects) {
    throw Error(ErrorCode::InvalidArgument, "subject count unsupported");
  }
  int high = n;
  int low = 0;
  while (low < high) {
    cardinalities_.push_back(high--);
    cardinalities_.push_back(low++);
  }
  if (low == high) cardinalities_.push_back(low);
  group_ = 0;
  value_ = static_cast<StateIndex>((std::uint64_t{1} << cardinalities_[0]) - 1);
  remaining_in_group_ = binomial(n_, cardinalities_[0]);
}

bool TraversalCursor::advance_group() {
  ++group_;
  if (group_ >= cardinalities_.size()) return false;
  const int k = cardinalities_[group_];
  value_ = static_cast<StateIndex>((std::uint64_t{1} << k) - 1);
  remaining_in_group_ = binomial(n_, k);
  return true;
}

bool TraversalCursor::next(StateIndex& out) {
  while (remaining_in_group_ == 0) {
    if (!advance_group()) return false;
  }
  out = value_;
  --remaining_in_group_;
  if (remaining_in_group_ > 0) value_ = next_same_cardinality(value_);
  return true;
}

std::vector<StateIndex> traversal_order(int n) {
  TraversalCursor cursor(n);
  std::vector<StateIndex> order;
  order.reserve(std::size_t{1} << n);
  StateIndex s = 0;
  while (cursor.next(s)) order.push_back(s);
  return order;
}

Selection select_bha(const Lattice& lattice) {
  if (lattice.all_classified()) {
    throw Error(ErrorCode::InvalidArgument, "no active subjects");
  }
  TraversalCursor cursor(lattice.active_count());
  Best best;
  Selection selection;
  std::uint64_t rank = 0;
  StateIndex s = 0;
  while (cursor.next(s)) {
    ++rank;
    if (s == 0) continue;  // the empty pool is untestable
    const double mass = lattice.mass(s);
    ++selection.evaluated_states;
    const double gap = std::abs(mass - 0.5);
    if (best.improves(gap, rank)) {
      best = Best{gap, rank, s, mass};
    }
  }
  selection.pool = best.state;
  selection.pool_mass = best.mass;
  return selection;
}

Selection select_op_bha(const Lattice& lattice) {
  if (lattice.all_classified()) {
    throw Error(ErrorCode::InvalidArgument, "no active subjects");
  }
  const int n = lattice.active_count();
  Checklist checklist(n);
  checklist.set(0);  // never a candidate; it may still be marked by others
  TraversalCursor cursor(n);
  Best best;
  Selection selection;
  std::uint64_t rank = 0;
  StateIndex s = 0;
  while (!checklist.full() && cursor.next(s)) {
    ++rank;
    if (checklist.test(s)) continue;
    const double mass = lattice.mass(s);
    checklist.set(s);
    ++selection.evaluated_states;
    const double gap = std::abs(mass - 0.5);
    if (best.improves(gap, rank)) {
      best = Best{gap, rank, s, mass};
    }
    if (mass < 0.5) {
      checklist.set_up_set(s, lattice.top());
    } else if (mass > 0.5) {
      checklist.set_down_set(s);
    }
    // An exact 0.5 proves nothing about neighbors, so it marks nothing.
  }
  selection.pool = best.state;
  selection.pool_mass = best.mass;
  selection.skipped_states = checklist.count() - selection.evaluated_states;
  return selection;
}

std::uint64_t default_chunk_size(int n_active, int exponent_offset) {
  const std::uint64_t states = std::uint64_t{1} << n_active;
  const int exponent = n_active / 2 + exponent_offset;
  if (exponent >= 63) return states;
  return std::min(states, std::uint64_t{1} << exponent);
}

Selection select_op_bha_parallel(const Lattice& lattice,
                                 std::uint64_t chunk_size, int worker_count) {
  if (lattice.all_classified()) {
    throw Error(ErrorCode::InvalidArgument, "no active subjects");
  }
  const int n = lattice.active_count();
  if (chunk_size == 0) chunk_size = default_chunk_size(n);
  const int workers = resolve_worker_count(worker_count);

  Checklist global(n);
  global.set(0);
  TraversalCursor cursor(n);
  std::uint64_t next_rank = 0;

  Best best;
  Selection selection;

  std::vector<StateIndex> chunk;
  std::vector<std::uint64_t> ranks;
  chunk.reserve(chunk_size);
  ranks.reserve(chunk_size);

  while (true) {
    // Stage: list the next unevaluated candidates in traversal order.
    chunk.clear();
    ranks.clear();
    StateIndex s = 0;
    while (chunk.size() < chunk_size && cursor.next(s)) {
      ++next_rank;
      if (global.test(s)) continue;
      chunk.push_back(s);
      ranks.push_back(next_rank);
    }
    if (chunk.empty()) break;

    // Map: contiguous slices, one per worker, each with a private checklist
    // seeded from the stage-start snapshot. Marks do not cross slices until
    // the reduce, so some duplicated evaluation across workers is expected.
    const std::size_t slice_count =
        std::min<std::size_t>(static_cast<std::size_t>(workers), chunk.size());
    struct SliceResult {
      Best best;
      std::uint64_t evaluated = 0;
      Checklist marks;
      explicit SliceResult(int n_active) : marks(n_active) {}
    };
    std::vector<SliceResult> results(slice_count, SliceResult(n));
    const std::size_t per_slice = (chunk.size() + slice_count - 1) / slice_count;

    parallel_for(slice_count, workers, [&](std::size_t slice) {
      const std::size_t begin = slice * per_slice;
      const std::size_t end = std::min(chunk.size(), begin + per_slice);
      SliceResult& r = results[slice];
      Checklist local = global;
      for (std::size_t i = begin; i < end; ++i) {
        const StateIndex state = chunk[i];
        if (local.test(state)) continue;
        const double mass = lattice.mass(state);
        local.set(state);
        ++r.evaluated;
        const double gap = std::abs(mass - 0.5);
        if (r.best.improves(gap, ranks[i])) {
          r.best = Best{gap, ranks[i], state, mass};
        }
        if (mass < 0.5) {
          local.set_up_set(state, lattice.top());
        } else if (mass > 0.5) {
          local.set_down_set(state);
        }
      }
      r.marks = std::move(local);
    });

    // Reduce: OR the checklists, keep the (gap, rank)-lexicographic best.
    for (const SliceResult& r : results) {
      global.merge(r.marks);
      selection.evaluated_states += r.evaluated;
      if (r.evaluated > 0 && best.improves(r.best.gap, r.best.rank)) {
        best = r.best;
      }
    }
  }

  selection.pool = best.state;
  selection.pool_mass = best.mass;
  selection.skipped_states = global.count() - selection.evaluated_states;
  return selection;
}

}  // namespace gt
