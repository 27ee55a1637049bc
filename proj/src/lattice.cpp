#include "lattice.hpp"

#include <algorithm>
#include <bit>
#include <cmath>

#include "response.hpp"

namespace gt {

namespace {

// Compensated sum; the array can hold up to 2^26 terms and normalization
// feeds directly into 1e-12 scale comparisons.
double kahan_total(std::span<const double> values) {
  double sum = 0.0;
  double carry = 0.0;
  for (double v : values) {
    double y = v - carry;
    double t = sum + y;
    carry = (t - sum) - y;
    sum = t;
  }
  return sum;
}

}  // namespace

void Thresholds::validate() const {
  if (!(upper_eps > 0.0 && upper_eps < 0.5) ||
      !(lower_eps > 0.0 && lower_eps < 0.5)) {
    throw Error(ErrorCode::InvalidArgument,
                "classification thresholds must lie in (0, 0.5)");
  }
}

Lattice Lattice::build(const std::vector<SubjectPrior>& priors) {
  const int n = static_cast<int>(priors.size());
  if (n < 1 || n > kMaxSubjects) {
    throw Error(ErrorCode::InvalidArgument, "subject count unsupported");
  }
  for (const auto& p : priors) {
    if (!(p.risk > 0.0 && p.risk < 1.0) || !std::isfinite(p.risk)) {
      throw Error(ErrorCode::InvalidArgument, "invalid prior");
    }
  }
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      if (priors[i].subject_id == priors[j].subject_id) {
        throw Error(ErrorCode::InvalidArgument, "duplicate subject id");
      }
    }
  }

  Lattice lattice;
  lattice.priors_ = priors;
  lattice.classifications_.assign(priors.size(), Classification{});
  lattice.bit_to_subject_.resize(priors.size());
  for (int i = 0; i < n; ++i) {
    lattice.bit_to_subject_[n - 1 - i] = priors[i].subject_id;
  }

  // Grow the distribution one bit at a time: each step splits every partial
  // state into (bit clear -> positive -> risk) and (bit set -> negative).
  lattice.probs_.assign(std::size_t{1} << n, 0.0);
  lattice.probs_[0] = 1.0;
  for (int bit = 0; bit < n; ++bit) {
    const double risk = priors[n - 1 - bit].risk;
    const std::size_t half = std::size_t{1} << bit;
    for (std::size_t t = 0; t < half; ++t) {
      const double base = lattice.probs_[t];
      lattice.probs_[t] = base * risk;
      lattice.probs_[t | half] = base * (1.0 - risk);
    }
  }
  lattice.normalize(ErrorCode::Internal, "prior mass vanished");
  return lattice;
}

Lattice Lattice::with_distribution(const std::vector<SubjectPrior>& priors,
                                   std::vector<double> probs) {
  Lattice lattice = build(priors);
  if (probs.size() != lattice.probs_.size()) {
    throw Error(ErrorCode::InvalidArgument,
                "distribution length must be 2^n");
  }
  for (double p : probs) {
    if (!(p >= 0.0) || !std::isfinite(p)) {
      throw Error(ErrorCode::InvalidArgument,
                  "distribution entries must be nonnegative");
    }
  }
  lattice.probs_ = std::move(probs);
  lattice.normalize(ErrorCode::InvalidArgument, "distribution mass vanished");
  return lattice;
}

Lattice::Lattice(const Lattice& other)
    : probs_(other.probs_),
      bit_to_subject_(other.bit_to_subject_),
      priors_(other.priors_),
      classifications_(other.classifications_),
      prob_reads_(other.prob_reads_.load(std::memory_order_relaxed)) {}

Lattice& Lattice::operator=(const Lattice& other) {
  if (this != &other) {
    probs_ = other.probs_;
    bit_to_subject_ = other.bit_to_subject_;
    priors_ = other.priors_;
    classifications_ = other.classifications_;
    prob_reads_.store(other.prob_reads_.load(std::memory_order_relaxed),
                      std::memory_order_relaxed);
  }
  return *this;
}

const Classification& Lattice::classification(int subject_id) const {
  for (std::size_t i = 0; i < priors_.size(); ++i) {
    if (priors_[i].subject_id == subject_id) return classifications_[i];
  }
  throw Error(ErrorCode::InvalidArgument, "unknown subject id");
}

int Lattice::bit_of_subject(int subject_id) const {
  for (int b = 0; b < active_count(); ++b) {
    if (bit_to_subject_[b] == subject_id) return b;
  }
  return -1;
}

StateIndex Lattice::encode(std::span<const int> negative_subjects) const {
  StateIndex state = 0;
  for (int id : negative_subjects) {
    const int bit = bit_of_subject(id);
    if (bit < 0) {
      throw Error(ErrorCode::InactiveSubject,
                  "inactive subject " + std::to_string(id));
    }
    state |= StateIndex{1} << bit;
  }
  return state;
}

std::vector<int> Lattice::decode(StateIndex s) const {
  std::vector<int> ids;
  ids.reserve(static_cast<std::size_t>(std::popcount(s)));
  // High bit first, so ids come out in input order.
  for (int b = active_count() - 1; b >= 0; --b) {
    if (s & (StateIndex{1} << b)) ids.push_back(bit_to_subject_[b]);
  }
  return ids;
}

std::vector<StateIndex> Lattice::up_set(StateIndex s) const {
  // Absent bits, highest first; counter bit j selects absent_bits[j].
  std::vector<StateIndex> absent_bits;
  for (int b = active_count() - 1; b >= 0; --b) {
    const StateIndex bit = StateIndex{1} << b;
    if (!(s & bit)) absent_bits.push_back(bit);
  }
  const int k = static_cast<int>(absent_bits.size());
  std::vector<StateIndex> out;
  out.reserve(std::size_t{1} << k);
  for (StateIndex counter = 0; counter < (StateIndex{1} << k); ++counter) {
    StateIndex state = s;
    for (int j = 0; j < k; ++j) {
      if (counter & (StateIndex{1} << j)) state += absent_bits[j];
    }
    out.push_back(state);
  }
  return out;
}

std::vector<StateIndex> Lattice::down_set(StateIndex s) const {
  std::vector<StateIndex> present_bits;
  for (int b = active_count() - 1; b >= 0; --b) {
    const StateIndex bit = StateIndex{1} << b;
    if (s & bit) present_bits.push_back(bit);
  }
  const int m = static_cast<int>(present_bits.size());
  std::vector<StateIndex> out;
  out.reserve(std::size_t{1} << m);
  for (StateIndex counter = 0; counter < (StateIndex{1} << m); ++counter) {
    StateIndex state = s;
    for (int j = 0; j < m; ++j) {
      if (counter & (StateIndex{1} << j)) state -= present_bits[j];
    }
    out.push_back(state);
  }
  return out;
}

double Lattice::mass(StateIndex s) const {
  const StateIndex absent = top() & ~s;
  double sum = 0.0;
  std::uint64_t reads = 0;
  StateIndex t = absent;
  while (true) {
    sum += probs_[s | t];
    ++reads;
    if (t == 0) break;
    t = (t - 1) & absent;  // next submask of the absent bits
  }
  prob_reads_.fetch_add(reads, std::memory_order_relaxed);
  return sum;
}

double Lattice::subject_marginal(int subject_id) const {
  const int bit = bit_of_subject(subject_id);
  if (bit < 0) {
    throw Error(ErrorCode::InactiveSubject,
                "inactive subject " + std::to_string(subject_id));
  }
  return mass(StateIndex{1} << bit);
}

void Lattice::update_posterior(StateIndex pool, Response response,
                               const ResponseModel& model) {
  if (pool == 0 || pool > top()) {
    throw Error(ErrorCode::InvalidArgument,
                "pool must be a nonempty state of the lattice");
  }
  const int pool_size = std::popcount(pool);
  // The likelihood depends on the state only through how many pool members
  // it marks positive, so precompute one factor per count.
  std::vector<double> negative_likelihood(pool_size + 1);
  for (int k = 0; k <= pool_size; ++k) {
    negative_likelihood[k] = model.negative_given_counts(k, pool_size);
  }
  for (std::size_t i = 0; i < probs_.size(); ++i) {
    const int k = std::popcount(pool & ~static_cast<StateIndex>(i));
    const double neg = negative_likelihood[k];
    probs_[i] *= (response == Response::Negative) ? neg : 1.0 - neg;
  }
  normalize(ErrorCode::ImpossibleResponse, "impossible response");
}

std::vector<CommitEvent> Lattice::classify_and_shrink(
    const Thresholds& thresholds, int stage) {
  thresholds.validate();
  std::vector<CommitEvent> commits;
  bool committed = true;
  while (committed && !bit_to_subject_.empty()) {
    committed = false;
    for (int b = 0; b < active_count(); ++b) {
      // Both halves summed directly: the residual of a certain call must
      // come out as an exact zero, which 1 - marginal cannot deliver.
      const StateIndex bit = StateIndex{1} << b;
      double negative_mass = 0.0;
      double positive_mass = 0.0;
      for (std::size_t i = 0; i < probs_.size(); ++i) {
        if (i & bit) {
          negative_mass += probs_[i];
        } else {
          positive_mass += probs_[i];
        }
      }
      Decision decision = Decision::Unclassified;
      double residual = 0.0;
      if (negative_mass >= 1.0 - thresholds.upper_eps) {
        decision = Decision::Negative;
        residual = positive_mass;
      } else if (negative_mass <= thresholds.lower_eps) {
        decision = Decision::Positive;
        residual = negative_mass;
      }
      if (decision == Decision::Unclassified) continue;

      const int id = bit_to_subject_[b];
      for (std::size_t i = 0; i < priors_.size(); ++i) {
        if (priors_[i].subject_id == id) {
          classifications_[i] = Classification{decision, residual, stage};
          break;
        }
      }
      commits.push_back(CommitEvent{id, decision, residual});
      remove_bit(b);
      committed = true;
      break;  // rescan from the lowest bit of the shrunken lattice
    }
  }
  return commits;
}

void Lattice::marginalize_subject(int subject_id) {
  const int bit = bit_of_subject(subject_id);
  if (bit < 0) {
    throw Error(ErrorCode::InactiveSubject,
                "inactive subject " + std::to_string(subject_id));
  }
  remove_bit(bit);
}

void Lattice::remove_bit(int bit) {
  const std::size_t new_size = probs_.size() >> 1;
  const std::size_t low_mask = (std::size_t{1} << bit) - 1;
  const std::size_t bit_value = std::size_t{1} << bit;
  std::vector<double> folded(new_size);
  for (std::size_t t = 0; t < new_size; ++t) {
    const std::size_t base = ((t >> bit) << (bit + 1)) | (t & low_mask);
    folded[t] = probs_[base] + probs_[base | bit_value];
  }
  probs_ = std::move(folded);
  bit_to_subject_.erase(bit_to_subject_.begin() + bit);
  normalize(ErrorCode::Internal, "mass vanished during shrink");
}

void Lattice::normalize(ErrorCode underflow_code,
                        const char* underflow_message) {
  const double total = kahan_total(probs_);
  if (!(total >= 1e-300)) {
    throw Error(underflow_code, underflow_message);
  }
  const double inv = 1.0 / total;
  for (double& p : probs_) p *= inv;
}

}  // namespace gt
