#pragma once

// Dense lattice model for Bayesian group testing.
//
// A classification state over n subjects is encoded as an n-bit integer whose
// set bits mark the subjects hypothesized NEGATIVE. The posterior over all 2^n
// states lives in a self-indexed array: probs[s] is the probability of state s.
// The top state (all bits set) means "everyone negative", the bottom state 0
// means "everyone positive". Containment of states (a >= b in the subset
// order) reduces to the bitwise test (a & b) == b.

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace gt {

using StateIndex = std::uint32_t;

// 2^26 doubles is half a GiB; anything larger is out of desk scale.
inline constexpr int kMaxSubjects = 26;

enum class Response { Negative, Positive };

enum class Decision { Unclassified, Negative, Positive };

enum class ErrorCode {
  InvalidArgument,
  InactiveSubject,
  ImpossibleResponse,
  Config,
  ScaleGuard,
  Internal,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

struct SubjectPrior {
  int subject_id = 0;
  double risk = 0.0;  // prior probability of being positive, open interval (0,1)

  bool operator==(const SubjectPrior&) const = default;
};

struct Thresholds {
  // Commit Negative once P(subject negative) >= 1 - upper_eps,
  // commit Positive once P(subject negative) <= lower_eps.
  double upper_eps = 0.001;
  double lower_eps = 0.001;

  void validate() const;
  bool operator==(const Thresholds&) const = default;
};

struct Classification {
  Decision decision = Decision::Unclassified;
  double residual_error = 0.0;  // commit-time probability the call is wrong
  int stage = -1;               // stage counter supplied by the caller at commit
};

struct CommitEvent {
  int subject_id = 0;
  Decision decision = Decision::Unclassified;
  double residual_error = 0.0;
};

struct ResponseModel;

// Value type: copy to branch, mutate only with exclusive access. All queries
// are const and safe to run concurrently.
class Lattice {
 public:
  // probs[s] = product over subjects of (risk if the subject's bit is clear
  // in s, else 1 - risk). Subject at input position i owns bit n-1-i, so the
  // first subject is the highest bit.
  static Lattice build(const std::vector<SubjectPrior>& priors);

  // Same bookkeeping as build() but around an explicit distribution, e.g. a
  // posterior resumed from elsewhere. probs must have length 2^|priors|;
  // entries must be nonnegative with positive total (renormalized here).
  static Lattice with_distribution(const std::vector<SubjectPrior>& priors,
                                   std::vector<double> probs);

  int active_count() const { return static_cast<int>(bit_to_subject_.size()); }
  bool all_classified() const { return bit_to_subject_.empty(); }
  std::size_t size() const { return probs_.size(); }
  StateIndex top() const { return static_cast<StateIndex>(probs_.size() - 1); }

  double prob(StateIndex s) const { return probs_[s]; }
  std::span<const double> probs() const { return probs_; }

  // Active-bit bookkeeping: bit position -> original subject id.
  const std::vector<int>& bit_to_subject() const { return bit_to_subject_; }
  const std::vector<SubjectPrior>& priors() const { return priors_; }
  const Classification& classification(int subject_id) const;
  int bit_of_subject(int subject_id) const;  // -1 when not active

  StateIndex encode(std::span<const int> negative_subjects) const;
  std::vector<int> decode(StateIndex s) const;

  // a contains b: every negative of b is negative in a.
  static bool contains(StateIndex a, StateIndex b) { return (a & b) == b; }

  // All states containing s, generated by adding subset sums of the absent
  // bits (2^k states for k absent bits, never a full scan). The counter runs
  // ascending with the highest absent bit on counter bit 0.
  std::vector<StateIndex> up_set(StateIndex s) const;
  // All states contained in s: subset sums of the present bits are removed.
  std::vector<StateIndex> down_set(StateIndex s) const;

  // Posterior mass of the up-set of s; reads exactly 2^(n - popcount(s))
  // array entries, tallied in the read counter.
  double mass(StateIndex s) const;

  // P(subject negative | data) == mass of the subject's singleton state.
  double subject_marginal(int subject_id) const;

  // Bayes step for one observed pool response; renormalizes. Throws
  // ErrorCode::ImpossibleResponse when the observation has zero likelihood
  // under every state.
  void update_posterior(StateIndex pool, Response response,
                        const ResponseModel& model);

  // Repeatedly commits the lowest-bit subject whose marginal crosses a
  // threshold and folds its bit out of the array (halving it), until no
  // subject qualifies. Marginals of the remaining subjects are unchanged.
  std::vector<CommitEvent> classify_and_shrink(const Thresholds& thresholds,
                                               int stage = 0);

  // Sums a subject's bit out of the distribution without classifying it,
  // halving the array. Marginals of the remaining subjects are unchanged.
  void marginalize_subject(int subject_id);

  // Instrumentation: total probability-array reads performed by mass().
  std::uint64_t prob_reads() const {
    return prob_reads_.load(std::memory_order_relaxed);
  }
  void reset_prob_reads() const {
    prob_reads_.store(0, std::memory_order_relaxed);
  }

  Lattice(const Lattice& other);
  Lattice& operator=(const Lattice& other);
  Lattice(Lattice&&) noexcept = default;
  Lattice& operator=(Lattice&&) noexcept = default;

 private:
  Lattice() = default;

  void normalize(ErrorCode underflow_code, const char* underflow_message);
  void remove_bit(int bit);

  std::vector<double> probs_;
  std::vector<int> bit_to_subject_;
  std::vector<SubjectPrior> priors_;  // input order, also after shrinking
  std::vector<Classification> classifications_;  // parallel to priors_
  mutable std::atomic<std::uint64_t> prob_reads_{0};
};

}  // namespace gt
