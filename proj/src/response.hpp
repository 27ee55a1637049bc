#pragma once

// Probabilistic test-response model with a power-law dilution family.
//
// For a pool of size m with k truly positive members:
//   P(negative | k = 0) = specificity
//   P(negative | k >= 1) = 1 - sensitivity * (k/m)^delta
// delta = 0 collapses to the classical noisy OR-of-pool model; the noiseless
// default (sensitivity = specificity = 1, delta = 0) makes pooled responses
// deterministic given the state.

#include "lattice.hpp"

namespace gt {

struct ResponseModel {
  double sensitivity = 1.0;
  double specificity = 1.0;
  double dilution_exponent = 0.0;

  void validate() const;

  // Likelihood of a negative response given the positive count in the pool.
  double negative_given_counts(int positives_in_pool, int pool_size) const;

  // Likelihood of a negative response for a pool tested under a state; both
  // must live in the same bit space.
  double likelihood_negative(StateIndex state, StateIndex pool) const;

  bool operator==(const ResponseModel&) const = default;
};

// Posterior predictive probability of a negative response for the pool.
double predictive_negative(const Lattice& lattice, StateIndex pool,
                           const ResponseModel& model);

inline double predictive_positive(const Lattice& lattice, StateIndex pool,
                                  const ResponseModel& model) {
  return 1.0 - predictive_negative(lattice, pool, model);
}

}  // namespace gt
