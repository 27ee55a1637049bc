#include "response.hpp"

#include <bit>
#include <cmath>

namespace gt {

void ResponseModel::validate() const {
  if (!(sensitivity > 0.0 && sensitivity <= 1.0) ||
      !(specificity > 0.0 && specificity <= 1.0)) {
    throw Error(ErrorCode::InvalidArgument,
                "sensitivity and specificity must lie in (0, 1]");
  }
  if (!(dilution_exponent >= 0.0) || !std::isfinite(dilution_exponent)) {
    throw Error(ErrorCode::InvalidArgument,
                "dilution exponent must be nonnegative");
  }
}

double ResponseModel::negative_given_counts(int positives_in_pool,
                                            int pool_size) const {
  if (pool_size < 1) {
    throw Error(ErrorCode::InvalidArgument, "empty pool");
  }
  if (positives_in_pool == 0) return specificity;
  const double fraction =
      static_cast<double>(positives_in_pool) / static_cast<double>(pool_size);
  return 1.0 - sensitivity * std::pow(fraction, dilution_exponent);
}

double ResponseModel::likelihood_negative(StateIndex state,
                                          StateIndex pool) const {
  if (pool == 0) {
    throw Error(ErrorCode::InvalidArgument, "empty pool");
  }
  // Pool members whose bit is clear in the state are positive.
  const int positives = std::popcount(pool & ~state);
  return negative_given_counts(positives, std::popcount(pool));
}

double predictive_negative(const Lattice& lattice, StateIndex pool,
                           const ResponseModel& model) {
  if (pool == 0 || pool > lattice.top()) {
    throw Error(ErrorCode::InvalidArgument,
                "pool must be a nonempty state of the lattice");
  }
  const int pool_size = std::popcount(pool);
  std::vector<double> negative_likelihood(pool_size + 1);
  for (int k = 0; k <= pool_size; ++k) {
    negative_likelihood[k] = model.negative_given_counts(k, pool_size);
  }
  const auto probs = lattice.probs();
  double sum = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const int k = std::popcount(pool & ~static_cast<StateIndex>(i));
    sum += probs[i] * negative_likelihood[k];
  }
  return sum;
}

}  // namespace gt
