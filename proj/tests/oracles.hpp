#pragma once

// Independent reference implementations used to compute expected values.
// Everything here goes through decoded subject sets and full-range scans so
// a bitwise bug in the engine cannot hide in its own oracle.

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <vector>

#include "lattice.hpp"
#include "response.hpp"

namespace oracle {

// Subject ids marked negative by a state, via the engine's public decode.
inline std::set<int> negative_set(const gt::Lattice& lattice, gt::StateIndex s) {
  const auto ids = lattice.decode(s);
  return std::set<int>(ids.begin(), ids.end());
}

inline bool is_subset(const std::set<int>& inner, const std::set<int>& outer) {
  return std::includes(outer.begin(), outer.end(), inner.begin(), inner.end());
}

// Up-set of s by full-range filtering with set inclusion.
inline std::vector<gt::StateIndex> up_set_filter(const gt::Lattice& lattice,
                                                 gt::StateIndex s) {
  const auto base = negative_set(lattice, s);
  std::vector<gt::StateIndex> out;
  for (std::size_t a = 0; a < lattice.size(); ++a) {
    if (is_subset(base, negative_set(lattice, static_cast<gt::StateIndex>(a)))) {
      out.push_back(static_cast<gt::StateIndex>(a));
    }
  }
  return out;
}

inline std::vector<gt::StateIndex> down_set_filter(const gt::Lattice& lattice,
                                                   gt::StateIndex s) {
  const auto base = negative_set(lattice, s);
  std::vector<gt::StateIndex> out;
  for (std::size_t a = 0; a < lattice.size(); ++a) {
    if (is_subset(negative_set(lattice, static_cast<gt::StateIndex>(a)), base)) {
      out.push_back(static_cast<gt::StateIndex>(a));
    }
  }
  return out;
}

inline long double mass_filter(const gt::Lattice& lattice, gt::StateIndex s) {
  long double sum = 0.0L;
  const auto base = negative_set(lattice, s);
  for (std::size_t a = 0; a < lattice.size(); ++a) {
    if (is_subset(base, negative_set(lattice, static_cast<gt::StateIndex>(a)))) {
      sum += lattice.prob(static_cast<gt::StateIndex>(a));
    }
  }
  return sum;
}

// Own likelihood formula computed from subject sets.
inline long double likelihood_negative_sets(const std::set<int>& negatives,
                                            const std::vector<int>& pool_ids,
                                            double sensitivity,
                                            double specificity,
                                            double dilution_exponent) {
  int positives = 0;
  for (int id : pool_ids) {
    if (!negatives.count(id)) ++positives;
  }
  if (positives == 0) return specificity;
  const long double fraction = static_cast<long double>(positives) /
                               static_cast<long double>(pool_ids.size());
  return 1.0L - static_cast<long double>(sensitivity) *
                    std::pow(fraction,
                             static_cast<long double>(dilution_exponent));
}

// Full joint-table Bayes update: posterior[i] over the current lattice for
// one pooled response, computed in long double from first principles.
inline std::vector<long double> bayes_joint_table(
    const gt::Lattice& lattice, const std::vector<int>& pool_ids,
    gt::Response response, const gt::ResponseModel& model) {
  std::vector<long double> posterior(lattice.size());
  long double total = 0.0L;
  for (std::size_t i = 0; i < lattice.size(); ++i) {
    const auto negatives =
        negative_set(lattice, static_cast<gt::StateIndex>(i));
    const long double neg = likelihood_negative_sets(
        negatives, pool_ids, model.sensitivity, model.specificity,
        model.dilution_exponent);
    const long double like =
        (response == gt::Response::Negative) ? neg : 1.0L - neg;
    posterior[i] = static_cast<long double>(lattice.prob(
                       static_cast<gt::StateIndex>(i))) *
                   like;
    total += posterior[i];
  }
  for (auto& p : posterior) p /= total;
  return posterior;
}

// Minimal |mass - 0.5| over every nonempty state, plus all argmin states.
struct BestGap {
  long double gap = 1.0L;
  std::vector<gt::StateIndex> argmin;
};

inline BestGap best_gap_scan(const gt::Lattice& lattice) {
  BestGap best;
  for (std::size_t s = 1; s < lattice.size(); ++s) {
    const long double gap =
        std::fabs(mass_filter(lattice, static_cast<gt::StateIndex>(s)) - 0.5L);
    if (gap < best.gap - 1e-18L) {
      best.gap = gap;
      best.argmin.assign(1, static_cast<gt::StateIndex>(s));
    } else if (gap < best.gap + 1e-18L) {
      best.argmin.push_back(static_cast<gt::StateIndex>(s));
    }
  }
  return best;
}

inline std::vector<gt::SubjectPrior> homogeneous_priors(int n, double risk) {
  std::vector<gt::SubjectPrior> priors;
  for (int i = 0; i < n; ++i) priors.push_back(gt::SubjectPrior{i, risk});
  return priors;
}

inline std::vector<gt::SubjectPrior> random_priors(std::mt19937_64& rng, int n,
                                                   double lo = 0.01,
                                                   double hi = 0.5) {
  std::uniform_real_distribution<double> risk(lo, hi);
  std::vector<gt::SubjectPrior> priors;
  for (int i = 0; i < n; ++i) priors.push_back(gt::SubjectPrior{i, risk(rng)});
  return priors;
}

// Arbitrary positive normalized distribution over 2^n states.
inline gt::Lattice random_posterior(std::mt19937_64& rng, int n) {
  std::uniform_real_distribution<double> mass(0.01, 1.0);
  std::vector<double> probs(std::size_t{1} << n);
  for (auto& p : probs) p = mass(rng);
  return gt::Lattice::with_distribution(homogeneous_priors(n, 0.5),
                                        std::move(probs));
}

// Applies a random but realizable response history: responses are sampled
// from the posterior predictive so zero-likelihood observations never occur.
inline void apply_random_history(std::mt19937_64& rng, gt::Lattice& lattice,
                                 const gt::ResponseModel& model, int steps) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int step = 0; step < steps && !lattice.all_classified(); ++step) {
    std::uniform_int_distribution<gt::StateIndex> pools(
        1, static_cast<gt::StateIndex>(lattice.size() - 1));
    const gt::StateIndex pool = pools(rng);
    const double p_neg = gt::predictive_negative(lattice, pool, model);
    const gt::Response response =
        unit(rng) < p_neg ? gt::Response::Negative : gt::Response::Positive;
    lattice.update_posterior(pool, response, model);
  }
}

}  // namespace oracle
