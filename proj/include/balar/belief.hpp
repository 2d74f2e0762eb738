#pragma once

#include <span>
#include <string>
#include <vector>

#include "balar/state_space.hpp"

namespace balar {

struct PriorVector {
  std::string dim_id;
  std::vector<double> probs;
};

/// Posterior over a StateSpace, stored as normalized log-probabilities.
/// Zero-mass states hold -infinity. Immutable once constructed.
class Belief {
 public:
  /// Normalizes with log-sum-exp. Throws ConfigError on NaN, +inf, a length
  /// mismatch, or when every entry is -inf.
  static Belief from_log(SpacePtr space, std::vector<double> logp);
  static Belief from_probs(SpacePtr space, std::span<const double> probs);
  static Belief uniform(SpacePtr space);

  const StateSpace& space() const noexcept { return *space_; }
  const SpacePtr& space_ptr() const noexcept { return space_; }
  std::size_t size() const noexcept { return logp_.size(); }

  std::span<const double> logp() const noexcept { return logp_; }
  double prob(std::size_t flat) const;
  std::vector<double> probs() const;

 private:
  Belief(SpacePtr space, std::vector<double> logp) : space_(std::move(space)), logp_(std::move(logp)) {}

  SpacePtr space_;
  std::vector<double> logp_;
};

/// Product prior: log pi(theta) = sum_j log pi_j(theta_j). Throws ConfigError
/// when the priors do not line up one-to-one with the space's dimensions.
Belief init_belief(std::span<const PriorVector> priors, SpacePtr space);

/// Shannon entropy in nats, with 0 log 0 = 0.
double entropy(const Belief& b);
double entropy(std::span<const double> probs);

std::vector<double> marginal(const Belief& b, std::size_t dim_index);
std::vector<double> marginal(const Belief& b, const std::string& dim_id);

/// Argmax state; ties go to the lowest flat index.
Assignment map_state(const Belief& b);
std::size_t map_index(const Belief& b);

/// Outer product with a new independent dimension. Throws StateCapExceeded
/// when the extended space would exceed the cap of the current space.
Belief extend_belief(const Belief& b, const Dimension& new_dim, const PriorVector& new_prior);

/// log(sum(exp(x))) over finite-or-(-inf) entries; -inf for an all -inf input.
double log_sum_exp(std::span<const double> x);

}  // namespace balar
