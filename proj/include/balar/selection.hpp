#pragma once

#include <compare>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "balar/likelihood.hpp"

namespace balar {

struct PairId {
  std::string question_id;
  std::string user_id;

  auto operator<=>(const PairId&) const = default;
};

using AskedSet = std::set<PairId>;

struct RankedPair {
  PairId pair;
  double mi = 0.0;
  /// Position of the kernel in the bank; the tie-break key.
  std::size_t order = 0;
};

struct MiRanking {
  std::vector<RankedPair> entries;
  long computed_at_round = 0;
};

/// Predictive masses below this are treated as zero.
inline constexpr double kNegligibleMass = 1e-300;

/// p(y) = sum_theta pi(theta) K(theta, y).
std::vector<double> predictive(const Belief& b, const StateKernel& k);

/// Hard posterior pi(theta) K(theta, y) / p(y). Throws DegenerateObservation when p(y) = 0.
Belief posterior_given(const Belief& b, const StateKernel& k, std::size_t choice);

/// I(theta; Y) in nats, evaluated as H(Y) - sum_theta pi(theta) H(K(theta, .)).
double mutual_information(const Belief& b, const StateKernel& k);

/// I(theta; Y) from its definition H(pi) - sum_y p(y) H(pi^y); slower, used as a cross-check.
double mutual_information_by_posteriors(const Belief& b, const StateKernel& k);

/// MI of every unasked pair, sorted by MI descending, then bank order.
/// `kernels` is the bank in creation order (question order, then user order).
MiRanking rank_pairs(const Belief& b, std::span<const StateKernel> kernels, const AskedSet& asked,
                     long round = 0);

/// Highest-MI unasked pair, or nullopt when every pair has been asked.
std::optional<RankedPair> select_pair(const Belief& b, std::span<const StateKernel> kernels, const AskedSet& asked);

}  // namespace balar
