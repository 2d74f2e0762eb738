#include "balar/selection.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "balar/errors.hpp"

namespace balar {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void check_space(const Belief& b, const StateKernel& k) {
  if (!b.space().same_shape(k.space())) {
    throw MismatchError("kernel (" + k.question_id() + ", " + k.user_id() + ") is over a different state space");
  }
}

}  // namespace

std::vector<double> predictive(const Belief& b, const StateKernel& k) {
  check_space(b, k);
  std::vector<double> py(k.num_choices(), 0.0);
  const auto lp = b.logp();
  for (std::size_t s = 0; s < lp.size(); ++s) {
    if (lp[s] == kNegInf) continue;
    const double w = std::exp(lp[s]);
    const auto row = k.row(s);
    for (std::size_t y = 0; y < row.size(); ++y) py[y] += w * row[y];
  }
  return py;
}

Belief posterior_given(const Belief& b, const StateKernel& k, std::size_t choice) {
  check_space(b, k);
  if (choice >= k.num_choices()) throw MismatchError("choice index out of range");
  const auto py = predictive(b, k);
  if (!(py[choice] > kNegligibleMass)) {
    throw DegenerateObservation("choice " + std::to_string(choice) + " has zero predictive mass");
  }
  const auto lp = b.logp();
  std::vector<double> post(lp.size());
  for (std::size_t s = 0; s < lp.size(); ++s) {
    const double kv = k.at(s, choice);
    post[s] = (kv > 0.0 && lp[s] != kNegInf) ? lp[s] + std::log(kv) : kNegInf;
  }
  return Belief::from_log(b.space_ptr(), std::move(post));
}

double mutual_information(const Belief& b, const StateKernel& k) {
  check_space(b, k);
  const auto lp = b.logp();
  std::vector<double> py(k.num_choices(), 0.0);
  double cond = 0.0;  // sum_theta pi(theta) H(Y | theta)
  for (std::size_t s = 0; s < lp.size(); ++s) {
    if (lp[s] == kNegInf) continue;
    const double w = std::exp(lp[s]);
    const auto row = k.row(s);
    double h = 0.0;
    for (std::size_t y = 0; y < row.size(); ++y) {
      py[y] += w * row[y];
      if (row[y] > 0.0) h -= row[y] * std::log(row[y]);
    }
    cond += w * h;
  }
  double hy = 0.0;
  for (double p : py) {
    if (p > kNegligibleMass) hy -= p * std::log(p);
  }
  return std::max(0.0, hy - cond);
}

double mutual_information_by_posteriors(const Belief& b, const StateKernel& k) {
  const auto py = predictive(b, k);
  double expected = 0.0;
  for (std::size_t y = 0; y < py.size(); ++y) {
    if (py[y] > kNegligibleMass) expected += py[y] * entropy(posterior_given(b, k, y));
  }
  return entropy(b) - expected;
}

MiRanking rank_pairs(const Belief& b, std::span<const StateKernel> kernels, const AskedSet& asked, long round) {
  MiRanking ranking;
  ranking.computed_at_round = round;
  for (std::size_t i = 0; i < kernels.size(); ++i) {
    PairId id{kernels[i].question_id(), kernels[i].user_id()};
    if (asked.contains(id)) continue;
    ranking.entries.push_back({std::move(id), mutual_information(b, kernels[i]), i});
  }
  std::stable_sort(ranking.entries.begin(), ranking.entries.end(),
                   [](const RankedPair& a, const RankedPair& c) { return a.mi > c.mi; });
  return ranking;
}

std::optional<RankedPair> select_pair(const Belief& b, std::span<const StateKernel> kernels, const AskedSet& asked) {
  std::optional<RankedPair> best;
  for (std::size_t i = 0; i < kernels.size(); ++i) {
    PairId id{kernels[i].question_id(), kernels[i].user_id()};
    if (asked.contains(id)) continue;
    const double mi = mutual_information(b, kernels[i]);
    if (!best || mi > best->mi) best = RankedPair{std::move(id), mi, i};
  }
  return best;
}

}  // namespace balar
