#include "balar/belief.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "balar/errors.hpp"

namespace balar {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
}

double log_sum_exp(std::span<const double> x) {
  double hi = kNegInf;
  for (double v : x) hi = std::max(hi, v);
  if (hi == kNegInf) return kNegInf;
  double acc = 0.0;
  for (double v : x) acc += std::exp(v - hi);
  return hi + std::log(acc);
}

Belief Belief::from_log(SpacePtr space, std::vector<double> logp) {
  if (!space) throw ConfigError("belief needs a state space");
  if (logp.size() != space->total_states()) {
    throw ConfigError("belief length " + std::to_string(logp.size()) + " does not match state count " +
                      std::to_string(space->total_states()));
  }
  for (double v : logp) {
    if (std::isnan(v) || v == std::numeric_limits<double>::infinity()) {
      throw ConfigError("belief log-probabilities must be finite or -inf");
    }
  }
  const double z = log_sum_exp(logp);
  if (z == kNegInf) throw ConfigError("belief has no mass");
  for (double& v : logp) {
    if (v != kNegInf) v -= z;
  }
  return Belief(std::move(space), std::move(logp));
}

Belief Belief::from_probs(SpacePtr space, std::span<const double> probs) {
  std::vector<double> logp(probs.size());
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (probs[i] < 0.0) throw ConfigError("negative probability");
    logp[i] = probs[i] > 0.0 ? std::log(probs[i]) : kNegInf;
  }
  return from_log(std::move(space), std::move(logp));
}

Belief Belief::uniform(SpacePtr space) {
  const std::size_t n = space->total_states();
  return from_log(std::move(space), std::vector<double>(n, 0.0));
}

double Belief::prob(std::size_t flat) const { return std::exp(logp_.at(flat)); }

std::vector<double> Belief::probs() const {
  std::vector<double> out(logp_.size());
  std::transform(logp_.begin(), logp_.end(), out.begin(), [](double l) { return std::exp(l); });
  return out;
}

Belief init_belief(std::span<const PriorVector> priors, SpacePtr space) {
  if (!space) throw ConfigError("init_belief needs a state space");
  if (priors.size() != space->dim_count()) {
    throw ConfigError("expected " + std::to_string(space->dim_count()) + " priors, got " +
                      std::to_string(priors.size()));
  }
  std::vector<std::vector<double>> logs(priors.size());
  for (std::size_t j = 0; j < priors.size(); ++j) {
    const auto& d = space->dim(j);
    if (priors[j].dim_id != d.id) {
      throw ConfigError("prior " + std::to_string(j) + " is for '" + priors[j].dim_id + "', expected '" + d.id + "'");
    }
    if (priors[j].probs.size() != d.size()) {
      throw ConfigError("prior for '" + d.id + "' has wrong length");
    }
    for (double p : priors[j].probs) {
      if (!(p >= 0.0)) throw ConfigError("prior for '" + d.id + "' has a negative entry");
      logs[j].push_back(p > 0.0 ? std::log(p) : kNegInf);
    }
  }
  std::vector<double> logp(space->total_states(), 0.0);
  for (std::size_t s = 0; s < logp.size(); ++s) {
    for (std::size_t j = 0; j < logs.size(); ++j) logp[s] += logs[j][space->value_of(s, j)];
  }
  return Belief::from_log(std::move(space), std::move(logp));
}

double entropy(std::span<const double> probs) {
  double h = 0.0;
  for (double p : probs) {
    if (p > 0.0) h -= p * std::log(p);
  }
  return h;
}

double entropy(const Belief& b) {
  double h = 0.0;
  for (double l : b.logp()) {
    if (l != kNegInf) h -= std::exp(l) * l;
  }
  return std::max(h, 0.0);
}

std::vector<double> marginal(const Belief& b, std::size_t dim_index) {
  const auto& space = b.space();
  if (dim_index >= space.dim_count()) throw MismatchError("dimension index out of range");
  std::vector<double> out(space.dim(dim_index).size(), 0.0);
  const auto lp = b.logp();
  for (std::size_t s = 0; s < lp.size(); ++s) out[space.value_of(s, dim_index)] += std::exp(lp[s]);
  return out;
}

std::vector<double> marginal(const Belief& b, const std::string& dim_id) {
  return marginal(b, b.space().dim_index(dim_id));
}

std::size_t map_index(const Belief& b) {
  const auto lp = b.logp();
  // max_element returns the first maximum, which is the lowest flat index.
  return static_cast<std::size_t>(std::max_element(lp.begin(), lp.end()) - lp.begin());
}

Assignment map_state(const Belief& b) { return b.space().assignment(map_index(b)); }

Belief extend_belief(const Belief& b, const Dimension& new_dim, const PriorVector& new_prior) {
  if (new_prior.dim_id != new_dim.id || new_prior.probs.size() != new_dim.size()) {
    throw ConfigError("prior does not match new dimension '" + new_dim.id + "'");
  }
  auto space = b.space().extended(new_dim);
  const std::size_t n = new_dim.size();
  std::vector<double> new_log(n);
  for (std::size_t v = 0; v < n; ++v) {
    new_log[v] = new_prior.probs[v] > 0.0 ? std::log(new_prior.probs[v]) : kNegInf;
  }
  const double z = log_sum_exp(new_log);
  for (double& l : new_log) {
    if (l != kNegInf) l -= z;
  }
  std::vector<double> logp(space->total_states());
  const auto old = b.logp();
  for (std::size_t i = 0; i < old.size(); ++i) {
    for (std::size_t v = 0; v < n; ++v) logp[i * n + v] = old[i] + new_log[v];
  }
  return Belief::from_log(std::move(space), std::move(logp));
}

}  // namespace balar
