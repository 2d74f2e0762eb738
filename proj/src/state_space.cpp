#include "balar/state_space.hpp"

#include <set>

#include "balar/errors.hpp"

namespace balar {

std::size_t Dimension::value_index(const std::string& value_id) const {
  for (std::size_t k = 0; k < values.size(); ++k) {
    if (values[k].id == value_id) return k;
  }
  throw MismatchError("dimension '" + id + "' has no value '" + value_id + "'");
}

namespace {

void check_dimension(const Dimension& d, const SpaceLimits& limits) {
  if (d.id.empty()) {
    throw ConfigError("dimension id must be non-empty");
  }
  if (d.values.size() < 2 || d.values.size() > limits.max_values_per_dim) {
    throw ConfigError("dimension '" + d.id + "' has " + std::to_string(d.values.size()) +
                      " values; allowed range is [2, " + std::to_string(limits.max_values_per_dim) + "]");
  }
  std::set<std::string> seen;
  for (const auto& v : d.values) {
    if (!seen.insert(v.id).second) {
      throw ConfigError("duplicate value id '" + v.id + "' in dimension '" + d.id + "'");
    }
  }
}

}  // namespace

std::shared_ptr<const StateSpace> StateSpace::create(std::vector<Dimension> dims, SpaceLimits limits) {
  std::set<std::string> ids;
  std::size_t total = 1;
  for (const auto& d : dims) {
    check_dimension(d, limits);
    if (!ids.insert(d.id).second) {
      throw ConfigError("duplicate dimension id '" + d.id + "'");
    }
    total *= d.values.size();
    if (total > limits.state_cap) {
      throw StateCapExceeded("state space of " + std::to_string(total) + "+ states exceeds cap " +
                             std::to_string(limits.state_cap));
    }
  }

  auto space = std::shared_ptr<StateSpace>(new StateSpace());
  space->limits_ = limits;
  space->total_ = total;
  space->strides_.assign(dims.size(), 1);
  for (std::size_t j = dims.size(); j-- > 1;) {
    space->strides_[j - 1] = space->strides_[j] * dims[j].values.size();
  }
  space->dims_ = std::move(dims);
  return space;
}

std::size_t StateSpace::dim_index(const std::string& dim_id) const {
  for (std::size_t j = 0; j < dims_.size(); ++j) {
    if (dims_[j].id == dim_id) return j;
  }
  throw MismatchError("unknown dimension '" + dim_id + "'");
}

bool StateSpace::has_dim(const std::string& dim_id) const noexcept {
  for (const auto& d : dims_) {
    if (d.id == dim_id) return true;
  }
  return false;
}

std::size_t StateSpace::flat_index(const Assignment& assignment) const {
  if (assignment.size() != dims_.size()) {
    throw MismatchError("assignment has wrong number of dimensions");
  }
  std::size_t flat = 0;
  for (std::size_t j = 0; j < dims_.size(); ++j) {
    if (assignment[j] >= dims_[j].size()) {
      throw MismatchError("assignment value out of range for dimension '" + dims_[j].id + "'");
    }
    flat += assignment[j] * strides_[j];
  }
  return flat;
}

Assignment StateSpace::assignment(std::size_t flat) const {
  Assignment a(dims_.size());
  for (std::size_t j = 0; j < dims_.size(); ++j) a[j] = value_of(flat, j);
  return a;
}

std::shared_ptr<const StateSpace> StateSpace::extended(Dimension next) const {
  auto dims = dims_;
  dims.push_back(std::move(next));
  return create(std::move(dims), limits_);
}

bool StateSpace::same_shape(const StateSpace& other) const noexcept {
  if (dims_.size() != other.dims_.size()) return false;
  for (std::size_t j = 0; j < dims_.size(); ++j) {
    if (dims_[j].id != other.dims_[j].id || dims_[j].size() != other.dims_[j].size()) return false;
  }
  return true;
}

nlohmann::json StateSpace::to_json() const {
  nlohmann::json dims = nlohmann::json::array();
  for (const auto& d : dims_) {
    nlohmann::json values = nlohmann::json::array();
    for (const auto& v : d.values) values.push_back({{"id", v.id}, {"text", v.text}});
    dims.push_back({{"id", d.id}, {"name", d.name}, {"values", std::move(values)}});
  }
  return {{"dimensions", std::move(dims)}, {"total_states", total_}};
}

}  // namespace balar
