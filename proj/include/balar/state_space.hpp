#pragma once

#include <cstddef>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace balar {

struct DimValue {
  std::string id;
  std::string text;
};

/// One disambiguating axis with a finite, ordered value set.
struct Dimension {
  std::string id;
  std::string name;
  std::vector<DimValue> values;

  std::size_t size() const noexcept { return values.size(); }
  /// Index of the value with this id; throws MismatchError if absent.
  std::size_t value_index(const std::string& value_id) const;
};

struct SpaceLimits {
  std::size_t state_cap = 1024;
  std::size_t max_values_per_dim = 4;
};

/// Value index per dimension, in dimension order.
using Assignment = std::vector<std::size_t>;

/// Ordered product of dimensions addressed row-major: the last dimension has
/// stride 1, so appending a dimension turns flat index i into i * n_new + v.
class StateSpace {
 public:
  /// Validates value counts and id uniqueness against `limits`; throws
  /// ConfigError on violation and StateCapExceeded when the product is too big.
  static std::shared_ptr<const StateSpace> create(std::vector<Dimension> dims, SpaceLimits limits);

  std::size_t total_states() const noexcept { return total_; }
  std::size_t dim_count() const noexcept { return dims_.size(); }
  const std::vector<Dimension>& dims() const noexcept { return dims_; }
  const Dimension& dim(std::size_t index) const { return dims_.at(index); }
  const std::vector<std::size_t>& strides() const noexcept { return strides_; }
  const SpaceLimits& limits() const noexcept { return limits_; }

  /// Throws MismatchError for an unknown id.
  std::size_t dim_index(const std::string& dim_id) const;
  bool has_dim(const std::string& dim_id) const noexcept;

  std::size_t value_of(std::size_t flat, std::size_t dim_index) const noexcept {
    return (flat / strides_[dim_index]) % dims_[dim_index].size();
  }
  std::size_t flat_index(const Assignment& assignment) const;
  Assignment assignment(std::size_t flat) const;

  /// Space with `next` appended; throws StateCapExceeded when over the cap.
  std::shared_ptr<const StateSpace> extended(Dimension next) const;
  /// True when even a binary dimension could not be appended.
  bool at_cap() const noexcept { return total_ * 2 > limits_.state_cap; }

  bool same_shape(const StateSpace& other) const noexcept;

  nlohmann::json to_json() const;

 private:
  StateSpace() = default;

  std::vector<Dimension> dims_;
  std::vector<std::size_t> strides_;
  std::size_t total_ = 1;
  SpaceLimits limits_;
};

using SpacePtr = std::shared_ptr<const StateSpace>;

}  // namespace balar
