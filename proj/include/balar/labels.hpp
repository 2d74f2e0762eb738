#pragma once

#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

namespace balar {

/// Qualitative label vocabulary with its label-to-weight map.
///
/// Weights are unnormalized masses in (0, 1]; every conversion to probabilities
/// normalizes a vector of looked-up weights, so only ratios matter.
class LabelMap {
 public:
  /// likely -> 0.8, neutral -> 0.5, unlikely -> 0.2
  LabelMap();
  explicit LabelMap(std::vector<std::pair<std::string, double>> entries);

  static LabelMap from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;

  /// Throws ProtocolError naming the label when it is not in the vocabulary.
  double weight(std::string_view label) const;
  bool contains(std::string_view label) const noexcept;

  std::vector<std::string> labels() const;
  const std::vector<std::pair<std::string, double>>& entries() const noexcept { return entries_; }

  /// Same labels with every weight multiplied by `factor`; the result may
  /// carry weights above 1, which is fine for normalization-only use.
  LabelMap scaled(double factor) const;

 private:
  std::vector<std::pair<std::string, double>> entries_;
};

/// phi(l_i) / sum_k phi(l_k) for each label.
std::vector<double> labels_to_distribution(std::span<const std::string> labels, const LabelMap& map);

}  // namespace balar
