#pragma once

#include <cstddef>
#include <string>

#include <nlohmann/json.hpp>

#include "balar/labels.hpp"

namespace balar {

/// Loop hyperparameters. JSON keys are the field names verbatim.
struct LoopConfig {
  double alpha = 0.1;
  double beta = 1.0;
  long T = 100;
  long T_ask = 25;
  double lambda = 1.0;
  std::size_t state_cap = 1024;
  std::size_t max_values_per_dim = 4;
  std::size_t max_choices_per_question = 4;
  std::size_t max_new_questions_per_expand = 4;
  std::size_t top_entropy_dims_for_expand = 2;
  std::size_t initial_dims = 5;
  std::size_t initial_questions = 10;
  std::size_t max_concurrency = 8;
  int max_retries = 3;
  LabelMap label_map;

  /// Throws ConfigError when a field is out of range.
  void validate() const;
  /// Starts from the defaults and overrides the keys present. Unknown keys are rejected.
  static LoopConfig from_json(const nlohmann::json& j);
  static LoopConfig merged(LoopConfig base, const nlohmann::json& overrides);
  static LoopConfig load(const std::string& path);
  nlohmann::json to_json() const;
};

}  // namespace balar
