#include "balar/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "balar/errors.hpp"

namespace balar {

using nlohmann::json;

void LoopConfig::validate() const {
  if (!(alpha >= 0.0 && alpha < 1.0)) throw ConfigError("alpha must lie in [0, 1)");
  if (!(beta > 0.0 && beta <= 1.0)) throw ConfigError("beta must lie in (0, 1]");
  if (!(lambda > 0.0) || !std::isfinite(lambda)) throw ConfigError("lambda must be positive");
  if (T < 0 || T_ask < 0) throw ConfigError("T and T_ask must be non-negative");
  if (T_ask > T) throw ConfigError("T_ask must not exceed T");
  if (state_cap < 2) throw ConfigError("state_cap must be at least 2");
  if (max_values_per_dim < 2) throw ConfigError("max_values_per_dim must be at least 2");
  if (max_choices_per_question < 2) throw ConfigError("max_choices_per_question must be at least 2");
  if (max_concurrency < 1) throw ConfigError("max_concurrency must be at least 1");
  if (max_retries < 0) throw ConfigError("max_retries must be non-negative");
}

namespace {

template <class T>
void read(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string("config key '") + key + "' has the wrong type");
  }
}

void read_size(const json& j, const char* key, std::size_t& out) {
  if (!j.contains(key)) return;
  const auto& v = j.at(key);
  if (!v.is_number_integer() || v.get<long long>() < 0) {
    throw ConfigError(std::string("config key '") + key + "' must be a non-negative integer");
  }
  out = v.get<std::size_t>();
}

}  // namespace

LoopConfig LoopConfig::merged(LoopConfig c, const json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  static const std::set<std::string> known = {
      "alpha",         "beta",          "T",
      "T_ask",         "lambda",        "state_cap",
      "max_values_per_dim", "max_choices_per_question", "max_new_questions_per_expand",
      "top_entropy_dims_for_expand", "initial_dims", "initial_questions",
      "max_concurrency", "max_retries", "label_map"};
  for (const auto& [key, _] : j.items()) {
    if (!known.count(key)) throw ConfigError("unknown config key '" + key + "'");
  }
  read(j, "alpha", c.alpha);
  read(j, "beta", c.beta);
  read(j, "T", c.T);
  read(j, "T_ask", c.T_ask);
  read(j, "lambda", c.lambda);
  read_size(j, "state_cap", c.state_cap);
  read_size(j, "max_values_per_dim", c.max_values_per_dim);
  read_size(j, "max_choices_per_question", c.max_choices_per_question);
  read_size(j, "max_new_questions_per_expand", c.max_new_questions_per_expand);
  read_size(j, "top_entropy_dims_for_expand", c.top_entropy_dims_for_expand);
  read_size(j, "initial_dims", c.initial_dims);
  read_size(j, "initial_questions", c.initial_questions);
  read_size(j, "max_concurrency", c.max_concurrency);
  read(j, "max_retries", c.max_retries);
  if (j.contains("label_map")) c.label_map = LabelMap::from_json(j.at("label_map"));
  c.validate();
  return c;
}

LoopConfig LoopConfig::from_json(const json& j) { return merged(LoopConfig{}, j); }

LoopConfig LoopConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return from_json(json::parse(ss.str()));
  } catch (const json::parse_error& e) {
    throw ConfigError("config '" + path + "' is not valid JSON: " + e.what());
  }
}

json LoopConfig::to_json() const {
  return {{"alpha", alpha},
          {"beta", beta},
          {"T", T},
          {"T_ask", T_ask},
          {"lambda", lambda},
          {"state_cap", state_cap},
          {"max_values_per_dim", max_values_per_dim},
          {"max_choices_per_question", max_choices_per_question},
          {"max_new_questions_per_expand", max_new_questions_per_expand},
          {"top_entropy_dims_for_expand", top_entropy_dims_for_expand},
          {"initial_dims", initial_dims},
          {"initial_questions", initial_questions},
          {"max_concurrency", max_concurrency},
          {"max_retries", max_retries},
          {"label_map", label_map.to_json()}};
}

}  // namespace balar
