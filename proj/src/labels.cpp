#include "balar/labels.hpp"

#include <algorithm>
#include <cmath>

#include "balar/errors.hpp"

namespace balar {

LabelMap::LabelMap() : LabelMap({{"likely", 0.8}, {"neutral", 0.5}, {"unlikely", 0.2}}) {}

LabelMap::LabelMap(std::vector<std::pair<std::string, double>> entries) : entries_(std::move(entries)) {
  if (entries_.size() < 2) {
    throw ConfigError("label map needs at least two labels");
  }
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const auto& [name, w] = entries_[i];
    if (!(w > 0.0) || !std::isfinite(w)) {
      throw ConfigError("label weight for '" + name + "' must be positive and finite");
    }
    for (std::size_t k = 0; k < i; ++k) {
      if (entries_[k].first == name) {
        throw ConfigError("duplicate label '" + name + "'");
      }
    }
  }
}

LabelMap LabelMap::from_json(const nlohmann::json& j) {
  if (!j.is_object()) {
    throw ConfigError("label_map must be an object of label -> weight");
  }
  std::vector<std::pair<std::string, double>> entries;
  for (const auto& [k, v] : j.items()) {
    if (!v.is_number()) {
      throw ConfigError("label weight for '" + k + "' must be a number");
    }
    double w = v.get<double>();
    if (w > 1.0) {
      throw ConfigError("label weight for '" + k + "' must be <= 1");
    }
    entries.emplace_back(k, w);
  }
  return LabelMap(std::move(entries));
}

nlohmann::json LabelMap::to_json() const {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [k, w] : entries_) j[k] = w;
  return j;
}

double LabelMap::weight(std::string_view label) const {
  for (const auto& [k, w] : entries_) {
    if (k == label) return w;
  }
  throw ProtocolError("unknown label '" + std::string(label) + "'");
}

bool LabelMap::contains(std::string_view label) const noexcept {
  return std::any_of(entries_.begin(), entries_.end(), [&](const auto& e) { return e.first == label; });
}

std::vector<std::string> LabelMap::labels() const {
  std::vector<std::string> out;
  out.reserve(entries_.size());
  for (const auto& e : entries_) out.push_back(e.first);
  return out;
}

LabelMap LabelMap::scaled(double factor) const {
  auto copy = entries_;
  for (auto& e : copy) e.second *= factor;
  return LabelMap(std::move(copy));
}

std::vector<double> labels_to_distribution(std::span<const std::string> labels, const LabelMap& map) {
  if (labels.empty()) {
    throw ProtocolError("empty label vector");
  }
  std::vector<double> out;
  out.reserve(labels.size());
  double total = 0.0;
  for (const auto& l : labels) {
    out.push_back(map.weight(l));
    total += out.back();
  }
  for (auto& v : out) v /= total;
  return out;
}

}  // namespace balar
