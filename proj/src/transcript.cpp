#include "balar/transcript.hpp"

#include <fstream>
#include <sstream>

#include "balar/errors.hpp"

namespace balar {

using nlohmann::json;

const json& Transcript::append(long round, std::string kind, json payload) {
  const auto seq = static_cast<long>(events_.size());
  events_.push_back({{"schema_version", kSchemaVersion},
                     {"seq", seq},
                     {"ts", seq},
                     {"round", round},
                     {"kind", std::move(kind)},
                     {"payload", std::move(payload)}});
  return events_.back();
}

std::string Transcript::to_jsonl() const {
  std::string out;
  for (const auto& e : events_) {
    out += e.dump();
    out += '\n';
  }
  return out;
}

Transcript Transcript::from_jsonl(const std::string& text) {
  Transcript t;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json e;
    try {
      e = json::parse(line);
    } catch (const json::parse_error& err) {
      throw ConfigError("transcript line " + std::to_string(lineno) + " is not JSON: " + err.what());
    }
    if (!e.is_object() || e.value("schema_version", 0) != kSchemaVersion || !e.contains("kind")) {
      throw ConfigError("transcript line " + std::to_string(lineno) + " is not a version-1 event");
    }
    t.events_.push_back(std::move(e));
  }
  return t;
}

json Transcript::to_json() const { return json(events_); }

void Transcript::write_file(const std::string& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot write transcript '" + path + "'");
  out << to_jsonl();
}

Transcript Transcript::read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read transcript '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return from_jsonl(ss.str());
}

std::vector<double> cumulative_info_gain(const Transcript& t) {
  std::vector<double> out;
  double acc = 0.0;
  for (const auto& e : t.events()) {
    const auto& kind = e.at("kind");
    if (kind == "update") {
      const auto& p = e.at("payload");
      acc += -(p.at("post_entropy").get<double>() - p.at("pre_entropy").get<double>());
      out.push_back(acc);
    } else if (kind == "update-rejected") {
      out.push_back(acc);
    }
  }
  return out;
}

}  // namespace balar
