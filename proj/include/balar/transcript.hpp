#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace balar {

/// Append-only session event log, one JSON object per line. See docs/transcript.md.
///
/// `ts` is a logical tick equal to `seq`, so transcripts of identical runs are
/// byte-identical.
class Transcript {
 public:
  static constexpr int kSchemaVersion = 1;

  /// Appends {schema_version, seq, ts, round, kind, payload} and returns it.
  const nlohmann::json& append(long round, std::string kind, nlohmann::json payload);

  const std::vector<nlohmann::json>& events() const noexcept { return events_; }
  std::size_t size() const noexcept { return events_.size(); }
  bool empty() const noexcept { return events_.empty(); }
  const nlohmann::json& back() const { return events_.back(); }

  std::string to_jsonl() const;
  /// Throws ConfigError on a malformed line or a schema_version mismatch.
  static Transcript from_jsonl(const std::string& text);
  nlohmann::json to_json() const;

  void write_file(const std::string& path) const;
  static Transcript read_file(const std::string& path);

 private:
  std::vector<nlohmann::json> events_;
};

/// Partial sums of -(post - pre) entropy over the update events, indexed by questions asked.
std::vector<double> cumulative_info_gain(const Transcript& t);

}  // namespace balar
