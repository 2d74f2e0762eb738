#pragma once

#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "balar/contract.hpp"
#include "balar/labels.hpp"

namespace balar {

enum class UnmatchedPolicy { Error, DefaultNeutral };

/// Canned responses for every contract call of one instance. See docs/fixtures.md.
struct Fixture {
  static constexpr int kSchemaVersion = 1;

  int schema_version = kSchemaVersion;
  std::string name;
  UnmatchedPolicy unmatched = UnmatchedPolicy::Error;
  Instance instance;
  /// Optional LoopConfig overrides shipped with the fixture.
  nlohmann::json config = nlohmann::json::object();
  nlohmann::json calls = nlohmann::json::object();

  static Fixture from_json(const nlohmann::json& j);
  static Fixture load(const std::string& path);
  nlohmann::json to_json() const;
};

/// Deterministic Elicitor and Answerer backed by a Fixture.
///
/// Payloads go through the same schema validation as live responses. A key may
/// hold {"$sequence": [...]} to script successive attempts of one call (raw
/// strings allowed), which exercises the retry path without any hidden state.
class ScriptedOracle final : public Elicitor, public Answerer {
 public:
  ScriptedOracle(Fixture fixture, LabelMap labels, int max_retries = 3);

  std::vector<DimensionProposal> propose_dimensions(const Instance& inst, std::size_t count,
                                                    std::size_t max_values) override;
  Labeled elicit_prior_label(const Instance& inst, const Dimension& dim, const DimValue& value,
                             const ConversationLog* history) override;
  std::vector<QuestionProposal> generate_questions(const Instance& inst, std::span<const Dimension> dims,
                                                   std::size_t count, std::size_t max_choices) override;
  LabelGrid fill_likelihood_labels(const Instance& inst, const Question& q, const User& u, const Dimension& dim,
                                   const ConversationLog* history) override;
  std::vector<std::string> soft_map_labels(const std::string& answer_text, const Question& q) override;
  DimensionProposal propose_new_dimension(const Instance& inst, std::span<const Dimension> existing,
                                          const ConversationLog& history, std::size_t max_values) override;
  std::vector<QuestionProposal> generate_expanded_questions(const Instance& inst, const ConversationLog& history,
                                                            const Dimension& new_dim,
                                                            std::span<const Dimension> top_dims, std::size_t count,
                                                            std::size_t max_choices) override;
  LabelGrid fill_answer_likelihood_labels(const Instance& inst, const Dimension& dim) override;
  FinalAnswer final_answer(const Instance& inst, const ConversationLog& history,
                           const nlohmann::json& map_summary) override;

  std::string answer(const Instance& inst, const User& u, const Question& q, const ConversationLog& history) override;

  const CallLog* call_log() const noexcept override { return &log_; }
  CallLog& mutable_call_log() noexcept { return log_; }
  const Fixture& fixture() const noexcept { return fixture_; }

 private:
  /// Looks up `key`; nullopt when absent.
  std::optional<nlohmann::json> lookup(const std::string& key) const;
  /// Runs the (possibly sequenced) payload at `key` through validate_and_retry.
  nlohmann::json resolve(CallKind kind, const std::string& key, const nlohmann::json& entry,
                         const std::function<void(const nlohmann::json&)>& validate) const;
  [[noreturn]] void missing(CallKind kind, const std::string& key) const;

  Fixture fixture_;
  LabelMap labels_;
  int max_retries_;
  CallLog log_;
};

}  // namespace balar
