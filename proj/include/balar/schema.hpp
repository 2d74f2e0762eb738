#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "balar/contract.hpp"
#include "balar/errors.hpp"
#include "balar/labels.hpp"

namespace balar {

/// A response that parsed as JSON but broke the call's output schema.
class SchemaError : public ProtocolError {
 public:
  using ProtocolError::ProtocolError;
};

/// Strict parse: the whole text (modulo surrounding whitespace) must be one JSON object.
nlohmann::json parse_strict_object(const std::string& raw);

// Output schemas. Each throws SchemaError with a message suitable as retry feedback.

std::vector<DimensionProposal> parse_dimensions(const nlohmann::json& j, std::size_t max_count,
                                                std::size_t max_values);
DimensionProposal parse_dimension(const nlohmann::json& j, std::size_t max_values);
Labeled parse_label(const nlohmann::json& j, const LabelMap& labels);
std::vector<QuestionProposal> parse_questions(const nlohmann::json& j, std::size_t max_count,
                                              std::size_t max_choices, bool allow_empty);

/// {"evaluations": [[{<column_id_field>, dimension_value_id, reason, label}, ...], ...]}
/// or the compact {"labels": [[...], ...]}. Returns the grid in (value, column) order.
LabelGrid parse_label_grid(const nlohmann::json& j, std::span<const std::string> value_ids,
                           std::span<const std::string> column_ids, const std::string& column_id_field,
                           const LabelMap& labels);

/// {"scores": [{choice_id, reason, label}, ...]} or {"labels": [...]}; returns labels in choice order.
std::vector<std::string> parse_choice_scores(const nlohmann::json& j, std::span<const std::string> choice_ids,
                                             const LabelMap& labels);

/// {"final_answer": s} or, with an answer set, {"final_answer_id": id}.
FinalAnswer parse_final_answer(const nlohmann::json& j, std::span<const AnswerOption> answers);

struct RetryOutcome {
  nlohmann::json payload;
  int retries = 0;
};

inline constexpr const char* kDefaultFeedbackTemplate =
    "Your previous response was rejected: {error}. Return STRICT JSON only, with no text outside the JSON object, "
    "matching the requested output schema. Allowed labels: {labels}.";

/// Fetches a raw response, validates it, and on failure re-fetches with
/// corrective feedback built from `feedback_template` ({error} and {labels}
/// are substituted). Throws ElicitationError carrying the last raw response
/// once `max_retries` retries are spent. Transport exceptions count as failures.
RetryOutcome validate_and_retry(const std::function<std::string(int attempt, const std::string& feedback)>& fetch,
                                const std::function<void(const nlohmann::json&)>& validate, int max_retries,
                                const std::string& call_kind, const std::string& feedback_template,
                                const LabelMap& labels);

}  // namespace balar
