#pragma once

#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "balar/likelihood.hpp"
#include "balar/state_space.hpp"

namespace balar {

struct User {
  std::string id;
  std::string name;
  /// Public description of the user handed to likelihood calls. Never the private facts.
  std::string profile;
};

struct AnswerOption {
  std::string id;
  std::string text;
};

/// (prompt, context, users), plus the optional discrete answer set.
struct Instance {
  std::string prompt;
  std::string context;
  std::vector<User> users;
  std::vector<AnswerOption> answers;

  bool has_answer_set() const noexcept { return !answers.empty(); }
  const User& user(const std::string& id) const;

  static Instance from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
  /// Throws ConfigError for an empty prompt, no users, or duplicate ids.
  void validate() const;
};

struct Choice {
  std::string id;
  std::string text;
};

struct Question {
  std::string id;
  std::string text;
  std::vector<Choice> choices;
  std::string reason;

  nlohmann::json to_json() const;
};

/// One exchange of the conversation log shown to history-conditioned calls.
struct ConversationTurn {
  std::string question_text;
  std::string user_name;
  std::string user_answer;
};

using ConversationLog = std::vector<ConversationTurn>;
nlohmann::json conversation_to_json(const ConversationLog& log);

/// A label with the short reason the elicitor gave before committing to it.
struct Labeled {
  std::string label;
  std::string reason;
};

/// Dimension as returned by an elicitor; ids may be empty and are then assigned by the engine.
struct DimensionProposal {
  std::string id;
  std::string name;
  std::vector<DimValue> values;
  std::string reason;
};

struct QuestionProposal {
  std::string id;
  std::string text;
  std::vector<Choice> choices;
  std::string reason;
};

struct FinalAnswer {
  std::string text;
  std::string answer_id;
  std::string reason;
};

enum class CallKind {
  ProposeDimensions,
  PriorLabel,
  GenerateQuestions,
  Likelihood,
  SoftMap,
  NewDimension,
  ExpandedQuestions,
  AnswerLikelihood,
  FinalAnswer,
  UserAnswer,
};

const char* to_string(CallKind kind) noexcept;

/// Arguments one contract call was made with, reduced to ids.
struct CallRecord {
  CallKind kind;
  std::string key;
  std::string question_id;
  std::string user_id;
  std::string dim_id;
  std::string value_id;
  /// Number of distinct (question, user, dimension) triples the call covers.
  int triples = 0;
};

/// Thread-safe append-only record of contract calls.
class CallLog {
 public:
  void record(CallRecord r);
  std::vector<CallRecord> snapshot() const;
  std::size_t count() const;
  std::size_t count(CallKind kind) const;
  void clear();

 private:
  mutable std::mutex mu_;
  std::vector<CallRecord> records_;
};

/// Everything the loop obtains from a language model. Implementations return
/// labels and text only; numeric conversion happens through the LabelMap.
class Elicitor {
 public:
  virtual ~Elicitor() = default;

  virtual std::vector<DimensionProposal> propose_dimensions(const Instance& inst, std::size_t count,
                                                            std::size_t max_values) = 0;
  virtual Labeled elicit_prior_label(const Instance& inst, const Dimension& dim, const DimValue& value,
                                     const ConversationLog* history) = 0;
  virtual std::vector<QuestionProposal> generate_questions(const Instance& inst, std::span<const Dimension> dims,
                                                           std::size_t count, std::size_t max_choices) = 0;
  /// Full |values| x |choices| label grid for one (question, user, dimension) triple.
  virtual LabelGrid fill_likelihood_labels(const Instance& inst, const Question& q, const User& u,
                                           const Dimension& dim, const ConversationLog* history) = 0;
  /// One label per choice of `q` for the free-form `answer_text`.
  virtual std::vector<std::string> soft_map_labels(const std::string& answer_text, const Question& q) = 0;
  virtual DimensionProposal propose_new_dimension(const Instance& inst, std::span<const Dimension> existing,
                                                  const ConversationLog& history, std::size_t max_values) = 0;
  virtual std::vector<QuestionProposal> generate_expanded_questions(const Instance& inst,
                                                                    const ConversationLog& history,
                                                                    const Dimension& new_dim,
                                                                    std::span<const Dimension> top_dims,
                                                                    std::size_t count, std::size_t max_choices) = 0;
  /// |values| x |answers| label grid.
  virtual LabelGrid fill_answer_likelihood_labels(const Instance& inst, const Dimension& dim) = 0;
  virtual FinalAnswer final_answer(const Instance& inst, const ConversationLog& history,
                                   const nlohmann::json& map_summary) = 0;

  /// Instrumentation, when the implementation keeps one.
  virtual const CallLog* call_log() const noexcept { return nullptr; }
};

/// Produces the free-form reply of user `u` to question `q`.
class Answerer {
 public:
  virtual ~Answerer() = default;
  virtual std::string answer(const Instance& inst, const User& u, const Question& q,
                             const ConversationLog& history) = 0;
};

}  // namespace balar
