#pragma once

#include <map>
#include <memory>
#include <semaphore>
#include <string>

#include "balar/contract.hpp"
#include "balar/labels.hpp"
#include "balar/prompts.hpp"

namespace balar {

struct ChatConfig {
  /// Base URL without the trailing /chat/completions, e.g. http://localhost:8000/v1.
  std::string api_base;
  std::string api_key;
  std::string model;
  double temperature = 0.1;
  double top_p = 1.0;
  int max_retries = 3;
  int max_concurrency = 8;
  double timeout_seconds = 60.0;

  /// Reads BALAR_API_BASE, BALAR_API_KEY and BALAR_MODEL. Throws ConfigError when
  /// BALAR_API_BASE or BALAR_MODEL is unset.
  static ChatConfig from_env();
};

/// Sends one chat completion and returns the assistant message content.
/// Throws ElicitationError with `call_kind` on transport or HTTP failure.
class ChatTransport {
 public:
  explicit ChatTransport(ChatConfig cfg);
  std::string complete(const std::string& call_kind, const std::string& system, const std::string& user) const;
  const ChatConfig& config() const noexcept { return cfg_; }

 private:
  ChatConfig cfg_;
  std::string origin_;
  std::string path_prefix_;
};

/// Elicitor backed by an OpenAI-compatible chat endpoint. Safe for concurrent
/// use; at most max_concurrency requests are in flight.
class ChatElicitor final : public Elicitor {
 public:
  ChatElicitor(ChatConfig cfg, PromptLibrary prompts, LabelMap labels);

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

  const CallLog* call_log() const noexcept override { return &log_; }

 private:
  nlohmann::json call(CallKind kind, const std::string& template_kind, const PromptVars& vars,
                      const std::function<void(const nlohmann::json&)>& validate);
  PromptVars base_vars(const Instance& inst) const;

  ChatTransport transport_;
  PromptLibrary prompts_;
  LabelMap labels_;
  std::unique_ptr<std::counting_semaphore<>> slots_;
  CallLog log_;
};

/// Answerer that role-plays each user from private facts kept outside the Instance.
class ChatUserSimulator final : public Answerer {
 public:
  ChatUserSimulator(ChatConfig cfg, PromptLibrary prompts, std::map<std::string, std::string> private_facts);
  std::string answer(const Instance& inst, const User& u, const Question& q, const ConversationLog& history) override;

 private:
  ChatTransport transport_;
  PromptLibrary prompts_;
  std::map<std::string, std::string> facts_;
};

// Prompt fragments, exposed for tests.
std::string format_values(const Dimension& d);
std::string format_choices(const Question& q);
std::string format_dimensions(std::span<const Dimension> dims);
std::string format_conversation(const ConversationLog* log);
std::string format_answers(std::span<const AnswerOption> answers);

}  // namespace balar
