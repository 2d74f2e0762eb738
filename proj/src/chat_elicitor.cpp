#include "balar/chat_elicitor.hpp"

#include <cmath>
#include <cstdlib>
#include <sstream>

#include <httplib.h>

#include "balar/errors.hpp"
#include "balar/schema.hpp"

namespace balar {

using nlohmann::json;

namespace {

std::string env_or_empty(const char* name) {
  const char* v = std::getenv(name);
  return v == nullptr ? std::string{} : std::string{v};
}

std::string join_list(const std::vector<std::string>& xs) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) out += (i ? ", " : "") + xs[i];
  return out;
}

/// Releases a semaphore slot on scope exit.
class SlotGuard {
 public:
  explicit SlotGuard(std::counting_semaphore<>& s) : s_(s) { s_.acquire(); }
  ~SlotGuard() { s_.release(); }
  SlotGuard(const SlotGuard&) = delete;
  SlotGuard& operator=(const SlotGuard&) = delete;

 private:
  std::counting_semaphore<>& s_;
};

std::vector<std::string> ids_of(const Dimension& d) {
  std::vector<std::string> out;
  for (const auto& v : d.values) out.push_back(v.id);
  return out;
}

std::vector<std::string> ids_of(const Question& q) {
  std::vector<std::string> out;
  for (const auto& c : q.choices) out.push_back(c.id);
  return out;
}

}  // namespace

ChatConfig ChatConfig::from_env() {
  ChatConfig cfg;
  cfg.api_base = env_or_empty("BALAR_API_BASE");
  cfg.api_key = env_or_empty("BALAR_API_KEY");
  cfg.model = env_or_empty("BALAR_MODEL");
  if (cfg.api_base.empty()) throw ConfigError("BALAR_API_BASE is not set");
  if (cfg.model.empty()) throw ConfigError("BALAR_MODEL is not set");
  return cfg;
}

ChatTransport::ChatTransport(ChatConfig cfg) : cfg_(std::move(cfg)) {
  const auto scheme_end = cfg_.api_base.find("://");
  if (scheme_end == std::string::npos) throw ConfigError("api_base must include a scheme: " + cfg_.api_base);
  const auto path_start = cfg_.api_base.find('/', scheme_end + 3);
  origin_ = cfg_.api_base.substr(0, path_start);
  path_prefix_ = path_start == std::string::npos ? std::string{} : cfg_.api_base.substr(path_start);
  while (!path_prefix_.empty() && path_prefix_.back() == '/') path_prefix_.pop_back();
}

std::string ChatTransport::complete(const std::string& call_kind, const std::string& system,
                                    const std::string& user) const {
  httplib::Client client(origin_);
  const auto secs = static_cast<time_t>(cfg_.timeout_seconds);
  const auto usecs = static_cast<time_t>((cfg_.timeout_seconds - std::floor(cfg_.timeout_seconds)) * 1e6);
  client.set_connection_timeout(secs, usecs);
  client.set_read_timeout(secs, usecs);
  client.set_write_timeout(secs, usecs);
  httplib::Headers headers;
  if (!cfg_.api_key.empty()) headers.emplace("Authorization", "Bearer " + cfg_.api_key);

  const json body = {{"model", cfg_.model},
                     {"messages", json::array({{{"role", "system"}, {"content", system}},
                                               {{"role", "user"}, {"content", user}}})},
                     {"temperature", cfg_.temperature},
                     {"top_p", cfg_.top_p}};
  auto res = client.Post(path_prefix_ + "/chat/completions", headers, body.dump(), "application/json");
  if (!res) throw ElicitationError(call_kind, call_kind + ": transport error: " + httplib::to_string(res.error()));
  if (res->status != 200) {
    throw ElicitationError(call_kind, call_kind + ": endpoint returned HTTP " + std::to_string(res->status),
                           res->body);
  }
  try {
    const auto j = json::parse(res->body);
    return j.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const json::exception& e) {
    throw ElicitationError(call_kind, call_kind + ": malformed completion envelope: " + e.what(), res->body);
  }
}

std::string format_values(const Dimension& d) {
  std::string out;
  for (const auto& v : d.values) out += v.id + ": " + v.text + "\n";
  return out;
}

std::string format_choices(const Question& q) {
  std::string out;
  for (const auto& c : q.choices) out += c.id + ": " + c.text + "\n";
  return out;
}

std::string format_dimensions(std::span<const Dimension> dims) {
  std::string out;
  for (const auto& d : dims) {
    std::vector<std::string> vals;
    for (const auto& v : d.values) vals.push_back(v.text);
    out += "- " + d.name + ": " + join_list(vals) + "\n";
  }
  return out.empty() ? "(none)\n" : out;
}

std::string format_conversation(const ConversationLog* log) {
  if (log == nullptr || log->empty()) return "(none)\n";
  std::string out;
  for (const auto& t : *log) out += "Q: " + t.question_text + "\n" + t.user_name + ": " + t.user_answer + "\n";
  return out;
}

std::string format_answers(std::span<const AnswerOption> answers) {
  std::string out;
  for (const auto& a : answers) out += a.id + ": " + a.text + "\n";
  return out;
}

ChatElicitor::ChatElicitor(ChatConfig cfg, PromptLibrary prompts, LabelMap labels)
    : transport_(std::move(cfg)),
      prompts_(std::move(prompts)),
      labels_(std::move(labels)),
      slots_(std::make_unique<std::counting_semaphore<>>(std::max(1, transport_.config().max_concurrency))) {}

PromptVars ChatElicitor::base_vars(const Instance& inst) const {
  return {{"ambiguous_prompt", inst.prompt},
          {"meta_context", inst.context.empty() ? "(none)" : inst.context},
          {"labels", join_list(labels_.labels())}};
}

json ChatElicitor::call(CallKind kind, const std::string& template_kind, const PromptVars& vars,
                        const std::function<void(const json&)>& validate) {
  const auto prompt = prompts_.render(template_kind, vars);
  const std::string kind_name = to_string(kind);
  auto fetch = [&](int, const std::string& feedback) {
    SlotGuard slot(*slots_);
    const auto user = feedback.empty() ? prompt.user : prompt.user + "\n\n" + feedback;
    return transport_.complete(kind_name, prompt.system, user);
  };
  return validate_and_retry(fetch, validate, transport_.config().max_retries, kind_name, kDefaultFeedbackTemplate,
                            labels_)
      .payload;
}

std::vector<DimensionProposal> ChatElicitor::propose_dimensions(const Instance& inst, std::size_t count,
                                                                std::size_t max_values) {
  log_.record({CallKind::ProposeDimensions, "propose_dimensions"});
  auto vars = base_vars(inst);
  vars["num_dimensions"] = std::to_string(count);
  vars["max_values"] = std::to_string(max_values);
  std::vector<DimensionProposal> out;
  call(CallKind::ProposeDimensions, "propose_dimensions", vars,
       [&](const json& j) { out = parse_dimensions(j, count, max_values); });
  return out;
}

Labeled ChatElicitor::elicit_prior_label(const Instance& inst, const Dimension& dim, const DimValue& value,
                                         const ConversationLog* history) {
  log_.record({CallKind::PriorLabel, "prior/" + dim.id + "/" + value.id, {}, {}, dim.id, value.id});
  auto vars = base_vars(inst);
  vars["dimension_name"] = dim.name;
  vars["dimension_value"] = value.text;
  vars["dimension_values_with_ids"] = format_values(dim);
  vars["conversation_log"] = format_conversation(history);
  Labeled out;
  call(CallKind::PriorLabel, "prior", vars, [&](const json& j) { out = parse_label(j, labels_); });
  return out;
}

std::vector<QuestionProposal> ChatElicitor::generate_questions(const Instance& inst, std::span<const Dimension> dims,
                                                               std::size_t count, std::size_t max_choices) {
  log_.record({CallKind::GenerateQuestions, "generate_questions"});
  auto vars = base_vars(inst);
  vars["dimensions_summary"] = format_dimensions(dims);
  vars["num_questions"] = std::to_string(count);
  vars["max_choices"] = std::to_string(max_choices);
  std::vector<QuestionProposal> out;
  call(CallKind::GenerateQuestions, "generate_questions", vars,
       [&](const json& j) { out = parse_questions(j, count, max_choices, false); });
  return out;
}

LabelGrid ChatElicitor::fill_likelihood_labels(const Instance& inst, const Question& q, const User& u,
                                               const Dimension& dim, const ConversationLog* history) {
  log_.record({CallKind::Likelihood, "likelihood/" + q.id + "/" + u.id + "/" + dim.id, q.id, u.id, dim.id, {}, 1});
  auto vars = base_vars(inst);
  vars["conversation_log"] = format_conversation(history);
  vars["user_name"] = u.name;
  vars["user_profile"] = u.profile.empty() ? "(none)" : u.profile;
  vars["question"] = q.text;
  vars["question_choices_with_ids"] = format_choices(q);
  vars["dimension_name"] = dim.name;
  vars["dimension_values_with_ids"] = format_values(dim);
  const auto vids = ids_of(dim);
  const auto cids = ids_of(q);
  LabelGrid out;
  call(CallKind::Likelihood, "likelihood", vars,
       [&](const json& j) { out = parse_label_grid(j, vids, cids, "question_choice_id", labels_); });
  return out;
}

std::vector<std::string> ChatElicitor::soft_map_labels(const std::string& answer_text, const Question& q) {
  log_.record({CallKind::SoftMap, "soft_map/" + q.id, q.id});
  PromptVars vars = {{"labels", join_list(labels_.labels())},
                     {"question", q.text},
                     {"question_choices_with_ids", format_choices(q)},
                     {"user_answer", answer_text}};
  const auto cids = ids_of(q);
  std::vector<std::string> out;
  call(CallKind::SoftMap, "soft_map", vars, [&](const json& j) { out = parse_choice_scores(j, cids, labels_); });
  return out;
}

DimensionProposal ChatElicitor::propose_new_dimension(const Instance& inst, std::span<const Dimension> existing,
                                                      const ConversationLog& history, std::size_t max_values) {
  log_.record({CallKind::NewDimension, "new_dimension/" + std::to_string(existing.size())});
  auto vars = base_vars(inst);
  vars["dimensions_summary"] = format_dimensions(existing);
  vars["conversation_log"] = format_conversation(&history);
  vars["max_values"] = std::to_string(max_values);
  DimensionProposal out;
  call(CallKind::NewDimension, "new_dimension", vars, [&](const json& j) {
    out = parse_dimension(j, max_values);
    for (const auto& d : existing) {
      if (d.name == out.name) throw SchemaError("dimension name \"" + out.name + "\" is already in use");
    }
  });
  return out;
}

std::vector<QuestionProposal> ChatElicitor::generate_expanded_questions(const Instance& inst,
                                                                        const ConversationLog& history,
                                                                        const Dimension& new_dim,
                                                                        std::span<const Dimension> top_dims,
                                                                        std::size_t count, std::size_t max_choices) {
  log_.record({CallKind::ExpandedQuestions, "expanded_questions/" + new_dim.id, {}, {}, new_dim.id});
  auto vars = base_vars(inst);
  vars["conversation_log"] = format_conversation(&history);
  vars["new_dimension"] = format_dimensions(std::span<const Dimension>(&new_dim, 1));
  vars["top_dimensions"] = format_dimensions(top_dims);
  vars["num_questions"] = std::to_string(count);
  vars["max_choices"] = std::to_string(max_choices);
  std::vector<QuestionProposal> out;
  call(CallKind::ExpandedQuestions, "expanded_questions", vars,
       [&](const json& j) { out = parse_questions(j, count, max_choices, true); });
  return out;
}

LabelGrid ChatElicitor::fill_answer_likelihood_labels(const Instance& inst, const Dimension& dim) {
  log_.record({CallKind::AnswerLikelihood, "answer_likelihood/" + dim.id, {}, {}, dim.id});
  auto vars = base_vars(inst);
  vars["possible_answers_with_ids"] = format_answers(inst.answers);
  vars["dimension_name"] = dim.name;
  vars["dimension_values_with_ids"] = format_values(dim);
  const auto vids = ids_of(dim);
  std::vector<std::string> aids;
  for (const auto& a : inst.answers) aids.push_back(a.id);
  LabelGrid out;
  call(CallKind::AnswerLikelihood, "answer_likelihood", vars,
       [&](const json& j) { out = parse_label_grid(j, vids, aids, "answer_id", labels_); });
  return out;
}

FinalAnswer ChatElicitor::final_answer(const Instance& inst, const ConversationLog& history,
                                       const json& map_summary) {
  log_.record({CallKind::FinalAnswer, "final_answer"});
  auto vars = base_vars(inst);
  vars["conversation_log"] = format_conversation(&history);
  std::string summary;
  if (map_summary.contains("dimensions")) {
    for (const auto& d : map_summary.at("dimensions")) {
      summary += "- " + d.value("name", std::string{}) + ": " + d.value("value", std::string{}) + "\n";
    }
  }
  vars["map_state"] = summary.empty() ? map_summary.dump() : summary;
  const bool choice = inst.has_answer_set();
  if (choice) vars["possible_answers_with_ids"] = format_answers(inst.answers);
  FinalAnswer out;
  call(CallKind::FinalAnswer, choice ? "final_answer_choice" : "final_answer", vars,
       [&](const json& j) { out = parse_final_answer(j, inst.answers); });
  return out;
}

ChatUserSimulator::ChatUserSimulator(ChatConfig cfg, PromptLibrary prompts,
                                     std::map<std::string, std::string> private_facts)
    : transport_(std::move(cfg)), prompts_(std::move(prompts)), facts_(std::move(private_facts)) {}

std::string ChatUserSimulator::answer(const Instance&, const User& u, const Question& q,
                                      const ConversationLog& history) {
  const auto it = facts_.find(u.id);
  PromptVars vars = {{"user_profile", u.profile.empty() ? u.name : u.profile},
                     {"private_facts", it == facts_.end() ? "(none)" : it->second},
                     {"conversation_log", format_conversation(&history)},
                     {"question", q.text}};
  const auto prompt = prompts_.render("user_simulator", vars);
  return transport_.complete(to_string(CallKind::UserAnswer), prompt.system, prompt.user);
}

}  // namespace balar
