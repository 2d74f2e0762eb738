#include "balar/contract.hpp"

#include <algorithm>
#include <set>

#include "balar/errors.hpp"

namespace balar {

using nlohmann::json;

const User& Instance::user(const std::string& id) const {
  for (const auto& u : users) {
    if (u.id == id) return u;
  }
  throw MismatchError("unknown user '" + id + "'");
}

Instance Instance::from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("instance must be an object");
  Instance inst;
  inst.prompt = j.value("prompt", std::string{});
  inst.context = j.value("context", std::string{});
  if (j.contains("users")) {
    if (!j.at("users").is_array()) throw ConfigError("instance.users must be an array");
    std::size_t idx = 0;
    for (const auto& u : j.at("users")) {
      User user;
      if (u.is_string()) {
        user.name = u.get<std::string>();
      } else if (u.is_object()) {
        user.id = u.value("id", std::string{});
        user.name = u.value("name", std::string{});
        user.profile = u.value("profile", std::string{});
      } else {
        throw ConfigError("instance.users entries must be objects");
      }
      if (user.id.empty()) user.id = "u" + std::to_string(idx);
      if (user.name.empty()) user.name = user.id;
      inst.users.push_back(std::move(user));
      ++idx;
    }
  }
  if (j.contains("answers")) {
    if (!j.at("answers").is_array()) throw ConfigError("instance.answers must be an array");
    std::size_t idx = 0;
    for (const auto& a : j.at("answers")) {
      AnswerOption opt;
      if (a.is_string()) {
        opt.text = a.get<std::string>();
      } else if (a.is_object()) {
        opt.id = a.value("id", std::string{});
        opt.text = a.value("text", std::string{});
      } else {
        throw ConfigError("instance.answers entries must be strings or objects");
      }
      if (opt.id.empty()) opt.id = "a" + std::to_string(idx);
      inst.answers.push_back(std::move(opt));
      ++idx;
    }
  }
  return inst;
}

json Instance::to_json() const {
  json users_j = json::array();
  for (const auto& u : users) users_j.push_back({{"id", u.id}, {"name", u.name}, {"profile", u.profile}});
  json j = {{"prompt", prompt}, {"context", context}, {"users", std::move(users_j)}};
  if (!answers.empty()) {
    json a = json::array();
    for (const auto& opt : answers) a.push_back({{"id", opt.id}, {"text", opt.text}});
    j["answers"] = std::move(a);
  }
  return j;
}

void Instance::validate() const {
  if (prompt.empty()) throw ConfigError("instance prompt must be non-empty");
  if (users.empty()) throw ConfigError("instance needs at least one user");
  std::set<std::string> ids;
  for (const auto& u : users) {
    if (!ids.insert(u.id).second) throw ConfigError("duplicate user id '" + u.id + "'");
  }
  ids.clear();
  for (const auto& a : answers) {
    if (!ids.insert(a.id).second) throw ConfigError("duplicate answer id '" + a.id + "'");
  }
  if (answers.size() == 1) throw ConfigError("an answer set needs at least two answers");
}

json Question::to_json() const {
  json ch = json::array();
  for (const auto& c : choices) ch.push_back({{"id", c.id}, {"text", c.text}});
  return {{"id", id}, {"text", text}, {"choices", std::move(ch)}, {"reason", reason}};
}

json conversation_to_json(const ConversationLog& log) {
  json out = json::array();
  for (const auto& t : log) {
    out.push_back({{"question_text", t.question_text}, {"user_name", t.user_name}, {"user_answer", t.user_answer}});
  }
  return out;
}

const char* to_string(CallKind kind) noexcept {
  switch (kind) {
    case CallKind::ProposeDimensions: return "propose_dimensions";
    case CallKind::PriorLabel: return "prior";
    case CallKind::GenerateQuestions: return "generate_questions";
    case CallKind::Likelihood: return "likelihood";
    case CallKind::SoftMap: return "soft_map";
    case CallKind::NewDimension: return "new_dimension";
    case CallKind::ExpandedQuestions: return "expanded_questions";
    case CallKind::AnswerLikelihood: return "answer_likelihood";
    case CallKind::FinalAnswer: return "final_answer";
    case CallKind::UserAnswer: return "user_answer";
  }
  return "unknown";
}

void CallLog::record(CallRecord r) {
  std::lock_guard lock(mu_);
  records_.push_back(std::move(r));
}

std::vector<CallRecord> CallLog::snapshot() const {
  std::lock_guard lock(mu_);
  return records_;
}

std::size_t CallLog::count() const {
  std::lock_guard lock(mu_);
  return records_.size();
}

std::size_t CallLog::count(CallKind kind) const {
  std::lock_guard lock(mu_);
  return static_cast<std::size_t>(
      std::count_if(records_.begin(), records_.end(), [&](const CallRecord& r) { return r.kind == kind; }));
}

void CallLog::clear() {
  std::lock_guard lock(mu_);
  records_.clear();
}

}  // namespace balar
