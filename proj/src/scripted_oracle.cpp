#include "balar/scripted_oracle.hpp"

#include <fstream>
#include <sstream>

#include "balar/errors.hpp"
#include "balar/schema.hpp"

namespace balar {

using nlohmann::json;

namespace {

std::vector<std::string> value_ids(const Dimension& d) {
  std::vector<std::string> out;
  for (const auto& v : d.values) out.push_back(v.id);
  return out;
}

std::vector<std::string> choice_ids(const Question& q) {
  std::vector<std::string> out;
  for (const auto& c : q.choices) out.push_back(c.id);
  return out;
}

json make_neutral_grid(std::size_t rows, std::size_t cols) {
  json g = json::array();
  for (std::size_t r = 0; r < rows; ++r) g.push_back(json(std::vector<std::string>(cols, "neutral")));
  return {{"labels", std::move(g)}};
}

}  // namespace

Fixture Fixture::from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("fixture must be a JSON object");
  Fixture f;
  f.schema_version = j.value("schema_version", 0);
  if (f.schema_version != kSchemaVersion) {
    throw ConfigError("unsupported fixture schema_version " + std::to_string(f.schema_version));
  }
  f.name = j.value("name", std::string{});
  const auto policy = j.value("unmatched", std::string("error"));
  if (policy == "error") {
    f.unmatched = UnmatchedPolicy::Error;
  } else if (policy == "default-neutral") {
    f.unmatched = UnmatchedPolicy::DefaultNeutral;
  } else {
    throw ConfigError("fixture 'unmatched' must be 'error' or 'default-neutral'");
  }
  if (j.contains("instance")) f.instance = Instance::from_json(j.at("instance"));
  if (j.contains("config")) f.config = j.at("config");
  if (j.contains("calls")) {
    if (!j.at("calls").is_object()) throw ConfigError("fixture 'calls' must be an object");
    f.calls = j.at("calls");
  }
  return f;
}

Fixture Fixture::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open fixture '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    auto f = from_json(json::parse(ss.str()));
    if (f.name.empty()) {
      auto slash = path.find_last_of('/');
      auto base = path.substr(slash == std::string::npos ? 0 : slash + 1);
      f.name = base.substr(0, base.rfind(".json"));
    }
    return f;
  } catch (const json::parse_error& e) {
    throw ConfigError("fixture '" + path + "' is not valid JSON: " + e.what());
  }
}

json Fixture::to_json() const {
  return {{"schema_version", schema_version},
          {"name", name},
          {"unmatched", unmatched == UnmatchedPolicy::Error ? "error" : "default-neutral"},
          {"instance", instance.to_json()},
          {"config", config},
          {"calls", calls}};
}

ScriptedOracle::ScriptedOracle(Fixture fixture, LabelMap labels, int max_retries)
    : fixture_(std::move(fixture)), labels_(std::move(labels)), max_retries_(max_retries) {}

std::optional<json> ScriptedOracle::lookup(const std::string& key) const {
  if (fixture_.calls.contains(key)) return std::optional<json>(std::in_place, fixture_.calls.at(key));
  return std::nullopt;
}

void ScriptedOracle::missing(CallKind kind, const std::string& key) const {
  throw ElicitationError(to_string(kind), "fixture '" + fixture_.name + "' has no entry for " + key);
}

json ScriptedOracle::resolve(CallKind kind, const std::string& key, const json& entry,
                             const std::function<void(const json&)>& validate) const {
  auto fetch = [&](int attempt, const std::string&) -> std::string {
    const json* payload = &entry;
    if (entry.is_object() && entry.contains("$sequence")) {
      const auto& seq = entry.at("$sequence");
      if (!seq.is_array() || seq.empty()) throw ConfigError(key + ": $sequence must be a non-empty array");
      payload = &seq.at(std::min<std::size_t>(static_cast<std::size_t>(attempt), seq.size() - 1));
    }
    return payload->is_string() ? payload->get<std::string>() : payload->dump();
  };
  try {
    return validate_and_retry(fetch, validate, max_retries_, to_string(kind), kDefaultFeedbackTemplate, labels_)
        .payload;
  } catch (const ElicitationError& e) {
    throw ElicitationError(e.call_kind(), key + ": " + e.what(), e.last_raw());
  }
}

std::vector<DimensionProposal> ScriptedOracle::propose_dimensions(const Instance&, std::size_t count,
                                                                  std::size_t max_values) {
  const std::string key = "propose_dimensions";
  log_.record({CallKind::ProposeDimensions, key});
  auto entry = lookup(key);
  if (!entry) missing(CallKind::ProposeDimensions, key);
  std::vector<DimensionProposal> out;
  resolve(CallKind::ProposeDimensions, key, *entry,
          [&](const json& j) { out = parse_dimensions(j, count, max_values); });
  return out;
}

Labeled ScriptedOracle::elicit_prior_label(const Instance&, const Dimension& dim, const DimValue& value,
                                           const ConversationLog*) {
  const std::string key = "prior/" + dim.id + "/" + value.id;
  log_.record({CallKind::PriorLabel, key, {}, {}, dim.id, value.id});
  auto entry = lookup(key);
  if (!entry) {
    if (fixture_.unmatched == UnmatchedPolicy::Error) missing(CallKind::PriorLabel, key);
    entry = json{{"reason", "no scripted entry"}, {"label", "neutral"}};
  }
  Labeled out;
  resolve(CallKind::PriorLabel, key, *entry, [&](const json& j) { out = parse_label(j, labels_); });
  return out;
}

std::vector<QuestionProposal> ScriptedOracle::generate_questions(const Instance&, std::span<const Dimension>,
                                                                 std::size_t count, std::size_t max_choices) {
  const std::string key = "generate_questions";
  log_.record({CallKind::GenerateQuestions, key});
  auto entry = lookup(key);
  if (!entry) missing(CallKind::GenerateQuestions, key);
  std::vector<QuestionProposal> out;
  resolve(CallKind::GenerateQuestions, key, *entry,
          [&](const json& j) { out = parse_questions(j, count, max_choices, false); });
  return out;
}

LabelGrid ScriptedOracle::fill_likelihood_labels(const Instance&, const Question& q, const User& u,
                                                 const Dimension& dim, const ConversationLog*) {
  const std::string key = "likelihood/" + q.id + "/" + u.id + "/" + dim.id;
  log_.record({CallKind::Likelihood, key, q.id, u.id, dim.id, {}, 1});
  auto entry = lookup(key);
  if (!entry) {
    if (fixture_.unmatched == UnmatchedPolicy::Error) missing(CallKind::Likelihood, key);
    entry = make_neutral_grid(dim.size(), q.choices.size());
  }
  const auto vids = value_ids(dim);
  const auto cids = choice_ids(q);
  LabelGrid out;
  resolve(CallKind::Likelihood, key, *entry,
          [&](const json& j) { out = parse_label_grid(j, vids, cids, "question_choice_id", labels_); });
  return out;
}

std::vector<std::string> ScriptedOracle::soft_map_labels(const std::string& answer_text, const Question& q) {
  const std::string key = "soft_map/" + q.id;
  log_.record({CallKind::SoftMap, key, q.id});
  auto entry = lookup(key);
  if (entry && entry->is_object() && entry->contains("by_answer")) {
    const auto& by = entry->at("by_answer");
    if (by.contains(answer_text)) {
      entry = by.at(answer_text);
    } else if (entry->contains("default")) {
      entry = entry->at("default");
    } else {
      entry.reset();
    }
  }
  if (!entry) {
    if (fixture_.unmatched == UnmatchedPolicy::Error) missing(CallKind::SoftMap, key);
    entry = json{{"labels", std::vector<std::string>(q.choices.size(), "neutral")}};
  }
  const auto cids = choice_ids(q);
  std::vector<std::string> out;
  resolve(CallKind::SoftMap, key, *entry, [&](const json& j) { out = parse_choice_scores(j, cids, labels_); });
  return out;
}

DimensionProposal ScriptedOracle::propose_new_dimension(const Instance&, std::span<const Dimension> existing,
                                                        const ConversationLog&, std::size_t max_values) {
  const std::string key = "new_dimension/" + std::to_string(existing.size());
  log_.record({CallKind::NewDimension, key});
  auto entry = lookup(key);
  if (!entry) missing(CallKind::NewDimension, key);
  DimensionProposal out;
  resolve(CallKind::NewDimension, key, *entry, [&](const json& j) {
    out = parse_dimension(j, max_values);
    for (const auto& d : existing) {
      if (d.name == out.name) throw SchemaError("dimension name \"" + out.name + "\" is already in use");
    }
  });
  return out;
}

std::vector<QuestionProposal> ScriptedOracle::generate_expanded_questions(const Instance&, const ConversationLog&,
                                                                          const Dimension& new_dim,
                                                                          std::span<const Dimension>,
                                                                          std::size_t count,
                                                                          std::size_t max_choices) {
  const std::string key = "expanded_questions/" + new_dim.id;
  log_.record({CallKind::ExpandedQuestions, key, {}, {}, new_dim.id});
  auto entry = lookup(key);
  if (!entry) missing(CallKind::ExpandedQuestions, key);
  std::vector<QuestionProposal> out;
  resolve(CallKind::ExpandedQuestions, key, *entry,
          [&](const json& j) { out = parse_questions(j, count, max_choices, true); });
  return out;
}

LabelGrid ScriptedOracle::fill_answer_likelihood_labels(const Instance& inst, const Dimension& dim) {
  const std::string key = "answer_likelihood/" + dim.id;
  log_.record({CallKind::AnswerLikelihood, key, {}, {}, dim.id});
  auto entry = lookup(key);
  if (!entry) {
    if (fixture_.unmatched == UnmatchedPolicy::Error) missing(CallKind::AnswerLikelihood, key);
    entry = make_neutral_grid(dim.size(), inst.answers.size());
  }
  const auto vids = value_ids(dim);
  std::vector<std::string> aids;
  for (const auto& a : inst.answers) aids.push_back(a.id);
  LabelGrid out;
  resolve(CallKind::AnswerLikelihood, key, *entry,
          [&](const json& j) { out = parse_label_grid(j, vids, aids, "answer_id", labels_); });
  return out;
}

FinalAnswer ScriptedOracle::final_answer(const Instance& inst, const ConversationLog&, const json&) {
  const std::string key = "final_answer";
  log_.record({CallKind::FinalAnswer, key});
  auto entry = lookup(key);
  if (!entry) missing(CallKind::FinalAnswer, key);
  FinalAnswer out;
  resolve(CallKind::FinalAnswer, key, *entry, [&](const json& j) { out = parse_final_answer(j, inst.answers); });
  return out;
}

std::string ScriptedOracle::answer(const Instance&, const User& u, const Question& q, const ConversationLog&) {
  const std::string key = "user_answer/" + q.id + "/" + u.id;
  log_.record({CallKind::UserAnswer, key, q.id, u.id});
  auto entry = lookup(key);
  if (!entry) {
    if (fixture_.unmatched == UnmatchedPolicy::Error) missing(CallKind::UserAnswer, key);
    return "I'm not sure.";
  }
  if (entry->is_string()) return entry->get<std::string>();
  if (entry->is_object() && entry->contains("answer") && entry->at("answer").is_string()) {
    return entry->at("answer").get<std::string>();
  }
  throw ConfigError(key + ": user answers must be strings or {\"answer\": string}");
}

}  // namespace balar
