#include "balar/schema.hpp"

#include <set>

namespace balar {

using nlohmann::json;

namespace {

const json& require(const json& j, const char* field, const char* where) {
  if (!j.is_object() || !j.contains(field)) {
    throw SchemaError(std::string(where) + ": missing required field '" + field + "'");
  }
  return j.at(field);
}

std::string require_string(const json& j, const char* field, const char* where) {
  const auto& v = require(j, field, where);
  if (!v.is_string()) throw SchemaError(std::string(where) + ": field '" + field + "' must be a string");
  return v.get<std::string>();
}

std::string optional_string(const json& j, const char* field) {
  if (j.is_object() && j.contains(field) && j.at(field).is_string()) return j.at(field).get<std::string>();
  return {};
}

std::string check_label(const json& v, const LabelMap& labels, const char* where) {
  if (!v.is_string()) throw SchemaError(std::string(where) + ": label must be a string");
  auto s = v.get<std::string>();
  if (!labels.contains(s)) {
    std::string allowed;
    for (const auto& l : labels.labels()) allowed += (allowed.empty() ? "" : ", ") + ("\"" + l + "\"");
    throw SchemaError(std::string(where) + ": label \"" + s + "\" is not one of " + allowed);
  }
  return s;
}

std::string join_labels(const LabelMap& labels) {
  std::string out;
  for (const auto& l : labels.labels()) out += (out.empty() ? "" : ", ") + ("\"" + l + "\"");
  return out;
}

std::string replace_all(std::string s, const std::string& from, const std::string& to) {
  for (std::size_t pos = 0; (pos = s.find(from, pos)) != std::string::npos; pos += to.size()) {
    s.replace(pos, from.size(), to);
  }
  return s;
}

// Values and choices may be given as strings or as {"id", "text"} objects.
template <class T>
std::vector<T> parse_options(const json& arr, const char* where) {
  if (!arr.is_array()) throw SchemaError(std::string(where) + " must be an array");
  std::vector<T> out;
  std::set<std::string> seen_ids;
  std::set<std::string> seen_text;
  for (const auto& v : arr) {
    T item;
    if (v.is_string()) {
      item.text = v.get<std::string>();
    } else if (v.is_object()) {
      item.text = require_string(v, "text", where);
      item.id = optional_string(v, "id");
    } else {
      throw SchemaError(std::string(where) + " entries must be strings");
    }
    if (item.text.empty()) throw SchemaError(std::string(where) + " entries must be non-empty");
    if (!seen_text.insert(item.text).second) {
      throw SchemaError(std::string(where) + " has duplicate entry \"" + item.text + "\"");
    }
    if (!item.id.empty() && !seen_ids.insert(item.id).second) {
      throw SchemaError(std::string(where) + " has duplicate id \"" + item.id + "\"");
    }
    out.push_back(std::move(item));
  }
  return out;
}

}  // namespace

json parse_strict_object(const std::string& raw) {
  json j;
  try {
    j = json::parse(raw);
  } catch (const json::parse_error& e) {
    throw SchemaError(std::string("response is not a single JSON object: ") + e.what());
  }
  if (!j.is_object()) throw SchemaError("response must be a JSON object");
  return j;
}

DimensionProposal parse_dimension(const json& j, std::size_t max_values) {
  DimensionProposal d;
  d.reason = require_string(j, "reason", "dimension");
  d.name = require_string(j, "name", "dimension");
  if (d.name.empty()) throw SchemaError("dimension: name must be non-empty");
  d.id = optional_string(j, "id");
  d.values = parse_options<DimValue>(require(j, "values", "dimension"), "dimension values");
  if (d.values.size() < 2 || d.values.size() > max_values) {
    throw SchemaError("dimension \"" + d.name + "\" must have between 2 and " + std::to_string(max_values) +
                      " values, got " + std::to_string(d.values.size()));
  }
  return d;
}

std::vector<DimensionProposal> parse_dimensions(const json& j, std::size_t max_count, std::size_t max_values) {
  const auto& arr = require(j, "dimensions", "dimensions");
  if (!arr.is_array() || arr.empty()) throw SchemaError("dimensions must be a non-empty array");
  if (arr.size() > max_count) {
    throw SchemaError("expected at most " + std::to_string(max_count) + " dimensions, got " +
                      std::to_string(arr.size()));
  }
  std::vector<DimensionProposal> out;
  std::set<std::string> names;
  for (const auto& d : arr) {
    out.push_back(parse_dimension(d, max_values));
    if (!names.insert(out.back().name).second) {
      throw SchemaError("duplicate dimension name \"" + out.back().name + "\"");
    }
  }
  return out;
}

Labeled parse_label(const json& j, const LabelMap& labels) {
  Labeled l;
  l.reason = require_string(j, "reason", "label response");
  l.label = check_label(require(j, "label", "label response"), labels, "label response");
  return l;
}

std::vector<QuestionProposal> parse_questions(const json& j, std::size_t max_count, std::size_t max_choices,
                                              bool allow_empty) {
  const auto& arr = require(j, "questions", "questions");
  if (!arr.is_array()) throw SchemaError("questions must be an array");
  if (arr.empty() && !allow_empty) throw SchemaError("questions must be non-empty");
  if (arr.size() > max_count) {
    throw SchemaError("expected at most " + std::to_string(max_count) + " questions, got " +
                      std::to_string(arr.size()));
  }
  std::vector<QuestionProposal> out;
  for (const auto& q : arr) {
    QuestionProposal p;
    p.reason = require_string(q, "reason", "question");
    p.text = require_string(q, "question", "question");
    if (p.text.empty()) throw SchemaError("question text must be non-empty");
    p.id = optional_string(q, "id");
    p.choices = parse_options<Choice>(require(q, "choices", "question"), "question choices");
    if (p.choices.size() < 2 || p.choices.size() > max_choices) {
      throw SchemaError("question \"" + p.text + "\" must have between 2 and " + std::to_string(max_choices) +
                        " choices, got " + std::to_string(p.choices.size()));
    }
    out.push_back(std::move(p));
  }
  return out;
}

LabelGrid parse_label_grid(const json& j, std::span<const std::string> value_ids,
                           std::span<const std::string> column_ids, const std::string& column_id_field,
                           const LabelMap& labels) {
  const std::size_t rows = value_ids.size();
  const std::size_t cols = column_ids.size();
  const auto shape = std::to_string(rows) + " x " + std::to_string(cols);

  if (j.is_object() && j.contains("labels")) {
    const auto& g = j.at("labels");
    if (!g.is_array() || g.size() != rows) {
      throw SchemaError("labels must contain exactly " + std::to_string(rows) + " rows (" + shape + " grid)");
    }
    LabelGrid out;
    for (const auto& r : g) {
      if (!r.is_array() || r.size() != cols) {
        throw SchemaError("every labels row must contain exactly " + std::to_string(cols) + " entries (" + shape +
                          " grid)");
      }
      std::vector<std::string> row;
      for (const auto& c : r) row.push_back(check_label(c, labels, "labels"));
      out.push_back(std::move(row));
    }
    return out;
  }

  const auto& ev = require(j, "evaluations", "likelihood response");
  if (!ev.is_array() || ev.size() != rows) {
    throw SchemaError("evaluations must contain exactly " + std::to_string(rows) + " arrays, one per dimension value");
  }
  LabelGrid out(rows, std::vector<std::string>(cols));
  std::vector<std::vector<bool>> filled(rows, std::vector<bool>(cols, false));
  for (const auto& inner : ev) {
    if (!inner.is_array() || inner.size() != cols) {
      throw SchemaError("each evaluations array must contain exactly " + std::to_string(cols) + " objects");
    }
    for (const auto& cell : inner) {
      const auto vid = require_string(cell, "dimension_value_id", "evaluation");
      const auto cid = require_string(cell, column_id_field.c_str(), "evaluation");
      require_string(cell, "reason", "evaluation");
      const auto label = check_label(require(cell, "label", "evaluation"), labels, "evaluation");
      std::size_t r = rows, c = cols;
      for (std::size_t i = 0; i < rows; ++i) {
        if (value_ids[i] == vid) r = i;
      }
      for (std::size_t i = 0; i < cols; ++i) {
        if (column_ids[i] == cid) c = i;
      }
      if (r == rows) throw SchemaError("unknown dimension_value_id \"" + vid + "\"");
      if (c == cols) throw SchemaError("unknown " + column_id_field + " \"" + cid + "\"");
      if (filled[r][c]) throw SchemaError("duplicate evaluation for (" + vid + ", " + cid + ")");
      filled[r][c] = true;
      out[r][c] = label;
    }
  }
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      if (!filled[r][c]) {
        throw SchemaError("missing evaluation for (" + value_ids[r] + ", " + column_ids[c] + ")");
      }
    }
  }
  return out;
}

std::vector<std::string> parse_choice_scores(const json& j, std::span<const std::string> choice_ids,
                                             const LabelMap& labels) {
  const std::size_t n = choice_ids.size();
  if (j.is_object() && j.contains("labels")) {
    const auto& arr = j.at("labels");
    if (!arr.is_array() || arr.size() != n) {
      throw SchemaError("labels must contain exactly " + std::to_string(n) + " entries");
    }
    std::vector<std::string> out;
    for (const auto& v : arr) out.push_back(check_label(v, labels, "labels"));
    return out;
  }
  const auto& arr = require(j, "scores", "soft-map response");
  if (!arr.is_array() || arr.size() != n) {
    throw SchemaError("scores must contain exactly " + std::to_string(n) + " entries, one per choice");
  }
  std::vector<std::string> out(n);
  std::vector<bool> filled(n, false);
  for (const auto& s : arr) {
    const auto cid = require_string(s, "choice_id", "score");
    require_string(s, "reason", "score");
    const auto label = check_label(require(s, "label", "score"), labels, "score");
    std::size_t c = n;
    for (std::size_t i = 0; i < n; ++i) {
      if (choice_ids[i] == cid) c = i;
    }
    if (c == n) throw SchemaError("unknown choice_id \"" + cid + "\"");
    if (filled[c]) throw SchemaError("duplicate score for choice \"" + cid + "\"");
    filled[c] = true;
    out[c] = label;
  }
  return out;
}

FinalAnswer parse_final_answer(const json& j, std::span<const AnswerOption> answers) {
  FinalAnswer f;
  f.reason = require_string(j, "reason", "final answer");
  if (answers.empty()) {
    f.text = require_string(j, "final_answer", "final answer");
    return f;
  }
  f.answer_id = require_string(j, "final_answer_id", "final answer");
  for (const auto& a : answers) {
    if (a.id == f.answer_id) {
      f.text = a.text;
      return f;
    }
  }
  throw SchemaError("final_answer_id \"" + f.answer_id + "\" is not one of the provided answer ids");
}

RetryOutcome validate_and_retry(const std::function<std::string(int, const std::string&)>& fetch,
                                const std::function<void(const json&)>& validate, int max_retries,
                                const std::string& call_kind, const std::string& feedback_template,
                                const LabelMap& labels) {
  std::string feedback;
  std::string last_raw;
  std::string last_error;
  for (int attempt = 0; attempt <= max_retries; ++attempt) {
    try {
      last_raw = fetch(attempt, feedback);
      json payload = parse_strict_object(last_raw);
      validate(payload);
      return RetryOutcome{std::move(payload), attempt};
    } catch (const ProtocolError& e) {
      last_error = e.what();
    } catch (const ElicitationError& e) {
      last_error = e.what();
    }
    feedback = replace_all(replace_all(feedback_template, "{error}", last_error), "{labels}", join_labels(labels));
  }
  throw ElicitationError(call_kind,
                         call_kind + ": no valid response after " + std::to_string(max_retries) +
                             " retries; last error: " + last_error,
                         last_raw);
}

}  // namespace balar
