#include "balar/prompts.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <vector>

#include "balar/errors.hpp"

#ifndef BALAR_PROMPTS_DIR_DEFAULT
#define BALAR_PROMPTS_DIR_DEFAULT "prompts"
#endif

namespace balar {

std::string render_template(const std::string& tmpl, const PromptVars& vars) {
  std::string out;
  out.reserve(tmpl.size());
  for (std::size_t i = 0; i < tmpl.size(); ++i) {
    const char c = tmpl[i];
    if (c == '{') {
      if (i + 1 < tmpl.size() && tmpl[i + 1] == '{') {
        out += '{';
        ++i;
        continue;
      }
      const auto close = tmpl.find('}', i);
      if (close == std::string::npos) throw ConfigError("unterminated placeholder in prompt template");
      const auto name = tmpl.substr(i + 1, close - i - 1);
      const auto it = vars.find(name);
      if (it == vars.end()) throw ConfigError("prompt template uses unknown placeholder {" + name + "}");
      out += it->second;
      i = close;
    } else if (c == '}') {
      if (i + 1 < tmpl.size() && tmpl[i + 1] == '}') {
        out += '}';
        ++i;
        continue;
      }
      throw ConfigError("stray '}' in prompt template");
    } else {
      out += c;
    }
  }
  return out;
}

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read prompt template '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

const std::vector<std::string>& PromptLibrary::kinds() {
  static const std::vector<std::string> k = {
      "propose_dimensions", "prior",          "generate_questions", "likelihood",
      "soft_map",           "new_dimension",  "expanded_questions", "answer_likelihood",
      "final_answer",       "final_answer_choice", "user_simulator"};
  return k;
}

std::string PromptLibrary::default_dir() {
  if (const char* env = std::getenv("BALAR_PROMPTS_DIR"); env != nullptr && *env != '\0') return env;
  return BALAR_PROMPTS_DIR_DEFAULT;
}

PromptLibrary PromptLibrary::load(const std::string& dir) {
  PromptLibrary lib;
  for (const auto& kind : kinds()) {
    lib.templates_[kind] = {read_file(dir + "/" + kind + ".system.txt"), read_file(dir + "/" + kind + ".user.txt")};
  }
  return lib;
}

PromptPair PromptLibrary::render(const std::string& kind, const PromptVars& vars) const {
  const auto it = templates_.find(kind);
  if (it == templates_.end()) throw ConfigError("no prompt template for '" + kind + "'");
  return {render_template(it->second.system, vars), render_template(it->second.user, vars)};
}

}  // namespace balar
