#pragma once

#include <map>
#include <string>
#include <vector>

namespace balar {

using PromptVars = std::map<std::string, std::string>;

/// Substitutes {name} placeholders; "{{" and "}}" produce literal braces.
/// Throws ConfigError for an unknown placeholder or an unbalanced brace.
std::string render_template(const std::string& tmpl, const PromptVars& vars);

struct PromptPair {
  std::string system;
  std::string user;
};

/// System and user templates per call kind, read from `<dir>/<kind>.system.txt`
/// and `<dir>/<kind>.user.txt`.
class PromptLibrary {
 public:
  /// Loads every kind in kinds(). Throws ConfigError when a file is missing.
  static PromptLibrary load(const std::string& dir);
  /// $BALAR_PROMPTS_DIR if set, else the prompts/ directory of the source tree.
  static std::string default_dir();
  static const std::vector<std::string>& kinds();

  PromptPair render(const std::string& kind, const PromptVars& vars) const;
  bool has(const std::string& kind) const { return templates_.count(kind) != 0; }

 private:
  std::map<std::string, PromptPair> templates_;
};

}  // namespace balar
