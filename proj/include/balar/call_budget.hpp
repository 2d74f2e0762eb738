#pragma once

#include <cstddef>
#include <vector>

#include <nlohmann/json.hpp>

namespace balar {

struct CallBudget {
  std::size_t init_calls = 0;
  std::size_t per_ask_calls = 2;
  /// Cost of each expand round in order; dimensions and the question bank grow between them.
  std::vector<std::size_t> per_expand_calls;
  std::size_t ask_total = 0;
  std::size_t expand_total = 0;
  std::size_t final_calls = 1;
  std::size_t total = 0;

  nlohmann::json to_json() const;
};

struct BudgetInputs {
  std::size_t p = 0;        ///< initial dimensions
  std::size_t n = 0;        ///< values per dimension (also used for each new dimension)
  std::size_t q_count = 0;  ///< initial questions
  std::size_t u_count = 0;  ///< users
  bool has_answers = false;
  std::size_t ask_rounds = 0;
  std::size_t expand_rounds = 0;
  std::size_t q_new = 0;  ///< questions generated per expand round
};

/// Init: 1 + p*n + 1 + |Q||U|p (+ p with an answer set). ASK: 2 per round.
/// EXPAND (at p dims, |Q| questions): 1 + n + [answers] + |Q||U| + 1 + |Q'||U|(p+1).
CallBudget estimate_call_budget(const BudgetInputs& in);

}  // namespace balar
