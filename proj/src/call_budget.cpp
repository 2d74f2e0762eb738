#include "balar/call_budget.hpp"

namespace balar {

CallBudget estimate_call_budget(const BudgetInputs& in) {
  CallBudget b;
  const std::size_t answer_tables = in.has_answers ? in.p : 0;
  b.init_calls = 1 + in.p * in.n + 1 + in.q_count * in.u_count * in.p + answer_tables;
  b.ask_total = b.per_ask_calls * in.ask_rounds;

  std::size_t p = in.p;
  std::size_t q = in.q_count;
  for (std::size_t r = 0; r < in.expand_rounds; ++r) {
    const std::size_t cost = 1 + in.n + (in.has_answers ? 1 : 0) + q * in.u_count + 1 + in.q_new * in.u_count * (p + 1);
    b.per_expand_calls.push_back(cost);
    b.expand_total += cost;
    p += 1;
    q += in.q_new;
  }
  b.total = b.init_calls + b.ask_total + b.expand_total + b.final_calls;
  return b;
}

nlohmann::json CallBudget::to_json() const {
  return {{"init_calls", init_calls},   {"per_ask_calls", per_ask_calls}, {"per_expand_calls", per_expand_calls},
          {"ask_total", ask_total},     {"expand_total", expand_total},   {"final_calls", final_calls},
          {"total", total}};
}

}  // namespace balar
