#include "balar/loop.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <set>

#include "balar/dispatch.hpp"

namespace balar {

using nlohmann::json;

double target_entropy(double alpha, std::size_t total_states) {
  if (total_states < 2) throw ConfigError("target entropy needs at least two states");
  if (!(alpha >= 0.0 && alpha < 1.0)) throw ConfigError("alpha must lie in [0, 1)");
  if (alpha == 0.0) return 0.0;
  const double rest = static_cast<double>(total_states - 1);
  return -(1.0 - alpha) * std::log1p(-alpha) - alpha * std::log(alpha / rest);
}

double entropy_gap(const Belief& b, double alpha) {
  if (b.size() < 2) return 0.0;
  return std::max(0.0, entropy(b) - target_entropy(alpha, b.size()));
}

bool should_expand(double gap, double i_star, double lambda, long T, long t) {
  return gap > lambda * i_star * static_cast<double>(T - t);
}

long min_rounds(double gap, double i_star) {
  if (gap <= 0.0) return 0;
  if (i_star <= 0.0) return kUnboundedRounds;
  const double r = std::ceil(gap / i_star);
  if (r >= static_cast<double>(kUnboundedRounds)) return kUnboundedRounds;
  return static_cast<long>(r);
}

const char* to_string(Status s) noexcept {
  switch (s) {
    case Status::Running: return "running";
    case Status::ConvergedAnswer: return "converged-answer";
    case Status::ConvergedMarginal: return "converged-marginal";
    case Status::BudgetExhausted: return "budget-exhausted";
    case Status::ExpandCapped: return "expand-capped";
    case Status::Error: return "error";
  }
  return "unknown";
}

const StateKernel& SessionState::kernel(const PairId& pair) const {
  for (const auto& k : kernels) {
    if (k.question_id() == pair.question_id && k.user_id() == pair.user_id) return k;
  }
  throw MismatchError("no kernel for (" + pair.question_id + ", " + pair.user_id + ")");
}

const Question& SessionState::question(const std::string& id) const {
  for (const auto& q : questions) {
    if (q.id == id) return q;
  }
  throw MismatchError("unknown question '" + id + "'");
}

Verdict check_convergence(const SessionState& s, const LoopConfig& cfg) {
  Verdict v;
  const std::size_t p = s.space->dim_count();
  std::size_t concentrated = 0;
  for (std::size_t j = 0; j < p; ++j) {
    const auto m = marginal(s.belief, j);
    if (*std::max_element(m.begin(), m.end()) >= 1.0 - cfg.alpha) ++concentrated;
  }
  v.marginal_fraction = p == 0 ? 0.0 : static_cast<double>(concentrated) / static_cast<double>(p);
  if (s.answer_kernel) {
    const auto pa = predictive(s.belief, *s.answer_kernel);
    v.answer_max = *std::max_element(pa.begin(), pa.end());
  }

  if (s.t > cfg.T || s.n_asked >= cfg.T_ask) {
    v.status = Status::BudgetExhausted;
  } else if (v.answer_max && *v.answer_max >= 1.0 - cfg.alpha) {
    v.status = Status::ConvergedAnswer;
  } else if (p > 0 && v.marginal_fraction >= cfg.beta) {
    v.status = Status::ConvergedMarginal;
  }
  return v;
}

json map_summary(const Belief& b) {
  const auto idx = map_index(b);
  const auto a = b.space().assignment(idx);
  json dims = json::array();
  for (std::size_t j = 0; j < a.size(); ++j) {
    const auto& d = b.space().dim(j);
    const auto m = marginal(b, j);
    dims.push_back({{"id", d.id},
                    {"name", d.name},
                    {"value_id", d.values[a[j]].id},
                    {"value", d.values[a[j]].text},
                    {"marginal", m[a[j]]}});
  }
  return {{"probability", b.prob(idx)}, {"dimensions", std::move(dims)}};
}

std::vector<double> marginal_entropies(const Belief& b) {
  std::vector<double> out;
  for (std::size_t j = 0; j < b.space().dim_count(); ++j) out.push_back(entropy(std::span<const double>(marginal(b, j))));
  return out;
}

namespace {

std::string fresh_id(const std::string& wanted, const std::string& prefix, std::size_t index,
                     std::set<std::string>& taken) {
  if (!wanted.empty() && taken.insert(wanted).second) return wanted;
  for (std::size_t i = index;; ++i) {
    auto id = prefix + std::to_string(i);
    if (taken.insert(id).second) return id;
  }
}

Dimension make_dimension(const DimensionProposal& prop, std::size_t index, std::set<std::string>& taken_dims) {
  Dimension d;
  d.id = fresh_id(prop.id, "d", index, taken_dims);
  d.name = prop.name;
  std::set<std::string> taken_values;
  for (std::size_t k = 0; k < prop.values.size(); ++k) {
    d.values.push_back({fresh_id(prop.values[k].id, "v", k, taken_values), prop.values[k].text});
  }
  return d;
}

Question make_question(const QuestionProposal& prop, std::size_t& next_index, std::set<std::string>& taken) {
  Question q;
  q.id = fresh_id(prop.id, "q", next_index, taken);
  ++next_index;
  q.text = prop.text;
  q.reason = prop.reason;
  std::set<std::string> taken_choices;
  for (std::size_t k = 0; k < prop.choices.size(); ++k) {
    q.choices.push_back({fresh_id(prop.choices[k].id, "c", k, taken_choices), prop.choices[k].text});
  }
  return q;
}

std::set<std::string> question_ids(const std::vector<Question>& qs) {
  std::set<std::string> out;
  for (const auto& q : qs) out.insert(q.id);
  return out;
}

/// One prior call per value of `d`, fanned out in parallel.
PriorVector elicit_prior(Elicitor& e, const Instance& inst, const Dimension& d, const ConversationLog* history,
                         const LoopConfig& cfg) {
  std::vector<std::function<Labeled()>> calls;
  for (const auto& v : d.values) {
    calls.emplace_back([&e, &inst, &d, &v, history] { return e.elicit_prior_label(inst, d, v, history); });
  }
  const auto labeled = dispatch_parallel(calls, cfg.max_concurrency);
  std::vector<std::string> labels;
  for (const auto& l : labeled) labels.push_back(l.label);
  return {d.id, labels_to_distribution(labels, cfg.label_map)};
}

struct TableJob {
  const Question* q;
  const User* u;
  const Dimension* d;
};

void elicit_tables(Elicitor& e, const Instance& inst, const std::vector<TableJob>& jobs,
                   const ConversationLog* history, const LoopConfig& cfg, SessionState& s) {
  std::vector<std::function<LabelGrid()>> calls;
  for (const auto& job : jobs) {
    calls.emplace_back([&e, &inst, job, history] { return e.fill_likelihood_labels(inst, *job.q, *job.u, *job.d, history); });
  }
  const auto grids = dispatch_parallel(calls, cfg.max_concurrency);
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    const auto& job = jobs[i];
    s.tables.insert_or_assign({job.q->id, job.u->id, job.d->id},
                              build_dim_table(job.q->id, job.u->id, job.d->id, grids[i], cfg.label_map));
  }
}

DimLikelihoodTable elicit_answer_table(Elicitor& e, const Instance& inst, const Dimension& d, const LoopConfig& cfg) {
  return build_dim_table("answer", "", d.id, e.fill_answer_likelihood_labels(inst, d), cfg.label_map);
}

void rebuild_kernels(SessionState& s) {
  std::vector<StateKernel> kernels;
  for (const auto& q : s.questions) {
    for (const auto& u : s.instance.users) {
      std::vector<DimLikelihoodTable> tabs;
      for (const auto& d : s.space->dims()) {
        const auto it = s.tables.find({q.id, u.id, d.id});
        if (it == s.tables.end()) {
          throw MismatchError("missing likelihood table for (" + q.id + ", " + u.id + ", " + d.id + ")");
        }
        tabs.push_back(it->second);
      }
      kernels.push_back(build_question_kernel(tabs, s.space));
    }
  }
  s.kernels = std::move(kernels);
  if (!s.answer_tables.empty()) s.answer_kernel = build_answer_kernel(s.answer_tables, s.space).combined;
}

json priors_json(const std::vector<PriorVector>& priors) {
  json out = json::array();
  for (const auto& p : priors) out.push_back({{"dim_id", p.dim_id}, {"probs", p.probs}});
  return out;
}

json marginals_json(const Belief& b) {
  json out = json::object();
  for (std::size_t j = 0; j < b.space().dim_count(); ++j) out[b.space().dim(j).id] = marginal(b, j);
  return out;
}

json decision_json(const SessionState& s, const LoopConfig& cfg, double i_star) {
  const double gap = entropy_gap(s.belief, cfg.alpha);
  const long k = min_rounds(gap, i_star);
  return {{"entropy", entropy(s.belief)},
          {"target_entropy", s.belief.size() >= 2 ? target_entropy(cfg.alpha, s.belief.size()) : 0.0},
          {"gap", gap},
          {"i_star", i_star},
          {"min_rounds", k == kUnboundedRounds ? json(nullptr) : json(k)}};
}

}  // namespace

Session::Session(Instance instance, Elicitor& elicitor, LoopConfig cfg)
    : instance_(std::move(instance)), elicitor_(&elicitor), cfg_(std::move(cfg)) {}

const SessionState& Session::state() const {
  if (!state_) throw SessionConflict("session is not initialized");
  return *state_;
}

void Session::require_running(const char* op) const {
  if (!state_) throw SessionConflict(std::string(op) + ": session is not initialized");
  if (is_terminal(state_->status)) {
    throw SessionConflict(std::string(op) + ": session is " + to_string(state_->status));
  }
}

void Session::fail(const std::exception& e, const char* during) {
  json payload = {{"during", during}, {"message", e.what()}};
  if (const auto* ee = dynamic_cast<const ElicitationError*>(&e)) payload["call_kind"] = ee->call_kind();
  transcript_.append(state_ ? state_->t : 0, "error", std::move(payload));
}

void Session::initialize() {
  if (state_) throw SessionConflict("session is already initialized");
  try {
    instance_.validate();
    cfg_.validate();
    Elicitor& e = *elicitor_;
    const Instance& inst = instance_;

    // Step 1: dimensions.
    const auto props = e.propose_dimensions(inst, cfg_.initial_dims, cfg_.max_values_per_dim);
    std::set<std::string> taken_dims;
    std::vector<Dimension> dims;
    for (std::size_t j = 0; j < props.size(); ++j) dims.push_back(make_dimension(props[j], j, taken_dims));
    auto space = StateSpace::create(dims, {cfg_.state_cap, cfg_.max_values_per_dim});

    // Step 2: priors, one call per value.
    std::vector<std::function<Labeled()>> prior_calls;
    for (const auto& d : space->dims()) {
      for (const auto& v : d.values) {
        prior_calls.emplace_back([&e, &inst, &d, &v] { return e.elicit_prior_label(inst, d, v, nullptr); });
      }
    }
    const auto prior_labels = dispatch_parallel(prior_calls, cfg_.max_concurrency);
    std::vector<PriorVector> priors;
    std::size_t cursor = 0;
    for (const auto& d : space->dims()) {
      std::vector<std::string> labels;
      for (std::size_t k = 0; k < d.size(); ++k) labels.push_back(prior_labels[cursor++].label);
      priors.push_back({d.id, labels_to_distribution(labels, cfg_.label_map)});
    }

    // Step 3: questions.
    const auto qprops =
        e.generate_questions(inst, space->dims(), cfg_.initial_questions, cfg_.max_choices_per_question);
    SessionState s{.instance = inst, .space = space, .belief = init_belief(priors, space), .priors = priors};
    std::set<std::string> taken_q;
    for (const auto& qp : qprops) s.questions.push_back(make_question(qp, s.next_question_index, taken_q));

    // Step 4: one table per (question, user, dimension), plus answer tables.
    std::vector<TableJob> jobs;
    for (const auto& q : s.questions) {
      for (const auto& u : inst.users) {
        for (const auto& d : space->dims()) jobs.push_back({&q, &u, &d});
      }
    }
    elicit_tables(e, inst, jobs, nullptr, cfg_, s);
    if (inst.has_answer_set()) {
      std::vector<std::function<DimLikelihoodTable()>> calls;
      for (const auto& d : space->dims()) {
        calls.emplace_back([&e, &inst, &d, this] { return elicit_answer_table(e, inst, d, cfg_); });
      }
      s.answer_tables = dispatch_parallel(calls, cfg_.max_concurrency);
    }
    rebuild_kernels(s);

    json questions = json::array();
    for (const auto& q : s.questions) questions.push_back(q.to_json());
    json payload = {{"instance", inst.to_json()},
                    {"config", cfg_.to_json()},
                    {"space", space->to_json()},
                    {"priors", priors_json(priors)},
                    {"questions", std::move(questions)},
                    {"pairs", s.kernels.size()},
                    {"answer_set", inst.has_answer_set()},
                    {"marginals", marginals_json(s.belief)}};
    payload.update(decision_json(s, cfg_, 0.0));
    payload.erase("i_star");
    payload.erase("min_rounds");
    state_ = std::move(s);
    transcript_.append(state_->t, "init", std::move(payload));
  } catch (const std::exception& ex) {
    fail(ex, "init");
    throw;
  }
}

void Session::expand(SessionState& s, bool) {
  Elicitor& e = *elicitor_;
  const Instance& inst = instance_;
  const ConversationLog history = s.conversation;
  const std::size_t p = s.space->dim_count();

  // 1. New dimension, conditioned on the history.
  const auto prop = e.propose_new_dimension(inst, s.space->dims(), history, cfg_.max_values_per_dim);
  std::set<std::string> taken;
  for (const auto& d : s.space->dims()) taken.insert(d.id);
  const Dimension nd = make_dimension(prop, p, taken);
  if (s.space->total_states() * nd.size() > cfg_.state_cap) {
    throw StateCapExceeded("adding '" + nd.name + "' would give " + std::to_string(s.space->total_states() * nd.size()) +
                           " states, above the cap of " + std::to_string(cfg_.state_cap));
  }

  // 2. Its prior, conditioned on the history.
  const PriorVector prior = elicit_prior(e, inst, nd, &history, cfg_);
  if (inst.has_answer_set()) s.answer_tables.push_back(elicit_answer_table(e, inst, nd, cfg_));

  // 3. Outer-product extension.
  const auto old_entropies = marginal_entropies(s.belief);
  s.belief = extend_belief(s.belief, nd, prior);
  s.space = s.belief.space_ptr();
  s.priors.push_back(prior);
  const Dimension& new_dim = s.space->dims().back();

  // 4. New-dimension tables for every existing (question, user).
  std::vector<TableJob> jobs;
  for (const auto& q : s.questions) {
    for (const auto& u : inst.users) jobs.push_back({&q, &u, &new_dim});
  }
  elicit_tables(e, inst, jobs, &history, cfg_, s);

  // 5. New questions aimed at the new dimension and the most uncertain old ones.
  std::vector<std::size_t> order(p);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return old_entropies[a] > old_entropies[b]; });
  order.resize(std::min(order.size(), cfg_.top_entropy_dims_for_expand));
  std::vector<Dimension> top;
  for (auto j : order) top.push_back(s.space->dim(j));
  const auto qprops = e.generate_expanded_questions(inst, history, new_dim, top, cfg_.max_new_questions_per_expand,
                                                    cfg_.max_choices_per_question);
  auto taken_q = question_ids(s.questions);
  const std::size_t first_new = s.questions.size();
  for (const auto& qp : qprops) s.questions.push_back(make_question(qp, s.next_question_index, taken_q));

  // 6. Tables for the new questions over every dimension, then rebuild.
  jobs.clear();
  for (std::size_t i = first_new; i < s.questions.size(); ++i) {
    for (const auto& u : inst.users) {
      for (const auto& d : s.space->dims()) jobs.push_back({&s.questions[i], &u, &d});
    }
  }
  elicit_tables(e, inst, jobs, &history, cfg_, s);
  rebuild_kernels(s);
  ++s.expand_count;
}

json Session::expand_payload(const SessionState& before, const SessionState& after, bool manual) const {
  const auto& nd = after.space->dims().back();
  json values = json::array();
  for (const auto& v : nd.values) values.push_back({{"id", v.id}, {"text", v.text}});
  json questions = json::array();
  for (std::size_t i = before.questions.size(); i < after.questions.size(); ++i) {
    questions.push_back(after.questions[i].to_json());
  }
  return {{"manual", manual},
          {"dimension", {{"id", nd.id}, {"name", nd.name}, {"values", std::move(values)}}},
          {"prior", after.priors.back().probs},
          {"total_states", after.space->total_states()},
          {"pre_entropy", entropy(before.belief)},
          {"post_entropy", entropy(after.belief)},
          {"new_questions", std::move(questions)},
          {"pairs", after.kernels.size()},
          {"marginals", marginals_json(after.belief)}};
}

void Session::finish(Status status) {
  SessionState& s = *state_;
  const auto summary = map_summary(s.belief);
  FinalAnswer fa;
  try {
    fa = elicitor_->final_answer(instance_, s.conversation, summary);
  } catch (const std::exception& ex) {
    fail(ex, "final-answer");
    throw;
  }
  const auto v = check_convergence(s, cfg_);
  json conv = {{"status", to_string(status)},
               {"t", s.t},
               {"n_asked", s.n_asked},
               {"expand_count", s.expand_count},
               {"marginal_fraction", v.marginal_fraction},
               {"answer_max", v.answer_max ? json(*v.answer_max) : json(nullptr)},
               {"entropy", entropy(s.belief)}};
  s.status = status;
  s.final_answer = fa;
  transcript_.append(s.t, "converge", std::move(conv));
  transcript_.append(s.t, "final-answer",
                     {{"map_state", summary},
                      {"final_answer", fa.text},
                      {"final_answer_id", fa.answer_id},
                      {"reason", fa.reason}});
}

StepKind Session::step() {
  require_running("step");
  SessionState& s = *state_;
  if (s.pending) throw SessionConflict("step: an ask is pending");

  const auto verdict = check_convergence(s, cfg_);
  if (verdict.status != Status::Running) {
    finish(verdict.status);
    return StepKind::Terminal;
  }

  const auto ranking = rank_pairs(s.belief, s.kernels, s.asked, s.t);
  const bool none = ranking.entries.empty();
  if (none && s.space->at_cap()) {
    finish(Status::ExpandCapped);
    return StepKind::Terminal;
  }
  const double i_star = none ? 0.0 : ranking.entries.front().mi;
  const double gap = entropy_gap(s.belief, cfg_.alpha);

  if (none || should_expand(gap, i_star, cfg_.lambda, cfg_.T, s.t)) {
    auto decision = decision_json(s, cfg_, i_star);
    if (s.space->at_cap()) {
      finish(Status::ExpandCapped);
      return StepKind::Terminal;
    }
    SessionState next = s;
    try {
      expand(next, false);
    } catch (const StateCapExceeded& ex) {
      transcript_.append(s.t, "expand-refused", {{"manual", false}, {"message", ex.what()}});
      finish(Status::ExpandCapped);
      return StepKind::Terminal;
    } catch (const std::exception& ex) {
      fail(ex, "expand");
      throw;
    }
    auto payload = expand_payload(s, next, false);
    payload["trigger"] = std::move(decision);
    payload["trigger"]["no_unasked_pair"] = none;
    const long round = s.t;
    next.t += 1;
    s = std::move(next);
    transcript_.append(round, "expand", std::move(payload));
    return StepKind::Expanded;
  }

  const auto& top = ranking.entries.front();
  const auto& q = s.question(top.pair.question_id);
  s.pending = PendingAsk{top.pair, q.text, q.choices, s.t, top.mi};
  json choices = json::array();
  for (const auto& c : q.choices) choices.push_back({{"id", c.id}, {"text", c.text}});
  json payload = {{"question_id", top.pair.question_id},
                  {"user_id", top.pair.user_id},
                  {"question_text", q.text},
                  {"choices", std::move(choices)},
                  {"mi", top.mi}};
  payload.update(decision_json(s, cfg_, i_star));
  transcript_.append(s.t, "ask", std::move(payload));
  return StepKind::PendingAsk;
}

void Session::submit_answer(const std::string& text) {
  require_running("answer");
  SessionState& s = *state_;
  if (!s.pending) throw SessionConflict("answer: no ask is pending");
  const PendingAsk pending = *s.pending;
  const Question& q = s.question(pending.pair.question_id);

  std::vector<std::string> labels;
  try {
    labels = elicitor_->soft_map_labels(text, q);
  } catch (const std::exception& ex) {
    fail(ex, "soft-map");
    throw;
  }
  const auto obs = soft_observation(q.id, labels, cfg_.label_map);
  const auto lhat = effective_likelihood(s.kernel(pending.pair), obs);

  HistoryEntry h{s.t, pending.pair, q.text, text, labels, obs.weights, entropy(s.belief), 0.0, false};
  try {
    s.belief = bayes_update(s.belief, lhat);
    h.post_entropy = entropy(s.belief);
  } catch (const DegenerateObservation&) {
    h.rejected = true;
    h.post_entropy = h.pre_entropy;
  }
  const long round = s.t;
  s.history.push_back(h);
  s.asked.insert(pending.pair);
  s.n_asked += 1;
  s.conversation.push_back({q.text, s.instance.user(pending.pair.user_id).name, text});
  s.pending.reset();
  s.t += 1;
  transcript_.append(round, h.rejected ? "update-rejected" : "update",
                     {{"question_id", pending.pair.question_id},
                      {"user_id", pending.pair.user_id},
                      {"answer_text", text},
                      {"labels", labels},
                      {"weights", obs.weights},
                      {"pre_entropy", h.pre_entropy},
                      {"post_entropy", h.post_entropy},
                      {"marginals", marginals_json(s.belief)}});
}

void Session::expand_manual() {
  require_running("expand");
  SessionState& s = *state_;
  if (s.pending) throw SessionConflict("expand: an ask is pending");
  if (s.space->at_cap()) {
    const StateCapExceeded ex("expand: the state space is at its cap of " + std::to_string(cfg_.state_cap));
    transcript_.append(s.t, "expand-refused", {{"manual", true}, {"message", ex.what()}});
    throw ex;
  }
  SessionState next = s;
  try {
    expand(next, true);
  } catch (const StateCapExceeded& ex) {
    transcript_.append(s.t, "expand-refused", {{"manual", true}, {"message", ex.what()}});
    throw;
  } catch (const std::exception& ex) {
    fail(ex, "expand");
    throw;
  }
  auto payload = expand_payload(s, next, true);
  const long round = s.t;
  next.t += 1;
  s = std::move(next);
  transcript_.append(round, "expand", std::move(payload));
}

RunResult run_session(const Instance& instance, Elicitor& elicitor, Answerer& answerer, const LoopConfig& cfg) {
  RunResult r;
  Session session(instance, elicitor, cfg);
  try {
    session.initialize();
    while (session.step() != StepKind::Terminal) {
      const auto& s = session.state();
      if (!s.pending) continue;
      const auto& q = s.question(s.pending->pair.question_id);
      const auto& u = s.instance.user(s.pending->pair.user_id);
      const auto reply = answerer.answer(s.instance, u, q, s.conversation);
      session.submit_answer(reply);
    }
    r.status = session.state().status;
  } catch (const ElicitationError& e) {
    r.status = Status::Error;
    r.error = e.what();
    r.error_call_kind = e.call_kind();
  } catch (const std::exception& e) {
    r.status = Status::Error;
    r.error = e.what();
  }
  if (session.initialized()) {
    const auto& s = session.state();
    r.final_answer = s.final_answer;
    r.map_state = map_state(s.belief);
    r.state = s;
  }
  r.transcript = session.transcript();
  return r;
}

namespace {

bool same_event(const json& a, const json& b) {
  return a.at("kind") == b.at("kind") && a.at("round") == b.at("round") && a.at("payload") == b.at("payload");
}

}  // namespace

Session replay_session(const Instance& instance, Elicitor& elicitor, const LoopConfig& cfg,
                       const Transcript& recorded) {
  Session s(instance, elicitor, cfg);
  s.initialize();
  for (const auto& ev : recorded.events()) {
    const auto kind = ev.at("kind").get<std::string>();
    const auto& payload = ev.at("payload");
    if (kind == "ask" || kind == "converge") {
      if (s.state().pending || is_terminal(s.state().status)) continue;
      s.step();
    } else if (kind == "update" || kind == "update-rejected") {
      s.submit_answer(payload.at("answer_text").get<std::string>());
    } else if (kind == "expand") {
      if (payload.value("manual", false)) {
        s.expand_manual();
      } else {
        s.step();
      }
    } else if (kind == "expand-refused" && payload.value("manual", false)) {
      try {
        s.expand_manual();
      } catch (const StateCapExceeded&) {
      }
    }
  }
  std::vector<json> want;
  std::vector<json> got;
  for (const auto& e : recorded.events()) {
    if (e.at("kind") != "error") want.push_back(e);
  }
  for (const auto& e : s.transcript().events()) {
    if (e.at("kind") != "error") got.push_back(e);
  }
  if (want.size() != got.size()) {
    throw MismatchError("replay produced " + std::to_string(got.size()) + " events, the transcript has " +
                        std::to_string(want.size()));
  }
  for (std::size_t i = 0; i < want.size(); ++i) {
    if (!same_event(want[i], got[i])) {
      throw MismatchError("replay diverges at event " + std::to_string(i) + " (" +
                          want[i].at("kind").get<std::string>() + ")");
    }
  }
  return s;
}

}  // namespace balar
