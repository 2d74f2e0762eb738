#include <doctest.h>

#include "balar/call_budget.hpp"
#include "balar/loop.hpp"
#include "balar/scripted_oracle.hpp"
#include "fixture_builder.hpp"

using namespace balar;
using nlohmann::json;

namespace {

Fixture medical() { return Fixture::load(std::string(BALAR_FIXTURES_DIR) + "/medical_headache.json"); }

LoopConfig config_of(const Fixture& f) { return LoopConfig::merged(LoopConfig{}, f.config); }

RunResult run_fixture(const Fixture& f) {
  const auto cfg = config_of(f);
  ScriptedOracle oracle(f, cfg.label_map, cfg.max_retries);
  return run_session(f.instance, oracle, oracle, cfg);
}

std::vector<std::string> kinds(const Transcript& t) {
  std::vector<std::string> out;
  for (const auto& e : t.events()) out.push_back(e.at("kind"));
  return out;
}

}  // namespace

TEST_CASE("medical fixture: golden path") {
  const auto r = run_fixture(medical());
  REQUIRE(r.status == Status::BudgetExhausted);
  REQUIRE(r.state);
  const auto& space = *r.state->space;
  REQUIRE(space.dim_count() == 3);
  CHECK(space.dim(0).values[r.map_state[0]].id == "vascular");
  CHECK(space.dim(1).values[r.map_state[1]].id == "episodic");
  CHECK(space.dim(2).values[r.map_state[2]].id == "absent");
  REQUIRE(r.final_answer);
  CHECK(r.final_answer->text == "Migraine without aura");
  CHECK(kinds(r.transcript) == std::vector<std::string>{"init", "ask", "update", "ask", "update", "ask", "update",
                                                        "expand", "ask", "update", "converge", "final-answer"});
  CHECK(r.state->n_asked == 4);
  CHECK(r.state->expand_count == 1);
  CHECK(r.state->t == 6);
}

TEST_CASE("medical fixture: transcripts are byte-identical across runs") {
  const auto a = run_fixture(medical());
  const auto b = run_fixture(medical());
  CHECK(a.transcript.to_jsonl() == b.transcript.to_jsonl());
}

TEST_CASE("medical fixture: initial state and the first update") {
  const auto f = medical();
  const auto cfg = config_of(f);
  ScriptedOracle oracle(f, cfg.label_map);
  Session s(f.instance, oracle, cfg);
  s.initialize();
  const auto& st = s.state();
  CHECK(st.space->total_states() == 6);
  const auto m0 = marginal(st.belief, "vascular_involvement");
  CHECK(m0[0] == doctest::Approx(5.0 / 13.0).epsilon(1e-14));
  const auto m1 = marginal(st.belief, "trigger_pattern");
  CHECK(m1[0] == doctest::Approx(8.0 / 15.0).epsilon(1e-14));
  const std::vector<double> pv{5.0 / 13, 8.0 / 13}, pt{8.0 / 15, 5.0 / 15, 2.0 / 15};
  CHECK(entropy(st.belief) == doctest::Approx(entropy(pv) + entropy(pt)).epsilon(1e-14));

  const std::size_t ve = st.space->flat_index({0, 0});
  const double before = st.belief.prob(ve);
  CHECK(before == doctest::Approx(0.2051282051).epsilon(1e-9));
  REQUIRE(s.step() == StepKind::PendingAsk);
  CHECK_THROWS_AS(s.step(), SessionConflict);
  CHECK_THROWS_AS(s.expand_manual(), SessionConflict);
  const auto& q = st.question(st.pending->pair.question_id);
  s.submit_answer(oracle.answer(f.instance, f.instance.users[0], q, st.conversation));
  CHECK(s.state().belief.prob(ve) > before);
  CHECK_THROWS_AS(s.submit_answer("again"), SessionConflict);
}

TEST_CASE("replay reproduces a recorded session and detects divergence") {
  const auto f = medical();
  const auto cfg = config_of(f);
  const auto r = run_fixture(f);
  {
    ScriptedOracle oracle(f, cfg.label_map);
    const auto s = replay_session(f.instance, oracle, cfg, r.transcript);
    CHECK(s.transcript().to_jsonl() == r.transcript.to_jsonl());
  }
  auto events = r.transcript.to_json();
  for (auto& e : events) {
    if (e.at("kind") == "update") {
      e["payload"]["post_entropy"] = 0.0;
      break;
    }
  }
  std::string text;
  for (const auto& e : events) text += e.dump() + "\n";
  ScriptedOracle oracle(f, cfg.label_map);
  CHECK_THROWS_AS(replay_session(f.instance, oracle, cfg, Transcript::from_jsonl(text)), MismatchError);
}

TEST_CASE("missing likelihood entry fails initialization with the triple named") {
  auto f = medical();
  f.calls.erase("likelihood/q1/u0/trigger_pattern");
  const auto r = run_fixture(f);
  CHECK(r.status == Status::Error);
  CHECK(r.error_call_kind == "likelihood");
  CHECK(r.error.find("likelihood/q1/u0/trigger_pattern") != std::string::npos);
  CHECK(r.transcript.back().at("kind") == "error");
}

TEST_CASE("soft-map failure keeps the pending ask for a retry") {
  auto f = medical();
  f.calls["soft_map/q0"] = {{"labels", {"likely"}}};
  const auto cfg = config_of(f);
  ScriptedOracle oracle(f, cfg.label_map, 1);
  Session s(f.instance, oracle, cfg);
  s.initialize();
  REQUIRE(s.step() == StepKind::PendingAsk);
  CHECK_THROWS_AS(s.submit_answer("Yes, it throbs."), ElicitationError);
  CHECK(s.state().pending.has_value());
  CHECK(s.state().status == Status::Running);
  CHECK(s.state().n_asked == 0);
  CHECK(s.transcript().back().at("kind") == "error");
  CHECK(s.transcript().back().at("payload").at("call_kind") == "soft_map");
}

TEST_CASE("neutral soft map is recorded but leaves the belief alone") {
  auto f = medical();
  f.calls["soft_map/q0"] = {{"labels", {"neutral", "neutral"}}};
  const auto cfg = config_of(f);
  ScriptedOracle oracle(f, cfg.label_map);
  Session s(f.instance, oracle, cfg);
  s.initialize();
  const auto before = s.state().belief.probs();
  s.step();
  s.submit_answer("Hard to say.");
  const auto after = s.state().belief.probs();
  for (std::size_t i = 0; i < before.size(); ++i) CHECK(std::abs(before[i] - after[i]) <= 1e-12);
  const auto& ev = s.transcript().back();
  CHECK(ev.at("payload").at("pre_entropy").get<double>() ==
        doctest::Approx(ev.at("payload").at("post_entropy").get<double>()).epsilon(1e-12));
}

TEST_CASE("manual expansion at the cap is refused and the session keeps running") {
  testing::SynthShape shape{.p = 2, .n = 2, .q = 2, .u = 1, .expands = 1};
  const auto f = Fixture::from_json(testing::synth_fixture(shape, {{"state_cap", 4}, {"initial_dims", 2}}));
  const auto cfg = config_of(f);
  ScriptedOracle oracle(f, cfg.label_map);
  Session s(f.instance, oracle, cfg);
  s.initialize();
  CHECK_THROWS_AS(s.expand_manual(), StateCapExceeded);
  CHECK(s.state().status == Status::Running);
  CHECK(s.transcript().back().at("kind") == "expand-refused");
  // Asking continues; once the bank is exhausted the loop stops at the cap.
  for (int i = 0; i < 2; ++i) {
    REQUIRE(s.step() == StepKind::PendingAsk);
    s.submit_answer("maybe");
  }
  CHECK(s.step() == StepKind::Terminal);
  CHECK(s.state().status == Status::ExpandCapped);
}

TEST_CASE("manual expansion adds a dimension and counts as a round") {
  testing::SynthShape shape{.p = 2, .n = 2, .q = 2, .u = 1, .expands = 1, .q_new = 1};
  const auto f = Fixture::from_json(testing::synth_fixture(shape, {{"initial_dims", 2}}));
  const auto cfg = config_of(f);
  ScriptedOracle oracle(f, cfg.label_map);
  Session s(f.instance, oracle, cfg);
  s.initialize();
  const double h0 = entropy(s.state().belief);
  s.expand_manual();
  CHECK(s.state().space->dim_count() == 3);
  CHECK(s.state().t == 2);
  CHECK(s.state().n_asked == 0);
  CHECK(s.state().kernels.size() == 3);
  CHECK(entropy(s.state().belief) - h0 == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(s.transcript().back().at("payload").at("manual") == true);
}

TEST_CASE("expansion fires when the gap cannot be closed within the round budget") {
  testing::SynthShape shape{.p = 3, .n = 2, .q = 3, .u = 1, .expands = 1, .q_new = 1};
  const auto f = Fixture::from_json(testing::synth_fixture(shape, {{"initial_dims", 3}, {"T", 2}, {"T_ask", 2}}));
  const auto cfg = config_of(f);
  ScriptedOracle oracle(f, cfg.label_map);
  Session s(f.instance, oracle, cfg);
  s.initialize();
  CHECK(s.step() == StepKind::Expanded);
  CHECK(s.state().space->dim_count() == 4);
  CHECK_FALSE(s.state().pending.has_value());
  const auto& trig = s.transcript().back().at("payload").at("trigger");
  CHECK(trig.at("no_unasked_pair") == false);
  CHECK(trig.at("gap").get<double>() > trig.at("i_star").get<double>());
}

TEST_CASE("answer-probability rule is checked before the marginal rule") {
  const auto make = [](std::size_t answers) {
    testing::SynthShape shape{.p = 1, .n = 2, .q = 2, .u = 1, .answers = answers};
    auto j = testing::synth_fixture(shape, {{"initial_dims", 1}, {"alpha", 0.4}});
    j["calls"]["soft_map/q0"] = {{"labels", {"likely", "unlikely"}}};
    if (answers > 0) j["calls"]["answer_likelihood/d0"] = testing::split_grid(2);
    return Fixture::from_json(j);
  };
  SUBCASE("with an answer set") {
    const auto r = run_fixture(make(2));
    CHECK(r.status == Status::ConvergedAnswer);
    CHECK(r.state->n_asked == 1);
    const auto& conv = r.transcript.events()[r.transcript.size() - 2].at("payload");
    CHECK(conv.at("answer_max").get<double>() == doctest::Approx(0.608).epsilon(1e-12));
    REQUIRE(r.final_answer);
    CHECK(r.final_answer->answer_id == "a0");
  }
  SUBCASE("without one") {
    const auto r = run_fixture(make(0));
    CHECK(r.status == Status::ConvergedMarginal);
    CHECK(r.state->n_asked == 1);
  }
}

TEST_CASE("call-budget audit on synthetic fixtures") {
  const std::vector<testing::SynthShape> shapes{
      {.p = 5, .n = 4, .q = 10, .u = 1, .answers = 3},
      {.p = 2, .n = 2, .q = 2, .u = 1, .expands = 1, .q_new = 1},
      {.p = 2, .n = 3, .q = 3, .u = 2, .expands = 2, .q_new = 2, .new_n = 3},
      {.p = 3, .n = 2, .q = 4, .u = 1, .answers = 2, .expands = 1, .q_new = 2},
      {.p = 1, .n = 4, .q = 2, .u = 3, .expands = 1, .q_new = 1, .new_n = 4},
  };
  for (const auto& sh : shapes) {
    CAPTURE(sh.p);
    CAPTURE(sh.q);
    const long t_ask = static_cast<long>(sh.q * sh.u + sh.expands * sh.q_new * sh.u);
    const auto f = Fixture::from_json(testing::synth_fixture(
        sh, {{"initial_dims", sh.p},
             {"initial_questions", sh.q},
             {"max_new_questions_per_expand", sh.q_new},
             {"T_ask", t_ask}}));
    const auto cfg = config_of(f);
    ScriptedOracle oracle(f, cfg.label_map);
    Session s(f.instance, oracle, cfg);
    s.initialize();
    const auto init = oracle.call_log()->count();
    while (s.step() != StepKind::Terminal) {
      if (!s.state().pending) continue;
      const auto& st = s.state();
      s.submit_answer(oracle.answer(f.instance, st.instance.user(st.pending->pair.user_id),
                                    st.question(st.pending->pair.question_id), st.conversation));
    }
    const auto& st = s.state();
    const auto est = estimate_call_budget({sh.p, sh.n, sh.q, sh.u, sh.answers > 0,
                                           static_cast<std::size_t>(st.n_asked),
                                           static_cast<std::size_t>(st.expand_count), sh.q_new});
    CHECK(init == est.init_calls);
    CHECK(oracle.call_log()->count() == est.total);
    CHECK(static_cast<std::size_t>(st.expand_count) == (sh.p == 5 ? 0 : sh.expands));
  }
}
