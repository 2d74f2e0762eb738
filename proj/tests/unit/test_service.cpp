#include <doctest.h>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <thread>

#include <httplib.h>

#include "balar/scripted_oracle.hpp"
#include "balar/service.hpp"
#include "fixture_builder.hpp"

using namespace balar;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

/// Scratch directory holding the medical fixture plus a synthetic one.
struct Workspace {
  fs::path root;
  Workspace() {
    static std::atomic<int> counter{0};
    root = fs::temp_directory_path() / ("balar_service_" + std::to_string(::getpid()) + "_" +
                                        std::to_string(counter++));
    fs::create_directories(root / "fixtures");
    fs::copy_file(fs::path(BALAR_FIXTURES_DIR) / "medical_headache.json", root / "fixtures" / "medical.json");
    testing::SynthShape shape{.p = 2, .n = 2, .q = 2, .u = 1, .expands = 1};
    std::ofstream(root / "fixtures" / "capped.json")
        << testing::synth_fixture(shape, {{"state_cap", 4}, {"initial_dims", 2}}).dump();
    auto broken = json::parse(std::ifstream(fs::path(BALAR_FIXTURES_DIR) / "medical_headache.json"));
    broken["calls"].erase("likelihood/q1/u0/trigger_pattern");
    std::ofstream(root / "fixtures" / "broken.json") << broken.dump();
  }
  ~Workspace() { fs::remove_all(root); }
  ServiceOptions options(bool persist = false) const {
    ServiceOptions o;
    o.fixtures_dir = (root / "fixtures").string();
    if (persist) o.transcript_dir = (root / "transcripts").string();
    return o;
  }
};

std::string user_reply(const std::string& qid) {
  const auto f = Fixture::load(std::string(BALAR_FIXTURES_DIR) + "/medical_headache.json");
  return f.calls.at("user_answer/" + qid + "/u0").get<std::string>();
}

std::string create_medical(SessionService& svc) {
  const auto r = svc.create({{"elicitor", "scripted:medical"}});
  REQUIRE(r.status == 201);
  return r.body.at("session_id").get<std::string>();
}

}  // namespace

TEST_CASE("create validates the request") {
  Workspace ws;
  SessionService svc(ws.options());
  const auto ok = svc.create({{"elicitor", "scripted:medical"}});
  CHECK(ok.status == 201);
  CHECK(ok.body.at("total_states") == 6);
  CHECK(ok.body.at("status") == "running");
  CHECK(ok.body.at("t") == 1);
  CHECK(ok.body.at("pending").is_null());

  CHECK(svc.create(json::array()).status == 422);
  CHECK(svc.create({{"elicitor", "oracle"}}).status == 422);
  CHECK(svc.create({{"elicitor", "scripted:../etc/passwd"}}).status == 422);
  CHECK(svc.create({{"elicitor", "scripted:missing"}}).status == 422);
  CHECK(svc.create({{"elicitor", "scripted:medical"}, {"config", {{"alpha", 2.0}}}}).status == 422);
  const auto empty_prompt = svc.create(json::parse(R"({"elicitor": "scripted:medical",
      "instance": {"prompt": "", "users": [{"id": "u0", "name": "p"}]}})"));
  CHECK(empty_prompt.status == 422);

  const auto broken = svc.create({{"elicitor", "scripted:broken"}});
  CHECK(broken.status == 502);
  CHECK(broken.body.at("call_kind") == "likelihood");
  CHECK(broken.body.at("error").get<std::string>().find("likelihood/q1/u0/trigger_pattern") != std::string::npos);
  CHECK(svc.session_count() == 1);
}

TEST_CASE("step, answer and conflicts") {
  Workspace ws;
  SessionService svc(ws.options());
  const auto id = create_medical(svc);

  CHECK(svc.answer(id, {{"text", "yes"}}).status == 409);
  CHECK(svc.step("nope").status == 404);
  CHECK(svc.answer("nope", {{"text", "yes"}}).status == 404);
  CHECK(svc.view("nope", false).status == 404);

  const auto asked = svc.step(id);
  REQUIRE(asked.status == 200);
  const auto pending = asked.body.at("pending");
  REQUIRE(pending.is_object());
  CHECK(pending.at("choices").size() == 2);
  CHECK(pending.at("question_text").get<std::string>().size() > 0);
  CHECK(svc.step(id).status == 409);
  CHECK(svc.expand(id).status == 409);
  CHECK(svc.answer(id, json::object()).status == 422);
  CHECK(svc.answer(id, {{"text", "   "}}).status == 422);

  const auto before = svc.transcript(id).body.size();
  const auto updated = svc.answer(id, {{"text", user_reply(pending.at("question_id"))}});
  REQUIRE(updated.status == 200);
  CHECK(updated.body.at("pending").is_null());
  CHECK(updated.body.at("n_asked") == 1);
  // A single reply can raise entropy; the first question targets vascular involvement.
  const auto p_vascular = [](const json& v) { return v.at("marginals")[0].at("values")[0].at("p").get<double>(); };
  CHECK(p_vascular(updated.body) > p_vascular(asked.body));
  const auto tr = svc.transcript(id).body;
  REQUIRE(tr.size() == before + 1);
  CHECK(tr.back().at("kind") == "update");
  CHECK(tr[tr.size() - 2].at("kind") == "ask");

  CHECK(svc.view(id, false).body == svc.view(id, false).body);
}

TEST_CASE("a session driven over the service matches the direct run") {
  Workspace ws;
  SessionService svc(ws.options());
  const auto id = create_medical(svc);
  json last;
  for (int guard = 0; guard < 40; ++guard) {
    const auto r = svc.step(id);
    REQUIRE(r.status == 200);
    last = r.body;
    if (last.at("status") != "running") break;
    if (last.at("pending").is_object()) {
      last = svc.answer(id, {{"text", user_reply(last.at("pending").at("question_id"))}}).body;
    }
  }
  CHECK(last.at("status") == "budget-exhausted");
  CHECK(last.at("expand_count") == 1);
  CHECK(last.at("n_asked") == 4);
  REQUIRE(last.at("final_answer").is_object());
  CHECK(last.at("final_answer").at("text") == "Migraine without aura");
  CHECK(svc.step(id).status == 409);
  CHECK(svc.expand(id).status == 409);

  const auto f = Fixture::load(std::string(BALAR_FIXTURES_DIR) + "/medical_headache.json");
  const auto cfg = LoopConfig::merged(LoopConfig{}, f.config);
  ScriptedOracle oracle(f, cfg.label_map, cfg.max_retries);
  const auto direct = run_session(f.instance, oracle, oracle, cfg);
  // The recorded event kinds match; the service only splits ask from update across requests.
  const auto tr = svc.transcript(id).body;
  REQUIRE(tr.size() == direct.transcript.events().size());
  for (std::size_t i = 0; i < tr.size(); ++i) CHECK(tr[i].at("kind") == direct.transcript.events()[i].at("kind"));
}

TEST_CASE("view quantities agree with a direct computation") {
  Workspace ws;
  SessionService svc(ws.options());
  const auto id = create_medical(svc);
  const auto v = svc.view(id, true).body;

  const auto f = Fixture::load(std::string(BALAR_FIXTURES_DIR) + "/medical_headache.json");
  const auto cfg = LoopConfig::merged(LoopConfig{}, f.config);
  ScriptedOracle oracle(f, cfg.label_map);
  Session s(f.instance, oracle, cfg);
  s.initialize();
  const auto& st = s.state();
  const auto ranking = rank_pairs(st.belief, st.kernels, st.asked, st.t);
  CHECK(std::abs(v.at("entropy").get<double>() - entropy(st.belief)) <= 1e-9);
  CHECK(std::abs(v.at("target_entropy").get<double>() - target_entropy(cfg.alpha, 6)) <= 1e-9);
  CHECK(std::abs(v.at("gap").get<double>() - entropy_gap(st.belief, cfg.alpha)) <= 1e-9);
  REQUIRE(v.at("mi_ranking").size() == ranking.entries.size());
  for (std::size_t i = 0; i < ranking.entries.size(); ++i) {
    CHECK(v.at("mi_ranking")[i].at("question_id") == ranking.entries[i].pair.question_id);
    CHECK(std::abs(v.at("mi_ranking")[i].at("mi").get<double>() - ranking.entries[i].mi) <= 1e-9);
  }
  CHECK(v.at("min_rounds") == min_rounds(entropy_gap(st.belief, cfg.alpha), ranking.entries.front().mi));
  double total = 0.0;
  for (const auto& d : v.at("marginals")) {
    double z = 0.0;
    for (const auto& x : d.at("values")) z += x.at("p").get<double>();
    CHECK(std::abs(z - 1.0) <= 1e-9);
    total += 1.0;
  }
  CHECK(total == 2.0);
  const auto m = marginal(st.belief, "vascular_involvement");
  CHECK(std::abs(v.at("marginals")[0].at("values")[0].at("p").get<double>() - m[0]) <= 1e-9);
}

TEST_CASE("manual expand and the cap") {
  Workspace ws;
  SessionService svc(ws.options());
  const auto med = create_medical(svc);
  const auto grown = svc.expand(med);
  REQUIRE(grown.status == 200);
  CHECK(grown.body.at("total_states") == 12);
  CHECK(grown.body.at("expand_count") == 1);
  CHECK(grown.body.at("t") == 2);

  const auto capped = svc.create({{"elicitor", "scripted:capped"}});
  REQUIRE(capped.status == 201);
  const auto id = capped.body.at("session_id").get<std::string>();
  const auto refused = svc.expand(id);
  CHECK(refused.status == 409);
  CHECK(refused.body.at("reason") == "expand-capped");
  CHECK(refused.body.at("status") == "running");
  CHECK(svc.transcript(id).body.back().at("kind") == "expand-refused");
  CHECK(svc.step(id).status == 200);
}

TEST_CASE("concurrent writers on one session: one wins, the rest get 409") {
  Workspace ws;
  SessionService svc(ws.options());
  const auto id = create_medical(svc);
  std::atomic<int> ok{0}, conflict{0}, other{0};
  std::vector<std::thread> threads;
  for (int i = 0; i < 8; ++i) {
    threads.emplace_back([&] {
      const auto r = svc.step(id);
      (r.status == 200 ? ok : r.status == 409 ? conflict : other)++;
    });
  }
  for (auto& t : threads) t.join();
  CHECK(ok == 1);
  CHECK(conflict == 7);
  CHECK(other == 0);
  int asks = 0;
  for (const auto& e : svc.transcript(id).body) asks += e.at("kind") == "ask";
  CHECK(asks == 1);
}

TEST_CASE("transcripts are written through and sessions recover") {
  Workspace ws;
  std::string id;
  json before;
  {
    SessionService svc(ws.options(true));
    id = create_medical(svc);
    const auto asked = svc.step(id).body;
    svc.answer(id, {{"text", user_reply(asked.at("pending").at("question_id"))}});
    svc.step(id);
    before = svc.view(id, true).body;
    CHECK(fs::exists(ws.root / "transcripts" / (id + ".jsonl")));
  }
  SessionService svc(ws.options(true));
  CHECK(svc.recover() == 1);
  CHECK(svc.view(id, true).body == before);
  const auto next = create_medical(svc);
  CHECK(next != id);
  REQUIRE(before.at("pending").is_object());
  CHECK(svc.answer(id, {{"text", user_reply(before.at("pending").at("question_id"))}}).status == 200);
}

TEST_CASE("REST routes") {
  Workspace ws;
  SessionService svc(ws.options());
  httplib::Server server;
  svc.mount(server);
  const int port = server.bind_to_any_port("127.0.0.1");
  std::thread th([&] { server.listen_after_bind(); });
  server.wait_until_ready();
  httplib::Client c("127.0.0.1", port);

  auto health = c.Get("/healthz");
  REQUIRE(health);
  CHECK(health->status == 200);
  auto bad = c.Post("/sessions", "{not json", "application/json");
  REQUIRE(bad);
  CHECK(bad->status == 422);
  auto created = c.Post("/sessions", R"({"elicitor":"scripted:medical"})", "application/json");
  REQUIRE(created);
  CHECK(created->status == 201);
  const auto id = json::parse(created->body).at("session_id").get<std::string>();
  auto step = c.Post("/sessions/" + id + "/step", "", "application/json");
  REQUIRE(step);
  const auto qid = json::parse(step->body).at("pending").at("question_id").get<std::string>();
  auto ans = c.Post("/sessions/" + id + "/answer", json{{"text", user_reply(qid)}}.dump(), "application/json");
  REQUIRE(ans);
  CHECK(ans->status == 200);
  auto view = c.Get("/sessions/" + id + "?full=1");
  REQUIRE(view);
  CHECK(json::parse(view->body).at("n_asked") == 1);
  auto tr = c.Get("/sessions/" + id + "/transcript");
  REQUIRE(tr);
  CHECK(json::parse(tr->body).back().at("kind") == "update");
  auto missing = c.Get("/sessions/zzz");
  REQUIRE(missing);
  CHECK(missing->status == 404);
  auto exp = c.Post("/sessions/" + id + "/expand", "", "application/json");
  REQUIRE(exp);
  CHECK(exp->status == 200);

  server.stop();
  th.join();
}
