#include "balar/service.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include <httplib.h>

#include "balar/chat_elicitor.hpp"
#include "balar/scripted_oracle.hpp"

namespace balar {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

json marginals_of(const Belief& b) {
  json out = json::array();
  const auto& space = b.space();
  for (std::size_t j = 0; j < space.dim_count(); ++j) {
    const auto& d = space.dim(j);
    const auto m = marginal(b, j);
    json values = json::array();
    for (std::size_t k = 0; k < d.size(); ++k) {
      values.push_back({{"id", d.values[k].id}, {"text", d.values[k].text}, {"p", m[k]}});
    }
    out.push_back({{"id", d.id}, {"name", d.name}, {"values", std::move(values)}});
  }
  return out;
}

ServiceResponse error_response(int status, const std::string& message, json extra = json::object()) {
  extra["error"] = message;
  return {status, std::move(extra)};
}

bool safe_name(const std::string& s) {
  if (s.empty() || s.size() > 128) return false;
  for (char c : s) {
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.')) return false;
  }
  return s.find("..") == std::string::npos;
}

}  // namespace

json session_view(const std::string& id, const Session& session, std::size_t mi_top_n) {
  const auto& s = session.state();
  const auto& cfg = session.config();
  const auto ranking = rank_pairs(s.belief, s.kernels, s.asked, s.t);
  const double i_star = ranking.entries.empty() ? 0.0 : ranking.entries.front().mi;
  const double h = entropy(s.belief);
  const double h_target = s.space->total_states() >= 2 ? target_entropy(cfg.alpha, s.space->total_states()) : 0.0;
  const double gap = entropy_gap(s.belief, cfg.alpha);
  const long rounds = min_rounds(gap, i_star);

  json mi = json::array();
  const std::size_t limit = mi_top_n == 0 ? ranking.entries.size() : std::min(mi_top_n, ranking.entries.size());
  for (std::size_t i = 0; i < limit; ++i) {
    const auto& e = ranking.entries[i];
    mi.push_back({{"question_id", e.pair.question_id}, {"user_id", e.pair.user_id}, {"mi", e.mi}});
  }

  json view = {{"session_id", id},
               {"status", to_string(s.status)},
               {"t", s.t},
               {"n_asked", s.n_asked},
               {"expand_count", s.expand_count},
               {"total_states", s.space->total_states()},
               {"entropy", h},
               {"target_entropy", h_target},
               {"gap", gap},
               {"min_rounds", rounds == kUnboundedRounds ? json(nullptr) : json(rounds)},
               {"marginals", marginals_of(s.belief)},
               {"mi_ranking", std::move(mi)},
               {"mi_ranking_size", ranking.entries.size()},
               {"pending", nullptr},
               {"answer_probabilities", nullptr},
               {"final_answer", nullptr}};
  if (s.pending) {
    json choices = json::array();
    for (const auto& c : s.pending->choices) choices.push_back({{"id", c.id}, {"text", c.text}});
    view["pending"] = {{"question_id", s.pending->pair.question_id},
                       {"user_id", s.pending->pair.user_id},
                       {"question_text", s.pending->question_text},
                       {"choices", std::move(choices)},
                       {"issued_at", s.pending->issued_at},
                       {"mi", s.pending->mi}};
  }
  if (s.answer_kernel) {
    const auto pa = predictive(s.belief, *s.answer_kernel);
    json probs = json::array();
    for (std::size_t a = 0; a < pa.size() && a < s.instance.answers.size(); ++a) {
      probs.push_back({{"id", s.instance.answers[a].id}, {"text", s.instance.answers[a].text}, {"p", pa[a]}});
    }
    view["answer_probabilities"] = std::move(probs);
  }
  if (s.final_answer) {
    view["final_answer"] = {{"text", s.final_answer->text},
                            {"answer_id", s.final_answer->answer_id},
                            {"reason", s.final_answer->reason},
                            {"map_state", map_summary(s.belief)}};
  }
  return view;
}

struct SessionService::Entry {
  std::mutex mu;
  json create_body;
  std::unique_ptr<Elicitor> elicitor;
  std::unique_ptr<Session> session;
};

SessionService::SessionService(ServiceOptions opts) : opts_(std::move(opts)) {
  if (opts_.transcript_dir) fs::create_directories(*opts_.transcript_dir);
}

SessionService::~SessionService() = default;

std::shared_ptr<SessionService::Entry> SessionService::find(const std::string& id) const {
  std::shared_lock lock(mu_);
  const auto it = sessions_.find(id);
  return it == sessions_.end() ? nullptr : it->second;
}

std::size_t SessionService::session_count() const {
  std::shared_lock lock(mu_);
  return sessions_.size();
}

std::shared_ptr<SessionService::Entry> SessionService::build(const json& body, Instance& instance,
                                                             LoopConfig& cfg) const {
  if (!body.is_object()) throw ConfigError("request body must be a JSON object");
  const auto spec = body.value("elicitor", std::string{});
  auto entry = std::make_shared<Entry>();
  entry->create_body = body;

  if (spec.rfind("scripted:", 0) == 0) {
    const auto name = spec.substr(9);
    if (!safe_name(name)) throw ConfigError("invalid fixture name '" + name + "'");
    const auto path = fs::path(opts_.fixtures_dir) / (name + ".json");
    if (!fs::exists(path)) throw ConfigError("no fixture named '" + name + "'");
    auto fixture = Fixture::load(path.string());
    instance = body.contains("instance") ? Instance::from_json(body.at("instance")) : fixture.instance;
    cfg = LoopConfig::merged(opts_.base_config, fixture.config);
    if (body.contains("config")) cfg = LoopConfig::merged(cfg, body.at("config"));
    entry->elicitor = std::make_unique<ScriptedOracle>(std::move(fixture), cfg.label_map, cfg.max_retries);
  } else if (spec == "chat") {
    if (!body.contains("instance")) throw ConfigError("chat sessions need an instance");
    instance = Instance::from_json(body.at("instance"));
    cfg = body.contains("config") ? LoopConfig::merged(opts_.base_config, body.at("config")) : opts_.base_config;
    auto chat = ChatConfig::from_env();
    chat.max_retries = cfg.max_retries;
    chat.max_concurrency = static_cast<int>(cfg.max_concurrency);
    const auto dir = opts_.prompts_dir.empty() ? PromptLibrary::default_dir() : opts_.prompts_dir;
    entry->elicitor = std::make_unique<ChatElicitor>(chat, PromptLibrary::load(dir), cfg.label_map);
  } else {
    throw ConfigError("elicitor must be 'scripted:<fixture>' or 'chat'");
  }
  instance.validate();
  cfg.validate();
  return entry;
}

void SessionService::persist(const std::string& id, const Entry& e) const {
  if (!opts_.transcript_dir) return;
  const fs::path dir(*opts_.transcript_dir);
  e.session->transcript().write_file((dir / (id + ".jsonl")).string());
  std::ofstream meta(dir / (id + ".session.json"), std::ios::trunc);
  meta << e.create_body.dump(2) << '\n';
}

ServiceResponse SessionService::create(const json& body) {
  Instance instance;
  LoopConfig cfg;
  const std::string id = "s" + std::to_string(next_id_.fetch_add(1));
  std::shared_ptr<Entry> entry;
  try {
    entry = build(body, instance, cfg);
  } catch (const Error& e) {
    return error_response(422, e.what());
  } catch (const json::exception& e) {
    return error_response(422, e.what());
  }
  entry->session = std::make_unique<Session>(instance, *entry->elicitor, cfg);
  try {
    entry->session->initialize();
  } catch (const ElicitationError& e) {
    return error_response(502, e.what(), {{"call_kind", e.call_kind()}});
  } catch (const ConfigError& e) {
    return error_response(422, e.what());
  } catch (const std::exception& e) {
    return error_response(500, e.what());
  }
  persist(id, *entry);
  auto view = session_view(id, *entry->session, opts_.mi_top_n);
  {
    std::unique_lock lock(mu_);
    sessions_.emplace(id, std::move(entry));
  }
  return {201, std::move(view)};
}

ServiceResponse SessionService::view(const std::string& id, bool full) {
  const auto e = find(id);
  if (!e) return error_response(404, "unknown session '" + id + "'");
  std::lock_guard lock(e->mu);
  return {200, session_view(id, *e->session, full ? 0 : opts_.mi_top_n)};
}

ServiceResponse SessionService::mutate(const std::string& id, const std::function<void(Session&)>& op) {
  const auto e = find(id);
  if (!e) return error_response(404, "unknown session '" + id + "'");
  std::unique_lock lock(e->mu, std::try_to_lock);
  if (!lock.owns_lock()) return error_response(409, "session is busy with another request");
  ServiceResponse r;
  try {
    op(*e->session);
    r = {200, session_view(id, *e->session, opts_.mi_top_n)};
  } catch (const SessionConflict& ex) {
    r = error_response(409, ex.what(), {{"status", to_string(e->session->state().status)}});
  } catch (const StateCapExceeded& ex) {
    r = error_response(409, ex.what(),
                       {{"status", to_string(e->session->state().status)}, {"reason", "expand-capped"}});
  } catch (const ElicitationError& ex) {
    r = error_response(502, ex.what(), {{"call_kind", ex.call_kind()}});
  } catch (const std::exception& ex) {
    r = error_response(500, ex.what());
  }
  persist(id, *e);
  return r;
}

ServiceResponse SessionService::step(const std::string& id) {
  return mutate(id, [](Session& s) { s.step(); });
}

ServiceResponse SessionService::answer(const std::string& id, const json& body) {
  if (!body.is_object() || !body.contains("text") || !body.at("text").is_string()) {
    if (!find(id)) return error_response(404, "unknown session '" + id + "'");
    return error_response(422, "body must be {\"text\": string}");
  }
  const auto text = body.at("text").get<std::string>();
  if (text.find_first_not_of(" \t\r\n") == std::string::npos) {
    if (!find(id)) return error_response(404, "unknown session '" + id + "'");
    return error_response(422, "answer text is empty");
  }
  return mutate(id, [&](Session& s) { s.submit_answer(text); });
}

ServiceResponse SessionService::expand(const std::string& id) {
  return mutate(id, [](Session& s) { s.expand_manual(); });
}

ServiceResponse SessionService::transcript(const std::string& id) {
  const auto e = find(id);
  if (!e) return error_response(404, "unknown session '" + id + "'");
  std::lock_guard lock(e->mu);
  return {200, e->session->transcript().to_json()};
}

ServiceResponse SessionService::health() const {
  return {200, {{"status", "ok"}, {"sessions", session_count()}}};
}

std::size_t SessionService::recover() {
  if (!opts_.transcript_dir) return 0;
  std::size_t restored = 0;
  long max_id = 0;
  for (const auto& f : fs::directory_iterator(*opts_.transcript_dir)) {
    const auto name = f.path().filename().string();
    const std::string suffix = ".session.json";
    if (name.size() <= suffix.size() || name.compare(name.size() - suffix.size(), suffix.size(), suffix) != 0) {
      continue;
    }
    const auto id = name.substr(0, name.size() - suffix.size());
    std::ifstream in(f.path());
    const auto body = json::parse(in);
    const auto recorded = Transcript::read_file((fs::path(*opts_.transcript_dir) / (id + ".jsonl")).string());
    Instance instance;
    LoopConfig cfg;
    auto entry = build(body, instance, cfg);
    entry->session = std::make_unique<Session>(replay_session(instance, *entry->elicitor, cfg, recorded));
    {
      std::unique_lock lock(mu_);
      sessions_[id] = std::move(entry);
    }
    ++restored;
    if (id.size() > 1 && id[0] == 's') {
      try {
        max_id = std::max(max_id, std::stol(id.substr(1)));
      } catch (const std::exception&) {
      }
    }
  }
  long cur = next_id_.load();
  while (cur <= max_id && !next_id_.compare_exchange_weak(cur, max_id + 1)) {
  }
  return restored;
}

void SessionService::mount(httplib::Server& server) {
  auto reply = [](httplib::Response& res, const ServiceResponse& r) {
    res.status = r.status;
    res.set_content(r.body.dump(), "application/json");
  };
  auto parse = [](const httplib::Request& req) -> std::optional<json> {
    if (req.body.empty()) return json::object();
    auto j = json::parse(req.body, nullptr, false);
    if (j.is_discarded()) return std::nullopt;
    return j;
  };
  const auto bad_json = error_response(422, "request body is not valid JSON");

  server.Get("/healthz", [=, this](const httplib::Request&, httplib::Response& res) { reply(res, health()); });
  server.Post("/sessions", [=, this](const httplib::Request& req, httplib::Response& res) {
    const auto body = parse(req);
    reply(res, body ? create(*body) : bad_json);
  });
  server.Get(R"(/sessions/([^/]+))", [=, this](const httplib::Request& req, httplib::Response& res) {
    const auto full = req.get_param_value("full");
    reply(res, view(req.matches[1], full == "1" || full == "true"));
  });
  server.Post(R"(/sessions/([^/]+)/step)", [=, this](const httplib::Request& req, httplib::Response& res) {
    reply(res, step(req.matches[1]));
  });
  server.Post(R"(/sessions/([^/]+)/answer)", [=, this](const httplib::Request& req, httplib::Response& res) {
    const auto body = parse(req);
    reply(res, body ? answer(req.matches[1], *body) : bad_json);
  });
  server.Post(R"(/sessions/([^/]+)/expand)", [=, this](const httplib::Request& req, httplib::Response& res) {
    reply(res, expand(req.matches[1]));
  });
  server.Get(R"(/sessions/([^/]+)/transcript)", [=, this](const httplib::Request& req, httplib::Response& res) {
    reply(res, transcript(req.matches[1]));
  });
}

}  // namespace balar
