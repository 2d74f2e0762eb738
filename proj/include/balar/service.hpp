#pragma once

#include <atomic>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>

#include <nlohmann/json.hpp>

#include "balar/config.hpp"
#include "balar/loop.hpp"

namespace httplib {
class Server;
}

namespace balar {

/// Projection of a session snapshot returned by every endpoint.
/// `mi_top_n` = 0 keeps the full ranking.
nlohmann::json session_view(const std::string& id, const Session& session, std::size_t mi_top_n);

struct ServiceOptions {
  /// Directory searched for `scripted:<name>` fixtures (<name>.json).
  std::string fixtures_dir;
  /// When set, each session's transcript is rewritten here after every mutation.
  std::optional<std::string> transcript_dir;
  LoopConfig base_config;
  std::size_t mi_top_n = 20;
  /// Prompt templates for the chat elicitor; empty means PromptLibrary::default_dir().
  std::string prompts_dir;
};

struct ServiceResponse {
  int status = 200;
  nlohmann::json body;
};

/// In-memory session registry. Handlers are callable directly (tests) or
/// through mount(). Mutations of one session are single-writer: a request
/// that finds the session busy gets 409 instead of waiting.
class SessionService {
 public:
  explicit SessionService(ServiceOptions opts);
  ~SessionService();

  ServiceResponse create(const nlohmann::json& body);
  ServiceResponse view(const std::string& id, bool full);
  ServiceResponse step(const std::string& id);
  ServiceResponse answer(const std::string& id, const nlohmann::json& body);
  ServiceResponse expand(const std::string& id);
  ServiceResponse transcript(const std::string& id);
  ServiceResponse health() const;

  /// Replays every transcript found in transcript_dir. Returns the number of sessions restored.
  std::size_t recover();

  void mount(httplib::Server& server);
  std::size_t session_count() const;

 private:
  struct Entry;
  std::shared_ptr<Entry> find(const std::string& id) const;
  ServiceResponse mutate(const std::string& id, const std::function<void(Session&)>& op);
  std::shared_ptr<Entry> build(const nlohmann::json& body, Instance& instance, LoopConfig& cfg) const;
  void persist(const std::string& id, const Entry& e) const;

  ServiceOptions opts_;
  mutable std::shared_mutex mu_;
  std::map<std::string, std::shared_ptr<Entry>> sessions_;
  std::atomic<long> next_id_{1};
};

}  // namespace balar
