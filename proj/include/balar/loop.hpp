#pragma once

#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "balar/belief.hpp"
#include "balar/config.hpp"
#include "balar/contract.hpp"
#include "balar/errors.hpp"
#include "balar/likelihood.hpp"
#include "balar/selection.hpp"
#include "balar/transcript.hpp"

namespace balar {

/// H_alpha = -(1-alpha) log(1-alpha) - alpha log(alpha / (|Theta|-1)); 0 at alpha = 0.
/// Throws ConfigError for total_states < 2 or alpha outside [0, 1).
double target_entropy(double alpha, std::size_t total_states);

/// max(0, H(b) - H_alpha). A one-state space has gap 0.
double entropy_gap(const Belief& b, double alpha);

/// gap > lambda * i_star * (T - t), strictly. With i_star = 0 this is gap > 0.
bool should_expand(double gap, double i_star, double lambda, long T, long t);

/// Sentinel returned by min_rounds when the target is unreachable (i_star = 0, gap > 0).
inline constexpr long kUnboundedRounds = std::numeric_limits<long>::max();

/// ceil(gap / i_star); 0 when gap = 0.
long min_rounds(double gap, double i_star);

enum class Status { Running, ConvergedAnswer, ConvergedMarginal, BudgetExhausted, ExpandCapped, Error };

const char* to_string(Status s) noexcept;
inline bool is_terminal(Status s) noexcept { return s != Status::Running; }

/// A mutation was requested that the session's current state does not allow.
class SessionConflict : public Error {
 public:
  using Error::Error;
};

struct HistoryEntry {
  long round = 0;
  PairId pair;
  std::string question_text;
  std::string answer_text;
  std::vector<std::string> labels;
  std::vector<double> weights;
  double pre_entropy = 0.0;
  double post_entropy = 0.0;
  /// True when the soft observation carried no evidence and the belief was left as is.
  bool rejected = false;
};

struct PendingAsk {
  PairId pair;
  std::string question_text;
  std::vector<Choice> choices;
  long issued_at = 0;
  double mi = 0.0;
};

struct Verdict {
  Status status = Status::Running;
  /// max_a p_hat(a), when an answer set exists.
  std::optional<double> answer_max;
  double marginal_fraction = 0.0;
};

struct SessionState {
  Instance instance;
  SpacePtr space;
  Belief belief;
  std::vector<PriorVector> priors;
  std::vector<Question> questions;
  /// Keyed by (question, user, dimension).
  std::map<std::tuple<std::string, std::string, std::string>, DimLikelihoodTable> tables;
  /// One kernel per (question, user), question order then user order.
  std::vector<StateKernel> kernels;
  std::vector<DimLikelihoodTable> answer_tables;
  std::optional<StateKernel> answer_kernel;
  AskedSet asked;
  std::vector<HistoryEntry> history;
  ConversationLog conversation;
  long t = 1;
  long n_asked = 0;
  long expand_count = 0;
  Status status = Status::Running;
  std::optional<PendingAsk> pending;
  std::optional<FinalAnswer> final_answer;
  std::string error;
  /// Next free index for engine-assigned question ids.
  std::size_t next_question_index = 0;

  const StateKernel& kernel(const PairId& pair) const;
  const Question& question(const std::string& id) const;
};

/// Budget first, then the answer-probability rule (when an answer set exists), then the marginal rule.
Verdict check_convergence(const SessionState& s, const LoopConfig& cfg);

/// MAP assignment with names and marginals, the input of the final-answer call.
nlohmann::json map_summary(const Belief& b);

/// Entropy of each dimension's marginal, in dimension order.
std::vector<double> marginal_entropies(const Belief& b);

enum class StepKind { PendingAsk, Expanded, Terminal };

/// One BALAR session. The blocking user-answer call of the loop is split into
/// step(), which issues a PendingAsk, and submit_answer(), which resumes it.
/// Not internally synchronized: callers serialize mutations.
class Session {
 public:
  Session(Instance instance, Elicitor& elicitor, LoopConfig cfg);

  /// Initialization steps 1-4 with parallel fan-out. Throws on failure after
  /// logging an error event.
  void initialize();

  /// One loop iteration up to a pending ask, a completed expansion, or a
  /// terminal status (which also produces the final answer).
  StepKind step();
  /// Soft-maps the answer to the pending ask and updates the belief.
  void submit_answer(const std::string& text);
  /// Runs the expansion procedure on request. Throws StateCapExceeded when the
  /// cap forbids it; the session then stays running.
  void expand_manual();

  bool initialized() const noexcept { return state_.has_value(); }
  const SessionState& state() const;
  const Transcript& transcript() const noexcept { return transcript_; }
  const LoopConfig& config() const noexcept { return cfg_; }
  const Instance& instance() const noexcept { return instance_; }

 private:
  void expand(SessionState& s, bool manual);
  void finish(Status status);
  void fail(const std::exception& e, const char* during);
  void require_running(const char* op) const;
  nlohmann::json expand_payload(const SessionState& before, const SessionState& after, bool manual) const;

  Instance instance_;
  Elicitor* elicitor_;
  LoopConfig cfg_;
  std::optional<SessionState> state_;
  Transcript transcript_;
};

struct RunResult {
  Status status = Status::Running;
  std::optional<FinalAnswer> final_answer;
  Assignment map_state;
  std::optional<SessionState> state;
  Transcript transcript;
  std::string error;
  std::string error_call_kind;
};

/// Drives a session to completion with `answerer` supplying user replies.
/// Never throws for elicitation failures; they land in `error` and the transcript.
RunResult run_session(const Instance& instance, Elicitor& elicitor, Answerer& answerer, const LoopConfig& cfg);

/// Rebuilds a session from a transcript: answers and manual expansions are
/// taken from the recorded events, everything else is re-elicited. Throws
/// MismatchError when the regenerated events differ from the recorded ones.
Session replay_session(const Instance& instance, Elicitor& elicitor, const LoopConfig& cfg,
                       const Transcript& recorded);

}  // namespace balar
