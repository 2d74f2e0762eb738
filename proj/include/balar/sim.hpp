#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "balar/belief.hpp"
#include "balar/likelihood.hpp"
#include "balar/selection.hpp"
#include "balar/transcript.hpp"

namespace balar {

/// splitmix64 finalizer; used to derive independent seeds.
std::uint64_t splitmix64(std::uint64_t x) noexcept;
/// Uniform double in [0, 1) from the top 53 bits, identical on every platform.
double unit_uniform(std::mt19937_64& rng) noexcept;
/// Uniform index in [0, n).
std::size_t uniform_index(std::mt19937_64& rng, std::size_t n) noexcept;

struct SimOptions {
  std::size_t choices = 2;
  std::size_t users = 1;
  /// When set, overrides the per-dimension value count `n`.
  std::vector<std::size_t> value_counts;
  bool uniform_prior = false;
  /// Questions ask for one bit of one dimension's value index (needs power-of-two value counts).
  bool bit_questions = false;
  /// Each question's own sharpness is sharpness * u with u ~ U[spread_floor, 1].
  double spread_floor = 1.0;
  /// Probability that a question also depends on a second dimension.
  double second_target_rate = 0.0;
  std::size_t answers = 0;
  std::size_t state_cap = 1024;
};

/// Ground-truth environment: true kernels and a hidden state drawn from the prior.
struct SyntheticInstance {
  std::uint64_t seed = 0;
  SpacePtr space;
  std::vector<PriorVector> priors;
  std::vector<StateKernel> kernels;
  std::size_t true_state = 0;
  std::optional<StateKernel> answer_kernel;

  Belief prior() const { return init_belief(priors, space); }
};

/// Reproducible from `seed`. Kernel rows mix a one-hot row (weight sharpness)
/// with the uniform row. Throws ConfigError for sizes outside the caps.
SyntheticInstance generate_instance(std::uint64_t seed, std::size_t p, std::size_t n, std::size_t q_count,
                                    double sharpness, const SimOptions& opts = {});

/// Independent answer stream for one (instance, pair); every policy sees the same draws.
std::mt19937_64 answer_stream(const SyntheticInstance& inst, std::size_t pair_index);

/// Draws y ~ K(theta*, .) for the pair at `pair_index`.
std::size_t simulate_answer(const SyntheticInstance& inst, std::size_t pair_index, std::mt19937_64& rng);

/// Tractability limits of the exhaustive oracle.
struct OracleLimits {
  std::size_t max_states = 8;
  std::size_t max_questions = 4;
  std::size_t max_k = 3;
};

/// Expected information gain of the best k-step adaptive policy, by full
/// recursion over (pair, outcome) trees. Memoized on (asked set, belief
/// quantized at 1e-12). Throws ConfigError outside `limits` or for non-binary questions.
double optimal_adaptive_gain(const SyntheticInstance& inst, std::size_t k, OracleLimits limits = {});

/// Expected information gain of the k-step MI-greedy policy, averaged over outcomes exactly.
double greedy_expected_gain(const SyntheticInstance& inst, std::size_t k);

/// Exhaustively tractable instances (|Theta| <= 8, <= 4 binary questions) for the bound check.
std::vector<SyntheticInstance> theorem_corpus(std::size_t count, std::uint64_t seed);

struct TheoremCase {
  std::uint64_t seed = 0;
  std::size_t states = 0;
  std::size_t questions = 0;
  std::size_t k = 0;
  double greedy = 0.0;
  double optimal = 0.0;
  bool holds = false;
};

struct TheoremReport {
  std::vector<TheoremCase> cases;
  double worst_ratio = 1.0;
  std::size_t violations = 0;
  nlohmann::json to_json() const;
};

/// greedy >= (1 - 1/e) * optimal - tolerance, for k = 1..3 on every corpus instance.
TheoremReport verify_theorem(const std::vector<SyntheticInstance>& corpus, double tolerance);

struct MonotonicityReport {
  std::size_t instances = 0;
  std::size_t checks = 0;
  /// Checks where E_y[I(theta; Y_q | H, Y_next = y)] exceeded I(theta; Y_q | H) by more than the tolerance.
  std::size_t violations = 0;
  double max_excess = 0.0;
  /// Informational: pairs whose MI rose after the realized answer.
  std::size_t pointwise_increases = 0;
  nlohmann::json to_json() const;
};

/// Walks `steps`-step MI-greedy histories with simulated answers and checks, at
/// every step and for every other unasked pair, that the MI is non-increasing
/// in expectation over the next observation.
MonotonicityReport check_mi_monotonicity(const std::vector<SyntheticInstance>& envs, std::size_t steps,
                                         double tolerance);

enum class PolicyKind { MiGreedy, Random, FixedOrder };

struct PolicySpec {
  PolicyKind kind = PolicyKind::MiGreedy;
  std::uint64_t seed = 0;
};

const char* to_string(PolicyKind k) noexcept;
/// "mi", "mi-greedy", "random", "fixed", "fixed-order". Throws ConfigError otherwise.
PolicyKind parse_policy(const std::string& name);

struct BenchConfig {
  std::uint64_t seed = 1;
  std::size_t p = 3;
  std::size_t n = 3;
  std::size_t q_count = 12;
  double sharpness = 0.9;
  SimOptions sim{};
  double alpha = 0.1;
  double beta = 1.0;
  /// Asks allowed when measuring rounds to convergence; 0 means the bank size.
  std::size_t max_rounds = 0;
  std::size_t threads = 4;
};

struct MeanStat {
  double mean = 0.0;
  double stderr_ = 0.0;
  std::size_t count = 0;
  double ci_low() const noexcept { return mean - 1.96 * stderr_; }
  double ci_high() const noexcept { return mean + 1.96 * stderr_; }
  nlohmann::json to_json() const;
};

MeanStat mean_stat(const std::vector<double>& xs);

struct PolicyArm {
  PolicySpec policy;
  /// gain[k-1]: cumulative entropy reduction after k asks.
  std::vector<MeanStat> gain;
  MeanStat rounds_to_convergence;
  std::size_t unconverged = 0;
  MeanStat map_recovery;
  std::map<std::size_t, double> rounds_histogram;
  /// Raw per-instance values, instance order.
  std::vector<std::vector<double>> gain_samples;
  std::vector<double> rounds_samples;
};

struct PairedDiff {
  std::string against;
  std::vector<MeanStat> gain_diff;
  MeanStat rounds_diff;
};

struct BenchReport {
  BenchConfig config;
  std::size_t instances = 0;
  std::size_t k_max = 0;
  std::vector<PolicyArm> arms;
  /// First arm minus each other arm, paired by instance.
  std::vector<PairedDiff> diffs;
  nlohmann::json to_json() const;
  /// "k\tmean\tstderr" rows for one arm.
  std::string gain_columns(std::size_t arm) const;
};

/// Runs every policy on the same instance stream and the same per-(instance, pair) answers.
BenchReport run_policy_comparison(const std::vector<PolicySpec>& policies, std::size_t instance_count,
                                  std::size_t k_max, const BenchConfig& cfg);

enum class NliLabel { Entailment, Neutral, Contradiction };
NliLabel parse_nli_label(const std::string& s);

/// Neither direction is a contradiction and the pair is not (neutral, neutral).
bool semantic_equivalence(NliLabel fwd, NliLabel bwd) noexcept;
bool semantic_equivalence(const std::string& fwd, const std::string& bwd);

struct RoundHistograms {
  std::map<long, double> ask;
  std::map<long, double> expand;
  long t_ask_marker = 0;
  std::size_t sessions = 0;
  nlohmann::json to_json() const;
};

/// Proportions of sessions by ASK count and by EXPAND count. Throws ConfigError for an empty list.
RoundHistograms round_histograms(const std::vector<Transcript>& transcripts, long t_ask);

}  // namespace balar
