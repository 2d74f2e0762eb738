#include "balar/sim.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <set>
#include <sstream>

#include "balar/dispatch.hpp"
#include "balar/errors.hpp"

namespace balar {

using nlohmann::json;

std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

double unit_uniform(std::mt19937_64& rng) noexcept { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

std::size_t uniform_index(std::mt19937_64& rng, std::size_t n) noexcept {
  const auto i = static_cast<std::size_t>(unit_uniform(rng) * static_cast<double>(n));
  return std::min(i, n - 1);
}

namespace {

std::size_t sample_from(std::span<const double> probs, double u) {
  double acc = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    acc += probs[i];
    if (u < acc) return i;
  }
  // Rounding left u above the running sum: take the last state with mass.
  for (std::size_t i = probs.size(); i-- > 0;) {
    if (probs[i] > 0.0) return i;
  }
  return probs.size() - 1;
}

std::vector<double> random_weights(std::mt19937_64& rng, std::size_t n) {
  std::vector<double> w(n);
  for (auto& x : w) x = 0.25 + unit_uniform(rng);
  const double z = std::accumulate(w.begin(), w.end(), 0.0);
  for (auto& x : w) x /= z;
  return w;
}

bool is_power_of_two(std::size_t n) { return n >= 2 && (n & (n - 1)) == 0; }

std::size_t bits_of(std::size_t n) {
  std::size_t b = 0;
  while ((std::size_t{1} << b) < n) ++b;
  return b;
}

}  // namespace

SyntheticInstance generate_instance(std::uint64_t seed, std::size_t p, std::size_t n, std::size_t q_count,
                                    double sharpness, const SimOptions& opts) {
  if (!(sharpness >= 0.0 && sharpness <= 1.0)) throw ConfigError("sharpness must lie in [0, 1]");
  if (opts.choices < 2) throw ConfigError("questions need at least two choices");
  if (opts.users < 1) throw ConfigError("need at least one user");
  std::vector<std::size_t> counts = opts.value_counts.empty() ? std::vector<std::size_t>(p, n) : opts.value_counts;
  if (counts.empty()) throw ConfigError("need at least one dimension");
  const std::size_t max_n = *std::max_element(counts.begin(), counts.end());

  std::vector<Dimension> dims;
  for (std::size_t j = 0; j < counts.size(); ++j) {
    Dimension d{"d" + std::to_string(j), "dim" + std::to_string(j), {}};
    for (std::size_t k = 0; k < counts[j]; ++k) d.values.push_back({"v" + std::to_string(k), "value " + std::to_string(k)});
    dims.push_back(std::move(d));
  }
  SyntheticInstance inst;
  inst.seed = seed;
  inst.space = StateSpace::create(dims, {opts.state_cap, std::max<std::size_t>(max_n, 2)});
  const std::size_t pdims = counts.size();

  std::mt19937_64 rng(splitmix64(seed));
  for (std::size_t j = 0; j < pdims; ++j) {
    auto probs = opts.uniform_prior ? std::vector<double>(counts[j], 1.0 / static_cast<double>(counts[j]))
                                    : random_weights(rng, counts[j]);
    inst.priors.push_back({dims[j].id, std::move(probs)});
  }

  std::vector<std::pair<std::size_t, std::size_t>> bit_targets;
  if (opts.bit_questions) {
    if (opts.choices != 2) throw ConfigError("bit questions are binary");
    for (std::size_t j = 0; j < pdims; ++j) {
      if (!is_power_of_two(counts[j])) throw ConfigError("bit questions need power-of-two value counts");
      for (std::size_t b = 0; b < bits_of(counts[j]); ++b) bit_targets.emplace_back(j, b);
    }
  }

  const std::size_t Y = opts.choices;
  const std::vector<double> uniform_row(Y, 1.0 / static_cast<double>(Y));
  for (std::size_t q = 0; q < q_count; ++q) {
    std::size_t j0 = 0;
    std::size_t bit = 0;
    if (opts.bit_questions) {
      std::tie(j0, bit) = bit_targets[q % bit_targets.size()];
    } else {
      j0 = uniform_index(rng, pdims);
    }
    std::optional<std::size_t> j1;
    if (!opts.bit_questions && pdims >= 2 && unit_uniform(rng) < opts.second_target_rate) {
      j1 = (j0 + 1 + uniform_index(rng, pdims - 1)) % pdims;
    }
    const double floor = std::clamp(opts.spread_floor, 0.0, 1.0);
    const double s = sharpness * (floor + (1.0 - floor) * unit_uniform(rng));
    const std::string qid = "q" + std::to_string(q);

    for (std::size_t u = 0; u < opts.users; ++u) {
      const std::string uid = "u" + std::to_string(u);
      std::vector<DimLikelihoodTable> tables;
      for (std::size_t j = 0; j < pdims; ++j) {
        DimLikelihoodTable t{qid, uid, dims[j].id, {}};
        const bool target = j == j0 || (j1 && j == *j1);
        if (!target) {
          t.rows.assign(counts[j], uniform_row);
        } else {
          std::vector<std::size_t> c(counts[j]);
          for (int attempt = 0; attempt < 16; ++attempt) {
            for (std::size_t v = 0; v < counts[j]; ++v) {
              c[v] = opts.bit_questions ? (v >> bit) & 1U : uniform_index(rng, Y);
            }
            if (opts.bit_questions || std::adjacent_find(c.begin(), c.end(), std::not_equal_to<>()) != c.end()) break;
          }
          for (std::size_t v = 0; v < counts[j]; ++v) {
            std::vector<double> row(Y, (1.0 - s) / static_cast<double>(Y));
            row[c[v]] += s;
            t.rows.push_back(std::move(row));
          }
        }
        tables.push_back(std::move(t));
      }
      inst.kernels.push_back(build_question_kernel(tables, inst.space));
    }
  }

  const auto prior = inst.prior().probs();
  inst.true_state = sample_from(prior, unit_uniform(rng));

  if (opts.answers >= 2) {
    std::vector<DimLikelihoodTable> tables;
    for (std::size_t j = 0; j < pdims; ++j) {
      DimLikelihoodTable t{"answer", "", dims[j].id, {}};
      for (std::size_t v = 0; v < counts[j]; ++v) t.rows.push_back(random_weights(rng, opts.answers));
      tables.push_back(std::move(t));
    }
    inst.answer_kernel = build_answer_kernel(std::move(tables), inst.space).combined;
  }
  return inst;
}

std::mt19937_64 answer_stream(const SyntheticInstance& inst, std::size_t pair_index) {
  return std::mt19937_64(splitmix64(splitmix64(inst.seed) ^ splitmix64(0xA5A5A5A5ULL + pair_index)));
}

std::size_t simulate_answer(const SyntheticInstance& inst, std::size_t pair_index, std::mt19937_64& rng) {
  const auto& k = inst.kernels.at(pair_index);
  return sample_from(k.row(inst.true_state), unit_uniform(rng));
}

namespace {

struct OracleKey {
  unsigned mask;
  std::size_t k;
  std::vector<long long> q;
  auto operator<=>(const OracleKey&) const = default;
};

OracleKey make_key(const Belief& b, unsigned mask, std::size_t k) {
  OracleKey key{mask, k, {}};
  for (double x : b.probs()) key.q.push_back(std::llround(x * 1e12));
  return key;
}

/// Sum over outcomes y with p(y) > 0 of p(y) * f(posterior given y).
template <class F>
double expect_over_answers(const Belief& b, const StateKernel& kern, F&& f) {
  const auto py = predictive(b, kern);
  double acc = 0.0;
  for (std::size_t y = 0; y < py.size(); ++y) {
    if (py[y] <= kNegligibleMass) continue;
    acc += py[y] * f(posterior_given(b, kern, y));
  }
  return acc;
}

double optimal_rec(const SyntheticInstance& inst, const Belief& b, unsigned mask, std::size_t k,
                   std::map<OracleKey, double>& memo) {
  if (k == 0) return 0.0;
  const auto key = make_key(b, mask, k);
  if (const auto it = memo.find(key); it != memo.end()) return it->second;
  double best = 0.0;
  for (std::size_t i = 0; i < inst.kernels.size(); ++i) {
    if (mask & (1U << i)) continue;
    const double v = mutual_information(b, inst.kernels[i]) +
                     expect_over_answers(b, inst.kernels[i], [&](const Belief& post) {
                       return optimal_rec(inst, post, mask | (1U << i), k - 1, memo);
                     });
    best = std::max(best, v);
  }
  memo.emplace(key, best);
  return best;
}

std::optional<std::size_t> greedy_pick(const Belief& b, const std::vector<StateKernel>& kernels, unsigned mask) {
  std::optional<std::size_t> best;
  double best_mi = -1.0;
  for (std::size_t i = 0; i < kernels.size(); ++i) {
    if (mask & (1U << i)) continue;
    const double mi = mutual_information(b, kernels[i]);
    if (mi > best_mi) {
      best_mi = mi;
      best = i;
    }
  }
  return best;
}

double greedy_rec(const SyntheticInstance& inst, const Belief& b, unsigned mask, std::size_t k) {
  if (k == 0) return 0.0;
  const auto pick = greedy_pick(b, inst.kernels, mask);
  if (!pick) return 0.0;
  const auto& kern = inst.kernels[*pick];
  return mutual_information(b, kern) + expect_over_answers(b, kern, [&](const Belief& post) {
           return greedy_rec(inst, post, mask | (1U << *pick), k - 1);
         });
}

void check_tractable(const SyntheticInstance& inst, std::size_t k, const OracleLimits& limits) {
  if (inst.space->total_states() > limits.max_states) throw ConfigError("exhaustive oracle: too many states");
  if (inst.kernels.size() > limits.max_questions) throw ConfigError("exhaustive oracle: too many questions");
  if (k > limits.max_k) throw ConfigError("exhaustive oracle: k is too large");
  for (const auto& kern : inst.kernels) {
    if (kern.num_choices() != 2) throw ConfigError("exhaustive oracle: questions must be binary");
  }
}

}  // namespace

double optimal_adaptive_gain(const SyntheticInstance& inst, std::size_t k, OracleLimits limits) {
  check_tractable(inst, k, limits);
  std::map<OracleKey, double> memo;
  return optimal_rec(inst, inst.prior(), 0U, k, memo);
}

double greedy_expected_gain(const SyntheticInstance& inst, std::size_t k) {
  if (inst.kernels.size() > 31) throw ConfigError("greedy_expected_gain: at most 31 pairs");
  return greedy_rec(inst, inst.prior(), 0U, k);
}

std::vector<SyntheticInstance> theorem_corpus(std::size_t count, std::uint64_t seed) {
  static const std::vector<std::vector<std::size_t>> shapes = {{2}, {3}, {4}, {2, 2}, {2, 3},
                                                               {3, 2}, {2, 4}, {4, 2}, {2, 2, 2}};
  std::vector<SyntheticInstance> out;
  for (std::size_t i = 0; i < count; ++i) {
    const auto s = splitmix64(seed + i);
    std::mt19937_64 rng(s);
    SimOptions opts;
    opts.value_counts = shapes[i % shapes.size()];
    opts.uniform_prior = i % 4 == 0;
    opts.spread_floor = 0.3;
    opts.second_target_rate = 0.5;
    const std::size_t q = 2 + i % 3;
    const double sharp = 0.3 + 0.7 * unit_uniform(rng);
    out.push_back(generate_instance(s, 0, 0, q, sharp, opts));
  }
  return out;
}

json TheoremReport::to_json() const {
  json cs = json::array();
  for (const auto& c : cases) {
    cs.push_back({{"seed", c.seed},
                  {"states", c.states},
                  {"questions", c.questions},
                  {"k", c.k},
                  {"greedy", c.greedy},
                  {"optimal", c.optimal},
                  {"holds", c.holds}});
  }
  return {{"cases", std::move(cs)}, {"worst_ratio", worst_ratio}, {"violations", violations}};
}

TheoremReport verify_theorem(const std::vector<SyntheticInstance>& corpus, double tolerance) {
  TheoremReport r;
  const double bound = 1.0 - std::exp(-1.0);
  for (const auto& inst : corpus) {
    for (std::size_t k = 1; k <= std::min<std::size_t>(3, inst.kernels.size()); ++k) {
      TheoremCase c{inst.seed, inst.space->total_states(), inst.kernels.size(), k, greedy_expected_gain(inst, k),
                    optimal_adaptive_gain(inst, k), false};
      c.holds = c.greedy >= bound * c.optimal - tolerance;
      if (!c.holds) ++r.violations;
      if (c.optimal > 1e-12) r.worst_ratio = std::min(r.worst_ratio, c.greedy / c.optimal);
      r.cases.push_back(c);
    }
  }
  return r;
}

json MonotonicityReport::to_json() const {
  return {{"instances", instances},
          {"checks", checks},
          {"violations", violations},
          {"max_excess", max_excess},
          {"pointwise_increases", pointwise_increases}};
}

MonotonicityReport check_mi_monotonicity(const std::vector<SyntheticInstance>& envs, std::size_t steps,
                                         double tolerance) {
  MonotonicityReport r;
  for (const auto& env : envs) {
    ++r.instances;
    Belief b = env.prior();
    std::set<std::size_t> asked;
    for (std::size_t step = 0; step < steps && asked.size() < env.kernels.size(); ++step) {
      std::optional<std::size_t> next;
      double best = -1.0;
      std::vector<double> mi_now(env.kernels.size(), 0.0);
      for (std::size_t i = 0; i < env.kernels.size(); ++i) {
        if (asked.count(i)) continue;
        mi_now[i] = mutual_information(b, env.kernels[i]);
        if (mi_now[i] > best) {
          best = mi_now[i];
          next = i;
        }
      }
      const auto& kn = env.kernels[*next];
      for (std::size_t i = 0; i < env.kernels.size(); ++i) {
        if (asked.count(i) || i == *next) continue;
        const double after = expect_over_answers(
            b, kn, [&](const Belief& post) { return mutual_information(post, env.kernels[i]); });
        ++r.checks;
        const double excess = after - mi_now[i];
        r.max_excess = std::max(r.max_excess, excess);
        if (excess > tolerance) ++r.violations;
      }
      auto rng = answer_stream(env, *next);
      const auto y = simulate_answer(env, *next, rng);
      b = posterior_given(b, kn, y);
      asked.insert(*next);
      for (std::size_t i = 0; i < env.kernels.size(); ++i) {
        if (asked.count(i)) continue;
        if (mutual_information(b, env.kernels[i]) > mi_now[i] + tolerance) ++r.pointwise_increases;
      }
    }
  }
  return r;
}

const char* to_string(PolicyKind k) noexcept {
  switch (k) {
    case PolicyKind::MiGreedy: return "mi";
    case PolicyKind::Random: return "random";
    case PolicyKind::FixedOrder: return "fixed";
  }
  return "unknown";
}

PolicyKind parse_policy(const std::string& name) {
  if (name == "mi" || name == "mi-greedy") return PolicyKind::MiGreedy;
  if (name == "random") return PolicyKind::Random;
  if (name == "fixed" || name == "fixed-order") return PolicyKind::FixedOrder;
  throw ConfigError("unknown policy '" + name + "'");
}

json MeanStat::to_json() const {
  return {{"mean", mean}, {"stderr", stderr_}, {"count", count}, {"ci95", {ci_low(), ci_high()}}};
}

MeanStat mean_stat(const std::vector<double>& xs) {
  MeanStat m;
  m.count = xs.size();
  if (xs.empty()) return m;
  m.mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
  if (xs.size() >= 2) {
    double ss = 0.0;
    for (double x : xs) ss += (x - m.mean) * (x - m.mean);
    m.stderr_ = std::sqrt(ss / static_cast<double>(xs.size() - 1) / static_cast<double>(xs.size()));
  }
  return m;
}

namespace {

bool marginals_concentrated(const Belief& b, double alpha, double beta) {
  const std::size_t p = b.space().dim_count();
  std::size_t hit = 0;
  for (std::size_t j = 0; j < p; ++j) {
    const auto m = marginal(b, j);
    if (*std::max_element(m.begin(), m.end()) >= 1.0 - alpha) ++hit;
  }
  return static_cast<double>(hit) / static_cast<double>(p) >= beta;
}

struct Episode {
  std::vector<double> gain;
  double rounds = 0.0;
  bool converged = false;
  bool map_hit = false;
};

Episode run_episode(const SyntheticInstance& inst, const PolicySpec& policy, std::size_t k_max,
                    const BenchConfig& cfg) {
  const std::size_t bank = inst.kernels.size();
  const std::size_t max_rounds = cfg.max_rounds == 0 ? bank : std::min(cfg.max_rounds, bank);
  std::mt19937_64 prng(splitmix64(inst.seed ^ splitmix64(policy.seed + 0x51ULL)));
  Belief b = inst.prior();
  const double h0 = entropy(b);
  Episode ep;
  ep.gain.assign(k_max, 0.0);
  std::vector<bool> asked(bank, false);
  std::optional<Belief> at_stop;
  if (marginals_concentrated(b, cfg.alpha, cfg.beta)) {
    ep.converged = true;
    ep.rounds = 0;
    at_stop = b;
  }
  const std::size_t horizon = std::min(bank, std::max(k_max, max_rounds));
  for (std::size_t step = 1; step <= horizon; ++step) {
    std::size_t pick = bank;
    if (policy.kind == PolicyKind::MiGreedy) {
      double best = -1.0;
      for (std::size_t i = 0; i < bank; ++i) {
        if (asked[i]) continue;
        const double mi = mutual_information(b, inst.kernels[i]);
        if (mi > best) {
          best = mi;
          pick = i;
        }
      }
    } else if (policy.kind == PolicyKind::Random) {
      std::vector<std::size_t> open;
      for (std::size_t i = 0; i < bank; ++i) {
        if (!asked[i]) open.push_back(i);
      }
      pick = open[uniform_index(prng, open.size())];
    } else {
      for (pick = 0; asked[pick]; ++pick) {
      }
    }
    asked[pick] = true;
    auto rng = answer_stream(inst, pick);
    const auto y = simulate_answer(inst, pick, rng);
    b = posterior_given(b, inst.kernels[pick], y);
    if (step <= k_max) ep.gain[step - 1] = h0 - entropy(b);
    if (!at_stop && step <= max_rounds && marginals_concentrated(b, cfg.alpha, cfg.beta)) {
      ep.converged = true;
      ep.rounds = static_cast<double>(step);
      at_stop = b;
    }
  }
  for (std::size_t k = std::min(horizon, k_max); k < k_max; ++k) ep.gain[k] = k == 0 ? 0.0 : ep.gain[k - 1];
  if (!at_stop) {
    ep.rounds = static_cast<double>(max_rounds);
    at_stop = b;
  }
  ep.map_hit = map_index(*at_stop) == inst.true_state;
  return ep;
}

}  // namespace

BenchReport run_policy_comparison(const std::vector<PolicySpec>& policies, std::size_t instance_count,
                                  std::size_t k_max, const BenchConfig& cfg) {
  if (policies.empty()) throw ConfigError("need at least one policy");
  BenchReport report;
  report.config = cfg;
  report.instances = instance_count;
  report.k_max = k_max;

  std::vector<std::function<std::vector<Episode>()>> jobs;
  for (std::size_t i = 0; i < instance_count; ++i) {
    jobs.emplace_back([&, i] {
      const auto inst = generate_instance(splitmix64(cfg.seed * 1000003ULL + i), cfg.p, cfg.n, cfg.q_count,
                                          cfg.sharpness, cfg.sim);
      std::vector<Episode> eps;
      for (const auto& pol : policies) eps.push_back(run_episode(inst, pol, k_max, cfg));
      return eps;
    });
  }
  const auto results = dispatch_parallel(jobs, std::max<std::size_t>(1, cfg.threads));

  for (std::size_t a = 0; a < policies.size(); ++a) {
    PolicyArm arm;
    arm.policy = policies[a];
    arm.gain_samples.assign(k_max, {});
    std::vector<double> hits;
    for (const auto& eps : results) {
      const auto& ep = eps[a];
      for (std::size_t k = 0; k < k_max; ++k) arm.gain_samples[k].push_back(ep.gain[k]);
      arm.rounds_samples.push_back(ep.rounds);
      if (!ep.converged) ++arm.unconverged;
      hits.push_back(ep.map_hit ? 1.0 : 0.0);
    }
    for (std::size_t k = 0; k < k_max; ++k) arm.gain.push_back(mean_stat(arm.gain_samples[k]));
    arm.rounds_to_convergence = mean_stat(arm.rounds_samples);
    arm.map_recovery = mean_stat(hits);
    for (double r : arm.rounds_samples) arm.rounds_histogram[static_cast<std::size_t>(r)] += 1.0;
    for (auto& [_, v] : arm.rounds_histogram) v /= static_cast<double>(std::max<std::size_t>(1, instance_count));
    report.arms.push_back(std::move(arm));
  }
  for (std::size_t a = 1; a < report.arms.size(); ++a) {
    PairedDiff d;
    d.against = to_string(report.arms[a].policy.kind);
    for (std::size_t k = 0; k < k_max; ++k) {
      std::vector<double> diff;
      for (std::size_t i = 0; i < instance_count; ++i) {
        diff.push_back(report.arms[0].gain_samples[k][i] - report.arms[a].gain_samples[k][i]);
      }
      d.gain_diff.push_back(mean_stat(diff));
    }
    std::vector<double> rd;
    for (std::size_t i = 0; i < instance_count; ++i) {
      rd.push_back(report.arms[0].rounds_samples[i] - report.arms[a].rounds_samples[i]);
    }
    d.rounds_diff = mean_stat(rd);
    report.diffs.push_back(std::move(d));
  }
  return report;
}

json BenchReport::to_json() const {
  json arms_j = json::array();
  for (const auto& arm : arms) {
    json gain = json::array();
    for (const auto& g : arm.gain) gain.push_back(g.to_json());
    json hist = json::object();
    for (const auto& [k, v] : arm.rounds_histogram) hist[std::to_string(k)] = v;
    arms_j.push_back({{"policy", to_string(arm.policy.kind)},
                      {"seed", arm.policy.seed},
                      {"cumulative_gain", std::move(gain)},
                      {"rounds_to_convergence", arm.rounds_to_convergence.to_json()},
                      {"unconverged", arm.unconverged},
                      {"map_recovery", arm.map_recovery.to_json()},
                      {"rounds_histogram", std::move(hist)}});
  }
  json diffs_j = json::array();
  for (const auto& d : diffs) {
    json g = json::array();
    for (const auto& x : d.gain_diff) g.push_back(x.to_json());
    diffs_j.push_back({{"against", d.against}, {"gain_diff", std::move(g)}, {"rounds_diff", d.rounds_diff.to_json()}});
  }
  return {{"config",
           {{"seed", config.seed},
            {"p", config.p},
            {"n", config.n},
            {"q_count", config.q_count},
            {"sharpness", config.sharpness},
            {"alpha", config.alpha},
            {"beta", config.beta}}},
          {"instances", instances},
          {"k_max", k_max},
          {"arms", std::move(arms_j)},
          {"paired_differences", std::move(diffs_j)}};
}

std::string BenchReport::gain_columns(std::size_t arm) const {
  std::string out = "k\tmean\tstderr\n";
  const auto& a = arms.at(arm);
  for (std::size_t k = 0; k < a.gain.size(); ++k) {
    std::ostringstream line;
    line.precision(12);
    line << (k + 1) << '\t' << a.gain[k].mean << '\t' << a.gain[k].stderr_ << '\n';
    out += line.str();
  }
  return out;
}

NliLabel parse_nli_label(const std::string& s) {
  if (s == "entailment") return NliLabel::Entailment;
  if (s == "neutral") return NliLabel::Neutral;
  if (s == "contradiction") return NliLabel::Contradiction;
  throw ConfigError("unknown entailment label '" + s + "'");
}

bool semantic_equivalence(NliLabel fwd, NliLabel bwd) noexcept {
  const bool contradiction = fwd == NliLabel::Contradiction || bwd == NliLabel::Contradiction;
  const bool both_neutral = fwd == NliLabel::Neutral && bwd == NliLabel::Neutral;
  return !contradiction && !both_neutral;
}

bool semantic_equivalence(const std::string& fwd, const std::string& bwd) {
  return semantic_equivalence(parse_nli_label(fwd), parse_nli_label(bwd));
}

json RoundHistograms::to_json() const {
  json a = json::object();
  json e = json::object();
  for (const auto& [k, v] : ask) a[std::to_string(k)] = v;
  for (const auto& [k, v] : expand) e[std::to_string(k)] = v;
  return {{"ask", std::move(a)}, {"expand", std::move(e)}, {"t_ask", t_ask_marker}, {"sessions", sessions}};
}

RoundHistograms round_histograms(const std::vector<Transcript>& transcripts, long t_ask) {
  if (transcripts.empty()) throw ConfigError("round_histograms needs at least one transcript");
  RoundHistograms h;
  h.t_ask_marker = t_ask;
  h.sessions = transcripts.size();
  for (const auto& t : transcripts) {
    long asks = 0;
    long expands = 0;
    for (const auto& e : t.events()) {
      const auto& kind = e.at("kind");
      if (kind == "update" || kind == "update-rejected") ++asks;
      if (kind == "expand") ++expands;
    }
    h.ask[asks] += 1.0;
    h.expand[expands] += 1.0;
  }
  const double n = static_cast<double>(transcripts.size());
  for (auto& [_, v] : h.ask) v /= n;
  for (auto& [_, v] : h.expand) v /= n;
  return h;
}

}  // namespace balar
