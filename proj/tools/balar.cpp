// balar: headless runs, synthetic benchmarks, oracle checks and the HTTP service.

#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <httplib.h>

#include "balar/loop.hpp"
#include "balar/scripted_oracle.hpp"
#include "balar/service.hpp"
#include "balar/sim.hpp"

namespace {

using nlohmann::json;

std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw balar::ConfigError("cannot write '" + path + "'");
  out << text;
}

int cmd_run(const std::string& fixture_path, const std::string& config_path, const std::string& out) {
  auto fixture = balar::Fixture::load(fixture_path);
  auto cfg = balar::LoopConfig::merged(balar::LoopConfig{}, fixture.config);
  if (!config_path.empty()) {
    std::ifstream in(config_path);
    if (!in) throw balar::ConfigError("cannot read config '" + config_path + "'");
    cfg = balar::LoopConfig::merged(cfg, json::parse(in));
  }
  const auto instance = fixture.instance;
  balar::ScriptedOracle oracle(std::move(fixture), cfg.label_map, cfg.max_retries);
  const auto r = balar::run_session(instance, oracle, oracle, cfg);
  if (!out.empty()) {
    r.transcript.write_file(out);
  } else {
    std::cout << r.transcript.to_jsonl();
  }
  std::cerr << "status: " << balar::to_string(r.status) << '\n';
  if (r.final_answer) std::cerr << "final answer: " << r.final_answer->text << '\n';
  if (r.state) std::cerr << "map: " << balar::map_summary(r.state->belief).dump() << '\n';
  if (!r.error.empty()) std::cerr << "error (" << r.error_call_kind << "): " << r.error << '\n';
  return r.status == balar::Status::Error ? 1 : 0;
}

int cmd_bench(const std::string& policies_csv, std::size_t instances, std::size_t kmax, balar::BenchConfig cfg,
              const std::string& out) {
  std::vector<balar::PolicySpec> policies;
  for (const auto& name : split_csv(policies_csv)) policies.push_back({balar::parse_policy(name), cfg.seed});
  const auto report = balar::run_policy_comparison(policies, instances, kmax, cfg);
  const auto j = report.to_json();
  if (out.empty()) {
    std::cout << j.dump(2) << '\n';
  } else {
    write_text(out + ".json", j.dump(2) + "\n");
    for (std::size_t a = 0; a < report.arms.size(); ++a) {
      write_text(out + "." + balar::to_string(report.arms[a].policy.kind) + ".tsv", report.gain_columns(a));
    }
  }
  for (const auto& arm : report.arms) {
    std::cerr << balar::to_string(arm.policy.kind) << ": gain@" << kmax << " = " << arm.gain.back().mean
              << ", rounds = " << arm.rounds_to_convergence.mean << '\n';
  }
  return 0;
}

int cmd_verify_theorem(const std::string& corpus, std::uint64_t seed, double tol, const std::string& out) {
  std::size_t count = 0;
  if (corpus == "small") {
    count = 60;
  } else if (corpus == "large") {
    count = 600;
  } else {
    count = std::stoul(corpus);
  }
  const auto report = balar::verify_theorem(balar::theorem_corpus(count, seed), tol);
  if (!out.empty()) write_text(out, report.to_json().dump(2) + "\n");
  std::cout << "cases " << report.cases.size() << ", violations " << report.violations << ", worst ratio "
            << report.worst_ratio << '\n';
  return report.violations == 0 ? 0 : 1;
}

int cmd_serve(const std::string& host, int port, balar::ServiceOptions opts) {
  balar::SessionService service(std::move(opts));
  const auto restored = service.recover();
  if (restored > 0) std::cerr << "restored " << restored << " sessions\n";
  httplib::Server server;
  service.mount(server);
  std::cerr << "listening on " << host << ":" << port << '\n';
  return server.listen(host, port) ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bayesian question-asking loop: runs, benchmarks and service"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "Run a scripted fixture headless and write its transcript");
  std::string fixture, config, run_out;
  run->add_option("--fixture", fixture, "Fixture JSON")->required()->check(CLI::ExistingFile);
  run->add_option("--config", config, "LoopConfig JSON overrides")->check(CLI::ExistingFile);
  run->add_option("--out", run_out, "Transcript path (JSONL); stdout when omitted");

  auto* bench = app.add_subcommand("bench", "Compare selection policies on synthetic instances");
  std::string policies = "mi,random";
  std::size_t instances = 200, kmax = 5;
  balar::BenchConfig bcfg;
  std::string bench_out;
  bench->add_option("--policies", policies, "Comma-separated: mi, random, fixed");
  bench->add_option("--instances", instances);
  bench->add_option("--kmax", kmax);
  bench->add_option("--seed", bcfg.seed);
  bench->add_option("--dims", bcfg.p);
  bench->add_option("--values", bcfg.n);
  bench->add_option("--questions", bcfg.q_count);
  bench->add_option("--sharpness", bcfg.sharpness)->check(CLI::Range(0.0, 1.0));
  bench->add_option("--spread-floor", bcfg.sim.spread_floor)->check(CLI::Range(0.0, 1.0));
  bench->add_option("--alpha", bcfg.alpha);
  bench->add_option("--beta", bcfg.beta);
  bench->add_option("--max-rounds", bcfg.max_rounds);
  bench->add_option("--threads", bcfg.threads);
  bench->add_option("--out", bench_out, "Output prefix: <out>.json and <out>.<policy>.tsv");

  auto* theorem = app.add_subcommand("verify-theorem", "Greedy vs. exhaustive adaptive optimum on small instances");
  std::string corpus = "small";
  std::uint64_t tseed = 7;
  double tol = 1e-9;
  std::string theorem_out;
  theorem->add_option("--corpus", corpus, "small, large, or an instance count");
  theorem->add_option("--seed", tseed);
  theorem->add_option("--tolerance", tol);
  theorem->add_option("--out", theorem_out);

  auto* serve = app.add_subcommand("serve", "Serve sessions over HTTP");
  std::string host = "127.0.0.1";
  int port = 8080;
  balar::ServiceOptions sopts;
  sopts.fixtures_dir = "fixtures";
  std::string transcripts;
  serve->add_option("--host", host);
  serve->add_option("--port", port);
  serve->add_option("--fixtures", sopts.fixtures_dir)->check(CLI::ExistingDirectory);
  serve->add_option("--transcripts", transcripts, "Write-through transcript directory");
  serve->add_option("--prompts", sopts.prompts_dir)->check(CLI::ExistingDirectory);

  CLI11_PARSE(app, argc, argv);
  try {
    if (*run) return cmd_run(fixture, config, run_out);
    if (*bench) return cmd_bench(policies, instances, kmax, bcfg, bench_out);
    if (*theorem) return cmd_verify_theorem(corpus, tseed, tol, theorem_out);
    if (*serve) {
      if (!transcripts.empty()) sopts.transcript_dir = transcripts;
      return cmd_serve(host, port, std::move(sopts));
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
