#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "trajservo/benchmark.hpp"
#include "trajservo/config.hpp"
#include "trajservo/metrics.hpp"
#include "trajservo/run_log_io.hpp"
#include "trajservo/sim_engine.hpp"

namespace {

using namespace trajservo;

struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> tau_fr;
  std::string out;
  std::vector<std::string> overrides;
};

void add_common(CLI::App* app, CommonFlags& f) {
  app->add_option("--config", f.config, "INI config file")->check(CLI::ExistingFile);
  app->add_option("--seed", f.seed, "seed (trial seed for run, master seed for bench)");
  app->add_option("--tau-fr", f.tau_fr, "replenishment threshold")->check(CLI::Range(2, 100000));
  app->add_option("--out", f.out, "output directory");
  app->add_option("--set", f.overrides, "override a config key, section.key=value (repeatable)");
}

RunConfig resolve(const CommonFlags& f) {
  RunConfig cfg = f.config.empty() ? RunConfig{} : load_config(f.config);
  cfg = apply_overrides(f.overrides, cfg);
  if (f.tau_fr) cfg.trial.sim.tau_fr = *f.tau_fr;
  if (f.seed) cfg.bench.seed = *f.seed;
  cfg.trial.validate();
  return cfg;
}

void print_report(const BenchReport& report) {
  std::printf("%-8s %-10s %10s %10s %10s %10s %8s\n", "template", "method", "ALE cm", "+-ci95", "TE cm", "+-ci95", "rep/m");
  for (const auto& a : report.aggregate) {
    if (a.metric != "ale_cm") continue;
    const GroupStats& te = report.stats(a.template_name, a.method, "te_cm");
    const GroupStats& rep = report.stats(a.template_name, a.method, "replenish_per_m");
    std::printf("%-8s %-10s %10.4f %10.4f %10.4f %10.4f %8.3f\n", a.template_name.c_str(), a.method.c_str(), a.stats.mean,
                a.stats.ci95, te.mean, te.ci95, rep.mean);
  }
}

int run_suite(const CommonFlags& f, Suite suite, std::optional<int> trials, std::optional<int> workers) {
  const RunConfig cfg = resolve(f);
  BenchOptions opts;
  opts.suite = suite;
  opts.trials = trials.value_or(cfg.bench.trials);
  opts.workers = workers.value_or(cfg.bench.workers);
  opts.master_seed = cfg.bench.seed;

  const auto t0 = std::chrono::steady_clock::now();
  const BenchReport report = run_benchmark(cfg.trial, opts);
  const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  print_report(report);
  std::printf("%zu trials in %.1f s\n", report.results.size(), elapsed);

  const std::filesystem::path out = f.out.empty() ? std::filesystem::path("out") / to_string(suite) : std::filesystem::path(f.out);
  const bool ok = write_bench_outputs(out, report, cfg.trial);
  std::printf("wrote %s/{trials.csv,aggregate.csv,summary.json}\n", out.string().c_str());
  if (!ok) {
    std::fprintf(stderr, "aggregate re-derived from trials.csv does not match\n");
    return 3;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Trajectory servoing simulator and benchmark harness"};
  app.require_subcommand(1);

  CommonFlags run_flags;
  std::string run_template;
  std::string run_method = "TS";
  CLI::App* run = app.add_subcommand("run", "simulate a single trial and write its run log");
  add_common(run, run_flags);
  run->add_option("--template", run_template, "template name (SS, SWT, ..., LZZ) or custom");
  run->add_option("--method", run_method, "PO, SLAM, TS, TS_PO, VS_PLUS or I_TS");

  CommonFlags bench_flags;
  std::string suite_name = "short";
  std::optional<int> bench_trials, bench_workers;
  CLI::App* bench = app.add_subcommand("bench", "run a benchmark suite");
  add_common(bench, bench_flags);
  bench->add_option("--suite", suite_name, "short or long")->check(CLI::IsMember({"short", "long"}));
  bench->add_option("--trials", bench_trials, "trials per template and method")->check(CLI::Range(2, 1000000));
  bench->add_option("--workers", bench_workers, "worker threads")->check(CLI::Range(1, 1024));

  CommonFlags ablate_flags;
  std::string which;
  std::optional<int> ablate_trials, ablate_workers;
  CLI::App* ablate = app.add_subcommand("ablate", "run an ablation on the long templates");
  add_common(ablate, ablate_flags);
  ablate->add_option("which", which, "tau or its")->required()->check(CLI::IsMember({"tau", "its"}));
  ablate->add_option("--trials", ablate_trials, "trials per template and setting")->check(CLI::Range(2, 1000000));
  ablate->add_option("--workers", ablate_workers, "worker threads")->check(CLI::Range(1, 1024));

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      RunConfig cfg = resolve(run_flags);
      if (!run_template.empty()) cfg.trial.template_name = run_template;
      const Method method = parse_method(run_method);
      const RunLog log = run_trial(cfg.trial, method, cfg.bench.seed);
      const std::filesystem::path out = run_flags.out.empty() ? std::filesystem::path("out") : std::filesystem::path(run_flags.out);
      std::filesystem::create_directories(out);
      const std::string path = (out / ("run_" + cfg.trial.template_name + "_" + std::string(to_string(method)) + ".csv")).string();
      write_run_log(path, log);
      const TerminalError te = compute_te(log);
      std::printf("template %s method %s seed %llu\n", cfg.trial.template_name.c_str(), std::string(to_string(method)).c_str(),
                  static_cast<unsigned long long>(cfg.bench.seed));
      std::printf("ALE %s cm  TE %s cm%s  smoothness %s  replenish/m %s  completed %s (%s)\n", fmt9(compute_ale(log)).c_str(),
                  fmt9(te.te_cm).c_str(), te.incomplete ? " (incomplete)" : "",
                  fmt9(log.steps.size() >= 2 ? compute_smoothness(log) : 0.0).c_str(),
                  fmt9(traveled_distance(log) > 0.0 ? compute_replenish_rate(log) : 0.0).c_str(),
                  fmt9(log.completed_fraction).c_str(), std::string(to_string(log.termination)).c_str());
      std::printf("wrote %s\n", path.c_str());
      return 0;
    }
    if (*bench) return run_suite(bench_flags, parse_suite(suite_name), bench_trials, bench_workers);
    return run_suite(ablate_flags, which == "tau" ? Suite::ablate_tau : Suite::ablate_its, ablate_trials, ablate_workers);
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return e.code() == ErrorCode::ConfigError ? 2 : 1;
  }
}
