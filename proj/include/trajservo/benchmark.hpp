#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "trajservo/config.hpp"
#include "trajservo/error.hpp"
#include "trajservo/metrics.hpp"
#include "trajservo/run_log_io.hpp"
#include "trajservo/sim_engine.hpp"
#include "trajservo/stats.hpp"

namespace trajservo {

enum class Suite { short_suite, long_suite, ablate_tau, ablate_its };

constexpr std::string_view to_string(Suite s) {
  switch (s) {
    case Suite::short_suite: return "short";
    case Suite::long_suite: return "long";
    case Suite::ablate_tau: return "ablate_tau";
    case Suite::ablate_its: return "ablate_its";
  }
  return "?";
}

inline Suite parse_suite(std::string_view s) {
  for (Suite v : {Suite::short_suite, Suite::long_suite, Suite::ablate_tau, Suite::ablate_its}) {
    if (s == to_string(v)) return v;
  }
  if (s == "tau") return Suite::ablate_tau;
  if (s == "its") return Suite::ablate_its;
  throw Error(ErrorCode::ConfigError, "unknown suite '" + std::string(s) + "'");
}

inline const std::vector<int>& tau_sweep() {
  static const std::vector<int> values{4, 6, 10, 16, 22, 36, 50};
  return values;
}

/// One (template, method, tau) combination of a suite.
struct BenchCell {
  std::string template_name;
  Method method = Method::TS;
  int tau_fr = 10;
  std::string label;  // method column of the outputs
};

inline std::vector<BenchCell> suite_cells(Suite suite, int default_tau) {
  std::vector<BenchCell> cells;
  auto add = [&](const auto& templates, std::initializer_list<Method> methods) {
    for (auto name : templates) {
      for (Method m : methods) cells.push_back({std::string(name), m, default_tau, std::string(to_string(m))});
    }
  };
  switch (suite) {
    case Suite::short_suite:
      add(short_template_names(), {Method::PO, Method::SLAM, Method::TS, Method::VS_PLUS});
      break;
    case Suite::long_suite:
      add(long_template_names(), {Method::PO, Method::SLAM, Method::TS, Method::TS_PO});
      break;
    case Suite::ablate_its:
      add(long_template_names(), {Method::PO, Method::SLAM, Method::TS, Method::I_TS});
      break;
    case Suite::ablate_tau:
      for (auto name : long_template_names()) {
        for (int tau : tau_sweep()) cells.push_back({std::string(name), Method::TS, tau, "TS_tau" + std::to_string(tau)});
      }
      break;
  }
  return cells;
}

/// Seed shared by every cell for a given trial index, so methods are
/// compared on common random numbers.
inline std::uint64_t trial_seed(std::uint64_t master_seed, int trial) {
  std::seed_seq seq{static_cast<std::uint32_t>(master_seed & 0xffffffffu), static_cast<std::uint32_t>(master_seed >> 32),
                    static_cast<std::uint32_t>(trial), 0x7a5eu};
  std::uint32_t out[2];
  seq.generate(out, out + 2);
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

struct TrialResult {
  std::string template_name;
  std::string method;
  int tau_fr = 10;
  int trial = 0;
  std::uint64_t seed = 0;
  double ale_cm = 0.0;
  double te_cm = 0.0;
  bool te_incomplete = false;
  double smoothness = 0.0;
  double replenish_per_m = 0.0;
  double pose_query_per_m = 0.0;
  double completed_fraction = 0.0;
  std::string termination;
};

inline const std::vector<std::string>& metric_names() {
  static const std::vector<std::string> names{"ale_cm", "te_cm", "smoothness", "replenish_per_m", "pose_query_per_m",
                                              "completed_fraction"};
  return names;
}

inline double metric_value(const TrialResult& r, const std::string& metric) {
  if (metric == "ale_cm") return r.ale_cm;
  if (metric == "te_cm") return r.te_cm;
  if (metric == "smoothness") return r.smoothness;
  if (metric == "replenish_per_m") return r.replenish_per_m;
  if (metric == "pose_query_per_m") return r.pose_query_per_m;
  if (metric == "completed_fraction") return r.completed_fraction;
  throw Error(ErrorCode::InvalidParams, "unknown metric " + metric);
}

/// Metrics of one run, each rounded to the nine digits that reach the CSV so
/// the aggregate can be re-derived from the file exactly.
inline TrialResult evaluate_trial(const RunLog& log, const TrialConfig& config, const ReferenceTrajectory& traj) {
  TrialResult r;
  r.ale_cm = round9(config.ale_mode == AleMode::nearest_point ? compute_ale_nearest(log, traj) : compute_ale(log));
  const TerminalError te = compute_te(log);
  r.te_cm = round9(te.te_cm);
  r.te_incomplete = te.incomplete;
  r.smoothness = round9(log.steps.size() >= 2 ? compute_smoothness(log) : 0.0);
  const double dist = traveled_distance(log);
  r.replenish_per_m = round9(dist > 0.0 ? replenish_count(log) / dist : 0.0);
  r.pose_query_per_m = round9(dist > 0.0 ? log.pose_queries / dist : 0.0);
  r.completed_fraction = round9(log.completed_fraction);
  r.termination = std::string(to_string(log.termination));
  return r;
}

struct AggregateRow {
  std::string template_name;  // "ALL" pools the suite's templates
  std::string method;
  std::string metric;
  GroupStats stats;
};

struct PValueRow {
  std::string template_name;
  std::string metric;
  std::string a;
  std::string b;
  double p = 1.0;
};

struct BenchReport {
  Suite suite = Suite::short_suite;
  int trials = 0;
  std::uint64_t master_seed = 0;
  std::vector<TrialResult> results;  // cell-major, then trial
  std::vector<AggregateRow> aggregate;
  std::vector<PValueRow> p_values;

  /// Per-trial values of one metric for a (template, method) group; the
  /// template "ALL" pools every template.
  std::vector<double> values(const std::string& template_name, const std::string& method, const std::string& metric) const {
    std::vector<double> v;
    for (const auto& r : results) {
      if (r.method == method && (template_name == "ALL" || r.template_name == template_name)) {
        v.push_back(metric_value(r, metric));
      }
    }
    return v;
  }

  const GroupStats& stats(const std::string& template_name, const std::string& method, const std::string& metric) const {
    for (const auto& a : aggregate) {
      if (a.template_name == template_name && a.method == method && a.metric == metric) return a.stats;
    }
    throw Error(ErrorCode::InvalidParams, "no aggregate for " + template_name + "/" + method + "/" + metric);
  }

  double p_value(const std::string& template_name, const std::string& metric, const std::string& a,
                 const std::string& b) const {
    for (const auto& p : p_values) {
      if (p.template_name == template_name && p.metric == metric &&
          ((p.a == a && p.b == b) || (p.a == b && p.b == a))) {
        return p.p;
      }
    }
    throw Error(ErrorCode::InvalidParams, "no p-value for " + a + " vs " + b);
  }
};

/// Group statistics and pairwise Welch p-values, in the order the groups
/// first appear in `results`. The order of `results` within a group does not
/// change anything but floating-point summation order.
inline void aggregate_results(BenchReport& report) {
  std::vector<std::string> templates, methods;
  for (const auto& r : report.results) {
    if (std::find(templates.begin(), templates.end(), r.template_name) == templates.end()) templates.push_back(r.template_name);
    if (std::find(methods.begin(), methods.end(), r.method) == methods.end()) methods.push_back(r.method);
  }
  templates.push_back("ALL");
  report.aggregate.clear();
  report.p_values.clear();
  for (const auto& tpl : templates) {
    for (const auto& m : methods) {
      for (const auto& metric : metric_names()) {
        std::vector<double> v = report.values(tpl, m, metric);
        if (v.empty()) continue;
        std::sort(v.begin(), v.end());
        report.aggregate.push_back({tpl, m, metric, summarize(v)});
      }
    }
    for (const std::string metric : {"ale_cm", "te_cm"}) {
      for (std::size_t i = 0; i < methods.size(); ++i) {
        for (std::size_t j = i + 1; j < methods.size(); ++j) {
          std::vector<double> a = report.values(tpl, methods[i], metric);
          std::vector<double> b = report.values(tpl, methods[j], metric);
          if (a.empty() || b.empty()) continue;
          std::sort(a.begin(), a.end());
          std::sort(b.begin(), b.end());
          report.p_values.push_back({tpl, metric, methods[i], methods[j], welch_p_value(a, b)});
        }
      }
    }
  }
}

struct BenchOptions {
  Suite suite = Suite::short_suite;
  int trials = 20;
  std::uint64_t master_seed = 1;
  int workers = 1;
};

/// Runs the suite's (template x method x trial) matrix on a worker pool.
/// Results are stored by index, so the report does not depend on scheduling.
inline BenchReport run_benchmark(const TrialConfig& base, const BenchOptions& opts) {
  if (opts.trials < 2) throw Error(ErrorCode::ConfigError, "a benchmark needs at least two trials per cell");
  if (opts.workers < 1) throw Error(ErrorCode::ConfigError, "workers must be positive");
  base.validate();

  const std::vector<BenchCell> cells = suite_cells(opts.suite, base.sim.tau_fr);
  const Scene scene(generate_scene(base.scene, base.scene.seed));
  std::map<std::string, ReferenceTrajectory> trajectories;
  for (const auto& c : cells) {
    if (!trajectories.contains(c.template_name)) {
      trajectories.emplace(c.template_name, build_template(c.template_name, base.template_params));
    }
  }

  BenchReport report;
  report.suite = opts.suite;
  report.trials = opts.trials;
  report.master_seed = opts.master_seed;
  const std::size_t total = cells.size() * static_cast<std::size_t>(opts.trials);
  report.results.resize(total);

  std::atomic<std::size_t> next{0};
  std::mutex error_mutex;
  std::exception_ptr failure;
  auto worker = [&] {
    for (std::size_t job = next++; job < total; job = next++) {
      try {
        const BenchCell& cell = cells[job / static_cast<std::size_t>(opts.trials)];
        const int trial = static_cast<int>(job % static_cast<std::size_t>(opts.trials));
        TrialConfig cfg = base;
        cfg.template_name = cell.template_name;
        cfg.sim.tau_fr = cell.tau_fr;
        const ReferenceTrajectory& traj = trajectories.at(cell.template_name);
        const std::uint64_t seed = trial_seed(opts.master_seed, trial);
        const RunLog log = run_trial(cfg, cell.method, seed, scene, traj);
        TrialResult r = evaluate_trial(log, cfg, traj);
        r.template_name = cell.template_name;
        r.method = cell.label;
        r.tau_fr = cell.tau_fr;
        r.trial = trial;
        r.seed = seed;
        report.results[job] = std::move(r);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!failure) failure = std::current_exception();
        next = total;
      }
    }
  };
  std::vector<std::thread> pool;
  for (int i = 1; i < opts.workers; ++i) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);

  aggregate_results(report);
  return report;
}

inline constexpr const char* kTrialsHeader =
    "suite,template,method,tau_fr,trial,seed,ale_cm,te_cm,te_incomplete,smoothness,replenish_per_m,pose_query_per_m,"
    "completed_fraction,termination";

inline void write_trials_csv(std::ostream& os, const BenchReport& report) {
  os << kTrialsHeader << '\n';
  for (const auto& r : report.results) {
    os << to_string(report.suite) << ',' << r.template_name << ',' << r.method << ',' << r.tau_fr << ',' << r.trial << ','
       << r.seed << ',' << fmt9(r.ale_cm) << ',' << fmt9(r.te_cm) << ',' << (r.te_incomplete ? 1 : 0) << ','
       << fmt9(r.smoothness) << ',' << fmt9(r.replenish_per_m) << ',' << fmt9(r.pose_query_per_m) << ','
       << fmt9(r.completed_fraction) << ',' << r.termination << '\n';
  }
}

inline std::vector<TrialResult> read_trials_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != kTrialsHeader) throw Error(ErrorCode::ConfigError, "bad trials CSV header");
  std::vector<TrialResult> out;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto c = detail::split(line, ',');
    if (c.size() != 14) throw Error(ErrorCode::ConfigError, "trials CSV row has wrong column count");
    TrialResult r;
    r.template_name = c[1];
    r.method = c[2];
    r.tau_fr = std::stoi(c[3]);
    r.trial = std::stoi(c[4]);
    r.seed = std::stoull(c[5]);
    r.ale_cm = std::stod(c[6]);
    r.te_cm = std::stod(c[7]);
    r.te_incomplete = c[8] == "1";
    r.smoothness = std::stod(c[9]);
    r.replenish_per_m = std::stod(c[10]);
    r.pose_query_per_m = std::stod(c[11]);
    r.completed_fraction = std::stod(c[12]);
    r.termination = c[13];
    out.push_back(std::move(r));
  }
  return out;
}

inline void write_aggregate_csv(std::ostream& os, const BenchReport& report) {
  os << "template,method,metric,mean,std,ci95,n\n";
  for (const auto& a : report.aggregate) {
    os << a.template_name << ',' << a.method << ',' << a.metric << ',' << fmt9(a.stats.mean) << ',' << fmt9(a.stats.std)
       << ',' << fmt9(a.stats.ci95) << ',' << a.stats.n << '\n';
  }
}

inline std::string aggregate_csv_string(const BenchReport& report) {
  std::ostringstream os;
  write_aggregate_csv(os, report);
  return os.str();
}

/// Recomputes the aggregate from the serialized trial rows alone and checks
/// that it prints identically.
inline bool rederive_matches(const BenchReport& report) {
  std::ostringstream trials;
  write_trials_csv(trials, report);
  std::istringstream in(trials.str());
  BenchReport copy;
  copy.suite = report.suite;
  copy.results = read_trials_csv(in);
  aggregate_results(copy);
  return aggregate_csv_string(copy) == aggregate_csv_string(report);
}

inline nlohmann::json summary_json(const BenchReport& report, const TrialConfig& config, bool rederived) {
  using nlohmann::json;
  json groups = json::array();
  for (const auto& a : report.aggregate) {
    groups.push_back({{"template", a.template_name},
                      {"method", a.method},
                      {"metric", a.metric},
                      {"mean", round9(a.stats.mean)},
                      {"std", round9(a.stats.std)},
                      {"ci95", round9(a.stats.ci95)},
                      {"n", a.stats.n}});
  }
  json pvals = json::array();
  for (const auto& p : report.p_values) {
    pvals.push_back({{"template", p.template_name}, {"metric", p.metric}, {"a", p.a}, {"b", p.b}, {"p", round9(p.p)}});
  }
  const NoiseModel& n = config.noise;
  return {{"suite", std::string(to_string(report.suite))},
          {"trials", report.trials},
          {"master_seed", report.master_seed},
          {"trial_count", report.results.size()},
          {"rederived_from_trials_csv", rederived},
          {"noise",
           {{"pixel_sigma", round9(n.pixel_sigma)},
            {"depth_rel_sigma", round9(n.depth_rel_sigma)},
            {"drift_pos_rate", round9(n.drift_pos_rate)},
            {"drift_yaw_rate", round9(n.drift_yaw_rate)},
            {"per_step_jitter", round9(n.per_step_jitter)},
            {"dropout_prob", round9(n.dropout_prob)}}},
          {"tau_fr", config.sim.tau_fr},
          {"control_rate", round9(config.sim.control_rate)},
          {"groups", groups},
          {"p_values", pvals}};
}

/// Writes trials.csv, aggregate.csv and summary.json into `dir`. Returns
/// whether the aggregate re-derived from trials.csv matched.
inline bool write_bench_outputs(const std::filesystem::path& dir, const BenchReport& report, const TrialConfig& config) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream os(dir / "trials.csv");
    write_trials_csv(os, report);
  }
  {
    std::ofstream os(dir / "aggregate.csv");
    write_aggregate_csv(os, report);
  }
  bool ok = false;
  {
    std::ifstream in(dir / "trials.csv");
    BenchReport copy;
    copy.suite = report.suite;
    copy.results = read_trials_csv(in);
    aggregate_results(copy);
    ok = aggregate_csv_string(copy) == aggregate_csv_string(report);
  }
  std::ofstream os(dir / "summary.json");
  os << summary_json(report, config, ok).dump(2) << '\n';
  if (!os) throw Error(ErrorCode::ConfigError, "cannot write outputs to " + dir.string());
  return ok;
}

}  // namespace trajservo
