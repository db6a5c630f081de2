#pragma once

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"
#include "ura/engine.hpp"

namespace ura {

enum class AblationMode { none, early_stop_off, single_config, single_config_refresh };

inline std::string to_string(AblationMode m) {
  switch (m) {
    case AblationMode::none: return "none";
    case AblationMode::early_stop_off: return "early_stop_off";
    case AblationMode::single_config: return "single_config";
    default: return "single_config_refresh";
  }
}

struct TracePoint {
  long long upper_fes = 0;
  long long lower_fes = 0;
  double best_F_gap = 0.0;
};

struct TrialResult {
  std::string problem;
  std::uint64_t seed = 0;
  double best_F_gap = std::numeric_limits<double>::infinity();
  double best_f_gap = std::numeric_limits<double>::infinity();
  long long upper_fes = 0;
  long long lower_fes = 0;
  int restarts = 0;
  bool converged = false;
  std::string stop_reason;  // "converged" or "budget"
  double wall_seconds = 0.0;
  long generations = 0;
  std::vector<TracePoint> trace;
};

struct RunConfig {
  std::string suite;          // echo only: smd / wra / synthetic
  std::string problem_label;  // echo only
  long long budget = 10'000'000;
  int seeds = 20;
  std::uint64_t seed_base = 1;   // trials use seeds seed_base .. seed_base+seeds-1
  double target_gap = 1e-6;      // success accuracy; also the report floor
  int upper_no_improve = 60;     // restart after this many stalled generations
  double upper_improve_tol = 1e-6;
  double v_min_x = 1e-12;
  double cond_max_x = 1e7;
  int lambda_x = 0;              // 0: floor(4 + 3 ln dx)
  UraParams ura;                 // lambda_y / n_omega of 0 are derived
  AblationMode ablation = AblationMode::none;
  bool trace = false;
  int threads = 0;               // 0: URA_THREADS env, then hardware
  std::string out_path;          // harness writers derive sibling files from it

  void validate() const {
    if (budget < 1) throw ConfigError("RunConfig: budget must be >= 1");
    if (seeds < 1) throw ConfigError("RunConfig: seeds must be >= 1");
    if (!(target_gap > 0.0)) throw ConfigError("RunConfig: target_gap must be positive");
    if (upper_no_improve < 1) throw ConfigError("RunConfig: upper_no_improve must be >= 1");
    if (!(v_min_x > 0.0)) throw ConfigError("RunConfig: v_min_x must be positive");
    if (!(cond_max_x >= 1.0)) throw ConfigError("RunConfig: cond_max_x must be >= 1");
    if (threads < 0) throw ConfigError("RunConfig: threads must be >= 0");
  }
};

/// Fills the derived fields of a config for one problem: population sizes
/// from the dimensions and the ablation applied to the engine parameters.
inline RunConfig resolve_config(RunConfig cfg, const BilevelProblem& problem) {
  cfg.validate();
  if (cfg.lambda_x == 0) cfg.lambda_x = population_size(problem.dx);
  if (cfg.lambda_x < 2) throw ConfigError("RunConfig: lambda_x must be >= 2");
  UraParams defaults = UraParams::defaults(problem.dx, problem.dy);
  if (cfg.ura.lambda_y == 0) cfg.ura.lambda_y = defaults.lambda_y;
  if (cfg.ura.n_omega == 0) cfg.ura.n_omega = 3 * cfg.lambda_x;
  switch (cfg.ablation) {
    case AblationMode::none:
      break;
    case AblationMode::early_stop_off:
      cfg.ura.early_stopping = false;
      break;
    case AblationMode::single_config:
      cfg.ura.warm_start_mode = WarmStartMode::single_config;
      cfg.ura.n_omega = 1;
      break;
    case AblationMode::single_config_refresh:
      cfg.ura.warm_start_mode = WarmStartMode::single_config_refresh;
      cfg.ura.n_omega = 1;
      break;
  }
  cfg.ura.validate();
  return cfg;
}

/// Test hooks into the trial loop.
struct TrialHooks {
  /// Called after each restart epoch is initialized, with a copy of the rng
  /// as it stood before the epoch's draws, plus the freshly drawn state.
  std::function<void(int epoch, const Rng& rng_before, const SearchDistribution& dist,
                     const std::vector<CacheEntry>& cache)>
      on_epoch;
};

/// One independent optimization run: restart epochs of the nested solver
/// until the accuracy target is reached or the budget is spent. Restarts
/// rebuild the search distribution and the cache from the trial's continuing
/// random stream; the all-time best and the meters carry across. The best
/// pair is recorded as evaluated (mirrored into the boxes), tracked by its
/// accuracy gap so the recorded gap is non-increasing over the trial even on
/// adversarial problems where estimates can undershoot the optimum.
inline TrialResult run_trial(const BilevelProblem& problem, const RunConfig& raw_cfg,
                             std::uint64_t seed, const TrialHooks* hooks = nullptr) {
  const RunConfig cfg = resolve_config(raw_cfg, problem);
  if (!problem.has_optimum)
    throw ConfigError("run_trial: problem lacks a known optimum; accuracy gaps are undefined");

  const auto t0 = std::chrono::steady_clock::now();
  FeMeter meter(cfg.budget);
  Rng rng(seed);
  const CmaParams upper_params = CmaParams::standard(problem.dx, cfg.lambda_x);

  TrialResult res;
  res.problem = problem.name;
  res.seed = seed;

  bool done = false;

  for (int epoch = 0; !done; ++epoch) {
    if (epoch > 0) ++res.restarts;
    const Rng rng_before = rng;
    SearchDistribution dist = init_distribution(problem.lower_x, problem.upper_x, rng);
    std::vector<CacheEntry> cache = make_cache(problem, cfg.ura, rng);
    if (hooks && hooks->on_epoch) hooks->on_epoch(epoch, rng_before, dist, cache);

    double epoch_best = std::numeric_limits<double>::infinity();
    int no_improve = 0;
    bool restart = false;

    while (!restart) {
      // Reserve headroom for the generation's initial upper batch.
      if (meter.total() + cfg.lambda_x > meter.budget) {
        res.stop_reason = "budget";
        done = true;
        break;
      }
      try {
        auto xs = sample_population(dist, cfg.lambda_x, rng);
        std::vector<LowerSolverState> states;
        auto phi = ura_evaluate(problem, meter, cache, xs, cfg.ura, rng, nullptr, &states);

        for (std::size_t i = 0; i < xs.size(); ++i) {
          const double gap = std::abs(phi[i] - problem.upper_star);
          if (gap < res.best_F_gap) {
            res.best_F_gap = gap;
            res.best_f_gap = std::abs(states[i].f_y - problem.lower_star);
          }
        }
        ++res.generations;
        if (cfg.trace) res.trace.push_back({meter.upper.load(), meter.lower.load(), res.best_F_gap});

        if (res.best_F_gap <= cfg.target_gap) {
          res.converged = true;
          res.stop_reason = "converged";
          done = true;
          break;
        }

        double gen_best = phi[0];
        for (double v : phi) gen_best = std::min(gen_best, v);
        if (epoch_best - gen_best > cfg.upper_improve_tol) {
          no_improve = 0;
        } else {
          ++no_improve;
        }
        epoch_best = std::min(epoch_best, gen_best);
        if (no_improve >= cfg.upper_no_improve) {
          restart = true;
          break;
        }

        dist = update_distribution(dist, rank_by_value(std::move(xs), std::move(phi)), upper_params);
        if (check_termination(dist, cfg.v_min_x, cfg.cond_max_x) != Termination::none) {
          restart = true;
          break;
        }
      } catch (const NumericalError&) {
        restart = true;
      }
    }
  }

  res.upper_fes = meter.upper.load();
  res.lower_fes = meter.lower.load();
  res.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return res;
}

/// Hyndman-Fan type 5 quantile (h = n p + 1/2, linear between order
/// statistics): the one interpolation scheme matching the pinned reference
/// values median 2.5 / IQR 2.0 for the sample (1, 2, 3, 4).
inline double quantile_sorted(const std::vector<double>& sorted, double p) {
  if (sorted.empty()) throw ConfigError("quantile_sorted: empty sample");
  const double n = static_cast<double>(sorted.size());
  double h = n * p + 0.5;
  h = std::clamp(h, 1.0, n);
  const double lo = std::floor(h);
  const std::size_t i = static_cast<std::size_t>(lo) - 1;
  const double frac = h - lo;
  if (frac == 0.0 || i + 1 >= sorted.size()) return sorted[i];
  return sorted[i] + frac * (sorted[i + 1] - sorted[i]);
}

struct Aggregate {
  double median = 0.0;
  double iqr = 0.0;
};

inline Aggregate aggregate(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  return {quantile_sorted(values, 0.5),
          quantile_sorted(values, 0.75) - quantile_sorted(values, 0.25)};
}

struct SuiteResult {
  std::string problem;
  RunConfig config;                  // resolved config echo
  std::vector<TrialResult> trials;   // in seed order
  std::map<std::string, Aggregate> aggregates;
  int successes = 0;   // trials that reached the accuracy target
  bool success = false;  // median floored F gap within target
};

namespace detail {

inline double floor_gap(double gap, double floor_at) { return std::max(gap, floor_at); }

inline void aggregate_suite(SuiteResult& out) {
  const double floor_at = out.config.target_gap;
  std::vector<double> fg, lg, uf, lf, tf;
  for (const auto& t : out.trials) {
    fg.push_back(floor_gap(t.best_F_gap, floor_at));
    lg.push_back(floor_gap(t.best_f_gap, floor_at));
    uf.push_back(static_cast<double>(t.upper_fes));
    lf.push_back(static_cast<double>(t.lower_fes));
    tf.push_back(static_cast<double>(t.upper_fes + t.lower_fes));
    if (t.converged) ++out.successes;
  }
  out.aggregates["F_gap"] = aggregate(fg);
  out.aggregates["f_gap"] = aggregate(lg);
  out.aggregates["upper_fes"] = aggregate(uf);
  out.aggregates["lower_fes"] = aggregate(lf);
  out.aggregates["total_fes"] = aggregate(tf);
  out.success = out.aggregates["F_gap"].median <= floor_at;
}

inline int resolve_threads(const RunConfig& cfg) {
  int threads = cfg.threads;
  if (threads == 0) {
    if (const char* env = std::getenv("URA_THREADS")) threads = std::atoi(env);
  }
  if (threads <= 0) threads = static_cast<int>(std::thread::hardware_concurrency());
  if (threads <= 0) threads = 1;
  return std::min(threads, cfg.seeds);
}

}  // namespace detail

/// Runs the configured seeds (in parallel up to the thread cap; URA_THREADS
/// overrides the hardware default) and aggregates medians and IQRs. Results
/// are independent of the execution schedule: each trial owns its seed-keyed
/// stream and meter, and trials are collected in seed order.
inline SuiteResult run_suite(const BilevelProblem& problem, const RunConfig& raw_cfg) {
  SuiteResult out;
  out.problem = problem.name;
  out.config = resolve_config(raw_cfg, problem);
  out.trials.resize(out.config.seeds);

  const int threads = detail::resolve_threads(out.config);
  std::atomic<int> next{0};
  auto worker = [&]() {
    while (true) {
      const int i = next.fetch_add(1);
      if (i >= out.config.seeds) return;
      const std::uint64_t seed = out.config.seed_base + i;
      try {
        out.trials[i] = run_trial(problem, out.config, seed);
      } catch (const std::exception& e) {
        // Record the failure against its seed; aggregation proceeds.
        TrialResult fail;
        fail.problem = problem.name;
        fail.seed = seed;
        fail.stop_reason = std::string("error: ") + e.what();
        out.trials[i] = std::move(fail);
      }
    }
  };
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  detail::aggregate_suite(out);
  return out;
}

struct AblationResult {
  AblationMode mode = AblationMode::none;
  SuiteResult full;
  SuiteResult ablated;
};

/// Paired comparison on identical seeds: the full method versus one ablation.
inline AblationResult run_ablation(const BilevelProblem& problem, const RunConfig& raw_cfg,
                                   AblationMode mode) {
  if (mode == AblationMode::none)
    throw ConfigError("run_ablation: mode must name an ablation");
  AblationResult out;
  out.mode = mode;
  RunConfig full_cfg = raw_cfg;
  full_cfg.ablation = AblationMode::none;
  RunConfig ablated_cfg = raw_cfg;
  ablated_cfg.ablation = mode;
  // Re-derive engine parameters per variant rather than inheriting overrides.
  ablated_cfg.ura.n_omega = raw_cfg.ura.n_omega;
  out.full = run_suite(problem, full_cfg);
  out.ablated = run_suite(problem, ablated_cfg);
  return out;
}

// ---------------------------------------------------------------------------
// Report writers
// ---------------------------------------------------------------------------

namespace detail {

inline nlohmann::json config_json(const RunConfig& c) {
  return {
      {"suite", c.suite},
      {"problem", c.problem_label},
      {"budget", c.budget},
      {"seeds", c.seeds},
      {"seed_base", c.seed_base},
      {"target_gap", c.target_gap},
      {"lambda_x", c.lambda_x},
      {"lambda_y", c.ura.lambda_y},
      {"n_omega", c.ura.n_omega},
      {"tau_threshold", c.ura.tau_threshold},
      {"p_threshold", c.ura.p_threshold},
      {"p_plus", c.ura.p_plus},
      {"p_minus", c.ura.p_minus},
      {"c_max", c.ura.c_max},
      {"t_min", c.ura.t_min},
      {"v_min_y", c.ura.v_min_y},
      {"cond_max_y", c.ura.cond_max_y},
      {"max_rounds", c.ura.max_rounds},
      {"early_stopping", c.ura.early_stopping},
      {"upper_no_improve", c.upper_no_improve},
      {"v_min_x", c.v_min_x},
      {"cond_max_x", c.cond_max_x},
      {"ablation", to_string(c.ablation)},
      {"trace", c.trace},
  };
}

inline nlohmann::json trial_json(const TrialResult& t, double floor_at) {
  return {
      {"problem", t.problem},
      {"seed", t.seed},
      {"best_F_gap", floor_gap(t.best_F_gap, floor_at)},
      {"best_f_gap", floor_gap(t.best_f_gap, floor_at)},
      {"upper_fes", t.upper_fes},
      {"lower_fes", t.lower_fes},
      {"total_fes", t.upper_fes + t.lower_fes},
      {"restarts", t.restarts},
      {"generations", t.generations},
      {"converged", t.converged},
      {"stop_reason", t.stop_reason},
      {"wall_seconds", t.wall_seconds},
  };
}

inline nlohmann::json suite_json(const SuiteResult& s) {
  nlohmann::json trials = nlohmann::json::array();
  for (const auto& t : s.trials) trials.push_back(trial_json(t, s.config.target_gap));
  nlohmann::json agg;
  for (const auto& [metric, a] : s.aggregates)
    agg[metric] = {{"median", a.median}, {"iqr", a.iqr}};
  agg["successes"] = s.successes;
  agg["success"] = s.success;
  return {{"problem", s.problem}, {"trials", trials}, {"aggregate", agg}};
}

inline void write_file(const std::string& path, const std::string& body) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open output file: " + path);
  out << body;
  if (!out) throw ConfigError("failed writing output file: " + path);
}

inline std::string replace_extension(const std::string& path, const std::string& ext) {
  const auto slash = path.find_last_of('/');
  const auto dot = path.find_last_of('.');
  if (dot == std::string::npos || (slash != std::string::npos && dot < slash)) return path + ext;
  return path.substr(0, dot) + ext;
}

inline void append_suite_csv(std::ostream& out, const std::string& label, const SuiteResult& s) {
  for (const char* metric : {"F_gap", "f_gap", "upper_fes", "lower_fes", "total_fes"}) {
    const Aggregate& a = s.aggregates.at(metric);
    out << label << ',' << metric << ',' << a.median << ',' << a.iqr << ','
        << s.successes << '\n';
  }
}

inline void write_traces(const SuiteResult& s, const std::string& json_path) {
  if (!s.config.trace) return;
  for (const auto& t : s.trials) {
    std::ostringstream path;
    path << replace_extension(json_path, "") << "_trace_" << t.problem << "_seed" << t.seed
         << ".csv";
    std::ostringstream body;
    body << "upper_fes,lower_fes,best_F_gap\n";
    for (const auto& pt : t.trace)
      body << pt.upper_fes << ',' << pt.lower_fes << ','
           << floor_gap(pt.best_F_gap, s.config.target_gap) << '\n';
    write_file(path.str(), body.str());
  }
}

}  // namespace detail

/// Writes the machine-readable JSON document, the summary CSV next to it,
/// and per-seed trace CSVs when tracing was on. Reported gaps are floored at
/// the accuracy target.
inline void write_suite_report(const SuiteResult& s, const std::string& json_path) {
  nlohmann::json doc = {{"config", detail::config_json(s.config)}};
  doc.merge_patch(detail::suite_json(s));
  detail::write_file(json_path, doc.dump(2) + "\n");

  std::ostringstream csv;
  csv << "problem,metric,median,iqr,successes\n";
  detail::append_suite_csv(csv, s.problem, s);
  detail::write_file(detail::replace_extension(json_path, ".csv"), csv.str());
  detail::write_traces(s, json_path);
}

/// Paired report for an ablation comparison; CSV rows are labelled
/// problem:full and problem:ablation-name.
inline void write_ablation_report(const AblationResult& r, const std::string& json_path) {
  nlohmann::json paired = nlohmann::json::array();
  for (std::size_t i = 0; i < r.full.trials.size(); ++i) {
    paired.push_back({
        {"seed", r.full.trials[i].seed},
        {"full_total_fes", r.full.trials[i].upper_fes + r.full.trials[i].lower_fes},
        {"ablated_total_fes", r.ablated.trials[i].upper_fes + r.ablated.trials[i].lower_fes},
        {"full_converged", r.full.trials[i].converged},
        {"ablated_converged", r.ablated.trials[i].converged},
    });
  }
  nlohmann::json doc = {{"config", detail::config_json(r.full.config)},
                        {"mode", to_string(r.mode)},
                        {"full", detail::suite_json(r.full)},
                        {"ablated", detail::suite_json(r.ablated)},
                        {"paired", paired}};
  detail::write_file(json_path, doc.dump(2) + "\n");

  std::ostringstream csv;
  csv << "problem,metric,median,iqr,successes\n";
  detail::append_suite_csv(csv, r.full.problem + ":full", r.full);
  detail::append_suite_csv(csv, r.ablated.problem + ":" + to_string(r.mode), r.ablated);
  detail::write_file(detail::replace_extension(json_path, ".csv"), csv.str());
  detail::write_traces(r.full, detail::replace_extension(json_path, "") + "_full.json");
  detail::write_traces(r.ablated, detail::replace_extension(json_path, "") + "_ablated.json");
}

}  // namespace ura
