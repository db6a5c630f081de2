// Acceptance gate: every release criterion runs here at desk scale and prints
// one PASS/FAIL line. Slow full-dimension calibration checks are gated behind
// URA_ACCEPT_LONG=1 and report SKIPPED otherwise.
#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <string>
#include <vector>

#include "ura/harness.hpp"
#include "ura/smd.hpp"
#include "ura/wra.hpp"

namespace {

void report(const std::string& name, bool ok) {
  std::printf("[ACCEPT] %-42s %s\n", name.c_str(), ok ? "PASS" : "FAIL");
  std::fflush(stdout);
}

void report_skipped(const std::string& name) {
  std::printf("[ACCEPT] %-42s SKIPPED (set URA_ACCEPT_LONG=1)\n", name.c_str());
  std::fflush(stdout);
}

ura::RunConfig desk_config(const std::string& suite, const std::string& label,
                           long long budget) {
  ura::RunConfig cfg;
  cfg.suite = suite;
  cfg.problem_label = label;
  cfg.budget = budget;
  cfg.seeds = 20;
  cfg.seed_base = 1;
  cfg.threads = 1;
  return cfg;
}

double wall_sum(const ura::SuiteResult& s) {
  double total = 0.0;
  for (const auto& t : s.trials) total += t.wall_seconds;
  return total;
}

// Shared suite runs: criteria that need the same full-method arm reuse one
// computation instead of re-running twenty trials.
const ura::AblationResult& synth_c1_ablation() {
  static const auto result = [] {
    const auto problem = ura::make_synthetic_quadratic(5, 5, 1.0);
    return ura::run_ablation(problem, desk_config("synthetic", problem.name, 1'000'000),
                             ura::AblationMode::early_stop_off);
  }();
  return result;
}

const ura::AblationResult& smd1_ablation() {
  static const auto result = [] {
    const auto problem = ura::make_smd(1, 5, 10);
    return ura::run_ablation(problem, desk_config("smd", problem.name, 2'000'000),
                             ura::AblationMode::early_stop_off);
  }();
  return result;
}

const ura::AblationResult& wra1_ablation() {
  static const auto result = [] {
    const auto problem = ura::make_wra(1, 5, 5);
    return ura::run_ablation(problem, desk_config("wra", problem.name, 1'000'000),
                             ura::AblationMode::single_config);
  }();
  return result;
}

bool trials_identical(const ura::TrialResult& a, const ura::TrialResult& b) {
  return a.seed == b.seed && a.best_F_gap == b.best_F_gap && a.best_f_gap == b.best_f_gap &&
         a.upper_fes == b.upper_fes && a.lower_fes == b.lower_fes && a.restarts == b.restarts &&
         a.generations == b.generations && a.converged == b.converged &&
         a.stop_reason == b.stop_reason;
}

// Brute-force tau-b used by the property criterion; mirrors the library's
// final arithmetic (including the clamp) so exact comparison is valid.
double brute_force_tau(const std::vector<double>& a, const std::vector<double>& b,
                       bool& degenerate) {
  const std::size_t n = a.size();
  std::int64_t concordant = 0, discordant = 0, tied_a = 0, tied_b = 0, tied_both = 0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const bool ta = a[i] == a[j], tb = b[i] == b[j];
      if (ta && tb)
        ++tied_both;
      else if (ta)
        ++tied_a;
      else if (tb)
        ++tied_b;
      else if ((a[i] < a[j]) == (b[i] < b[j]))
        ++concordant;
      else
        ++discordant;
    }
  const std::int64_t n0 = static_cast<std::int64_t>(n) * (n - 1) / 2;
  const std::int64_t n1 = tied_a + tied_both;
  const std::int64_t n2 = tied_b + tied_both;
  if (n0 == n1 || n0 == n2) {
    degenerate = true;
    return 0.0;
  }
  degenerate = false;
  const double denom = std::sqrt(static_cast<double>(n0 - n1)) *
                       std::sqrt(static_cast<double>(n0 - n2));
  return std::clamp(static_cast<double>(concordant - discordant) / denom, -1.0, 1.0);
}

}  // namespace

TEST_CASE("acceptance: property suite", "[acceptance]") {
  bool ok = true;

  // Monotone-transform invariance of the ranking-based update: three strictly
  // increasing value transforms leave the updated distribution bitwise equal.
  {
    ura::Rng rng(0xACCE9701u);
    const auto params = ura::CmaParams::standard(4, 8);
    bool invariant = true;
    for (int trial = 0; trial < 50 && invariant; ++trial) {
      ura::SearchDistribution dist;
      dist.mean = Eigen::VectorXd::Zero(4);
      dist.cov = Eigen::MatrixXd::Identity(4, 4);
      dist.step_size = 0.5 + rng.uniform01();
      dist.path_sigma = Eigen::VectorXd::Zero(4);
      dist.path_cov = Eigen::VectorXd::Zero(4);
      dist.iteration = trial % 7;
      auto candidates = ura::sample_population(dist, 8, rng);
      std::vector<double> base(8);
      for (int i = 0; i < 8; ++i) {
        base[i] = candidates[i].squaredNorm();
        if (base[i] >= 500.0) invariant = false;  // keep exp() finite
      }
      if (!invariant) break;
      const auto reference = ura::update_distribution(
          dist, ura::rank_by_value(candidates, base), params);
      const std::vector<std::function<double(double)>> transforms{
          [](double v) { return std::exp(v); },
          [](double v) { return v * v * v + v; },
          [](double v) { return 10.0 * v - 7.0; }};
      for (const auto& t : transforms) {
        std::vector<double> mapped(8);
        for (int i = 0; i < 8; ++i) mapped[i] = t(base[i]);
        const auto updated = ura::update_distribution(
            dist, ura::rank_by_value(candidates, mapped), params);
        invariant = invariant && (updated.mean.array() == reference.mean.array()).all() &&
                    (updated.cov.array() == reference.cov.array()).all() &&
                    updated.step_size == reference.step_size &&
                    (updated.path_sigma.array() == reference.path_sigma.array()).all() &&
                    (updated.path_cov.array() == reference.path_cov.array()).all();
      }
    }
    report("property: monotone-invariant update", invariant);
    ok = ok && invariant;
  }

  // Mirror map: idempotent, periodic, feasible across 10 000 fuzzed points.
  {
    ura::Rng rng(0xACCE9702u);
    bool mirror_ok = true;
    for (int i = 0; i < 10'000 && mirror_ok; ++i) {
      const double lo = -5.0 + 4.0 * rng.uniform01();
      const double hi = lo + 0.5 + 9.0 * rng.uniform01();
      const double span = hi - lo;
      const double q = lo - 10.0 * span + 21.0 * span * rng.uniform01();
      const double m = ura::mirror_coord(q, lo, hi);
      mirror_ok = mirror_ok && m >= lo && m <= hi;
      mirror_ok = mirror_ok && ura::mirror_coord(m, lo, hi) == m;
      const int k = static_cast<int>(3.0 * rng.uniform01()) + 1;
      const double shifted = ura::mirror_coord(q + 2.0 * k * span, lo, hi);
      mirror_ok = mirror_ok && std::abs(shifted - m) < 1e-9;
    }
    report("property: mirror map (10k fuzz)", mirror_ok);
    ok = ok && mirror_ok;
  }

  // Rank correlation agrees exactly with brute-force pair counting.
  {
    ura::Rng rng(0xACCE9703u);
    bool kendall_ok = true;
    for (int trial = 0; trial < 1'000 && kendall_ok; ++trial) {
      const int n = 2 + static_cast<int>(28.0 * rng.uniform01());
      std::vector<double> a(n), b(n);
      const bool tie_a = rng.uniform01() < 0.5, tie_b = rng.uniform01() < 0.5;
      for (int i = 0; i < n; ++i) {
        a[i] = tie_a ? std::floor(5.0 * rng.uniform01()) : rng.normal();
        b[i] = tie_b ? std::floor(5.0 * rng.uniform01()) : rng.normal();
      }
      const auto fast = ura::kendall_tau(a, b);
      bool slow_degenerate = false;
      const double slow = brute_force_tau(a, b, slow_degenerate);
      kendall_ok = kendall_ok && fast.degenerate == slow_degenerate && fast.tau == slow;
    }
    report("property: rank correlation oracle (1k)", kendall_ok);
    ok = ok && kendall_ok;
  }

  // Cache-score dynamics: an entry that keeps losing decays 1.0 -> 0.05 in
  // nineteen generations and is refreshed exactly on the nineteenth.
  {
    const auto problem = ura::make_synthetic_quadratic(2, 2, 1.0);
    auto params = ura::UraParams::defaults(2, 2);
    params.n_omega = 2;
    ura::Rng rng(0xACCE9704u);
    auto cache = ura::make_cache(problem, params, rng);
    bool schedule_ok = true;
    int refresh_generation = -1;
    for (int gen = 1; gen <= 19 && schedule_ok; ++gen) {
      std::vector<ura::LowerSolverState> states(1);
      states[0].cache_index = 0;  // entry 1 never wins
      states[0].y_hat = cache[0].y;
      states[0].dist = cache[0].omega;
      states[0].f_y = 0.0;
      int refreshed = 0;
      ura::post_process(cache, states, {1.0}, problem, params, rng, &refreshed);
      if (refreshed > 0 && refresh_generation < 0) refresh_generation = gen;
      if (gen < 19) schedule_ok = schedule_ok && refreshed == 0;
    }
    schedule_ok = schedule_ok && refresh_generation == 19 &&
                  cache[1].score == 1.0;  // refreshed entries restart at full score
    report("property: 19-generation refresh schedule", schedule_ok);
    ok = ok && schedule_ok;
  }

  // Evaluation accounting is exact: lower = scan + inner*lambda_y,
  // upper = lambda_x * (1 + rounds).
  {
    const auto problem = ura::make_synthetic_quadratic(2, 2, 1.0);
    const auto params = ura::UraParams::defaults(2, 2);
    ura::Rng rng(0xACCE9705u);
    auto cache = ura::make_cache(problem, params, rng);
    ura::FeMeter meter;
    std::vector<Eigen::VectorXd> batch;
    for (int i = 0; i < 6; ++i)
      batch.push_back(Eigen::VectorXd::Constant(2, 0.3 * (i + 1)));
    ura::UraDiagnostics diag;
    ura::ura_evaluate(problem, meter, cache, batch, params, rng, &diag);
    const long long expect_lower =
        6LL * params.n_omega + diag.inner_iterations * params.lambda_y;
    const long long expect_upper = 6LL * (1 + diag.rounds);
    const bool fe_ok = meter.lower.load() == expect_lower && meter.upper.load() == expect_upper;
    report("property: evaluation accounting exact", fe_ok);
    ok = ok && fe_ok;
  }

  // Seed determinism: two identical trials are bitwise-equal reports.
  {
    const auto problem = ura::make_synthetic_quadratic(2, 2, 1.0);
    auto cfg = desk_config("synthetic", problem.name, 30'000);
    cfg.seeds = 1;
    const auto a = ura::run_trial(problem, cfg, 42);
    const auto b = ura::run_trial(problem, cfg, 42);
    const bool det_ok = trials_identical(a, b);
    report("property: seed determinism bitwise", det_ok);
    ok = ok && det_ok;
  }

  REQUIRE(ok);
}

TEST_CASE("acceptance: oracle convergence (synthetic family)", "[acceptance]") {
  const auto c0 = ura::run_suite(ura::make_synthetic_quadratic(5, 5, 0.0),
                                 desk_config("synthetic", "synthetic_c0", 1'000'000));
  const auto& c1 = synth_c1_ablation().full;

  const bool accuracy_ok = c0.aggregates.at("F_gap").median <= 1e-6 &&
                           c0.aggregates.at("f_gap").median <= 1e-3 &&
                           c1.aggregates.at("F_gap").median <= 1e-6 &&
                           c1.aggregates.at("f_gap").median <= 1e-3;
  const double wall = wall_sum(c0) + wall_sum(c1);
  const bool time_ok = wall < 300.0;
  INFO("c0 median F_gap " << c0.aggregates.at("F_gap").median << ", f_gap "
                          << c0.aggregates.at("f_gap").median);
  INFO("c1 median F_gap " << c1.aggregates.at("F_gap").median << ", f_gap "
                          << c1.aggregates.at("f_gap").median);
  INFO("wall " << wall << " s");
  report("oracle convergence (synthetic, c=0 and c=1)", accuracy_ok && time_ok);
  REQUIRE(accuracy_ok);
  REQUIRE(time_ok);
}

TEST_CASE("acceptance: SMD1 desk scale", "[acceptance]") {
  const auto& suite = smd1_ablation().full;
  INFO("median F_gap " << suite.aggregates.at("F_gap").median << ", successes "
                       << suite.successes << "/20");
  const bool ok = suite.aggregates.at("F_gap").median <= 1e-6;
  report("SMD1 (5+10) median gap at target", ok);
  REQUIRE(ok);
}

TEST_CASE("acceptance: WRA5 desk scale", "[acceptance]") {
  const auto suite = ura::run_suite(ura::make_wra(5, 5, 5),
                                    desk_config("wra", "wra5", 1'000'000));
  INFO("median F_gap " << suite.aggregates.at("F_gap").median << ", successes "
                       << suite.successes << "/20");
  const bool ok = suite.aggregates.at("F_gap").median <= 1e-6;
  report("WRA5 (5+5) median gap at target", ok);
  REQUIRE(ok);
}

TEST_CASE("acceptance: warm-start necessity", "[acceptance]") {
  const auto& paired = wra1_ablation();
  const auto& full = paired.full;
  const auto& single = paired.ablated;

  auto refresh_cfg = desk_config("wra", "wra1", 1'000'000);
  refresh_cfg.ablation = ura::AblationMode::single_config_refresh;
  const auto refresh = ura::run_suite(ura::make_wra(1, 5, 5), refresh_cfg);

  INFO("full successes " << full.successes << "/20, single-config "
                         << single.successes << "/20, refreshed "
                         << refresh.successes << "/20");
  const bool full_ok = full.successes >= 10;
  const bool single_ok = single.successes == 0;
  const bool refresh_ok = refresh.successes == 0;
  report("warm start necessary on WRA1", full_ok && single_ok && refresh_ok);
  REQUIRE(full_ok);
  REQUIRE(single_ok);
  REQUIRE(refresh_ok);
}

TEST_CASE("acceptance: early-stop speedup", "[acceptance]") {
  bool ok = true;
  for (const auto* paired : {&synth_c1_ablation(), &smd1_ablation()}) {
    const auto& full = paired->full;
    const auto& ablated = paired->ablated;
    const double full_median = full.aggregates.at("total_fes").median;
    const double ablated_median = ablated.aggregates.at("total_fes").median;
    INFO(full.problem << ": full median " << full_median << " FEs, ablated "
                      << ablated_median << " FEs");
    const bool median_ok = ablated_median >= 1.5 * full_median;
    bool per_seed_ok = true;
    for (std::size_t i = 0; i < full.trials.size(); ++i) {
      const auto full_total = full.trials[i].upper_fes + full.trials[i].lower_fes;
      const auto ablated_total = ablated.trials[i].upper_fes + ablated.trials[i].lower_fes;
      INFO("seed " << full.trials[i].seed << ": full " << full_total << ", ablated "
                   << ablated_total);
      per_seed_ok = per_seed_ok && ablated_total >= full_total;
    }
    ok = ok && median_ok && per_seed_ok;
  }
  report("early stopping saves evaluations", ok);
  REQUIRE(ok);
}

TEST_CASE("acceptance: expected-failure fidelity", "[acceptance]") {
  bool ok = true;
  // WRA4's difficulty is its 2^dy-sized optimal-response set, so it runs at
  // full dimension: at small dy the lower solver can commit to one of the few
  // twin-peak basins and legitimately reach the target.
  const std::vector<ura::BilevelProblem> hard{ura::make_smd(6, 5, 10),
                                              ura::make_wra(4, 20, 20)};
  for (const auto& problem : hard) {
    REQUIRE(problem.expected_failure);
    auto cfg = desk_config(problem.name.rfind("smd", 0) == 0 ? "smd" : "wra",
                           problem.name, 300'000);
    cfg.seeds = 5;
    const auto suite = ura::run_suite(problem, cfg);
    for (const auto& t : suite.trials) {
      const bool trial_ok = !t.converged && t.stop_reason == "budget";
      if (!trial_ok)
        std::printf("  %s seed %llu: stop=%s converged=%d gap=%.3e\n", problem.name.c_str(),
                    static_cast<unsigned long long>(t.seed), t.stop_reason.c_str(),
                    t.converged ? 1 : 0, t.best_F_gap);
      ok = ok && trial_ok;
    }
    ok = ok && suite.successes == 0;
  }
  report("hard problems fail cleanly within budget", ok);
  REQUIRE(ok);
}

TEST_CASE("acceptance: long-run FE calibration", "[acceptance]") {
  if (std::getenv("URA_ACCEPT_LONG") == nullptr) {
    report_skipped("long-run FE calibration (20+20)");
    SUCCEED("long-run block skipped");
    return;
  }
  auto smd_cfg = desk_config("smd", "smd1", 10'000'000);
  smd_cfg.seeds = 5;
  const auto smd = ura::run_suite(ura::make_smd(1, 20, 20), smd_cfg);
  const double smd_lower = smd.aggregates.at("lower_fes").median;
  INFO("SMD1 (20+20) median lower FEs " << smd_lower);
  const bool smd_ok = smd_lower >= 1.88e5 / 5.0 && smd_lower <= 1.88e5 * 5.0;

  auto wra_cfg = desk_config("wra", "wra5", 10'000'000);
  wra_cfg.seeds = 5;
  const auto wra = ura::run_suite(ura::make_wra(5, 20, 20), wra_cfg);
  const double wra_total = wra.aggregates.at("total_fes").median;
  INFO("WRA5 (20+20) median total FEs " << wra_total);
  const bool wra_ok = wra_total >= 1.97e5 / 5.0 && wra_total <= 1.97e5 * 5.0;

  report("long-run FE calibration (20+20)", smd_ok && wra_ok);
  REQUIRE(smd_ok);
  REQUIRE(wra_ok);
}
