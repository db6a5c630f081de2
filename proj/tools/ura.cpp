// Command-line benchmark runner for the bilevel optimizer.
//
// Exit codes: 0 success, 2 configuration error, 3 numerical/evaluation error.

#include <cstdio>
#include <exception>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "ura/harness.hpp"
#include "ura/smd.hpp"
#include "ura/wra.hpp"

namespace {

ura::BilevelProblem build_problem(const std::string& suite, int index, int dx, int dy,
                                  double conflict) {
  if (suite == "smd") return ura::make_smd(index, dx, dy);
  if (suite == "wra") return ura::make_wra(index, dx, dy);
  if (suite == "synthetic") return ura::make_synthetic_quadratic(dx, dy, conflict);
  throw ura::ConfigError("unknown suite: " + suite);
}

ura::AblationMode parse_ablation(const std::string& name) {
  if (name == "none") return ura::AblationMode::none;
  if (name == "early-stop") return ura::AblationMode::early_stop_off;
  if (name == "warm-start") return ura::AblationMode::single_config;
  if (name == "warm-start-refresh") return ura::AblationMode::single_config_refresh;
  throw ura::ConfigError("unknown ablation: " + name);
}

void print_summary(const ura::SuiteResult& s) {
  const auto& f = s.aggregates.at("F_gap");
  const auto& t = s.aggregates.at("total_fes");
  std::printf("%-24s median F gap %.3e (IQR %.3e)  median FEs %.3e  %d/%zu converged\n",
              s.problem.c_str(), f.median, f.iqr, t.median, s.successes, s.trials.size());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ura: nested evolution strategy for black-box bilevel optimization"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "run a benchmark problem over repeated seeded trials");
  std::string suite;
  int problem_index = 1;
  int dx = 5;
  int dy = 5;
  double conflict = 1.0;
  std::string ablate = "none";
  std::string out_path = "ura_results.json";
  ura::RunConfig cfg;

  run->add_option("--suite", suite, "problem family: smd, wra, or synthetic")->required();
  run->add_option("--problem", problem_index, "problem index within the family (smd 1-8, wra 1-11)");
  run->add_option("--dx", dx, "upper-level dimension");
  run->add_option("--dy", dy, "lower-level dimension");
  run->add_option("--conflict", conflict, "coupling coefficient for the synthetic problem");
  run->add_option("--seeds", cfg.seeds, "number of independent trials");
  run->add_option("--seed-base", cfg.seed_base, "seed of the first trial");
  run->add_option("--budget", cfg.budget, "total function-evaluation budget per trial");
  run->add_option("--target-gap", cfg.target_gap, "accuracy target (and report floor)");
  run->add_option("--ablate", ablate,
                  "ablation: none, early-stop, warm-start, or warm-start-refresh");
  run->add_option("--threads", cfg.threads, "worker threads (0: URA_THREADS env, then hardware)");
  run->add_option("--out", out_path, "output JSON path (CSV written alongside)");
  run->add_flag("--trace", cfg.trace, "write per-seed convergence traces");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    const ura::BilevelProblem problem = build_problem(suite, problem_index, dx, dy, conflict);
    cfg.suite = suite;
    cfg.problem_label = problem.name;
    const ura::AblationMode mode = parse_ablation(ablate);

    if (mode == ura::AblationMode::none) {
      cfg.ablation = ura::AblationMode::none;
      const ura::SuiteResult result = ura::run_suite(problem, cfg);
      ura::write_suite_report(result, out_path);
      print_summary(result);
    } else {
      const ura::AblationResult result = ura::run_ablation(problem, cfg, mode);
      ura::write_ablation_report(result, out_path);
      print_summary(result.full);
      print_summary(result.ablated);
      std::printf("ablation %s: full median FEs %.3e vs ablated %.3e\n",
                  ura::to_string(mode).c_str(), result.full.aggregates.at("total_fes").median,
                  result.ablated.aggregates.at("total_fes").median);
    }
    std::printf("wrote %s\n", out_path.c_str());
    return 0;
  } catch (const ura::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return 2;
  } catch (const ura::NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return 3;
  } catch (const ura::EvaluationError& e) {
    std::cerr << "evaluation error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
