#pragma once

#include <cstdint>
#include <limits>
#include <vector>

#include "ura/cma.hpp"
#include "ura/kendall.hpp"
#include "ura/problems.hpp"
#include "ura/rng.hpp"

namespace ura {

/// Warm-start policy. `full` keeps a pool of configurations scored by recent
/// usefulness; the single_config variants keep exactly one entry, with
/// `single_config_refresh` additionally discarding it after every call.
enum class WarmStartMode { full, single_config, single_config_refresh };

/// One reusable lower-level configuration: a feasible response y, the solver
/// distribution it came from, and a usefulness score in (0, 1].
struct CacheEntry {
  Eigen::VectorXd y;
  SearchDistribution omega;
  double score = 1.0;
};

struct UraParams {
  int lambda_y = 0;         // lower-level population size
  int n_omega = 0;          // cache size
  double tau_threshold = 0.7;
  double p_threshold = 0.1;
  double p_plus = 0.4;
  double p_minus = 0.05;
  int c_max = 1;            // accepted improvements per round
  long t_min = 10;          // iterations before the std floor may fire
  double v_min_y = 1e-4;
  double cond_max_y = 1e7;
  int max_rounds = 50;
  int no_improve_rounds = 20;   // per-candidate stall window (rounds)
  double improve_tol = 1e-6;
  bool early_stopping = true;
  WarmStartMode warm_start_mode = WarmStartMode::full;

  /// Default parameterization: lambda_y from the lower dimension, cache size
  /// three upper populations.
  static UraParams defaults(int dx, int dy) {
    UraParams p;
    p.lambda_y = population_size(dy);
    p.n_omega = 3 * population_size(dx);
    return p;
  }

  void validate() const {
    if (lambda_y < 2) throw ConfigError("UraParams: lambda_y must be >= 2");
    if (n_omega < 1) throw ConfigError("UraParams: n_omega must be >= 1");
    if (!(tau_threshold > -1.0 && tau_threshold <= 1.0))
      throw ConfigError("UraParams: tau_threshold must be in (-1, 1]");
    if (!(p_threshold > 0.0 && p_threshold <= 1.0))
      throw ConfigError("UraParams: p_threshold must be in (0, 1]");
    if (!(p_plus > 0.0 && p_plus <= 1.0)) throw ConfigError("UraParams: p_plus must be in (0, 1]");
    if (!(p_minus > 0.0 && p_minus < 1.0)) throw ConfigError("UraParams: p_minus must be in (0, 1)");
    if (c_max < 1) throw ConfigError("UraParams: c_max must be >= 1");
    if (t_min < 0) throw ConfigError("UraParams: t_min must be >= 0");
    if (!(v_min_y > 0.0)) throw ConfigError("UraParams: v_min_y must be positive");
    if (!(cond_max_y >= 1.0)) throw ConfigError("UraParams: cond_max_y must be >= 1");
    if (max_rounds < 1) throw ConfigError("UraParams: max_rounds must be >= 1");
    if (no_improve_rounds < 1) throw ConfigError("UraParams: no_improve_rounds must be >= 1");
    if (improve_tol < 0.0) throw ConfigError("UraParams: improve_tol must be >= 0");
    if (warm_start_mode != WarmStartMode::full && n_omega != 1)
      throw ConfigError("UraParams: single-configuration modes require n_omega == 1");
  }
};

/// Fresh cache: every entry drawn independently from the box-seeded initial
/// distribution over the lower box, response at the entry's mean, score 1.
template <class R>
std::vector<CacheEntry> make_cache(const BilevelProblem& problem, const UraParams& params,
                                   R& rng) {
  std::vector<CacheEntry> cache;
  cache.reserve(params.n_omega);
  for (int k = 0; k < params.n_omega; ++k) {
    CacheEntry e;
    e.omega = init_distribution(problem.lower_y, problem.upper_y, rng);
    e.y = e.omega.mean;
    e.score = 1.0;
    cache.push_back(std::move(e));
  }
  return cache;
}

/// Per-candidate lower-level solver state within one upper generation.
struct LowerSolverState {
  Eigen::VectorXd y_hat;   // incumbent response (feasible)
  double f_y = 0.0;        // f(x, y_hat), kept current at all times
  SearchDistribution dist;
  bool h = false;          // set when a round hit the std floor or a reset
  int cache_index = -1;    // which entry seeded this solver
};

/// Seeds one solver per candidate from the cache: scans f(x_i, y_k) over all
/// entries (lambda_x * n_omega lower FEs), picks the minimizing entry (ties:
/// lowest k), copies its distribution with evolution paths and iteration
/// count zeroed, and adopts its response as incumbent without re-evaluating.
inline std::vector<LowerSolverState> warm_start(const BilevelProblem& problem, FeMeter& meter,
                                                const std::vector<CacheEntry>& cache,
                                                const std::vector<Eigen::VectorXd>& x_batch,
                                                const UraParams& params) {
  if (x_batch.size() < 2) throw ConfigError("warm_start: need at least two candidates");
  if (static_cast<int>(cache.size()) != params.n_omega)
    throw ConfigError("warm_start: cache size does not match n_omega");
  std::vector<LowerSolverState> states;
  states.reserve(x_batch.size());
  for (const auto& x : x_batch) {
    int best_k = 0;
    double best_f = std::numeric_limits<double>::infinity();
    for (int k = 0; k < params.n_omega; ++k) {
      const double fk = eval_lower(problem, meter, x, cache[k].y);
      if (fk < best_f) {
        best_f = fk;
        best_k = k;
      }
    }
    LowerSolverState st;
    st.y_hat = cache[best_k].y;
    st.f_y = best_f;
    st.dist = cache[best_k].omega;
    st.dist.path_sigma.setZero();
    st.dist.path_cov.setZero();
    st.dist.iteration = 0;
    st.h = false;
    st.cache_index = best_k;
    states.push_back(std::move(st));
  }
  return states;
}

/// Scales the covariance so no effective coordinate std stays below v_min:
/// Sigma <- D Sigma D with D_ii = max(1, v_min / (step_size * sqrt(Sigma_ii))).
/// Correlations are untouched; already-large coordinates are untouched.
inline Eigen::MatrixXd covariance_floor(const Eigen::MatrixXd& cov, double step_size,
                                        double v_min) {
  Eigen::VectorXd d(cov.rows());
  for (int i = 0; i < cov.rows(); ++i)
    d[i] = std::max(1.0, v_min / (step_size * std::sqrt(cov(i, i))));
  Eigen::MatrixXd out(cov.rows(), cov.cols());
  for (int i = 0; i < cov.rows(); ++i)
    for (int j = 0; j < cov.cols(); ++j) out(i, j) = cov(i, j) * d[i] * d[j];
  return out;
}

/// One lower-level round for one candidate: inner iterations run until c_max
/// sampled batches have produced an accepted (<= incumbent) point or a
/// safeguard fires. Each iteration samples lambda_y points, evaluates at
/// their mirrored images, accepts the batch minimum if it does not worsen the
/// incumbent, updates the distribution with the raw samples, then applies the
/// std floor (only once t_min iterations have accrued this generation) and
/// the conditioning reset to the round-entry covariance. Returns the number
/// of inner iterations (lambda_y lower FEs each). `reserve` withholds that
/// many FEs of budget headroom for the caller's follow-up batch, so the
/// overall run never overshoots the budget by more than one sampling batch.
template <class R>
long lower_round(const BilevelProblem& problem, FeMeter& meter, const Eigen::VectorXd& x,
                 LowerSolverState& state, const UraParams& params, R& rng,
                 long long reserve = 0) {
  const Eigen::MatrixXd cov_entry = state.dist.cov;
  const CmaParams cp = CmaParams::standard(state.dist.dim(), params.lambda_y);
  int c = 0;
  long iters = 0;
  state.h = false;
  while (c < params.c_max && !state.h) {
    if (meter.exhausted() || meter.total() + reserve > meter.budget) break;
    const long t_before = state.dist.iteration;
    auto samples = sample_population(state.dist, params.lambda_y, rng);
    std::vector<double> values(samples.size());
    int k_min = 0;
    for (std::size_t k = 0; k < samples.size(); ++k) {
      values[k] = eval_lower(problem, meter, x, samples[k]);
      if (values[k] < values[k_min]) k_min = static_cast<int>(k);
    }
    if (values[k_min] <= state.f_y) {
      state.f_y = values[k_min];
      state.y_hat = mirror(samples[k_min], problem.lower_y, problem.upper_y);
      ++c;
    }
    state.dist = update_distribution(state.dist, rank_by_value(std::move(samples), std::move(values)), cp);
    if (max_coord_std(state.dist.cov, state.dist.step_size) < params.v_min_y &&
        t_before >= params.t_min) {
      state.dist.cov = covariance_floor(state.dist.cov, state.dist.step_size, params.v_min_y);
      state.h = true;
    }
    if (condition_number(state.dist.cov) > params.cond_max_y) {
      state.dist.cov = cov_entry;
      state.h = true;
    }
    ++iters;
  }
  return iters;
}

struct UraDiagnostics {
  int rounds = 0;                 // rounds that recomputed the upper ranking
  long long inner_iterations = 0; // summed over candidates and rounds
  std::vector<double> taus;       // rank correlation after each round
  bool degenerate_tau = false;    // some round's ranking was entirely tied
  bool budget_exhausted = false;
  int refreshed_entries = 0;
  bool all_candidates_stalled = false;
};

/// Cache post-processing: each selected entry is overwritten by its
/// best-ranked selector (lowest upper estimate; ties keep the earlier
/// candidate) and rewarded; unselected entries decay; entries that fall
/// below the score threshold are re-drawn. The single_config_refresh mode
/// re-draws its lone entry unconditionally.
template <class R>
void post_process(std::vector<CacheEntry>& cache, const std::vector<LowerSolverState>& states,
                  const std::vector<double>& phi, const BilevelProblem& problem,
                  const UraParams& params, R& rng, int* refreshed_out = nullptr) {
  std::vector<int> winner(cache.size(), -1);
  for (std::size_t i = 0; i < states.size(); ++i) {
    const int k = states[i].cache_index;
    if (winner[k] < 0 || phi[i] < phi[winner[k]]) winner[k] = static_cast<int>(i);
  }
  for (std::size_t k = 0; k < cache.size(); ++k) {
    if (winner[k] >= 0) {
      cache[k].y = states[winner[k]].y_hat;
      cache[k].omega = states[winner[k]].dist;
      cache[k].score = std::min(cache[k].score + params.p_plus, 1.0);
    } else {
      cache[k].score -= params.p_minus;
    }
  }
  int refreshed = 0;
  auto refresh = [&](CacheEntry& e) {
    e.omega = init_distribution(problem.lower_y, problem.upper_y, rng);
    e.y = e.omega.mean;
    e.score = 1.0;
    ++refreshed;
  };
  // The 1e-12 guard keeps iterated binary64 score decrements from refreshing
  // an entry whose exact score only just reached the threshold.
  for (auto& e : cache)
    if (e.score < params.p_threshold - 1e-12) refresh(e);
  if (params.warm_start_mode == WarmStartMode::single_config_refresh) refresh(cache[0]);
  if (refreshed_out) *refreshed_out = refreshed;
}

/// Estimates the upper objective for a whole candidate batch by running
/// warm-started, early-stopped lower-level solves. Rounds of per-candidate
/// improvement continue until the batch ranking stabilizes (rank correlation
/// with the previous round above tau_threshold, when early stopping is on),
/// the round cap is hit, every candidate has stalled, or the budget runs
/// out; the cache is post-processed before returning. The returned vector
/// holds the final upper estimates F(x_i, y_hat_i), index-aligned with
/// x_batch.
template <class R>
std::vector<double> ura_evaluate(const BilevelProblem& problem, FeMeter& meter,
                                 std::vector<CacheEntry>& cache,
                                 const std::vector<Eigen::VectorXd>& x_batch,
                                 const UraParams& params, R& rng,
                                 UraDiagnostics* diag_out = nullptr,
                                 std::vector<LowerSolverState>* states_out = nullptr) {
  params.validate();
  const std::size_t lambda_x = x_batch.size();
  UraDiagnostics diag;

  auto states = warm_start(problem, meter, cache, x_batch, params);
  std::vector<double> phi(lambda_x);
  for (std::size_t i = 0; i < lambda_x; ++i)
    phi[i] = eval_upper(problem, meter, x_batch[i], states[i].y_hat);

  // Every candidate draws from its own keyed substream, so per-candidate
  // work is order-independent and the trajectory stays seed-deterministic.
  const std::uint64_t nonce = rng.next_u64();
  std::vector<Rng> streams;
  streams.reserve(lambda_x);
  for (std::size_t i = 0; i < lambda_x; ++i) streams.push_back(rng.substream(nonce, i));

  std::vector<int> stale(lambda_x, 0);
  std::vector<char> stalled(lambda_x, 0);
  std::vector<double> last_f(lambda_x);
  for (std::size_t i = 0; i < lambda_x; ++i) last_f[i] = states[i].f_y;

  std::vector<double> phi_next(lambda_x);
  const long long lambda_x_ll = static_cast<long long>(lambda_x);
  bool out_of_budget = false;
  for (int rd = 1; rd <= params.max_rounds; ++rd) {
    // Reserve headroom for this round's upper batch.
    if (meter.total() + lambda_x_ll > meter.budget) {
      out_of_budget = true;
      break;
    }
    bool any_active = false;
    for (std::size_t i = 0; i < lambda_x; ++i) any_active |= !stalled[i];
    if (!any_active) {
      diag.all_candidates_stalled = true;
      break;
    }
    for (std::size_t i = 0; i < lambda_x; ++i) {
      if (stalled[i]) continue;
      diag.inner_iterations += lower_round(problem, meter, x_batch[i], states[i], params,
                                           streams[i], lambda_x_ll + params.lambda_y);
      const double improvement = last_f[i] - states[i].f_y;
      last_f[i] = states[i].f_y;
      if (improvement < params.improve_tol) {
        if (++stale[i] >= params.no_improve_rounds) stalled[i] = 1;
      } else {
        stale[i] = 0;
      }
    }
    for (std::size_t i = 0; i < lambda_x; ++i)
      phi_next[i] = eval_upper(problem, meter, x_batch[i], states[i].y_hat);
    ++diag.rounds;
    const KendallResult kt = kendall_tau(phi, phi_next);
    diag.taus.push_back(kt.tau);
    diag.degenerate_tau |= kt.degenerate;
    phi = phi_next;
    if (params.early_stopping && kt.tau > params.tau_threshold) break;
  }

  post_process(cache, states, phi, problem, params, rng, &diag.refreshed_entries);
  diag.budget_exhausted = out_of_budget || meter.exhausted();
  if (diag_out) *diag_out = diag;
  if (states_out) *states_out = std::move(states);
  return phi;
}

}  // namespace ura
