#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <vector>

#include "ura/errors.hpp"

namespace ura {

/// Default population size for a d-dimensional search: floor(4 + 3 ln d).
inline int population_size(int dim) {
  if (dim < 1) throw ConfigError("population_size: dimension must be >= 1");
  return static_cast<int>(std::floor(4.0 + 3.0 * std::log(static_cast<double>(dim))));
}

/// Full state of one search distribution. A plain value: copying it yields an
/// independent solver state, which is what the warm-start cache relies on.
/// `iteration` counts completed updates and doubles as the t' counter that
/// gates the lower-level covariance floor.
struct SearchDistribution {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;         // shape matrix Sigma (SPD)
  double step_size = 1.0;      // sigma; effective sampling covariance is sigma^2 * Sigma
  Eigen::VectorXd path_sigma;  // step-size evolution path
  Eigen::VectorXd path_cov;    // covariance evolution path
  long iteration = 0;

  int dim() const { return static_cast<int>(mean.size()); }
};

/// A population together with the permutation that sorts it by objective
/// value (ascending, ties kept in sampling order). `order[r]` is the index of
/// the rank-r candidate.
struct RankedPopulation {
  std::vector<Eigen::VectorXd> candidates;
  std::vector<double> values;
  std::vector<int> order;
};

/// Ranks candidates by value with a stable sort, so equal values keep their
/// sampling order.
inline RankedPopulation rank_by_value(std::vector<Eigen::VectorXd> candidates,
                                      std::vector<double> values) {
  if (candidates.size() != values.size())
    throw ConfigError("rank_by_value: candidate/value count mismatch");
  RankedPopulation pop;
  pop.order.resize(candidates.size());
  std::iota(pop.order.begin(), pop.order.end(), 0);
  std::stable_sort(pop.order.begin(), pop.order.end(),
                   [&](int a, int b) { return values[a] < values[b]; });
  pop.candidates = std::move(candidates);
  pop.values = std::move(values);
  return pop;
}

/// Strategy constants of the standard (mu/mu_w, lambda) parameterization,
/// derived from dimension and population size alone.
struct CmaParams {
  int dim = 0;
  int lambda = 0;
  int mu = 0;
  Eigen::VectorXd weights;  // size mu, positive, sums to 1
  double mu_eff = 0;
  double c_sigma = 0, d_sigma = 0;
  double c_cov_path = 0;  // c_c
  double c_one = 0, c_mu = 0;
  double chi_n = 0;  // E||N(0, I)||

  static CmaParams standard(int dim, int lambda) {
    if (dim < 1) throw ConfigError("CmaParams: dimension must be >= 1");
    if (lambda < 2) throw ConfigError("CmaParams: population size must be >= 2");
    CmaParams p;
    p.dim = dim;
    p.lambda = lambda;
    p.mu = lambda / 2;
    p.weights.resize(p.mu);
    for (int i = 0; i < p.mu; ++i)
      p.weights[i] = std::log((lambda + 1) / 2.0) - std::log(i + 1.0);
    p.weights /= p.weights.sum();
    p.mu_eff = 1.0 / p.weights.squaredNorm();
    const double d = dim;
    p.c_sigma = (p.mu_eff + 2.0) / (d + p.mu_eff + 5.0);
    p.d_sigma = 1.0 + 2.0 * std::max(0.0, std::sqrt((p.mu_eff - 1.0) / (d + 1.0)) - 1.0) + p.c_sigma;
    p.c_cov_path = (4.0 + p.mu_eff / d) / (d + 4.0 + 2.0 * p.mu_eff / d);
    p.c_one = 2.0 / ((d + 1.3) * (d + 1.3) + p.mu_eff);
    p.c_mu = std::min(1.0 - p.c_one,
                      2.0 * (p.mu_eff - 2.0 + 1.0 / p.mu_eff) / ((d + 2.0) * (d + 2.0) + p.mu_eff));
    p.chi_n = std::sqrt(d) * (1.0 - 1.0 / (4.0 * d) + 1.0 / (21.0 * d * d));
    return p;
  }
};

/// Box-seeded initial distribution: the mean sits at a single uniform draw
/// shared across coordinates, mean_i = l_i + u01 * (u_i - l_i), and the shape
/// matrix is diag(((u - l) / 4)^2) with unit step size and zeroed paths.
template <class R>
SearchDistribution init_distribution(const Eigen::VectorXd& lower,
                                     const Eigen::VectorXd& upper, R& rng) {
  if (lower.size() != upper.size() || lower.size() == 0)
    throw ConfigError("init_distribution: bound vectors must have equal nonzero length");
  for (int i = 0; i < lower.size(); ++i) {
    if (!std::isfinite(lower[i]) || !std::isfinite(upper[i]))
      throw ConfigError("init_distribution: bounds must be finite");
    if (!(lower[i] < upper[i]))
      throw ConfigError("init_distribution: need lower < upper in every coordinate");
  }
  const double u01 = rng.uniform01();
  SearchDistribution d;
  d.mean = lower + u01 * (upper - lower);
  const Eigen::VectorXd quarter = (upper - lower) / 4.0;
  d.cov = quarter.array().square().matrix().asDiagonal();
  d.step_size = 1.0;
  d.path_sigma = Eigen::VectorXd::Zero(lower.size());
  d.path_cov = Eigen::VectorXd::Zero(lower.size());
  d.iteration = 0;
  return d;
}

namespace detail {

struct EigenBasis {
  Eigen::MatrixXd vectors;
  Eigen::VectorXd values;
};

inline EigenBasis decompose_spd(const Eigen::MatrixXd& cov, const char* who) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
  if (es.info() != Eigen::Success) {
    std::ostringstream msg;
    msg << who << ": eigendecomposition failed for " << cov.rows() << "x"
        << cov.cols() << " covariance";
    throw NumericalError(msg.str());
  }
  if (es.eigenvalues().minCoeff() <= 0.0) {
    std::ostringstream msg;
    msg << who << ": covariance not positive definite (min eigenvalue "
        << es.eigenvalues().minCoeff() << ", max " << es.eigenvalues().maxCoeff() << ")";
    throw NumericalError(msg.str());
  }
  return {es.eigenvectors(), es.eigenvalues()};
}

}  // namespace detail

/// Draws lambda candidates x = mean + sigma * B sqrt(D) z without mutating
/// the distribution. Normal deviates are consumed candidate-by-candidate in
/// coordinate order, so a fixed rng state fixes the draw bitwise.
template <class R>
std::vector<Eigen::VectorXd> sample_population(const SearchDistribution& dist,
                                               int lambda, R& rng) {
  if (lambda < 1) throw ConfigError("sample_population: lambda must be >= 1");
  const auto basis = detail::decompose_spd(dist.cov, "sample_population");
  const Eigen::VectorXd scale = basis.values.array().sqrt();
  std::vector<Eigen::VectorXd> out;
  out.reserve(lambda);
  Eigen::VectorXd z(dist.dim());
  for (int k = 0; k < lambda; ++k) {
    for (int i = 0; i < dist.dim(); ++i) z[i] = rng.normal();
    out.push_back(dist.mean + dist.step_size * (basis.vectors * scale.cwiseProduct(z)));
  }
  return out;
}

/// One rank-based update (CSA step size, rank-one + rank-mu covariance).
/// Consumes only the ranking, never raw objective values, so any strictly
/// increasing transform of the objective leaves the result bitwise identical.
/// All recombination sums run in rank order, making the update invariant to
/// the order candidates were presented in.
inline SearchDistribution update_distribution(const SearchDistribution& dist,
                                              const RankedPopulation& pop,
                                              const CmaParams& p) {
  const int d = dist.dim();
  if (p.dim != d) throw ConfigError("update_distribution: parameter/distribution dimension mismatch");
  if (dist.path_sigma.size() != d || dist.path_cov.size() != d)
    throw ConfigError("update_distribution: evolution paths must match the distribution dimension");
  if (static_cast<int>(pop.candidates.size()) != p.lambda ||
      pop.order.size() != pop.candidates.size())
    throw ConfigError("update_distribution: population size does not match parameters");
  for (const auto& c : pop.candidates)
    if (!c.allFinite())
      throw NumericalError("update_distribution: non-finite candidate coordinates");

  // Recombination in rank order.
  Eigen::VectorXd new_mean = Eigen::VectorXd::Zero(d);
  for (int i = 0; i < p.mu; ++i) new_mean += p.weights[i] * pop.candidates[pop.order[i]];

  const Eigen::VectorXd shift = (new_mean - dist.mean) / dist.step_size;

  const auto basis = detail::decompose_spd(dist.cov, "update_distribution");
  const Eigen::VectorXd inv_scale = basis.values.array().rsqrt();
  // C^(-1/2) * shift via the eigenbasis.
  const Eigen::VectorXd whitened =
      basis.vectors * inv_scale.cwiseProduct(basis.vectors.transpose() * shift);

  SearchDistribution next = dist;
  next.mean = new_mean;
  next.path_sigma = (1.0 - p.c_sigma) * dist.path_sigma +
                    std::sqrt(p.c_sigma * (2.0 - p.c_sigma) * p.mu_eff) * whitened;

  const double t = static_cast<double>(dist.iteration);
  const double ps_norm = next.path_sigma.norm();
  const double debias = std::sqrt(1.0 - std::pow(1.0 - p.c_sigma, 2.0 * (t + 1.0)));
  const bool hsig = ps_norm / debias < (1.4 + 2.0 / (d + 1.0)) * p.chi_n;

  next.path_cov = (1.0 - p.c_cov_path) * dist.path_cov;
  if (hsig)
    next.path_cov += std::sqrt(p.c_cov_path * (2.0 - p.c_cov_path) * p.mu_eff) * shift;

  Eigen::MatrixXd rank_mu = Eigen::MatrixXd::Zero(d, d);
  for (int i = 0; i < p.mu; ++i) {
    const Eigen::VectorXd y = (pop.candidates[pop.order[i]] - dist.mean) / dist.step_size;
    rank_mu += p.weights[i] * (y * y.transpose());
  }
  const double hsig_correction = hsig ? 0.0 : p.c_cov_path * (2.0 - p.c_cov_path);
  Eigen::MatrixXd new_cov =
      (1.0 - p.c_one - p.c_mu) * dist.cov +
      p.c_one * (next.path_cov * next.path_cov.transpose() + hsig_correction * dist.cov) +
      p.c_mu * rank_mu;
  next.cov = 0.5 * (new_cov + new_cov.transpose());

  next.step_size = dist.step_size * std::exp((p.c_sigma / p.d_sigma) * (ps_norm / p.chi_n - 1.0));
  next.iteration = dist.iteration + 1;
  return next;
}

/// Convenience overload deriving the standard parameters from the sizes.
inline SearchDistribution update_distribution(const SearchDistribution& dist,
                                              const RankedPopulation& pop) {
  return update_distribution(
      dist, pop, CmaParams::standard(dist.dim(), static_cast<int>(pop.candidates.size())));
}

/// Largest effective per-coordinate standard deviation,
/// step_size * sqrt(max diagonal element).
inline double max_coord_std(const Eigen::MatrixXd& cov, double step_size = 1.0) {
  const double max_diag = cov.diagonal().maxCoeff();
  if (cov.diagonal().minCoeff() < 0.0) {
    std::ostringstream msg;
    msg << "max_coord_std: negative diagonal element " << cov.diagonal().minCoeff();
    throw NumericalError(msg.str());
  }
  return step_size * std::sqrt(max_diag);
}

/// Ratio of extreme eigenvalues. Raises NumericalError if the matrix is not
/// positive definite.
inline double condition_number(const Eigen::MatrixXd& cov) {
  const auto basis = detail::decompose_spd(cov, "condition_number");
  return basis.values.maxCoeff() / basis.values.minCoeff();
}

enum class Termination { none, std_floor, ill_conditioned };

/// Stopping test for a search distribution: the std floor is checked on the
/// effective sampling covariance step_size^2 * Sigma, conditioning on Sigma
/// alone. When both fire, std_floor wins.
inline Termination check_termination(const SearchDistribution& dist, double v_min,
                                     double cond_max) {
  if (max_coord_std(dist.cov, dist.step_size) < v_min) return Termination::std_floor;
  if (condition_number(dist.cov) > cond_max) return Termination::ill_conditioned;
  return Termination::none;
}

}  // namespace ura
