#pragma once

#include <cmath>
#include <numbers>
#include <sstream>

#include "ura/problems.hpp"

namespace ura {

/// Variable split of the scalable two-level suite: the upper vector is
/// x = [a (p) | b (r)], the lower vector y = [c (q; q+s for problem 6) | e (r)].
/// The b/e blocks couple the levels, a and c live in one level each.
struct SmdSplit {
  int p = 0, q = 0, r = 0, s = 0;
};

/// r takes half the upper dimension, the coupled tail; problem 6 splits the
/// remaining lower coordinates q + s with an even s >= 2 (the pair block that
/// makes its lower level degenerate).
inline SmdSplit smd_split(int index, int dx, int dy) {
  if (dx < 2) throw ConfigError("make_smd: upper dimension must be >= 2");
  if (dx > dy)
    throw ConfigError("make_smd: the suite requires upper dimension <= lower dimension");
  SmdSplit sp;
  sp.r = dx / 2;
  sp.p = dx - sp.r;
  if (index == 6) {
    const int rem = dy - sp.r;
    int s = (rem / 2) & ~1;
    if (s < 2) s = 2;
    sp.s = s;
    sp.q = rem - s;
    if (sp.q < 1)
      throw ConfigError("make_smd: lower dimension too small for the problem-6 split");
  } else {
    sp.q = dy - sp.r;
    const int min_q = (index == 5 || index == 8) ? 2 : 1;
    if (sp.q < min_q)
      throw ConfigError("make_smd: lower dimension too small for this split");
  }
  return sp;
}

namespace detail {

inline double sqsum(const Eigen::VectorXd& v, int begin, int len) {
  double t = 0.0;
  for (int i = begin; i < begin + len; ++i) t += v[i] * v[i];
  return t;
}

// Sum of (c_{i+1} - c_i^2)^2 + (c_i - 1)^2 over a block of length len.
inline double rosenbrock(const Eigen::VectorXd& v, int begin, int len) {
  double t = 0.0;
  for (int i = begin; i < begin + len - 1; ++i) {
    const double gap = v[i + 1] - v[i] * v[i];
    const double off = v[i] - 1.0;
    t += gap * gap + off * off;
  }
  return t;
}

// Sum of c_i^2 - cos(2 pi c_i) over a block, plus len (Rastrigin form).
inline double rastrigin(const Eigen::VectorXd& v, int begin, int len) {
  double t = static_cast<double>(len);
  for (int i = begin; i < begin + len; ++i)
    t += v[i] * v[i] - std::cos(2.0 * std::numbers::pi * v[i]);
  return t;
}

}  // namespace detail

/// Scalable two-level test family, problems 1..8. Problems differ in the
/// coupling of the shared blocks (tan, log, |.|-log1p, polynomial), in
/// whether the levels cooperate or conflict on the lower-only block, and in
/// the upper/lower landscapes (sphere, Rastrigin, Rosenbrock, Griewank,
/// Ackley). All optima sit at F* = 0, f* = 0. Problem 6's lower level is
/// indifferent along its paired block, so its optimal-response set is a
/// continuum; upper-level methods relying on returned responses cannot pin
/// the upper objective there.
inline BilevelProblem make_smd(int index, int dx, int dy) {
  if (index < 1 || index > 8) throw ConfigError("make_smd: index must be in 1..8");
  if (dy < 1) throw ConfigError("make_smd: lower dimension must be >= 1");
  const SmdSplit sp = smd_split(index, dx, dy);
  const int p = sp.p, q = sp.q, r = sp.r, s = sp.s;
  const double eps = 1e-6;
  const double half_pi = std::numbers::pi / 2.0;

  BilevelProblem prob;
  {
    std::ostringstream name;
    name << "smd" << index;
    prob.name = name.str();
  }
  prob.dx = dx;
  prob.dy = dy;
  prob.lower_x = Eigen::VectorXd::Constant(dx, -5.0);
  prob.upper_x = Eigen::VectorXd::Constant(dx, 10.0);
  prob.lower_y = Eigen::VectorXd::Constant(dy, -5.0);
  prob.upper_y = Eigen::VectorXd::Constant(dy, 10.0);

  // Per-problem deviations from the default [-5, 10] boxes. Open tan/log
  // domains are closed by eps so every box point evaluates finite.
  switch (index) {
    case 1:
    case 3:
      prob.lower_y.tail(r).setConstant(-half_pi + eps);
      prob.upper_y.tail(r).setConstant(half_pi - eps);
      break;
    case 2:
    case 7:
      prob.upper_x.tail(r).setConstant(1.0);
      prob.lower_y.tail(r).setConstant(eps);
      prob.upper_y.tail(r).setConstant(std::numbers::e);
      break;
    case 4:
      prob.lower_x.tail(r).setConstant(-1.0);
      prob.upper_x.tail(r).setConstant(1.0);
      prob.lower_y.tail(r).setConstant(0.0);
      prob.upper_y.tail(r).setConstant(std::numbers::e);
      break;
    default:
      break;  // 5, 6, 8 keep the default boxes
  }

  auto F = [=](const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
    double F1 = 0.0, F2 = 0.0, F3 = 0.0;
    switch (index) {
      case 1: {
        F1 = detail::sqsum(x, 0, p);
        F2 = detail::sqsum(y, 0, q);
        F3 = detail::sqsum(x, p, r);
        for (int i = 0; i < r; ++i) {
          const double d = x[p + i] - std::tan(y[q + i]);
          F3 += d * d;
        }
        break;
      }
      case 2: {
        F1 = detail::sqsum(x, 0, p);
        F2 = -detail::sqsum(y, 0, q);
        F3 = detail::sqsum(x, p, r);
        for (int i = 0; i < r; ++i) {
          const double d = x[p + i] - std::log(y[q + i]);
          F3 -= d * d;
        }
        break;
      }
      case 3: {
        F1 = detail::sqsum(x, 0, p);
        F2 = detail::sqsum(y, 0, q);
        F3 = detail::sqsum(x, p, r);
        for (int i = 0; i < r; ++i) {
          const double d = x[p + i] * x[p + i] - std::tan(y[q + i]);
          F3 += d * d;
        }
        break;
      }
      case 4: {
        F1 = detail::sqsum(x, 0, p);
        F2 = -detail::sqsum(y, 0, q);
        F3 = detail::sqsum(x, p, r);
        for (int i = 0; i < r; ++i) {
          const double d = std::abs(x[p + i]) - std::log1p(y[q + i]);
          F3 -= d * d;
        }
        break;
      }
      case 5: {
        F1 = detail::sqsum(x, 0, p);
        F2 = -detail::rosenbrock(y, 0, q);
        F3 = detail::sqsum(x, p, r);
        for (int i = 0; i < r; ++i) {
          const double d = std::abs(x[p + i]) - y[q + i] * y[q + i];
          F3 -= d * d;
        }
        break;
      }
      case 6: {
        F1 = detail::sqsum(x, 0, p);
        F2 = -detail::sqsum(y, 0, q) + detail::sqsum(y, q, s);
        F3 = detail::sqsum(x, p, r);
        for (int i = 0; i < r; ++i) {
          const double d = x[p + i] - y[q + s + i];
          F3 -= d * d;
        }
        break;
      }
      case 7: {
        F1 = 1.0;
        for (int i = 0; i < p; ++i) F1 += x[i] * x[i] / 400.0;
        double prod = 1.0;
        for (int i = 0; i < p; ++i) prod *= std::cos(x[i] / std::sqrt(i + 1.0));
        F1 -= prod;
        F2 = -detail::sqsum(y, 0, q);
        F3 = detail::sqsum(x, p, r);
        for (int i = 0; i < r; ++i) {
          const double d = x[p + i] - std::log(y[q + i]);
          F3 -= d * d;
        }
        break;
      }
      case 8: {
        double mean_sq = 0.0, mean_cos = 0.0;
        for (int i = 0; i < p; ++i) {
          mean_sq += x[i] * x[i];
          mean_cos += std::cos(2.0 * std::numbers::pi * x[i]);
        }
        mean_sq /= p;
        mean_cos /= p;
        F1 = 20.0 + std::numbers::e - 20.0 * std::exp(-0.2 * std::sqrt(mean_sq)) -
             std::exp(mean_cos);
        F2 = -detail::rosenbrock(y, 0, q);
        F3 = detail::sqsum(x, p, r);
        for (int i = 0; i < r; ++i) {
          const double yc = y[q + i];
          const double d = x[p + i] - yc * yc * yc;
          F3 -= d * d;
        }
        break;
      }
    }
    return F1 + F2 + F3;
  };

  auto f = [=](const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
    double f1 = 0.0, f2 = 0.0, f3 = 0.0;
    switch (index) {
      case 1: {
        f1 = detail::sqsum(x, 0, p);
        f2 = detail::sqsum(y, 0, q);
        for (int i = 0; i < r; ++i) {
          const double d = x[p + i] - std::tan(y[q + i]);
          f3 += d * d;
        }
        break;
      }
      case 2: {
        f1 = detail::sqsum(x, 0, p);
        f2 = detail::sqsum(y, 0, q);
        for (int i = 0; i < r; ++i) {
          const double d = x[p + i] - std::log(y[q + i]);
          f3 += d * d;
        }
        break;
      }
      case 3: {
        f1 = detail::sqsum(x, 0, p);
        f2 = detail::rastrigin(y, 0, q);
        for (int i = 0; i < r; ++i) {
          const double d = x[p + i] * x[p + i] - std::tan(y[q + i]);
          f3 += d * d;
        }
        break;
      }
      case 4: {
        f1 = detail::sqsum(x, 0, p);
        f2 = detail::rastrigin(y, 0, q);
        for (int i = 0; i < r; ++i) {
          const double d = std::abs(x[p + i]) - std::log1p(y[q + i]);
          f3 += d * d;
        }
        break;
      }
      case 5: {
        f1 = detail::sqsum(x, 0, p);
        f2 = detail::rosenbrock(y, 0, q);
        for (int i = 0; i < r; ++i) {
          const double d = std::abs(x[p + i]) - y[q + i] * y[q + i];
          f3 += d * d;
        }
        break;
      }
      case 6: {
        f1 = detail::sqsum(x, 0, p);
        f2 = detail::sqsum(y, 0, q);
        for (int i = q; i + 1 < q + s; i += 2) {
          const double d = y[i + 1] - y[i];
          f2 += d * d;
        }
        for (int i = 0; i < r; ++i) {
          const double d = x[p + i] - y[q + s + i];
          f3 += d * d;
        }
        break;
      }
      case 7: {
        for (int i = 0; i < p; ++i) f1 += x[i] * x[i] * x[i];
        f2 = detail::sqsum(y, 0, q);
        for (int i = 0; i < r; ++i) {
          const double d = x[p + i] - std::log(y[q + i]);
          f3 += d * d;
        }
        break;
      }
      case 8: {
        for (int i = 0; i < p; ++i) f1 += x[i] * x[i] * x[i];
        f2 = detail::rosenbrock(y, 0, q);
        for (int i = 0; i < r; ++i) {
          const double yc = y[q + i];
          const double d = x[p + i] - yc * yc * yc;
          f3 += d * d;
        }
        break;
      }
    }
    return f1 + f2 + f3;
  };

  prob.upper = F;
  prob.lower = f;
  prob.has_optimum = true;
  prob.x_star = Eigen::VectorXd::Zero(dx);
  prob.y_star = Eigen::VectorXd::Zero(dy);
  switch (index) {
    case 2:
    case 7:
      prob.y_star.tail(r).setConstant(1.0);  // log(y) = 0
      break;
    case 5:
    case 8:
      prob.y_star.head(q).setConstant(1.0);  // Rosenbrock valley floor
      break;
    default:
      break;
  }
  prob.upper_star = 0.0;
  prob.lower_star = 0.0;
  prob.expected_failure = (index == 6);  // optimal-response continuum
  return prob;
}

}  // namespace ura
