#pragma once

#include <cmath>
#include <numbers>
#include <sstream>

#include "ura/problems.hpp"

namespace ura {

/// Min-max adapter suite, problems 1..11: the upper level minimizes g(x, y)
/// against an adversarial lower level, expressed as a two-level problem with
/// F = g and f = -g (bitwise). Interaction runs through an identity coupling
/// over the first min(dx, dy) coordinates; both boxes are [-3, 3]^d.
///
/// Characters: 1 bilinear; 2/3/7 contain the bilinear term (2 adds a
/// nonsmooth |x| term, 3 a convex x^2 term, 7 doubles the interaction), so
/// their optimal responses are box vertices keyed to sign(x); 4 has twin
/// per-coordinate response peaks near ±1.5 (shifted by the coupling) and
/// hence a 2^dy-point optimal-response set at the solution — single-response
/// solvers pick one peak per coordinate and misestimate the adversary's
/// value whenever it is the wrong one; 5/6/8 are strictly convex-concave
/// with varying curvature; 9 is multimodal in y; 10 is concave in both
/// levels; 11 is ill-conditioned (1e4 ellipsoid scaling on both levels).
inline BilevelProblem make_wra(int index, int dx, int dy) {
  if (index < 1 || index > 11) throw ConfigError("make_wra: index must be in 1..11");
  if (dx < 1 || dy < 1) throw ConfigError("make_wra: dimensions must be >= 1");
  const int m = std::min(dx, dy);

  BilevelProblem p;
  {
    std::ostringstream name;
    name << "wra" << index;
    p.name = name.str();
  }
  p.dx = dx;
  p.dy = dy;
  p.lower_x = Eigen::VectorXd::Constant(dx, -3.0);
  p.upper_x = Eigen::VectorXd::Constant(dx, 3.0);
  p.lower_y = Eigen::VectorXd::Constant(dy, -3.0);
  p.upper_y = Eigen::VectorXd::Constant(dy, 3.0);

  // Ellipsoid scalings for problem 11.
  Eigen::VectorXd ax = Eigen::VectorXd::Ones(dx), by = Eigen::VectorXd::Ones(dy);
  if (index == 11) {
    for (int j = 0; j < dx; ++j)
      ax[j] = dx > 1 ? std::pow(10.0, 4.0 * j / (dx - 1)) : 1.0;
    for (int k = 0; k < dy; ++k)
      by[k] = dy > 1 ? std::pow(10.0, 4.0 * k / (dy - 1)) : 1.0;
  }

  auto g = [=](const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
    double inter = 0.0;
    for (int i = 0; i < m; ++i) inter += x[i] * y[i];
    switch (index) {
      case 1:
        return inter;
      case 2:
        return x.cwiseAbs().sum() + inter;
      case 3:
        return x.squaredNorm() + inter;
      case 4: {
        double peaks = 0.0;
        for (int k = 0; k < dy; ++k) peaks += 3.0 * std::abs(y[k]) - y[k] * y[k];
        return x.squaredNorm() + inter + peaks;
      }
      case 5:
        return x.squaredNorm() + inter - y.squaredNorm();
      case 6:
        return x.squaredNorm() + 2.0 * inter - y.squaredNorm();
      case 7:
        return x.squaredNorm() + 2.0 * inter;
      case 8:
        return 0.5 * x.squaredNorm() + inter - 2.0 * y.squaredNorm();
      case 9: {
        double wells = 0.0;
        for (int k = 0; k < dy; ++k)
          wells += 0.5 * (std::cos(2.0 * std::numbers::pi * y[k]) - 1.0);
        return x.squaredNorm() + inter - y.squaredNorm() + wells;
      }
      case 10:
        return -x.squaredNorm() + inter - y.squaredNorm();
      default: {  // 11
        double quad = 0.0;
        for (int j = 0; j < dx; ++j) quad += ax[j] * x[j] * x[j];
        for (int k = 0; k < dy; ++k) quad -= by[k] * y[k] * y[k];
        return quad + inter;
      }
    }
  };

  p.upper = g;
  p.lower = [g](const Eigen::VectorXd& x, const Eigen::VectorXd& y) { return -g(x, y); };

  p.has_optimum = true;
  p.x_star = Eigen::VectorXd::Zero(dx);
  p.y_star = Eigen::VectorXd::Zero(dy);
  p.upper_star = 0.0;
  switch (index) {
    case 4:
      // At x* = 0 the per-coordinate response max(x y + 3|y| - y^2) is
      // attained at y = +-1.5, any sign combination; record one of them.
      p.y_star.setConstant(1.5);
      p.upper_star = 2.25 * dy;
      p.expected_failure = true;
      break;
    case 10:
      p.x_star.setConstant(3.0);
      for (int i = 0; i < m; ++i) p.y_star[i] = 1.5;
      p.upper_star = -6.75 * m - 9.0 * (dx - m);
      break;
    default:
      break;
  }
  p.lower_star = -p.upper_star;
  return p;
}

}  // namespace ura
