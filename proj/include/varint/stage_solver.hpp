#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>

#include <Eigen/Dense>

#include "varint/errors.hpp"

namespace varint {

enum class SolverKind { fixed_point, newton };

template <typename Scalar>
struct SolverOptions {
  Scalar tol = Scalar(1e-12);  // absolute max-norm of the residual
  int max_iter = 100;
  SolverKind kind = SolverKind::fixed_point;

  void validate() const {
    if (!(tol > Scalar(0))) throw ConfigError("solver tolerance must be positive");
    if (max_iter < 1) throw ConfigError("solver max_iter must be positive");
  }
};

template <typename Scalar>
struct SolveStats {
  int iterations = 0;
  Scalar residual = Scalar(0);
  bool used_newton = false;
};

/// Solves residual(x) = 0 in place.
///
/// Fixed-point mode iterates x <- x - precondition(residual(x)); when a
/// sweep reduces the residual by less than 10 % the remaining iterations
/// switch to Newton with a forward-difference Jacobian. Convergence means
/// |residual|_inf <= max(tol, 16 eps residual_scale), where the second term
/// is the rounding floor of the residual evaluation. After convergence,
/// fixed-point sweeps continue while they still reduce the residual (within
/// max_iter); a sweep that does not is discarded.
template <typename Scalar>
SolveStats<Scalar> solve_stage_system(
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& x,
    const std::function<Eigen::Matrix<Scalar, Eigen::Dynamic, 1>(
        const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>&)>& residual,
    const std::function<Eigen::Matrix<Scalar, Eigen::Dynamic, 1>(
        const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>&)>& precondition,
    const SolverOptions<Scalar>& options, Scalar residual_scale) {
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  const Scalar eps = std::numeric_limits<Scalar>::epsilon();
  const Scalar tol = std::max(options.tol, Scalar(16) * eps * residual_scale);

  SolveStats<Scalar> stats;
  bool newton = options.kind == SolverKind::newton;
  stats.used_newton = newton;

  auto checked_residual = [&](const Vector& at) {
    Vector r = residual(at);
    if (!r.allFinite()) {
      throw DivergenceError("stage solver: non-finite residual after " +
                            std::to_string(stats.iterations) + " iterations");
    }
    return r;
  };

  Vector r = checked_residual(x);
  Scalar norm = r.template lpNorm<Eigen::Infinity>();
  while (norm > tol) {
    if (stats.iterations >= options.max_iter) {
      throw ConvergenceError("stage solver: no convergence in " +
                                 std::to_string(options.max_iter) +
                                 " iterations, residual " + std::to_string(static_cast<double>(norm)),
                             static_cast<double>(norm), stats.iterations);
    }
    ++stats.iterations;
    if (newton) {
      const Eigen::Index n = x.size();
      Matrix jacobian(n, n);
      for (Eigen::Index j = 0; j < n; ++j) {
        const Scalar step = std::sqrt(eps) * std::max(Scalar(1), std::abs(x[j]));
        Vector shifted = x;
        shifted[j] += step;
        jacobian.col(j) = (checked_residual(shifted) - r) / step;
      }
      Eigen::PartialPivLU<Matrix> lu(jacobian);
      x -= lu.solve(r);
      if (!x.allFinite()) throw DivergenceError("stage solver: singular Newton Jacobian");
      r = checked_residual(x);
      norm = r.template lpNorm<Eigen::Infinity>();
    } else {
      x -= precondition(r);
      Vector next = checked_residual(x);
      const Scalar next_norm = next.template lpNorm<Eigen::Infinity>();
      if (next_norm > Scalar(0.9) * norm && next_norm > tol) {
        newton = true;
        stats.used_newton = true;
      }
      r = std::move(next);
      norm = next_norm;
    }
  }
  while (!newton && norm > Scalar(0) && stats.iterations < options.max_iter) {
    const Vector next_x = x - precondition(r);
    Vector next = checked_residual(next_x);
    const Scalar next_norm = next.template lpNorm<Eigen::Infinity>();
    if (!(next_norm < norm)) break;
    ++stats.iterations;
    x = next_x;
    r = std::move(next);
    norm = next_norm;
  }
  stats.residual = norm;
  return stats;
}

}  // namespace varint
