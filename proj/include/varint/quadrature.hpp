#pragma once

#include <cmath>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <utility>

#include <Eigen/Dense>

#include "varint/errors.hpp"

namespace varint {

inline constexpr int kMaxQuadratureNodes = 20;

/// Symmetric quadrature rule on [0,1]: nodes strictly increasing, weights
/// positive, c_k + c_{m+1-k} = 1 and w_k = w_{m+1-k}.
template <typename Scalar>
class QuadratureRule {
 public:
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  QuadratureRule(Vector nodes, Vector weights, int exactness_degree)
      : nodes_(std::move(nodes)),
        weights_(std::move(weights)),
        exactness_degree_(exactness_degree) {
    validate();
  }

  int size() const { return static_cast<int>(nodes_.size()); }
  const Vector& nodes() const { return nodes_; }
  const Vector& weights() const { return weights_; }
  Scalar node(int k) const { return nodes_[k]; }
  Scalar weight(int k) const { return weights_[k]; }
  int exactness_degree() const { return exactness_degree_; }

 private:
  void validate() const {
    const Eigen::Index m = nodes_.size();
    if (m < 1 || weights_.size() != m) {
      throw DimensionError("QuadratureRule: need matching, non-empty node and weight vectors");
    }
    if (exactness_degree_ < 0) {
      throw ConfigError("QuadratureRule: negative exactness degree");
    }
    const Scalar tol = Scalar(64) * std::numeric_limits<Scalar>::epsilon();
    for (Eigen::Index k = 0; k < m; ++k) {
      if (!(nodes_[k] >= Scalar(0) && nodes_[k] <= Scalar(1))) {
        throw ConfigError("QuadratureRule: node outside [0,1]");
      }
      if (!(weights_[k] > Scalar(0))) {
        throw ConfigError("QuadratureRule: weights must be positive");
      }
      if (k > 0 && !(nodes_[k] > nodes_[k - 1])) {
        throw ConfigError("QuadratureRule: nodes must be strictly increasing");
      }
      const Eigen::Index mirror = m - 1 - k;
      if (std::abs(nodes_[k] + nodes_[mirror] - Scalar(1)) > tol ||
          std::abs(weights_[k] - weights_[mirror]) > tol) {
        throw ConfigError("QuadratureRule: rule is not symmetric about 1/2");
      }
    }
    if (std::abs(weights_.sum() - Scalar(1)) > tol) {
      throw ConfigError("QuadratureRule: weights must sum to 1");
    }
  }

  Vector nodes_;
  Vector weights_;
  int exactness_degree_;
};

namespace detail {

// P_m(y) and P_m'(y) for the classical Legendre polynomials on [-1,1].
template <typename Scalar>
std::pair<Scalar, Scalar> legendre_and_derivative(int m, Scalar y) {
  Scalar p_prev(1), p_cur = y;
  for (int k = 1; k < m; ++k) {
    const Scalar next =
        (Scalar(2 * k + 1) * y * p_cur - Scalar(k) * p_prev) / Scalar(k + 1);
    p_prev = p_cur;
    p_cur = next;
  }
  const Scalar derivative =
      Scalar(m) * (y * p_cur - p_prev) / (y * y - Scalar(1));
  return {p_cur, derivative};
}

}  // namespace detail

/// m-point Gauss-Legendre rule mapped to [0,1], exact for degree 2m-1.
/// Nodes come from Newton iteration on P_m started at the Chebyshev-like
/// guesses cos(pi (k - 1/4) / (m + 1/2)); the upper half is mirrored.
template <typename Scalar = double>
QuadratureRule<Scalar> gauss_legendre_rule(int m) {
  using Vector = typename QuadratureRule<Scalar>::Vector;
  if (m < 1 || m > kMaxQuadratureNodes) {
    throw ConfigError("gauss_legendre_rule: node count must lie in [1, " +
                      std::to_string(kMaxQuadratureNodes) + "], got " +
                      std::to_string(m));
  }
  Vector nodes(m), weights(m);
  const Scalar pi = std::numbers::pi_v<Scalar>;
  const Scalar eps = std::numeric_limits<Scalar>::epsilon();
  for (int k = 0; k < m / 2; ++k) {
    // Root of P_m in (0,1) on the reference interval; k = 0 is the largest.
    Scalar y = std::cos(pi * (Scalar(k) + Scalar(0.75)) / (Scalar(m) + Scalar(0.5)));
    for (int iter = 0; iter < 100; ++iter) {
      const auto [p, dp] = detail::legendre_and_derivative(m, y);
      const Scalar dy = p / dp;
      y -= dy;
      if (std::abs(dy) <= eps) break;
    }
    const auto [p, dp] = detail::legendre_and_derivative(m, y);
    const Scalar w = Scalar(1) / ((Scalar(1) - y * y) * dp * dp);
    const Scalar x_low = (Scalar(1) - y) / Scalar(2);
    nodes[k] = x_low;
    nodes[m - 1 - k] = Scalar(1) - x_low;
    weights[k] = w;
    weights[m - 1 - k] = w;
  }
  if (m % 2 == 1) {
    const auto [p, dp] = detail::legendre_and_derivative(m, Scalar(0));
    nodes[m / 2] = Scalar(0.5);
    weights[m / 2] = Scalar(1) / (dp * dp);
  }
  return QuadratureRule<Scalar>(std::move(nodes), std::move(weights), 2 * m - 1);
}

/// sum_k w_k samples[k].
template <typename Scalar>
Scalar integrate(const QuadratureRule<Scalar>& rule, std::span<const Scalar> samples) {
  if (static_cast<int>(samples.size()) != rule.size()) {
    throw DimensionError("integrate: expected " + std::to_string(rule.size()) +
                         " samples, got " + std::to_string(samples.size()));
  }
  Scalar sum(0);
  for (int k = 0; k < rule.size(); ++k) sum += rule.weight(k) * samples[k];
  return sum;
}

/// Integrates vector-valued samples stored one node per column.
template <typename Scalar, typename Derived>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> integrate_columns(
    const QuadratureRule<Scalar>& rule, const Eigen::MatrixBase<Derived>& samples) {
  if (samples.cols() != rule.size()) {
    throw DimensionError("integrate_columns: column count does not match node count");
  }
  return samples * rule.weights();
}

using QuadratureRuled = QuadratureRule<double>;

}  // namespace varint
