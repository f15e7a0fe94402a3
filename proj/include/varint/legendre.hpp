#pragma once

#include <cmath>
#include <string>

#include <Eigen/Dense>

#include "varint/errors.hpp"
#include "varint/quadrature.hpp"

namespace varint {

inline constexpr int kMaxBasisSize = 10;

/// Orthonormal shifted Legendre polynomials l_0..l_{s-1} on [0,1],
///
///   l_j(x) = sqrt(2j+1) P_j(2x-1),
///
/// with P_j the classical Legendre polynomials. Values come from the
/// three-term recurrence; antiderivatives a_{tau,j} = int_0^tau l_j(x) dx
/// use the closed form (P_{j+1} - P_{j-1}) / (2 sqrt(2j+1)).
template <typename Scalar>
class LegendreBasis {
 public:
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  explicit LegendreBasis(int s) : s_(s) {
    if (s < 1 || s > kMaxBasisSize) {
      throw ConfigError("LegendreBasis: s must lie in [1, " +
                        std::to_string(kMaxBasisSize) + "], got " +
                        std::to_string(s));
    }
    norm_.resize(s + 1);
    for (int j = 0; j <= s; ++j) norm_[j] = std::sqrt(Scalar(2 * j + 1));
  }

  int size() const { return s_; }

  /// l_j(x).
  Scalar eval(int j, Scalar x) const {
    check_index(j);
    return norm_[j] * classical(j, x);
  }

  /// a_{tau,i} = int_0^tau l_i(x) dx.
  Scalar antiderivative(int i, Scalar tau) const {
    check_index(i);
    if (i == 0) return tau;
    Scalar p_prev, p_cur, p_next;
    classical_triple(i, Scalar(2) * tau - Scalar(1), p_prev, p_cur, p_next);
    return (p_next - p_prev) / (Scalar(2) * norm_[i]);
  }

  /// (l_0(x), ..., l_{s-1}(x)).
  Vector eval_all(Scalar x) const {
    Vector out(s_);
    const Scalar y = Scalar(2) * x - Scalar(1);
    Scalar p_prev(1), p_cur = y;
    out[0] = Scalar(1);
    for (int j = 1; j < s_; ++j) {
      out[j] = norm_[j] * p_cur;
      advance(j, y, p_prev, p_cur);
    }
    return out;
  }

  /// (a_{tau,0}, ..., a_{tau,s-1}).
  Vector antiderivative_all(Scalar tau) const {
    Vector out(s_);
    const Scalar y = Scalar(2) * tau - Scalar(1);
    // legendre[j] = P_j(y) for j = 0..s
    Vector legendre(s_ + 1);
    legendre[0] = Scalar(1);
    legendre[1] = y;
    for (int j = 1; j < s_; ++j) {
      legendre[j + 1] =
          (Scalar(2 * j + 1) * y * legendre[j] - Scalar(j) * legendre[j - 1]) /
          Scalar(j + 1);
    }
    out[0] = tau;
    for (int j = 1; j < s_; ++j) {
      out[j] = (legendre[j + 1] - legendre[j - 1]) / (Scalar(2) * norm_[j]);
    }
    return out;
  }

 private:
  void check_index(int j) const {
    if (j < 0 || j >= s_) {
      throw BasisIndexError("LegendreBasis: index " + std::to_string(j) +
                            " outside [0, " + std::to_string(s_) + ")");
    }
  }

  // (p_prev, p_cur) = (P_{j-1}, P_j) -> (P_j, P_{j+1})
  static void advance(int j, Scalar y, Scalar& p_prev, Scalar& p_cur) {
    const Scalar next =
        (Scalar(2 * j + 1) * y * p_cur - Scalar(j) * p_prev) / Scalar(j + 1);
    p_prev = p_cur;
    p_cur = next;
  }

  static Scalar classical(int j, Scalar x) {
    if (j == 0) return Scalar(1);
    const Scalar y = Scalar(2) * x - Scalar(1);
    Scalar p_prev(1), p_cur = y;
    for (int k = 1; k < j; ++k) advance(k, y, p_prev, p_cur);
    return p_cur;
  }

  // P_{j-1}(y), P_j(y), P_{j+1}(y) for j >= 1.
  static void classical_triple(int j, Scalar y, Scalar& p_prev, Scalar& p_cur,
                               Scalar& p_next) {
    p_prev = Scalar(1);
    p_cur = y;
    for (int k = 1; k < j; ++k) advance(k, y, p_prev, p_cur);
    Scalar a = p_prev, b = p_cur;
    advance(j, y, a, b);
    p_next = b;
  }

  int s_;
  Vector norm_;
};

/// max_{j,k<s} |sum_m w_m l_j(c_m) l_k(c_m) - delta_jk|. Zero (up to
/// rounding) whenever the rule is exact for degree 2s-2.
template <typename Scalar>
Scalar orthonormality_defect(const LegendreBasis<Scalar>& basis,
                             const QuadratureRule<Scalar>& quad) {
  const int s = basis.size();
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  Matrix values(s, quad.size());
  for (int k = 0; k < quad.size(); ++k) values.col(k) = basis.eval_all(quad.node(k));
  const Matrix gram = values * quad.weights().asDiagonal() * values.transpose();
  return (gram - Matrix::Identity(s, s)).cwiseAbs().maxCoeff();
}

using LegendreBasisd = LegendreBasis<double>;

}  // namespace varint
