#pragma once

#include <cmath>
#include <string>
#include <utility>

#include <Eigen/Dense>

#include "varint/errors.hpp"
#include "varint/legendre.hpp"
#include "varint/mechanics.hpp"
#include "varint/quadrature.hpp"
#include "varint/stage_solver.hpp"

namespace varint {

/// Continuous-stage partitioned Runge-Kutta coefficients of the Galerkin
/// integrator with trial spaces (degree s, degree s-1):
///
///   A(tau, sigma)    = sum_{i<s} a_{tau,i} l_i(sigma),
///   Ahat(tau, sigma) = 1 - sum_{i<s} a_{sigma,i} l_i(tau),
///   B = Bhat = 1.
///
/// The swapped variant exchanges the roles of (A, B) and (Ahat, Bhat),
/// i.e. q is advanced with Ahat and p with A.
template <typename Scalar>
class CSPRKCoefficients {
 public:
  CSPRKCoefficients(int s, bool swapped) : basis_(s), swapped_(swapped) {}

  int s() const { return basis_.size(); }
  bool swapped() const { return swapped_; }
  const LegendreBasis<Scalar>& basis() const { return basis_; }

  Scalar A(Scalar tau, Scalar sigma) const {
    return swapped_ ? hat_form(tau, sigma) : plain_form(tau, sigma);
  }
  Scalar A_hat(Scalar tau, Scalar sigma) const {
    return swapped_ ? plain_form(tau, sigma) : hat_form(tau, sigma);
  }
  Scalar B(Scalar) const { return Scalar(1); }
  Scalar B_hat(Scalar) const { return Scalar(1); }

  /// B(tau) Ahat(tau,sigma) + Bhat(sigma) A(sigma,tau) - B(tau) Bhat(sigma).
  Scalar symplecticity_defect(Scalar tau, Scalar sigma) const {
    return B(tau) * A_hat(tau, sigma) + B_hat(sigma) * A(sigma, tau) - B(tau) * B_hat(sigma);
  }

 private:
  Scalar plain_form(Scalar tau, Scalar sigma) const {
    return basis_.antiderivative_all(tau).dot(basis_.eval_all(sigma));
  }
  Scalar hat_form(Scalar tau, Scalar sigma) const {
    return Scalar(1) - basis_.antiderivative_all(sigma).dot(basis_.eval_all(tau));
  }

  LegendreBasis<Scalar> basis_;
  bool swapped_;
};

template <typename Scalar>
CSPRKCoefficients<Scalar> build_csprk(int s, bool swapped = false) {
  if (s < 1 || s > kMaxBasisSize) {
    throw ConfigError("build_csprk: s must lie in [1, " + std::to_string(kMaxBasisSize) +
                      "], got " + std::to_string(s));
  }
  return CSPRKCoefficients<Scalar>(s, swapped);
}

/// Partitioned Butcher tableau: q stages use (a, b), p stages use (a_hat, b_hat).
template <typename Scalar>
struct PRKTableau {
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

  Vector c;
  Matrix a;
  Matrix a_hat;
  Vector b;
  Vector b_hat;

  int stages() const { return static_cast<int>(c.size()); }

  /// max_{k,l} |b_k ahat_kl + bhat_l a_lk - b_k bhat_l|.
  Scalar symplecticity_defect() const {
    const Matrix defect = b.asDiagonal() * a_hat + (b_hat.asDiagonal() * a).transpose() -
                          b * b_hat.transpose();
    return defect.cwiseAbs().maxCoeff();
  }
};

inline constexpr double kTableauSymplecticityLimit = 1e-12;

/// Replaces the stage integrals by the rule (c_k, w_k):
/// a_kl = w_l A(c_k, c_l), ahat_kl = w_l Ahat(c_k, c_l), b = bhat = w.
template <typename Scalar>
PRKTableau<Scalar> discretize(const CSPRKCoefficients<Scalar>& coeffs,
                              const QuadratureRule<Scalar>& quad) {
  const int m = quad.size();
  PRKTableau<Scalar> tableau;
  tableau.c = quad.nodes();
  tableau.a.resize(m, m);
  tableau.a_hat.resize(m, m);
  for (int k = 0; k < m; ++k) {
    for (int l = 0; l < m; ++l) {
      tableau.a(k, l) = quad.weight(l) * coeffs.A(quad.node(k), quad.node(l));
      tableau.a_hat(k, l) = quad.weight(l) * coeffs.A_hat(quad.node(k), quad.node(l));
    }
  }
  tableau.b = quad.weights();
  tableau.b_hat = quad.weights();
  const Scalar defect = tableau.symplecticity_defect();
  if (!(defect <= Scalar(kTableauSymplecticityLimit))) {
    throw ConsistencyError("discretize: tableau symplecticity defect " +
                           std::to_string(static_cast<double>(defect)));
  }
  return tableau;
}

/// Converged stage values (Q_k, P_k), one node per column.
template <typename Scalar>
struct GalerkinStepResult {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

  PhaseState<Scalar> start;
  PhaseState<Scalar> state;
  Matrix stage_q;
  Matrix stage_p;
  int iterations = 0;
  Scalar residual = Scalar(0);
};

/// One step of the discretized continuous-stage method,
///
///   Q_k = q_n + h sum_l a_kl f(Q_l, P_l),  P_k = p_n + h sum_l ahat_kl g(Q_l, P_l),
///   q_{n+1} = q_n + h sum_k b_k f_k,       p_{n+1} = p_n + h sum_k bhat_k g_k,
///
/// with f = dH/dp and g = -dH/dq. (q_n, p_n) are the numerical fluxes of
/// the underlying time-Galerkin discretization.
template <typename Scalar>
GalerkinStepResult<Scalar> galerkin_step(const MechanicalSystem<Scalar>& system,
                                         const PhaseState<Scalar>& state, Scalar h,
                                         const PRKTableau<Scalar>& tableau,
                                         const SolverOptions<Scalar>& solver) {
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  solver.validate();
  if (!(h != Scalar(0)) || !std::isfinite(static_cast<double>(h))) {
    throw ConfigError("galerkin step: step size must be finite and non-zero");
  }
  if (!system.has_hamiltonian()) {
    throw ConfigError(system.name + ": Hamiltonian derivatives required");
  }
  if (state.q.size() != system.dim || state.p.size() != system.dim) {
    throw DimensionError("galerkin step: state dimension does not match system");
  }
  const Eigen::Index d = system.dim;
  const int m = tableau.stages();

  Matrix flow_q(d, m), flow_p(d, m);
  auto evaluate_flows = [&](const Matrix& q, const Matrix& p) {
    for (int k = 0; k < m; ++k) {
      const Vector qk = q.col(k);
      const Vector pk = p.col(k);
      flow_q.col(k) = system.hamiltonian_grad_p(qk, pk);
      flow_p.col(k) = -system.hamiltonian_grad_q(qk, pk);
    }
  };

  // x = [vec(Q); vec(P)]; residual = x - G(x), so the preconditioner is the identity.
  auto residual = [&](const Vector& x) -> Vector {
    const Eigen::Map<const Matrix> q(x.data(), d, m);
    const Eigen::Map<const Matrix> p(x.data() + d * m, d, m);
    evaluate_flows(q, p);
    Vector r(2 * d * m);
    Eigen::Map<Matrix> rq(r.data(), d, m);
    Eigen::Map<Matrix> rp(r.data() + d * m, d, m);
    rq = q - h * flow_q * tableau.a.transpose();
    rq.colwise() -= state.q;
    rp = p - h * flow_p * tableau.a_hat.transpose();
    rp.colwise() -= state.p;
    return r;
  };
  auto identity = [](const Vector& r) -> Vector { return r; };

  Vector x(2 * d * m);
  Eigen::Map<Matrix>(x.data(), d, m) = state.q.replicate(1, m);
  Eigen::Map<Matrix>(x.data() + d * m, d, m) = state.p.replicate(1, m);

  const Scalar scale = Scalar(1) + state.q.template lpNorm<Eigen::Infinity>() +
                       state.p.template lpNorm<Eigen::Infinity>();
  const SolveStats<Scalar> stats = solve_stage_system<Scalar>(x, residual, identity, solver, scale);

  GalerkinStepResult<Scalar> result;
  result.start = state;
  result.stage_q = Eigen::Map<const Matrix>(x.data(), d, m);
  result.stage_p = Eigen::Map<const Matrix>(x.data() + d * m, d, m);
  evaluate_flows(result.stage_q, result.stage_p);
  result.state.q = state.q + h * (flow_q * tableau.b);
  result.state.p = state.p + h * (flow_p * tableau.b_hat);
  result.iterations = stats.iterations;
  result.residual = stats.residual;
  if (!result.state.q.allFinite() || !result.state.p.allFinite()) {
    throw DivergenceError("galerkin step: non-finite state");
  }
  return result;
}

/// Galerkin integrator with its tableau built once per (s, rule).
template <typename Scalar>
class GalerkinIntegrator {
 public:
  GalerkinIntegrator(int s, QuadratureRule<Scalar> quad, SolverOptions<Scalar> solver = {},
                     bool swapped = false)
      : coeffs_(build_csprk<Scalar>(s, swapped)),
        quad_(std::move(quad)),
        tableau_(discretize(coeffs_, quad_)),
        solver_(solver) {
    solver_.validate();
  }

  static GalerkinIntegrator with_gauss(int s, SolverOptions<Scalar> solver = {},
                                       bool swapped = false) {
    return GalerkinIntegrator(s, gauss_legendre_rule<Scalar>(s), solver, swapped);
  }

  const CSPRKCoefficients<Scalar>& coefficients() const { return coeffs_; }
  const QuadratureRule<Scalar>& quadrature() const { return quad_; }
  const PRKTableau<Scalar>& tableau() const { return tableau_; }
  const SolverOptions<Scalar>& solver() const { return solver_; }

  GalerkinStepResult<Scalar> step(const MechanicalSystem<Scalar>& system,
                                  const PhaseState<Scalar>& state, Scalar h) const {
    return galerkin_step(system, state, h, tableau_, solver_);
  }

 private:
  CSPRKCoefficients<Scalar> coeffs_;
  QuadratureRule<Scalar> quad_;
  PRKTableau<Scalar> tableau_;
  SolverOptions<Scalar> solver_;
};

/// Residual of the time-Galerkin weak form evaluated on the trial
/// polynomials rebuilt from converged stage values.
///
/// P (degree s-1) is the discrete L2 projection of the P_k onto l_0..l_{s-1};
/// Q (degree s) is q_n + tau r(tau) with r the projection of (Q_k - q_n)/c_k.
/// The returned value is the max over
///   int [Q phi' + h f phi] - (Q(1) phi(1) - q_n phi(0)),   phi in {l_j},
///   int [P psi' + h g psi] - (p_{n+1} psi(1) - p_n psi(0)), psi in {1, a_{.,j}},
///   |Q(1) - q_{n+1}|,
/// with all integrals taken by the same rule. The unswapped variant is audited.
template <typename Scalar>
Scalar weak_form_residual(const MechanicalSystem<Scalar>& system,
                          const GalerkinStepResult<Scalar>& step, Scalar h,
                          const LegendreBasis<Scalar>& basis,
                          const QuadratureRule<Scalar>& quad) {
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  const Eigen::Index d = system.dim;
  const int s = basis.size();
  const int m = quad.size();
  if (step.stage_q.cols() != m || step.stage_p.cols() != m || step.stage_q.rows() != d) {
    throw DimensionError("weak_form_residual: stage values do not match rule/system");
  }
  const Vector& w = quad.weights();
  const PhaseState<Scalar>& start = step.start;
  const PhaseState<Scalar>& end = step.state;

  Matrix values(s, m), antiderivatives(s, m);
  for (int k = 0; k < m; ++k) {
    values.col(k) = basis.eval_all(quad.node(k));
    antiderivatives.col(k) = basis.antiderivative_all(quad.node(k));
  }

  // Trial polynomials: P(tau) = sum_i lambda_i l_i(tau), Q(tau) = q_n + tau sum_i rho_i l_i(tau).
  const Matrix lambda = step.stage_p * w.asDiagonal() * values.transpose();
  Matrix scaled(d, m);
  for (int k = 0; k < m; ++k) {
    scaled.col(k) = (step.stage_q.col(k) - start.q) / quad.node(k);
  }
  const Matrix rho = scaled * w.asDiagonal() * values.transpose();

  Matrix node_q = rho * values;
  for (int k = 0; k < m; ++k) node_q.col(k) = start.q + quad.node(k) * node_q.col(k);
  const Matrix node_p = lambda * values;
  const Vector q_end = start.q + rho * basis.eval_all(Scalar(1));

  Matrix f(d, m), g(d, m);
  for (int k = 0; k < m; ++k) {
    const Vector qk = node_q.col(k);
    const Vector pk = node_p.col(k);
    f.col(k) = system.hamiltonian_grad_p(qk, pk);
    g.col(k) = -system.hamiltonian_grad_q(qk, pk);
  }

  // l_j'(x) = 2 sqrt(2j+1) P_j'(2x-1)
  auto legendre_derivatives = [&](Scalar x) {
    Vector out = Vector::Zero(s);
    const Scalar y = Scalar(2) * x - Scalar(1);
    Scalar p_prev(1), p_cur = y, dp_prev(0), dp_cur(1);
    for (int j = 1; j < s; ++j) {
      out[j] = Scalar(2) * std::sqrt(Scalar(2 * j + 1)) * dp_cur;
      const Scalar p_next = (Scalar(2 * j + 1) * y * p_cur - Scalar(j) * p_prev) / Scalar(j + 1);
      const Scalar dp_next = dp_prev + Scalar(2 * j + 1) * p_cur;
      p_prev = p_cur;
      p_cur = p_next;
      dp_prev = dp_cur;
      dp_cur = dp_next;
    }
    return out;
  };
  Matrix derivatives(s, m);
  for (int k = 0; k < m; ++k) derivatives.col(k) = legendre_derivatives(quad.node(k));

  const Vector at_zero = basis.eval_all(Scalar(0));
  const Vector at_one = basis.eval_all(Scalar(1));
  const Vector anti_at_one = basis.antiderivative_all(Scalar(1));

  Scalar worst = (q_end - end.q).template lpNorm<Eigen::Infinity>();
  for (int j = 0; j < s; ++j) {
    Vector r = Vector::Zero(d);
    for (int k = 0; k < m; ++k) {
      r += w[k] * (node_q.col(k) * derivatives(j, k) + h * f.col(k) * values(j, k));
    }
    r -= q_end * at_one[j] - start.q * at_zero[j];
    worst = std::max(worst, r.template lpNorm<Eigen::Infinity>());
  }
  {
    Vector r = h * (g * w) - (end.p - start.p);
    worst = std::max(worst, r.template lpNorm<Eigen::Infinity>());
  }
  for (int j = 0; j < s; ++j) {
    Vector r = Vector::Zero(d);
    for (int k = 0; k < m; ++k) {
      r += w[k] * (node_p.col(k) * values(j, k) + h * g.col(k) * antiderivatives(j, k));
    }
    r -= end.p * anti_at_one[j];
    worst = std::max(worst, r.template lpNorm<Eigen::Infinity>());
  }
  return worst;
}

}  // namespace varint
