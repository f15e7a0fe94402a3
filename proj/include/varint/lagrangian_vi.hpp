#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>

#include <Eigen/Dense>

#include "varint/errors.hpp"
#include "varint/legendre.hpp"
#include "varint/mechanics.hpp"
#include "varint/quadrature.hpp"
#include "varint/stage_solver.hpp"

namespace varint {

template <typename Scalar>
struct LagrangianVIConfig {
  int s = 1;
  QuadratureRule<Scalar> quad = gauss_legendre_rule<Scalar>(1);
  SolverOptions<Scalar> solver{};

  /// Degree-s trial polynomial with the default m = s Gauss rule.
  static LagrangianVIConfig with_gauss(int s, SolverOptions<Scalar> solver = {}) {
    return LagrangianVIConfig{s, gauss_legendre_rule<Scalar>(s), solver};
  }

  void validate() const {
    if (s < 1 || s > kMaxBasisSize) throw ConfigError("lagrangian VI: s out of range");
    if (quad.exactness_degree() < 2 * s - 1) {
      throw ConfigError("lagrangian VI: quadrature must be exact for degree 2s-1");
    }
    solver.validate();
  }
};

/// Output of one step: the new state and the Legendre coefficients
/// Qdot_0..Qdot_{s-1} of the stage velocity, one per column.
template <typename Scalar>
struct LagrangianStepResult {
  PhaseState<Scalar> state;
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> qdot_stages;
  int iterations = 0;
  Scalar residual = Scalar(0);
};

/// How P and Pdot are obtained from the stage polynomial Q.
enum class LagrangianForm {
  lagrangian,   // P = dL/dqdot(Q, Qdot), Pdot = dL/dq(Q, Qdot)
  hamiltonian,  // Qdot = dH/dp(Q, P) solved for P, Pdot = -dH/dq(Q, P)
};

/// Variational integrator from the discrete Lagrangian
/// L_h = h sum_k w_k L(Q(c_k), Qdot(c_k)) with Q of degree s,
///
///   Qdot(tau) = sum_j Qdot_j l_j(tau),  Q(tau) = q_n + h sum_j a_{tau,j} Qdot_j.
///
/// The unknowns Qdot_j solve, for i = 0..s-1,
///
///   sum_k w_k P_k l_i(c_k) = p_n delta_i0 + h sum_k w_k (delta_i0 - a_{c_k,i}) Pdot_k,
///
/// after which q_{n+1} = q_n + h sum_k w_k Qdot(c_k) and
/// p_{n+1} = p_n + h sum_k w_k Pdot_k. The multiplier of the endpoint
/// constraint equals p_{n+1} and is eliminated.
template <typename Scalar>
class LagrangianIntegrator {
 public:
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using System = MechanicalSystem<Scalar>;

  explicit LagrangianIntegrator(LagrangianVIConfig<Scalar> config)
      : config_(std::move(config)), basis_(config_.s) {
    config_.validate();
    const int s = config_.s;
    const int m = config_.quad.size();
    values_.resize(s, m);
    antiderivatives_.resize(s, m);
    for (int k = 0; k < m; ++k) {
      values_.col(k) = basis_.eval_all(config_.quad.node(k));
      antiderivatives_.col(k) = basis_.antiderivative_all(config_.quad.node(k));
    }
    const auto& w = config_.quad.weights();
    // projection_(i,k) = w_k l_i(c_k); momentum_weights_(i,k) = w_k (delta_i0 - a_{c_k,i})
    projection_ = values_ * w.asDiagonal();
    momentum_weights_ = -antiderivatives_;
    momentum_weights_.row(0).array() += Scalar(1);
    momentum_weights_ = momentum_weights_ * w.asDiagonal();
  }

  const LagrangianVIConfig<Scalar>& config() const { return config_; }
  const LegendreBasis<Scalar>& basis() const { return basis_; }

  LagrangianStepResult<Scalar> step(const System& system, const PhaseState<Scalar>& state,
                                    Scalar h,
                                    LagrangianForm form = LagrangianForm::lagrangian) const {
    check_inputs(system, state, h, form);
    const Eigen::Index d = system.dim;
    const int s = config_.s;
    const int m = config_.quad.size();

    const Matrix kinetic = kinetic_metric(system, state, form);
    Eigen::PartialPivLU<Matrix> kinetic_lu(kinetic);

    // Stage momenta of the previous residual evaluation; seeds the per-node
    // Legendre-transform solve in Hamiltonian form.
    Matrix momentum_guess = state.p.replicate(1, m);

    Matrix node_q(d, m), node_qdot(d, m), node_p(d, m), node_pdot(d, m);
    auto evaluate_nodes = [&](const Vector& x) {
      const Eigen::Map<const Matrix> coeffs(x.data(), d, s);
      node_qdot.noalias() = coeffs * values_;
      node_q.noalias() = h * coeffs * antiderivatives_;
      node_q.colwise() += state.q;
      for (int k = 0; k < m; ++k) {
        const Vector qk = node_q.col(k);
        const Vector vk = node_qdot.col(k);
        if (form == LagrangianForm::lagrangian) {
          node_p.col(k) = system.lagrangian_grad_qdot(qk, vk);
          node_pdot.col(k) = system.lagrangian_grad_q(qk, vk);
        } else {
          const Vector pk = momentum_from_velocity(system, qk, vk, momentum_guess.col(k));
          momentum_guess.col(k) = pk;
          node_p.col(k) = pk;
          node_pdot.col(k) = -system.hamiltonian_grad_q(qk, pk);
        }
      }
    };

    auto residual = [&](const Vector& x) -> Vector {
      evaluate_nodes(x);
      Matrix r = node_p * projection_.transpose() - h * node_pdot * momentum_weights_.transpose();
      r.col(0) -= state.p;
      return Eigen::Map<const Vector>(r.data(), r.size());
    };
    auto precondition = [&](const Vector& r) -> Vector {
      const Eigen::Map<const Matrix> blocks(r.data(), d, s);
      const Matrix solved = kinetic_lu.solve(blocks);
      return Eigen::Map<const Vector>(solved.data(), solved.size());
    };

    Vector x = Vector::Zero(d * s);
    x.head(d) = initial_velocity(system, state, kinetic_lu);

    const Scalar scale = Scalar(1) + state.p.template lpNorm<Eigen::Infinity>() +
                         state.q.template lpNorm<Eigen::Infinity>();
    const SolveStats<Scalar> stats =
        solve_stage_system<Scalar>(x, residual, precondition, config_.solver, scale);

    // Final node values at the converged coefficients.
    evaluate_nodes(x);
    LagrangianStepResult<Scalar> result;
    result.qdot_stages = Eigen::Map<const Matrix>(x.data(), d, s);
    result.state.q = state.q + h * (node_qdot * config_.quad.weights());
    result.state.p = state.p + h * (node_pdot * config_.quad.weights());
    result.iterations = stats.iterations;
    result.residual = stats.residual;
    if (!result.state.q.allFinite() || !result.state.p.allFinite()) {
      throw DivergenceError("lagrangian VI: non-finite state");
    }
    return result;
  }

  /// Q(tau) rebuilt from converged coefficients.
  Vector stage_position(const PhaseState<Scalar>& state, const Matrix& qdot_stages, Scalar h,
                        Scalar tau) const {
    return state.q + h * qdot_stages * basis_.antiderivative_all(tau);
  }

  /// Qdot(tau) rebuilt from converged coefficients.
  Vector stage_velocity(const Matrix& qdot_stages, Scalar tau) const {
    return qdot_stages * basis_.eval_all(tau);
  }

 private:
  void check_inputs(const System& system, const PhaseState<Scalar>& state, Scalar h,
                    LagrangianForm form) const {
    if (!(h != Scalar(0)) || !std::isfinite(static_cast<double>(h))) {
      throw ConfigError("lagrangian VI: step size must be finite and non-zero");
    }
    if (state.q.size() != system.dim || state.p.size() != system.dim) {
      throw DimensionError("lagrangian VI: state dimension does not match system");
    }
    if (form == LagrangianForm::lagrangian && !system.has_lagrangian()) {
      throw ConfigError(system.name + ": Lagrangian derivatives required");
    }
    if (form == LagrangianForm::hamiltonian && !system.has_hamiltonian()) {
      throw ConfigError(system.name + ": Hamiltonian derivatives required");
    }
  }

  // d(momentum)/d(velocity) at the start of the step; exactly M for
  // quadratic kinetic energy.
  Matrix kinetic_metric(const System& system, const PhaseState<Scalar>& state,
                        LagrangianForm form) const {
    if (system.quadratic_kinetic) return system.mass;
    const Eigen::Index d = system.dim;
    const Scalar eps = std::numeric_limits<Scalar>::epsilon();
    Matrix metric(d, d);
    if (form == LagrangianForm::lagrangian) {
      const Vector v = velocity_estimate(system, state);
      for (Eigen::Index j = 0; j < d; ++j) {
        const Scalar step = std::cbrt(eps) * std::max(Scalar(1), std::abs(v[j]));
        Vector plus = v, minus = v;
        plus[j] += step;
        minus[j] -= step;
        metric.col(j) = (system.lagrangian_grad_qdot(state.q, plus) -
                         system.lagrangian_grad_qdot(state.q, minus)) /
                        (Scalar(2) * step);
      }
      return metric;
    }
    Matrix inverse_metric(d, d);
    for (Eigen::Index j = 0; j < d; ++j) {
      const Scalar step = std::cbrt(eps) * std::max(Scalar(1), std::abs(state.p[j]));
      Vector plus = state.p, minus = state.p;
      plus[j] += step;
      minus[j] -= step;
      inverse_metric.col(j) = (system.hamiltonian_grad_p(state.q, plus) -
                               system.hamiltonian_grad_p(state.q, minus)) /
                              (Scalar(2) * step);
    }
    Eigen::FullPivLU<Matrix> lu(inverse_metric);
    if (!lu.isInvertible()) throw TransformError(system.name + ": singular Legendre transform");
    return lu.inverse();
  }

  // Velocity at (q_n, p_n): dH/dp when available, otherwise one linearized
  // inversion of p = dL/dqdot(q_n, v) about v = 0.
  static Vector velocity_estimate(const System& system, const PhaseState<Scalar>& state) {
    if (system.quadratic_kinetic) {
      return system.mass.partialPivLu().solve(state.p);
    }
    if (system.hamiltonian_grad_p) return system.hamiltonian_grad_p(state.q, state.p);
    const Eigen::Index d = system.dim;
    const Scalar step = std::cbrt(std::numeric_limits<Scalar>::epsilon());
    const Vector zero = Vector::Zero(d);
    const Vector base = system.lagrangian_grad_qdot(state.q, zero);
    Matrix metric(d, d);
    for (Eigen::Index j = 0; j < d; ++j) {
      Vector plus = zero, minus = zero;
      plus[j] = step;
      minus[j] = -step;
      metric.col(j) = (system.lagrangian_grad_qdot(state.q, plus) -
                       system.lagrangian_grad_qdot(state.q, minus)) /
                      (Scalar(2) * step);
    }
    return metric.partialPivLu().solve(state.p - base);
  }

  Vector initial_velocity(const System& system, const PhaseState<Scalar>& state,
                          const Eigen::PartialPivLU<Matrix>& kinetic_lu) const {
    if (system.quadratic_kinetic) return kinetic_lu.solve(state.p);
    return velocity_estimate(system, state);
  }

  // Solves dH/dp(q, p) = qdot for p by Newton iteration from `guess`.
  Vector momentum_from_velocity(const System& system, const Vector& q, const Vector& qdot,
                                const Vector& guess) const {
    if (system.quadratic_kinetic) return system.mass * qdot;
    const Eigen::Index d = system.dim;
    const Scalar eps = std::numeric_limits<Scalar>::epsilon();
    const Scalar tol = std::max(config_.solver.tol, Scalar(16) * eps *
                                                        (Scalar(1) + qdot.template lpNorm<Eigen::Infinity>()));
    Vector p = guess;
    for (int iter = 0; iter < config_.solver.max_iter; ++iter) {
      const Vector mismatch = system.hamiltonian_grad_p(q, p) - qdot;
      if (!mismatch.allFinite()) throw TransformError(system.name + ": non-finite dH/dp");
      if (mismatch.template lpNorm<Eigen::Infinity>() <= tol) return p;
      Matrix jacobian(d, d);
      for (Eigen::Index j = 0; j < d; ++j) {
        const Scalar step = std::cbrt(eps) * std::max(Scalar(1), std::abs(p[j]));
        Vector plus = p, minus = p;
        plus[j] += step;
        minus[j] -= step;
        jacobian.col(j) =
            (system.hamiltonian_grad_p(q, plus) - system.hamiltonian_grad_p(q, minus)) /
            (Scalar(2) * step);
      }
      Eigen::FullPivLU<Matrix> lu(jacobian);
      if (!lu.isInvertible()) {
        throw TransformError(system.name + ": non-invertible Legendre transform at stage");
      }
      p -= lu.solve(mismatch);
    }
    throw TransformError(system.name + ": Legendre transform did not converge at stage");
  }

  LagrangianVIConfig<Scalar> config_;
  LegendreBasis<Scalar> basis_;
  Matrix values_;            // (i,k) = l_i(c_k)
  Matrix antiderivatives_;   // (i,k) = a_{c_k,i}
  Matrix projection_;
  Matrix momentum_weights_;
};

template <typename Scalar>
LagrangianStepResult<Scalar> lagrangian_step(const MechanicalSystem<Scalar>& system,
                                             const PhaseState<Scalar>& state, Scalar h,
                                             const LagrangianVIConfig<Scalar>& config) {
  return LagrangianIntegrator<Scalar>(config).step(system, state, h, LagrangianForm::lagrangian);
}

template <typename Scalar>
LagrangianStepResult<Scalar> lagrangian_step_hamiltonian_form(
    const MechanicalSystem<Scalar>& system, const PhaseState<Scalar>& state, Scalar h,
    const LagrangianVIConfig<Scalar>& config) {
  return LagrangianIntegrator<Scalar>(config).step(system, state, h, LagrangianForm::hamiltonian);
}

}  // namespace varint
