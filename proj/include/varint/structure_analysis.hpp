#pragma once

#include <algorithm>
#include <cmath>
#include <exception>
#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "varint/errors.hpp"
#include "varint/galerkin_csprk.hpp"
#include "varint/lagrangian_vi.hpp"
#include "varint/mechanics.hpp"

namespace varint {

/// One-step map z -> Phi_h(z).
template <typename Scalar>
using Stepper = std::function<PhaseState<Scalar>(const PhaseState<Scalar>&, Scalar)>;

template <typename Scalar>
using Trajectory = std::vector<PhaseState<Scalar>>;

template <typename Scalar>
Stepper<Scalar> make_lagrangian_stepper(LagrangianIntegrator<Scalar> integrator,
                                        MechanicalSystem<Scalar> system,
                                        LagrangianForm form = LagrangianForm::lagrangian) {
  auto shared = std::make_shared<const std::pair<LagrangianIntegrator<Scalar>, MechanicalSystem<Scalar>>>(
      std::move(integrator), std::move(system));
  return [shared, form](const PhaseState<Scalar>& z, Scalar h) {
    return shared->first.step(shared->second, z, h, form).state;
  };
}

template <typename Scalar>
Stepper<Scalar> make_galerkin_stepper(GalerkinIntegrator<Scalar> integrator,
                                      MechanicalSystem<Scalar> system) {
  auto shared = std::make_shared<const std::pair<GalerkinIntegrator<Scalar>, MechanicalSystem<Scalar>>>(
      std::move(integrator), std::move(system));
  return [shared](const PhaseState<Scalar>& z, Scalar h) {
    return shared->first.step(shared->second, z, h).state;
  };
}

/// Explicit Euler; the non-symplectic control.
template <typename Scalar>
Stepper<Scalar> make_explicit_euler_stepper(MechanicalSystem<Scalar> system) {
  if (!system.has_hamiltonian()) throw ConfigError(system.name + ": Hamiltonian derivatives required");
  return [system = std::move(system)](const PhaseState<Scalar>& z, Scalar h) {
    return PhaseState<Scalar>{z.q + h * system.hamiltonian_grad_p(z.q, z.p),
                              z.p - h * system.hamiltonian_grad_q(z.q, z.p)};
  };
}

/// trajectory[0] = initial, trajectory[k+1] = step(trajectory[k], h).
/// A failing step is rethrown as StepError nesting the original exception.
template <typename Scalar>
Trajectory<Scalar> integrate(const Stepper<Scalar>& step, const PhaseState<Scalar>& initial,
                             Scalar h, std::size_t n_steps) {
  Trajectory<Scalar> trajectory;
  trajectory.reserve(n_steps + 1);
  trajectory.push_back(initial);
  for (std::size_t n = 0; n < n_steps; ++n) {
    try {
      trajectory.push_back(step(trajectory.back(), h));
    } catch (const std::exception& e) {
      std::throw_with_nested(StepError(n, e.what()));
    }
  }
  return trajectory;
}

/// Canonical symplectic matrix [[0, I], [-I, 0]] of size 2d.
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> canonical_symplectic_matrix(Eigen::Index d) {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  Matrix omega = Matrix::Zero(2 * d, 2 * d);
  omega.topRightCorner(d, d).setIdentity();
  omega.bottomLeftCorner(d, d) = -Matrix::Identity(d, d);
  return omega;
}

enum class DifferenceScheme { forward, central };

/// Finite-difference Jacobian of z -> Phi_h(z) in stacked (q, p) coordinates.
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> step_jacobian(
    const Stepper<Scalar>& step, const PhaseState<Scalar>& state, Scalar h, Scalar fd_step,
    DifferenceScheme scheme = DifferenceScheme::central) {
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  const Vector z = state.stacked();
  const Eigen::Index n = z.size();
  auto mapped = [&](const Vector& at, Eigen::Index column, Scalar offset) -> Vector {
    try {
      return step(PhaseState<Scalar>::from_stacked(at), h).stacked();
    } catch (const std::exception& e) {
      std::throw_with_nested(Error("step_jacobian: step failed for column " +
                                   std::to_string(column) + " offset " +
                                   std::to_string(static_cast<double>(offset)) + ": " + e.what()));
    }
  };
  Matrix jacobian(n, n);
  const Vector base = scheme == DifferenceScheme::forward ? mapped(z, -1, 0) : Vector();
  for (Eigen::Index j = 0; j < n; ++j) {
    Vector plus = z;
    plus[j] += fd_step;
    if (scheme == DifferenceScheme::forward) {
      jacobian.col(j) = (mapped(plus, j, fd_step) - base) / fd_step;
    } else {
      Vector minus = z;
      minus[j] -= fd_step;
      jacobian.col(j) = (mapped(plus, j, fd_step) - mapped(minus, j, -fd_step)) / (Scalar(2) * fd_step);
    }
  }
  return jacobian;
}

/// ||J^T Omega J - Omega||_inf (maximum absolute row sum) of the central
/// finite-difference Jacobian of one step.
template <typename Scalar>
Scalar symplecticity_defect(const Stepper<Scalar>& step, const PhaseState<Scalar>& state, Scalar h,
                            Scalar fd_step = Scalar(1e-5)) {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  if (!(fd_step >= Scalar(1e-7) && fd_step <= Scalar(1e-4))) {
    throw ConfigError("symplecticity_defect: fd_step must lie in [1e-7, 1e-4]");
  }
  const Matrix jacobian = step_jacobian(step, state, h, fd_step);
  const Matrix omega = canonical_symplectic_matrix<Scalar>(state.dim());
  const Matrix defect = jacobian.transpose() * omega * jacobian - omega;
  return defect.cwiseAbs().rowwise().sum().maxCoeff();
}

/// ||Phi_{-h}(Phi_h(z)) - z||_inf.
template <typename Scalar>
Scalar symmetry_defect(const Stepper<Scalar>& step, const PhaseState<Scalar>& state, Scalar h) {
  const PhaseState<Scalar> back = step(step(state, h), -h);
  return (back.stacked() - state.stacked()).template lpNorm<Eigen::Infinity>();
}

template <typename Scalar>
struct ConvergenceReport {
  std::vector<Scalar> step_sizes;
  std::vector<Scalar> errors;  // max-norm terminal error against the reference
  Scalar slope = Scalar(0);    // least-squares slope of log(error) vs log(h)
  int target_order = 0;
  bool non_monotone = false;   // errors failed to decrease with h (noise floor)
};

/// Least-squares slope of log(errors) against log(step_sizes).
template <typename Scalar>
Scalar fitted_slope(const std::vector<Scalar>& step_sizes, const std::vector<Scalar>& errors) {
  const std::size_t n = step_sizes.size();
  Scalar mean_x(0), mean_y(0);
  for (std::size_t i = 0; i < n; ++i) {
    mean_x += std::log(step_sizes[i]);
    mean_y += std::log(errors[i]);
  }
  mean_x /= Scalar(n);
  mean_y /= Scalar(n);
  Scalar sxy(0), sxx(0);
  for (std::size_t i = 0; i < n; ++i) {
    const Scalar dx = std::log(step_sizes[i]) - mean_x;
    sxy += dx * (std::log(errors[i]) - mean_y);
    sxx += dx * dx;
  }
  return sxy / sxx;
}

/// Integrates to t_end with each step size and fits the observed order.
template <typename Scalar>
ConvergenceReport<Scalar> convergence_order(const Stepper<Scalar>& step,
                                            const PhaseState<Scalar>& initial,
                                            const std::vector<Scalar>& step_sizes, Scalar t_end,
                                            const PhaseState<Scalar>& reference, int target_order) {
  if (step_sizes.size() < 3) throw ConfigError("convergence_order: need at least 3 step sizes");
  ConvergenceReport<Scalar> report;
  report.target_order = target_order;
  for (const Scalar h : step_sizes) {
    const Scalar ratio = t_end / h;
    const auto n_steps = static_cast<std::size_t>(std::llround(static_cast<double>(ratio)));
    if (!(h > Scalar(0)) || std::abs(ratio - Scalar(n_steps)) > Scalar(1e-9) * ratio) {
      throw ConfigError("convergence_order: t_end must be an integer multiple of every h");
    }
    const Trajectory<Scalar> run = integrate(step, initial, h, n_steps);
    const Scalar error =
        (run.back().stacked() - reference.stacked()).template lpNorm<Eigen::Infinity>();
    if (!(error > Scalar(0))) throw ConfigError("convergence_order: zero error, order undefined");
    report.step_sizes.push_back(h);
    report.errors.push_back(error);
  }
  for (std::size_t i = 1; i < report.errors.size(); ++i) {
    const bool finer = report.step_sizes[i] < report.step_sizes[i - 1];
    if (finer != (report.errors[i] < report.errors[i - 1])) report.non_monotone = true;
  }
  report.slope = fitted_slope(report.step_sizes, report.errors);
  return report;
}

/// Exact flow of the harmonic oscillator H = p^2/2 + omega^2 q^2/2.
template <typename Scalar>
PhaseState<Scalar> harmonic_exact(Scalar omega, const PhaseState<Scalar>& initial, Scalar t) {
  const Scalar c = std::cos(omega * t), s = std::sin(omega * t);
  return PhaseState<Scalar>{c * initial.q + (s / omega) * initial.p,
                            -omega * s * initial.q + c * initial.p};
}

/// Unit circular Kepler orbit through q = (1,0), p = (0,1).
template <typename Scalar>
PhaseState<Scalar> kepler_circular_exact(Scalar t) {
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  Vector q(2), p(2);
  q << std::cos(t), std::sin(t);
  p << -std::sin(t), std::cos(t);
  return PhaseState<Scalar>{q, p};
}

template <typename Scalar>
struct EquivalenceReport {
  std::vector<Scalar> gaps;  // per-state max componentwise gap, index = step
  Scalar max_gap = Scalar(0);
};

/// Per-state max componentwise gap between two trajectories of equal length.
template <typename Scalar>
EquivalenceReport<Scalar> trajectory_gap(const Trajectory<Scalar>& a, const Trajectory<Scalar>& b) {
  if (a.size() != b.size()) throw DimensionError("trajectory_gap: trajectories differ in length");
  EquivalenceReport<Scalar> report;
  report.gaps.reserve(a.size());
  for (std::size_t k = 0; k < a.size(); ++k) {
    const Scalar gap = (a[k].stacked() - b[k].stacked()).template lpNorm<Eigen::Infinity>();
    report.gaps.push_back(gap);
    report.max_gap = std::max(report.max_gap, gap);
  }
  return report;
}

/// Runs the Lagrangian and the Galerkin integrator with identical s, rule
/// and solver settings and compares the trajectories componentwise.
template <typename Scalar>
EquivalenceReport<Scalar> equivalence_report(const MechanicalSystem<Scalar>& system,
                                             const PhaseState<Scalar>& initial, Scalar h,
                                             std::size_t n_steps, int s,
                                             const QuadratureRule<Scalar>& quad,
                                             const SolverOptions<Scalar>& solver) {
  const Stepper<Scalar> lagrangian = make_lagrangian_stepper(
      LagrangianIntegrator<Scalar>(LagrangianVIConfig<Scalar>{s, quad, solver}), system);
  const Stepper<Scalar> galerkin =
      make_galerkin_stepper(GalerkinIntegrator<Scalar>(s, quad, solver), system);
  return trajectory_gap(integrate(lagrangian, initial, h, n_steps),
                        integrate(galerkin, initial, h, n_steps));
}

template <typename Scalar>
Scalar equivalence_defect(const MechanicalSystem<Scalar>& system, const PhaseState<Scalar>& initial,
                          Scalar h, std::size_t n_steps, int s, const QuadratureRule<Scalar>& quad,
                          const SolverOptions<Scalar>& solver) {
  return equivalence_report(system, initial, h, n_steps, s, quad, solver).max_gap;
}

template <typename Scalar>
struct EnergyDriftReport {
  Scalar max_deviation = Scalar(0);     // max_k |H(z_k) - H(z_0)|
  Scalar first_half_max = Scalar(0);
  Scalar second_half_max = Scalar(0);

  /// second-half / first-half maximum; near 1 for bounded oscillation.
  Scalar trend_ratio() const {
    return first_half_max > Scalar(0) ? second_half_max / first_half_max : Scalar(0);
  }
};

template <typename Scalar>
EnergyDriftReport<Scalar> energy_drift(const Stepper<Scalar>& step,
                                       const MechanicalSystem<Scalar>& system,
                                       const PhaseState<Scalar>& initial, Scalar h,
                                       std::size_t n_steps) {
  if (!system.has_energy()) throw ConfigError(system.name + ": system provides no energy");
  const Scalar e0 = system.energy_at(initial);
  EnergyDriftReport<Scalar> report;
  PhaseState<Scalar> z = initial;
  for (std::size_t n = 1; n <= n_steps; ++n) {
    try {
      z = step(z, h);
    } catch (const std::exception& e) {
      std::throw_with_nested(StepError(n - 1, e.what()));
    }
    const Scalar deviation = std::abs(system.energy_at(z) - e0);
    report.max_deviation = std::max(report.max_deviation, deviation);
    Scalar& half = 2 * n <= n_steps ? report.first_half_max : report.second_half_max;
    half = std::max(half, deviation);
  }
  return report;
}

template <typename Scalar>
struct StructureReport {
  Scalar symplecticity_defect = Scalar(0);
  Scalar symmetry_defect = Scalar(0);
  Scalar energy_drift = Scalar(0);
  Scalar equivalence_defect = Scalar(0);
};

}  // namespace varint
