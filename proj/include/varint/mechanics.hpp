#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "varint/errors.hpp"

namespace varint {

/// A point (q, p) of phase space. Also the numerical flux pair of the
/// Galerkin integrator at an element interface.
template <typename Scalar>
struct PhaseState {
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  Vector q;
  Vector p;

  Eigen::Index dim() const { return q.size(); }

  /// (q, p) stacked into one 2d-vector.
  Vector stacked() const {
    Vector z(2 * dim());
    z << q, p;
    return z;
  }

  static PhaseState from_stacked(const Vector& z) {
    const Eigen::Index d = z.size() / 2;
    return PhaseState{z.head(d), z.tail(d)};
  }
};

/// Mechanical system described through derivatives of its Lagrangian
/// L(q, qdot) and, optionally, of its Hamiltonian H(q, p).
///
/// For quadratic kinetic energy, L = 1/2 qdot^T M qdot - U(q), the mass
/// matrix is stored and H = 1/2 p^T M^{-1} p + U(q).
template <typename Scalar>
struct MechanicalSystem {
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Gradient = std::function<Vector(const Vector&, const Vector&)>;
  using Energy = std::function<Scalar(const Vector&, const Vector&)>;

  std::string name;
  Eigen::Index dim = 0;

  Gradient lagrangian_grad_q;     // (q, qdot) -> dL/dq
  Gradient lagrangian_grad_qdot;  // (q, qdot) -> dL/dqdot
  Gradient hamiltonian_grad_q;    // (q, p) -> dH/dq
  Gradient hamiltonian_grad_p;    // (q, p) -> dH/dp
  Energy energy;                  // (q, p) -> H

  bool quadratic_kinetic = false;
  Matrix mass;  // set iff quadratic_kinetic

  bool has_lagrangian() const {
    return static_cast<bool>(lagrangian_grad_q) && static_cast<bool>(lagrangian_grad_qdot);
  }
  bool has_hamiltonian() const {
    return static_cast<bool>(hamiltonian_grad_q) && static_cast<bool>(hamiltonian_grad_p);
  }
  bool has_energy() const { return static_cast<bool>(energy); }

  Scalar energy_at(const PhaseState<Scalar>& z) const {
    if (!has_energy()) throw ConfigError(name + ": system provides no energy");
    return energy(z.q, z.p);
  }
};

namespace detail {

template <typename Scalar>
void require_finite_mass(const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& mass) {
  if (mass.rows() != mass.cols() || mass.rows() < 1) {
    throw DimensionError("mass matrix must be square and non-empty");
  }
  if (!mass.allFinite()) throw ConfigError("mass matrix has non-finite entries");
}

}  // namespace detail

/// L = 1/2 qdot^T M qdot - U(q) with M symmetric and invertible.
template <typename Scalar>
MechanicalSystem<Scalar> make_quadratic_kinetic(
    std::string name, const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& mass,
    std::function<Scalar(const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>&)> potential,
    std::function<Eigen::Matrix<Scalar, Eigen::Dynamic, 1>(
        const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>&)>
        potential_grad) {
  using System = MechanicalSystem<Scalar>;
  using Vector = typename System::Vector;
  using Matrix = typename System::Matrix;

  detail::require_finite_mass<Scalar>(mass);
  const Scalar scale = std::max(Scalar(1), mass.cwiseAbs().maxCoeff());
  if ((mass - mass.transpose()).cwiseAbs().maxCoeff() > Scalar(1e-14) * scale) {
    throw ConfigError(name + ": mass matrix is not symmetric");
  }
  Eigen::FullPivLU<Matrix> lu(mass);
  if (!lu.isInvertible()) throw ConfigError(name + ": mass matrix is singular");
  const Matrix inverse = lu.inverse();
  // Solve-based check: M (M^{-1} e_j) reproduces e_j.
  const Scalar inverse_defect =
      (mass * inverse - Matrix::Identity(mass.rows(), mass.cols())).cwiseAbs().maxCoeff();
  if (!(inverse_defect < Scalar(1e-8))) {
    throw ConfigError(name + ": mass matrix is numerically singular");
  }

  System system;
  system.name = std::move(name);
  system.dim = mass.rows();
  system.quadratic_kinetic = true;
  system.mass = mass;
  system.lagrangian_grad_q = [potential_grad](const Vector& q, const Vector&) -> Vector {
    return -potential_grad(q);
  };
  system.lagrangian_grad_qdot = [mass](const Vector&, const Vector& qdot) -> Vector {
    return mass * qdot;
  };
  system.hamiltonian_grad_q = [potential_grad](const Vector& q, const Vector&) -> Vector {
    return potential_grad(q);
  };
  system.hamiltonian_grad_p = [inverse](const Vector&, const Vector& p) -> Vector {
    return inverse * p;
  };
  system.energy = [inverse, potential](const Vector& q, const Vector& p) -> Scalar {
    return Scalar(0.5) * p.dot(inverse * p) + potential(q);
  };
  return system;
}

/// H = 1/2 p^2 + 1/2 omega^2 q^2.
template <typename Scalar = double>
MechanicalSystem<Scalar> make_harmonic_oscillator(Scalar omega = Scalar(1)) {
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  if (!(omega > Scalar(0)) || !std::isfinite(static_cast<double>(omega))) {
    throw ConfigError("harmonic oscillator: omega must be positive and finite");
  }
  const Scalar w2 = omega * omega;
  return make_quadratic_kinetic<Scalar>(
      "harmonic", Matrix::Identity(1, 1),
      [w2](const Vector& q) { return Scalar(0.5) * w2 * q.squaredNorm(); },
      [w2](const Vector& q) -> Vector { return w2 * q; });
}

/// H = 1/2 p^2 + 1 - cos q.
template <typename Scalar = double>
MechanicalSystem<Scalar> make_pendulum() {
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  return make_quadratic_kinetic<Scalar>(
      "pendulum", Matrix::Identity(1, 1),
      [](const Vector& q) { return Scalar(1) - std::cos(q[0]); },
      [](const Vector& q) -> Vector { return q.array().sin().matrix(); });
}

inline constexpr double kKeplerSingularityRadius = 1e-12;

/// Planar Kepler problem, H = 1/2 |p|^2 - 1/|q|.
template <typename Scalar = double>
MechanicalSystem<Scalar> make_kepler() {
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  auto radius = [](const Vector& q) {
    const Scalar r = q.norm();
    if (!(r >= Scalar(kKeplerSingularityRadius))) {
      throw SingularityError("kepler: |q| below singularity radius");
    }
    return r;
  };
  return make_quadratic_kinetic<Scalar>(
      "kepler", Matrix::Identity(2, 2),
      [radius](const Vector& q) { return -Scalar(1) / radius(q); },
      [radius](const Vector& q) -> Vector {
        const Scalar r = radius(q);
        return q / (r * r * r);
      });
}

/// Free particle in d dimensions: U = 0, M = I.
template <typename Scalar = double>
MechanicalSystem<Scalar> make_free_particle(Eigen::Index d = 1) {
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  if (d < 1) throw ConfigError("free particle: dimension must be positive");
  return make_quadratic_kinetic<Scalar>(
      "free", Matrix::Identity(d, d), [](const Vector&) { return Scalar(0); },
      [](const Vector& q) -> Vector { return Vector::Zero(q.size()); });
}

/// L = 1/2 (1 + eps sin q) qdot^2 - 1/2 q^2. The kinetic energy is not
/// quadratic with a constant mass, so P(tau) is not a polynomial.
template <typename Scalar = double>
MechanicalSystem<Scalar> make_position_dependent_mass(Scalar epsilon) {
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  if (!(std::abs(epsilon) < Scalar(1))) {
    throw ConfigError("position-dependent mass: |epsilon| must be < 1");
  }
  auto mass_factor = [epsilon](const Vector& q) {
    const Scalar m = Scalar(1) + epsilon * std::sin(q[0]);
    if (!(m > Scalar(0))) throw ConfigError("position-dependent mass: mass factor <= 0");
    return m;
  };

  MechanicalSystem<Scalar> system;
  system.name = "pdm";
  system.dim = 1;
  system.quadratic_kinetic = false;
  system.lagrangian_grad_q = [epsilon, mass_factor](const Vector& q, const Vector& qdot) -> Vector {
    mass_factor(q);
    Vector out(1);
    out[0] = Scalar(0.5) * epsilon * std::cos(q[0]) * qdot[0] * qdot[0] - q[0];
    return out;
  };
  system.lagrangian_grad_qdot = [mass_factor](const Vector& q, const Vector& qdot) -> Vector {
    return mass_factor(q) * qdot;
  };
  system.hamiltonian_grad_q = [epsilon, mass_factor](const Vector& q, const Vector& p) -> Vector {
    const Scalar m = mass_factor(q);
    Vector out(1);
    out[0] = -Scalar(0.5) * p[0] * p[0] * epsilon * std::cos(q[0]) / (m * m) + q[0];
    return out;
  };
  system.hamiltonian_grad_p = [mass_factor](const Vector& q, const Vector& p) -> Vector {
    return p / mass_factor(q);
  };
  system.energy = [mass_factor](const Vector& q, const Vector& p) -> Scalar {
    return Scalar(0.5) * p[0] * p[0] / mass_factor(q) + Scalar(0.5) * q[0] * q[0];
  };
  return system;
}

/// Names accepted by make_benchmark.
inline std::vector<std::string> benchmark_names() {
  return {"harmonic", "pendulum", "kepler", "pdm"};
}

/// Benchmark registry: harmonic (omega = 1), pendulum, kepler, pdm
/// (epsilon = 0.5). Unknown names yield std::nullopt.
template <typename Scalar = double>
std::optional<MechanicalSystem<Scalar>> make_benchmark(std::string_view name) {
  if (name == "harmonic") return make_harmonic_oscillator<Scalar>(Scalar(1));
  if (name == "pendulum") return make_pendulum<Scalar>();
  if (name == "kepler") return make_kepler<Scalar>();
  if (name == "pdm") return make_position_dependent_mass<Scalar>(Scalar(0.5));
  return std::nullopt;
}

}  // namespace varint
