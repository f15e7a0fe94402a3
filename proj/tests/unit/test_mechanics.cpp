#include <cmath>
#include <numbers>
#include <string>

#include <doctest.h>

#include "../oracles.hpp"
#include "varint/mechanics.hpp"

using Eigen::VectorXd;
using varint::testing::uniform;
using varint::testing::uniform_vector;

namespace {

VectorXd vec(std::initializer_list<double> values) {
  VectorXd v(static_cast<Eigen::Index>(values.size()));
  Eigen::Index i = 0;
  for (double x : values) v[i++] = x;
  return v;
}

// Random (q, p) away from the Kepler singularity.
varint::PhaseState<double> random_state(const varint::MechanicalSystem<double>& system) {
  VectorXd q = uniform_vector(system.dim, -1.5, 1.5);
  if (system.name == "kepler") q = q.normalized() * uniform(0.5, 2.0);
  return {q, uniform_vector(system.dim, -1.5, 1.5)};
}

// Hand-written L(q, qdot) for each registered benchmark.
double scalar_lagrangian(const std::string& name, const VectorXd& q, const VectorXd& v) {
  if (name == "harmonic") return 0.5 * v.squaredNorm() - 0.5 * q.squaredNorm();
  if (name == "pendulum") return 0.5 * v.squaredNorm() - (1.0 - std::cos(q[0]));
  if (name == "kepler") return 0.5 * v.squaredNorm() + 1.0 / q.norm();
  if (name == "pdm") return 0.5 * (1.0 + 0.5 * std::sin(q[0])) * v[0] * v[0] - 0.5 * q[0] * q[0];
  FAIL("no oracle Lagrangian for " << name);
  return 0.0;
}

}  // namespace

TEST_CASE("harmonic oscillator") {
  const auto one = varint::make_harmonic_oscillator(1.0);
  CHECK(one.dim == 1);
  CHECK(one.quadratic_kinetic);
  CHECK(one.energy(vec({1.0}), vec({0.0})) == doctest::Approx(0.5));
  CHECK(one.hamiltonian_grad_q(vec({1.0}), vec({0.0}))[0] == doctest::Approx(1.0));
  const auto two = varint::make_harmonic_oscillator(2.0);
  CHECK(two.energy(vec({1.0}), vec({2.0})) == doctest::Approx(4.0));
  CHECK_THROWS_AS(varint::make_harmonic_oscillator(0.0), varint::ConfigError);
  CHECK_THROWS_AS(varint::make_harmonic_oscillator(-1.0), varint::ConfigError);
}

TEST_CASE("pendulum") {
  const auto pendulum = varint::make_pendulum();
  const double half_pi = std::numbers::pi / 2.0;
  CHECK(pendulum.energy(vec({0.0}), vec({0.0})) == 0.0);
  CHECK(pendulum.energy(vec({half_pi}), vec({0.0})) == doctest::Approx(1.0));
  CHECK(pendulum.lagrangian_grad_q(vec({half_pi}), vec({0.0}))[0] == doctest::Approx(-1.0));
}

TEST_CASE("kepler") {
  const auto kepler = varint::make_kepler();
  CHECK(kepler.dim == 2);
  CHECK(kepler.energy(vec({1.0, 0.0}), vec({0.0, 1.0})) == doctest::Approx(-0.5));
  const VectorXd grad = kepler.hamiltonian_grad_q(vec({1.0, 0.0}), vec({0.0, 0.0}));
  CHECK(grad[0] == doctest::Approx(1.0));
  CHECK(grad[1] == doctest::Approx(0.0));
  CHECK_THROWS_AS(kepler.energy(vec({0.0, 0.0}), vec({0.3, 0.1})), varint::SingularityError);
  CHECK_THROWS_AS(kepler.hamiltonian_grad_q(vec({0.0, 0.0}), vec({0.3, 0.1})), varint::SingularityError);
  CHECK_THROWS_AS(kepler.lagrangian_grad_q(vec({1e-13, 0.0}), vec({0.0, 0.0})), varint::SingularityError);
}

TEST_CASE("position-dependent mass") {
  const auto flat = varint::make_position_dependent_mass(0.0);
  CHECK(flat.lagrangian_grad_qdot(vec({0.7}), vec({2.0}))[0] == doctest::Approx(2.0));
  const auto pdm = varint::make_position_dependent_mass(0.5);
  const double half_pi = std::numbers::pi / 2.0;
  CHECK_FALSE(pdm.quadratic_kinetic);
  CHECK(pdm.lagrangian_grad_qdot(vec({half_pi}), vec({1.0}))[0] == doctest::Approx(1.5));
  CHECK(pdm.hamiltonian_grad_p(vec({half_pi}), vec({3.0}))[0] == doctest::Approx(2.0));
  CHECK_THROWS_AS(varint::make_position_dependent_mass(1.0), varint::ConfigError);
  CHECK_THROWS_AS(varint::make_position_dependent_mass(-1.2), varint::ConfigError);
}

TEST_CASE("quadratic-kinetic constructor validates the mass matrix") {
  auto zero_potential = [](const VectorXd&) { return 0.0; };
  auto zero_gradient = [](const VectorXd& q) -> VectorXd { return VectorXd::Zero(q.size()); };
  Eigen::MatrixXd asymmetric(2, 2);
  asymmetric << 2.0, 1.0, 0.0, 2.0;
  CHECK_THROWS_AS(varint::make_quadratic_kinetic<double>("bad", asymmetric, zero_potential, zero_gradient),
                  varint::ConfigError);
  Eigen::MatrixXd singular(2, 2);
  singular << 1.0, 1.0, 1.0, 1.0;
  CHECK_THROWS_AS(varint::make_quadratic_kinetic<double>("bad", singular, zero_potential, zero_gradient),
                  varint::ConfigError);
  Eigen::MatrixXd spd(2, 2);
  spd << 2.0, 0.5, 0.5, 1.0;
  const auto system = varint::make_quadratic_kinetic<double>("spd", spd, zero_potential, zero_gradient);
  const VectorXd p = vec({1.0, -2.0});
  CHECK((spd * system.hamiltonian_grad_p(vec({0.0, 0.0}), p) - p).norm() < 1e-14);
}

TEST_CASE("registry") {
  for (const auto& name : varint::benchmark_names()) {
    const auto system = varint::make_benchmark<double>(name);
    REQUIRE(system.has_value());
    CHECK(system->name == name);
    CHECK(system->has_lagrangian());
    CHECK(system->has_hamiltonian());
    CHECK(system->has_energy());
  }
  CHECK_FALSE(varint::make_benchmark<double>("foo").has_value());
}

TEST_CASE("Legendre duality: dL/dqdot(q, dH/dp(q, p)) = p") {
  for (const auto& name : varint::benchmark_names()) {
    CAPTURE(name);
    const auto system = *varint::make_benchmark<double>(name);
    for (int trial = 0; trial < 100; ++trial) {
      const auto z = random_state(system);
      const VectorXd velocity = system.hamiltonian_grad_p(z.q, z.p);
      CHECK((system.lagrangian_grad_qdot(z.q, velocity) - z.p).lpNorm<Eigen::Infinity>() < 1e-10);
      // dL/dq = -dH/dq along the transform
      CHECK((system.lagrangian_grad_q(z.q, velocity) + system.hamiltonian_grad_q(z.q, z.p))
                .lpNorm<Eigen::Infinity>() < 1e-10);
    }
  }
}

TEST_CASE("energy is conserved along the Hamiltonian vector field") {
  for (const auto& name : varint::benchmark_names()) {
    CAPTURE(name);
    const auto system = *varint::make_benchmark<double>(name);
    for (int trial = 0; trial < 50; ++trial) {
      const auto z = random_state(system);
      const VectorXd f = system.hamiltonian_grad_p(z.q, z.p);
      const VectorXd g = -system.hamiltonian_grad_q(z.q, z.p);
      const double rate = system.hamiltonian_grad_q(z.q, z.p).dot(f) + system.hamiltonian_grad_p(z.q, z.p).dot(g);
      CHECK(std::abs(rate) < 1e-8);
    }
  }
}

TEST_CASE("analytic gradients match finite differences") {
  auto close = [](const VectorXd& analytic, const VectorXd& numeric) {
    const double scale = std::max(1.0, analytic.lpNorm<Eigen::Infinity>());
    return (analytic - numeric).lpNorm<Eigen::Infinity>() <= 1e-5 * scale;
  };
  for (const auto& name : varint::benchmark_names()) {
    CAPTURE(name);
    const auto system = *varint::make_benchmark<double>(name);
    for (int trial = 0; trial < 20; ++trial) {
      const auto z = random_state(system);
      const VectorXd qdot = system.hamiltonian_grad_p(z.q, z.p);
      CHECK(close(system.hamiltonian_grad_q(z.q, z.p),
                  varint::testing::fd_gradient([&](const VectorXd& q) { return system.energy(q, z.p); }, z.q)));
      CHECK(close(system.hamiltonian_grad_p(z.q, z.p),
                  varint::testing::fd_gradient([&](const VectorXd& p) { return system.energy(z.q, p); }, z.p)));
      auto lagrangian = [&](const VectorXd& q, const VectorXd& v) { return scalar_lagrangian(name, q, v); };
      CHECK(close(system.lagrangian_grad_q(z.q, qdot),
                  varint::testing::fd_gradient([&](const VectorXd& q) { return lagrangian(q, qdot); }, z.q)));
      CHECK(close(system.lagrangian_grad_qdot(z.q, qdot),
                  varint::testing::fd_gradient([&](const VectorXd& v) { return lagrangian(z.q, v); }, qdot)));
    }
  }
}
