#include <cmath>
#include <limits>

#include <doctest.h>

#include "../oracles.hpp"
#include "varint/galerkin_csprk.hpp"
#include "varint/lagrangian_vi.hpp"
#include "varint/structure_analysis.hpp"

using Eigen::MatrixXd;
using Eigen::VectorXd;
using varint::LagrangianForm;
using varint::LagrangianIntegrator;
using varint::LagrangianVIConfig;
using varint::PhaseState;

namespace {

PhaseState<double> state1(double q, double p) { return {VectorXd::Constant(1, q), VectorXd::Constant(1, p)}; }

varint::SolverOptions<double> tolerance(double tol) {
  varint::SolverOptions<double> options;
  options.tol = tol;
  return options;
}

// Residual of the quadrature-discretized extremality conditions, rebuilt
// from scratch for the Lagrangian form.
double lagrangian_residual(const varint::MechanicalSystem<double>& system, const PhaseState<double>& start,
                           const MatrixXd& qdot_stages, double h, const varint::QuadratureRuled& quad) {
  const int s = static_cast<int>(qdot_stages.cols());
  const varint::LegendreBasisd basis(s);
  MatrixXd r = MatrixXd::Zero(system.dim, s);
  for (int k = 0; k < quad.size(); ++k) {
    const double c = quad.node(k);
    VectorXd v = VectorXd::Zero(system.dim), q = start.q;
    for (int j = 0; j < s; ++j) {
      v += basis.eval(j, c) * qdot_stages.col(j);
      q += h * basis.antiderivative(j, c) * qdot_stages.col(j);
    }
    const VectorXd p = system.lagrangian_grad_qdot(q, v);
    const VectorXd pdot = system.lagrangian_grad_q(q, v);
    for (int i = 0; i < s; ++i) {
      r.col(i) += quad.weight(k) * (p * basis.eval(i, c) - h * ((i == 0 ? 1.0 : 0.0) - basis.antiderivative(i, c)) * pdot);
    }
  }
  r.col(0) -= start.p;
  return r.lpNorm<Eigen::Infinity>();
}

}  // namespace

TEST_CASE("s = 1, m = 1 reduces to the implicit midpoint rule") {
  const auto system = varint::make_harmonic_oscillator(1.0);
  const auto expected = varint::testing::cayley_midpoint(1.0, 0.1, Eigen::Vector2d(1.0, 0.0));
  const auto config = LagrangianVIConfig<double>::with_gauss(1, tolerance(1e-14));
  for (auto form : {LagrangianForm::lagrangian, LagrangianForm::hamiltonian}) {
    const auto result = LagrangianIntegrator<double>(config).step(system, state1(1.0, 0.0), 0.1, form);
    CHECK(std::abs(result.state.q[0] - expected[0]) < 1e-12);
    CHECK(std::abs(result.state.p[0] - expected[1]) < 1e-12);
  }
  CHECK(expected[0] == doctest::Approx(0.99501247).epsilon(1e-8));
  CHECK(expected[1] == doctest::Approx(-0.09975062).epsilon(1e-7));
}

TEST_CASE("free particle moves in a straight line") {
  const auto system = varint::make_free_particle<double>(2);
  PhaseState<double> start{VectorXd(2), VectorXd(2)};
  start.q << 0.3, -1.0;
  start.p << 2.0, 0.5;
  for (int s = 1; s <= 3; ++s) {
    const LagrangianIntegrator<double> integrator(LagrangianVIConfig<double>::with_gauss(s));
    for (auto form : {LagrangianForm::lagrangian, LagrangianForm::hamiltonian}) {
      const auto result = integrator.step(system, start, 0.25, form);
      CHECK((result.state.q - (start.q + 0.25 * start.p)).lpNorm<Eigen::Infinity>() < 1e-15);
      CHECK((result.state.p - start.p).lpNorm<Eigen::Infinity>() == 0.0);
      CHECK(result.iterations <= 1);
    }
  }
}

TEST_CASE("converged stages satisfy the discrete equations") {
  const auto pendulum = varint::make_pendulum();
  const auto pdm = varint::make_position_dependent_mass(0.5);
  for (const auto* system : {&pendulum, &pdm}) {
    for (int s = 1; s <= 3; ++s) {
      for (int m = s; m <= s + 1; ++m) {
        CAPTURE(system->name);
        CAPTURE(s);
        CAPTURE(m);
        const LagrangianVIConfig<double> config{s, varint::gauss_legendre_rule(m), tolerance(1e-12)};
        const LagrangianIntegrator<double> integrator(config);
        const auto start = state1(1.0, 0.5);
        const double h = 0.1;
        const auto result = integrator.step(*system, start, h);
        CHECK(lagrangian_residual(*system, start, result.qdot_stages, h, config.quad) <= 1e-12);
        // Q(0) = q_n and q_{n+1} = Q(1) = q_n + h Qdot_0.
        CHECK((integrator.stage_position(start, result.qdot_stages, h, 0.0) - start.q).norm() == 0.0);
        CHECK((result.state.q - start.q - h * result.qdot_stages.col(0)).lpNorm<Eigen::Infinity>() < 1e-14);
        CHECK((integrator.stage_position(start, result.qdot_stages, h, 1.0) - result.state.q)
                  .lpNorm<Eigen::Infinity>() < 1e-14);
      }
    }
  }
}

TEST_CASE("quadratic kinetic energy: P(c_k) = M Qdot(c_k)") {
  Eigen::MatrixXd mass(2, 2);
  mass << 2.0, 0.3, 0.3, 1.0;
  const auto system = varint::make_quadratic_kinetic<double>(
      "coupled", mass, [](const VectorXd& q) { return 0.25 * q.squaredNorm() * q.squaredNorm(); },
      [](const VectorXd& q) -> VectorXd { return q.squaredNorm() * q; });
  PhaseState<double> start{VectorXd(2), VectorXd(2)};
  start.q << 0.5, -0.2;
  start.p << 0.1, 0.4;
  const auto config = LagrangianVIConfig<double>::with_gauss(3, tolerance(1e-13));
  const LagrangianIntegrator<double> lagrangian(config);
  const auto by_lagrangian = lagrangian.step(system, start, 0.1, LagrangianForm::lagrangian);
  const auto by_hamiltonian = lagrangian.step(system, start, 0.1, LagrangianForm::hamiltonian);
  CHECK((by_lagrangian.state.stacked() - by_hamiltonian.state.stacked()).lpNorm<Eigen::Infinity>() < 1e-13);
  // The Hamiltonian form recovers P from dH/dp(Q, P) = Qdot; here that is M Qdot.
  for (int k = 0; k < config.quad.size(); ++k) {
    const VectorXd v = lagrangian.stage_velocity(by_lagrangian.qdot_stages, config.quad.node(k));
    const VectorXd q = lagrangian.stage_position(start, by_lagrangian.qdot_stages, 0.1, config.quad.node(k));
    CHECK((system.lagrangian_grad_qdot(q, v) - mass * v).lpNorm<Eigen::Infinity>() < 1e-13);
  }
}

TEST_CASE("Hamiltonian form matches the Lagrangian form") {
  const auto harmonic = varint::make_harmonic_oscillator(1.0);
  const auto config = LagrangianVIConfig<double>::with_gauss(1, tolerance(1e-14));
  const auto a = varint::lagrangian_step(harmonic, state1(1.0, 0.0), 0.1, config);
  const auto b = varint::lagrangian_step_hamiltonian_form(harmonic, state1(1.0, 0.0), 0.1, config);
  CHECK((a.state.stacked() - b.state.stacked()).lpNorm<Eigen::Infinity>() < 1e-13);

  // General L: P recovered by a per-node Newton solve.
  const auto pdm = varint::make_position_dependent_mass(0.5);
  for (int s = 1; s <= 3; ++s) {
    const LagrangianVIConfig<double> general{s, varint::gauss_legendre_rule(s + 1), tolerance(1e-13)};
    const auto x = varint::lagrangian_step(pdm, state1(1.0, 1.0), 0.1, general);
    const auto y = varint::lagrangian_step_hamiltonian_form(pdm, state1(1.0, 1.0), 0.1, general);
    CHECK((x.state.stacked() - y.state.stacked()).lpNorm<Eigen::Infinity>() < 1e-12);
  }
}

TEST_CASE("Kepler circular orbit: one step nearly conserves energy") {
  const auto kepler = varint::make_kepler();
  PhaseState<double> start{VectorXd(2), VectorXd(2)};
  start.q << 1.0, 0.0;
  start.p << 0.0, 1.0;
  const auto config = LagrangianVIConfig<double>::with_gauss(3, tolerance(1e-14));
  const auto result = varint::lagrangian_step_hamiltonian_form(kepler, start, 0.01, config);
  CHECK(std::abs(kepler.energy_at(result.state) + 0.5) < 1e-12);
  // Against the exact circular orbit.
  CHECK((result.state.stacked() - varint::kepler_circular_exact(0.01).stacked()).lpNorm<Eigen::Infinity>() < 1e-13);
}

TEST_CASE("agrees with the Galerkin integrator on the pendulum") {
  const auto pendulum = varint::make_pendulum();
  const auto solver = tolerance(1e-13);
  const auto config = LagrangianVIConfig<double>::with_gauss(2, solver);
  const auto lagrangian = varint::lagrangian_step(pendulum, state1(1.0, 0.5), 0.05, config);
  const auto galerkin = varint::GalerkinIntegrator<double>::with_gauss(2, solver).step(pendulum, state1(1.0, 0.5), 0.05);
  CHECK((lagrangian.state.stacked() - galerkin.state.stacked()).lpNorm<Eigen::Infinity>() < 1e-10);
}

TEST_CASE("Newton and fixed-point solvers reach the same step") {
  const auto pendulum = varint::make_pendulum();
  auto newton = tolerance(1e-13);
  newton.kind = varint::SolverKind::newton;
  const auto a = varint::lagrangian_step(pendulum, state1(1.0, 0.5), 0.2, LagrangianVIConfig<double>::with_gauss(3, tolerance(1e-13)));
  const auto b = varint::lagrangian_step(pendulum, state1(1.0, 0.5), 0.2, LagrangianVIConfig<double>::with_gauss(3, newton));
  CHECK((a.state.stacked() - b.state.stacked()).lpNorm<Eigen::Infinity>() < 1e-12);
}

TEST_CASE("step(h) then step(-h) returns to the start") {
  const auto solver = tolerance(1e-13);
  for (const auto& name : varint::benchmark_names()) {
    const auto system = *varint::make_benchmark<double>(name);
    PhaseState<double> start = state1(1.0, 0.5);
    if (name == "kepler") start = varint::kepler_circular_exact(0.0);
    for (int s = 1; s <= 3; ++s) {
      const LagrangianIntegrator<double> integrator(LagrangianVIConfig<double>::with_gauss(s, solver));
      const auto forward = integrator.step(system, start, 0.1);
      const auto back = integrator.step(system, forward.state, -0.1);
      CHECK((back.state.stacked() - start.stacked()).lpNorm<Eigen::Infinity>() < 10 * 1e-13);
    }
  }
}

TEST_CASE("integrate") {
  const auto harmonic = varint::make_harmonic_oscillator(1.0);
  const auto stepper = varint::make_lagrangian_stepper(
      LagrangianIntegrator<double>(LagrangianVIConfig<double>::with_gauss(2, tolerance(1e-13))), harmonic);

  SUBCASE("zero steps") {
    const auto trajectory = varint::integrate(stepper, state1(1.0, 0.0), 0.1, 0);
    REQUIRE(trajectory.size() == 1);
    CHECK(trajectory[0].q[0] == 1.0);
  }
  SUBCASE("forward then backward") {
    const auto forward = varint::integrate(stepper, state1(1.0, 0.0), 0.1, 10);
    REQUIRE(forward.size() == 11);
    const auto back = varint::integrate(stepper, forward.back(), -0.1, 10);
    CHECK((back.back().stacked() - forward.front().stacked()).lpNorm<Eigen::Infinity>() < 1e-10);
  }
  SUBCASE("pendulum energy stays bounded") {
    const auto pendulum = varint::make_pendulum();
    const auto pendulum_stepper = varint::make_lagrangian_stepper(
        LagrangianIntegrator<double>(LagrangianVIConfig<double>::with_gauss(2)), pendulum);
    const auto trajectory = varint::integrate(pendulum_stepper, state1(1.0, 0.5), 0.1, 100);
    double worst = 0.0;
    for (const auto& z : trajectory) worst = std::max(worst, std::abs(pendulum.energy_at(z) - pendulum.energy_at(trajectory[0])));
    CHECK(worst < 1e-6);
  }
}

TEST_CASE("error paths") {
  const auto pendulum = varint::make_pendulum();
  const auto config = LagrangianVIConfig<double>::with_gauss(2);
  const LagrangianIntegrator<double> integrator(config);

  CHECK_THROWS_AS(integrator.step(pendulum, state1(1.0, 0.5), 0.0), varint::ConfigError);
  CHECK_THROWS_AS(integrator.step(pendulum, varint::kepler_circular_exact(0.0), 0.1), varint::DimensionError);
  CHECK_THROWS_AS(LagrangianIntegrator<double>(LagrangianVIConfig<double>{3, varint::gauss_legendre_rule(1), {}}),
                  varint::ConfigError);

  SUBCASE("iteration budget exhausted") {
    varint::SolverOptions<double> starved;
    starved.max_iter = 1;
    const LagrangianIntegrator<double> tight(LagrangianVIConfig<double>::with_gauss(2, starved));
    try {
      tight.step(pendulum, state1(1.0, 0.5), 0.5);
      FAIL("expected ConvergenceError");
    } catch (const varint::ConvergenceError& e) {
      CHECK(e.residual() > starved.tol);
      CHECK(e.iterations() == 1);
    }
  }

  SUBCASE("non-finite forces") {
    auto broken = varint::make_pendulum();
    broken.lagrangian_grad_q = [](const VectorXd&, const VectorXd&) -> VectorXd {
      return VectorXd::Constant(1, std::numeric_limits<double>::quiet_NaN());
    };
    CHECK_THROWS_AS(integrator.step(broken, state1(1.0, 0.5), 0.1), varint::DivergenceError);
  }

  SUBCASE("missing derivatives") {
    auto hamiltonian_only = varint::make_pendulum();
    hamiltonian_only.lagrangian_grad_q = nullptr;
    CHECK_THROWS_AS(integrator.step(hamiltonian_only, state1(1.0, 0.5), 0.1), varint::ConfigError);
    auto lagrangian_only = varint::make_pendulum();
    lagrangian_only.hamiltonian_grad_p = nullptr;
    CHECK_THROWS_AS(integrator.step(lagrangian_only, state1(1.0, 0.5), 0.1, LagrangianForm::hamiltonian),
                    varint::ConfigError);
  }

  SUBCASE("degenerate Legendre transform") {
    auto degenerate = varint::make_position_dependent_mass(0.5);
    degenerate.hamiltonian_grad_p = [](const VectorXd&, const VectorXd&) -> VectorXd { return VectorXd::Ones(1); };
    CHECK_THROWS_AS(integrator.step(degenerate, state1(1.0, 0.5), 0.1, LagrangianForm::hamiltonian),
                    varint::TransformError);
  }

  SUBCASE("failures inside integrate carry the step index") {
    const auto stepper = varint::make_lagrangian_stepper(integrator, pendulum);
    auto failing = [stepper, calls = 0](const PhaseState<double>& z, double h) mutable {
      if (++calls == 4) throw varint::DivergenceError("boom");
      return stepper(z, h);
    };
    try {
      varint::integrate<double>(failing, state1(1.0, 0.5), 0.1, 10);
      FAIL("expected StepError");
    } catch (const varint::StepError& e) {
      CHECK(e.step() == 3);
      CHECK_THROWS_AS(std::rethrow_if_nested(e), varint::DivergenceError);
    }
  }
}
