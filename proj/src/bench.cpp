#include "varint/bench.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include <json.hpp>

namespace varint::bench {

namespace {

std::string trim(const std::string& text) {
  const auto first = text.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = text.find_last_not_of(" \t\r");
  return text.substr(first, last - first + 1);
}

double to_double(const std::string& key, const std::string& value) {
  std::size_t used = 0;
  double parsed = 0.0;
  try {
    parsed = std::stod(value, &used);
  } catch (const std::exception&) {
    throw UsageError("'" + key + "' expects a number, got '" + value + "'");
  }
  if (used != value.size()) throw UsageError("'" + key + "' expects a number, got '" + value + "'");
  return parsed;
}

long long to_integer(const std::string& key, const std::string& value) {
  std::size_t used = 0;
  long long parsed = 0;
  try {
    parsed = std::stoll(value, &used);
  } catch (const std::exception&) {
    throw UsageError("'" + key + "' expects an integer, got '" + value + "'");
  }
  if (used != value.size()) throw UsageError("'" + key + "' expects an integer, got '" + value + "'");
  return parsed;
}

std::string joined_problem_names() {
  std::string names;
  for (const auto& name : benchmark_names()) names += (names.empty() ? "" : ", ") + name;
  return names;
}

Eigen::VectorXd as_vector(std::initializer_list<double> values) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(values.size()));
  Eigen::Index i = 0;
  for (double x : values) v[i++] = x;
  return v;
}

}  // namespace

KeyValues parse_key_values(std::istream& in) {
  KeyValues values;
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw UsageError("config line " + std::to_string(number) + ": expected key = value");
    }
    values[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return values;
}

KeyValues load_key_values(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config file '" + path + "'");
  return parse_key_values(in);
}

IntegratorKind parse_integrator(const std::string& name) {
  if (name == "lagrangian") return IntegratorKind::lagrangian;
  if (name == "galerkin") return IntegratorKind::galerkin;
  if (name == "galerkin-swapped") return IntegratorKind::galerkin_swapped;
  throw UsageError("unknown integrator '" + name +
                   "' (valid: lagrangian, galerkin, galerkin-swapped)");
}

std::string integrator_name(IntegratorKind kind) {
  switch (kind) {
    case IntegratorKind::lagrangian: return "lagrangian";
    case IntegratorKind::galerkin: return "galerkin";
    case IntegratorKind::galerkin_swapped: return "galerkin-swapped";
  }
  return "unknown";
}

OutputFormat parse_format(const std::string& name) {
  if (name == "csv") return OutputFormat::csv;
  if (name == "json") return OutputFormat::json;
  throw UsageError("unknown format '" + name + "' (valid: csv, json)");
}

void apply_key_values(const KeyValues& values, ExperimentConfig& config) {
  for (const auto& [key, value] : values) {
    if (key == "problem") {
      config.problem = value;
    } else if (key == "integrator") {
      config.integrator = parse_integrator(value);
    } else if (key == "s") {
      config.s = static_cast<int>(to_integer(key, value));
    } else if (key == "quad-nodes") {
      config.quad_nodes = static_cast<int>(to_integer(key, value));
    } else if (key == "h") {
      config.h = to_double(key, value);
    } else if (key == "steps") {
      config.n_steps = to_integer(key, value);
    } else if (key == "tol") {
      config.tol = to_double(key, value);
    } else if (key == "max-iter") {
      config.max_iter = static_cast<int>(to_integer(key, value));
    } else if (key == "out") {
      config.out = value;
    } else if (key == "format") {
      config.format = parse_format(value);
    } else if (key == "threshold") {
      config.threshold = to_double(key, value);
    } else if (key == "t-end") {
      config.t_end = to_double(key, value);
    } else if (key == "h-list") {
      config.h_list.clear();
      std::stringstream items(value);
      std::string item;
      while (std::getline(items, item, ',')) config.h_list.push_back(to_double(key, trim(item)));
    } else {
      throw UsageError("unknown config key '" + key + "'");
    }
  }
}

void validate(const ExperimentConfig& config) {
  const auto names = benchmark_names();
  if (std::find(names.begin(), names.end(), config.problem) == names.end()) {
    throw UsageError("unknown problem '" + config.problem + "' (valid: " + joined_problem_names() + ")");
  }
  if (config.s < 1 || config.s > kMaxBasisSize) {
    throw UsageError("--s must lie in [1, " + std::to_string(kMaxBasisSize) + "]");
  }
  if (config.quad_nodes != 0 && (config.quad_nodes < config.s || config.quad_nodes > kMaxQuadratureNodes)) {
    throw UsageError("--quad-nodes must lie in [s, " + std::to_string(kMaxQuadratureNodes) + "]");
  }
  if (!std::isfinite(config.h) || config.h == 0.0) throw UsageError("--h must be finite and non-zero");
  if (config.n_steps < 0) throw UsageError("--steps must be non-negative");
  if (!(config.tol > 0.0)) throw UsageError("--tol must be positive");
  if (config.max_iter < 1) throw UsageError("--max-iter must be positive");
  if (!(config.threshold >= 0.0)) throw UsageError("--threshold must be non-negative");
  if (!(config.t_end > 0.0)) throw UsageError("--t-end must be positive");
  if (config.h_list.size() < 3) throw UsageError("--h-list needs at least 3 step sizes");
  for (double h : config.h_list) {
    if (!(h > 0.0)) throw UsageError("--h-list entries must be positive");
  }
}

MechanicalSystem<double> make_problem(const std::string& name) {
  auto system = make_benchmark<double>(name);
  if (!system) {
    throw UsageError("unknown problem '" + name + "' (valid: " + joined_problem_names() + ")");
  }
  return *system;
}

PhaseState<double> default_initial_state(const std::string& name) {
  if (name == "harmonic") return {as_vector({1.0}), as_vector({0.0})};
  if (name == "pendulum") return {as_vector({1.0}), as_vector({0.5})};
  if (name == "kepler") return {as_vector({1.0, 0.0}), as_vector({0.0, 1.0})};
  if (name == "pdm") return {as_vector({1.0}), as_vector({1.0})};
  throw UsageError("unknown problem '" + name + "' (valid: " + joined_problem_names() + ")");
}

int effective_quad_nodes(const ExperimentConfig& config, bool for_compare) {
  if (config.quad_nodes != 0) return config.quad_nodes;
  // With m = s nodes the two families coincide for every regular
  // Lagrangian, so comparisons default to one extra node.
  return for_compare ? config.s + 1 : config.s;
}

SolverOptions<double> solver_options(const ExperimentConfig& config) {
  SolverOptions<double> options;
  options.tol = config.tol;
  options.max_iter = config.max_iter;
  return options;
}

Stepper<double> make_stepper(const ExperimentConfig& config, const MechanicalSystem<double>& system,
                             IntegratorKind kind, int quad_nodes) {
  const auto quad = gauss_legendre_rule<double>(quad_nodes);
  const auto solver = solver_options(config);
  switch (kind) {
    case IntegratorKind::lagrangian:
      return make_lagrangian_stepper(
          LagrangianIntegrator<double>(LagrangianVIConfig<double>{config.s, quad, solver}), system);
    case IntegratorKind::galerkin:
      return make_galerkin_stepper(GalerkinIntegrator<double>(config.s, quad, solver, false), system);
    case IntegratorKind::galerkin_swapped:
      return make_galerkin_stepper(GalerkinIntegrator<double>(config.s, quad, solver, true), system);
  }
  throw UsageError("unknown integrator");
}

std::string format_double(double value) {
  char buffer[32];
  std::snprintf(buffer, sizeof buffer, "%.17g", value);
  return buffer;
}

void write_trajectory(std::ostream& out, OutputFormat format, const MechanicalSystem<double>& system,
                      const Trajectory<double>& trajectory, double h) {
  const Eigen::Index d = system.dim;
  if (format == OutputFormat::json) {
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t k = 0; k < trajectory.size(); ++k) {
      const auto& z = trajectory[k];
      nlohmann::json row{{"step", k},
                         {"t", static_cast<double>(k) * h},
                         {"q", std::vector<double>(z.q.data(), z.q.data() + d)},
                         {"p", std::vector<double>(z.p.data(), z.p.data() + d)}};
      if (system.has_energy()) row["energy"] = system.energy_at(z);
      rows.push_back(std::move(row));
    }
    out << nlohmann::json{{"problem", system.name}, {"h", h}, {"trajectory", rows}}.dump(2) << '\n';
    return;
  }
  out << "step,t";
  for (Eigen::Index i = 0; i < d; ++i) out << ",q" << i;
  for (Eigen::Index i = 0; i < d; ++i) out << ",p" << i;
  if (system.has_energy()) out << ",energy";
  out << '\n';
  for (std::size_t k = 0; k < trajectory.size(); ++k) {
    const auto& z = trajectory[k];
    out << k << ',' << format_double(static_cast<double>(k) * h);
    for (Eigen::Index i = 0; i < d; ++i) out << ',' << format_double(z.q[i]);
    for (Eigen::Index i = 0; i < d; ++i) out << ',' << format_double(z.p[i]);
    if (system.has_energy()) out << ',' << format_double(system.energy_at(z));
    out << '\n';
  }
}

Trajectory<double> cmd_run(const ExperimentConfig& config, std::ostream& out) {
  validate(config);
  const auto system = make_problem(config.problem);
  const auto step = make_stepper(config, system, config.integrator, effective_quad_nodes(config));
  const auto trajectory = integrate(step, default_initial_state(config.problem), config.h,
                                    static_cast<std::size_t>(config.n_steps));
  write_trajectory(out, config.format, system, trajectory, config.h);
  return trajectory;
}

CompareOutcome cmd_compare(const ExperimentConfig& config, std::ostream& out, std::ostream& log) {
  validate(config);
  const auto system = make_problem(config.problem);
  const int m = effective_quad_nodes(config, true);
  CompareOutcome outcome;
  outcome.report = equivalence_report(system, default_initial_state(config.problem), config.h,
                                      static_cast<std::size_t>(config.n_steps), config.s,
                                      gauss_legendre_rule<double>(m), solver_options(config));
  outcome.pass = outcome.report.max_gap < config.threshold;
  const std::string note =
      outcome.pass ? "equivalent"
                   : (system.quadratic_kinetic
                          ? "not equivalent"
                          : "not equivalent (expected for non-quadratic kinetic energy)");

  if (config.format == OutputFormat::json) {
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t k = 0; k < outcome.report.gaps.size(); ++k) {
      rows.push_back({{"step", k}, {"t", static_cast<double>(k) * config.h}, {"gap", outcome.report.gaps[k]}});
    }
    out << nlohmann::json{{"problem", config.problem},
                          {"s", config.s},
                          {"quad_nodes", m},
                          {"max_defect", outcome.report.max_gap},
                          {"threshold", config.threshold},
                          {"pass", outcome.pass},
                          {"note", note},
                          {"gaps", rows}}
               .dump(2)
        << '\n';
  } else {
    out << "step,t,gap\n";
    for (std::size_t k = 0; k < outcome.report.gaps.size(); ++k) {
      out << k << ',' << format_double(static_cast<double>(k) * config.h) << ','
          << format_double(outcome.report.gaps[k]) << '\n';
    }
  }
  log << (outcome.pass ? "PASS" : "FAIL") << " problem=" << config.problem << " s=" << config.s
      << " m=" << m << " max_defect=" << format_double(outcome.report.max_gap)
      << " threshold=" << format_double(config.threshold) << " : " << note << '\n';
  return outcome;
}

ConvergenceReport<double> cmd_converge(const ExperimentConfig& config, std::ostream& out) {
  validate(config);
  const auto system = make_problem(config.problem);
  const auto initial = default_initial_state(config.problem);
  const auto step = make_stepper(config, system, config.integrator, effective_quad_nodes(config));

  PhaseState<double> reference;
  if (config.problem == "harmonic") {
    reference = harmonic_exact(1.0, initial, config.t_end);
  } else if (config.problem == "kepler") {
    reference = kepler_circular_exact(config.t_end);
  } else {
    // s = 3 Galerkin run at 1/100 of the finest step.
    const double finest = *std::min_element(config.h_list.begin(), config.h_list.end());
    const double h_ref = finest / 100.0;
    SolverOptions<double> tight;
    tight.tol = 1e-14;
    tight.max_iter = config.max_iter;
    const auto ref_step = make_galerkin_stepper(GalerkinIntegrator<double>::with_gauss(3, tight), system);
    const auto n = static_cast<std::size_t>(std::llround(config.t_end / h_ref));
    reference = integrate(ref_step, initial, h_ref, n).back();
  }

  const auto report =
      convergence_order(step, initial, config.h_list, config.t_end, reference, 2 * config.s);
  if (config.format == OutputFormat::json) {
    out << nlohmann::json{{"problem", config.problem},
                          {"integrator", integrator_name(config.integrator)},
                          {"s", config.s},
                          {"t_end", config.t_end},
                          {"step_sizes", report.step_sizes},
                          {"errors", report.errors},
                          {"slope", report.slope},
                          {"target_order", report.target_order},
                          {"non_monotone", report.non_monotone}}
               .dump(2)
        << '\n';
  } else {
    out << "h,error\n";
    for (std::size_t i = 0; i < report.errors.size(); ++i) {
      out << format_double(report.step_sizes[i]) << ',' << format_double(report.errors[i]) << '\n';
    }
    out << "# slope=" << format_double(report.slope) << " target=" << report.target_order
        << (report.non_monotone ? " non_monotone" : "") << '\n';
  }
  return report;
}

StructureReport<double> cmd_structure(const ExperimentConfig& config, std::ostream& out) {
  validate(config);
  const auto system = make_problem(config.problem);
  const auto initial = default_initial_state(config.problem);
  const int m = effective_quad_nodes(config);
  const auto step = make_stepper(config, system, config.integrator, m);

  ExperimentConfig tight = config;
  tight.tol = std::min(config.tol, 1e-13);
  const auto fd_step = make_stepper(tight, system, config.integrator, m);

  StructureReport<double> report;
  report.symplecticity_defect = symplecticity_defect(fd_step, initial, config.h, 1e-5);
  report.symmetry_defect = symmetry_defect(fd_step, initial, config.h);
  report.energy_drift =
      energy_drift(step, system, initial, config.h, static_cast<std::size_t>(config.n_steps)).max_deviation;
  report.equivalence_defect =
      equivalence_defect(system, initial, config.h, static_cast<std::size_t>(config.n_steps), config.s,
                         gauss_legendre_rule<double>(m), solver_options(config));

  if (config.format == OutputFormat::json) {
    out << nlohmann::json{{"problem", config.problem},
                          {"integrator", integrator_name(config.integrator)},
                          {"s", config.s},
                          {"quad_nodes", m},
                          {"h", config.h},
                          {"steps", config.n_steps},
                          {"symplecticity_defect", report.symplecticity_defect},
                          {"symmetry_defect", report.symmetry_defect},
                          {"energy_drift", report.energy_drift},
                          {"equivalence_defect", report.equivalence_defect}}
               .dump(2)
        << '\n';
  } else {
    out << "metric,value\n"
        << "symplecticity_defect," << format_double(report.symplecticity_defect) << '\n'
        << "symmetry_defect," << format_double(report.symmetry_defect) << '\n'
        << "energy_drift," << format_double(report.energy_drift) << '\n'
        << "equivalence_defect," << format_double(report.equivalence_defect) << '\n';
  }
  return report;
}

PRKTableau<double> cmd_tableau(const ExperimentConfig& config, std::ostream& out) {
  if (config.s < 1 || config.s > kMaxBasisSize) {
    throw UsageError("--s must lie in [1, " + std::to_string(kMaxBasisSize) + "]");
  }
  const int m = effective_quad_nodes(config);
  if (m < config.s || m > kMaxQuadratureNodes) {
    throw UsageError("--quad-nodes must lie in [s, " + std::to_string(kMaxQuadratureNodes) + "]");
  }
  const bool swapped = config.integrator == IntegratorKind::galerkin_swapped;
  const auto tableau = discretize(build_csprk<double>(config.s, swapped), gauss_legendre_rule<double>(m));

  auto vector_json = [](const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
  auto matrix_json = [&](const Eigen::MatrixXd& a) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index i = 0; i < a.rows(); ++i) rows.push_back(vector_json(a.row(i).transpose()));
    return rows;
  };
  if (config.format == OutputFormat::json) {
    out << nlohmann::json{{"s", config.s},
                          {"quad_nodes", m},
                          {"swapped", swapped},
                          {"c", vector_json(tableau.c)},
                          {"a", matrix_json(tableau.a)},
                          {"a_hat", matrix_json(tableau.a_hat)},
                          {"b", vector_json(tableau.b)},
                          {"b_hat", vector_json(tableau.b_hat)}}
               .dump(2)
        << '\n';
    return tableau;
  }
  auto write_vector = [&](const char* name, const Eigen::VectorXd& v) {
    out << name;
    for (Eigen::Index i = 0; i < v.size(); ++i) out << ',' << format_double(v[i]);
    out << '\n';
  };
  auto write_matrix = [&](const char* name, const Eigen::MatrixXd& a) {
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
      out << name << '[' << i << ']';
      for (Eigen::Index j = 0; j < a.cols(); ++j) out << ',' << format_double(a(i, j));
      out << '\n';
    }
  };
  write_vector("c", tableau.c);
  write_matrix("a", tableau.a);
  write_matrix("a_hat", tableau.a_hat);
  write_vector("b", tableau.b);
  write_vector("b_hat", tableau.b_hat);
  return tableau;
}

}  // namespace varint::bench
