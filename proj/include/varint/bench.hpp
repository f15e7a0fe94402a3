#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "varint/galerkin_csprk.hpp"
#include "varint/mechanics.hpp"
#include "varint/structure_analysis.hpp"

namespace varint::bench {

/// Bad flags, unknown names, out-of-range values. Maps to exit status 2.
class UsageError : public Error {
 public:
  using Error::Error;
};

enum class IntegratorKind { lagrangian, galerkin, galerkin_swapped };
enum class OutputFormat { csv, json };

struct ExperimentConfig {
  std::string problem = "harmonic";
  IntegratorKind integrator = IntegratorKind::galerkin;
  int s = 2;
  int quad_nodes = 0;  // 0: command default (s, or s + 1 for compare)
  double h = 0.1;
  long long n_steps = 100;
  double tol = 1e-12;
  int max_iter = 100;
  std::string out;  // empty: standard output
  OutputFormat format = OutputFormat::csv;
  double threshold = 1e-10;
  double t_end = 1.0;
  std::vector<double> h_list{0.2, 0.1, 0.05, 0.025};
};

using KeyValues = std::map<std::string, std::string>;

/// Parses a flat `key = value` document; `#` starts a comment.
KeyValues parse_key_values(std::istream& in);
KeyValues load_key_values(const std::string& path);

/// Applies recognised keys to `config`. Keys use the long flag names
/// without dashes (problem, integrator, s, quad-nodes, h, steps, tol,
/// max-iter, out, format, threshold, t-end, h-list).
void apply_key_values(const KeyValues& values, ExperimentConfig& config);

IntegratorKind parse_integrator(const std::string& name);
std::string integrator_name(IntegratorKind kind);
OutputFormat parse_format(const std::string& name);

/// Throws UsageError unless every field is in range and names resolve.
void validate(const ExperimentConfig& config);

MechanicalSystem<double> make_problem(const std::string& name);
PhaseState<double> default_initial_state(const std::string& name);

int effective_quad_nodes(const ExperimentConfig& config, bool for_compare = false);
SolverOptions<double> solver_options(const ExperimentConfig& config);
Stepper<double> make_stepper(const ExperimentConfig& config, const MechanicalSystem<double>& system,
                             IntegratorKind kind, int quad_nodes);

/// 17 significant digits; parses back to the identical double.
std::string format_double(double value);

Trajectory<double> cmd_run(const ExperimentConfig& config, std::ostream& out);

struct CompareOutcome {
  EquivalenceReport<double> report;
  bool pass = false;
};
CompareOutcome cmd_compare(const ExperimentConfig& config, std::ostream& out, std::ostream& log);

ConvergenceReport<double> cmd_converge(const ExperimentConfig& config, std::ostream& out);
StructureReport<double> cmd_structure(const ExperimentConfig& config, std::ostream& out);
PRKTableau<double> cmd_tableau(const ExperimentConfig& config, std::ostream& out);

void write_trajectory(std::ostream& out, OutputFormat format, const MechanicalSystem<double>& system,
                      const Trajectory<double>& trajectory, double h);

}  // namespace varint::bench
