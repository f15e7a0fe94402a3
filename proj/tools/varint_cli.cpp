// Command-line driver: run, compare, converge, structure, tableau.
//
// Settings are resolved as defaults < config file (VARINT_CONFIG) < flags.
// Exit status: 0 success (including an expected FAIL from compare),
// 1 numerical failure, 2 usage error.

#include <cstdlib>
#include <exception>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "varint/bench.hpp"

namespace {

using varint::bench::ExperimentConfig;

struct Flags {
  std::optional<std::string> problem;
  std::optional<std::string> integrator;
  std::optional<int> s;
  std::optional<int> quad_nodes;
  std::optional<double> h;
  std::optional<long long> steps;
  std::optional<double> tol;
  std::optional<int> max_iter;
  std::optional<std::string> out;
  std::optional<std::string> format;
  std::optional<double> threshold;
  std::optional<double> t_end;
  std::optional<std::vector<double>> h_list;
};

void add_common_flags(CLI::App& command, Flags& flags) {
  command.add_option("--problem", flags.problem, "harmonic | pendulum | kepler | pdm");
  command.add_option("--integrator", flags.integrator, "lagrangian | galerkin | galerkin-swapped");
  command.add_option("--s", flags.s, "polynomial degree parameter (order 2s)");
  command.add_option("--quad-nodes", flags.quad_nodes, "Gauss-Legendre node count m >= s");
  command.add_option("--h", flags.h, "step size");
  command.add_option("--steps", flags.steps, "number of steps");
  command.add_option("--tol", flags.tol, "stage solver tolerance");
  command.add_option("--max-iter", flags.max_iter, "stage solver iteration limit");
  command.add_option("--out", flags.out, "output file (default: stdout)");
  command.add_option("--format", flags.format, "csv | json");
  command.add_option("--threshold", flags.threshold, "compare: PASS when max defect is below");
  command.add_option("--t-end", flags.t_end, "converge: final time");
  command.add_option("--h-list", flags.h_list, "converge: step sizes")->delimiter(',');
}

ExperimentConfig resolve(const Flags& flags) {
  ExperimentConfig config;
  if (const char* path = std::getenv("VARINT_CONFIG"); path != nullptr && *path != '\0') {
    varint::bench::apply_key_values(varint::bench::load_key_values(path), config);
  }
  if (flags.problem) config.problem = *flags.problem;
  if (flags.integrator) config.integrator = varint::bench::parse_integrator(*flags.integrator);
  if (flags.s) config.s = *flags.s;
  if (flags.quad_nodes) config.quad_nodes = *flags.quad_nodes;
  if (flags.h) config.h = *flags.h;
  if (flags.steps) config.n_steps = *flags.steps;
  if (flags.tol) config.tol = *flags.tol;
  if (flags.max_iter) config.max_iter = *flags.max_iter;
  if (flags.out) config.out = *flags.out;
  if (flags.format) config.format = varint::bench::parse_format(*flags.format);
  if (flags.threshold) config.threshold = *flags.threshold;
  if (flags.t_end) config.t_end = *flags.t_end;
  if (flags.h_list) config.h_list = *flags.h_list;
  return config;
}

void print_nested(const std::exception& e, int depth = 0) {
  std::cerr << std::string(2 * depth, ' ') << e.what() << '\n';
  try {
    std::rethrow_if_nested(e);
  } catch (const std::exception& inner) {
    print_nested(inner, depth + 1);
  } catch (...) {
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Variational integrators: Lagrangian and Galerkin (continuous-stage PRK) families"};
  app.require_subcommand(1);
  app.set_help_flag("--help", "print this help message and exit");
  Flags flags;
  CLI::App* run = app.add_subcommand("run", "integrate and write the trajectory");
  CLI::App* compare = app.add_subcommand("compare", "Lagrangian vs Galerkin trajectory gap");
  CLI::App* converge = app.add_subcommand("converge", "observed convergence order");
  CLI::App* structure = app.add_subcommand("structure", "symplecticity, symmetry, energy drift");
  CLI::App* tableau = app.add_subcommand("tableau", "print the discretized PRK tableau");
  for (CLI::App* command : {run, compare, converge, structure, tableau}) add_common_flags(*command, flags);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    ExperimentConfig config = resolve(flags);
    std::ofstream file;
    if (!config.out.empty()) {
      file.open(config.out);
      if (!file) throw varint::bench::UsageError("cannot open output file '" + config.out + "'");
    }
    std::ostream& out = config.out.empty() ? std::cout : file;

    if (run->parsed()) {
      varint::bench::cmd_run(config, out);
    } else if (compare->parsed()) {
      varint::bench::cmd_compare(config, out, std::cerr);
    } else if (converge->parsed()) {
      const auto report = varint::bench::cmd_converge(config, out);
      std::cerr << "slope " << varint::bench::format_double(report.slope) << " (target "
                << report.target_order << ")\n";
    } else if (structure->parsed()) {
      varint::bench::cmd_structure(config, out);
    } else if (tableau->parsed()) {
      varint::bench::cmd_tableau(config, out);
    }
    return 0;
  } catch (const varint::bench::UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const varint::ConfigError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "numerical failure: ";
    print_nested(e);
    return 1;
  }
}
