// Command-line front end: convergence studies and Galerkin/ASGS comparisons.
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "sdb/sdb.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitSolver = 3;

void print_rows(const sdb::ConvergenceReport& r) {
  std::printf("%-7s %-11s %-12s %-12s %-8s\n", "n_side", "h", "err_c_h1", "err_c_l2", "order");
  for (const auto& row : r.rows) {
    std::printf("%-7zu %-11.5g %-12.5e %-12.5e ", row.n_side, row.h, row.errors.c.h1,
                row.errors.c.l2);
    if (row.order_c_h1) std::printf("%-8.4f\n", *row.order_c_h1);
    else std::printf("%-8s\n", "-");
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stokes-Darcy-Brinkman / transport finite element solver"};
  std::string config_file;
  std::vector<std::pair<std::string, std::string>> flags;
  const auto flag = [&](const char* name, const char* key, const char* help) {
    app.add_option_function<std::string>(
        name, [&flags, key](const std::string& v) { flags.emplace_back(key, v); }, help);
  };
  app.add_option("--config", config_file, "key = value configuration file");
  flag("--case", "case", "nonzero_diff or zero_diff");
  flag("--method", "method", "galerkin or asgs");
  flag("--mesh-sizes", "mesh_sizes", "comma-separated list of n_side");
  flag("--theta", "theta", "0 (Crank-Nicolson) or 1 (backward Euler)");
  flag("--dt", "dt", "fixed time step");
  flag("--dt-rule", "dt_rule", "fixed:<dt>, proportional_h[:f] or proportional_h2[:f]");
  flag("--t-final", "t_final", "final time");
  flag("--out", "output", "convergence CSV path");
  flag("--step-csv", "step_csv", "per-step error CSV path");
  flag("--dump-indicators", "indicators", "per-element estimator CSV path");
  flag("--jobs", "jobs", "mesh sizes run concurrently");
  flag("--workers", "workers", "assembly threads per run");
  std::vector<std::string> sets;
  app.add_option("--set", sets, "extra key=value override (repeatable)");
  bool compare = false, verbose = false;
  app.add_flag("--compare", compare, "run Galerkin and ASGS side by side");
  app.add_flag("-v,--verbose", verbose, "progress lines on stderr");
  CLI11_PARSE(app, argc, argv);

  sdb::RunConfig cfg;
  try {
    if (!config_file.empty()) cfg = sdb::load_config_file(config_file);
    for (const auto& s : sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos) throw sdb::ConfigError("--set expects key=value, got " + s);
      sdb::set_config_value(cfg, s.substr(0, eq), s.substr(eq + 1));
    }
    for (const auto& [k, v] : flags) sdb::set_config_value(cfg, k, v);
    cfg.validate();
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  }

  try {
    if (compare) {
      const auto r = sdb::compare_methods(cfg, verbose);
      std::cout << "galerkin\n";
      print_rows(r.galerkin);
      std::cout << "asgs\n";
      print_rows(r.asgs);
    } else {
      print_rows(sdb::run_study(cfg, verbose));
    }
  } catch (const sdb::SolverError& e) {
    std::cerr << "solver failure: " << e.what() << "\n";
    return kExitSolver;
  } catch (const sdb::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const sdb::InputError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  }
  return 0;
}
