#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "wassdyn/dynamics.hpp"
#include "wassdyn/error.hpp"
#include "wassdyn/experiments.hpp"
#include "wassdyn/invariant.hpp"
#include "wassdyn/measure.hpp"
#include "wassdyn/noise.hpp"
#include "wassdyn/transport.hpp"

namespace {

using namespace wassdyn;

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

int cmd_dist(const std::string& mu_path, const std::string& nu_path, double p, const std::string& method,
             const std::string& plan_path) {
  const DiscreteMeasure mu = load_measure(mu_path);
  const DiscreteMeasure nu = load_measure(nu_path);
  if (!plan_path.empty() && method != "exact") throw ValidationError("--plan requires --method exact");
  double d = 0.0;
  if (method == "exact") {
    const ExactResult r = wasserstein_exact(mu, nu, p);
    d = r.distance;
    if (!plan_path.empty()) {
      std::ofstream out(plan_path);
      if (!out) throw ValidationError("cannot write plan '" + plan_path + "'");
      out << "i,j,gamma\n";
      for (std::size_t i = 0; i < r.plan.rows; ++i) {
        for (std::size_t j = 0; j < r.plan.cols; ++j) {
          if (r.plan.at(i, j) > 0.0) out << i << ',' << j << ',' << fmt(r.plan.at(i, j)) << '\n';
        }
      }
    }
  } else if (method == "1d") {
    d = wasserstein_1d(mu, nu, p);
  } else {
    if (p != 1.0) throw ValidationError("--method dual computes w_1 only; use --p 1");
    d = kr_dual(mu, nu).value;
  }
  std::cout << fmt(d) << '\n';
  return 0;
}

// Builtin names first, then a bare component expression such as "x/2 + 1".
MapSpec map_from_cli(const std::string& text) {
  try {
    return parse_map(text);
  } catch (const ValidationError&) {
    try {
      return MapSpec::expression(text);
    } catch (const ParseError&) {
    }
    throw;
  }
}

int cmd_push(const std::string& mu_path, const std::string& map, const std::string& out_path) {
  save_measure(out_path, push_forward(load_measure(mu_path), map_from_cli(map)));
  return 0;
}

int cmd_stationary(const std::string& kernel, const std::string& mu0_path, double p, double tol, std::size_t max_iter,
                   std::size_t cap, const std::string& out_path) {
  const MWOperator op{parse_kernel(kernel), cap, p};
  const StationaryResult r = find_stationary(op, load_measure(mu0_path), tol, max_iter);
  const nlohmann::json j = {{"kernel", op.kernel.describe()},
                            {"p", p},
                            {"tol", tol},
                            {"max_iter", max_iter},
                            {"compression_cap", cap},
                            {"residual", r.residual},
                            {"residual_p", r.residual_p},
                            {"iterations", r.iterations},
                            {"converged", r.converged},
                            {"compression_cost_total", r.compression_cost_total},
                            {"measure", measure_to_json(r.measure)}};
  std::ofstream out(out_path);
  if (!out) throw ValidationError("cannot write '" + out_path + "'");
  out << j.dump(2) << '\n';
  std::cout << "residual " << fmt(r.residual) << " after " << r.iterations << " applications"
            << (r.converged ? "" : " (not converged)") << '\n';
  return r.converged ? 0 : 1;
}

int cmd_experiment(const std::string& config_path, const std::string& dir) {
  worker_count();
  const ExperimentConfig cfg = load_config(config_path);
  const ExperimentReport rep = run_experiment(cfg);
  write_report(rep, dir, cfg.report_name);
  for (const Verdict& v : rep.verdicts) {
    std::cout << (v.pass ? "PASS " : "FAIL ") << v.criterion << ' ' << v.id << " value=" << fmt(v.value)
              << " threshold=" << fmt(v.threshold) << '\n';
  }
  std::cout << (rep.passed() ? "all verdicts pass" : "some verdicts failed") << '\n';
  return rep.passed() ? 0 : 1;
}

void list_builtins() {
  std::cout << "maps:\n";
  for (const std::string& m : builtin_maps()) std::cout << "  " << m << '\n';
  std::cout << "kernels:\n";
  for (const std::string& k : builtin_kernels()) std::cout << "  " << k << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Wasserstein dynamics toolkit"};
  app.require_subcommand(0, 1);
  bool builtins = false;
  app.add_flag("--list-builtins", builtins, "List builtin maps and kernel forms");

  std::string mu, nu, method = "exact", plan;
  double p = 1.0;
  CLI::App* dist = app.add_subcommand("dist", "Wasserstein distance between two measure files");
  dist->add_option("--mu", mu, "First measure file")->required();
  dist->add_option("--nu", nu, "Second measure file")->required();
  dist->add_option("--p", p, "Order p >= 1")->required();
  dist->add_option("--method", method, "exact, 1d or dual")->check(CLI::IsMember({"exact", "1d", "dual"}));
  dist->add_option("--plan", plan, "Write the optimal plan as CSV");

  std::string map, out;
  CLI::App* push = app.add_subcommand("push", "Push a measure forward under a map");
  push->add_option("--mu", mu, "Measure file")->required();
  push->add_option("--map", map, "Builtin map name, expr:... or a bare expression")->required();
  push->add_option("-o,--output", out, "Output measure file")->required();

  std::string kernel;
  double tol = 1e-3;
  std::size_t max_iter = 1000, cap = 256;
  CLI::App* stat = app.add_subcommand("stationary", "Search for a stationary measure");
  stat->add_option("--kernel", kernel, "Kernel spec")->required();
  stat->add_option("--mu0", mu, "Starting measure file")->required();
  stat->add_option("--p", p, "Operator order");
  stat->add_option("--tol", tol, "Residual tolerance in w_1");
  stat->add_option("--max-iter", max_iter, "Operator application budget");
  stat->add_option("--cap", cap, "Support compression cap (0 disables)");
  stat->add_option("-o,--output", out, "Result JSON")->required();

  std::string config;
  CLI::App* exp = app.add_subcommand("experiment", "Run a JSON-configured experiment");
  exp->add_option("--config", config, "Experiment config")->required();
  exp->add_option("-o,--output", out, "Output directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (builtins) {
      list_builtins();
      return 0;
    }
    if (dist->parsed()) return cmd_dist(mu, nu, p, method, plan);
    if (push->parsed()) return cmd_push(mu, map, out);
    if (stat->parsed()) return cmd_stationary(kernel, mu, p, tol, max_iter, cap, out);
    if (exp->parsed()) return cmd_experiment(config, out);
    std::cout << app.help();
    return 2;
  } catch (const wassdyn::Error& e) {
    std::cerr << "wassdyn: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "wassdyn: " << e.what() << '\n';
    return 2;
  }
}
