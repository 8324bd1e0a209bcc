// Command-line front end: simulate, converge, self-converge, oracle-check,
// gradient-check, list-schemes.

#include <rgpe/cfqm.hpp>
#include <rgpe/config.hpp>
#include <rgpe/harness.hpp>
#include <rgpe/oracle.hpp>
#include <rgpe/splitting.hpp>

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace rgpe;

namespace {

enum ExitCode { ok = 0, check_failed = 1, validation = 2, runtime = 3, divergence = 4 };

struct Options {
  std::string config_path;
  std::string positional_config;
  std::string methods;
  std::string steps;
  std::string snapshot_times;
  std::string out;
  double theta = 0.0;
  int dim = 0;
  int workers = -1;
  bool theta_set = false;
};

RunConfig load_config(const Options& o) {
  RunConfig c;
  if (o.dim != 0)
    apply_dimension_defaults(c, o.dim);
  const std::string path = !o.config_path.empty() ? o.config_path : o.positional_config;
  if (!path.empty())
    c = parse_config_file(path, c);
  if (o.dim != 0 && c.dim != o.dim)
    apply_dimension_defaults(c, o.dim);
  if (!o.methods.empty())
    set_config_value(c, "methods", o.methods);
  if (!o.steps.empty())
    set_config_value(c, "steps", o.steps);
  if (o.theta_set)
    c.theta = o.theta;
  if (o.workers >= 0)
    c.workers = o.workers;
  if (!o.snapshot_times.empty())
    set_config_value(c, "snapshot_times", o.snapshot_times);
  if (!o.out.empty())
    c.out = o.out;
  else if (c.out.empty())
    if (const char* env = std::getenv("RGPE_OUT"))
      c.out = env;
  if (c.out.empty())
    c.out = "rgpe-out";
  c.validate();
  return c;
}

fs::path prepare_output(const RunConfig& c) {
  const fs::path dir(c.out);
  fs::create_directories(dir);
  std::ofstream echo(dir / "effective.cfg");
  if (!echo)
    throw RuntimeError("cannot write " + (dir / "effective.cfg").string());
  echo << format_config(c);
  return dir;
}

ReferenceSettings reference_settings(const RunConfig& c) {
  return {c.reference_method, c.reference_refine, c.reference_tolerance};
}

int cmd_list_schemes() {
  std::printf("%-8s %-6s %-7s %-6s %s\n", "cfqm", "order", "stages", "nodes", "checksum");
  for (const auto& name : cfqm_names()) {
    const auto& s = cfqm_registry(name);
    std::printf("%-8s %-6d %-7d %-6d %s\n", s.name.c_str(), s.order, s.stages(), s.node_count(),
                cfqm_checksum(s).c_str());
  }
  std::printf("%-8s %-6d %-7d %-6d %s\n", "bbk", 6, 4, 3, "-");
  std::printf("\n%-8s %-6s %-7s %s\n", "split", "order", "flows", "checksum");
  for (const auto& name : splitting_names()) {
    const auto& s = splitting_registry(name);
    std::printf("%-8s %-6d %-7d %s\n", s.name.c_str(), s.order, s.kinetic_flows(),
                splitting_checksum(s).c_str());
  }
  std::printf("\n%-14s %-6s %s\n", "method", "order", "pairs/step");
  for (const auto& d : method_descriptors()) {
    const auto m = Method::parse(d);
    std::printf("%-14s %-6d %llu\n", d.c_str(), m.order(),
                static_cast<unsigned long long>(m.transform_pairs_per_step()));
  }
  return ok;
}

int cmd_simulate(const RunConfig& c) {
  const auto dir = prepare_output(c);
  const auto problem = Problem::from_config(c);
  const int n = *std::max_element(c.steps.begin(), c.steps.end());
  const auto& method = c.methods.front();
  SnapshotRequest req{c.snapshot_times, dir, c.snapshot_quantity, c.lab_frame,
                      c.display_half_width};
  if (req.times.empty())
    req.times = {c.T};
  const auto run = simulate(problem, Method::parse(method), n, req);
  write_field_dump(dir / "final.rgpe", run.field);
  std::printf("method %s, %d steps, h = %.6g\n", method.c_str(), n, (c.T - c.t0) / n);
  std::printf("transform pairs %llu, wall %.1f ms\n",
              static_cast<unsigned long long>(run.report.transform_pairs_used),
              std::chrono::duration<double, std::milli>(run.report.wall_time).count());
  std::printf("norm %.15g -> %.15g (relative drift %.3e)\n", run.initial_norm, run.final_norm,
              run.norm_drift());
  if (c.dim == 2) {
    const auto v = find_vortices(run.field, c.display_half_width);
    std::printf("phase singularities in [-%g, %g]^2: %zu\n", c.display_half_width,
                c.display_half_width, v.size());
  }
  for (const auto& p : run.snapshots)
    std::printf("wrote %s\n", p.string().c_str());
  return ok;
}

int cmd_converge(const RunConfig& c) {
  const auto dir = prepare_output(c);
  const auto problem = Problem::from_config(c);
  const auto study =
      convergence_study(problem, c.methods, c.steps, reference_settings(c), c.workers);
  write_csv(dir / "convergence.csv", study.rows);
  std::printf("reference %s at %d steps, self-check %.3e\n", c.reference_method.c_str(),
              study.reference.n_steps, study.reference.self_check);
  write_csv(std::cout, study.rows);
  for (const auto& m : c.methods) {
    std::vector<double> hs, es;
    for (const auto& r : study.rows)
      if (r.method == m && r.l2_error >= 1e-9 && r.l2_error <= 1e-3) {
        hs.push_back(r.h);
        es.push_back(r.l2_error);
      }
    try {
      std::printf("%-14s observed order %.3f\n", m.c_str(), oracle::observed_order(hs, es));
    } catch (const ValidationError&) {
      std::printf("%-14s observed order n/a (fewer than 3 points with error in [1e-9, 1e-3])\n",
                  m.c_str());
    }
  }
  std::printf("wrote %s\n", (dir / "convergence.csv").string().c_str());
  return ok;
}

int cmd_self_converge(const RunConfig& c) {
  const auto dir = prepare_output(c);
  const auto problem = Problem::from_config(c);
  std::vector<ConvergenceRow> all;
  for (const auto& m : c.methods) {
    const auto sc = self_convergence(problem, m, c.steps, c.workers);
    all.insert(all.end(), sc.rows.begin(), sc.rows.end());
    std::printf("%-14s self-convergence order %.3f\n", m.c_str(), sc.slope);
  }
  write_csv(dir / "self_convergence.csv", all);
  write_csv(std::cout, all);
  std::printf("wrote %s\n", (dir / "self_convergence.csv").string().c_str());
  return ok;
}

struct CheckTable {
  int failures = 0;
  void row(const std::string& name, double measured, double bound, bool pass) {
    std::printf("%-52s %12.4e %12.4e  %s\n", name.c_str(), measured, bound, pass ? "PASS" : "FAIL");
    failures += pass ? 0 : 1;
  }
};

int cmd_oracle_check(const RunConfig& c) {
  using namespace rgpe::oracle;
  CheckTable table;
  std::printf("%-52s %12s %12s  %s\n", "check", "measured", "bound", "result");

  // Magnus truncation order on a random Hermitian problem with commuting B.
  std::mt19937_64 rng(c.seed);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  auto p = random_problem(16, c.seed);
  Vector u0(16);
  for (auto& v : u0)
    v = {unif(rng), unif(rng)};
  u0.normalize();
  std::vector<double> hs, es;
  for (double h : {0.4, 0.2, 0.1}) {
    const Vector ref = midpoint_propagate(p, u0, 0.25, h);
    hs.push_back(h);
    es.push_back((magnus6_propagator(p, 0.25, h) * u0 - ref).norm());
  }
  const double slope = observed_order(hs, es);
  table.row("Omega6 local error slope (16-dim random problem)", slope, 7.0,
            std::abs(slope - 7.0) <= 0.3);

  // Commuting B samples: the [2 3] term vanishes.
  const auto grid8 = make_grid(2, {4.0, 4.0}, {8, 8});
  const auto model = c.model();
  const auto gp = grid_problem(grid8, model.schedule, model.trap);
  const auto a = alphas(gp, 0.3, 0.5);
  const double diff = (magnus_omega6(a) - magnus_omega6_modified(a)).cwiseAbs().maxCoeff();
  table.row("Omega6 vs modified Omega6 (diagonal B)", diff, 1e-13, diff < 1e-13);

  // Unitarity of the dense reference.
  const auto field8 = initial_gaussian(grid8, std::vector<double>{1.1, 0.9});
  const Vector v0 = to_vector(field8);
  const Vector v1 = dense_reference(gp, v0, 0.0, 0.5, 16);
  const double unit = std::abs(v1.norm() - v0.norm()) / v0.norm();
  table.row("dense reference norm drift", unit, 1e-12, unit < 1e-12);

  // Classical transform.
  const auto tc = classical_transform_check({1.0, 0.0}, {0.0, 1.0}, model.schedule,
                                            {{model.trap.gamma[0], model.trap.gamma[1]}, 0.0},
                                            c.t0, c.T);
  table.row("rotating-frame transform deviation", tc.max_deviation, 1e-8,
            tc.max_deviation < 1e-8);
  table.row("transformed Hamiltonian mismatch", tc.max_energy_mismatch, 1e-8,
            tc.max_energy_mismatch < 1e-8);
  return table.failures == 0 ? ok : check_failed;
}

int cmd_gradient_check(const RunConfig& c) {
  const auto model = c.model();
  const double step = 1e-5;
  const double worst = oracle::gradient_check(model.trap, model.schedule, c.dim, 1000, step, c.seed);
  const int dim = c.dim;
  std::printf("gradient vs central differences (step %.0e, 1000 samples): max relative error %.3e "
              "(bound 1e-6) %s\n",
              step, worst, worst < 1e-6 ? "PASS" : "FAIL");
  double wt = 0.0;
  if (dim == 2) {
    TrapParams iso{{model.trap.gamma[0], model.trap.gamma[0]}, 0.0};
    const auto w = modified_potential(c.grid(), model.schedule, iso, 0.7, 0.25);
    for (double v : w.values)
      wt = std::max(wt, std::abs(v));
    std::printf("gradient correction for isotropic trap: max %.3e %s\n", wt,
                wt == 0.0 ? "PASS" : "FAIL");
  }
  return worst < 1e-6 && wt == 0.0 ? ok : check_failed;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Rotating Gross-Pitaevskii solver with commutator-free quasi-Magnus integrators"};
  app.require_subcommand(0, 1);
  Options o;
  bool list_flag = false;
  app.add_flag("--list-schemes", list_flag, "Print the scheme registry and exit");

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("config_file", o.positional_config, "Config file (same as --config)");
    sub->add_option("--config", o.config_path, "Config file");
    sub->add_option("--methods", o.methods, "Comma-separated method descriptors");
    sub->add_option("--steps", o.steps, "Step count or comma-separated step counts");
    sub->add_option("--theta", o.theta, "Cubic coupling constant")
        ->each([&](const std::string&) { o.theta_set = true; });
    sub->add_option("--dim", o.dim, "Space dimension")->check(CLI::IsMember({2, 3}));
    sub->add_option("--out", o.out, "Output directory (default: $RGPE_OUT or ./rgpe-out)");
    sub->add_option("--workers", o.workers, "Concurrent runs (0: hardware concurrency)")
        ->check(CLI::NonNegativeNumber);
    sub->add_option("--snapshot-times", o.snapshot_times, "Comma-separated snapshot times");
  };
  auto* simulate_cmd = app.add_subcommand("simulate", "Evolve one trajectory with snapshots");
  auto* converge_cmd = app.add_subcommand("converge", "Convergence study against a reference");
  auto* self_cmd = app.add_subcommand("self-converge", "Self-convergence study");
  auto* oracle_cmd = app.add_subcommand("oracle-check", "Dense-matrix and classical checks");
  auto* gradient_cmd = app.add_subcommand("gradient-check", "Analytic vs finite-difference gradients");
  auto* list_cmd = app.add_subcommand("list-schemes", "Print the scheme registry");
  for (auto* sub : {simulate_cmd, converge_cmd, self_cmd, oracle_cmd, gradient_cmd})
    add_common(sub);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? ok : validation;
  }

  try {
    if (list_flag || list_cmd->parsed())
      return cmd_list_schemes();
    if (app.get_subcommands().empty()) {
      std::cout << app.help();
      return validation;
    }
    const RunConfig c = load_config(o);
    if (simulate_cmd->parsed())
      return cmd_simulate(c);
    if (converge_cmd->parsed())
      return cmd_converge(c);
    if (self_cmd->parsed())
      return cmd_self_converge(c);
    if (oracle_cmd->parsed())
      return cmd_oracle_check(c);
    if (gradient_cmd->parsed())
      return cmd_gradient_check(c);
  } catch (const ValidationError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return validation;
  } catch (const DivergenceError& e) {
    std::fprintf(stderr, "diverged: %s\n", e.what());
    return divergence;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "runtime error: %s\n", e.what());
    return runtime;
  }
  return ok;
}
