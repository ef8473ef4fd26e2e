// Command-line front end: scenario-driven experiments with CSV output.

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "cd2d/experiments.hpp"

namespace fs = std::filesystem;
using namespace cd2d;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitNoConverge = 2;

struct GlobalOpts {
  std::string config_path;
  std::string out_dir = ".";
  std::optional<std::uint64_t> seed;
  int jobs = 1;
};

ScenarioConfig resolve_config(const GlobalOpts& g) {
  ScenarioConfig cfg =
      g.config_path.empty() ? default_scenario() : load_config(g.config_path);
  if (g.seed) cfg.seed = *g.seed;
  cfg.validate();
  return cfg;
}

void write_file(const fs::path& path, const std::string& content) {
  fs::create_directories(path.parent_path().empty() ? "."
                                                    : path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << content;
  std::fprintf(stderr, "wrote %s\n", path.string().c_str());
}

// "40:120:20" or a single value.
std::vector<double> parse_range(const std::string& spec) {
  std::vector<double> vals;
  const auto c1 = spec.find(':');
  if (c1 == std::string::npos) {
    vals.push_back(std::stod(spec));
    return vals;
  }
  const auto c2 = spec.find(':', c1 + 1);
  if (c2 == std::string::npos)
    throw std::runtime_error("range spec must be lo:hi:step");
  const double lo = std::stod(spec.substr(0, c1));
  const double hi = std::stod(spec.substr(c1 + 1, c2 - c1 - 1));
  const double step = std::stod(spec.substr(c2 + 1));
  if (step <= 0 || hi < lo) throw std::runtime_error("bad range spec");
  for (double v = lo; v <= hi + 1e-9; v += step) vals.push_back(v);
  return vals;
}

int cmd_phase_plane(const GlobalOpts& g, int grid,
                    const std::vector<std::string>& starts) {
  const ScenarioConfig cfg = resolve_config(g);
  PhasePlaneOptions opts;
  opts.grid = grid;
  if (!starts.empty()) {
    opts.starts.clear();
    for (const auto& s : starts) {
      const auto comma = s.find(',');
      if (comma == std::string::npos)
        throw std::runtime_error("start must be 'pi_a,pi_b'");
      opts.starts.push_back(
          {std::stod(s.substr(0, comma)), std::stod(s.substr(comma + 1))});
    }
  }
  const PhasePlaneResult r = phase_plane(cfg, opts);
  write_file(fs::path(g.out_dir) / "phase_field.csv",
             phase_plane_field_csv(cfg, r));
  for (std::size_t i = 0; i < r.trajectories.size(); ++i) {
    write_file(fs::path(g.out_dir) /
                   ("phase_trajectory_" + std::to_string(i) + ".csv"),
               trajectory_csv(cfg, r.trajectories[i]));
    const auto& t = r.trajectories[i];
    std::printf("trajectory %zu: (%.3f, %.3f) -> (%.4f, %.4f)%s\n", i,
                t.start[0], t.start[1], t.terminal[0], t.terminal[1],
                t.converged ? "" : " [step budget reached]");
    if (!t.converged) return kExitNoConverge;
  }
  return kExitOk;
}

int cmd_best_response(const GlobalOpts& g, double p_min, double p_max,
                      int steps) {
  const ScenarioConfig cfg = resolve_config(g);
  const BestResponseResultSet r = best_response_curves(cfg, p_min, p_max,
                                                       steps);
  write_file(fs::path(g.out_dir) / "best_response.csv",
             best_response_csv(cfg, r));
  std::printf("nash prices: (%.6f, %.6f) after %d iterations\n", r.nash.p1,
              r.nash.p2, r.nash.iterations);
  return r.nash.converged ? kExitOk : kExitNoConverge;
}

int cmd_imes(const GlobalOpts& g) {
  const ScenarioConfig cfg = resolve_config(g);
  const ImesRunResult r = run_imes_experiment(cfg);
  const std::string header =
      "# schema: imes_trace v1\n" + config_echo(cfg);
  write_file(fs::path(g.out_dir) / "imes_trace.csv", r.trace.to_csv(header));
  std::printf("final prices:");
  for (double p : r.trace.final_prices) std::printf(" %.6f", p);
  std::printf("\nfinal offers:");
  for (double w : r.trace.final_omegas) std::printf(" %.6f", w);
  std::printf("\nattachment counts:");
  for (int c : r.trace.final_counts) std::printf(" %d", c);
  if (cfg.mmds.size() == 2)
    std::printf("\nfixed-point oracle: (%.6f, %.6f), closed-form share %.3f",
                r.oracle.p1, r.oracle.p2, r.closed_form_share1);
  std::printf("\nrounds: %d (%s)\n", r.trace.rounds,
              r.trace.converged ? "converged" : "budget exhausted");
  return r.trace.converged ? kExitOk : kExitNoConverge;
}

int cmd_delay(const GlobalOpts& g, const std::string& omds,
              const std::string& mmds, const std::string& areas, int seeds,
              const std::string& policy) {
  const ScenarioConfig cfg = resolve_config(g);
  SweepSpec spec;
  spec.seeds = seeds;
  spec.seed = cfg.seed;
  spec.n_omd = cfg.sim.n_omd;
  spec.n_mmd = cfg.sim.n_mmd;
  spec.width = cfg.sim.area_width;
  spec.height = cfg.sim.area_height;
  spec.comm_range = cfg.sim.comm_range;

  int chosen = 0;
  if (!omds.empty()) {
    spec.param = SweepParam::omd_count;
    spec.values = parse_range(omds);
    ++chosen;
  }
  if (!mmds.empty()) {
    spec.param = SweepParam::mmd_count;
    spec.values = parse_range(mmds);
    ++chosen;
  }
  if (!areas.empty()) {
    spec.param = SweepParam::area;
    spec.values = parse_range(areas);
    ++chosen;
  }
  if (chosen != 1)
    throw std::runtime_error(
        "exactly one of --omds / --mmds / --areas is required");
  if (policy == "imes")
    spec.policies = {Policy::imes};
  else if (policy == "rand")
    spec.policies = {Policy::rand};
  else if (policy == "both")
    spec.policies = {Policy::imes, Policy::rand};
  else
    throw std::runtime_error("policy must be imes, rand or both");

  const DelayScenario scenario = cfg.delay_scenario();
  const auto cells = delay_sweep(spec, scenario, g.jobs);
  const std::string header = "# schema: delay_sweep v1\n" + config_echo(cfg) +
                             "# sweep_param: " +
                             std::string(to_string(spec.param)) + "\n";
  write_file(fs::path(g.out_dir) / "delay_sweep.csv",
             sweep_to_csv(cells, header));

  for (const auto& s : sweep_plot_series(cells)) {
    std::string body = "# schema: plot_series v1\n" + config_echo(cfg);
    body += "x,y\n";
    char buf[64];
    for (const auto& p : s.points) {
      std::snprintf(buf, sizeof(buf), "%.10g,%.10g\n", p[0], p[1]);
      body += buf;
    }
    write_file(fs::path(g.out_dir) / ("delay_" + s.name + ".csv"), body);
  }

  const Topology topo =
      generate_topology(spec.width, spec.height, spec.n_omd, spec.n_mmd,
                        spec.comm_range, cfg.seed);
  write_file(fs::path(g.out_dir) / "topology.csv",
             topo.to_csv("# schema: topology v1\n" + config_echo(cfg)));
  return kExitOk;
}

int cmd_nash(const GlobalOpts& g) {
  const ScenarioConfig cfg = resolve_config(g);
  const NashReport rep = nash_report(cfg);
  std::printf("equilibrium prices: (%.6f, %.6f) in %d iterations\n",
              rep.prices.p1, rep.prices.p2, rep.prices.iterations);
  std::printf("buyers on relay 1 at equilibrium: %.4f of %d\n", rep.share1,
              cfg.total_omds());
  std::printf("mutual bandwidth best responses at configured prices: "
              "(%.4f, %.4f)%s\n",
              rep.bandwidth.omega1, rep.bandwidth.omega2,
              rep.bandwidth.converged ? "" : " [not converged]");
  return rep.prices.converged && rep.bandwidth.converged ? kExitOk
                                                         : kExitNoConverge;
}

int cmd_check(const GlobalOpts& g) {
  const ScenarioConfig cfg = resolve_config(g);
  const CheckReport rep = run_checks(cfg);
  std::printf("response-slope range: (%.6g, %.6g), contraction modulus %.6g\n",
              rep.supermodularity.min_slope, rep.supermodularity.max_slope,
              rep.supermodularity.max_lambda);
  std::printf("lambert-w: max residual %.3g, w(0) error %.3g, w(e) error %.3g\n",
              rep.lambertw_max_residual, rep.lambertw_w0_error,
              rep.lambertw_we_error);
  std::printf("first-order conditions: exp-form %.3g, base-2 diagnostic %.3g\n",
              rep.foc_exp_residual, rep.foc_base2_residual);
  std::printf("%s\n", rep.ok ? "all checks passed" : "CHECK FAILURE");
  return rep.ok ? kExitOk : kExitNoConverge;
}

int cmd_validate(const std::vector<std::string>& files) {
  bool ok = true;
  for (const auto& f : files) {
    const std::string err = validate_csv_file(f);
    if (err.empty()) {
      std::printf("%s: ok\n", f.c_str());
    } else {
      std::printf("%s: %s\n", f.c_str(), err.c_str());
      ok = false;
    }
  }
  return ok ? kExitOk : kExitUsage;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bandwidth-relay allocation games for multi-homing "
               "cooperative D2D networks"};
  app.require_subcommand(1);
  app.fallthrough();

  GlobalOpts g;
  app.add_option("-c,--config", g.config_path, "Scenario config file");
  app.add_option("-o,--out", g.out_dir, "Output directory");
  std::uint64_t seed_opt = 0;
  auto* seed_flag =
      app.add_option("--seed", seed_opt, "Override the scenario seed");
  app.add_option("-j,--jobs", g.jobs, "Worker threads for sweeps");

  auto* pp = app.add_subcommand("phase-plane",
                                "Direction field and trajectories of the "
                                "share dynamics");
  int grid = 21;
  std::vector<std::string> starts;
  pp->add_option("--grid", grid, "Grid density");
  pp->add_option("--start", starts, "Trajectory start 'pi_a,pi_b'");

  auto* br = app.add_subcommand("best-response",
                                "Price best-response curves and their "
                                "intersection");
  double p_min = 0.1, p_max = 5.0;
  int br_steps = 50;
  br->add_option("--pmin", p_min, "Grid start");
  br->add_option("--pmax", p_max, "Grid end");
  br->add_option("--steps", br_steps, "Grid points");

  auto* im = app.add_subcommand("imes", "Run the distributed market");

  auto* dl = app.add_subcommand("delay", "Service-delay sweep");
  std::string omds, mmds, areas, policy = "both";
  int seeds = 30;
  dl->add_option("--omds", omds, "Device-count range lo:hi:step");
  dl->add_option("--mmds", mmds, "Relay-count range lo:hi:step");
  dl->add_option("--areas", areas, "Square-side range lo:hi:step");
  dl->add_option("--seeds", seeds, "Seeds per cell");
  dl->add_option("--policy", policy, "imes, rand or both");

  auto* na = app.add_subcommand("nash", "Closed-form equilibrium report");
  auto* ck = app.add_subcommand("check", "Numeric diagnostics");

  auto* va = app.add_subcommand("validate", "Schema-check emitted CSV files");
  std::vector<std::string> files;
  va->add_option("files", files, "CSV files to validate")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*seed_flag) g.seed = seed_opt;
    if (pp->parsed()) return cmd_phase_plane(g, grid, starts);
    if (br->parsed()) return cmd_best_response(g, p_min, p_max, br_steps);
    if (im->parsed()) return cmd_imes(g);
    if (dl->parsed()) return cmd_delay(g, omds, mmds, areas, seeds, policy);
    if (na->parsed()) return cmd_nash(g);
    if (ck->parsed()) return cmd_check(g);
    if (va->parsed()) return cmd_validate(files);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitUsage;
  } catch (const std::runtime_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitNoConverge;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  }
  return kExitUsage;
}
