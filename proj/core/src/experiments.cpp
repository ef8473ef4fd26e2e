#include "cd2d/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace cd2d {

MarketScenario market_from_config(const ScenarioConfig& cfg) {
  MarketScenario market;
  market.n_mmds = static_cast<int>(cfg.mmds.size());
  market.n_groups = static_cast<int>(cfg.groups.size());
  market.mmds.resize(cfg.mmds.size());
  for (std::size_t k = 0; k < cfg.mmds.size(); ++k) {
    MmdAgent& m = market.mmds[k];
    m.omega = cfg.mmds[k].omega;
    m.price = cfg.mmds[k].price;
    m.cost = cfg.mmds[k].cost;
    m.mu_omega = cfg.mmds[k].mu_omega;
    m.mu_p = cfg.mmds[k].mu_p;
    m.omega_cap = cfg.mmds[k].omega_cap;
    m.delta_t = cfg.imes.delta_t;
  }
  for (std::size_t g = 0; g < cfg.groups.size(); ++g)
    for (int i = 0; i < cfg.groups[g].size; ++i)
      market.agent_group.push_back(static_cast<int>(g));
  market.caps = cfg.capacity_params();

  const auto y = cfg.y_matrix(cfg.evo_y_mode);
  const double base_log = cfg.imes.log_base == "2" ? std::log(2.0) : 1.0;
  const double k_omega = cfg.imes.k_omega;
  const std::vector<int> agent_group = market.agent_group;
  market.capacity = [y, base_log, k_omega, agent_group](
                        int agent, int mmd, double omega, int attached) {
    if (attached < 1 || omega <= 0.0) return 0.0;
    const int g = agent_group[agent];
    const double arg = k_omega * omega * y[g][mmd] / attached;
    return std::log(arg) / base_log;
  };
  return market;
}

PhasePlaneResult phase_plane(const ScenarioConfig& cfg,
                             const PhasePlaneOptions& opts) {
  if (cfg.groups.size() != 2 || cfg.mmds.size() != 2)
    throw ConfigError("phase plane requires two groups and two relays");

  const GroupEconomics econ = cfg.economics(cfg.evo_y_mode);
  const CapacityParams caps = cfg.capacity_params();
  EvoParams evo;
  evo.delta = cfg.evo.delta;
  evo.tau = cfg.evo.tau;
  evo.dt = cfg.evo.dt;

  PhasePlaneResult out;
  const int n = std::max(2, opts.grid);
  for (int i = 1; i < n; ++i) {
    for (int j = 1; j < n; ++j) {
      const double a = static_cast<double>(i) / n;
      const double b = static_cast<double>(j) / n;
      PopulationState s;
      s.fractions = {{a, 1.0 - a}, {b, 1.0 - b}};
      s.group_sizes = {cfg.groups[0].size, cfg.groups[1].size};
      const auto field = replicator_field(s, econ, caps, evo.delta);
      out.field.push_back({a, b, field[0][0], field[1][0]});
    }
  }

  for (const auto& start : opts.starts) {
    PopulationState s;
    s.fractions = {{start[0], 1.0 - start[0]}, {start[1], 1.0 - start[1]}};
    s.group_sizes = {cfg.groups[0].size, cfg.groups[1].size};
    EvolveOptions eopts;
    eopts.max_steps = cfg.evo.max_steps;
    eopts.pi_dot_tol = cfg.evo.pi_dot_tol;
    eopts.sample_stride = 50;
    const EvolveResult r = evolve(s, econ, caps, evo, eopts);
    Trajectory t;
    t.start = start;
    t.terminal = {r.state.fractions[0][0], r.state.fractions[1][0]};
    t.converged = r.converged;
    t.steps = r.steps;
    const UtilitySnapshot snap = group_utilities(r.state, econ, caps);
    double gap = 0.0;
    for (int g = 0; g < 2; ++g) {
      // spread over relays with positive support
      double lo = 1e300, hi = -1e300;
      for (int m = 0; m < 2; ++m) {
        if (r.state.fractions[g][m] <= 1e-9) continue;
        lo = std::min(lo, snap.u[g][m]);
        hi = std::max(hi, snap.u[g][m]);
      }
      if (hi >= lo) gap = std::max(gap, hi - lo);
    }
    t.utility_gap = gap;
    for (const auto& flat : r.samples) t.points.push_back({flat[0], flat[2]});
    out.trajectories.push_back(std::move(t));
  }
  return out;
}

BestResponseResultSet best_response_curves(const ScenarioConfig& cfg,
                                           double p_min, double p_max,
                                           int steps) {
  if (cfg.mmds.size() != 2)
    throw ConfigError("best-response curves require two relays");
  if (!(p_min > 0.0) || !(p_max > p_min) || steps < 2)
    throw ConfigError("invalid price grid");

  const auto y = cfg.y_per_mmd(cfg.pricing_y_mode);
  const double w1 = cfg.mmds[0].omega;
  const double w2 = cfg.mmds[1].omega;

  BestResponseResultSet out;
  for (int i = 0; i < steps; ++i) {
    const double p =
        p_min + (p_max - p_min) * static_cast<double>(i) / (steps - 1);
    BestResponsePoint pt;
    pt.p = p;
    pt.br1 = best_response_price(p, w1, w2, y[0], y[1]).price_star;
    pt.br2 = best_response_price(p, w2, w1, y[1], y[0]).price_star;
    out.curve.push_back(pt);
  }
  out.nash = nash_prices(w1, w2, y[0], y[1]);
  return out;
}

NashReport nash_report(const ScenarioConfig& cfg) {
  if (cfg.mmds.size() != 2)
    throw ConfigError("closed-form equilibrium requires two relays");
  NashReport rep;
  rep.y_pricing = cfg.y_per_mmd(cfg.pricing_y_mode);
  const double w1 = cfg.mmds[0].omega;
  const double w2 = cfg.mmds[1].omega;
  rep.prices = nash_prices(w1, w2, rep.y_pricing[0], rep.y_pricing[1]);
  rep.share1 = equilibrium_share_closed(rep.prices.p1, rep.prices.p2, w1, w2,
                                        rep.y_pricing[0], rep.y_pricing[1],
                                        cfg.total_omds());
  rep.bandwidth = bandwidth_equilibrium(
      cfg.mmds[0].price, cfg.mmds[1].price, rep.y_pricing[0], rep.y_pricing[1],
      cfg.total_omds(), cfg.mmds[0].cost, cfg.mmds[1].cost,
      cfg.mmds[0].omega_cap);
  return rep;
}

CheckReport run_checks(const ScenarioConfig& cfg) {
  CheckReport rep;

  // Lambert W round trips over a log-spaced probe set.
  double max_res = 0.0;
  constexpr double kInvE = 0.36787944117144233;
  for (int i = 0; i <= 2000; ++i) {
    const double t = static_cast<double>(i) / 2000.0;
    const double z = -kInvE + 1e-6 + (1e6 + kInvE) * std::pow(t, 6.0);
    const double w = lambert_w(z);
    const double res =
        std::abs(w * std::exp(w) - z) / std::max(1.0, std::abs(z));
    max_res = std::max(max_res, res);
  }
  rep.lambertw_max_residual = max_res;
  rep.lambertw_w0_error = std::abs(lambert_w(0.0));
  rep.lambertw_we_error = std::abs(lambert_w(std::exp(1.0)) - 1.0);

  // Contraction diagnostics over a positive price grid.
  std::vector<double> grid;
  for (int i = 1; i <= 50; ++i) grid.push_back(0.1 * i);
  const auto y = cfg.y_per_mmd(cfg.pricing_y_mode);
  const double w1 = cfg.mmds.size() > 0 ? cfg.mmds[0].omega : 20.0;
  const double w2 = cfg.mmds.size() > 1 ? cfg.mmds[1].omega : 40.0;
  rep.supermodularity =
      supermodularity_check(grid, grid, w1, w2, y[0], y[1]);

  // First-order conditions at the best response.
  const double n = cfg.total_omds();
  double worst_exp = 0.0, worst_b2 = 0.0;
  for (double pj : {0.5, 1.0, 2.0, 3.0}) {
    const double pi = best_response_price(pj, w1, w2, y[0], y[1]).price_star;
    const double h = 1e-5;
    const double up = mmd_utility_closed_exp(pi + h, pj, w1, w2, y[0], y[1], n,
                                             cfg.mmds[0].cost);
    const double dn = mmd_utility_closed_exp(pi - h, pj, w1, w2, y[0], y[1], n,
                                             cfg.mmds[0].cost);
    worst_exp = std::max(worst_exp, std::abs((up - dn) / (2.0 * h)));
    worst_b2 = std::max(worst_b2,
                        std::abs(foc_residual_base2(pi, pj, w1, w2, y[0], y[1])));
  }
  rep.foc_exp_residual = worst_exp;
  rep.foc_base2_residual = worst_b2;

  rep.ok = rep.supermodularity.all_in_unit &&
           rep.supermodularity.max_lambda < 1.0 &&
           rep.lambertw_max_residual <= 1e-12 &&
           rep.lambertw_w0_error <= 1e-14 && rep.lambertw_we_error <= 1e-14 &&
           rep.foc_exp_residual <= 1e-6;
  return rep;
}

ImesRunResult run_imes_experiment(const ScenarioConfig& cfg) {
  ImesRunResult out;
  MarketScenario market = market_from_config(cfg);

  ImesConfig icfg;
  icfg.waiting_rounds = cfg.imes.waiting_rounds;
  icfg.stability_tol = cfg.imes.stability_tol;
  icfg.max_rounds = cfg.imes.max_rounds;
  icfg.min_rounds = cfg.imes.min_rounds;
  icfg.probe0 = cfg.imes.probe0;
  icfg.gain_pow = cfg.imes.gain_pow;
  icfg.probe_pow = cfg.imes.probe_pow;
  icfg.smooth_window = cfg.imes.smooth_window;
  icfg.stable_needed = cfg.imes.stable_needed;
  icfg.settle_rounds = cfg.imes.settle_rounds;
  icfg.seed = cfg.seed;

  out.trace = run_imes(icfg, market);

  if (cfg.mmds.size() == 2) {
    const auto y = cfg.y_per_mmd(cfg.evo_y_mode);
    out.oracle = nash_prices(cfg.mmds[0].omega, cfg.mmds[1].omega, y[0], y[1]);
    out.closed_form_share1 = equilibrium_share_closed(
        out.trace.final_prices[0], out.trace.final_prices[1],
        out.trace.final_omegas[0], out.trace.final_omegas[1], y[0], y[1],
        cfg.total_omds());
  }
  return out;
}

namespace {

std::string schema_line(const std::string& name) {
  return "# schema: " + name + " v1\n";
}

}  // namespace

std::string phase_plane_field_csv(const ScenarioConfig& cfg,
                                  const PhasePlaneResult& r) {
  std::string out = schema_line("phase_field") + config_echo(cfg);
  out += "pi_a,pi_b,dpi_a,dpi_b\n";
  char buf[128];
  for (const auto& row : r.field) {
    std::snprintf(buf, sizeof(buf), "%.10g,%.10g,%.10g,%.10g\n", row[0],
                  row[1], row[2], row[3]);
    out += buf;
  }
  return out;
}

std::string trajectory_csv(const ScenarioConfig& cfg, const Trajectory& t) {
  std::string out = schema_line("phase_trajectory") + config_echo(cfg);
  char buf[160];
  std::snprintf(buf, sizeof(buf),
                "# start=%.6g,%.6g terminal=%.10g,%.10g converged=%d "
                "utility_gap=%.3g\n",
                t.start[0], t.start[1], t.terminal[0], t.terminal[1],
                t.converged ? 1 : 0, t.utility_gap);
  out += buf;
  out += "pi_a,pi_b\n";
  for (const auto& p : t.points) {
    std::snprintf(buf, sizeof(buf), "%.10g,%.10g\n", p[0], p[1]);
    out += buf;
  }
  return out;
}

std::string best_response_csv(const ScenarioConfig& cfg,
                              const BestResponseResultSet& r) {
  std::string out = schema_line("best_response") + config_echo(cfg);
  char buf[160];
  std::snprintf(buf, sizeof(buf), "# nash=%.10g,%.10g iterations=%d\n",
                r.nash.p1, r.nash.p2, r.nash.iterations);
  out += buf;
  out += "p,br1,br2\n";
  for (const auto& pt : r.curve) {
    std::snprintf(buf, sizeof(buf), "%.10g,%.10g,%.10g\n", pt.p, pt.br1,
                  pt.br2);
    out += buf;
  }
  return out;
}

std::vector<PlotSeries> sweep_plot_series(
    const std::vector<SweepCell>& cells) {
  std::vector<PlotSeries> series;
  auto find = [&](const std::string& name) -> PlotSeries& {
    for (auto& s : series)
      if (s.name == name) return s;
    series.push_back({name, {}});
    return series.back();
  };
  for (const auto& c : cells) {
    const std::string pol = to_string(c.policy);
    find(pol + "_mean").points.push_back({c.param_value, c.mean_delay});
    find(pol + "_p95").points.push_back({c.param_value, c.p95_delay});
  }
  return series;
}

std::string validate_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) return "cannot open " + path;
  std::string line;
  if (!std::getline(in, line)) return "empty file";
  if (line.rfind("# schema: ", 0) != 0) return "missing schema line";
  std::size_t cols = 0;
  std::string header;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    if (header.empty()) {
      header = line;
      cols = std::count(header.begin(), header.end(), ',') + 1;
      continue;
    }
    const std::size_t n = std::count(line.begin(), line.end(), ',') + 1;
    if (n != cols)
      return "line " + std::to_string(lineno) + ": expected " +
             std::to_string(cols) + " columns, got " + std::to_string(n);
  }
  if (header.empty()) return "missing column header";
  return "";
}

}  // namespace cd2d
