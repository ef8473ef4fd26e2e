#pragma once

#include <array>
#include <string>
#include <vector>

#include "cd2d/config.hpp"
#include "cd2d/imes.hpp"
#include "cd2d/mmd_game.hpp"
#include "cd2d/omd_game.hpp"
#include "cd2d/sim.hpp"

namespace cd2d {

// Follower market of the configured scenario: one agent per device, group
// channels shared, log-form utilities in the configured base.
MarketScenario market_from_config(const ScenarioConfig& cfg);

struct PhasePlaneOptions {
  int grid = 21;
  std::vector<std::array<double, 2>> starts = {{0.56, 0.21}};
};

struct Trajectory {
  std::array<double, 2> start{};
  std::array<double, 2> terminal{};
  bool converged = false;
  long steps = 0;
  double utility_gap = 0.0;  // max over groups at the terminal state
  std::vector<std::array<double, 2>> points;
};

struct PhasePlaneResult {
  // Grid rows: (pi_a, pi_b, dpi_a, dpi_b).
  std::vector<std::array<double, 4>> field;
  std::vector<Trajectory> trajectories;
};

// Replicator direction field and trajectories for the two-group, two-relay
// scenario. Throws ConfigError for other shapes.
PhasePlaneResult phase_plane(const ScenarioConfig& cfg,
                             const PhasePlaneOptions& opts);

struct BestResponsePoint {
  double p = 0.0;
  double br1 = 0.0;  // relay 1's reply to the other's price p
  double br2 = 0.0;
};

struct BestResponseResultSet {
  std::vector<BestResponsePoint> curve;
  NashResult nash;
};

BestResponseResultSet best_response_curves(const ScenarioConfig& cfg,
                                           double p_min, double p_max,
                                           int steps);

struct NashReport {
  NashResult prices;
  double share1 = 0.0;  // buyers on relay 1 at the equilibrium prices
  BandwidthEquilibrium bandwidth;
  std::vector<double> y_pricing;
};

NashReport nash_report(const ScenarioConfig& cfg);

struct CheckReport {
  SupermodularityReport supermodularity;
  double lambertw_max_residual = 0.0;  // over a log-spaced probe set
  double lambertw_w0_error = 0.0;
  double lambertw_we_error = 0.0;
  double foc_exp_residual = 0.0;   // FD residual of the exp-economy FOC
  double foc_base2_residual = 0.0; // diagnostic residual of the base-2 form
  bool ok = false;
};

CheckReport run_checks(const ScenarioConfig& cfg);

struct ImesRunResult {
  SimTrace trace;
  NashResult oracle;           // fixed-point prices at the same parameters
  double closed_form_share1 = 0.0;  // at the trace's final prices
};

ImesRunResult run_imes_experiment(const ScenarioConfig& cfg);

// CSV writers. Every file starts with the resolved-config echo.
std::string phase_plane_field_csv(const ScenarioConfig& cfg,
                                  const PhasePlaneResult& r);
std::string trajectory_csv(const ScenarioConfig& cfg, const Trajectory& t);
std::string best_response_csv(const ScenarioConfig& cfg,
                              const BestResponseResultSet& r);

// Schema self-check of an emitted file; returns an empty string when the
// file is well-formed, else a description of the first problem.
std::string validate_csv_file(const std::string& path);

// Two-column (x, y) series files per (policy, metric) for plotting.
struct PlotSeries {
  std::string name;  // file stem
  std::vector<std::array<double, 2>> points;
};
std::vector<PlotSeries> sweep_plot_series(const std::vector<SweepCell>& cells);

}  // namespace cd2d
