#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "cd2d/channel.hpp"
#include "cd2d/omd_game.hpp"
#include "cd2d/sim.hpp"

namespace cd2d {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct GroupConfig {
  std::string name = "a";
  int size = 10;
  double h_sr = 0.3, h_sd = 0.25, h_rd = 0.4;
  std::vector<double> y_override;  // per relay; empty = derive from gains
};

struct MmdConfig {
  double omega = 20.0;
  double price = 1.0;
  double cost = 0.5;
  double mu_omega = 0.0;  // offers held fixed in the stock pricing scenario
  double mu_p = 0.5;
  double omega_cap = 50.0;
};

struct EvoConfig {
  double delta = 1.0;
  int tau = 1;  // delay in update steps
  double dt = 0.01;
  long max_steps = 1'000'000;
  double pi_dot_tol = 1e-8;
  double equal_utility_tol = 1e-6;
};

struct ImesSection {
  double k_omega = 100.0;
  int waiting_rounds = 100;
  double delta_t = 1.0;
  double stability_tol = 1e-4;
  int max_rounds = 600;
  int min_rounds = 100;
  double probe0 = 0.4;
  double gain_pow = 1.0;
  double probe_pow = 0.12;
  int smooth_window = 48;
  int stable_needed = 5;
  int settle_rounds = 50;
  // Utility log base of the market economy: "e" matches the explicit
  // best-response pricing; "2" matches the share dynamics closed forms.
  std::string log_base = "e";
};

struct SimConfig {
  double area_width = 100.0;
  double area_height = 100.0;
  int n_omd = 40;
  int n_mmd = 3;
  double comm_range = 50.0;
  double exponent = 3.0;
  double reference_gain = 2430.0;
  double message_size = 100.0;
  double slot_length = 1.0;
  int slots_per_round = 64;
  double direct_bandwidth = 20.0;
  std::vector<double> omega_profile = {5.0, 25.0, 50.0};
  int dao_rounds = 100;
  int market_rounds = 5;
  int settle_rounds = 60;
};

struct ScenarioConfig {
  double power = 2.0;
  double noise_var = 1.0;
  double alpha = 1.0;
  double t_access = 1.0;
  std::uint64_t seed = 1;
  // Effective-SNR convention: the share dynamics use the spectral-efficiency
  // factor, the pricing game the raw SNR factor.
  std::string evo_y_mode = "rate_factor";
  std::string pricing_y_mode = "snr_factor";
  std::vector<GroupConfig> groups;
  std::vector<MmdConfig> mmds;
  EvoConfig evo;
  ImesSection imes;
  SimConfig sim;

  void validate() const;

  ChannelGains gains_of(std::size_t group) const;
  // Per-(group, relay) effective factors under the given convention, with
  // relay k's channel taken from group (k mod groups).
  std::vector<std::vector<double>> y_matrix(const std::string& mode) const;
  std::vector<double> y_per_mmd(const std::string& mode) const;
  CapacityParams capacity_params() const;
  GroupEconomics economics(const std::string& mode) const;
  DelayScenario delay_scenario() const;
  int total_omds() const;
};

ScenarioConfig default_scenario();
ScenarioConfig parse_config(const std::string& text,
                            const std::string& origin = "<string>");
ScenarioConfig load_config(const std::string& path);
std::string serialize(const ScenarioConfig& cfg);

// The resolved configuration as '#'-prefixed lines, embedded at the top of
// every emitted file.
std::string config_echo(const ScenarioConfig& cfg);

}  // namespace cd2d
