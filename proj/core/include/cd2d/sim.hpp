#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "cd2d/imes.hpp"

namespace cd2d {

struct TopologyError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Topology {
  double width = 100.0;
  double height = 100.0;
  double comm_range = 50.0;
  std::vector<std::array<double, 2>> omd_positions;
  std::vector<std::array<double, 2>> mmd_positions;
  std::vector<std::pair<int, int>> sd_pairs;  // (source, destination)
  std::vector<int> unpaired;

  void validate() const;
  std::string to_csv(const std::string& header) const;
};

// Uniform placement; each still-unpaired node pairs with its nearest
// unpaired neighbour within comm_range. Throws TopologyError when more than
// half of the nodes end up unpaired.
Topology generate_topology(double width, double height, int n_omd, int n_mmd,
                           double comm_range, std::uint64_t seed);

// Amplitude gain sqrt(reference_gain * d^-exponent), clamped to <= 1.
double channel_from_distance(double distance, double exponent,
                             double reference_gain);

// Reference gain such that channel_from_distance(at_distance) == target.
double calibrate_reference_gain(double target_gain, double at_distance,
                                double exponent);

struct PathLossParams {
  double exponent = 3.0;
  double reference_gain = 2430.0;  // calibrated: 30 m link -> gain 0.3
  double min_distance = 1e-3;
};

struct TrafficModel {
  double message_size = 100.0;
  double slot_length = 1.0;
  int slots_per_round = 64;  // cap on slots one relay issues per round

  void validate() const;
};

enum class Policy { imes, rand };
const char* to_string(Policy p);

struct DelayStats {
  std::vector<double> completion;  // per flow; +inf for stuck flows
  double mean = 0.0;
  double p50 = 0.0;
  double p95 = 0.0;
  int infinite_count = 0;
  int flows = 0;
};

// Scenario data for the service-delay study.
struct DelayScenario {
  TrafficModel traffic;
  PathLossParams pathloss;
  double power = 2.0;
  double noise_var = 1.0;
  double direct_bandwidth = 20.0;   // dedicated band for uncovered flows
  std::vector<double> omega_profile = {5.0, 25.0, 50.0};  // cycled over relays
  double mmd_price = 0.0;
  CapacityParams caps;
  int dao_rounds_cap = 100;   // follower rounds per leader epoch
  int market_rounds = 5;      // leader epochs of the attachment market
  int settle_rounds = 60;
};

DelayStats simulate_delay(const Topology& topo, Policy policy,
                          const DelayScenario& scenario, std::uint64_t seed);

enum class SweepParam { omd_count, mmd_count, area };
const char* to_string(SweepParam p);

struct SweepCell {
  double param_value = 0.0;
  Policy policy = Policy::imes;
  int seed_count = 0;
  double mean_delay = 0.0;
  double std_delay = 0.0;
  double p95_delay = 0.0;
  long infinite_count = 0;
};

struct SweepSpec {
  SweepParam param = SweepParam::omd_count;
  std::vector<double> values;
  int seeds = 30;
  std::vector<Policy> policies = {Policy::imes, Policy::rand};
  // Fixed coordinates of the sweep; the swept one is overridden per cell.
  int n_omd = 50;
  int n_mmd = 3;
  double width = 100.0;
  double height = 100.0;
  double comm_range = 50.0;
  std::uint64_t seed = 1;
};

// Runs every (value, policy) cell over `seeds` topologies; cells execute in
// up to `jobs` worker threads and merge deterministically by index.
std::vector<SweepCell> delay_sweep(const SweepSpec& spec,
                                   const DelayScenario& scenario,
                                   int jobs = 1);

std::string sweep_to_csv(const std::vector<SweepCell>& cells,
                         const std::string& header);

}  // namespace cd2d
