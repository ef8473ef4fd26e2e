#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "cd2d/channel.hpp"
#include "cd2d/rng.hpp"

namespace cd2d {

struct OmdAgent {
  int group_id = 0;
  int current_mmd = -1;
  double last_utility = 0.0;
  std::uint64_t rng_state = 0;  // per-agent stream, advanced by the engine
};

struct MmdAgent {
  double omega = 20.0;
  double price = 1.0;
  double cost = 0.0;
  double mu_omega = 1.0;
  double mu_p = 0.5;
  double delta_t = 1.0;
  double omega_cap = 50.0;
  double learning_scale = 1.0;  // annealing multiplier applied by the driver
  double step_cap = 0.0;        // max per-update strategy move; 0 = unbounded
  double u_curr = 0.0;          // last two measured utilities
  double u_prev = 0.0;

  void validate() const;
};

// Weighted group mean of the previous round's per-choice utilities.
// Throws std::invalid_argument on an empty group.
double group_average_utility(std::span<const double> utilities,
                             std::span<const int> counts);

// Probability of abandoning the current link: relative shortfall against
// the group average, clamped to [0, 1]. Non-positive averages carry no
// signal and yield 0.
double switch_probability(double avg, double own);

// Strategy update from two consecutive utility measurements: both strategy
// components move by their learning rate times the utility difference
// quotient, then clamp to the feasible box.
void dam_update(MmdAgent& agent, double u_now, double u_before);

// Market shared by the follower agents: per-agent candidate relays plus a
// capacity model giving the rate term of an agent attached to a relay with
// `attached` co-subscribers.
struct MarketScenario {
  int n_mmds = 0;
  int n_groups = 0;
  std::vector<MmdAgent> mmds;
  std::vector<int> agent_group;                // [agent]
  std::vector<std::vector<int>> candidates;    // [agent]; empty = all relays
  std::function<double(int agent, int mmd, double omega, int attached)>
      capacity;
  CapacityParams caps;

  int agents() const { return static_cast<int>(agent_group.size()); }
  void validate() const;
};

struct ImesConfig {
  int waiting_rounds = 100;    // follower rounds per leader update
  double stability_tol = 1e-4;
  int max_rounds = 600;
  int min_rounds = 100;
  double probe0 = 0.4;         // initial strategy probe half-width
  double step_cap = 0.3;       // per-update strategy move bound
  double gain_pow = 1.0;       // annealing exponent of the learning scale
  double probe_pow = 0.12;     // annealing exponent of the probe width
  int smooth_window = 48;      // trailing window of the reported strategies
  int stable_needed = 5;
  int settle_rounds = 150;     // follower rounds run after the last update
  // Chance that a dissatisfied agent with nobody better to imitate leaves
  // its link for a random candidate instead of staying put.
  double explore_prob = 0.25;
  std::uint64_t seed = 1;

  void validate() const;
};

struct TraceRow {
  int round = 0;
  int mmd = 0;
  double omega = 0.0;
  double price = 0.0;
  double utility = 0.0;
  std::vector<int> attached_per_group;
};

struct SimTrace {
  std::vector<TraceRow> rows;
  bool converged = false;
  bool budget_exhausted = false;
  int rounds = 0;
  std::vector<double> final_prices;
  std::vector<double> final_omegas;
  std::vector<int> final_attachment;  // per agent, majority over settle window
  std::vector<int> final_counts;      // per relay

  std::string to_csv(const std::string& header) const;
};

// One synchronous round of the follower dynamics at the given leader
// strategies. Returns the number of switches; `stable` reports whether all
// groups already sit within a common-utility tolerance.
struct DaoRoundResult {
  int switches = 0;
  bool stable = false;
};

class ImesEngine {
 public:
  ImesEngine(const ImesConfig& cfg, const MarketScenario& scenario);

  DaoRoundResult dao_round(std::span<const double> omegas,
                           std::span<const double> prices);
  SimTrace run();

  const std::vector<OmdAgent>& agents() const { return agents_; }
  std::vector<int> attachment_counts() const;

 private:
  double agent_utility(int agent, int mmd, std::span<const double> omegas,
                       std::span<const double> prices,
                       std::span<const int> counts) const;

  ImesConfig cfg_;
  MarketScenario scenario_;
  std::vector<OmdAgent> agents_;
  Rng rng_;
  std::vector<double> prev_utilities_;  // per agent, previous round
  std::vector<int> prev_attachment_;
  bool has_prev_ = false;
  double equal_tol_ = 1e-6;
};

SimTrace run_imes(const ImesConfig& cfg, const MarketScenario& scenario);

}  // namespace cd2d
