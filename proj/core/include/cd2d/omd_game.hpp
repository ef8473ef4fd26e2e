#pragma once

#include <array>
#include <complex>
#include <cstddef>
#include <deque>
#include <vector>

#include "cd2d/channel.hpp"

namespace cd2d {

// Per-group attachment fractions over the relay set. Each group's vector
// lies on the probability simplex.
struct PopulationState {
  std::vector<std::vector<double>> fractions;  // [group][mmd]
  std::vector<int> group_sizes;

  int groups() const { return static_cast<int>(fractions.size()); }
  int mmds() const {
    return fractions.empty() ? 0 : static_cast<int>(fractions[0].size());
  }
  double attached_count(int mmd) const;
  double total_population() const;
  void validate() const;
};

struct EvoParams {
  double delta = 1.0;  // update speed
  int tau = 1;         // delay in steps
  double dt = 0.01;    // Euler step size

  void validate() const;
};

// Economic environment of the share game: per-(group, relay) effective SNR
// factors plus the relays' offered bandwidths and prices.
struct GroupEconomics {
  std::vector<std::vector<double>> y_values;  // [group][mmd]
  std::vector<double> omega;                  // [mmd]
  std::vector<double> prices;                 // [mmd]

  void validate() const;
};

// Utility of one follower given both transmission options and the asked
// price. Zero whenever relaying is not strictly better.
double omd_utility(double c_r, double c_d, double price,
                   const CapacityParams& params);

// Per-(group, mmd) utilities and group means at a population state, using
// the log-form capacities. Entries for relays nobody in the system is
// attached to are zero (they carry no weight).
struct UtilitySnapshot {
  std::vector<std::vector<double>> u;  // [group][mmd]
  std::vector<double> mean;            // [group]
  std::vector<std::vector<double>> weights;  // fractions used for the means
};

UtilitySnapshot group_utilities(const PopulationState& state,
                                const GroupEconomics& econ,
                                const CapacityParams& caps);

// Rolling buffer of utility snapshots; index 0 is the most recent push.
class UtilityHistory {
 public:
  void push(UtilitySnapshot snap);
  // Snapshot tau steps in the past. Throws if fewer than tau+1 entries held.
  const UtilitySnapshot& delayed(int tau) const;
  std::size_t size() const { return buf_.size(); }
  void trim(std::size_t keep);

 private:
  std::deque<UtilitySnapshot> buf_;
};

// One explicit-Euler update of the replicator dynamics with delayed
// utilities, followed by clipping to [0, 1] and per-group renormalization.
PopulationState replicator_step(const PopulationState& state,
                                const UtilityHistory& history,
                                const EvoParams& params);

struct EvolveOptions {
  long max_steps = 1'000'000;
  double pi_dot_tol = 1e-8;
  int sample_stride = 0;  // 0 = keep no trajectory samples
};

struct EvolveResult {
  PopulationState state;
  long steps = 0;
  bool converged = false;
  std::vector<std::vector<double>> samples;  // flattened fractions per sample
};

EvolveResult evolve(PopulationState start, const GroupEconomics& econ,
                    const CapacityParams& caps, const EvoParams& params,
                    const EvolveOptions& opts = {});

// Instantaneous replicator velocities at a state (no delay).
std::vector<std::vector<double>> replicator_field(const PopulationState& state,
                                                  const GroupEconomics& econ,
                                                  const CapacityParams& caps,
                                                  double delta);

// Positive root in (0, n) of d*X^2 - (w1*a + w2*b + n*d)*X + w1*a*n = 0.
// Degenerates to the linear split when d == 0. Throws std::domain_error if
// no root lies in (0, n).
double equilibrium_share_quadratic(double a, double b, double d, double omega1,
                                   double omega2, double n);

// Closed-form count attached to relay 1 under the log-form utilities.
double equilibrium_share_closed(double p1, double p2, double omega1,
                                double omega2, double y1, double y2, double n);

enum class StabilityClass { stable, unstable, marginal, boundary };

struct JacobianResult {
  std::array<std::array<double, 2>, 2> j{};
  std::complex<double> eig1, eig2;
  StabilityClass stability = StabilityClass::marginal;
};

// Jacobian of the two-group, two-relay growth map by central finite
// differences, with eigenvalues from the 2x2 trace/determinant formula.
// States touching the simplex boundary are classified "boundary".
JacobianResult evo_jacobian(const PopulationState& state,
                            const GroupEconomics& econ,
                            const CapacityParams& caps, double delta,
                            double fd_step = 1e-6);

const char* to_string(StabilityClass c);

}  // namespace cd2d
