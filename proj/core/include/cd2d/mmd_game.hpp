#pragma once

#include <span>
#include <vector>

namespace cd2d {

// Strategy and cost data of one relay seller.
struct MmdParams {
  double omega = 20.0;
  double cost = 0.0;
  double price = 1.0;
  double omega_cap = 50.0;

  void validate() const;
};

// Principal branch of the Lambert W function, Halley iteration. Defined for
// z >= -1/e; throws std::domain_error below the branch point.
double lambert_w(double z);
double lambert_w(double z, int* iterations);

struct BestResponseResult {
  double price_star = 0.0;
  double w_argument = 0.0;
  int iterations = 0;
};

// Explicit best-response price 1 + W(ratio * e^(p_other - 1)) with
// ratio = omega_self*y_self / (omega_other*y_other).
BestResponseResult best_response_price(double p_other, double omega_self,
                                       double omega_other, double y_self,
                                       double y_other);

struct NashResult {
  double p1 = 0.0, p2 = 0.0;
  int iterations = 0;
  bool converged = false;
};

// Alternating best responses from (start1, start2); the map is a
// contraction, so the fixed point is unique. Throws std::runtime_error if
// the iteration budget is exhausted.
NashResult nash_prices(double omega1, double omega2, double y1, double y2,
                       double tol = 1e-9, int max_iter = 10000,
                       double start1 = 1.0, double start2 = 1.0);

double mmd_utility(double price, double attached, double cost, double omega);

// Seller utility with the buyers held at their closed-form split.
double mmd_utility_closed(double p_i, double p_j, double omega_i,
                          double omega_j, double y_i, double y_j, double n,
                          double cost_i);

// Same utility in the exp-substituted economy (natural-log share response);
// its first-order condition is solved exactly by best_response_price.
double mmd_utility_closed_exp(double p_i, double p_j, double omega_i,
                              double omega_j, double y_i, double y_j, double n,
                              double cost_i);

// dB/dp = W(z) / (z (1 + W(z))), evaluated as e^-W / (1 + W) to stay
// stable for small z. Lies in (0, 1) for every z > 0.
double best_response_slope(double z);

// Residual of the base-2 first-order condition, exposed as a diagnostic:
// p_i - (1/ln 2 + ratio * 2^(p_j - p_i)).
double foc_residual_base2(double p_i, double p_j, double omega_i,
                          double omega_j, double y_i, double y_j);

struct SupermodularityReport {
  bool all_in_unit = false;   // every slope in (0, 1)
  double min_slope = 0.0;
  double max_slope = 0.0;
  double max_lambda = 0.0;    // sup of sqrt(B1' * B2') over the grid
};

// Evaluates the best-response slopes over a price grid, in both the
// bare-exponent form z = e^(p-1) and the ratio-weighted form used by the
// explicit best response.
SupermodularityReport supermodularity_check(std::span<const double> p1_grid,
                                            std::span<const double> p2_grid,
                                            double omega1, double omega2,
                                            double y1, double y2);

// Bandwidth maximizing seller utility against a fixed opponent, by
// golden-section search over [lo, hi]. Flat objectives return lo.
double best_response_bandwidth(double p_self, double p_other,
                               double omega_other, double y_self,
                               double y_other, double n, double cost,
                               double lo = 0.0, double hi = 50.0,
                               double tol = 1e-6);

struct BandwidthEquilibrium {
  double omega1 = 0.0, omega2 = 0.0;
  int iterations = 0;
  bool converged = false;
};

BandwidthEquilibrium bandwidth_equilibrium(double p1, double p2, double y1,
                                           double y2, double n, double cost1,
                                           double cost2, double cap = 50.0,
                                           double tol = 1e-6,
                                           int max_iter = 200,
                                           double start1 = 25.0,
                                           double start2 = 25.0);

}  // namespace cd2d
