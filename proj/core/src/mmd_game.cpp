#include "cd2d/mmd_game.hpp"

#include <cmath>
#include <stdexcept>

#include "cd2d/omd_game.hpp"

namespace cd2d {

namespace {

constexpr double kInvE = 0.36787944117144233;  // 1/e

double halley_refine(double w, double z, int* iters) {
  int it = 0;
  for (; it < 60; ++it) {
    const double ew = std::exp(w);
    const double f = w * ew - z;
    if (std::abs(f) <= 1e-13 * std::max(1.0, std::abs(z))) break;
    const double wp1 = w + 1.0;
    const double denom = ew * wp1 - (w + 2.0) * f / (2.0 * wp1);
    w -= f / denom;
  }
  if (iters) *iters = it;
  return w;
}

}  // namespace

void MmdParams::validate() const {
  if (!(omega >= 0.0)) throw std::invalid_argument("omega >= 0");
  if (!(omega <= omega_cap)) throw std::invalid_argument("omega <= omega_cap");
  if (!(cost >= 0.0)) throw std::invalid_argument("cost >= 0");
  if (!(price >= 0.0)) throw std::invalid_argument("price >= 0");
}

double lambert_w(double z, int* iterations) {
  if (z < -kInvE - 1e-14) throw std::domain_error("lambert_w: z < -1/e");
  if (z == 0.0) {
    if (iterations) *iterations = 0;
    return 0.0;
  }

  double w;
  if (z < -kInvE + 1e-4) {
    // Branch-point series in p = sqrt(2(ez + 1)).
    const double p = std::sqrt(std::max(0.0, 2.0 * (std::exp(1.0) * z + 1.0)));
    w = -1.0 + p - p * p / 3.0 + 11.0 * p * p * p / 72.0;
  } else if (z < 0.0) {
    w = z * (1.0 - z);
  } else if (z <= std::exp(1.0)) {
    w = std::log1p(z);
  } else {
    const double l1 = std::log(z);
    const double l2 = std::log(l1);
    w = l1 - l2 + l2 / l1;  // asymptotic start
  }
  return halley_refine(w, z, iterations);
}

double lambert_w(double z) { return lambert_w(z, nullptr); }

BestResponseResult best_response_price(double p_other, double omega_self,
                                       double omega_other, double y_self,
                                       double y_other) {
  BestResponseResult out;
  const double ratio = omega_self * y_self / (omega_other * y_other);
  out.w_argument = ratio * std::exp(p_other - 1.0);
  out.price_star = 1.0 + lambert_w(out.w_argument, &out.iterations);
  return out;
}

NashResult nash_prices(double omega1, double omega2, double y1, double y2,
                       double tol, int max_iter, double start1,
                       double start2) {
  if (!(tol > 0.0)) throw std::invalid_argument("tol > 0");
  NashResult out;
  out.p1 = start1;
  out.p2 = start2;
  for (int it = 1; it <= max_iter; ++it) {
    const double p1 = best_response_price(out.p2, omega1, omega2, y1, y2)
                          .price_star;
    const double p2 =
        best_response_price(p1, omega2, omega1, y2, y1).price_star;
    const double change =
        std::max(std::abs(p1 - out.p1), std::abs(p2 - out.p2));
    out.p1 = p1;
    out.p2 = p2;
    out.iterations = it;
    if (change < tol) {
      out.converged = true;
      // Fixed-point check on both responses.
      const double r1 =
          std::abs(out.p1 -
                   best_response_price(out.p2, omega1, omega2, y1, y2)
                       .price_star);
      const double r2 =
          std::abs(out.p2 -
                   best_response_price(out.p1, omega2, omega1, y2, y1)
                       .price_star);
      if (r1 >= tol || r2 >= tol) out.converged = false;
      return out;
    }
  }
  throw std::runtime_error("nash_prices: iteration budget exceeded");
}

double mmd_utility(double price, double attached, double cost, double omega) {
  return price * attached - cost * omega;
}

double mmd_utility_closed(double p_i, double p_j, double omega_i,
                          double omega_j, double y_i, double y_j, double n,
                          double cost_i) {
  const double share =
      n / (1.0 + std::exp2(p_i - p_j) * (omega_j * y_j) / (omega_i * y_i));
  return mmd_utility(p_i, share, cost_i, omega_i);
}

double mmd_utility_closed_exp(double p_i, double p_j, double omega_i,
                              double omega_j, double y_i, double y_j, double n,
                              double cost_i) {
  const double share =
      n / (1.0 + std::exp(p_i - p_j) * (omega_j * y_j) / (omega_i * y_i));
  return mmd_utility(p_i, share, cost_i, omega_i);
}

double best_response_slope(double z) {
  const double w = lambert_w(z);
  return std::exp(-w) / (1.0 + w);
}

double foc_residual_base2(double p_i, double p_j, double omega_i,
                          double omega_j, double y_i, double y_j) {
  const double ratio = omega_i * y_i / (omega_j * y_j);
  return p_i - (1.0 / std::log(2.0) + ratio * std::exp2(p_j - p_i));
}

SupermodularityReport supermodularity_check(std::span<const double> p1_grid,
                                            std::span<const double> p2_grid,
                                            double omega1, double omega2,
                                            double y1, double y2) {
  SupermodularityReport rep;
  rep.min_slope = 1e300;
  rep.max_slope = -1e300;
  const double r1 = omega1 * y1 / (omega2 * y2);
  const double r2 = 1.0 / r1;

  auto record = [&](double slope) {
    rep.min_slope = std::min(rep.min_slope, slope);
    rep.max_slope = std::max(rep.max_slope, slope);
  };

  for (double p1 : p1_grid) {
    for (double p2 : p2_grid) {
      // Bare form z = e^(p-1) and ratio-weighted form, both directions.
      const double s1_bare = best_response_slope(std::exp(p2 - 1.0));
      const double s2_bare = best_response_slope(std::exp(p1 - 1.0));
      const double s1_full = best_response_slope(r1 * std::exp(p2 - 1.0));
      const double s2_full = best_response_slope(r2 * std::exp(p1 - 1.0));
      record(s1_bare);
      record(s2_bare);
      record(s1_full);
      record(s2_full);
      const double lam_bare = std::sqrt(s1_bare * s2_bare);
      const double lam_full = std::sqrt(s1_full * s2_full);
      rep.max_lambda = std::max({rep.max_lambda, lam_bare, lam_full});
    }
  }
  rep.all_in_unit = rep.min_slope > 0.0 && rep.max_slope < 1.0;
  return rep;
}

double best_response_bandwidth(double p_self, double p_other,
                               double omega_other, double y_self,
                               double y_other, double n, double cost,
                               double lo, double hi, double tol) {
  if (!(lo <= hi)) throw std::invalid_argument("search bounds");

  auto utility = [&](double w) {
    if (w <= 0.0) return 0.0;
    const double share = equilibrium_share_closed(p_self, p_other, w,
                                                  omega_other, y_self, y_other,
                                                  n);
    return p_self * share - cost * w;
  };

  constexpr double phi = 0.6180339887498949;  // golden ratio - 1
  double a = lo, b = hi;
  double c = b - phi * (b - a);
  double d = a + phi * (b - a);
  double fc = utility(c), fd = utility(d);
  while (b - a > tol) {
    if (fc > fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - phi * (b - a);
      fc = utility(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + phi * (b - a);
      fd = utility(d);
    }
  }
  const double mid = 0.5 * (a + b);
  // Flat objective (within tolerance of the endpoints) resolves to lo.
  if (std::abs(utility(mid) - utility(lo)) < 1e-12 &&
      std::abs(utility(mid) - utility(hi)) < 1e-12)
    return lo;
  return mid;
}

BandwidthEquilibrium bandwidth_equilibrium(double p1, double p2, double y1,
                                           double y2, double n, double cost1,
                                           double cost2, double cap,
                                           double tol, int max_iter,
                                           double start1, double start2) {
  BandwidthEquilibrium out;
  out.omega1 = start1;
  out.omega2 = start2;
  for (int it = 1; it <= max_iter; ++it) {
    const double w1 = best_response_bandwidth(p1, p2, out.omega2, y1, y2, n,
                                              cost1, 0.0, cap, tol * 0.1);
    const double w2 = best_response_bandwidth(p2, p1, w1, y2, y1, n, cost2,
                                              0.0, cap, tol * 0.1);
    const double change =
        std::max(std::abs(w1 - out.omega1), std::abs(w2 - out.omega2));
    out.omega1 = w1;
    out.omega2 = w2;
    out.iterations = it;
    if (change < tol) {
      out.converged = true;
      break;
    }
  }
  return out;
}

}  // namespace cd2d
