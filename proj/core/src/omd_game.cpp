#include "cd2d/omd_game.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace cd2d {

namespace {

constexpr double kSimplexTol = 1e-9;

}  // namespace

double PopulationState::attached_count(int mmd) const {
  double n = 0.0;
  for (int g = 0; g < groups(); ++g)
    n += fractions[g][mmd] * static_cast<double>(group_sizes[g]);
  return n;
}

double PopulationState::total_population() const {
  double n = 0.0;
  for (int s : group_sizes) n += static_cast<double>(s);
  return n;
}

void PopulationState::validate() const {
  if (fractions.size() != group_sizes.size())
    throw std::invalid_argument("one fraction vector per group");
  for (std::size_t g = 0; g < fractions.size(); ++g) {
    if (group_sizes[g] < 1) throw std::invalid_argument("group_sizes >= 1");
    if (fractions[g].size() != fractions[0].size())
      throw std::invalid_argument("equal relay count across groups");
    double sum = 0.0;
    for (double f : fractions[g]) {
      if (!(f >= 0.0)) throw std::invalid_argument("fractions >= 0");
      sum += f;
    }
    if (std::abs(sum - 1.0) > kSimplexTol)
      throw std::invalid_argument("group fractions sum to 1");
  }
}

void EvoParams::validate() const {
  if (!(delta > 0.0)) throw std::invalid_argument("delta > 0");
  if (tau < 0) throw std::invalid_argument("tau >= 0");
  if (!(dt > 0.0)) throw std::invalid_argument("dt > 0");
}

void GroupEconomics::validate() const {
  for (const auto& row : y_values)
    for (double y : row)
      if (!(y > 0.0)) throw std::invalid_argument("y_values > 0");
  for (double w : omega)
    if (!(w >= 0.0)) throw std::invalid_argument("omega >= 0");
  for (double p : prices)
    if (!(p >= 0.0)) throw std::invalid_argument("prices >= 0");
}

double omd_utility(double c_r, double c_d, double price,
                   const CapacityParams& params) {
  if (!(c_r > c_d)) return 0.0;
  return params.alpha * params.t_access * std::max(c_r, c_d) - price;
}

UtilitySnapshot group_utilities(const PopulationState& state,
                                const GroupEconomics& econ,
                                const CapacityParams& caps) {
  const int gs = state.groups();
  const int ms = state.mmds();
  UtilitySnapshot snap;
  snap.u.assign(gs, std::vector<double>(ms, 0.0));
  snap.mean.assign(gs, 0.0);
  snap.weights = state.fractions;

  std::vector<double> counts(ms, 0.0);
  for (int m = 0; m < ms; ++m) counts[m] = state.attached_count(m);

  for (int g = 0; g < gs; ++g) {
    double mean = 0.0;
    for (int m = 0; m < ms; ++m) {
      const double w = state.fractions[g][m];
      double u = 0.0;
      if (counts[m] > 0.0) {
        const double cap = std::log2(caps.k_omega * econ.omega[m] *
                                     econ.y_values[g][m] / counts[m]);
        u = caps.alpha * caps.t_access * cap - econ.prices[m];
      }
      snap.u[g][m] = u;
      mean += w * u;
    }
    snap.mean[g] = mean;
  }
  return snap;
}

void UtilityHistory::push(UtilitySnapshot snap) {
  buf_.push_front(std::move(snap));
}

const UtilitySnapshot& UtilityHistory::delayed(int tau) const {
  if (buf_.size() <= static_cast<std::size_t>(tau))
    throw std::out_of_range("history shorter than tau");
  return buf_[static_cast<std::size_t>(tau)];
}

void UtilityHistory::trim(std::size_t keep) {
  while (buf_.size() > keep) buf_.pop_back();
}

PopulationState replicator_step(const PopulationState& state,
                                const UtilityHistory& history,
                                const EvoParams& params) {
  const UtilitySnapshot& past = history.delayed(params.tau);
  PopulationState next = state;
  for (int g = 0; g < state.groups(); ++g) {
    double sum = 0.0;
    for (int m = 0; m < state.mmds(); ++m) {
      const double pi = state.fractions[g][m];
      const double growth =
          params.delta * pi * (past.u[g][m] - past.mean[g]);
      double v = pi + params.dt * growth;
      v = std::clamp(v, 0.0, 1.0);
      next.fractions[g][m] = v;
      sum += v;
    }
    if (sum > 0.0)
      for (int m = 0; m < state.mmds(); ++m) next.fractions[g][m] /= sum;
  }
  return next;
}

std::vector<std::vector<double>> replicator_field(const PopulationState& state,
                                                  const GroupEconomics& econ,
                                                  const CapacityParams& caps,
                                                  double delta) {
  const UtilitySnapshot snap = group_utilities(state, econ, caps);
  std::vector<std::vector<double>> field(
      state.groups(), std::vector<double>(state.mmds(), 0.0));
  for (int g = 0; g < state.groups(); ++g)
    for (int m = 0; m < state.mmds(); ++m)
      field[g][m] =
          delta * state.fractions[g][m] * (snap.u[g][m] - snap.mean[g]);
  return field;
}

EvolveResult evolve(PopulationState start, const GroupEconomics& econ,
                    const CapacityParams& caps, const EvoParams& params,
                    const EvolveOptions& opts) {
  params.validate();
  start.validate();

  EvolveResult out;
  UtilityHistory history;
  // Seed the delay line by replaying the initial state.
  const UtilitySnapshot init = group_utilities(start, econ, caps);
  for (int i = 0; i <= params.tau; ++i) history.push(init);

  PopulationState state = std::move(start);
  auto sample = [&](const PopulationState& s) {
    std::vector<double> flat;
    for (const auto& row : s.fractions)
      flat.insert(flat.end(), row.begin(), row.end());
    out.samples.push_back(std::move(flat));
  };
  if (opts.sample_stride > 0) sample(state);

  for (long step = 1; step <= opts.max_steps; ++step) {
    state = replicator_step(state, history, params);
    history.push(group_utilities(state, econ, caps));
    history.trim(static_cast<std::size_t>(params.tau) + 1);
    out.steps = step;
    if (opts.sample_stride > 0 && step % opts.sample_stride == 0)
      sample(state);

    const auto field = replicator_field(state, econ, caps, params.delta);
    double vmax = 0.0;
    for (const auto& row : field)
      for (double v : row) vmax = std::max(vmax, std::abs(v));
    if (vmax < opts.pi_dot_tol) {
      out.converged = true;
      break;
    }
  }
  if (opts.sample_stride > 0) sample(state);
  out.state = std::move(state);
  return out;
}

double equilibrium_share_quadratic(double a, double b, double d, double omega1,
                                   double omega2, double n) {
  if (!(n >= 1.0)) throw std::invalid_argument("n >= 1");
  if (!(omega1 > 0.0 && omega2 > 0.0))
    throw std::invalid_argument("omega > 0");
  if (!(a > 0.0 && b > 0.0)) throw std::invalid_argument("A, B > 0");

  const double wa = omega1 * a;
  const double wb = omega2 * b;
  if (d == 0.0) return wa * n / (wa + wb);

  // d*X^2 - (wa + wb + n*d)*X + wa*n = 0, solved with the stable form of
  // the quadratic formula.
  const double bq = -(wa + wb + n * d);
  const double cq = wa * n;
  const double disc = bq * bq - 4.0 * d * cq;
  if (disc < 0.0) throw std::domain_error("no real root in (0, n)");
  const double sq = std::sqrt(disc);
  const double q = -0.5 * (bq + (bq >= 0.0 ? sq : -sq));
  const double r1 = q / d;
  const double r2 = cq / q;
  for (double r : {r1, r2})
    if (r > 0.0 && r < n) return r;
  throw std::domain_error("no real root in (0, n)");
}

double equilibrium_share_closed(double p1, double p2, double omega1,
                                double omega2, double y1, double y2,
                                double n) {
  const double ratio = (omega2 * y2) / (omega1 * y1);
  return n / (1.0 + std::exp2(p1 - p2) * ratio);
}

JacobianResult evo_jacobian(const PopulationState& state,
                            const GroupEconomics& econ,
                            const CapacityParams& caps, double delta,
                            double fd_step) {
  if (state.groups() != 2 || state.mmds() != 2)
    throw std::invalid_argument("jacobian requires two groups and two relays");

  bool interior = true;
  for (const auto& row : state.fractions)
    for (double f : row)
      if (f <= 0.0 || f >= 1.0) interior = false;

  // Growth of the relay-1 fraction in group k, as a function of the two
  // relay-1 fractions.
  auto growth = [&](double x0, double x1, int k) {
    PopulationState s = state;
    s.fractions[0] = {x0, 1.0 - x0};
    s.fractions[1] = {x1, 1.0 - x1};
    const UtilitySnapshot snap = group_utilities(s, econ, caps);
    return delta * s.fractions[k][0] * (snap.u[k][0] - snap.mean[k]);
  };

  const double x0 = state.fractions[0][0];
  const double x1 = state.fractions[1][0];
  const double h = fd_step;

  JacobianResult out;
  for (int k = 0; k < 2; ++k) {
    out.j[k][0] = (growth(x0 + h, x1, k) - growth(x0 - h, x1, k)) / (2.0 * h);
    out.j[k][1] = (growth(x0, x1 + h, k) - growth(x0, x1 - h, k)) / (2.0 * h);
  }

  const double tr = out.j[0][0] + out.j[1][1];
  const double det = out.j[0][0] * out.j[1][1] - out.j[0][1] * out.j[1][0];
  const std::complex<double> disc =
      std::sqrt(std::complex<double>(tr * tr - 4.0 * det, 0.0));
  out.eig1 = (tr + disc) / 2.0;
  out.eig2 = (tr - disc) / 2.0;

  constexpr double tol = 1e-9;
  if (!interior) {
    out.stability = StabilityClass::boundary;
  } else if (out.eig1.real() < -tol && out.eig2.real() < -tol) {
    out.stability = StabilityClass::stable;
  } else if (out.eig1.real() > tol || out.eig2.real() > tol) {
    out.stability = StabilityClass::unstable;
  } else {
    out.stability = StabilityClass::marginal;
  }
  return out;
}

const char* to_string(StabilityClass c) {
  switch (c) {
    case StabilityClass::stable: return "stable";
    case StabilityClass::unstable: return "unstable";
    case StabilityClass::marginal: return "marginal";
    case StabilityClass::boundary: return "boundary";
  }
  return "unknown";
}

}  // namespace cd2d
