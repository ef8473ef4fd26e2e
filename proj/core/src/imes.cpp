#include "cd2d/imes.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <stdexcept>

namespace cd2d {

void MmdAgent::validate() const {
  if (!(omega >= 0.0 && omega <= omega_cap))
    throw std::invalid_argument("omega in [0, omega_cap]");
  if (!(price >= 0.0)) throw std::invalid_argument("price >= 0");
  if (!(cost >= 0.0)) throw std::invalid_argument("cost >= 0");
  if (!(delta_t > 0.0)) throw std::invalid_argument("delta_t > 0");
}

void MarketScenario::validate() const {
  if (n_mmds < 1) throw std::invalid_argument("n_mmds >= 1");
  if (static_cast<int>(mmds.size()) != n_mmds)
    throw std::invalid_argument("one MmdAgent per relay");
  if (n_groups < 1) throw std::invalid_argument("n_groups >= 1");
  for (int g : agent_group)
    if (g < 0 || g >= n_groups) throw std::invalid_argument("agent_group");
  if (!candidates.empty() &&
      candidates.size() != agent_group.size())
    throw std::invalid_argument("candidates per agent");
  if (!capacity) throw std::invalid_argument("capacity model required");
  for (const auto& m : mmds) m.validate();
}

void ImesConfig::validate() const {
  if (waiting_rounds < 1) throw std::invalid_argument("waiting_rounds >= 1");
  if (!(stability_tol > 0.0)) throw std::invalid_argument("stability_tol > 0");
  if (max_rounds < 1) throw std::invalid_argument("max_rounds >= 1");
}

double group_average_utility(std::span<const double> utilities,
                             std::span<const int> counts) {
  if (utilities.size() != counts.size())
    throw std::invalid_argument("utilities and counts must align");
  double weighted = 0.0;
  long total = 0;
  for (std::size_t i = 0; i < utilities.size(); ++i) {
    weighted += utilities[i] * static_cast<double>(counts[i]);
    total += counts[i];
  }
  if (total <= 0) throw std::invalid_argument("empty group");
  return weighted / static_cast<double>(total);
}

double switch_probability(double avg, double own) {
  if (avg <= 0.0) return 0.0;
  return std::clamp((avg - own) / avg, 0.0, 1.0);
}

void dam_update(MmdAgent& agent, double u_now, double u_before) {
  const double grad = (u_now - u_before) / agent.delta_t;
  double dw = agent.mu_omega * agent.learning_scale * grad;
  double dp = agent.mu_p * agent.learning_scale * grad;
  if (agent.step_cap > 0.0) {
    dw = std::clamp(dw, -agent.step_cap, agent.step_cap);
    dp = std::clamp(dp, -agent.step_cap, agent.step_cap);
  }
  agent.omega = std::clamp(agent.omega + dw, 0.0, agent.omega_cap);
  agent.price = std::max(agent.price + dp, 0.0);
  agent.u_prev = u_before;
  agent.u_curr = u_now;
}

namespace {

double agent_rng_uniform(OmdAgent& a) {
  std::uint64_t z = (a.rng_state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  z ^= z >> 31;
  return static_cast<double>(z >> 11) * 0x1.0p-53;
}

int agent_rng_int(OmdAgent& a, int n) {
  std::uint64_t z = (a.rng_state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  z ^= z >> 31;
  return static_cast<int>(z % static_cast<std::uint64_t>(n));
}

}  // namespace

ImesEngine::ImesEngine(const ImesConfig& cfg, const MarketScenario& scenario)
    : cfg_(cfg), scenario_(scenario), rng_(Rng::stream(cfg.seed, 0)) {
  cfg_.validate();
  scenario_.validate();
  const int n = scenario_.agents();
  agents_.resize(n);
  for (int a = 0; a < n; ++a) {
    agents_[a].group_id = scenario_.agent_group[a];
    agents_[a].rng_state =
        cfg_.seed ^ (0x9e3779b97f4a7c15ULL * (static_cast<std::uint64_t>(a) + 7));
    // Initial relay chosen at random from the agent's candidate set.
    if (!scenario_.candidates.empty() && !scenario_.candidates[a].empty()) {
      const auto& c = scenario_.candidates[a];
      agents_[a].current_mmd = c[agent_rng_int(agents_[a],
                                               static_cast<int>(c.size()))];
    } else {
      agents_[a].current_mmd = agent_rng_int(agents_[a], scenario_.n_mmds);
    }
  }
  prev_utilities_.assign(n, 0.0);
  prev_attachment_.assign(n, -1);
}

std::vector<int> ImesEngine::attachment_counts() const {
  std::vector<int> counts(scenario_.n_mmds, 0);
  for (const auto& a : agents_)
    if (a.current_mmd >= 0) ++counts[a.current_mmd];
  return counts;
}

double ImesEngine::agent_utility(int agent, int mmd,
                                 std::span<const double> omegas,
                                 std::span<const double> prices,
                                 std::span<const int> counts) const {
  const double cap =
      scenario_.capacity(agent, mmd, omegas[mmd], counts[mmd]);
  return scenario_.caps.alpha * scenario_.caps.t_access * cap - prices[mmd];
}

DaoRoundResult ImesEngine::dao_round(std::span<const double> omegas,
                                     std::span<const double> prices) {
  const int n = scenario_.agents();
  const int m = scenario_.n_mmds;
  DaoRoundResult out;

  const std::vector<int> counts = attachment_counts();
  std::vector<double> u(n, 0.0);
  for (int a = 0; a < n; ++a)
    u[a] = agent_utility(a, agents_[a].current_mmd, omegas, prices, counts);

  // Group averages from the previous round's reports (first round: current).
  std::vector<int> cur_att(n);
  for (int a = 0; a < n; ++a) cur_att[a] = agents_[a].current_mmd;
  const std::vector<double>& base_u = has_prev_ ? prev_utilities_ : u;
  const std::vector<int>& base_att = has_prev_ ? prev_attachment_ : cur_att;

  // Aggregate per (group, relay) so the averages use the published form.
  std::vector<std::vector<double>> gu(scenario_.n_groups,
                                      std::vector<double>(m, 0.0));
  std::vector<std::vector<int>> gc(scenario_.n_groups,
                                   std::vector<int>(m, 0));
  for (int a = 0; a < n; ++a) {
    const int g = agents_[a].group_id;
    const int k = base_att[a];
    if (k < 0) continue;
    gu[g][k] += base_u[a];
    ++gc[g][k];
  }
  std::vector<double> gavg(scenario_.n_groups, 0.0);
  std::vector<bool> gnonempty(scenario_.n_groups, false);
  for (int g = 0; g < scenario_.n_groups; ++g) {
    std::vector<double> means(m, 0.0);
    long total = 0;
    for (int k = 0; k < m; ++k) {
      if (gc[g][k] > 0) means[k] = gu[g][k] / gc[g][k];
      total += gc[g][k];
    }
    if (total > 0) {
      gavg[g] = group_average_utility(means, gc[g]);
      gnonempty[g] = true;
    }
  }

  // Per-group member lists (current utilities) for imitation targets.
  std::vector<std::vector<int>> members(scenario_.n_groups);
  for (int a = 0; a < n; ++a) members[agents_[a].group_id].push_back(a);

  std::vector<int> next(n);
  for (int a = 0; a < n; ++a) next[a] = agents_[a].current_mmd;

  for (int a = 0; a < n; ++a) {
    const int g = agents_[a].group_id;
    if (!gnonempty[g]) continue;
    if (u[a] >= gavg[g]) continue;  // satisfied agents keep their link
    const double psi = switch_probability(gavg[g], u[a]);
    if (psi <= 0.0) continue;
    if (agent_rng_uniform(agents_[a]) >= psi) continue;

    const std::vector<int>* cand = nullptr;
    if (!scenario_.candidates.empty()) cand = &scenario_.candidates[a];
    auto allowed = [&](int k) {
      if (!cand || cand->empty()) return true;
      return std::find(cand->begin(), cand->end(), k) != cand->end();
    };

    // Imitate a uniformly chosen higher-utility member whose relay the
    // agent may use; with no such member, occasionally leave for a random
    // candidate so full-consensus groups stay responsive.
    std::vector<int> targets;
    for (int b : members[g])
      if (u[b] > u[a] && allowed(agents_[b].current_mmd))
        targets.push_back(agents_[b].current_mmd);
    int dest;
    if (!targets.empty()) {
      dest = targets[agent_rng_int(agents_[a],
                                   static_cast<int>(targets.size()))];
    } else if (agent_rng_uniform(agents_[a]) < cfg_.explore_prob) {
      if (cand && !cand->empty())
        dest = (*cand)[agent_rng_int(agents_[a],
                                     static_cast<int>(cand->size()))];
      else
        dest = agent_rng_int(agents_[a], m);
    } else {
      continue;
    }
    if (dest != agents_[a].current_mmd) {
      next[a] = dest;
      ++out.switches;
    }
  }

  // Publish this round for the next round's averages.
  prev_utilities_ = u;
  prev_attachment_.resize(n);
  for (int a = 0; a < n; ++a) prev_attachment_[a] = agents_[a].current_mmd;
  has_prev_ = true;

  for (int a = 0; a < n; ++a) {
    agents_[a].last_utility = u[a];
    agents_[a].current_mmd = next[a];
  }

  // Stability: every group within tolerance of one common utility.
  out.stable = true;
  for (int g = 0; g < scenario_.n_groups && out.stable; ++g) {
    double lo = 1e300, hi = -1e300;
    for (int b : members[g]) {
      lo = std::min(lo, u[b]);
      hi = std::max(hi, u[b]);
    }
    if (!members[g].empty() && hi - lo > equal_tol_) out.stable = false;
  }
  return out;
}

SimTrace ImesEngine::run() {
  const int m = scenario_.n_mmds;
  SimTrace trace;

  std::vector<double> base_omega(m), base_price(m);
  for (int k = 0; k < m; ++k) {
    base_omega[k] = scenario_.mmds[k].omega;
    base_price[k] = scenario_.mmds[k].price;
  }

  // Trailing history of base strategies for the smoothed readout.
  std::vector<std::vector<double>> price_hist, omega_hist;
  std::vector<double> sm_price_prev, sm_omega_prev;
  bool have_smoothed_prev = false;
  int stable_run = 0;
  std::vector<int> prober_turns(m, 0);

  const int half_window = std::max(1, cfg_.waiting_rounds / 2);
  const int avg_from = std::max(1, half_window / 2);

  // Runs `half_window` follower rounds and returns the mean attachment
  // count per relay over the tail of the window.
  auto follower_window = [&](std::span<const double> omegas,
                             std::span<const double> prices) {
    std::vector<double> acc(m, 0.0);
    int samples = 0;
    for (int t = 0; t < half_window; ++t) {
      dao_round(omegas, prices);
      if (t >= avg_from) {
        const auto counts = attachment_counts();
        for (int k = 0; k < m; ++k) acc[k] += counts[k];
        ++samples;
      }
    }
    if (samples == 0) samples = 1;
    for (auto& v : acc) v /= samples;
    return acc;
  };

  auto counts_per_group = [&]() {
    std::vector<std::vector<int>> cpg(m,
                                      std::vector<int>(scenario_.n_groups, 0));
    for (const auto& a : agents_)
      if (a.current_mmd >= 0) ++cpg[a.current_mmd][a.group_id];
    return cpg;
  };

  bool converged = false;
  int round = 0;
  for (round = 1; round <= cfg_.max_rounds; ++round) {
    const int prober = (round - 1) % m;
    const int turn = ++prober_turns[prober];
    const double probe =
        cfg_.probe0 / std::pow(static_cast<double>(turn), cfg_.probe_pow);
    const double gain_scale =
        1.0 / std::pow(static_cast<double>(turn), cfg_.gain_pow);
    const bool has_p = scenario_.mmds[prober].mu_p > 0.0;
    const bool has_w = scenario_.mmds[prober].mu_omega > 0.0;
    bool probe_price = true;
    double probe_width = probe;
    if (has_p && has_w) {
      probe_price = (turn % 2 == 1);  // alternate the probed component
    } else if (has_w) {
      probe_price = false;
    } else if (!has_p) {
      probe_width = 0.0;  // frozen strategies, nothing to learn
    }
    const double xi = rng_.uniform() < 0.5 ? 1.0 : -1.0;

    std::vector<double> omegas = base_omega, prices = base_price;
    auto apply_probe = [&](double sign) {
      if (probe_price)
        prices[prober] =
            std::max(base_price[prober] + sign * probe_width, 0.0);
      else
        omegas[prober] =
            std::clamp(base_omega[prober] + sign * probe_width, 0.0,
                       scenario_.mmds[prober].omega_cap);
    };

    // Two measurement phases differing only in the prober's own strategy.
    apply_probe(xi);
    const auto n_a = follower_window(omegas, prices);
    std::vector<double> u_a(m);
    for (int k = 0; k < m; ++k)
      u_a[k] = prices[k] * n_a[k] - scenario_.mmds[k].cost * omegas[k];

    apply_probe(-xi);
    const auto n_b = follower_window(omegas, prices);
    std::vector<double> u_b(m);
    for (int k = 0; k < m; ++k)
      u_b[k] = prices[k] * n_b[k] - scenario_.mmds[k].cost * omegas[k];

    // One leader update per relay per round. The prober feeds its pair
    // ordered by its own probe direction; the others see no difference.
    double max_change = 0.0;
    for (int k = 0; k < m; ++k) {
      MmdAgent& agent = scenario_.mmds[k];
      agent.omega = base_omega[k];
      agent.price = base_price[k];
      agent.learning_scale = gain_scale;
      agent.step_cap = cfg_.step_cap;
      if (k == prober) {
        const double hi = xi > 0.0 ? u_a[k] : u_b[k];
        const double lo = xi > 0.0 ? u_b[k] : u_a[k];
        dam_update(agent, hi, lo);
      } else {
        dam_update(agent, u_a[k], u_a[k]);
      }
      max_change = std::max({max_change, std::abs(agent.omega - base_omega[k]),
                             std::abs(agent.price - base_price[k])});
      base_omega[k] = agent.omega;
      base_price[k] = agent.price;
    }

    price_hist.push_back(base_price);
    omega_hist.push_back(base_omega);

    const auto cpg = counts_per_group();
    for (int k = 0; k < m; ++k) {
      TraceRow row;
      row.round = round;
      row.mmd = k;
      row.omega = base_omega[k];
      row.price = base_price[k];
      row.utility = 0.5 * (u_a[k] + u_b[k]);
      row.attached_per_group = cpg[k];
      trace.rows.push_back(std::move(row));
    }

    // Convergence on the smoothed strategies.
    const int w = cfg_.smooth_window;
    if (static_cast<int>(price_hist.size()) >= w) {
      std::vector<double> smp(m, 0.0), smw(m, 0.0);
      for (int i = static_cast<int>(price_hist.size()) - w;
           i < static_cast<int>(price_hist.size()); ++i)
        for (int k = 0; k < m; ++k) {
          smp[k] += price_hist[i][k] / w;
          smw[k] += omega_hist[i][k] / w;
        }
      if (have_smoothed_prev) {
        double d = 0.0;
        for (int k = 0; k < m; ++k)
          d = std::max({d, std::abs(smp[k] - sm_price_prev[k]),
                        std::abs(smw[k] - sm_omega_prev[k])});
        if (d < cfg_.stability_tol && round >= cfg_.min_rounds) {
          if (++stable_run >= cfg_.stable_needed) {
            sm_price_prev = smp;
            sm_omega_prev = smw;
            converged = true;
          }
        } else {
          stable_run = 0;
        }
      }
      sm_price_prev = smp;
      sm_omega_prev = smw;
      have_smoothed_prev = true;
      if (converged) break;
    }
  }

  trace.rounds = std::min(round, cfg_.max_rounds);
  trace.converged = converged;
  trace.budget_exhausted = !converged;

  // Report strategies averaged over the tail of the run; the tail window
  // spans several follower sloshes, which the per-round strategies track.
  const int hist_n = static_cast<int>(price_hist.size());
  if (hist_n > 0) {
    const int from = std::max(hist_n / 3, hist_n - 300);
    const int count = hist_n - from;
    trace.final_prices.assign(m, 0.0);
    trace.final_omegas.assign(m, 0.0);
    for (int i = from; i < hist_n; ++i)
      for (int k = 0; k < m; ++k) {
        trace.final_prices[k] += price_hist[i][k] / count;
        trace.final_omegas[k] += omega_hist[i][k] / count;
      }
  } else {
    trace.final_prices = base_price;
    trace.final_omegas = base_omega;
  }

  std::vector<std::vector<int>> votes(scenario_.agents(),
                                      std::vector<int>(m, 0));
  std::vector<double> occupancy(m, 0.0);
  int occ_samples = 0;
  for (int t = 0; t < cfg_.settle_rounds; ++t) {
    dao_round(trace.final_omegas, trace.final_prices);
    if (t >= cfg_.settle_rounds / 3) {
      for (int a = 0; a < scenario_.agents(); ++a)
        ++votes[a][agents_[a].current_mmd];
      const auto counts = attachment_counts();
      for (int k = 0; k < m; ++k) occupancy[k] += counts[k];
      ++occ_samples;
    }
  }
  trace.final_attachment.resize(scenario_.agents());
  for (int a = 0; a < scenario_.agents(); ++a) {
    int best = 0;
    for (int k = 1; k < m; ++k)
      if (votes[a][k] > votes[a][best]) best = k;
    trace.final_attachment[a] =
        cfg_.settle_rounds > 0 ? best : agents_[a].current_mmd;
  }

  // Mean occupancy over the settle tail, rounded by largest remainder so
  // the relay counts add up to the population.
  trace.final_counts.assign(m, 0);
  if (occ_samples > 0) {
    std::vector<double> mean(m);
    for (int k = 0; k < m; ++k) mean[k] = occupancy[k] / occ_samples;
    int assigned = 0;
    std::vector<std::pair<double, int>> rem;
    for (int k = 0; k < m; ++k) {
      trace.final_counts[k] = static_cast<int>(std::floor(mean[k]));
      assigned += trace.final_counts[k];
      rem.push_back({mean[k] - std::floor(mean[k]), k});
    }
    std::sort(rem.begin(), rem.end(),
              [](const auto& a, const auto& b) { return a.first > b.first; });
    for (int i = 0; i < scenario_.agents() - assigned && i < m; ++i)
      ++trace.final_counts[rem[i].second];
  } else {
    for (int a : trace.final_attachment) ++trace.final_counts[a];
  }
  return trace;
}

SimTrace run_imes(const ImesConfig& cfg, const MarketScenario& scenario) {
  ImesEngine engine(cfg, scenario);
  return engine.run();
}

std::string SimTrace::to_csv(const std::string& header) const {
  std::string out = header;
  out += "round,mmd_id,omega,price,utility";
  const std::size_t gs = rows.empty() ? 0 : rows[0].attached_per_group.size();
  for (std::size_t g = 0; g < gs; ++g)
    out += ",attached_g" + std::to_string(g);
  out += "\n";
  char buf[96];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%d,%d,%.10g,%.10g,%.10g", r.round, r.mmd,
                  r.omega, r.price, r.utility);
    out += buf;
    for (int c : r.attached_per_group) {
      out += ',';
      out += std::to_string(c);
    }
    out += '\n';
  }
  return out;
}

}  // namespace cd2d
