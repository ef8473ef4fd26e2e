#include "cd2d/sim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <thread>

#include "cd2d/channel.hpp"
#include "cd2d/rng.hpp"

namespace cd2d {

namespace {

double dist(const std::array<double, 2>& a, const std::array<double, 2>& b) {
  const double dx = a[0] - b[0];
  const double dy = a[1] - b[1];
  return std::sqrt(dx * dx + dy * dy);
}

// Channel and candidate data of one source->destination flow.
struct FlowData {
  double snr_d = 0.0;
  std::vector<int> in_range;           // relays within range of both ends
  std::vector<double> snr_r;           // aligned with in_range
  std::vector<int> beneficial;         // subset of in_range
  int group = 0;                       // nearest relay to the source
};

std::vector<FlowData> build_flows(const Topology& topo,
                                  const DelayScenario& sc) {
  std::vector<FlowData> flows;
  flows.reserve(topo.sd_pairs.size());
  for (const auto& [s, d] : topo.sd_pairs) {
    FlowData f;
    const auto& ps = topo.omd_positions[s];
    const auto& pd = topo.omd_positions[d];
    const double dsd = std::max(dist(ps, pd), sc.pathloss.min_distance);
    const double h_sd = channel_from_distance(dsd, sc.pathloss.exponent,
                                              sc.pathloss.reference_gain);
    ChannelGains g;
    g.h_sd = h_sd;
    g.p_source = sc.power;
    g.p_relay = sc.power;
    g.noise_var = sc.noise_var;
    f.snr_d = snr_direct(g);

    double best = std::numeric_limits<double>::max();
    for (int k = 0; k < static_cast<int>(topo.mmd_positions.size()); ++k) {
      const auto& pm = topo.mmd_positions[k];
      const double dk = dist(ps, pm);
      if (dk < best) {
        best = dk;
        f.group = k;
      }
      if (dk > topo.comm_range || dist(pd, pm) > topo.comm_range) continue;
      g.h_sr = channel_from_distance(std::max(dk, sc.pathloss.min_distance),
                                     sc.pathloss.exponent,
                                     sc.pathloss.reference_gain);
      g.h_rd = channel_from_distance(
          std::max(dist(pd, pm), sc.pathloss.min_distance),
          sc.pathloss.exponent, sc.pathloss.reference_gain);
      const double sr = snr_relayed(g);
      f.in_range.push_back(k);
      f.snr_r.push_back(sr);
      if (relay_beneficial(capacity_relay(1.0, f.snr_d, sr),
                           capacity_direct(1.0, f.snr_d)))
        f.beneficial.push_back(k);
    }
    flows.push_back(std::move(f));
  }
  return flows;
}

double flow_snr_r(const FlowData& f, int mmd) {
  for (std::size_t i = 0; i < f.in_range.size(); ++i)
    if (f.in_range[i] == mmd) return f.snr_r[i];
  return -1.0;  // out of range
}

// In-slot throughput of a flow served by `mmd` at bandwidth `bw`: the relay
// path when it beats the direct one, the direct rate otherwise.
double in_slot_rate(const FlowData& f, int mmd, double bw) {
  const double cd = capacity_direct(bw, f.snr_d);
  const double sr = flow_snr_r(f, mmd);
  if (sr < 0.0) return cd;
  const double cr = capacity_relay(bw, f.snr_d, sr);
  return relay_beneficial(cr, cd) ? cr : cd;
}

std::vector<double> omega_per_relay(const DelayScenario& sc, int n_mmd) {
  std::vector<double> w(n_mmd);
  for (int k = 0; k < n_mmd; ++k)
    w[k] = sc.omega_profile[k % sc.omega_profile.size()];
  return w;
}

std::vector<int> imes_attachment(const std::vector<FlowData>& flows,
                                 const DelayScenario& sc, int n_mmd,
                                 std::uint64_t seed) {
  std::vector<int> agent_of_flow;
  std::vector<int> flow_of_agent;
  for (int fidx = 0; fidx < static_cast<int>(flows.size()); ++fidx)
    if (!flows[fidx].in_range.empty()) flow_of_agent.push_back(fidx);
  if (flow_of_agent.empty()) return std::vector<int>(flows.size(), -1);

  MarketScenario market;
  market.n_mmds = n_mmd;
  market.n_groups = n_mmd;
  market.mmds.resize(n_mmd);
  const auto omegas = omega_per_relay(sc, n_mmd);
  for (int k = 0; k < n_mmd; ++k) {
    market.mmds[k].omega = omegas[k];
    market.mmds[k].price = sc.mmd_price;
    market.mmds[k].cost = 0.0;
    market.mmds[k].mu_omega = 0.0;  // offers fixed during the delay study
    market.mmds[k].mu_p = 0.0;
    market.mmds[k].omega_cap = std::max(50.0, omegas[k]);
  }
  market.caps = sc.caps;
  for (int fidx : flow_of_agent) {
    market.agent_group.push_back(flows[fidx].group);
    // Prefer relays that actually help; fall back to anything reachable.
    const auto& f = flows[fidx];
    market.candidates.push_back(f.beneficial.empty() ? f.in_range
                                                     : f.beneficial);
  }
  market.capacity = [&flows, &flow_of_agent](int agent, int mmd, double omega,
                                             int attached) {
    const FlowData& f = flows[flow_of_agent[agent]];
    const double share = omega / std::max(attached, 1);
    return in_slot_rate(f, mmd, share);
  };

  ImesConfig cfg;
  cfg.waiting_rounds = sc.dao_rounds_cap;
  cfg.max_rounds = sc.market_rounds;
  cfg.min_rounds = 2;
  cfg.smooth_window = 2;
  cfg.stable_needed = 1;
  cfg.settle_rounds = sc.settle_rounds;
  cfg.seed = seed;

  const SimTrace trace = run_imes(cfg, market);
  std::vector<int> attach(flows.size(), -1);
  for (std::size_t a = 0; a < flow_of_agent.size(); ++a)
    attach[flow_of_agent[a]] = trace.final_attachment[a];
  return attach;
}

std::vector<int> rand_attachment(const std::vector<FlowData>& flows,
                                 std::uint64_t seed) {
  Rng rng = Rng::stream(seed, 0x9a7d);
  std::vector<int> attach(flows.size(), -1);
  for (std::size_t i = 0; i < flows.size(); ++i) {
    const auto& f = flows[i];
    if (f.in_range.empty()) continue;
    attach[i] = f.in_range[rng.uniform_int(
        static_cast<int>(f.in_range.size()))];
  }
  return attach;
}

}  // namespace

void Topology::validate() const {
  for (const auto& p : omd_positions)
    if (p[0] < 0 || p[0] > width || p[1] < 0 || p[1] > height)
      throw std::invalid_argument("positions inside area");
  for (const auto& p : mmd_positions)
    if (p[0] < 0 || p[0] > width || p[1] < 0 || p[1] > height)
      throw std::invalid_argument("positions inside area");
  std::vector<int> seen(omd_positions.size(), 0);
  for (const auto& [s, d] : sd_pairs) {
    if (++seen[s] > 1 || ++seen[d] > 1)
      throw std::invalid_argument("node in more than one pair");
    if (dist(omd_positions[s], omd_positions[d]) > comm_range + 1e-9)
      throw std::invalid_argument("pair outside comm_range");
  }
}

std::string Topology::to_csv(const std::string& header) const {
  std::string out = header;
  out += "node_id,kind,x,y\n";
  char buf[96];
  for (std::size_t i = 0; i < omd_positions.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%zu,omd,%.10g,%.10g\n", i,
                  omd_positions[i][0], omd_positions[i][1]);
    out += buf;
  }
  for (std::size_t i = 0; i < mmd_positions.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%zu,mmd,%.10g,%.10g\n",
                  i + omd_positions.size(), mmd_positions[i][0],
                  mmd_positions[i][1]);
    out += buf;
  }
  return out;
}

Topology generate_topology(double width, double height, int n_omd, int n_mmd,
                           double comm_range, std::uint64_t seed) {
  if (n_omd < 1 || n_mmd < 1) throw std::invalid_argument("counts >= 1");
  if (!(width > 0 && height > 0)) throw std::invalid_argument("area positive");

  Topology topo;
  topo.width = width;
  topo.height = height;
  topo.comm_range = comm_range;
  Rng rng = Rng::stream(seed, 0x70b0);
  topo.omd_positions.reserve(n_omd);
  for (int i = 0; i < n_omd; ++i)
    topo.omd_positions.push_back(
        {rng.uniform(0.0, width), rng.uniform(0.0, height)});
  topo.mmd_positions.reserve(n_mmd);
  for (int i = 0; i < n_mmd; ++i)
    topo.mmd_positions.push_back(
        {rng.uniform(0.0, width), rng.uniform(0.0, height)});

  std::vector<bool> paired(n_omd, false);
  for (int i = 0; i < n_omd; ++i) {
    if (paired[i]) continue;
    int best = -1;
    double best_d = comm_range;
    for (int j = 0; j < n_omd; ++j) {
      if (j == i || paired[j]) continue;
      const double d = dist(topo.omd_positions[i], topo.omd_positions[j]);
      if (d <= best_d) {
        best_d = d;
        best = j;
      }
    }
    if (best >= 0) {
      paired[i] = paired[best] = true;
      topo.sd_pairs.emplace_back(i, best);
    }
  }
  for (int i = 0; i < n_omd; ++i)
    if (!paired[i]) topo.unpaired.push_back(i);

  if (static_cast<int>(topo.unpaired.size()) * 2 > n_omd)
    throw TopologyError("pairing infeasible for " +
                        std::to_string(topo.unpaired.size()) + " of " +
                        std::to_string(n_omd) + " nodes");
  return topo;
}

double channel_from_distance(double distance, double exponent,
                             double reference_gain) {
  if (!(distance > 0.0)) throw std::invalid_argument("distance > 0");
  const double g = reference_gain * std::pow(distance, -exponent);
  return std::min(1.0, std::sqrt(g));
}

double calibrate_reference_gain(double target_gain, double at_distance,
                                double exponent) {
  return target_gain * target_gain * std::pow(at_distance, exponent);
}

void TrafficModel::validate() const {
  if (!(message_size > 0.0)) throw std::invalid_argument("message_size > 0");
  if (!(slot_length > 0.0)) throw std::invalid_argument("slot_length > 0");
  if (slots_per_round < 1) throw std::invalid_argument("slots_per_round >= 1");
}

const char* to_string(Policy p) {
  return p == Policy::imes ? "imes" : "rand";
}

const char* to_string(SweepParam p) {
  switch (p) {
    case SweepParam::omd_count: return "omd_count";
    case SweepParam::mmd_count: return "mmd_count";
    case SweepParam::area: return "area";
  }
  return "unknown";
}

DelayStats simulate_delay(const Topology& topo, Policy policy,
                          const DelayScenario& scenario, std::uint64_t seed) {
  scenario.traffic.validate();
  const int n_mmd = static_cast<int>(topo.mmd_positions.size());
  const auto flows = build_flows(topo, scenario);
  const auto omegas = omega_per_relay(scenario, n_mmd);

  const std::vector<int> attach =
      policy == Policy::imes ? imes_attachment(flows, scenario, n_mmd, seed)
                             : rand_attachment(flows, seed);

  DelayStats stats;
  stats.flows = static_cast<int>(flows.size());
  stats.completion.assign(flows.size(),
                          std::numeric_limits<double>::infinity());

  const double msg = scenario.traffic.message_size;
  const double slot = scenario.traffic.slot_length;

  // Uncovered flows transmit on the dedicated direct band, uncontended.
  for (std::size_t i = 0; i < flows.size(); ++i) {
    if (attach[i] >= 0) continue;
    const double c = capacity_direct(scenario.direct_bandwidth,
                                     flows[i].snr_d);
    if (c > 1e-12) stats.completion[i] = msg / c;
  }

  // Per-relay TDMA: every live flow gets one slot per round, served in flow
  // order; a relay with backlog never idles.
  for (int k = 0; k < n_mmd; ++k) {
    struct Live {
      int flow;
      double remaining;
    };
    std::vector<Live> live;
    for (std::size_t i = 0; i < flows.size(); ++i)
      if (attach[i] == k)
        live.push_back({static_cast<int>(i), msg});
    double t = 0.0;
    long guard = 0;
    while (!live.empty()) {
      const int served =
          std::min<int>(static_cast<int>(live.size()),
                        scenario.traffic.slots_per_round);
      std::vector<Live> next;
      next.reserve(live.size());
      for (int s = 0; s < static_cast<int>(live.size()); ++s) {
        Live fl = live[s];
        if (s < served) {
          const double delivered =
              in_slot_rate(flows[fl.flow], k, omegas[k]) * slot;
          t += slot;
          fl.remaining -= std::min(delivered, fl.remaining);
          if (fl.remaining <= 1e-12) {
            stats.completion[fl.flow] = t;
            continue;
          }
        }
        next.push_back(fl);
      }
      live = std::move(next);
      if (++guard > 4'000'000) break;  // zero-rate flows stay infinite
    }
  }

  std::vector<double> finite;
  finite.reserve(stats.completion.size());
  for (double c : stats.completion) {
    if (std::isfinite(c))
      finite.push_back(c);
    else
      ++stats.infinite_count;
  }
  if (!finite.empty()) {
    std::sort(finite.begin(), finite.end());
    double sum = 0.0;
    for (double c : finite) sum += c;
    stats.mean = sum / static_cast<double>(finite.size());
    auto quantile = [&](double q) {
      const double pos = q * (static_cast<double>(finite.size()) - 1.0);
      const std::size_t lo = static_cast<std::size_t>(pos);
      const std::size_t hi = std::min(lo + 1, finite.size() - 1);
      const double frac = pos - static_cast<double>(lo);
      return finite[lo] * (1.0 - frac) + finite[hi] * frac;
    };
    stats.p50 = quantile(0.50);
    stats.p95 = quantile(0.95);
  }
  return stats;
}

std::vector<SweepCell> delay_sweep(const SweepSpec& spec,
                                   const DelayScenario& scenario, int jobs) {
  if (spec.values.empty()) throw std::invalid_argument("empty sweep range");
  struct Cell {
    double value;
    Policy policy;
  };
  std::vector<Cell> cells;
  for (double v : spec.values)
    for (Policy p : spec.policies) cells.push_back({v, p});

  std::vector<SweepCell> out(cells.size());
  std::atomic_int cursor{0};

  auto worker = [&]() {
    for (;;) {
      const int idx = cursor.fetch_add(1);
      if (idx >= static_cast<int>(cells.size())) return;
      const Cell cell = cells[idx];
      int n_omd = spec.n_omd;
      int n_mmd = spec.n_mmd;
      double width = spec.width, height = spec.height;
      switch (spec.param) {
        case SweepParam::omd_count:
          n_omd = static_cast<int>(cell.value);
          break;
        case SweepParam::mmd_count:
          n_mmd = static_cast<int>(cell.value);
          break;
        case SweepParam::area:
          width = cell.value;
          height = cell.value;
          break;
      }
      SweepCell res;
      res.param_value = cell.value;
      res.policy = cell.policy;
      std::vector<double> means, p95s;
      for (int s = 0; s < spec.seeds; ++s) {
        const std::uint64_t topo_seed =
            spec.seed + 7919ULL * static_cast<std::uint64_t>(s) +
            13ULL * static_cast<std::uint64_t>(n_omd) +
            static_cast<std::uint64_t>(n_mmd) +
            static_cast<std::uint64_t>(cell.value * 1000.0);
        Topology topo;
        try {
          topo = generate_topology(width, height, n_omd, n_mmd,
                                   spec.comm_range, topo_seed);
        } catch (const TopologyError&) {
          continue;  // degenerate density; cell keeps fewer seeds
        }
        const DelayStats st =
            simulate_delay(topo, cell.policy, scenario, topo_seed * 31 + 5);
        if (st.completion.empty()) continue;
        means.push_back(st.mean);
        p95s.push_back(st.p95);
        res.infinite_count += st.infinite_count;
      }
      res.seed_count = static_cast<int>(means.size());
      if (!means.empty()) {
        double sum = 0.0;
        for (double v : means) sum += v;
        res.mean_delay = sum / means.size();
        double var = 0.0;
        for (double v : means) var += (v - res.mean_delay) * (v - res.mean_delay);
        res.std_delay = std::sqrt(var / means.size());
        double p95sum = 0.0;
        for (double v : p95s) p95sum += v;
        res.p95_delay = p95sum / p95s.size();
      }
      out[idx] = res;
    }
  };

  const int workers = std::max(1, jobs);
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < workers; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  return out;
}

std::string sweep_to_csv(const std::vector<SweepCell>& cells,
                         const std::string& header) {
  std::string out = header;
  out +=
      "param_value,policy,seed_count,mean_delay,std_delay,p95_delay,"
      "infinite_count\n";
  char buf[160];
  for (const auto& c : cells) {
    std::snprintf(buf, sizeof(buf), "%.10g,%s,%d,%.10g,%.10g,%.10g,%ld\n",
                  c.param_value, to_string(c.policy), c.seed_count,
                  c.mean_delay, c.std_delay, c.p95_delay, c.infinite_count);
    out += buf;
  }
  return out;
}

}  // namespace cd2d
