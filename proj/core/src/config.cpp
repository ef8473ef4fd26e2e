#include "cd2d/config.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

namespace cd2d {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

[[noreturn]] void fail(const std::string& origin, int line,
                       const std::string& msg) {
  throw ConfigError(origin + ":" + std::to_string(line) + ": " + msg);
}

double parse_double(const std::string& origin, int line,
                    const std::string& v) {
  try {
    std::size_t used = 0;
    const double x = std::stod(v, &used);
    if (used != v.size()) fail(origin, line, "not a number: '" + v + "'");
    return x;
  } catch (const ConfigError&) {
    throw;
  } catch (...) {
    fail(origin, line, "not a number: '" + v + "'");
  }
}

long parse_long(const std::string& origin, int line, const std::string& v) {
  const double x = parse_double(origin, line, v);
  if (x != std::floor(x)) fail(origin, line, "not an integer: '" + v + "'");
  return static_cast<long>(x);
}

std::vector<double> parse_list(const std::string& origin, int line,
                               const std::string& v) {
  std::vector<double> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(parse_double(origin, line, item));
  }
  return out;
}

}  // namespace

void ScenarioConfig::validate() const {
  if (!(power > 0.0)) throw ConfigError("invariant violated: power > 0");
  if (!(noise_var > 0.0))
    throw ConfigError("invariant violated: noise_var > 0");
  if (!(alpha > 0.0)) throw ConfigError("invariant violated: alpha > 0");
  if (!(t_access > 0.0 && t_access <= 1.0))
    throw ConfigError("invariant violated: t_access in (0, 1]");
  if (groups.empty()) throw ConfigError("invariant violated: groups >= 1");
  if (mmds.empty()) throw ConfigError("invariant violated: mmds >= 1");
  for (const auto& g : groups) {
    if (g.size < 1) throw ConfigError("invariant violated: group size >= 1");
    if (g.h_sr < 0 || g.h_sd < 0 || g.h_rd < 0)
      throw ConfigError("invariant violated: gains >= 0");
    if (!g.y_override.empty() && g.y_override.size() != mmds.size())
      throw ConfigError("invariant violated: y_override length == mmd count");
    for (double y : g.y_override)
      if (!(y > 0.0)) throw ConfigError("invariant violated: y_override > 0");
  }
  for (const auto& m : mmds) {
    if (!(m.omega >= 0.0 && m.omega <= m.omega_cap))
      throw ConfigError("invariant violated: omega in [0, omega_cap]");
    if (m.price < 0.0) throw ConfigError("invariant violated: price >= 0");
    if (m.cost < 0.0) throw ConfigError("invariant violated: cost >= 0");
  }
  if (!(evo.delta > 0.0)) throw ConfigError("invariant violated: delta > 0");
  if (evo.tau < 0) throw ConfigError("invariant violated: tau >= 0");
  if (!(evo.dt > 0.0)) throw ConfigError("invariant violated: dt > 0");
  if (!(imes.k_omega > 0.0))
    throw ConfigError("invariant violated: k_omega > 0");
  if (imes.waiting_rounds < 1)
    throw ConfigError("invariant violated: waiting_rounds >= 1");
  if (!(imes.stability_tol > 0.0))
    throw ConfigError("invariant violated: stability_tol > 0");
  if (imes.log_base != "e" && imes.log_base != "2")
    throw ConfigError("invariant violated: log_base in {e, 2}");
  if (evo_y_mode != "rate_factor" && evo_y_mode != "snr_factor")
    throw ConfigError("invariant violated: evo_y_mode");
  if (pricing_y_mode != "rate_factor" && pricing_y_mode != "snr_factor")
    throw ConfigError("invariant violated: pricing_y_mode");
  if (sim.n_omd < 1 || sim.n_mmd < 1)
    throw ConfigError("invariant violated: sim counts >= 1");
  if (!(sim.area_width > 0.0 && sim.area_height > 0.0))
    throw ConfigError("invariant violated: area positive");
  if (sim.omega_profile.empty())
    throw ConfigError("invariant violated: omega_profile nonempty");
}

ChannelGains ScenarioConfig::gains_of(std::size_t group) const {
  ChannelGains g;
  g.h_sr = groups[group].h_sr;
  g.h_sd = groups[group].h_sd;
  g.h_rd = groups[group].h_rd;
  g.p_source = power;
  g.p_relay = power;
  g.noise_var = noise_var;
  return g;
}

std::vector<double> ScenarioConfig::y_per_mmd(const std::string& mode) const {
  std::vector<double> y(mmds.size());
  for (std::size_t k = 0; k < mmds.size(); ++k) {
    const ChannelGains g = gains_of(k % groups.size());
    y[k] = mode == "rate_factor" ? rate_factor(g) : snr_factor(g);
  }
  return y;
}

std::vector<std::vector<double>> ScenarioConfig::y_matrix(
    const std::string& mode) const {
  const std::vector<double> per_mmd = y_per_mmd(mode);
  std::vector<std::vector<double>> y(groups.size(), per_mmd);
  for (std::size_t g = 0; g < groups.size(); ++g)
    if (!groups[g].y_override.empty()) y[g] = groups[g].y_override;
  return y;
}

CapacityParams ScenarioConfig::capacity_params() const {
  CapacityParams caps;
  caps.k_omega = imes.k_omega;
  caps.alpha = alpha;
  caps.t_access = t_access;
  return caps;
}

GroupEconomics ScenarioConfig::economics(const std::string& mode) const {
  GroupEconomics econ;
  econ.y_values = y_matrix(mode);
  for (const auto& m : mmds) {
    econ.omega.push_back(m.omega);
    econ.prices.push_back(m.price);
  }
  return econ;
}

DelayScenario ScenarioConfig::delay_scenario() const {
  DelayScenario sc;
  sc.traffic.message_size = sim.message_size;
  sc.traffic.slot_length = sim.slot_length;
  sc.traffic.slots_per_round = sim.slots_per_round;
  sc.pathloss.exponent = sim.exponent;
  sc.pathloss.reference_gain = sim.reference_gain;
  sc.power = power;
  sc.noise_var = noise_var;
  sc.direct_bandwidth = sim.direct_bandwidth;
  sc.omega_profile = sim.omega_profile;
  sc.caps.alpha = alpha;
  sc.caps.t_access = t_access;
  sc.caps.k_omega = 1.0;  // delay-market utilities use plain capacities
  sc.dao_rounds_cap = sim.dao_rounds;
  sc.market_rounds = sim.market_rounds;
  sc.settle_rounds = sim.settle_rounds;
  return sc;
}

int ScenarioConfig::total_omds() const {
  int n = 0;
  for (const auto& g : groups) n += g.size;
  return n;
}

ScenarioConfig default_scenario() {
  ScenarioConfig cfg;
  cfg.groups = {GroupConfig{"a", 10, 0.3, 0.25, 0.4, {}},
                GroupConfig{"b", 30, 0.25, 0.21, 0.35, {}}};
  cfg.mmds = {MmdConfig{20.0, 1.0, 0.5, 0.0, 0.5, 50.0},
              MmdConfig{40.0, 2.0, 0.1, 0.0, 0.5, 50.0}};
  return cfg;
}

namespace {

struct Parser {
  ScenarioConfig cfg = default_scenario();
  std::string origin;
  bool groups_cleared = false;
  bool mmds_cleared = false;

  GroupConfig& group_named(const std::string& name) {
    if (!groups_cleared) {
      cfg.groups.clear();
      groups_cleared = true;
    }
    for (auto& g : cfg.groups)
      if (g.name == name) return g;
    GroupConfig g;
    g.name = name;
    cfg.groups.push_back(g);
    return cfg.groups.back();
  }

  MmdConfig& mmd_indexed(const std::string& idx, int line) {
    if (!mmds_cleared) {
      cfg.mmds.clear();
      mmds_cleared = true;
    }
    const long k = parse_long(origin, line, idx);
    if (k < 1 || k > 64) fail(origin, line, "mmd index out of range");
    while (static_cast<long>(cfg.mmds.size()) < k)
      cfg.mmds.push_back(MmdConfig{});
    return cfg.mmds[static_cast<std::size_t>(k - 1)];
  }

  void set(const std::string& section, const std::string& key,
           const std::string& value, int line) {
    auto d = [&] { return parse_double(origin, line, value); };
    auto i = [&] { return parse_long(origin, line, value); };

    if (section.empty()) {
      if (key == "power") cfg.power = d();
      else if (key == "noise_var") cfg.noise_var = d();
      else if (key == "alpha") cfg.alpha = d();
      else if (key == "t_access") cfg.t_access = d();
      else if (key == "seed") cfg.seed = static_cast<std::uint64_t>(i());
      else if (key == "evo_y_mode") cfg.evo_y_mode = value;
      else if (key == "pricing_y_mode") cfg.pricing_y_mode = value;
      else fail(origin, line, "unknown key '" + key + "'");
      return;
    }
    if (section.rfind("group.", 0) == 0) {
      GroupConfig& g = group_named(section.substr(6));
      if (key == "size") g.size = static_cast<int>(i());
      else if (key == "h_sr") g.h_sr = d();
      else if (key == "h_sd") g.h_sd = d();
      else if (key == "h_rd") g.h_rd = d();
      else if (key == "y_override")
        g.y_override = parse_list(origin, line, value);
      else fail(origin, line, "unknown key '" + key + "' in [" + section + "]");
      return;
    }
    if (section.rfind("mmd.", 0) == 0) {
      MmdConfig& m = mmd_indexed(section.substr(4), line);
      if (key == "omega") m.omega = d();
      else if (key == "price") m.price = d();
      else if (key == "cost") m.cost = d();
      else if (key == "mu_omega") m.mu_omega = d();
      else if (key == "mu_p") m.mu_p = d();
      else if (key == "omega_cap") m.omega_cap = d();
      else fail(origin, line, "unknown key '" + key + "' in [" + section + "]");
      return;
    }
    if (section == "evo") {
      if (key == "delta") cfg.evo.delta = d();
      else if (key == "tau") cfg.evo.tau = static_cast<int>(i());
      else if (key == "dt") cfg.evo.dt = d();
      else if (key == "max_steps") cfg.evo.max_steps = i();
      else if (key == "pi_dot_tol") cfg.evo.pi_dot_tol = d();
      else if (key == "equal_utility_tol") cfg.evo.equal_utility_tol = d();
      else fail(origin, line, "unknown key '" + key + "' in [evo]");
      return;
    }
    if (section == "imes") {
      if (key == "k_omega") cfg.imes.k_omega = d();
      else if (key == "waiting_rounds") cfg.imes.waiting_rounds =
          static_cast<int>(i());
      else if (key == "delta_t") cfg.imes.delta_t = d();
      else if (key == "stability_tol") cfg.imes.stability_tol = d();
      else if (key == "max_rounds") cfg.imes.max_rounds = static_cast<int>(i());
      else if (key == "min_rounds") cfg.imes.min_rounds = static_cast<int>(i());
      else if (key == "probe0") cfg.imes.probe0 = d();
      else if (key == "gain_pow") cfg.imes.gain_pow = d();
      else if (key == "probe_pow") cfg.imes.probe_pow = d();
      else if (key == "smooth_window") cfg.imes.smooth_window =
          static_cast<int>(i());
      else if (key == "stable_needed") cfg.imes.stable_needed =
          static_cast<int>(i());
      else if (key == "settle_rounds") cfg.imes.settle_rounds =
          static_cast<int>(i());
      else if (key == "log_base") cfg.imes.log_base = value;
      else fail(origin, line, "unknown key '" + key + "' in [imes]");
      return;
    }
    if (section == "sim") {
      if (key == "area_width") cfg.sim.area_width = d();
      else if (key == "area_height") cfg.sim.area_height = d();
      else if (key == "n_omd") cfg.sim.n_omd = static_cast<int>(i());
      else if (key == "n_mmd") cfg.sim.n_mmd = static_cast<int>(i());
      else if (key == "comm_range") cfg.sim.comm_range = d();
      else if (key == "exponent") cfg.sim.exponent = d();
      else if (key == "reference_gain") cfg.sim.reference_gain = d();
      else if (key == "message_size") cfg.sim.message_size = d();
      else if (key == "slot_length") cfg.sim.slot_length = d();
      else if (key == "slots_per_round") cfg.sim.slots_per_round =
          static_cast<int>(i());
      else if (key == "direct_bandwidth") cfg.sim.direct_bandwidth = d();
      else if (key == "omega_profile")
        cfg.sim.omega_profile = parse_list(origin, line, value);
      else if (key == "dao_rounds") cfg.sim.dao_rounds = static_cast<int>(i());
      else if (key == "market_rounds") cfg.sim.market_rounds =
          static_cast<int>(i());
      else if (key == "settle_rounds") cfg.sim.settle_rounds =
          static_cast<int>(i());
      else fail(origin, line, "unknown key '" + key + "' in [sim]");
      return;
    }
    fail(origin, line, "unknown section [" + section + "]");
  }
};

}  // namespace

ScenarioConfig parse_config(const std::string& text,
                            const std::string& origin) {
  Parser p;
  p.origin = origin;
  std::istringstream in(text);
  std::string raw;
  std::string section;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    std::string s = trim(raw);
    if (s.empty() || s[0] == '#' || s[0] == ';') continue;
    if (s.front() == '[') {
      if (s.back() != ']') fail(origin, line, "unterminated section header");
      section = trim(s.substr(1, s.size() - 2));
      continue;
    }
    const std::size_t eq = s.find('=');
    if (eq == std::string::npos) fail(origin, line, "expected key = value");
    const std::string key = trim(s.substr(0, eq));
    const std::string value = trim(s.substr(eq + 1));
    if (key.empty()) fail(origin, line, "empty key");
    p.set(section, key, value, line);
  }
  p.cfg.validate();
  return p.cfg;
}

ScenarioConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path);
}

std::string serialize(const ScenarioConfig& cfg) {
  std::ostringstream out;
  out.precision(17);
  out << "power = " << cfg.power << "\n";
  out << "noise_var = " << cfg.noise_var << "\n";
  out << "alpha = " << cfg.alpha << "\n";
  out << "t_access = " << cfg.t_access << "\n";
  out << "seed = " << cfg.seed << "\n";
  out << "evo_y_mode = " << cfg.evo_y_mode << "\n";
  out << "pricing_y_mode = " << cfg.pricing_y_mode << "\n";
  for (const auto& g : cfg.groups) {
    out << "\n[group." << g.name << "]\n";
    out << "size = " << g.size << "\n";
    out << "h_sr = " << g.h_sr << "\n";
    out << "h_sd = " << g.h_sd << "\n";
    out << "h_rd = " << g.h_rd << "\n";
    if (!g.y_override.empty()) {
      out << "y_override = ";
      for (std::size_t i = 0; i < g.y_override.size(); ++i)
        out << (i ? ", " : "") << g.y_override[i];
      out << "\n";
    }
  }
  for (std::size_t k = 0; k < cfg.mmds.size(); ++k) {
    const auto& m = cfg.mmds[k];
    out << "\n[mmd." << (k + 1) << "]\n";
    out << "omega = " << m.omega << "\n";
    out << "price = " << m.price << "\n";
    out << "cost = " << m.cost << "\n";
    out << "mu_omega = " << m.mu_omega << "\n";
    out << "mu_p = " << m.mu_p << "\n";
    out << "omega_cap = " << m.omega_cap << "\n";
  }
  out << "\n[evo]\n";
  out << "delta = " << cfg.evo.delta << "\n";
  out << "tau = " << cfg.evo.tau << "\n";
  out << "dt = " << cfg.evo.dt << "\n";
  out << "max_steps = " << cfg.evo.max_steps << "\n";
  out << "pi_dot_tol = " << cfg.evo.pi_dot_tol << "\n";
  out << "equal_utility_tol = " << cfg.evo.equal_utility_tol << "\n";
  out << "\n[imes]\n";
  out << "k_omega = " << cfg.imes.k_omega << "\n";
  out << "waiting_rounds = " << cfg.imes.waiting_rounds << "\n";
  out << "delta_t = " << cfg.imes.delta_t << "\n";
  out << "stability_tol = " << cfg.imes.stability_tol << "\n";
  out << "max_rounds = " << cfg.imes.max_rounds << "\n";
  out << "min_rounds = " << cfg.imes.min_rounds << "\n";
  out << "probe0 = " << cfg.imes.probe0 << "\n";
  out << "gain_pow = " << cfg.imes.gain_pow << "\n";
  out << "probe_pow = " << cfg.imes.probe_pow << "\n";
  out << "smooth_window = " << cfg.imes.smooth_window << "\n";
  out << "stable_needed = " << cfg.imes.stable_needed << "\n";
  out << "settle_rounds = " << cfg.imes.settle_rounds << "\n";
  out << "log_base = " << cfg.imes.log_base << "\n";
  out << "\n[sim]\n";
  out << "area_width = " << cfg.sim.area_width << "\n";
  out << "area_height = " << cfg.sim.area_height << "\n";
  out << "n_omd = " << cfg.sim.n_omd << "\n";
  out << "n_mmd = " << cfg.sim.n_mmd << "\n";
  out << "comm_range = " << cfg.sim.comm_range << "\n";
  out << "exponent = " << cfg.sim.exponent << "\n";
  out << "reference_gain = " << cfg.sim.reference_gain << "\n";
  out << "message_size = " << cfg.sim.message_size << "\n";
  out << "slot_length = " << cfg.sim.slot_length << "\n";
  out << "slots_per_round = " << cfg.sim.slots_per_round << "\n";
  out << "direct_bandwidth = " << cfg.sim.direct_bandwidth << "\n";
  out << "omega_profile = ";
  for (std::size_t i = 0; i < cfg.sim.omega_profile.size(); ++i)
    out << (i ? ", " : "") << cfg.sim.omega_profile[i];
  out << "\n";
  out << "dao_rounds = " << cfg.sim.dao_rounds << "\n";
  out << "market_rounds = " << cfg.sim.market_rounds << "\n";
  out << "settle_rounds = " << cfg.sim.settle_rounds << "\n";
  return out.str();
}

std::string config_echo(const ScenarioConfig& cfg) {
  std::istringstream in(serialize(cfg));
  std::string line, out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    out += "# ";
    out += line;
    out += "\n";
  }
  return out;
}

}  // namespace cd2d
