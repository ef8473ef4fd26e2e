#include "cd2d/channel.hpp"

#include <cmath>
#include <stdexcept>

namespace cd2d {

void ChannelGains::validate() const {
  if (!(h_sr >= 0.0)) throw std::invalid_argument("h_sr >= 0");
  if (!(h_sd >= 0.0)) throw std::invalid_argument("h_sd >= 0");
  if (!(h_rd >= 0.0)) throw std::invalid_argument("h_rd >= 0");
  if (!(p_source > 0.0)) throw std::invalid_argument("p_source > 0");
  if (!(p_relay > 0.0)) throw std::invalid_argument("p_relay > 0");
  if (!(noise_var > 0.0)) throw std::invalid_argument("noise_var > 0");
}

void CapacityParams::validate() const {
  if (!(k_omega > 0.0)) throw std::invalid_argument("k_omega > 0");
  if (!(alpha > 0.0)) throw std::invalid_argument("alpha > 0");
  if (!(t_access > 0.0 && t_access <= 1.0))
    throw std::invalid_argument("t_access in (0, 1]");
}

double snr_direct(const ChannelGains& g) {
  return g.p_source * g.h_sd * g.h_sd / g.noise_var;
}

double snr_relayed(const ChannelGains& g) {
  const double gsr = g.h_sr * g.h_sr;
  const double grd = g.h_rd * g.h_rd;
  const double num = g.p_source * g.p_relay * gsr * grd;
  const double den =
      g.noise_var * (g.noise_var + g.p_source * gsr + g.p_relay * grd);
  return num / den;
}

double capacity_direct(double bandwidth_share, double snr_d) {
  return bandwidth_share * std::log2(1.0 + snr_d);
}

double capacity_relay(double bandwidth_share, double snr_d, double snr_r) {
  return 0.5 * bandwidth_share * std::log2(1.0 + snr_d + snr_r);
}

bool relay_beneficial(double c_r, double c_d) {
  if (c_d <= 0.0) return c_r > 0.0;
  return c_r > c_d;
}

double modified_log_capacity(double k_omega, double omega, int n_attached,
                             double y) {
  if (n_attached == 0)
    throw std::invalid_argument("n_attached >= 1 (undefined share)");
  return std::log2(k_omega * omega * y / static_cast<double>(n_attached));
}

double snr_factor(const ChannelGains& g) {
  const double sd = snr_direct(g);
  const double sr = snr_relayed(g);
  return std::max(1.0 + sd + sr, 1.0 + sd);
}

double rate_factor(const ChannelGains& g) { return std::log2(snr_factor(g)); }

}  // namespace cd2d
