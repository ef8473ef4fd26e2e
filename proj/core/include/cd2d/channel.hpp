#pragma once

namespace cd2d {

// Link gains and radio constants for one source/relay/destination triple.
// Gains are amplitude gains; powers in watts; noise_var is the receiver
// noise variance.
struct ChannelGains {
  double h_sr = 0.0;
  double h_sd = 0.0;
  double h_rd = 0.0;
  double p_source = 2.0;
  double p_relay = 2.0;
  double noise_var = 1.0;

  void validate() const;  // throws std::invalid_argument naming the invariant
};

struct CapacityParams {
  double k_omega = 1.0;   // scaling inside the log-form capacity
  double alpha = 1.0;     // monetary value per bit
  double t_access = 1.0;  // access-time fraction, in (0, 1]

  void validate() const;
};

// SNR of the direct source->destination link.
double snr_direct(const ChannelGains& g);

// End-to-end SNR of the two-phase amplify-and-forward path. Never exceeds
// either hop's own SNR.
double snr_relayed(const ChannelGains& g);

double capacity_direct(double bandwidth_share, double snr_d);

// Half rate: the relay retransmits in a second phase, and the destination
// combines both copies.
double capacity_relay(double bandwidth_share, double snr_d, double snr_r);

// Cooperation pays off only when the relayed capacity strictly exceeds the
// direct one. A dead direct link counts as beneficial for any c_r > 0.
bool relay_beneficial(double c_r, double c_d);

// log2(k_omega * omega / n * y): concave stand-in used by the share game.
// Throws if n_attached == 0.
double modified_log_capacity(double k_omega, double omega, int n_attached,
                             double y);

// Effective SNR factor max(1 + snr_d + snr_r, 1 + snr_d).
double snr_factor(const ChannelGains& g);

// Spectral-efficiency form of the same factor, log2 of snr_factor.
double rate_factor(const ChannelGains& g);

}  // namespace cd2d
