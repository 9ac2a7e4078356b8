#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "wpcn/model.hpp"

namespace wpcn {

// Decision variables of one block. Slot layout of tau:
//   tau[0]          tau2 (downlink energy transfer)
//   tau[1 + n]      tau3,n for members n = 0..N-2
//   tau[N + n]      tau4,n for n = 0..N-1 (n = N-1 is the CH's own data)
struct Allocation {
  RVec tau;
  bool deterministic = false;  // x0 in use instead of Q
  CMat Q;                      // M_h x M_h
  CVec x0;                     // M_h
  Grid2<CMat> X;               // [k][n], n < N-1, M[k][n] x M[k][n]
  Grid2<CMat> Xt;              // [k][n], all n, M[k][N-1] x M[k][N-1]
  bool cooperative = true;     // false: relaying slots pinned to zero

  double tau2() const { return tau[0]; }
  double tau3(int n) const { return tau[1 + n]; }
  double tau4(int N, int n) const { return tau[N + n]; }
  // Q, or x0 x0^H in deterministic mode.
  CMat energy_covariance() const;
  CMat S(int k, int n) const { return X[k][n] * X[k][n].adjoint(); }
  CMat St(int k, int n) const { return Xt[k][n] * Xt[k][n].adjoint(); }
};

int tau_size(int N);
// Zero-initialized allocation with correctly shaped factors.
Allocation empty_allocation(const NetworkConfig& cfg);

struct ThroughputReport {
  Grid2<double> r_uch, r_uhap, r_chhap, r_user;  // bits per block (of T * 1 Hz)
  double min_throughput = 0.0;
  double sum_throughput = 0.0;

  double min_mbps(const NetworkConfig& cfg) const { return min_throughput * cfg.bandwidth_hz * cfg.T / 1e6; }
  double sum_mbps(const NetworkConfig& cfg) const { return sum_throughput * cfg.bandwidth_hz * cfg.T / 1e6; }
};

// B = H^H H + var * M * I, so that the RF input power is tr{Q B}.
CMat energy_matrix(const CMat& H_hat, double var_h_delta);

double rf_input_power(const CMat& Q, const CMat& H_hat, double var_h_delta);

// g(P) = E/tau2 and its first two derivatives (with the p_floor clamp).
double eh_curve(double P, const EhParams& eh);
double eh_curve_d1(double P, const EhParams& eh);
double eh_curve_d2(double P, const EhParams& eh);
double harvested_energy(double P_in, double tau2, const EhParams& eh);

// Interval of P on which the nonlinear curve is concave (inflection points).
std::pair<double, double> eh_concave_interval(const EhParams& eh);

// Per-user harvested energy for the allocation (uses energy_covariance()).
double user_energy(const Allocation& a, const ChannelSet& ch, const NetworkConfig& cfg, int k, int n);

CMat lmmse_decoder(int k, int n, const ChannelSet& ch, const NetworkConfig& cfg,
                   const Grid2<CMat>& S_all, const CMat* V = nullptr);

// Per-unit-time phase rates (nats -> bits, tau factor excluded) and the tau-scaled versions.
double rate_user_to_ch_unit(int k, int n, const ChannelSet& ch, const NetworkConfig& cfg,
                            const Grid2<CMat>& S_all);
double rate_user_to_hap_unit(int k, int n, const ChannelSet& ch, const NetworkConfig& cfg,
                             const Grid2<CMat>& S_all);
double rate_ch_to_hap_unit(int k, int n, const ChannelSet& ch, const NetworkConfig& cfg,
                           const Grid2<CMat>& St_all);
double rate_user_to_ch(int k, int n, double tau3n, const ChannelSet& ch, const NetworkConfig& cfg,
                       const Grid2<CMat>& S_all);
double rate_user_to_hap(int k, int n, double tau3n, const ChannelSet& ch, const NetworkConfig& cfg,
                        const Grid2<CMat>& S_all);
double rate_ch_to_hap(int k, int n, double tau4n, const ChannelSet& ch, const NetworkConfig& cfg,
                      const Grid2<CMat>& St_all);

// U-CH rate obtained by applying an explicit linear decoder W to the received
// signal (mean-square-error form). With W = lmmse_decoder it equals the
// decoder-free expression.
double rate_user_to_ch_with_decoder(int k, int n, double tau3n, const ChannelSet& ch,
                                    const NetworkConfig& cfg, const Grid2<CMat>& S_all, const CMat& V,
                                    const CMat& W);

ThroughputReport throughput_report(const Allocation& a, const ChannelSet& ch, const NetworkConfig& cfg);

void write_report_csv(std::ostream& os, const ThroughputReport& r, const NetworkConfig& cfg);

struct ConstraintSlack {
  double time = 0.0;               // T - tau1 - sum(tau)
  double tau_min = 0.0;            // smallest tau entry
  double power = 0.0;              // p0 - tr Q
  double psd = 0.0;                // lambda_min(Q)
  Grid2<double> energy;            // E - consumption, per user [k][n]
  double worst() const;
};

// Independent feasibility evaluator for C1-C4 (energy uses the exact EH curve).
ConstraintSlack constraint_slack(const Allocation& a, const ChannelSet& ch, const NetworkConfig& cfg);

// Energy spent by user (k, n) during the block: Pc + eta * (transmit energy).
double user_consumption(const Allocation& a, const NetworkConfig& cfg, int k, int n);

// Concave piecewise-linear lower model l(P) <= g(P), used to make the
// harvested-energy constraint conic. Lines are kept as slope/intercept pairs;
// l(P) = min_i (s_i P + c_i).
class EhLowerModel {
 public:
  EhLowerModel() = default;
  EhLowerModel(const EhParams& eh, double p_max, int nodes = 64);

  double operator()(double P) const;
  const std::vector<double>& slopes() const { return slope_; }
  const std::vector<double>& intercepts() const { return icpt_; }
  // Rebuilds around P so that l(P) = g(P) while l <= g stays true. Inside the
  // chord range: base grid plus nodes at P and P*exp(+-{1e-3, 1e-2, 4e-2}).
  // Below it (convex part of g): tangent at P, chords from where it meets g
  // again. Above it: the base model.
  void refine(double P);
  bool linear() const { return linear_; }  // single fixed line: linear EH mode or p_max below p_floor
  double p_max() const { return p_max_; }

 private:
  void rebuild();
  EhParams eh_;
  bool linear_ = false;
  double p_max_ = 0.0;
  double anchor_ = 0.0;  // tangent point in the convex part, 0 if unused
  std::vector<double> base_, nodes_;
  std::vector<double> slope_, icpt_;
};

}  // namespace wpcn
