#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "wpcn/types.hpp"

namespace wpcn {

enum class EhMode { Nonlinear, Linear };

struct EhParams {
  // Log-domain fit: E/tau2 = exp(a*ln(P)^2) * P^b * exp(c).
  double a = -0.0977;
  double b = -0.9151;
  double c = -11.1648;
  EhMode mode = EhMode::Nonlinear;
  double zeta = 0.5;       // linear-mode conversion efficiency
  double p_floor = 1e-12;  // W, RF power clamp before the logarithm

  void validate() const;
};

// Distances in metres. User index n runs 0..N-1; n = N-1 is the cluster head.
struct GeometrySpec {
  Grid2<double> d_hap_user;    // [k][n]
  Grid3<double> d_user_ch;     // [k][n][i]: U_i^n -> CH_k, n < N-1
  double d0 = 1.0;
  double amplitude_scale = 0.1;

  void validate(int K, int N) const;
};

struct NetworkConfig {
  int K = 4;
  int N = 2;
  int M_h = 4;
  Grid2<int> M;  // [k][n]
  double p0 = 3.0;
  double T = 1.0;
  double tau1 = 0.0;
  double noise_uch = 1e-11;
  double noise_uhap = 1e-11;
  double noise_chhap = 1e-11;
  Grid2<double> Pc;   // [k][n], W
  Grid2<double> eta;  // [k][n]
  EhParams eh;
  double rho_h = 0.95;
  double rho_g = 0.95;
  double alpha = 3.0;
  double bandwidth_hz = 1e6;
  GeometrySpec geometry;

  int ch() const { return N - 1; }
  int antennas(int k, int n) const { return M[k][n]; }
  void validate() const;
};

// Setup used in the numerical section: K=4, N=2, M=4, p0=3 W, sigma^2=-80 dBm,
// Pc=-23 dBm, eta=1, rho=0.95, alpha=3, gamma=0.5, theta=30 deg, d=10 m.
NetworkConfig default_config();

// Single-antenna K=1, N=2 instance for brute-force cross-checks. Pc is
// lowered to -40 dBm: with one HAP antenna a member 10 m away harvests about
// 1 uW, below the default circuit power.
NetworkConfig scalar_config();

// Uniform antenna / power / efficiency tables for a K x N network.
void fill_uniform(NetworkConfig& cfg, int M, double Pc, double eta);

double dbm_to_watt(double dbm);

// Ray layout: cluster k sits on a ray at angle (k - (K-1)/2)*theta, member
// U_k^0 at d_far, the cluster head at gamma*d_far (N == 2 only; for N > 2 the
// members 0..N-2 are all placed at d_far). With floor_at_d0 set, node pairs
// closer than d0 (including coincident ones at gamma = 1) are put at d0
// instead of being rejected.
GeometrySpec build_geometry(const NetworkConfig& cfg_base, double gamma, double theta_deg,
                            double d_far = 10.0, bool floor_at_d0 = false);

// Planar positions for the disk layout (cluster centres 10 m from the HAP and
// 10 m apart, users uniform in a radius-5 disk). Positions are [k][n] -> (x, y).
struct DiskLayout {
  Grid2<std::pair<double, double>> pos;
  std::vector<std::pair<double, double>> centres;
};
DiskLayout sample_disk_layout(int K, int N, std::uint64_t seed, double radius = 5.0,
                              double centre_dist = 10.0);

enum class ChRule { NearestToHap, NearestToCentre };

// Reorders users of every cluster so that the selected head lands at index N-1.
DiskLayout assign_cluster_heads(DiskLayout layout, ChRule rule);

GeometrySpec geometry_from_positions(const DiskLayout& layout, double d0 = 1.0,
                                     double amplitude_scale = 0.1);

struct ChannelSet {
  Grid2<CMat> H_hat;          // [k][n]: M[k][n] x M_h
  Grid3<CMat> G_hat;          // [k][n][i]: M[k][N-1] x M[i][n], n < N-1
  Grid2<double> var_h_delta;  // [k][n]
  Grid3<double> var_g_delta;  // [k][n][i]
};

// Per-entry channel power 0.1^2 * (d/d0)^-alpha.
double path_gain(const GeometrySpec& g, double d, double alpha);

ChannelSet sample_channels(const NetworkConfig& cfg, std::uint64_t seed);

// Same draw with the error variances zeroed (what a non-robust design sees).
ChannelSet without_error_terms(ChannelSet ch);

void check_dimensions(const NetworkConfig& cfg, const ChannelSet& ch);

// JSON config file (schema in docs/config.md).
NetworkConfig load_config(const std::string& path);
NetworkConfig config_from_json_text(const std::string& text);
std::string config_to_json_text(const NetworkConfig& cfg);

}  // namespace wpcn
