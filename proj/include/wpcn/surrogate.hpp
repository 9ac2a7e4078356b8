#pragma once

#include <iosfwd>
#include <vector>

#include "wpcn/physics.hpp"

namespace wpcn {

enum class RateFamily { UCH, UHAP, CHHAP };

// One log-det rate term in generic form. Receiver sees
//   Omega = s2*I + sum_j (C_j X_j X_j^H C_j^H + e_j ||X_j||^2 I)
// and the rate (nats per unit time) is ln det(Omega) - ln det(Omega - C_own X_own X_own^H C_own^H).
// C_j may be empty (0 columns) when user j contributes error power only.
struct RateBlock {
  RateFamily family = RateFamily::UCH;
  int k = 0, n = 0;
  int own = 0;
  double s2 = 0.0;
  std::vector<CMat> C;
  std::vector<double> e;
  int rx_dim() const;
};

RateBlock rate_block(RateFamily f, int k, int n, const ChannelSet& ch, const NetworkConfig& cfg);

// Factors entering the block: X[j][n] for U-CH/U-HAP, Xt[j][n] for CH-HAP.
std::vector<CMat> block_factors(const RateBlock& rb, const Allocation& a);

// D = [[I, X^H C^H], [C X, Omega]].
CMat build_D(const RateBlock& rb, const std::vector<CMat>& X);
CMat build_D(int k, int n, const ChannelSet& ch, const NetworkConfig& cfg, const Grid2<CMat>& X);
CMat build_D_tilde(int k, int n, const ChannelSet& ch, const NetworkConfig& cfg, const Grid2<CMat>& X);
CMat build_D_bar(int k, int n, const ChannelSet& ch, const NetworkConfig& cfg, const Grid2<CMat>& Xt);

// Selector [I; 0] with `cols` columns and `rows` rows.
CMat selector(int rows, int cols);

// log2 det(A^H D^{-1} A).
double log2det_schur(const CMat& D, const CMat& A);

// F = D^{-1} A (A^H D^{-1} A)^{-1} A^H D^{-1}. When cond(D) > 1e12 the
// matrix is regularized with 1e-10 * tr(D)/dim and *regularized is set.
CMat compute_F(const CMat& D, const CMat& A, bool* regularized = nullptr);

// Minorizer of a per-unit-time rate (bits):
//   q(X) = (T - 2 Re{v^H vec(X_own)} - sum_j vec(X_j)^H Upsilon_j vec(X_j)) / ln 2
// with Upsilon_j = I kron Z_j. T is in nats. q(X) <= rate(X), equality at the anchor.
struct SurrogateCoeffs {
  RateFamily family = RateFamily::UCH;
  int k = 0, n = 0, own = 0;
  double T = 0.0;
  CVec v;
  std::vector<CMat> Z;        // compact Upsilon blocks
  std::vector<CMat> Upsilon;  // I kron Z_j
  double anchor_rate = 0.0;   // bits per unit time at the anchor

  double value(const std::vector<CMat>& X) const;
};

SurrogateCoeffs surrogate_coeffs(const RateBlock& rb, const std::vector<CMat>& X_anchor);
SurrogateCoeffs surrogate_coeffs_uch(int k, int n, const ChannelSet& ch, const NetworkConfig& cfg,
                                     const Allocation& anchor);
SurrogateCoeffs surrogate_coeffs_uhap(int k, int n, const ChannelSet& ch, const NetworkConfig& cfg,
                                      const Allocation& anchor);
SurrogateCoeffs surrogate_coeffs_chhap(int k, int n, const ChannelSet& ch, const NetworkConfig& cfg,
                                       const Allocation& anchor);

// Per-unit-time rate of a block (bits), same value as the physics functions.
double block_rate(const RateBlock& rb, const std::vector<CMat>& X);

// Curvature shift making tau2*g(x^H B x) + xi/2 ||x||^2 convex on ||x||^2 <= p0.
double xi_bound(const CMat& B, double p0, const EhParams& eh, double tau2);

struct EnergySurrogate {
  double xi = 0.0;
  CVec u;  // stored as a column: the minorizer uses Re{u^H (x - anchor)}
  CVec anchor;
  double E_anchor = 0.0;

  double value(const CVec& x) const;
};

// Deterministic-signal energy E(x) = tau2 * g(x^H B x) and its minorizer.
double det_energy(const CVec& x, const CMat& B, double tau2, const EhParams& eh);
EnergySurrogate energy_surrogate_det(const CVec& anchor, const CMat& B, double tau2, const EhParams& eh,
                                     double xi);
EnergySurrogate energy_surrogate_det(int k, int n, const CVec& anchor, const ChannelSet& ch,
                                     const NetworkConfig& cfg, double tau2, double xi);

void dump_surrogate(std::ostream& os, const SurrogateCoeffs& s);

}  // namespace wpcn
