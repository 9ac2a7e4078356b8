#pragma once

#include <random>

#include "wpcn/model.hpp"
#include "wpcn/physics.hpp"

namespace wpcn::testutil {

// Small random network: K, N, M drawn from the given caps; geometry from rays.
inline NetworkConfig small_config(std::mt19937_64& rng, int Kmax = 3, int Nmax = 3, int Mmax = 4) {
  std::uniform_int_distribution<int> dk(1, Kmax), dn(2, Nmax), dm(1, Mmax);
  NetworkConfig cfg = default_config();
  cfg.K = dk(rng);
  cfg.N = dn(rng);
  cfg.M_h = dm(rng);
  fill_uniform(cfg, 1, dbm_to_watt(-23.0), 1.0);
  for (auto& row : cfg.M)
    for (auto& m : row) m = dm(rng);
  std::uniform_real_distribution<double> ug(0.3, 0.8), ur(0.6, 1.0);
  cfg.rho_h = ur(rng);
  cfg.rho_g = ur(rng);
  cfg.geometry = build_geometry(cfg, ug(rng), 60.0 / cfg.K);
  return cfg;
}

inline CMat random_cmat(std::mt19937_64& rng, int r, int c, double scale) {
  std::normal_distribution<double> nd(0.0, 1.0);
  CMat m(r, c);
  for (int j = 0; j < c; ++j)
    for (int i = 0; i < r; ++i) m(i, j) = scale * cplx(nd(rng), nd(rng));
  return m;
}

// Random allocation with factor powers around `pw` watts.
inline Allocation random_allocation(std::mt19937_64& rng, const NetworkConfig& cfg, double pw = 1e-4) {
  Allocation a = empty_allocation(cfg);
  std::uniform_real_distribution<double> u(0.05, 1.0);
  for (int i = 0; i < a.tau.size(); ++i) a.tau(i) = u(rng);
  a.tau *= (cfg.T - cfg.tau1) / a.tau.sum();
  CMat H = random_cmat(rng, cfg.M_h, cfg.M_h, 1.0);
  a.Q = H * H.adjoint();
  a.Q *= cfg.p0 / a.Q.trace().real();
  for (int k = 0; k < cfg.K; ++k) {
    for (int n = 0; n < cfg.N - 1; ++n)
      a.X[k][n] = random_cmat(rng, cfg.M[k][n], cfg.M[k][n], std::sqrt(pw * u(rng) / cfg.M[k][n]));
    for (int n = 0; n < cfg.N; ++n)
      a.Xt[k][n] = random_cmat(rng, cfg.M[k][cfg.ch()], cfg.M[k][cfg.ch()], std::sqrt(pw * u(rng) / cfg.M[k][cfg.ch()]));
  }
  return a;
}

inline Grid2<CMat> S_grid(const Allocation& a) {
  Grid2<CMat> S(a.X.size());
  for (std::size_t k = 0; k < a.X.size(); ++k)
    for (std::size_t n = 0; n < a.X[k].size(); ++n) S[k].push_back(a.X[k][n] * a.X[k][n].adjoint());
  return S;
}

inline Grid2<CMat> St_grid(const Allocation& a) {
  Grid2<CMat> S(a.Xt.size());
  for (std::size_t k = 0; k < a.Xt.size(); ++k)
    for (std::size_t n = 0; n < a.Xt[k].size(); ++n) S[k].push_back(a.Xt[k][n] * a.Xt[k][n].adjoint());
  return S;
}

}  // namespace wpcn::testutil
