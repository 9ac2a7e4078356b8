#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "helpers.hpp"
#include "wpcn/surrogate.hpp"

using namespace wpcn;
using namespace wpcn::testutil;

namespace {

std::vector<CMat> perturb(std::mt19937_64& rng, const std::vector<CMat>& X, double rel) {
  std::vector<CMat> out = X;
  for (auto& x : out) {
    if (x.size() == 0) continue;
    const double s = rel * x.norm() / std::sqrt(double(x.size())) + 1e-9;
    x += random_cmat(rng, x.rows(), x.cols(), s);
  }
  return out;
}

bool is_psd(const CMat& A, double tol) {
  Eigen::SelfAdjointEigenSolver<CMat> es(CMat(0.5 * (A + A.adjoint())));
  return es.eigenvalues().minCoeff() >= -tol * std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff());
}

}  // namespace

TEST(Dmatrix, SchurFormGivesRate) {
  std::mt19937_64 rng(21);
  for (int t = 0; t < 20; ++t) {
    auto cfg = small_config(rng);
    auto ch = sample_channels(cfg, 300 + t);
    Allocation a = random_allocation(rng, cfg);
    const auto S = S_grid(a);
    const auto St = St_grid(a);
    for (int k = 0; k < cfg.K; ++k) {
      for (int n = 0; n < cfg.N - 1; ++n) {
        const CMat D = build_D(k, n, ch, cfg, a.X);
        const int m = cfg.M[k][n];
        EXPECT_EQ(D.rows(), m + cfg.M[k][cfg.ch()]);
        EXPECT_NEAR(log2det_schur(D, selector(D.rows(), m)), rate_user_to_ch_unit(k, n, ch, cfg, S), 1e-7);
        const CMat Dt = build_D_tilde(k, n, ch, cfg, a.X);
        EXPECT_NEAR(log2det_schur(Dt, selector(Dt.rows(), m)), rate_user_to_hap_unit(k, n, ch, cfg, S), 1e-7);
      }
      for (int n = 0; n < cfg.N; ++n) {
        const CMat Db = build_D_bar(k, n, ch, cfg, a.Xt);
        const int m = cfg.M[k][cfg.ch()];
        EXPECT_NEAR(log2det_schur(Db, selector(Db.rows(), m)), rate_ch_to_hap_unit(k, n, ch, cfg, St), 1e-7);
      }
    }
  }
}

TEST(Dmatrix, ProjectorIdentities) {
  std::mt19937_64 rng(22);
  auto cfg = small_config(rng);
  auto ch = sample_channels(cfg, 5);
  Allocation a = random_allocation(rng, cfg);
  const CMat D = build_D(0, 0, ch, cfg, a.X);
  const int m = cfg.M[0][0];
  bool reg = true;
  const CMat F = compute_F(D, selector(D.rows(), m), &reg);
  EXPECT_NEAR((F * D).trace().real(), m, 1e-6);
  EXPECT_TRUE(is_psd(F, 1e-9));
  EXPECT_NEAR((F * D * F - F).norm() / F.norm(), 0.0, 1e-6);
}

TEST(Surrogate, TouchesAndMinorizesAllFamilies) {
  std::mt19937_64 rng(23);
  for (int t = 0; t < 25; ++t) {
    auto cfg = small_config(rng);
    auto ch = sample_channels(cfg, 400 + t);
    Allocation a = random_allocation(rng, cfg);
    for (RateFamily f : {RateFamily::UCH, RateFamily::UHAP, RateFamily::CHHAP}) {
      const int nmax = f == RateFamily::CHHAP ? cfg.N : cfg.N - 1;
      for (int k = 0; k < cfg.K; ++k)
        for (int n = 0; n < nmax; ++n) {
          const RateBlock rb = rate_block(f, k, n, ch, cfg);
          const auto X0 = block_factors(rb, a);
          const SurrogateCoeffs s = surrogate_coeffs(rb, X0);
          const double r0 = block_rate(rb, X0);
          EXPECT_NEAR(s.value(X0), r0, 1e-9 * std::max(1.0, r0));
          EXPECT_NEAR(s.anchor_rate, r0, 1e-9 * std::max(1.0, r0));
          for (const auto& Z : s.Z) EXPECT_TRUE(is_psd(Z, 1e-9));
          for (double rel : {0.01, 0.3, 1.0, 3.0}) {
            const auto X = perturb(rng, X0, rel);
            EXPECT_LE(s.value(X), block_rate(rb, X) + 1e-9);
          }
          // zero covariance of every user
          std::vector<CMat> Xz = X0;
          for (auto& x : Xz) x.setZero();
          EXPECT_LE(s.value(Xz), 1e-12);
        }
    }
  }
}

TEST(Surrogate, ConcaveAlongSegments) {
  std::mt19937_64 rng(24);
  auto cfg = small_config(rng);
  auto ch = sample_channels(cfg, 77);
  Allocation a = random_allocation(rng, cfg);
  const RateBlock rb = rate_block(RateFamily::UHAP, 0, 0, ch, cfg);
  const auto X0 = block_factors(rb, a);
  const auto s = surrogate_coeffs(rb, X0);
  for (int t = 0; t < 100; ++t) {
    const auto X1 = perturb(rng, X0, 2.0);
    const auto X2 = perturb(rng, X0, 2.0);
    std::vector<CMat> Xm = X1;
    for (std::size_t j = 0; j < Xm.size(); ++j) Xm[j] = 0.5 * (X1[j] + X2[j]);
    EXPECT_GE(s.value(Xm), 0.5 * (s.value(X1) + s.value(X2)) - 1e-12);
  }
}

TEST(Surrogate, CompactAndKroneckerFormsAgree) {
  std::mt19937_64 rng(25);
  auto cfg = small_config(rng);
  auto ch = sample_channels(cfg, 78);
  Allocation a = random_allocation(rng, cfg);
  const RateBlock rb = rate_block(RateFamily::UCH, 0, 0, ch, cfg);
  const auto X0 = block_factors(rb, a);
  const auto s = surrogate_coeffs(rb, X0);
  for (std::size_t j = 0; j < X0.size(); ++j) {
    const CMat& X = X0[j];
    if (X.size() == 0) continue;
    const CVec v = Eigen::Map<const CVec>(X.data(), X.size());
    const cplx a1 = v.dot(s.Upsilon[j] * v);
    const cplx a2 = (X.adjoint() * s.Z[j] * X).trace();
    EXPECT_NEAR(std::abs(a1 - a2), 0.0, 1e-12 * std::max(1.0, std::abs(a1)));
  }
}

TEST(EnergySurrogate, CurvatureBoundGoldenAndEdges) {
  EhParams eh;
  const CMat I = CMat::Identity(3, 3);
  EXPECT_NEAR(xi_bound(I, 1.0, eh, 1.0) / 0.60913116666739614712117661705, 1.0, 1e-12);
  EXPECT_EQ(xi_bound(I, 1.0, eh, 0.0), 0.0);
  CMat bad = CMat::Identity(2, 2);
  bad(1, 1) = -1.0;
  EXPECT_THROW(xi_bound(bad, 1.0, eh, 1.0), InvalidArgument);
}

TEST(EnergySurrogate, ShiftedEnergyIsConvex) {
  EhParams eh;
  std::mt19937_64 rng(26);
  std::normal_distribution<double> nd;
  for (int t = 0; t < 20; ++t) {
    const CMat H = random_cmat(rng, 3, 4, 3e-3);
    const CMat B = energy_matrix(H, 1e-6);
    const double p0 = 3.0, tau2 = 0.4;
    const double xi = xi_bound(B, p0, eh, tau2);
    for (int s = 0; s < 50; ++s) {
      CVec x = random_cmat(rng, 4, 1, 1.0);
      x *= std::sqrt(p0) * std::abs(nd(rng)) / (1.0 + x.norm());
      CVec d = random_cmat(rng, 4, 1, 1.0).normalized();
      const double h = 1e-4;
      auto fn = [&](const CVec& y) { return det_energy(y, B, tau2, eh) + 0.5 * xi * y.squaredNorm(); };
      const double dd = (fn(x + h * d) - 2 * fn(x) + fn(x - h * d)) / (h * h);
      EXPECT_GE(dd, -1e-6 * xi);
    }
  }
}

TEST(EnergySurrogate, TouchesMinorizesAndMatchesGradient) {
  EhParams eh;
  std::mt19937_64 rng(27);
  const CMat H = random_cmat(rng, 2, 4, 3e-3);
  const CMat B = energy_matrix(H, 1e-6);
  const double p0 = 3.0, tau2 = 0.3;
  const double xi = 1.1 * xi_bound(B, p0, eh, tau2);
  CVec a = random_cmat(rng, 4, 1, 1.0);
  a *= 1.2 / a.norm();
  const auto s = energy_surrogate_det(a, B, tau2, eh, xi);
  EXPECT_NEAR(s.value(a), det_energy(a, B, tau2, eh), 1e-15);
  for (int t = 0; t < 500; ++t) {
    CVec x = random_cmat(rng, 4, 1, 1.0);
    x *= std::sqrt(p0) * std::uniform_real_distribution<double>(0, 1)(rng) / x.norm();
    EXPECT_LE(s.value(x), det_energy(x, B, tau2, eh) + 1e-15);
  }
  for (int t = 0; t < 10; ++t) {
    const CVec d = random_cmat(rng, 4, 1, 1.0).normalized();
    const double h = 1e-6;
    const double g1 = (det_energy(a + h * d, B, tau2, eh) - det_energy(a - h * d, B, tau2, eh)) / (2 * h);
    const double g2 = (s.value(a + h * d) - s.value(a - h * d)) / (2 * h);
    EXPECT_NEAR(g2, g1, 1e-6 * std::abs(g1) + 1e-15);
  }
}
