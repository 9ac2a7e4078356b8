#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "helpers.hpp"
#include "wpcn/oracle.hpp"

using namespace wpcn;
using namespace wpcn::testutil;

TEST(Oracle, EhPowerAgreesWithPhysics) {
  EhParams eh;
  for (double l = -14; l < 1; l += 0.25) EXPECT_NEAR(oracle::eh_power(std::exp(l), eh), eh_curve(std::exp(l), eh),
                                                     1e-12 * eh_curve(std::exp(l), eh));
  EXPECT_DOUBLE_EQ(oracle::eh_power(0.0, eh), eh_curve(0.0, eh));
  eh.mode = EhMode::Linear;
  EXPECT_DOUBLE_EQ(oracle::eh_power(0.2, eh), eh_curve(0.2, eh));
}

TEST(Oracle, GridValueMatchesPhysicsRescore) {
  const auto cfg = scalar_config();
  for (int s = 0; s < 4; ++s) {
    const auto ch = sample_channels(cfg, 700 + s);
    for (auto obj : {Objective::MaxMin, Objective::Sum})
      for (bool coop : {true, false}) {
        const auto r = oracle::grid_search_scalar(cfg, ch, obj, coop, oracle::default_scalar_grid(12));
        ASSERT_TRUE(std::isfinite(r.value));
        EXPECT_NEAR(r.physics_value, r.value, 1e-9 * std::max(1.0, r.value));
        EXPECT_GE(constraint_slack(r.allocation, ch, cfg).worst(), -1e-12);
      }
  }
}

TEST(Oracle, ZeroChannelsGiveZero) {
  auto cfg = scalar_config();
  fill_uniform(cfg, 1, 0.0, 1.0);
  auto ch = sample_channels(cfg, 3);
  ch.H_hat[0][0].setZero();
  ch.H_hat[0][1].setZero();
  ch.G_hat[0][0][0].setZero();
  ch.var_h_delta = {{0.0, 0.0}};
  ch.var_g_delta[0][0][0] = 0.0;
  const auto r = oracle::grid_search_scalar(cfg, ch, Objective::MaxMin, true, oracle::default_scalar_grid(8));
  EXPECT_EQ(r.value, 0.0);
}

TEST(Oracle, SingleUserTimeSplitBracketed) {
  // member silent and free, perfect CSI: only the CH's tau2 vs tau4 split matters
  auto cfg = scalar_config();
  fill_uniform(cfg, 1, 0.0, 1.0);
  cfg.rho_h = cfg.rho_g = 1.0;
  auto ch = sample_channels(cfg, 11);
  ch.H_hat[0][0].setZero();
  ch.G_hat[0][0][0].setZero();
  const auto grid = oracle::default_scalar_grid(40);
  const auto r = oracle::grid_search_scalar(cfg, ch, Objective::Sum, false, grid);

  const double h2 = std::norm(ch.H_hat[0][1](0, 0));
  const double c = h2 * eh_curve(h2 * r.point(4), cfg.eh) / (cfg.eta[0][1] * cfg.noise_chhap);
  auto f = [&](double t2) { return (1 - t2) * std::log2(1 + c * t2 / (1 - t2)); };
  const auto best = oracle::golden_section_max(f, 0.0, 1.0 - 1e-12, 1e-13);
  EXPECT_LE(r.value, best.value * (1 + 1e-12));
  EXPECT_GE(r.value, best.value * (1 - 1e-4));
  EXPECT_NEAR(r.point(0), best.x, 1.0 / (grid.axes[0].points - 1));
  EXPECT_GT(best.x, 0.0);
  EXPECT_LT(best.x, 1.0);
}

TEST(Oracle, GridBudgetEnforced) {
  oracle::GridSpec g = oracle::default_scalar_grid(48);
  EXPECT_NO_THROW(g.validate());
  g.axes[0].points = 2000;
  EXPECT_THROW(g.validate(), InvalidArgument);
  g = oracle::default_scalar_grid();
  g.axes.pop_back();
  EXPECT_THROW(g.validate(), InvalidArgument);
  const auto cfg = default_config();
  EXPECT_THROW(oracle::grid_search_scalar(cfg, sample_channels(cfg, 1), Objective::MaxMin, true), InvalidArgument);
}

TEST(Oracle, GoldenSectionFindsPeak) {
  const auto r = oracle::golden_section_max([](double x) { return -(x - 0.3) * (x - 0.3) + 2.0; }, -1.0, 4.0, 1e-10);
  EXPECT_NEAR(r.x, 0.3, 1e-6);
  EXPECT_NEAR(r.value, 2.0, 1e-12);
}

TEST(Oracle, FiniteDifferencesOnKnownFunction) {
  auto f = [](const RVec& x) { return std::sin(x(0)) * x(1) + 0.5 * x(1) * x(1) * x(2); };
  RVec x(3);
  x << 0.4, -1.2, 2.0;
  const RVec g = oracle::finite_diff_gradient(f, x, 1e-5);
  EXPECT_NEAR(g(0), std::cos(0.4) * -1.2, 1e-8);
  EXPECT_NEAR(g(1), std::sin(0.4) + x(1) * x(2), 1e-8);
  EXPECT_NEAR(g(2), 0.5 * x(1) * x(1), 1e-8);
  const RMat H = oracle::finite_diff_hessian(f, x, 1e-4);
  EXPECT_NEAR(H(0, 0), -std::sin(0.4) * -1.2, 1e-6);
  EXPECT_NEAR(H(0, 1), std::cos(0.4), 1e-6);
  EXPECT_NEAR(H(1, 1), x(2), 1e-6);
  EXPECT_NEAR(H(1, 2), x(1), 1e-6);
  EXPECT_NEAR(H(2, 2), 0.0, 1e-6);
  EXPECT_THROW(oracle::finite_diff_gradient([](const RVec& v) { return std::log(v(0)); }, RVec::Zero(1), 1e-3),
               NumericalFailure);
}

TEST(Oracle, ComplexStackRoundTrip) {
  std::mt19937_64 rng(4);
  const CVec x = random_cmat(rng, 5, 1, 1.0).col(0);
  const RVec r = oracle::stack_complex(x);
  EXPECT_EQ(r.size(), 10);
  EXPECT_EQ((oracle::unstack_complex(r) - x).norm(), 0.0);
}

TEST(Oracle, MonteCarloVarianceSplit) {
  const double v = 2.5e-7;
  const double total = oracle::mc_second_moment(v, 100000, 9);
  EXPECT_NEAR(total / v, 1.0, 0.02);
  const double est = oracle::mc_second_moment(0.95 * 0.95 * v, 100000, 10);
  EXPECT_NEAR(est / total, 0.9025, 0.02 * 0.9025);
}

TEST(Oracle, MonteCarloDecoderMseMatchesClosedForm) {
  std::mt19937_64 rng(12);
  const int r = 3;
  std::vector<CMat> G{random_cmat(rng, r, 2, 1.0), random_cmat(rng, r, 2, 0.7)};
  std::vector<CMat> V{random_cmat(rng, 2, 2, 0.8), random_cmat(rng, 2, 2, 0.5)};
  const std::vector<double> var{0.05, 0.02};
  const double noise = 0.3;
  CMat R = noise * CMat::Identity(r, r);
  for (int j = 0; j < 2; ++j) {
    R += G[j] * V[j] * V[j].adjoint() * G[j].adjoint();
    R += var[j] * (V[j] * V[j].adjoint()).trace().real() * CMat::Identity(r, r);
  }
  const CMat W = (G[0] * V[0]).adjoint() * R.inverse();
  const CMat E = CMat::Identity(2, 2) - W * G[0] * V[0];
  const CMat mc = oracle::mc_decoder_mse(G, V, var, noise, W, 40000, 77);
  EXPECT_LT((mc - E).norm() / E.norm(), 0.03);
  // MSE of the LMMSE decoder is minimal among perturbed decoders
  const CMat W2 = W + random_cmat(rng, 2, r, 0.05);
  const CMat mc2 = oracle::mc_decoder_mse(G, V, var, noise, W2, 40000, 77);
  EXPECT_GT(mc2.trace().real(), mc.trace().real());
}

TEST(Oracle, SampledDomination) {
  auto t = [](int i) { return 1.0 + i; };
  auto s = [](int i) { return 0.5 + i; };
  EXPECT_DOUBLE_EQ(oracle::sampled_domination(t, s, 10), 0.5);
  EXPECT_LT(oracle::sampled_domination(s, t, 10), 0.0);
}
