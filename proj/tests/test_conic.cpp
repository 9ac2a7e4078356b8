#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "wpcn/conic.hpp"

using namespace wpcn;

TEST(Svec, RoundTripAndInnerProduct) {
  std::mt19937_64 rng(31);
  std::normal_distribution<double> nd;
  RMat A(4, 4), B(4, 4);
  for (int i = 0; i < 16; ++i) {
    A.data()[i] = nd(rng);
    B.data()[i] = nd(rng);
  }
  A = (A + A.transpose()).eval();
  B = (B + B.transpose()).eval();
  EXPECT_EQ(svec_dim(4), 10);
  EXPECT_NEAR((smat(svec(A), 4) - A).norm(), 0.0, 1e-13);
  EXPECT_NEAR(svec(A).dot(svec(B)), (A * B).trace(), 1e-12);
  EXPECT_EQ(svec_index(4, 0, 0), 0);
  EXPECT_EQ(svec_index(4, 1, 0), 1);
  EXPECT_EQ(svec_index(4, 1, 1), 4);
}

TEST(Ipm, TinyLp) {
  ConicProblem p;
  const int x = p.add_var("x", 1);
  p.objective(x) = 1.0;
  auto& c = p.add_cone(ConeType::Nonneg, 2);
  c.A.emplace_back(0, x, -1.0);
  c.b(0) = 1.0;
  c.A.emplace_back(1, x, 1.0);
  auto s = solve(p);
  ASSERT_EQ(s.status, SolveStatus::Optimal);
  EXPECT_NEAR(s.x(0), 1.0, 1e-7);
  EXPECT_NEAR(s.objective_value, 1.0, 1e-7);
}

TEST(Ipm, InfeasibleAndUnbounded) {
  ConicProblem p;
  const int x = p.add_var("x", 1);
  p.objective(x) = 1.0;
  auto& c = p.add_cone(ConeType::Nonneg, 2);
  c.A.emplace_back(0, x, -1.0);  // x <= -1
  c.b(0) = -1.0;
  c.A.emplace_back(1, x, 1.0);  // x >= 0
  EXPECT_EQ(solve(p).status, SolveStatus::Infeasible);

  ConicProblem q;
  const int y = q.add_var("y", 1);
  q.objective(y) = 1.0;
  q.add_cone(ConeType::Nonneg, 1).A.emplace_back(0, y, 1.0);
  EXPECT_EQ(solve(q).status, SolveStatus::Unbounded);
}

TEST(Ipm, SdpLargestEigenvalue) {
  std::mt19937_64 rng(32);
  std::normal_distribution<double> nd;
  for (int side : {2, 3, 5}) {
    RMat B(side, side);
    for (int i = 0; i < side * side; ++i) B.data()[i] = nd(rng);
    B = (B * B.transpose()).eval();
    const double p0 = 3.0;
    ConicProblem p;
    const int d = svec_dim(side);
    const int q = p.add_var("q", d);
    const RVec sb = svec(B);
    for (int i = 0; i < d; ++i) p.objective(q + i) = sb(i);
    auto& psd = p.add_cone(ConeType::Psd, d);
    for (int i = 0; i < d; ++i) psd.A.emplace_back(i, q + i, 1.0);
    auto& tr = p.add_cone(ConeType::Nonneg, 1);
    tr.b(0) = p0;
    for (int i = 0; i < side; ++i) tr.A.emplace_back(0, q + svec_index(side, i, i), -1.0);
    auto s = solve(p);
    ASSERT_EQ(s.status, SolveStatus::Optimal);
    Eigen::SelfAdjointEigenSolver<RMat> es(B);
    EXPECT_NEAR(s.objective_value / (p0 * es.eigenvalues().maxCoeff()), 1.0, 1e-7);
  }
}

TEST(Ipm, LeastSquaresViaSoc) {
  std::mt19937_64 rng(33);
  std::normal_distribution<double> nd;
  for (int t = 0; t < 10; ++t) {
    const int m = 8, n = 3;
    RMat A(m, n);
    RVec b(m);
    for (int i = 0; i < m * n; ++i) A.data()[i] = nd(rng);
    for (int i = 0; i < m; ++i) b(i) = nd(rng);
    ConicProblem p;
    const int x = p.add_var("x", n);
    const int tt = p.add_var("t", 1);
    p.objective(tt) = -1.0;
    auto& c = p.add_cone(ConeType::SecondOrder, m + 1);
    c.A.emplace_back(0, tt, 1.0);
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j < n; ++j) c.A.emplace_back(1 + i, x + j, A(i, j));
      c.b(1 + i) = -b(i);
    }
    auto s = solve(p);
    ASSERT_EQ(s.status, SolveStatus::Optimal);
    const RVec ls = A.colPivHouseholderQr().solve(b);
    EXPECT_NEAR(s.x(tt), (A * ls - b).norm(), 1e-7);
    EXPECT_NEAR((s.x.segment(x, n) - ls).norm(), 0.0, 1e-5);
  }
}

TEST(Ipm, RotatedCone) {
  // max w s.t. 2 u v >= w^2, u = 1, v <= 2
  ConicProblem p;
  const int u = p.add_var("u", 1), v = p.add_var("v", 1), w = p.add_var("w", 1);
  p.objective(w) = 1.0;
  auto& r = p.add_cone(ConeType::RotatedSecondOrder, 3);
  r.A.emplace_back(0, u, 1.0);
  r.A.emplace_back(1, v, 1.0);
  r.A.emplace_back(2, w, 1.0);
  auto& l = p.add_cone(ConeType::Nonneg, 3);
  l.A.emplace_back(0, u, 1.0);
  l.b(0) = -1.0;
  l.A.emplace_back(1, u, -1.0);
  l.b(1) = 1.0;
  l.A.emplace_back(2, v, -1.0);
  l.b(2) = 2.0;
  auto s = solve(p);
  ASSERT_EQ(s.status, SolveStatus::Optimal);
  EXPECT_NEAR(s.x(w), 2.0, 1e-6);
}

TEST(Ipm, RandomSocpSatisfiesKkt) {
  // max c^T x s.t. ||x - x_i|| <= r_i for a few balls containing the origin
  std::mt19937_64 rng(34);
  std::normal_distribution<double> nd;
  for (int t = 0; t < 10; ++t) {
    const int n = 4, balls = 3;
    ConicProblem p;
    const int x = p.add_var("x", n);
    RVec c(n);
    for (int i = 0; i < n; ++i) c(i) = nd(rng);
    p.objective.segment(x, n) = c;
    std::vector<RVec> cen;
    std::vector<double> rad;
    for (int b = 0; b < balls; ++b) {
      RVec ce(n);
      for (int i = 0; i < n; ++i) ce(i) = nd(rng);
      cen.push_back(ce);
      rad.push_back(ce.norm() + 0.5);
      auto& k = p.add_cone(ConeType::SecondOrder, n + 1);
      k.b(0) = rad.back();
      for (int i = 0; i < n; ++i) {
        k.A.emplace_back(1 + i, x + i, 1.0);
        k.b(1 + i) = -ce(i);
      }
    }
    auto s = solve(p);
    ASSERT_EQ(s.status, SolveStatus::Optimal);
    const RVec xs = s.x.segment(x, n);
    for (int b = 0; b < balls; ++b) EXPECT_LE((xs - cen[b]).norm(), rad[b] + 1e-6);
    // no feasible ascent direction: random feasible points never beat the solution
    std::uniform_real_distribution<double> u(0, 1);
    for (int q = 0; q < 2000; ++q) {
      RVec y(n);
      for (int i = 0; i < n; ++i) y(i) = nd(rng);
      y = xs + 0.5 * u(rng) * y;
      bool ok = true;
      for (int b = 0; b < balls; ++b) ok &= (y - cen[b]).norm() <= rad[b];
      if (ok) EXPECT_LE(c.dot(y), s.objective_value + 1e-6);
    }
  }
}

TEST(Ipm, BadlyScaledProblem) {
  // max x + 1e6 y s.t. x <= 1e-6, y <= 1e-9, x, y >= 0
  ConicProblem p;
  const int x = p.add_var("x", 2);
  p.objective(x) = 1.0;
  p.objective(x + 1) = 1e6;
  auto& c = p.add_cone(ConeType::Nonneg, 4);
  c.A.emplace_back(0, x, -1.0);
  c.b(0) = 1e-6;
  c.A.emplace_back(1, x + 1, -1.0);
  c.b(1) = 1e-9;
  c.A.emplace_back(2, x, 1.0);
  c.A.emplace_back(3, x + 1, 1.0);
  auto s = solve(p, 1e-10);
  ASSERT_EQ(s.status, SolveStatus::Optimal);
  EXPECT_NEAR(s.x(x) / 1e-6, 1.0, 1e-3);
  EXPECT_NEAR(s.x(x + 1) / 1e-9, 1.0, 1e-3);
}

TEST(Ipm, ValidateRejectsMalformed) {
  ConicProblem p;
  p.add_var("x", 1);
  auto& c = p.add_cone(ConeType::Nonneg, 1);
  c.A.emplace_back(0, 5, 1.0);
  EXPECT_THROW(p.validate(), InvalidArgument);
}
