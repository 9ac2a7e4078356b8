#include "wpcn/surrogate.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numbers>
#include <ostream>

#include "linalg.hpp"

namespace wpcn {

namespace {
constexpr double kLn2 = std::numbers::ln2;

const char* family_name(RateFamily f) {
  switch (f) {
    case RateFamily::UCH: return "UCH";
    case RateFamily::UHAP: return "UHAP";
    case RateFamily::CHHAP: return "CHHAP";
  }
  return "?";
}
}  // namespace

int RateBlock::rx_dim() const { return static_cast<int>(C[own].rows()); }

RateBlock rate_block(RateFamily f, int k, int n, const ChannelSet& ch, const NetworkConfig& cfg) {
  const int K = cfg.K;
  const int c = cfg.ch();
  RateBlock rb;
  rb.family = f;
  rb.k = k;
  rb.n = n;
  rb.own = k;
  rb.C.resize(K);
  rb.e.resize(K);
  switch (f) {
    case RateFamily::UCH:
      require(n < cfg.N - 1, "U-CH block needs a member slot");
      rb.s2 = cfg.noise_uch;
      for (int j = 0; j < K; ++j) {
        rb.C[j] = ch.G_hat[k][n][j];
        rb.e[j] = ch.var_g_delta[k][n][j];
      }
      break;
    case RateFamily::UHAP:
    case RateFamily::CHHAP: {
      const bool relay = f == RateFamily::CHHAP;
      require(relay || n < cfg.N - 1, "U-HAP block needs a member slot");
      rb.s2 = relay ? cfg.noise_chhap : cfg.noise_uhap;
      const int u = relay ? c : n;
      for (int j = 0; j < K; ++j) {
        const CMat& H = ch.H_hat[j][u];
        // SIC: clusters decoded before k only leave their estimation-error power.
        rb.C[j] = j >= k ? CMat(H.adjoint()) : CMat::Zero(cfg.M_h, H.rows());
        rb.e[j] = ch.var_h_delta[j][u];
      }
      break;
    }
  }
  return rb;
}

std::vector<CMat> block_factors(const RateBlock& rb, const Allocation& a) {
  std::vector<CMat> X;
  X.reserve(rb.C.size());
  for (std::size_t j = 0; j < rb.C.size(); ++j)
    X.push_back(rb.family == RateFamily::CHHAP ? a.Xt[j][rb.n] : a.X[j][rb.n]);
  return X;
}

namespace {

// Omega without the own-signal term (Psi) and the own signal matrix B = C X.
CMat interference(const RateBlock& rb, const std::vector<CMat>& X) {
  const int m = rb.rx_dim();
  CMat Psi = rb.s2 * CMat::Identity(m, m);
  double err = 0.0;
  for (std::size_t j = 0; j < rb.C.size(); ++j) {
    if (static_cast<int>(j) != rb.own && X[j].size() > 0) {
      const CMat CX = rb.C[j] * X[j];
      Psi.noalias() += CX * CX.adjoint();
    }
    err += rb.e[j] * X[j].squaredNorm();
  }
  Psi.diagonal().array() += err;
  return linalg::herm(Psi);
}

}  // namespace

CMat build_D(const RateBlock& rb, const std::vector<CMat>& X) {
  const CMat B = rb.C[rb.own] * X[rb.own];
  const int mt = static_cast<int>(X[rb.own].cols());
  const int mr = rb.rx_dim();
  CMat Om = interference(rb, X);
  Om.noalias() += B * B.adjoint();
  CMat D(mt + mr, mt + mr);
  D.topLeftCorner(mt, mt).setIdentity();
  D.topRightCorner(mt, mr) = B.adjoint();
  D.bottomLeftCorner(mr, mt) = B;
  D.bottomRightCorner(mr, mr) = Om;
  return linalg::herm(D);
}

namespace {
std::vector<CMat> column(const Grid2<CMat>& X, int n) {
  std::vector<CMat> out;
  for (const auto& row : X) out.push_back(row[n]);
  return out;
}
}  // namespace

CMat build_D(int k, int n, const ChannelSet& ch, const NetworkConfig& cfg, const Grid2<CMat>& X) {
  return build_D(rate_block(RateFamily::UCH, k, n, ch, cfg), column(X, n));
}

CMat build_D_tilde(int k, int n, const ChannelSet& ch, const NetworkConfig& cfg, const Grid2<CMat>& X) {
  return build_D(rate_block(RateFamily::UHAP, k, n, ch, cfg), column(X, n));
}

CMat build_D_bar(int k, int n, const ChannelSet& ch, const NetworkConfig& cfg, const Grid2<CMat>& Xt) {
  return build_D(rate_block(RateFamily::CHHAP, k, n, ch, cfg), column(Xt, n));
}

CMat selector(int rows, int cols) {
  CMat A = CMat::Zero(rows, cols);
  A.topRows(cols).setIdentity();
  return A;
}

double log2det_schur(const CMat& D, const CMat& A) {
  Eigen::LLT<CMat> llt(D);
  if (llt.info() != Eigen::Success) throw NumericalFailure("D is not positive definite");
  const CMat DA = llt.solve(A);
  return linalg::logdet_hpd(linalg::herm(A.adjoint() * DA)) / kLn2;
}

CMat compute_F(const CMat& D, const CMat& A, bool* regularized) {
  require(D.rows() == D.cols() && D.rows() == A.rows(), "compute_F: dimension mismatch");
  Eigen::SelfAdjointEigenSolver<CMat> es(linalg::herm(D), Eigen::EigenvaluesOnly);
  const double lmin = es.eigenvalues().minCoeff();
  const double lmax = es.eigenvalues().maxCoeff();
  if (!(lmin > 0.0) && lmax <= 0.0) throw NumericalFailure("compute_F: D is not positive definite");
  CMat Dr = linalg::herm(D);
  bool reg = false;
  if (!(lmin > 0.0) || lmax / lmin > 1e12) {
    const double eps = 1e-10 * D.trace().real() / static_cast<double>(D.rows());
    Dr.diagonal().array() += eps;
    reg = true;
  }
  if (regularized) *regularized = reg;
  Eigen::LLT<CMat> llt(Dr);
  if (llt.info() != Eigen::Success) throw NumericalFailure("compute_F: D is not positive definite");
  const CMat DA = llt.solve(A);
  const CMat M = linalg::herm(A.adjoint() * DA);
  Eigen::LLT<CMat> lm(M);
  if (lm.info() != Eigen::Success) throw NumericalFailure("compute_F: A^H D^-1 A singular");
  // F = (DA L^-H)(DA L^-H)^H
  const CMat Y = lm.matrixL().solve(DA.adjoint()).adjoint();
  return Y * Y.adjoint();
}

double block_rate(const RateBlock& rb, const std::vector<CMat>& X) {
  const CMat Psi = interference(rb, X);
  Eigen::LLT<CMat> llt(Psi);
  if (llt.info() != Eigen::Success) throw NumericalFailure("interference covariance not positive definite");
  const CMat Z = llt.matrixL().solve(rb.C[rb.own] * X[rb.own]);
  CMat G = Z.adjoint() * Z;
  G.diagonal().array() += 1.0;
  return linalg::logdet_hpd(linalg::herm(G)) / kLn2;
}

SurrogateCoeffs surrogate_coeffs(const RateBlock& rb, const std::vector<CMat>& X0) {
  // Structured form of F for D = [[I, B^H], [B, Psi + B B^H]]:
  //   F11 = I + B^H Psi^-1 B,  F12 = -B^H Psi^-1,  F22 = Psi^-1 B (I + B^H Psi^-1 B)^-1 B^H Psi^-1.
  const CMat& Cown = rb.C[rb.own];
  const CMat B = Cown * X0[rb.own];
  const CMat Psi = interference(rb, X0);
  Eigen::LLT<CMat> lp(Psi);
  if (lp.info() != Eigen::Success) throw NumericalFailure("surrogate: interference covariance not PD");
  const CMat PiB = lp.solve(B);  // Psi^-1 B
  CMat F11 = B.adjoint() * PiB;
  F11 = linalg::herm(F11);
  F11.diagonal().array() += 1.0;
  Eigen::LLT<CMat> lf(F11);
  if (lf.info() != Eigen::Success) throw NumericalFailure("surrogate: F11 not PD");
  const CMat Yt = lf.matrixL().solve(PiB.adjoint());  // L^-1 B^H Psi^-1
  const CMat F22 = linalg::herm(Yt.adjoint() * Yt);
  const double trF22 = F22.trace().real();

  SurrogateCoeffs s;
  s.family = rb.family;
  s.k = rb.k;
  s.n = rb.n;
  s.own = rb.own;
  // v = vec(C^H F12^H) = -vec(C^H Psi^-1 B)
  s.v = -linalg::vec(Cown.adjoint() * PiB);
  const std::size_t J = rb.C.size();
  s.Z.resize(J);
  s.Upsilon.resize(J);
  double quad = 0.0;
  for (std::size_t j = 0; j < J; ++j) {
    const int mj = static_cast<int>(X0[j].rows());
    CMat Z = rb.C[j].cols() > 0 ? CMat(rb.C[j].adjoint() * F22 * rb.C[j]) : CMat::Zero(mj, mj);
    Z.diagonal().array() += rb.e[j] * trF22;
    s.Z[j] = linalg::herm(Z);
    const int cols = static_cast<int>(X0[j].cols());
    s.Upsilon[j] = linalg::kron_identity(cols, s.Z[j]);
    quad += (X0[j].adjoint() * s.Z[j] * X0[j]).trace().real();
  }
  const double f0 = linalg::logdet_hpd(F11);
  const double lin = 2.0 * s.v.dot(linalg::vec(X0[rb.own])).real();
  s.T = f0 + lin + quad;
  s.anchor_rate = f0 / kLn2;
  return s;
}

double SurrogateCoeffs::value(const std::vector<CMat>& X) const {
  double q = T - 2.0 * v.dot(linalg::vec(X[own])).real();
  for (std::size_t j = 0; j < Z.size(); ++j) q -= (X[j].adjoint() * Z[j] * X[j]).trace().real();
  return q / kLn2;
}

SurrogateCoeffs surrogate_coeffs_uch(int k, int n, const ChannelSet& ch, const NetworkConfig& cfg,
                                     const Allocation& anchor) {
  const auto rb = rate_block(RateFamily::UCH, k, n, ch, cfg);
  return surrogate_coeffs(rb, block_factors(rb, anchor));
}

SurrogateCoeffs surrogate_coeffs_uhap(int k, int n, const ChannelSet& ch, const NetworkConfig& cfg,
                                      const Allocation& anchor) {
  const auto rb = rate_block(RateFamily::UHAP, k, n, ch, cfg);
  return surrogate_coeffs(rb, block_factors(rb, anchor));
}

SurrogateCoeffs surrogate_coeffs_chhap(int k, int n, const ChannelSet& ch, const NetworkConfig& cfg,
                                       const Allocation& anchor) {
  const auto rb = rate_block(RateFamily::CHHAP, k, n, ch, cfg);
  return surrogate_coeffs(rb, block_factors(rb, anchor));
}

// ---------------------------------------------------------------------------
// Deterministic energy signal

double xi_bound(const CMat& B, double p0, const EhParams& eh, double tau2) {
  require(eh.mode == EhMode::Nonlinear, "xi_bound needs the nonlinear EH model");
  require(p0 > 0.0, "xi_bound: p0 must be positive");
  Eigen::SelfAdjointEigenSolver<CMat> es(linalg::herm(B), Eigen::EigenvaluesOnly);
  const double lmin = es.eigenvalues().minCoeff();
  const double lmax = es.eigenvalues().maxCoeff();
  if (!(lmin > 0.0)) throw InvalidArgument("xi_bound: B must be positive definite");
  if (tau2 <= 0.0) return 0.0;
  const double a = eh.a, b = eh.b, c = eh.c;
  // Over 0 < P <= p0*lmax:
  //   -lambda_min(Hess) <= 2 tau2 lmax g(P)/P * (max(0, -h) + 1/2 - 4a),  h = 2a ln P + b,
  // with g(P)/P = exp(a y^2 + (b-1) y + c), y = ln P, maximized over y <= ln(p0 lmax).
  const double ymax = std::log(p0 * lmax);
  const double ystar = -(b - 1.0) / (2.0 * a);
  const double y = std::min(ystar, ymax);
  const double gp = std::exp(a * y * y + (b - 1.0) * y + c);
  const double hterm = std::max(0.0, -(2.0 * a * ymax + b));
  return 2.0 * tau2 * lmax * gp * (hterm + 0.5 - 4.0 * a);
}

double det_energy(const CVec& x, const CMat& B, double tau2, const EhParams& eh) {
  const double w = std::max(0.0, x.dot(B * x).real());
  return harvested_energy(w, tau2, eh);
}

EnergySurrogate energy_surrogate_det(const CVec& anchor, const CMat& B, double tau2, const EhParams& eh,
                                     double xi) {
  EnergySurrogate s;
  s.xi = xi;
  s.anchor = anchor;
  s.E_anchor = det_energy(anchor, B, tau2, eh);
  const double w = std::max(0.0, anchor.dot(B * anchor).real());
  const double d1 = tau2 > 0.0 ? eh_curve_d1(w, eh) : 0.0;
  s.u = xi * anchor + 2.0 * tau2 * d1 * (B * anchor);
  return s;
}

EnergySurrogate energy_surrogate_det(int k, int n, const CVec& anchor, const ChannelSet& ch,
                                     const NetworkConfig& cfg, double tau2, double xi) {
  const CMat B = energy_matrix(ch.H_hat[k][n], ch.var_h_delta[k][n]);
  return energy_surrogate_det(anchor, B, tau2, cfg.eh, xi);
}

double EnergySurrogate::value(const CVec& x) const {
  return E_anchor + 0.5 * xi * anchor.squaredNorm() + u.dot(x - anchor).real() - 0.5 * xi * x.squaredNorm();
}

void dump_surrogate(std::ostream& os, const SurrogateCoeffs& s) {
  os << std::setprecision(17);
  os << "family," << family_name(s.family) << "\nk," << s.k << "\nn," << s.n << "\nT," << s.T << '\n';
  os << "v";
  for (Eigen::Index i = 0; i < s.v.size(); ++i) os << ',' << s.v(i).real() << ',' << s.v(i).imag();
  os << '\n';
  for (std::size_t j = 0; j < s.Z.size(); ++j) {
    os << "Z," << j << ',' << s.Z[j].rows() << '\n';
    for (Eigen::Index r = 0; r < s.Z[j].rows(); ++r) {
      for (Eigen::Index c = 0; c < s.Z[j].cols(); ++c)
        os << (c ? "," : "") << s.Z[j](r, c).real() << ',' << s.Z[j](r, c).imag();
      os << '\n';
    }
  }
}

}  // namespace wpcn
