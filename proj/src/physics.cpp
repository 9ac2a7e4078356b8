#include "wpcn/physics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numbers>
#include <ostream>

#include "linalg.hpp"

namespace wpcn {

CMat Allocation::energy_covariance() const {
  if (deterministic) return x0 * x0.adjoint();
  return Q;
}

int tau_size(int N) { return 2 * N; }

Allocation empty_allocation(const NetworkConfig& cfg) {
  const int K = cfg.K;
  const int N = cfg.N;
  const int c = cfg.ch();
  Allocation a;
  a.tau = RVec::Zero(tau_size(N));
  a.Q = CMat::Zero(cfg.M_h, cfg.M_h);
  a.x0 = CVec::Zero(cfg.M_h);
  a.X.assign(K, std::vector<CMat>(N - 1));
  a.Xt.assign(K, std::vector<CMat>(N));
  for (int k = 0; k < K; ++k) {
    for (int n = 0; n < N - 1; ++n) a.X[k][n] = CMat::Zero(cfg.M[k][n], cfg.M[k][n]);
    for (int n = 0; n < N; ++n) a.Xt[k][n] = CMat::Zero(cfg.M[k][c], cfg.M[k][c]);
  }
  return a;
}

CMat energy_matrix(const CMat& H_hat, double var_h_delta) {
  CMat B = H_hat.adjoint() * H_hat;
  B.diagonal().array() += var_h_delta * static_cast<double>(H_hat.rows());
  return 0.5 * (B + B.adjoint());
}

double rf_input_power(const CMat& Q, const CMat& H_hat, double var_h_delta) {
  if (Q.rows() != H_hat.cols() || Q.cols() != H_hat.cols())
    throw InvalidArgument("rf_input_power: Q must be M_h x M_h matching H_hat columns");
  const double direct = (H_hat * Q * H_hat.adjoint()).trace().real();
  const double err = var_h_delta * Q.trace().real() * static_cast<double>(H_hat.rows());
  return std::max(0.0, direct + err);
}

double eh_curve(double P, const EhParams& eh) {
  if (eh.mode == EhMode::Linear) return eh.zeta * std::max(P, 0.0);
  const double p = std::max(P, eh.p_floor);
  const double l = std::log(p);
  return std::exp(eh.a * l * l + eh.b * l + eh.c);
}

double eh_curve_d1(double P, const EhParams& eh) {
  if (eh.mode == EhMode::Linear) return eh.zeta;
  if (P < eh.p_floor) return 0.0;
  const double l = std::log(P);
  return eh_curve(P, eh) / P * (2.0 * eh.a * l + eh.b);
}

double eh_curve_d2(double P, const EhParams& eh) {
  if (eh.mode == EhMode::Linear) return 0.0;
  if (P < eh.p_floor) return 0.0;
  const double l = std::log(P);
  const double h1 = 2.0 * eh.a * l + eh.b;
  return eh_curve(P, eh) / (P * P) * (h1 * h1 - h1 + 2.0 * eh.a);
}

double harvested_energy(double P_in, double tau2, const EhParams& eh) {
  if (tau2 <= 0.0) return 0.0;
  return tau2 * eh_curve(P_in, eh);
}

std::pair<double, double> eh_concave_interval(const EhParams& eh) {
  if (eh.mode == EhMode::Linear) return {0.0, std::numeric_limits<double>::infinity()};
  // g'' has the sign of h^2 - h + 2a with h = 2a ln P + b.
  const double disc = 1.0 - 8.0 * eh.a;
  if (disc <= 0.0) return {0.0, 0.0};
  const double hr = 0.5 * (1.0 + std::sqrt(disc));
  const double hl = 0.5 * (1.0 - std::sqrt(disc));
  // h is decreasing in ln P (a < 0): h = hr gives the smaller P.
  const double p1 = std::exp((hr - eh.b) / (2.0 * eh.a));
  const double p2 = std::exp((hl - eh.b) / (2.0 * eh.a));
  return {std::min(p1, p2), std::max(p1, p2)};
}

double user_energy(const Allocation& a, const ChannelSet& ch, const NetworkConfig& cfg, int k, int n) {
  const double P = rf_input_power(a.energy_covariance(), ch.H_hat[k][n], ch.var_h_delta[k][n]);
  return harvested_energy(P, a.tau2(), cfg.eh);
}

// ---------------------------------------------------------------------------
// Rates

namespace {

constexpr double kLn2 = std::numbers::ln2;

// ln det(I + L^{-1} Sig L^{-H}) with Psi = L L^H.
double log_det_gain(const CMat& Psi, const CMat& Sig) {
  Eigen::LLT<CMat> llt(Psi);
  if (llt.info() != Eigen::Success) throw NumericalFailure("interference covariance not positive definite");
  CMat Y = llt.matrixL().solve(Sig);
  CMat Mx = llt.matrixL().solve(Y.adjoint()).adjoint();
  Mx = 0.5 * (Mx + Mx.adjoint());
  Mx.diagonal().array() += 1.0;
  return linalg::logdet_hpd(Mx);
}

CMat noise(int m, double s2) { return s2 * CMat::Identity(m, m); }

}  // namespace

double rate_user_to_ch_unit(int k, int n, const ChannelSet& ch, const NetworkConfig& cfg,
                            const Grid2<CMat>& S_all) {
  require(n >= 0 && n < cfg.N - 1, "U-CH rate is defined for members only");
  const int m = cfg.M[k][cfg.ch()];
  CMat Psi = noise(m, cfg.noise_uch);
  double err = 0.0;
  for (int j = 0; j < cfg.K; ++j) {
    const CMat& G = ch.G_hat[k][n][j];
    if (j != k) Psi += G * S_all[j][n] * G.adjoint();
    err += ch.var_g_delta[k][n][j] * S_all[j][n].trace().real();
  }
  Psi.diagonal().array() += err;
  const CMat& G = ch.G_hat[k][n][k];
  return log_det_gain(Psi, G * S_all[k][n] * G.adjoint()) / kLn2;
}

namespace {

double hap_rate_unit(int k, int n, int user, const ChannelSet& ch, const NetworkConfig& cfg,
                     const Grid2<CMat>& S_all, double s2) {
  CMat Psi = noise(cfg.M_h, s2);
  double err = 0.0;
  for (int j = 0; j < cfg.K; ++j) {
    const int u = user < 0 ? n : user;
    const CMat& H = ch.H_hat[j][u];
    if (j > k) Psi += H.adjoint() * S_all[j][n] * H;
    err += ch.var_h_delta[j][u] * S_all[j][n].trace().real();
  }
  Psi.diagonal().array() += err;
  const CMat& H = ch.H_hat[k][user < 0 ? n : user];
  return log_det_gain(Psi, H.adjoint() * S_all[k][n] * H) / kLn2;
}

}  // namespace

double rate_user_to_hap_unit(int k, int n, const ChannelSet& ch, const NetworkConfig& cfg,
                             const Grid2<CMat>& S_all) {
  require(n >= 0 && n < cfg.N - 1, "U-HAP rate is defined for members only");
  return hap_rate_unit(k, n, -1, ch, cfg, S_all, cfg.noise_uhap);
}

double rate_ch_to_hap_unit(int k, int n, const ChannelSet& ch, const NetworkConfig& cfg,
                           const Grid2<CMat>& St_all) {
  require(n >= 0 && n < cfg.N, "CH-HAP slot out of range");
  return hap_rate_unit(k, n, cfg.ch(), ch, cfg, St_all, cfg.noise_chhap);
}

double rate_user_to_ch(int k, int n, double tau3n, const ChannelSet& ch, const NetworkConfig& cfg,
                       const Grid2<CMat>& S_all) {
  require(tau3n >= 0.0, "negative phase duration");
  if (tau3n == 0.0) return 0.0;
  return tau3n * rate_user_to_ch_unit(k, n, ch, cfg, S_all);
}

double rate_user_to_hap(int k, int n, double tau3n, const ChannelSet& ch, const NetworkConfig& cfg,
                        const Grid2<CMat>& S_all) {
  require(tau3n >= 0.0, "negative phase duration");
  if (tau3n == 0.0) return 0.0;
  return tau3n * rate_user_to_hap_unit(k, n, ch, cfg, S_all);
}

double rate_ch_to_hap(int k, int n, double tau4n, const ChannelSet& ch, const NetworkConfig& cfg,
                      const Grid2<CMat>& St_all) {
  require(tau4n >= 0.0, "negative phase duration");
  if (tau4n == 0.0) return 0.0;
  return tau4n * rate_ch_to_hap_unit(k, n, ch, cfg, St_all);
}

CMat lmmse_decoder(int k, int n, const ChannelSet& ch, const NetworkConfig& cfg, const Grid2<CMat>& S_all,
                   const CMat* V) {
  require(n >= 0 && n < cfg.N - 1, "decoder is defined for members only");
  const int m = cfg.M[k][cfg.ch()];
  CMat Om = noise(m, cfg.noise_uch);
  double err = 0.0;
  for (int j = 0; j < cfg.K; ++j) {
    const CMat& G = ch.G_hat[k][n][j];
    Om += G * S_all[j][n] * G.adjoint();
    err += ch.var_g_delta[k][n][j] * S_all[j][n].trace().real();
  }
  Om.diagonal().array() += err;
  CMat Vk = V ? *V : linalg::psd_sqrt(S_all[k][n]);
  Eigen::LLT<CMat> llt(Om);
  if (llt.info() != Eigen::Success) throw NumericalFailure("LMMSE inner matrix is singular");
  // W = V^H G^H Om^{-1} = (Om^{-1} G V)^H
  CMat Z = llt.solve(ch.G_hat[k][n][k] * Vk);
  return Z.adjoint();
}

double rate_user_to_ch_with_decoder(int k, int n, double tau3n, const ChannelSet& ch,
                                    const NetworkConfig& cfg, const Grid2<CMat>& S_all, const CMat& V,
                                    const CMat& W) {
  const int m = cfg.M[k][cfg.ch()];
  CMat Psi = noise(m, cfg.noise_uch);
  double err = 0.0;
  for (int j = 0; j < cfg.K; ++j) {
    const CMat& G = ch.G_hat[k][n][j];
    if (j != k) Psi += G * S_all[j][n] * G.adjoint();
    err += ch.var_g_delta[k][n][j] * S_all[j][n].trace().real();
  }
  Psi.diagonal().array() += err;
  const CMat E0 = CMat::Identity(V.cols(), V.cols()) - W * ch.G_hat[k][n][k] * V;
  CMat E = E0 * E0.adjoint() + W * Psi * W.adjoint();
  E = 0.5 * (E + E.adjoint());
  return -tau3n * linalg::logdet_hpd(E) / kLn2;
}

ThroughputReport throughput_report(const Allocation& a, const ChannelSet& ch, const NetworkConfig& cfg) {
  const int K = cfg.K;
  const int N = cfg.N;
  ThroughputReport r;
  r.r_uch.assign(K, std::vector<double>(N, 0.0));
  r.r_uhap = r.r_chhap = r.r_user = r.r_uch;

  Grid2<CMat> S(K, std::vector<CMat>(N - 1));
  Grid2<CMat> St(K, std::vector<CMat>(N));
  for (int k = 0; k < K; ++k) {
    for (int n = 0; n < N - 1; ++n) S[k][n] = a.S(k, n);
    for (int n = 0; n < N; ++n) St[k][n] = a.St(k, n);
  }
  for (int k = 0; k < K; ++k) {
    for (int n = 0; n < N - 1; ++n) {
      r.r_uch[k][n] = rate_user_to_ch(k, n, a.tau3(n), ch, cfg, S);
      r.r_uhap[k][n] = rate_user_to_hap(k, n, a.tau3(n), ch, cfg, S);
    }
    for (int n = 0; n < N; ++n) r.r_chhap[k][n] = rate_ch_to_hap(k, n, a.tau4(N, n), ch, cfg, St);
    for (int n = 0; n < N - 1; ++n) {
      r.r_user[k][n] = std::min(r.r_uhap[k][n] + r.r_chhap[k][n], r.r_uch[k][n]);
    }
    r.r_user[k][N - 1] = r.r_chhap[k][N - 1];
  }
  r.min_throughput = std::numeric_limits<double>::infinity();
  for (const auto& row : r.r_user)
    for (double v : row) {
      r.min_throughput = std::min(r.min_throughput, v);
      r.sum_throughput += v;
    }
  return r;
}

void write_report_csv(std::ostream& os, const ThroughputReport& r, const NetworkConfig& cfg) {
  const double scale = cfg.bandwidth_hz * cfg.T / 1e6;
  os << "k,n,r_uch_mbps,r_uhap_mbps,r_chhap_mbps,r_user_mbps\n";
  os << std::setprecision(10);
  for (int k = 0; k < cfg.K; ++k)
    for (int n = 0; n < cfg.N; ++n)
      os << k << ',' << n << ',' << r.r_uch[k][n] * scale << ',' << r.r_uhap[k][n] * scale << ','
         << r.r_chhap[k][n] * scale << ',' << r.r_user[k][n] * scale << '\n';
  os << "min,," << r.min_throughput * scale << ",,,\n";
  os << "sum,," << r.sum_throughput * scale << ",,,\n";
}

// ---------------------------------------------------------------------------
// Constraints

double user_consumption(const Allocation& a, const NetworkConfig& cfg, int k, int n) {
  const int N = cfg.N;
  double tx = 0.0;
  if (n < N - 1) {
    tx = a.tau3(n) * a.X[k][n].squaredNorm();
  } else {
    for (int m = 0; m < N; ++m) tx += a.tau4(N, m) * a.Xt[k][m].squaredNorm();
  }
  return cfg.Pc[k][n] + cfg.eta[k][n] * tx;
}

double ConstraintSlack::worst() const {
  double w = std::min({time, tau_min, power, psd});
  for (const auto& row : energy)
    for (double e : row) w = std::min(w, e);
  return w;
}

ConstraintSlack constraint_slack(const Allocation& a, const ChannelSet& ch, const NetworkConfig& cfg) {
  ConstraintSlack s;
  s.time = cfg.T - cfg.tau1 - a.tau.sum();
  s.tau_min = a.tau.minCoeff();
  const CMat Q = a.energy_covariance();
  s.power = cfg.p0 - Q.trace().real();
  Eigen::SelfAdjointEigenSolver<CMat> es(0.5 * (Q + Q.adjoint()), Eigen::EigenvaluesOnly);
  s.psd = es.eigenvalues().minCoeff();
  s.energy.assign(cfg.K, std::vector<double>(cfg.N, 0.0));
  for (int k = 0; k < cfg.K; ++k)
    for (int n = 0; n < cfg.N; ++n) s.energy[k][n] = user_energy(a, ch, cfg, k, n) - user_consumption(a, cfg, k, n);
  return s;
}

// ---------------------------------------------------------------------------
// Piecewise-linear lower model of the EH curve

EhLowerModel::EhLowerModel(const EhParams& eh, double p_max, int nodes) : eh_(eh), p_max_(p_max) {
  require(nodes >= 2, "EH lower model needs at least two nodes");
  if (eh.mode == EhMode::Linear) {
    linear_ = true;
    slope_ = {eh.zeta};
    icpt_ = {0.0};
    return;
  }
  if (p_max <= eh.p_floor) {
    // g is flat below the floor, so the model is exact
    linear_ = true;
    slope_ = {0.0};
    icpt_ = {eh_curve(eh.p_floor, eh)};
    return;
  }
  const auto [pc1, pc2] = eh_concave_interval(eh);
  const double lo = std::max(pc1, eh.p_floor);
  const double hi = std::min(pc2, std::max(p_max, eh.p_floor));
  if (hi > lo) {
    const double l0 = std::log(lo);
    const double l1 = std::log(hi);
    for (int i = 0; i < nodes; ++i) nodes_.push_back(std::exp(l0 + (l1 - l0) * i / (nodes - 1)));
    nodes_.front() = lo;
    nodes_.back() = hi;
  }
  base_ = nodes_;
  rebuild();
}

void EhLowerModel::rebuild() {
  slope_.clear();
  icpt_.clear();
  const auto [pc1, pc2] = eh_concave_interval(eh_);
  auto tangent = [&](double p) {
    const double s = eh_curve_d1(p, eh_);
    slope_.push_back(s);
    icpt_.push_back(eh_curve(p, eh_) - s * p);
  };
  tangent(anchor_ > 0.0 ? anchor_ : std::max(pc1, eh_.p_floor));
  tangent(pc2);
  for (std::size_t i = 0; i + 1 < nodes_.size(); ++i) {
    const double p0 = nodes_[i];
    const double p1 = nodes_[i + 1];
    const double g0 = eh_curve(p0, eh_);
    const double g1 = eh_curve(p1, eh_);
    const double s = (g1 - g0) / (p1 - p0);
    slope_.push_back(s);
    icpt_.push_back(g0 - s * p0);
  }
}

double EhLowerModel::operator()(double P) const {
  double v = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < slope_.size(); ++i) v = std::min(v, slope_[i] * P + icpt_[i]);
  return v;
}

void EhLowerModel::refine(double P) {
  if (linear_) return;
  anchor_ = 0.0;
  nodes_ = base_;
  const double pc1 = std::max(eh_concave_interval(eh_).first, eh_.p_floor);
  if (P > eh_.p_floor && P < pc1) {
    // convex part: the tangent at P stays below g until it meets g again in
    // the concave part; chords take over from there
    const double g0 = eh_curve(P, eh_);
    const double s = eh_curve_d1(P, eh_);
    auto gap = [&](double x) { return eh_curve(x, eh_) - g0 - s * (x - P); };
    nodes_.clear();
    if (base_.size() >= 2 && gap(base_.back()) < 0.0) {
      double lo = std::log(base_.front()), hi = std::log(base_.back());
      for (int i = 0; i < 200 && hi - lo > 1e-15; ++i) {
        const double mid = 0.5 * (lo + hi);
        (gap(std::exp(mid)) >= 0.0 ? lo : hi) = mid;
      }
      const double x = std::exp(lo);
      nodes_.push_back(x);
      for (double q : base_)
        if (q > x * (1 + 1e-9)) nodes_.push_back(q);
      if (nodes_.size() < 2) nodes_.clear();
    }
    anchor_ = P;
  } else if (base_.size() >= 2 && P > base_.front() && P < base_.back()) {
    // base grid plus a ladder of nodes around P, so l is nearly smooth there
    for (double d : {0.0, 1e-3, -1e-3, 1e-2, -1e-2, 4e-2, -4e-2}) {
      const double q = P * std::exp(d);
      if (q > base_.front() && q < base_.back()) nodes_.push_back(q);
    }
    std::sort(nodes_.begin(), nodes_.end());
    std::vector<double> uniq;
    for (double q : nodes_)
      if (uniq.empty() || q - uniq.back() > 1e-9 * q) uniq.push_back(q);
    nodes_ = std::move(uniq);
  }
  rebuild();
}

}  // namespace wpcn
