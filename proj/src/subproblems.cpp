#include "wpcn/subproblems.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <string>

#include "linalg.hpp"

namespace wpcn {

namespace {

constexpr double kLn2 = std::numbers::ln2;

std::string name2(const char* base, int k, int n) {
  return std::string(base) + "_" + std::to_string(k) + "_" + std::to_string(n);
}

// Basis data for Hermitian m x m matrices.
struct HermBasis {
  int m = 0;
  std::vector<CMat> E;
  RVec fro;  // ||E_a||_F
};

const HermBasis& herm_basis_cached(int m) {
  static thread_local std::map<int, HermBasis> cache;
  auto it = cache.find(m);
  if (it != cache.end()) return it->second;
  HermBasis hb;
  hb.m = m;
  const int d = herm_dim(m);
  hb.fro.resize(d);
  for (int a = 0; a < d; ++a) {
    hb.E.push_back(herm_basis(m, a));
    hb.fro(a) = hb.E.back().norm();
  }
  return cache.emplace(m, std::move(hb)).first->second;
}

// P_ab = Re tr(E_a^H Z E_b)
RMat herm_gram(const CMat& Z, int m) {
  const auto& hb = herm_basis_cached(m);
  const int d = herm_dim(m);
  std::vector<CMat> ZE(d);
  for (int b = 0; b < d; ++b) ZE[b] = Z * hb.E[b];
  RMat P(d, d);
  for (int a = 0; a < d; ++a)
    for (int b = a; b < d; ++b) {
      const double v = (hb.E[a].conjugate().cwiseProduct(ZE[b])).sum().real();
      P(a, b) = v;
      P(b, a) = v;
    }
  return P;
}

// Re{v^H vec(E_a)}
RVec herm_linear(const CVec& v, int m) {
  const auto& hb = herm_basis_cached(m);
  const int d = herm_dim(m);
  RVec out(d);
  for (int a = 0; a < d; ++a) out(a) = v.dot(linalg::vec(hb.E[a])).real();
  return out;
}

// Rows R with R^T R = P (P symmetric PSD); negligible directions dropped.
RMat gram_factor(const RMat& P) {
  Eigen::SelfAdjointEigenSolver<RMat> es(0.5 * (P + P.transpose()));
  const RVec& ev = es.eigenvalues();
  const double top = std::max(ev.cwiseAbs().maxCoeff(), 0.0);
  std::vector<int> keep;
  for (int i = 0; i < ev.size(); ++i)
    if (ev(i) > 1e-14 * top && ev(i) > 0.0) keep.push_back(i);
  RMat R(keep.size(), P.cols());
  for (std::size_t r = 0; r < keep.size(); ++r)
    R.row(static_cast<int>(r)) = std::sqrt(ev(keep[r])) * es.eigenvectors().col(keep[r]).transpose();
  return R;
}

struct Block {
  int off = -1;  // -1: held at the anchor
  int m = 0;
  double scale = 1.0;
  CMat anchor;
};

struct Layout {
  Grid2<Block> X, Xt;
  int q = -1, x0 = -1;
  double ps = 1.0;
};

// Orders blocks by column so that row assembly does not depend on addresses.
struct ByOffset {
  bool operator()(const Block* a, const Block* b) const { return a->off < b->off; }
};

// Affine-minus-quadratic row: c + lin^T x - sum_blocks x_b^T G_b x_b >= lhs
struct QuadRow {
  double c = 0.0;   // scaled by t in perspective rows
  double c0 = 0.0;  // never scaled
  std::map<int, double> lin;
  std::map<const Block*, RMat, ByOffset> gram;

  void add_lin(int col, double v) { lin[col] += v; }
  void add_gram(const Block* b, const RMat& G) {
    auto it = gram.find(b);
    if (it == gram.end()) gram.emplace(b, G);
    else it->second += G;
  }
};

void add_rate(QuadRow& row, const SurrogateCoeffs& s, double w, const std::vector<const Block*>& blocks) {
  if (w <= 0.0) return;
  // q (nats) = T - 2 Re{v^H vec X_own} - sum_j tr(X_j^H Z_j X_j)
  const double wn = w / kLn2;
  row.c += wn * s.T;
  const Block* own = blocks[s.own];
  if (own->off >= 0) {
    const RVec l = herm_linear(s.v, own->m);
    for (int a = 0; a < l.size(); ++a) row.add_lin(own->off + a, -2.0 * wn * own->scale * l(a));
  } else {
    row.c -= 2.0 * wn * s.v.dot(linalg::vec(own->anchor)).real();
  }
  for (std::size_t j = 0; j < blocks.size(); ++j) {
    const Block* b = blocks[j];
    if (b->off >= 0) {
      row.add_gram(b, wn * b->scale * b->scale * herm_gram(s.Z[j], b->m));
    } else {
      row.c -= wn * (b->anchor.adjoint() * s.Z[j] * b->anchor).trace().real();
    }
  }
}

// Emits c*t + c0 + lin x - sum_i w_i z_i >= sum ||R_b x_b||^2 / t as a rotated
// cone (or a linear row when there is no quadratic part). tcol < 0 means t = 1.
void emit(ConicProblem& p, const QuadRow& row, const std::vector<std::pair<int, double>>& minus,
          const std::string& label, int tcol = -1) {
  std::vector<std::pair<const Block*, RMat>> fac;
  int extra = 0;
  for (const auto& [b, G] : row.gram) {
    RMat R = gram_factor(G);
    extra += static_cast<int>(R.rows());
    if (R.rows() > 0) fac.emplace_back(b, std::move(R));
  }
  auto fill_affine = [&](ConeBlock& cb, int r) {
    cb.b(r) = row.c0 + (tcol < 0 ? row.c : 0.0);
    if (tcol >= 0 && row.c != 0.0) cb.A.emplace_back(r, tcol, row.c);
    for (const auto& [col, v] : row.lin) cb.A.emplace_back(r, col, v);
    for (const auto& [col, w] : minus)
      if (col >= 0) cb.A.emplace_back(r, col, -w);
  };
  if (extra == 0) {
    auto& cb = p.add_cone(ConeType::Nonneg, 1, label);
    fill_affine(cb, 0);
    return;
  }
  auto& cb = p.add_cone(ConeType::RotatedSecondOrder, 2 + extra, label);
  if (tcol >= 0) cb.A.emplace_back(0, tcol, 0.5);
  else cb.b(0) = 0.5;
  fill_affine(cb, 1);
  int r = 2;
  for (const auto& [b, R] : fac) {
    for (int i = 0; i < R.rows(); ++i, ++r)
      for (int j = 0; j < R.cols(); ++j)
        if (R(i, j) != 0.0) cb.A.emplace_back(r, b->off + j, R(i, j));
  }
}

void emit(ConicProblem& p, const QuadRow& row, int lhs_col, const std::string& label) {
  emit(p, row, {{lhs_col, 1.0}}, label);
}

// ||X||_F^2 = ps * x^T diag(fro^2) x in solver units.
RMat fro_gram(const Block& b) {
  const auto& hb = herm_basis_cached(b.m);
  return (b.scale * b.scale * hb.fro.array().square()).matrix().asDiagonal();
}

double typical_power(const NetworkConfig& cfg, const ChannelSet& ch, const Allocation& anchor) {
  CMat Q = anchor.energy_covariance();
  if (Q.trace().real() <= 0.0) Q = CMat::Identity(cfg.M_h, cfg.M_h) * (cfg.p0 / cfg.M_h);
  double acc = 0.0;
  int cnt = 0;
  for (int k = 0; k < cfg.K; ++k)
    for (int n = 0; n < cfg.N; ++n) {
      acc += eh_curve(rf_input_power(Q, ch.H_hat[k][n], ch.var_h_delta[k][n]), cfg.eh);
      ++cnt;
    }
  const double ps = acc / cnt;
  return ps > 1e-300 ? ps : 1e-12;
}

Layout add_factor_vars(ConicProblem& p, const NetworkConfig& cfg, const RVec& tau, const Allocation& anchor,
                       const SubproblemOptions& opt, double ps) {
  const int K = cfg.K, N = cfg.N;
  Layout L;
  L.ps = ps;
  L.X.assign(K, std::vector<Block>(N - 1));
  L.Xt.assign(K, std::vector<Block>(N));
  const double sc = std::sqrt(ps);
  for (int k = 0; k < K; ++k) {
    for (int n = 0; n < N - 1; ++n) {
      Block& b = L.X[k][n];
      b.m = cfg.M[k][n];
      b.scale = sc;
      b.anchor = anchor.X[k][n];
      if (tau(1 + n) > opt.tau_eps) b.off = p.add_var(name2("X", k, n), herm_dim(b.m), sc);
    }
    for (int n = 0; n < N; ++n) {
      Block& b = L.Xt[k][n];
      b.m = cfg.M[k][cfg.ch()];
      b.scale = sc;
      b.anchor = anchor.Xt[k][n];
      const bool pinned = !opt.cooperative && n < N - 1;
      if (!pinned && tau(N + n) > opt.tau_eps) b.off = p.add_var(name2("Xt", k, n), herm_dim(b.m), sc);
    }
  }
  return L;
}

std::vector<const Block*> column(const Grid2<Block>& G, int n) {
  std::vector<const Block*> out;
  for (const auto& row : G) out.push_back(&row[n]);
  return out;
}

// Transmit-energy part of the consumption: sum_b eta*tau_b*||X_b||^2 (solver units / ps).
void add_consumption(QuadRow& row, const std::vector<std::pair<const Block*, double>>& terms, double ps) {
  for (const auto& [b, w] : terms) {
    if (w <= 0.0) continue;
    if (b->off >= 0) {
      row.add_gram(b, (w / ps) * fro_gram(*b));
    } else {
      row.c -= w * b->anchor.squaredNorm() / ps;
    }
  }
}

std::vector<std::pair<const Block*, double>> consumption_terms(const Layout& L, const NetworkConfig& cfg,
                                                               const RVec& tau, int k, int n) {
  const int N = cfg.N;
  std::vector<std::pair<const Block*, double>> t;
  const double eta = cfg.eta[k][n];
  if (n < N - 1) {
    t.emplace_back(&L.X[k][n], eta * tau(1 + n));
  } else {
    for (int m = 0; m < N; ++m) t.emplace_back(&L.Xt[k][m], eta * tau(N + m));
  }
  return t;
}

// Rate rows shared by the three covariance builders. Returns the objective
// epigraph layout via the problem's var_map.
void add_rate_rows(ConicProblem& p, const NetworkConfig& cfg, const RVec& tau, const SurrogateSet& sur,
                   const Layout& L, const SubproblemOptions& opt) {
  const int K = cfg.K, N = cfg.N;
  const bool maxmin = opt.objective == Objective::MaxMin;
  int beta = -1;
  if (maxmin) {
    beta = p.add_var("beta", 1);
    p.objective(beta) = 1.0;
  }
  auto on = [&](double t) { return t > opt.tau_eps ? t : 0.0; };
  for (int k = 0; k < K; ++k) {
    for (int n = 0; n < N - 1; ++n) {
      const double t3 = on(tau(1 + n));
      const double t4 = opt.cooperative ? on(tau(N + n)) : 0.0;
      int lhs = beta;
      if (!maxmin) {
        lhs = p.add_var(name2("phi", k, n), 1);
        p.objective(lhs) = 1.0;
      }
      QuadRow r1;
      add_rate(r1, sur.uch[k][n], t3, column(L.X, n));
      emit(p, r1, lhs, name2("uch", k, n));
      QuadRow r2;
      add_rate(r2, sur.uhap[k][n], t3, column(L.X, n));
      if (opt.cooperative) add_rate(r2, sur.chhap[k][n], t4, column(L.Xt, n));
      emit(p, r2, lhs, name2("relay", k, n));
    }
    int lhs = beta;
    if (!maxmin) {
      lhs = p.add_var("t_" + std::to_string(k), 1);
      p.objective(lhs) = 1.0;
    }
    QuadRow r3;
    add_rate(r3, sur.chhap[k][N - 1], on(tau(2 * N - 1)), column(L.Xt, N - 1));
    emit(p, r3, lhs, "ch_" + std::to_string(k));
  }
}

ConicProblem build_random_signal(const NetworkConfig& cfg, const ChannelSet& ch, const RVec& tau,
                                 const Allocation& anchor, const SurrogateSet& sur,
                                 const Grid2<EhLowerModel>& models, const SubproblemOptions& opt) {
  require(tau.size() == tau_size(cfg.N), "tau has the wrong length");
  require(static_cast<int>(models.size()) == cfg.K, "EH model grid has the wrong shape");
  ConicProblem p;
  const int Mh = cfg.M_h;
  const double ps = typical_power(cfg, ch, anchor);
  Layout L = add_factor_vars(p, cfg, tau, anchor, opt, ps);
  add_rate_rows(p, cfg, tau, sur, L, opt);

  // C2: Q = p0 * herm(q) in the PSD cone, tr(q) <= 1.
  const int hd = herm_dim(Mh);
  L.q = p.add_var("Q", hd, cfg.p0);
  const auto& hb = herm_basis_cached(Mh);
  {
    const int side = 2 * Mh;
    auto& psd = p.add_cone(ConeType::Psd, svec_dim(side), "Q_psd");
    for (int a = 0; a < hd; ++a) {
      const RVec col = svec(real_embedding(hb.E[a]));
      for (int r = 0; r < col.size(); ++r)
        if (col(r) != 0.0) psd.A.emplace_back(r, L.q + a, col(r));
    }
    auto& tr = p.add_cone(ConeType::Nonneg, 1, "Q_trace");
    tr.b(0) = 1.0;
    for (int i = 0; i < Mh; ++i) tr.A.emplace_back(0, L.q + i, -1.0);
  }

  // C3/C4: e_kn <= tau2 * l(P(Q)) line by line; consumption <= e_kn.
  const double t2 = tau(0);
  for (int k = 0; k < cfg.K; ++k)
    for (int n = 0; n < cfg.N; ++n) {
      const int e = p.add_var(name2("e", k, n), 1, ps);
      const CMat B = energy_matrix(ch.H_hat[k][n], ch.var_h_delta[k][n]);
      RVec pc(hd);  // P = p0 * pc^T q
      for (int a = 0; a < hd; ++a) pc(a) = (hb.E[a] * B).trace().real();
      const auto& m = models[k][n];
      const int lines = static_cast<int>(m.slopes().size());
      auto& cb = p.add_cone(ConeType::Nonneg, lines, name2("eh", k, n));
      for (int i = 0; i < lines; ++i) {
        cb.A.emplace_back(i, e, -1.0);
        cb.b(i) = t2 * m.intercepts()[i] / ps;
        const double s = t2 * m.slopes()[i] * cfg.p0 / ps;
        for (int a = 0; a < hd; ++a)
          if (pc(a) != 0.0) cb.A.emplace_back(i, L.q + a, s * pc(a));
      }
      QuadRow row;
      row.c = -cfg.Pc[k][n] * cfg.T / ps;
      row.add_lin(e, 1.0);
      add_consumption(row, consumption_terms(L, cfg, tau, k, n), ps);
      emit(p, row, -1, name2("energy", k, n));
    }
  p.validate();
  return p;
}

// Joint step over (tau, covariances) with Y = tau*X, Qt = tau2*Q, xt = tau2*x0:
// every minorized throughput tau*q(Y/tau) and every energy term is jointly concave.
ConicProblem build_joint(const NetworkConfig& cfg, const ChannelSet& ch, const Allocation& anchor,
                         const SurrogateSet& sur, const Grid2<EhLowerModel>& models, const SubproblemOptions& opt) {
  const int K = cfg.K, N = cfg.N, Mh = cfg.M_h;
  const int ts = tau_size(N);
  const bool det = anchor.deterministic;
  const bool maxmin = opt.objective == Objective::MaxMin;
  ConicProblem p;
  const double ps = typical_power(cfg, ch, anchor);
  const double sc = std::sqrt(ps);

  std::vector<int> tcol(ts, -1);
  for (int i = 0; i < ts; ++i) {
    const bool pinned = !opt.cooperative && i >= N && i < 2 * N - 1;
    if (!pinned) tcol[i] = p.add_var("tau_" + std::to_string(i), 1);
  }
  {
    auto& cb = p.add_cone(ConeType::Nonneg, ts + 1, "time");
    int r = 0;
    for (int i = 0; i < ts; ++i, ++r)
      if (tcol[i] >= 0) cb.A.emplace_back(r, tcol[i], 1.0);
    cb.b(r) = cfg.T - cfg.tau1;
    for (int i = 0; i < ts; ++i)
      if (tcol[i] >= 0) cb.A.emplace_back(r, tcol[i], -1.0);
  }

  Layout L;
  L.ps = ps;
  L.X.assign(K, std::vector<Block>(N - 1));
  L.Xt.assign(K, std::vector<Block>(N));
  for (int k = 0; k < K; ++k) {
    for (int n = 0; n < N - 1; ++n) {
      Block& b = L.X[k][n];
      b.m = cfg.M[k][n];
      b.scale = sc;
      b.anchor = anchor.X[k][n];
      b.off = p.add_var(name2("Y", k, n), herm_dim(b.m), sc);
    }
    for (int n = 0; n < N; ++n) {
      Block& b = L.Xt[k][n];
      b.m = cfg.M[k][cfg.ch()];
      b.scale = sc;
      b.anchor = anchor.Xt[k][n];
      if (tcol[N + n] >= 0) b.off = p.add_var(name2("Yt", k, n), herm_dim(b.m), sc);
    }
  }

  int beta = -1;
  if (maxmin) {
    beta = p.add_var("beta", 1);
    p.objective(beta) = 1.0;
  }
  auto rate_row = [&](const SurrogateCoeffs& s, const Grid2<Block>& G, int n) {
    QuadRow r;
    add_rate(r, s, 1.0, column(G, n));
    return r;
  };
  for (int k = 0; k < K; ++k) {
    for (int n = 0; n < N - 1; ++n) {
      int lhs = beta;
      if (!maxmin) {
        lhs = p.add_var(name2("phi", k, n), 1);
        p.objective(lhs) = 1.0;
      }
      emit(p, rate_row(sur.uch[k][n], L.X, n), {{lhs, 1.0}}, name2("uch", k, n), tcol[1 + n]);
      if (opt.cooperative) {
        const int z1 = p.add_var(name2("zu", k, n), 1);
        const int z2 = p.add_var(name2("zc", k, n), 1);
        emit(p, rate_row(sur.uhap[k][n], L.X, n), {{z1, 1.0}}, name2("uhap", k, n), tcol[1 + n]);
        emit(p, rate_row(sur.chhap[k][n], L.Xt, n), {{z2, 1.0}}, name2("chhap", k, n), tcol[N + n]);
        QuadRow sum;
        sum.add_lin(z1, 1.0);
        sum.add_lin(z2, 1.0);
        emit(p, sum, lhs, name2("relay", k, n));
      } else {
        emit(p, rate_row(sur.uhap[k][n], L.X, n), {{lhs, 1.0}}, name2("relay", k, n), tcol[1 + n]);
      }
    }
    int lhs = beta;
    if (!maxmin) {
      lhs = p.add_var("t_" + std::to_string(k), 1);
      p.objective(lhs) = 1.0;
    }
    emit(p, rate_row(sur.chhap[k][N - 1], L.Xt, N - 1), {{lhs, 1.0}}, "ch_" + std::to_string(k),
         tcol[2 * N - 1]);
  }

  // transmit energy eta*||Y||^2/t per block, in units of ps
  auto consumption = [&](int k, int n) {
    std::vector<std::pair<int, double>> zs;
    auto one = [&](const Block& b, int t, const std::string& label) {
      if (b.off < 0 || t < 0) return;
      const int z = p.add_var(label, 1);
      QuadRow r;
      r.add_lin(z, 1.0);
      r.add_gram(&b, (cfg.eta[k][n] / ps) * fro_gram(b));
      emit(p, r, std::vector<std::pair<int, double>>{}, label, t);
      zs.emplace_back(z, 1.0);
    };
    if (n < N - 1) {
      one(L.X[k][n], tcol[1 + n], name2("w", k, n));
    } else {
      for (int m = 0; m < N; ++m) one(L.Xt[k][m], tcol[N + m], name2("w", k, m) + "_ch");
    }
    return zs;
  };

  const int t2 = tcol[0];
  if (!det) {
    const int hd = herm_dim(Mh);
    L.q = p.add_var("Qt", hd, cfg.p0);
    const auto& hb = herm_basis_cached(Mh);
    auto& psd = p.add_cone(ConeType::Psd, svec_dim(2 * Mh), "Q_psd");
    for (int a = 0; a < hd; ++a) {
      const RVec col = svec(real_embedding(hb.E[a]));
      for (int r = 0; r < col.size(); ++r)
        if (col(r) != 0.0) psd.A.emplace_back(r, L.q + a, col(r));
    }
    auto& tr = p.add_cone(ConeType::Nonneg, 1, "Q_trace");
    tr.A.emplace_back(0, t2, 1.0);
    for (int i = 0; i < Mh; ++i) tr.A.emplace_back(0, L.q + i, -1.0);
    for (int k = 0; k < K; ++k)
      for (int n = 0; n < N; ++n) {
        const int e = p.add_var(name2("e", k, n), 1, ps);
        const CMat B = energy_matrix(ch.H_hat[k][n], ch.var_h_delta[k][n]);
        RVec pc(hd);
        for (int a = 0; a < hd; ++a) pc(a) = (hb.E[a] * B).trace().real();
        const auto& m = models[k][n];
        const int lines = static_cast<int>(m.slopes().size());
        auto& cb = p.add_cone(ConeType::Nonneg, lines, name2("eh", k, n));
        for (int i = 0; i < lines; ++i) {
          cb.A.emplace_back(i, e, -1.0);
          cb.A.emplace_back(i, t2, m.intercepts()[i] / ps);
          const double sl = m.slopes()[i] * cfg.p0 / ps;
          for (int a = 0; a < hd; ++a)
            if (pc(a) != 0.0) cb.A.emplace_back(i, L.q + a, sl * pc(a));
        }
        QuadRow row;
        row.c0 = -cfg.Pc[k][n] * cfg.T / ps;
        row.add_lin(e, 1.0);
        emit(p, row, consumption(k, n), name2("energy", k, n));
      }
  } else {
    const double sp0 = std::sqrt(cfg.p0);
    L.x0 = p.add_var("xt", 2 * Mh, sp0);
    auto& cb = p.add_cone(ConeType::SecondOrder, 2 * Mh + 1, "x0_power");
    cb.A.emplace_back(0, t2, 1.0);
    for (int i = 0; i < 2 * Mh; ++i) cb.A.emplace_back(1 + i, L.x0 + i, 1.0);
    Block xb;
    xb.off = L.x0;
    for (int k = 0; k < K; ++k)
      for (int n = 0; n < N; ++n) {
        const EnergySurrogate& es = sur.energy[k][n];
        QuadRow row;
        row.c = (es.E_anchor + 0.5 * es.xi * es.anchor.squaredNorm() - es.u.dot(es.anchor).real()) / ps;
        row.c0 = -cfg.Pc[k][n] * cfg.T / ps;
        for (int i = 0; i < Mh; ++i) {
          row.add_lin(L.x0 + i, sp0 * es.u(i).real() / ps);
          row.add_lin(L.x0 + Mh + i, sp0 * es.u(i).imag() / ps);
        }
        if (es.xi > 0.0) row.add_gram(&xb, RMat::Identity(2 * Mh, 2 * Mh) * (0.5 * es.xi * cfg.p0 / ps));
        emit(p, row, consumption(k, n), name2("energy", k, n), t2);
      }
  }
  p.validate();
  return p;
}

}  // namespace

int herm_dim(int m) { return m * m; }

CMat herm_basis(int m, int a) {
  require(a >= 0 && a < m * m, "Hermitian basis index out of range");
  CMat E = CMat::Zero(m, m);
  if (a < m) {
    E(a, a) = 1.0;
    return E;
  }
  int idx = m;
  for (int j = 0; j < m; ++j)
    for (int i = 0; i < j; ++i) {
      if (idx == a) {
        E(i, j) = E(j, i) = 1.0;
        return E;
      }
      if (idx + 1 == a) {
        E(i, j) = cplx(0.0, 1.0);
        E(j, i) = cplx(0.0, -1.0);
        return E;
      }
      idx += 2;
    }
  return E;
}

RVec herm_encode(const CMat& H) {
  require(H.rows() == H.cols(), "herm_encode needs a square matrix");
  const int m = static_cast<int>(H.rows());
  RVec x(m * m);
  for (int i = 0; i < m; ++i) x(i) = H(i, i).real();
  int idx = m;
  for (int j = 0; j < m; ++j)
    for (int i = 0; i < j; ++i) {
      const cplx v = 0.5 * (H(i, j) + std::conj(H(j, i)));
      x(idx++) = v.real();
      x(idx++) = v.imag();
    }
  return x;
}

CMat herm_decode(const RVec& x, int m) {
  require(x.size() == m * m, "herm_decode: length mismatch");
  CMat H(m, m);
  for (int i = 0; i < m; ++i) H(i, i) = x(i);
  int idx = m;
  for (int j = 0; j < m; ++j)
    for (int i = 0; i < j; ++i) {
      H(i, j) = cplx(x(idx), x(idx + 1));
      H(j, i) = cplx(x(idx), -x(idx + 1));
      idx += 2;
    }
  return H;
}

RMat real_embedding(const CMat& H) {
  const auto m = H.rows();
  RMat R(2 * m, 2 * m);
  R.topLeftCorner(m, m) = H.real();
  R.topRightCorner(m, m) = -H.imag();
  R.bottomLeftCorner(m, m) = H.imag();
  R.bottomRightCorner(m, m) = H.real();
  return R;
}

SurrogateSet compute_surrogates(const NetworkConfig& cfg, const ChannelSet& ch, const Allocation& anchor,
                                const SubproblemOptions& opt) {
  const int K = cfg.K, N = cfg.N;
  SurrogateSet s;
  s.uch.assign(K, std::vector<SurrogateCoeffs>(N - 1));
  s.uhap = s.uch;
  s.chhap.assign(K, std::vector<SurrogateCoeffs>(N));
  for (int k = 0; k < K; ++k) {
    for (int n = 0; n < N - 1; ++n) {
      s.uch[k][n] = surrogate_coeffs_uch(k, n, ch, cfg, anchor);
      s.uhap[k][n] = surrogate_coeffs_uhap(k, n, ch, cfg, anchor);
    }
    for (int n = 0; n < N; ++n)
      if (opt.cooperative || n == N - 1) s.chhap[k][n] = surrogate_coeffs_chhap(k, n, ch, cfg, anchor);
  }
  if (anchor.deterministic) {
    s.energy.assign(K, std::vector<EnergySurrogate>(N));
    for (int k = 0; k < K; ++k)
      for (int n = 0; n < N; ++n) {
        const CMat B = energy_matrix(ch.H_hat[k][n], ch.var_h_delta[k][n]);
        double xi = 0.0;
        const double t2 = opt.joint ? 1.0 : anchor.tau2();
        if (cfg.eh.mode == EhMode::Nonlinear) xi = 1.1 * xi_bound(B, cfg.p0, cfg.eh, t2);
        s.energy[k][n] = energy_surrogate_det(anchor.x0, B, t2, cfg.eh, xi);
      }
  }
  return s;
}

Grid2<EhLowerModel> make_eh_models(const NetworkConfig& cfg, const ChannelSet& ch, int nodes) {
  Grid2<EhLowerModel> m(cfg.K);
  for (int k = 0; k < cfg.K; ++k)
    for (int n = 0; n < cfg.N; ++n) {
      const CMat B = energy_matrix(ch.H_hat[k][n], ch.var_h_delta[k][n]);
      m[k].emplace_back(cfg.eh, cfg.p0 * linalg::lambda_max(B), nodes);
    }
  return m;
}

void refine_eh_models(Grid2<EhLowerModel>& models, const Allocation& a, const ChannelSet& ch,
                      const NetworkConfig& cfg) {
  const CMat Q = a.energy_covariance();
  for (int k = 0; k < cfg.K; ++k)
    for (int n = 0; n < cfg.N; ++n)
      models[k][n].refine(rf_input_power(Q, ch.H_hat[k][n], ch.var_h_delta[k][n]));
}

double energy_rate(const Allocation& a, const ChannelSet& ch, const NetworkConfig& cfg,
                   const Grid2<EhLowerModel>& models, int k, int n) {
  const double P = rf_input_power(a.energy_covariance(), ch.H_hat[k][n], ch.var_h_delta[k][n]);
  if (a.deterministic) return eh_curve(P, cfg.eh);
  return models[k][n](P);
}

ConicProblem build_covariance_subproblem(const NetworkConfig& cfg, const ChannelSet& ch, const RVec& tau,
                                         const Allocation& anchor, const SurrogateSet& sur,
                                         const Grid2<EhLowerModel>& models, const SubproblemOptions& opt) {
  return build_random_signal(cfg, ch, tau, anchor, sur, models, opt);
}

ConicProblem build_sum_subproblem(const NetworkConfig& cfg, const ChannelSet& ch, const RVec& tau,
                                  const Allocation& anchor, const SurrogateSet& sur,
                                  const Grid2<EhLowerModel>& models, SubproblemOptions opt) {
  opt.objective = Objective::Sum;
  return build_random_signal(cfg, ch, tau, anchor, sur, models, opt);
}

ConicProblem build_covariance_subproblem_det(const NetworkConfig& cfg, const ChannelSet& ch, const RVec& tau,
                                             const Allocation& anchor, const SurrogateSet& sur,
                                             const SubproblemOptions& opt) {
  require(tau.size() == tau_size(cfg.N), "tau has the wrong length");
  require(static_cast<int>(sur.energy.size()) == cfg.K, "deterministic mode needs energy surrogates");
  ConicProblem p;
  const int Mh = cfg.M_h;
  const double ps = typical_power(cfg, ch, anchor);
  Layout L = add_factor_vars(p, cfg, tau, anchor, opt, ps);
  add_rate_rows(p, cfg, tau, sur, L, opt);

  // C2det: ||x0||^2 <= p0 with x0 = sqrt(p0) (xr + i xi).
  const double sp0 = std::sqrt(cfg.p0);
  L.x0 = p.add_var("x0", 2 * Mh, sp0);
  {
    auto& cb = p.add_cone(ConeType::SecondOrder, 2 * Mh + 1, "x0_power");
    cb.b(0) = 1.0;
    for (int i = 0; i < 2 * Mh; ++i) cb.A.emplace_back(1 + i, L.x0 + i, 1.0);
  }
  Block xb;
  xb.off = L.x0;
  for (int k = 0; k < cfg.K; ++k)
    for (int n = 0; n < cfg.N; ++n) {
      const EnergySurrogate& es = sur.energy[k][n];
      QuadRow row;
      // E_a + xi/2 ||a||^2 + Re{u^H (x - a)} - xi/2 ||x||^2 - Pc T - consumption >= 0
      row.c = (es.E_anchor + 0.5 * es.xi * es.anchor.squaredNorm() - es.u.dot(es.anchor).real() -
               cfg.Pc[k][n] * cfg.T) /
              ps;
      for (int i = 0; i < Mh; ++i) {
        row.add_lin(L.x0 + i, sp0 * es.u(i).real() / ps);
        row.add_lin(L.x0 + Mh + i, sp0 * es.u(i).imag() / ps);
      }
      if (es.xi > 0.0) row.add_gram(&xb, RMat::Identity(2 * Mh, 2 * Mh) * (0.5 * es.xi * cfg.p0 / ps));
      add_consumption(row, consumption_terms(L, cfg, tau, k, n), ps);
      emit(p, row, -1, name2("energy", k, n));
    }
  p.validate();
  return p;
}

Allocation decode_covariances(const ConicProblem& p, const ConicSolution& s, const Allocation& anchor) {
  Allocation a = anchor;
  const int K = static_cast<int>(a.X.size());
  for (int k = 0; k < K; ++k) {
    for (std::size_t n = 0; n < a.X[k].size(); ++n)
      if (const VarSlice* v = p.find(name2("X", k, static_cast<int>(n))))
        a.X[k][n] = v->scale * herm_decode(s.x.segment(v->start, v->len), static_cast<int>(a.X[k][n].rows()));
    for (std::size_t n = 0; n < a.Xt[k].size(); ++n)
      if (const VarSlice* v = p.find(name2("Xt", k, static_cast<int>(n))))
        a.Xt[k][n] = v->scale * herm_decode(s.x.segment(v->start, v->len), static_cast<int>(a.Xt[k][n].rows()));
  }
  if (const VarSlice* v = p.find("Q")) {
    const int Mh = static_cast<int>(a.Q.rows());
    CMat Q = v->scale * herm_decode(s.x.segment(v->start, v->len), Mh);
    // clip round-off outside the PSD cone and the trace budget
    Eigen::SelfAdjointEigenSolver<CMat> es(Q);
    const RVec d = es.eigenvalues().cwiseMax(0.0);
    Q = es.eigenvectors() * d.asDiagonal() * es.eigenvectors().adjoint();
    const double tr = Q.trace().real();
    if (tr > v->scale) Q *= v->scale / tr;
    a.Q = linalg::herm(Q);
  }
  if (const VarSlice* v = p.find("x0")) {
    const int Mh = v->len / 2;
    CVec x(Mh);
    for (int i = 0; i < Mh; ++i) x(i) = v->scale * cplx(s.x(v->start + i), s.x(v->start + Mh + i));
    const double nrm2 = x.squaredNorm();
    const double p0 = v->scale * v->scale;
    if (nrm2 > p0) x *= std::sqrt(p0 / nrm2);
    a.x0 = x;
  }
  return a;
}

ConicProblem build_time_lp(const NetworkConfig& cfg, const ChannelSet& ch, const Allocation& fixed,
                           const Grid2<EhLowerModel>& models, const SubproblemOptions& opt) {
  const int K = cfg.K, N = cfg.N;
  const int ts = tau_size(N);
  ConicProblem p;
  std::vector<int> col(ts, -1);
  for (int i = 0; i < ts; ++i) {
    const bool pinned = !opt.cooperative && i >= N && i < 2 * N - 1;
    if (!pinned) col[i] = p.add_var("tau_" + std::to_string(i), 1);
  }
  const bool maxmin = opt.objective == Objective::MaxMin;
  int beta = -1;
  if (maxmin) {
    beta = p.add_var("beta", 1);
    p.objective(beta) = 1.0;
  }
  {
    int active = 0;
    for (int c : col) active += c >= 0;
    auto& cb = p.add_cone(ConeType::Nonneg, active + 1, "time");
    int r = 0;
    for (int c : col)
      if (c >= 0) cb.A.emplace_back(r++, c, 1.0);
    cb.b(r) = cfg.T - cfg.tau1;
    for (int c : col)
      if (c >= 0) cb.A.emplace_back(r, c, -1.0);
  }
  // Energy: tau2 * E_unit - sum eta ||X||^2 tau - Pc T >= 0, rows normalized.
  for (int k = 0; k < K; ++k)
    for (int n = 0; n < N; ++n) {
      const double eu = energy_rate(fixed, ch, cfg, models, k, n);
      std::vector<std::pair<int, double>> coef;
      coef.emplace_back(col[0], eu);
      if (n < N - 1) {
        coef.emplace_back(col[1 + n], -cfg.eta[k][n] * fixed.X[k][n].squaredNorm());
      } else {
        for (int m = 0; m < N; ++m)
          if (col[N + m] >= 0) coef.emplace_back(col[N + m], -cfg.eta[k][n] * fixed.Xt[k][m].squaredNorm());
      }
      double sc = cfg.Pc[k][n] * cfg.T;
      for (const auto& [c, v] : coef) sc = std::max(sc, std::abs(v));
      if (!(sc > 0.0)) sc = 1.0;
      auto& cb = p.add_cone(ConeType::Nonneg, 1, name2("energy", k, n));
      cb.b(0) = -cfg.Pc[k][n] * cfg.T / sc;
      for (const auto& [c, v] : coef)
        if (v != 0.0) cb.A.emplace_back(0, c, v / sc);
    }
  // Rates: per-unit-time values at the fixed covariances.
  Grid2<CMat> S(K), St(K);
  for (int k = 0; k < K; ++k) {
    for (int n = 0; n < N - 1; ++n) S[k].push_back(fixed.S(k, n));
    for (int n = 0; n < N; ++n) St[k].push_back(fixed.St(k, n));
  }
  auto rate_row = [&](int lhs, const std::vector<std::pair<int, double>>& terms, const std::string& label) {
    auto& cb = p.add_cone(ConeType::Nonneg, 1, label);
    for (const auto& [c, v] : terms)
      if (c >= 0 && v != 0.0) cb.A.emplace_back(0, c, v);
    cb.A.emplace_back(0, lhs, -1.0);
  };
  for (int k = 0; k < K; ++k) {
    for (int n = 0; n < N - 1; ++n) {
      int lhs = beta;
      if (!maxmin) {
        lhs = p.add_var(name2("phi", k, n), 1);
        p.objective(lhs) = 1.0;
      }
      const double ru = rate_user_to_hap_unit(k, n, ch, cfg, S);
      rate_row(lhs, {{col[1 + n], rate_user_to_ch_unit(k, n, ch, cfg, S)}}, name2("uch", k, n));
      if (opt.cooperative) {
        rate_row(lhs, {{col[1 + n], ru}, {col[N + n], rate_ch_to_hap_unit(k, n, ch, cfg, St)}},
                 name2("relay", k, n));
      } else {
        rate_row(lhs, {{col[1 + n], ru}}, name2("relay", k, n));
      }
    }
    int lhs = beta;
    if (!maxmin) {
      lhs = p.add_var("t_" + std::to_string(k), 1);
      p.objective(lhs) = 1.0;
    }
    rate_row(lhs, {{col[2 * N - 1], rate_ch_to_hap_unit(k, N - 1, ch, cfg, St)}}, "ch_" + std::to_string(k));
  }
  p.validate();
  return p;
}

RVec decode_tau(const ConicProblem& p, const ConicSolution& s, const NetworkConfig& cfg) {
  const int ts = tau_size(cfg.N);
  RVec tau = RVec::Zero(ts);
  for (int i = 0; i < ts; ++i)
    if (const VarSlice* v = p.find("tau_" + std::to_string(i))) tau(i) = std::max(0.0, s.x(v->start));
  const double budget = cfg.T - cfg.tau1;
  const double sum = tau.sum();
  if (sum > budget) tau *= budget / sum;
  return tau;
}

double true_objective(const Allocation& a, const ChannelSet& ch, const NetworkConfig& cfg, Objective obj) {
  const auto r = throughput_report(a, ch, cfg);
  return obj == Objective::MaxMin ? r.min_throughput : r.sum_throughput;
}

ConicProblem build_joint_subproblem(const NetworkConfig& cfg, const ChannelSet& ch, const Allocation& anchor,
                                    const SurrogateSet& sur, const Grid2<EhLowerModel>& models,
                                    const SubproblemOptions& opt) {
  require(anchor.tau.size() == tau_size(cfg.N), "tau has the wrong length");
  require(static_cast<int>(models.size()) == cfg.K, "EH model grid has the wrong shape");
  require(!anchor.deterministic || static_cast<int>(sur.energy.size()) == cfg.K,
          "deterministic mode needs energy surrogates");
  return build_joint(cfg, ch, anchor, sur, models, opt);
}

Allocation decode_joint(const ConicProblem& p, const ConicSolution& s, const Allocation& anchor,
                        const NetworkConfig& cfg, double tau_eps) {
  Allocation a = anchor;
  a.tau = decode_tau(p, s, cfg);
  const int N = cfg.N;
  auto read = [&](const std::string& name, CMat& X, double t) {
    const VarSlice* v = p.find(name);
    if (!v) return;
    const CMat Y = v->scale * herm_decode(s.x.segment(v->start, v->len), static_cast<int>(X.rows()));
    X = t > tau_eps ? CMat(Y / t) : CMat::Zero(X.rows(), X.cols());
  };
  for (int k = 0; k < cfg.K; ++k) {
    for (int n = 0; n < N - 1; ++n) read(name2("Y", k, n), a.X[k][n], a.tau(1 + n));
    for (int n = 0; n < N; ++n) read(name2("Yt", k, n), a.Xt[k][n], a.tau(N + n));
  }
  const double t2 = std::max(a.tau(0), 1e-300);
  if (const VarSlice* v = p.find("Qt")) {
    CMat Q = v->scale * herm_decode(s.x.segment(v->start, v->len), cfg.M_h) / t2;
    Eigen::SelfAdjointEigenSolver<CMat> es(linalg::herm(Q));
    const RVec d = es.eigenvalues().cwiseMax(0.0);
    Q = es.eigenvectors() * d.asDiagonal() * es.eigenvectors().adjoint();
    const double tr = Q.trace().real();
    if (tr > cfg.p0) Q *= cfg.p0 / tr;
    a.Q = linalg::herm(Q);
  }
  if (const VarSlice* v = p.find("xt")) {
    const int Mh = v->len / 2;
    CVec x(Mh);
    for (int i = 0; i < Mh; ++i) x(i) = v->scale * cplx(s.x(v->start + i), s.x(v->start + Mh + i)) / t2;
    const double nrm2 = x.squaredNorm();
    if (nrm2 > cfg.p0) x *= std::sqrt(cfg.p0 / nrm2);
    a.x0 = x;
  }
  return a;
}

}  // namespace wpcn
