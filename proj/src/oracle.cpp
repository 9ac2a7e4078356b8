#include "wpcn/oracle.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <random>
#include <thread>

namespace wpcn::oracle {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

struct Scalars {
  double hm = 0, hc = 0, g = 0;     // |h|^2 member, |h|^2 CH, |g|^2 member -> CH
  double vhm = 0, vhc = 0, vg = 0;  // error variances
  double bm = 0, bc = 0;            // RF power per watt of HAP power
};

Scalars scalars_of(const NetworkConfig& cfg, const ChannelSet& ch) {
  require(cfg.K == 1 && cfg.N == 2, "scalar oracle: needs K=1, N=2");
  require(cfg.M_h == 1 && cfg.M[0][0] == 1 && cfg.M[0][1] == 1, "scalar oracle: needs single antennas");
  Scalars s;
  s.hm = std::norm(ch.H_hat[0][0](0, 0));
  s.hc = std::norm(ch.H_hat[0][1](0, 0));
  s.g = std::norm(ch.G_hat[0][0][0](0, 0));
  s.vhm = ch.var_h_delta[0][0];
  s.vhc = ch.var_h_delta[0][1];
  s.vg = ch.var_g_delta[0][0][0];
  s.bm = s.hm + s.vhm;
  s.bc = s.hc + s.vhc;
  return s;
}

double link(double tau, double gain, double var, double noise, double p) {
  if (tau <= 0.0 || p <= 0.0) return 0.0;
  return tau * std::log2(1.0 + gain * p / (noise + var * p));
}

struct Powers {
  double t41 = 0, pm = 0, p40 = 0, p41 = 0;
};

double eval(const NetworkConfig& cfg, const Scalars& s, Objective obj, bool coop, double t2, double t3, double t40,
            double split, double q, Powers* out = nullptr) {
  const double budget = cfg.T - cfg.tau1;
  if (!coop) {
    t40 = 0.0;
    split = 0.0;
  }
  const double t41 = budget - t2 - t3 - t40;
  if (t2 < 0 || t3 < 0 || t40 < 0 || t41 < -1e-12) return kNegInf;
  const double em = t2 * eh_power(s.bm * q, cfg.eh) - cfg.Pc[0][0] * cfg.T;
  const double ec = t2 * eh_power(s.bc * q, cfg.eh) - cfg.Pc[0][1] * cfg.T;
  if (em < 0 || ec < 0) return kNegInf;

  const double pm = t3 > 0 ? em / (cfg.eta[0][0] * t3) : 0.0;
  const double etx = ec / cfg.eta[0][1];
  const double p40 = t40 > 0 ? split * etx / t40 : 0.0;
  const double p41 = t41 > 0 ? (1.0 - split) * etx / t41 : 0.0;
  if (out) *out = {std::max(t41, 0.0), pm, p40, p41};

  const double uch = link(t3, s.g, s.vg, cfg.noise_uch, pm);
  const double uhap = link(t3, s.hm, s.vhm, cfg.noise_uhap, pm);
  const double relay = link(t40, s.hc, s.vhc, cfg.noise_chhap, p40);
  const double own = link(std::max(t41, 0.0), s.hc, s.vhc, cfg.noise_chhap, p41);
  const double member = std::min(uch, uhap + relay);
  return obj == Objective::MaxMin ? std::min(member, own) : member + own;
}

// Candidate HAP powers: the budget and the EH peaks below it.
std::vector<double> power_candidates(const NetworkConfig& cfg, const Scalars& s) {
  std::vector<double> out{cfg.p0};
  if (cfg.eh.mode == EhMode::Linear) return out;
  const auto peak = golden_section_max([&](double l) { return eh_power(std::exp(l), cfg.eh); }, std::log(1e-9),
                                       std::log(10.0), 1e-12);
  const double pstar = std::exp(peak.x);
  std::vector<double> peaks;
  for (double b : {s.bm, s.bc})
    if (b > 0 && pstar / b < cfg.p0) peaks.push_back(pstar / b);
  out.insert(out.end(), peaks.begin(), peaks.end());
  // between the two peaks one user gains what the other loses
  const double lo = s.bm > 0 && s.bc > 0 ? std::min(pstar / s.bm, pstar / s.bc) : cfg.p0;
  const double hi = std::min(cfg.p0, s.bm > 0 && s.bc > 0 ? std::max(pstar / s.bm, pstar / s.bc) : cfg.p0);
  for (int i = 1; hi > lo && i < 16; ++i) out.push_back(lo * std::pow(hi / lo, i / 16.0));
  return out;
}

struct Best {
  double value = kNegInf;
  long long index = -1;
  std::array<double, 5> x{};
};

std::vector<double> axis_values(const GridAxis& a) {
  std::vector<double> v(a.points);
  for (int i = 0; i < a.points; ++i) v[i] = a.points == 1 ? a.lo : a.lo + (a.hi - a.lo) * i / (a.points - 1);
  return v;
}

// Scans the product of the four axes; ties keep the lowest flat index.
Best scan(const NetworkConfig& cfg, const Scalars& s, Objective obj, bool coop, const std::vector<GridAxis>& axes,
          const std::vector<double>& qs) {
  std::array<std::vector<double>, 4> v;
  for (int d = 0; d < 4; ++d) v[d] = axis_values(axes[d]);
  const long long n1 = v[1].size(), n2 = v[2].size(), n3 = v[3].size();

  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const long long chunks = std::min<long long>(hw, static_cast<long long>(v[0].size()));
  std::vector<Best> part(chunks);
  auto work = [&](long long c) {
    Best b;
    for (long long i0 = c; i0 < static_cast<long long>(v[0].size()); i0 += chunks) {
      for (long long i1 = 0; i1 < n1; ++i1) {
        if (v[0][i0] + v[1][i1] > cfg.T - cfg.tau1 + 1e-12) break;
        for (long long i2 = 0; i2 < n2; ++i2)
          for (long long i3 = 0; i3 < n3; ++i3)
            for (double q : qs) {
              const double f = eval(cfg, s, obj, coop, v[0][i0], v[1][i1], v[2][i2], v[3][i3], q);
              const long long idx = ((i0 * n1 + i1) * n2 + i2) * n3 + i3;
              if (f > b.value) {
                b.value = f;
                b.index = idx;
                b.x = {v[0][i0], v[1][i1], v[2][i2], v[3][i3], q};
              }
            }
      }
    }
    part[c] = b;
  };
  if (chunks == 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    for (long long c = 0; c < chunks; ++c) pool.emplace_back(work, c);
    for (auto& t : pool) t.join();
  }
  Best best;
  for (const auto& b : part)
    if (b.value > best.value || (b.value == best.value && b.index >= 0 && b.index < best.index)) best = b;
  return best;
}

}  // namespace

long long GridSpec::coarse_points() const {
  long long n = 1;
  for (const auto& a : axes) n *= a.points;
  return n;
}

long long GridSpec::total_points() const {
  long long r = 1;
  for (std::size_t i = 0; i < axes.size(); ++i) r *= refine_points > 0 ? refine_points : 0;
  return coarse_points() + (refine_points > 0 ? r : 0);
}

void GridSpec::validate() const {
  require(axes.size() == 4, "grid: needs 4 axes");
  for (const auto& a : axes) {
    require(a.points >= 1, "grid: axis needs at least one point");
    require(a.hi >= a.lo, "grid: axis range reversed");
  }
  require(refine_points >= 0, "grid: refine_points must be >= 0");
  require(total_points() <= budget, "grid: point count exceeds the budget");
}

GridSpec default_scalar_grid(int points) {
  GridSpec g;
  g.axes = {{0, 1, points}, {0, 1, points}, {0, 1, points}, {0, 1, std::max(2, points / 2)}};
  return g;
}

double eh_power(double P, const EhParams& eh) {
  if (eh.mode == EhMode::Linear) return P > 0 ? eh.zeta * P : 0.0;
  const double l = std::log(P > eh.p_floor ? P : eh.p_floor);
  return std::exp((eh.a * l + eh.b) * l + eh.c);
}

double scalar_objective(const NetworkConfig& cfg, const ChannelSet& ch, Objective obj, bool cooperative,
                        double tau2, double tau3, double tau40, double split, double q) {
  return eval(cfg, scalars_of(cfg, ch), obj, cooperative, tau2, tau3, tau40, split, q);
}

GridResult grid_search_scalar(const NetworkConfig& cfg, const ChannelSet& ch, Objective obj, bool cooperative,
                              const GridSpec& grid) {
  require(grid.axes.size() == 4, "grid: needs 4 axes");
  GridSpec g = grid;
  const double budget = cfg.T - cfg.tau1;
  for (auto& a : g.axes) {
    a.lo = std::clamp(a.lo, 0.0, 1.0);
    a.hi = std::clamp(a.hi, 0.0, 1.0);
  }
  if (!cooperative) g.axes[2] = g.axes[3] = {0.0, 0.0, 1};
  g.validate();
  // time axes are fractions of the budget
  for (int d = 0; d < 3; ++d) {
    g.axes[d].lo *= budget;
    g.axes[d].hi *= budget;
  }

  const Scalars s = scalars_of(cfg, ch);
  const auto qs = power_candidates(cfg, s);
  Best best = scan(cfg, s, obj, cooperative, g.axes, qs);
  GridResult r;
  r.evaluations = g.coarse_points() * static_cast<long long>(qs.size());

  if (g.refine_points > 0 && best.index >= 0) {
    std::vector<GridAxis> fine(4);
    for (int d = 0; d < 4; ++d) {
      const auto& a = g.axes[d];
      const double cell = a.points > 1 ? (a.hi - a.lo) / (a.points - 1) : 0.0;
      fine[d] = {std::max(a.lo, best.x[d] - cell), std::min(a.hi, best.x[d] + cell), cell > 0 ? g.refine_points : 1};
    }
    const Best b2 = scan(cfg, s, obj, cooperative, fine, qs);
    if (b2.value > best.value) best = b2;
    long long n = 1;
    for (const auto& a : fine) n *= a.points;
    r.evaluations += n * static_cast<long long>(qs.size());
  }

  r.value = best.index >= 0 ? best.value : kNegInf;
  r.point = Eigen::Map<const RVec>(best.x.data(), 5);
  if (best.index < 0 || !std::isfinite(best.value)) {
    r.physics_value = r.value;
    return r;
  }

  Powers pw;
  const auto& x = best.x;
  eval(cfg, s, obj, cooperative, x[0], x[1], x[2], x[3], x[4], &pw);
  Allocation& a = r.allocation;
  a = empty_allocation(cfg);
  a.cooperative = cooperative;
  a.tau << x[0], x[1], cooperative ? x[2] : 0.0, pw.t41;
  a.Q = CMat::Constant(1, 1, x[4]);
  a.X[0][0] = CMat::Constant(1, 1, std::sqrt(pw.pm));
  a.Xt[0][0] = CMat::Constant(1, 1, std::sqrt(pw.p40));
  a.Xt[0][1] = CMat::Constant(1, 1, std::sqrt(pw.p41));
  const auto rep = throughput_report(a, ch, cfg);
  r.physics_value = obj == Objective::MaxMin ? rep.min_throughput : rep.sum_throughput;
  return r;
}

GoldenResult golden_section_max(const std::function<double(double)>& f, double lo, double hi, double tol) {
  require(hi >= lo, "golden section: empty interval");
  const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo, b = hi;
  double c = b - invphi * (b - a), d = a + invphi * (b - a);
  double fc = f(c), fd = f(d);
  GoldenResult r;
  while (b - a > tol && r.iterations < 500) {
    if (fc >= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - invphi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + invphi * (b - a);
      fd = f(d);
    }
    ++r.iterations;
  }
  r.x = 0.5 * (a + b);
  r.value = f(r.x);
  return r;
}

RVec finite_diff_gradient(const ScalarFn& f, const RVec& x, double step) {
  RVec g(x.size());
  RVec y = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    y(i) = x(i) + step;
    const double fp = f(y);
    y(i) = x(i) - step;
    const double fm = f(y);
    y(i) = x(i);
    if (!std::isfinite(fp) || !std::isfinite(fm)) throw NumericalFailure("finite difference: non-finite value");
    g(i) = (fp - fm) / (2.0 * step);
  }
  return g;
}

RMat finite_diff_hessian(const ScalarFn& f, const RVec& x, double step) {
  const Eigen::Index n = x.size();
  RMat H(n, n);
  RVec y = x;
  auto at = [&](Eigen::Index i, double di, Eigen::Index j, double dj) {
    y = x;
    y(i) += di;
    y(j) += dj;
    const double v = f(y);
    if (!std::isfinite(v)) throw NumericalFailure("finite difference: non-finite value");
    return v;
  };
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i; j < n; ++j) {
      const double v = (at(i, step, j, step) - at(i, step, j, -step) - at(i, -step, j, step) +
                        at(i, -step, j, -step)) /
                       (4.0 * step * step);
      H(i, j) = H(j, i) = v;
    }
  return H;
}

RVec stack_complex(const CVec& x) {
  RVec r(2 * x.size());
  r << x.real(), x.imag();
  return r;
}

CVec unstack_complex(const RVec& r) {
  require(r.size() % 2 == 0, "unstack_complex: odd length");
  const Eigen::Index n = r.size() / 2;
  CVec x(n);
  for (Eigen::Index i = 0; i < n; ++i) x(i) = cplx(r(i), r(n + i));
  return x;
}

CMat mc_decoder_mse(const std::vector<CMat>& G, const std::vector<CMat>& V, const std::vector<double>& var_delta,
                    double noise, const CMat& W, int draws, std::uint64_t seed) {
  require(!G.empty() && G.size() == V.size() && G.size() == var_delta.size(), "mc_decoder_mse: size mismatch");
  require(draws > 0, "mc_decoder_mse: draws must be positive");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, 1.0);
  auto cn = [&](double var) {
    const double sd = std::sqrt(var / 2.0);
    return cplx(sd * nd(rng), sd * nd(rng));
  };
  const Eigen::Index rows = G[0].rows();
  const Eigen::Index d0 = V[0].cols();
  CMat acc = CMat::Zero(d0, d0);
  for (int t = 0; t < draws; ++t) {
    CVec y(rows);
    for (Eigen::Index i = 0; i < rows; ++i) y(i) = cn(noise);
    CVec s0;
    for (std::size_t j = 0; j < G.size(); ++j) {
      CMat Gt = G[j];
      for (Eigen::Index a = 0; a < Gt.rows(); ++a)
        for (Eigen::Index b = 0; b < Gt.cols(); ++b) Gt(a, b) += cn(var_delta[j]);
      CVec sj(V[j].cols());
      for (Eigen::Index i = 0; i < sj.size(); ++i) sj(i) = cn(1.0);
      y += Gt * V[j] * sj;
      if (j == 0) s0 = sj;
    }
    const CVec e = s0 - W * y;
    acc += e * e.adjoint();
  }
  return acc / static_cast<double>(draws);
}

double mc_second_moment(double var, int draws, std::uint64_t seed) {
  require(draws > 0, "mc_second_moment: draws must be positive");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, std::sqrt(var / 2.0));
  double acc = 0.0;
  for (int t = 0; t < draws; ++t) {
    const double re = nd(rng), im = nd(rng);
    acc += re * re + im * im;
  }
  return acc / draws;
}

double sampled_domination(const std::function<double(int)>& f_true, const std::function<double(int)>& f_sur,
                          int samples) {
  double worst = std::numeric_limits<double>::infinity();
  for (int i = 0; i < samples; ++i) worst = std::min(worst, f_true(i) - f_sur(i));
  return worst;
}

}  // namespace wpcn::oracle
