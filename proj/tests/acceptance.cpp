// Acceptance checks. One PASS/FAIL line per criterion; exit code 1 if any fails.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <map>
#include <random>
#include <string>

#include "CLI11.hpp"
#include "helpers.hpp"
#include "wpcn/experiment.hpp"
#include "wpcn/oracle.hpp"
#include "wpcn/surrogate.hpp"

using namespace wpcn;
using namespace wpcn::testutil;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

std::vector<CMat> perturb(std::mt19937_64& rng, const std::vector<CMat>& X, double rel) {
  std::vector<CMat> out = X;
  for (auto& x : out) {
    if (x.size() == 0) continue;
    x += random_cmat(rng, x.rows(), x.cols(), rel * x.norm() / std::sqrt(double(x.size())) + 1e-9);
  }
  return out;
}

bool monotone(const SolveTrace& tr, double outer_slack, double inner_slack) {
  for (std::size_t i = 1; i < tr.outer_objective.size(); ++i)
    if (tr.outer_objective[i] < tr.outer_objective[i - 1] - outer_slack) return false;
  for (const auto& in : tr.inner_objective)
    for (std::size_t i = 1; i < in.size(); ++i)
      if (in[i] < in[i - 1] - inner_slack) return false;
  return true;
}

// 1: touching and domination of every minorizer on random small networks
Outcome mm_suite() {
  std::mt19937_64 rng(101);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  double worst_touch = 0.0, worst_dom = std::numeric_limits<double>::infinity();
  int blocks = 0;
  for (int inst = 0; inst < 50; ++inst) {
    const auto cfg = small_config(rng, 3, 3, 4);
    const auto ch = sample_channels(cfg, 9000 + inst);
    const Allocation a = random_allocation(rng, cfg);

    for (RateFamily f : {RateFamily::UCH, RateFamily::UHAP, RateFamily::CHHAP}) {
      const int nmax = f == RateFamily::CHHAP ? cfg.N : cfg.N - 1;
      for (int k = 0; k < cfg.K; ++k)
        for (int n = 0; n < nmax; ++n) {
          const RateBlock rb = rate_block(f, k, n, ch, cfg);
          const auto X0 = block_factors(rb, a);
          const SurrogateCoeffs s = surrogate_coeffs(rb, X0);
          const double r0 = block_rate(rb, X0);
          worst_touch = std::max(worst_touch, std::abs(s.value(X0) - r0) / std::max(1.0, r0));
          for (int p = 0; p < 100; ++p) {
            const auto X = perturb(rng, X0, std::pow(10.0, -2.0 + 2.5 * u01(rng)));
            worst_dom = std::min(worst_dom, block_rate(rb, X) - s.value(X));
          }
          ++blocks;
        }
    }

    for (int k = 0; k < cfg.K; ++k)
      for (int n = 0; n < cfg.N; ++n) {
        const CMat B = energy_matrix(ch.H_hat[k][n], ch.var_h_delta[k][n]);
        const double tau2 = 0.1 + 0.8 * u01(rng);
        const double xi = xi_bound(B, cfg.p0, cfg.eh, tau2);
        CVec x0 = random_cmat(rng, cfg.M_h, 1, 1.0).col(0);
        x0 *= std::sqrt(cfg.p0 * u01(rng)) / x0.norm();
        const auto es = energy_surrogate_det(x0, B, tau2, cfg.eh, xi);
        const double e0 = det_energy(x0, B, tau2, cfg.eh);
        worst_touch = std::max(worst_touch, std::abs(es.value(x0) - e0) / e0);
        for (int p = 0; p < 100; ++p) {
          CVec x = random_cmat(rng, cfg.M_h, 1, 1.0).col(0);
          x *= std::sqrt(cfg.p0 * u01(rng)) / x.norm();
          worst_dom = std::min(worst_dom, (det_energy(x, B, tau2, cfg.eh) - es.value(x)) / e0);
        }
        ++blocks;

        // piecewise-linear harvest model refined at a random RF power
        const double pmax = cfg.p0 * Eigen::SelfAdjointEigenSolver<CMat>(B).eigenvalues().maxCoeff();
        EhLowerModel lm(cfg.eh, pmax);
        const double P0 = pmax * std::pow(10.0, -4.0 * u01(rng));
        lm.refine(P0);
        const double g0 = eh_curve(P0, cfg.eh);
        worst_touch = std::max(worst_touch, std::abs(lm(P0) - g0) / g0);
        for (int p = 0; p < 100; ++p) {
          const double P = pmax * std::pow(10.0, -6.0 * u01(rng));
          worst_dom = std::min(worst_dom, (eh_curve(P, cfg.eh) - lm(P)) / g0);
        }
        ++blocks;
      }
  }
  Outcome o;
  o.pass = worst_touch <= 1e-8 && worst_dom >= -1e-8;
  o.detail = std::to_string(blocks) + " minorizers, worst touch gap " + fmt("%.2e", worst_touch) +
             ", worst domination slack " + fmt("%.2e", worst_dom);
  return o;
}

// 2: LMMSE decoder rate vs decoder-free rate; log-det of the Schur form vs phase rate
Outcome lmmse_logdet() {
  std::mt19937_64 rng(202);
  double worst_lmmse = 0.0, worst_logdet = 0.0;
  for (int inst = 0; inst < 50; ++inst) {
    const auto cfg = small_config(rng, 3, 3, 4);
    const auto ch = sample_channels(cfg, 9100 + inst);
    const Allocation a = random_allocation(rng, cfg);
    const auto S = S_grid(a);
    const auto St = St_grid(a);
    for (int k = 0; k < cfg.K; ++k) {
      for (int n = 0; n < cfg.N - 1; ++n) {
        const double tau = a.tau3(n);
        const CMat& V = a.X[k][n];
        const CMat W = lmmse_decoder(k, n, ch, cfg, S, &V);
        const double r0 = rate_user_to_ch(k, n, tau, ch, cfg, S);
        const double r1 = rate_user_to_ch_with_decoder(k, n, tau, ch, cfg, S, V, W);
        worst_lmmse = std::max(worst_lmmse, std::abs(r1 - r0) / std::max(r0, 1e-300));

        const int m = cfg.M[k][n];
        const CMat D = build_D(k, n, ch, cfg, a.X);
        worst_logdet = std::max(worst_logdet, std::abs(tau * log2det_schur(D, selector(D.rows(), m)) - r0) / r0);
        const CMat Dt = build_D_tilde(k, n, ch, cfg, a.X);
        const double rh = rate_user_to_hap(k, n, tau, ch, cfg, S);
        worst_logdet = std::max(worst_logdet, std::abs(tau * log2det_schur(Dt, selector(Dt.rows(), m)) - rh) / rh);
      }
      for (int n = 0; n < cfg.N; ++n) {
        const double tau = a.tau4(cfg.N, n);
        const CMat Db = build_D_bar(k, n, ch, cfg, a.Xt);
        const double rc = rate_ch_to_hap(k, n, tau, ch, cfg, St);
        const int m = cfg.M[k][cfg.ch()];
        worst_logdet = std::max(worst_logdet, std::abs(tau * log2det_schur(Db, selector(Db.rows(), m)) - rc) / rc);
      }
    }
  }
  Outcome o;
  o.pass = worst_lmmse <= 1e-8 && worst_logdet <= 1e-8;
  o.detail = "50 instances, LMMSE rel gap " + fmt("%.2e", worst_lmmse) + ", tau*log2det(A^H D^-1 A) vs phase rate " +
             fmt("%.2e", worst_logdet) + " (positive sign)";
  return o;
}

// 3: ascent and convergence of max-min runs on the standard setup
Outcome ascent() {
  const auto cfg = default_config();
  int mono = 0, conv = 0, worst_outer = 0;
  for (int s = 1001; s <= 1020; ++s) {
    const auto r = run(cfg, sample_channels(cfg, s), {});
    mono += monotone(r.trace, 1e-6, 1e-6);
    conv += r.trace.converged && r.trace.outer_iterations <= 50;
    worst_outer = std::max(worst_outer, r.trace.outer_iterations);
  }
  Outcome o;
  o.pass = mono == 20 && conv == 20;
  o.detail = "seeds 1001-1020: monotone " + std::to_string(mono) + "/20, converged " + std::to_string(conv) +
             "/20, max outer " + std::to_string(worst_outer);
  return o;
}

// 4: single-antenna K=1, N=2 instances against the exhaustive grid
Outcome grid_oracle() {
  const auto cfg = scalar_config();
  double worst = 0.0;
  int used = 0, bad = 0;
  for (std::uint64_t seed = 500; used < 20 && seed < 600; ++seed) {
    const auto ch = sample_channels(cfg, seed);
    struct Case {
      Objective obj;
      bool coop;
    };
    bool feasible = true;
    std::vector<std::pair<double, double>> pairs;
    for (Case c : {Case{Objective::MaxMin, true}, Case{Objective::Sum, true}, Case{Objective::MaxMin, false}}) {
      const auto g = oracle::grid_search_scalar(cfg, ch, c.obj, c.coop, oracle::default_scalar_grid(32));
      if (!std::isfinite(g.value)) {
        feasible = false;
        break;
      }
      SolveOptions so;
      so.objective = c.obj;
      so.cooperative = c.coop;
      const auto r = run(cfg, ch, so);
      pairs.emplace_back(c.obj == Objective::MaxMin ? r.report.min_throughput : r.report.sum_throughput, g.value);
    }
    if (!feasible) continue;
    ++used;
    for (auto [v, g] : pairs) {
      const double rel = std::abs(v - g) / g;
      worst = std::max(worst, rel);
      bad += rel > 0.02;
    }
  }
  Outcome o;
  o.pass = used == 20 && bad == 0;
  o.detail = std::to_string(used) + " instances x {maxmin, sum, noncoop}: worst rel gap " + fmt("%.4f", worst) +
             ", outside 2%: " + std::to_string(bad);
  return o;
}

double mean_min(const ScenarioResult& r, double point, Variant v) {
  for (const auto& a : r.aggregate)
    if (a.point == point && a.variant == v) return a.mean_min_mbps;
  return std::numeric_limits<double>::quiet_NaN();
}

double mean_sum(const ScenarioResult& r, double point, Variant v) {
  for (const auto& a : r.aggregate)
    if (a.point == point && a.variant == v) return a.mean_sum_mbps;
  return std::numeric_limits<double>::quiet_NaN();
}

// 5: sweeps on the standard setup
Outcome figures(int trials, const std::string& out, int threads) {
  ScenarioSpec g;
  g.sweep = SweepKind::Gamma;
  g.values = default_sweep_values(SweepKind::Gamma);
  g.trials = trials;
  g.variants = {Variant::MaxMin, Variant::NonCoop};
  g.seed = 2024;
  g.threads = threads;
  if (!out.empty()) g.output_dir = out + "/gamma";
  const auto rg = run_scenario(g);
  // the sum objective is only needed at the operating point
  ScenarioSpec gs = g;
  gs.values = {0.5};
  gs.variants = {Variant::Sum};
  gs.output_dir = out.empty() ? "" : out + "/operating_point";
  const auto rs = run_scenario(gs);

  ScenarioSpec t = g;
  t.sweep = SweepKind::Theta;
  t.values = {10.0, 20.0, 40.0, 80.0};
  t.variants = {Variant::MaxMin};
  if (!out.empty()) t.output_dir = out + "/theta";
  const auto rt = run_scenario(t);

  int failed_trials = 0;
  for (const auto* r : {&rg, &rs, &rt})
    for (const auto& x : r->trials) failed_trials += !x.solved();

  bool a_ok = true;
  double best = -1.0, argmax = 0.0;
  for (double v : g.values) {
    const double co = mean_min(rg, v, Variant::MaxMin), nc = mean_min(rg, v, Variant::NonCoop);
    a_ok = a_ok && co > nc;
    if (co > best) best = co, argmax = v;
  }
  const bool b_ok = argmax >= 0.3 && argmax <= 0.7 && argmax > g.values.front() && argmax < g.values.back();

  // theta trend: 10 < 20 < 30 < 40 < 80
  std::vector<double> th{mean_min(rt, 10.0, Variant::MaxMin), mean_min(rt, 20.0, Variant::MaxMin),
                         mean_min(rg, 0.5, Variant::MaxMin), mean_min(rt, 40.0, Variant::MaxMin),
                         mean_min(rt, 80.0, Variant::MaxMin)};
  bool c_ok = true;
  for (std::size_t i = 1; i < th.size(); ++i) c_ok = c_ok && th[i] > th[i - 1];

  const double mm_min = mean_min(rg, 0.5, Variant::MaxMin), mm_sum = mean_sum(rg, 0.5, Variant::MaxMin);
  const double so_min = mean_min(rs, 0.5, Variant::Sum), so_sum = mean_sum(rs, 0.5, Variant::Sum);
  auto within = [](double v, double target) { return std::abs(v - target) <= 0.3 * target; };
  const bool op_ok = within(mm_min, 0.83) && within(mm_sum, 6.64) && within(so_min, 0.12) && within(so_sum, 9.11);
  const bool ord_ok = mm_min > so_min && so_sum > mm_sum;

  Outcome o;
  o.pass = a_ok && b_ok && c_ok && op_ok && ord_ok && failed_trials == 0;
  auto flag = [](bool b) { return b ? "ok" : "FAIL"; };
  o.detail = "trials=" + std::to_string(trials) + ": (a) coop>noncoop all gamma " + flag(a_ok) + "; (b) argmax gamma " +
             fmt("%.1f", argmax) + " " + flag(b_ok) + "; (c) theta trend " + flag(c_ok) +
             "; operating point maxmin min/sum " + fmt("%.3f", mm_min) + "/" + fmt("%.2f", mm_sum) + ", sum-opt " +
             fmt("%.3f", so_min) + "/" + fmt("%.2f", so_sum) + " Mbps vs 0.83/6.64, 0.12/9.11 +-30% " + flag(op_ok) +
             "; orderings " + flag(ord_ok) + "; unsolved trials " + std::to_string(failed_trials);
  o.detail += "\n#   gamma coop:";
  for (double v : g.values) o.detail += " " + fmt("%.3f", mean_min(rg, v, Variant::MaxMin));
  o.detail += "\n#   gamma noncoop:";
  for (double v : g.values) o.detail += " " + fmt("%.3f", mean_min(rg, v, Variant::NonCoop));
  o.detail += "\n#   theta 10,20,30,40,80:";
  for (double v : th) o.detail += " " + fmt("%.3f", v);
  return o;
}

// 6: curvature certificate and the deterministic-signal run
Outcome deterministic_signal() {
  std::mt19937_64 rng(606);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  double worst = std::numeric_limits<double>::infinity();
  int instances = 0;
  for (int inst = 0; inst < 20; ++inst) {
    const auto cfg = small_config(rng, 3, 3, 4);
    const auto ch = sample_channels(cfg, 9600 + inst);
    const int k = 0, n = cfg.N - 1;
    const CMat B = energy_matrix(ch.H_hat[k][n], ch.var_h_delta[k][n]);
    const double tau2 = 0.1 + 0.8 * u01(rng);
    const double xi = xi_bound(B, cfg.p0, cfg.eh, tau2);
    const RMat Bt = real_embedding(B);
    for (int p = 0; p < 100; ++p) {
      CVec x = random_cmat(rng, cfg.M_h, 1, 1.0).col(0);
      x *= std::sqrt(cfg.p0 * u01(rng)) / x.norm();
      RVec r(2 * cfg.M_h);
      r << x.real(), x.imag();
      const double P = (x.adjoint() * B * x)(0).real();
      const RVec grad = 2.0 * Bt * r;
      const RMat H = tau2 * (eh_curve_d2(P, cfg.eh) * grad * grad.transpose() + 2.0 * eh_curve_d1(P, cfg.eh) * Bt) +
                     xi * RMat::Identity(2 * cfg.M_h, 2 * cfg.M_h);
      const double lmin = Eigen::SelfAdjointEigenSolver<RMat>(H).eigenvalues().minCoeff();
      worst = std::min(worst, lmin / xi);
    }
    ++instances;
  }

  const auto cfg = default_config();
  int mono = 0, feas = 0;
  for (int s = 1003; s <= 1005; ++s) {
    const auto ch = sample_channels(cfg, s);
    SolveOptions so;
    so.signal = SignalMode::DeterministicX0;
    const auto r = run(cfg, ch, so);
    mono += monotone(r.trace, 1e-6, 1e-6);
    Allocation q = r.allocation;
    q.deterministic = false;
    q.Q = r.allocation.x0 * r.allocation.x0.adjoint();
    feas += constraint_slack(q, ch, cfg).worst() >= -1e-6 * cfg.Pc[0][0];
  }
  Outcome o;
  o.pass = worst >= -1e-8 && mono == 3 && feas == 3;
  o.detail = std::to_string(instances) + " instances x 100 points: min lambda_min/xi " + fmt("%.3e", worst) +
             "; deterministic runs monotone " + std::to_string(mono) + "/3, rank-one Q feasible " +
             std::to_string(feas) + "/3";
  return o;
}

// 7: loss of the non-robust design
Outcome robustness(int draws, const std::string& out, int threads) {
  ScenarioSpec s;
  s.base.K = 2;
  fill_uniform(s.base, 2, s.base.Pc[0][0], 1.0);
  s.base.geometry = build_geometry(s.base, 0.5, 30.0);
  s.sweep = SweepKind::Rho;
  s.values = {0.5, 0.7, 0.9, 0.99};
  s.trials = draws;
  s.variants = {Variant::MaxMin, Variant::NonRobust};
  s.seed = 77;
  s.threads = threads;
  if (!out.empty()) s.output_dir = out + "/rho";
  const auto r = run_scenario(s);
  bool ok = true;
  std::string per;
  for (const auto& a : r.aggregate) {
    if (a.variant != Variant::NonRobust) continue;
    // paired sums; an infeasible non-robust draw delivers 0
    std::map<int, double> robust;
    for (const auto& t : r.trials)
      if (t.point == a.point && t.variant == Variant::MaxMin && t.solved()) robust[t.trial] = t.min_mbps;
    double sum_r = 0.0, sum_nr = 0.0;
    for (const auto& t : r.trials) {
      if (t.point != a.point || t.variant != Variant::NonRobust) continue;
      if (!robust.count(t.trial) || !(t.solved() || t.status == "infeasible")) continue;
      sum_r += robust[t.trial];
      sum_nr += t.solved() ? t.min_mbps : 0.0;
    }
    const double chi_of_means = sum_r > 0.0 ? 1.0 - sum_nr / sum_r : 1.0;
    per += " rho=" + fmt("%.2f", a.point) + ": max " + fmt("%.4f", a.max_loss) + " mean " + fmt("%.4f", a.mean_loss) +
           " of-means " + fmt("%.4f", chi_of_means) + " pairs " + std::to_string(a.loss_pairs) + ";";
    if (a.loss_pairs < draws / 2) ok = false;
    if (a.point <= 0.9 && !(a.max_loss >= 0.0)) ok = false;
    if (a.point == 0.99 && !(chi_of_means <= 0.02)) ok = false;
  }
  Outcome o;
  o.pass = ok;
  o.detail = std::to_string(draws) + " draws, K=2, M=2, loss chi:" + per;
  return o;
}

// 8: spread over initializations on one draw
Outcome init_sensitivity() {
  const auto cfg = default_config();
  const auto ch = sample_channels(cfg, 1001);
  std::string detail;
  bool ok = true;
  for (Objective obj : {Objective::MaxMin, Objective::Sum}) {
    std::vector<double> v;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      SolveOptions so;
      so.objective = obj;
      so.seed = seed;
      const auto r = run(cfg, ch, so);
      v.push_back(obj == Objective::MaxMin ? r.report.min_mbps(cfg) : r.report.sum_mbps(cfg));
    }
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= v.size();
    double spread = 0.0;
    for (double x : v) spread = std::max(spread, std::abs(x - mean) / mean);
    ok = ok && spread <= 0.05;
    detail += std::string(obj == Objective::MaxMin ? "maxmin" : "sum") + " mean " + fmt("%.4f", mean) +
              " Mbps, max rel deviation " + fmt("%.4f", spread) + "; ";
  }
  return {ok, "10 initializations: " + detail};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance checks"};
  int trials = 20, draws = 100, threads = 0;
  std::string out, only;
  app.add_option("--trials", trials, "draws per sweep point for the figure checks");
  app.add_option("--draws", draws, "draws per rho for the robustness check");
  app.add_option("--threads", threads, "worker threads for the sweeps (0: all cores)");
  app.add_option("--out", out, "write sweep CSVs below this directory");
  app.add_option("--only", only, "comma-separated criterion numbers to run");
  CLI11_PARSE(app, argc, argv);

  const std::vector<std::pair<std::string, std::function<Outcome()>>> checks = {
      {"1 mm-correctness", mm_suite},
      {"2 lmmse-logdet-identity", lmmse_logdet},
      {"3 ascent-convergence", ascent},
      {"4 grid-oracle", grid_oracle},
      {"5 figure-trends", [&] { return figures(trials, out, threads); }},
      {"6 deterministic-signal", deterministic_signal},
      {"7 robust-vs-nonrobust", [&] { return robustness(draws, out, threads); }},
      {"8 init-sensitivity", init_sensitivity},
  };
  int failed = 0;
  for (std::size_t i = 0; i < checks.size(); ++i) {
    if (!only.empty() && ("," + only + ",").find("," + std::to_string(i + 1) + ",") == std::string::npos) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = checks[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    failed += !o.pass;
    std::printf("%s %s [%.0fs] %s\n", o.pass ? "PASS" : "FAIL", checks[i].first.c_str(), sec, o.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
