#include "wpcn/optimizer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <random>

namespace wpcn {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::vector<int> active_slots(const NetworkConfig& cfg, bool cooperative) {
  std::vector<int> s;
  for (int i = 0; i < tau_size(cfg.N); ++i) {
    const bool pinned = !cooperative && i >= cfg.N && i < 2 * cfg.N - 1;
    if (!pinned) s.push_back(i);
  }
  return s;
}

CMat random_hermitian_direction(std::mt19937_64& rng, int m) {
  std::normal_distribution<double> nd;
  CMat A(m, m);
  for (int j = 0; j < m; ++j)
    for (int i = 0; i < m; ++i) A(i, j) = cplx(nd(rng), nd(rng));
  CMat H = 0.5 * (A + A.adjoint()) + 2.0 * CMat::Identity(m, m);
  return H * (std::sqrt(double(m)) / H.norm());
}

bool solved(const ConicSolution& s, double tol) {
  if (s.status == SolveStatus::Optimal) return true;
  // A stalled iterate (typically a slot driven to zero, no strict complementarity)
  // is still used: the caller repairs energy and rejects any loss in the true objective.
  const double loose = std::max(1e3 * tol, 1e-3);
  return s.status == SolveStatus::NumericalLimit && s.primal_residual <= loose &&
         s.dual_residual <= loose && s.x.size() > 0;
}

// from + alpha * (to - from), pulled back into the tau, power and PSD sets.
Allocation extrapolate(const Allocation& from, const Allocation& to, double alpha, const NetworkConfig& cfg) {
  Allocation e = to;
  e.tau = (from.tau + alpha * (to.tau - from.tau)).cwiseMax(0.0);
  const double budget = cfg.T - cfg.tau1;
  if (e.tau.sum() > budget) e.tau *= budget / e.tau.sum();
  for (std::size_t k = 0; k < e.X.size(); ++k) {
    for (std::size_t n = 0; n < e.X[k].size(); ++n) e.X[k][n] = from.X[k][n] + alpha * (to.X[k][n] - from.X[k][n]);
    for (std::size_t n = 0; n < e.Xt[k].size(); ++n)
      e.Xt[k][n] = from.Xt[k][n] + alpha * (to.Xt[k][n] - from.Xt[k][n]);
  }
  if (to.deterministic) {
    e.x0 = from.x0 + alpha * (to.x0 - from.x0);
    if (e.x0.squaredNorm() > cfg.p0) e.x0 *= std::sqrt(cfg.p0 / e.x0.squaredNorm());
  } else {
    CMat Q = from.Q + alpha * (to.Q - from.Q);
    Eigen::SelfAdjointEigenSolver<CMat> es(CMat(0.5 * (Q + Q.adjoint())));
    const RVec d = es.eigenvalues().cwiseMax(0.0);
    Q = es.eigenvectors() * d.asDiagonal() * es.eigenvectors().adjoint();
    if (Q.trace().real() > cfg.p0) Q *= cfg.p0 / Q.trace().real();
    e.Q = 0.5 * (Q + Q.adjoint());
  }
  return e;
}

// Lengthens the charging slot, at the expense of the longest other slot, until
// every user can at least cover its consumption at the current factors.
void repair_charging(Allocation& a, const ChannelSet& ch, const NetworkConfig& cfg,
                     const Grid2<EhLowerModel>& models) {
  double need = a.tau2();
  for (int k = 0; k < cfg.K; ++k)
    for (int n = 0; n < cfg.N; ++n) {
      const double rate = energy_rate(a, ch, cfg, models, k, n);
      if (rate > 0.0) need = std::max(need, user_consumption(a, cfg, k, n) / rate * (1.0 + 1e-9));
    }
  const double extra = need - a.tau2();
  if (extra <= 0.0) return;
  int j = 1;
  for (int i = 2; i < a.tau.size(); ++i)
    if (a.tau(i) > a.tau(j)) j = i;
  if (a.tau(j) <= extra) return;
  a.tau(0) += extra;
  a.tau(j) -= extra;
}

}  // namespace

void SolveOptions::validate() const {
  require(outer_tol > 0.0 && inner_tol > 0.0, "tolerances must be positive");
  require(max_outer >= 1 && max_inner >= 1, "iteration caps must be >= 1");
  require(solver_tol > 0.0, "solver tolerance must be positive");
  require(eh_nodes >= 2, "EH model needs at least two nodes");
}

void SolveTrace::write_csv(std::ostream& os) const {
  os << "outer,inner,stage,objective,seconds,status\n";
  os << std::setprecision(12);
  for (const auto& e : entries)
    os << e.outer << ',' << e.inner << ',' << e.stage << ',' << e.objective << ',' << e.seconds << ','
       << e.status << '\n';
}

bool enforce_energy(Allocation& a, const ChannelSet& ch, const NetworkConfig& cfg,
                    const Grid2<EhLowerModel>& models) {
  const int N = cfg.N;
  bool ok = true;
  for (int k = 0; k < cfg.K; ++k)
    for (int n = 0; n < N; ++n) {
      const double E = a.tau2() * std::max(0.0, energy_rate(a, ch, cfg, models, k, n));
      const double cons = user_consumption(a, cfg, k, n);
      if (cons <= E) continue;
      const double tx = cons - cfg.Pc[k][n] * cfg.T;
      const double allowed = E - cfg.Pc[k][n] * cfg.T;
      if (!(allowed >= -1e-7 * cfg.Pc[k][n] * cfg.T)) ok = false;  // solver-tolerance shortfall is accepted
      const double f = (allowed > 0.0 && tx > 0.0) ? std::sqrt(allowed / tx * (1.0 - 1e-12)) : 0.0;
      if (n < N - 1) {
        a.X[k][n] *= f;
      } else {
        for (auto& X : a.Xt[k]) X *= f;
      }
    }
  return ok;
}

Allocation initialize(const NetworkConfig& cfg, const ChannelSet& ch, std::uint64_t seed,
                      const SolveOptions& opt) {
  cfg.validate();
  check_dimensions(cfg, ch);
  const int K = cfg.K, N = cfg.N;
  const bool det = opt.signal == SignalMode::DeterministicX0;
  const auto slots = active_slots(cfg, opt.cooperative);
  const double budget = cfg.T - cfg.tau1;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u01(0.0, 1.0);

  Allocation a = empty_allocation(cfg);
  a.deterministic = det;
  a.cooperative = opt.cooperative;
  if (det) {
    a.x0 = CVec::Constant(cfg.M_h, std::sqrt(cfg.p0 / cfg.M_h));
    if (seed != 0) {
      CVec v(cfg.M_h);
      std::normal_distribution<double> nd;
      for (int i = 0; i < cfg.M_h; ++i) v(i) = cplx(nd(rng), nd(rng));
      a.x0 = 0.5 * a.x0 + 0.5 * std::sqrt(cfg.p0) * v / v.norm();
      a.x0 *= std::sqrt(cfg.p0) / a.x0.norm();
    }
  } else {
    a.Q = CMat::Identity(cfg.M_h, cfg.M_h) * (cfg.p0 / cfg.M_h);
    if (seed != 0) {
      CMat A = random_hermitian_direction(rng, cfg.M_h);
      CMat R = A * A.adjoint();
      R *= cfg.p0 / R.trace().real();
      a.Q = 0.5 * a.Q + 0.5 * R;
    }
  }

  Grid2<EhLowerModel> models = make_eh_models(cfg, ch, opt.eh_nodes);
  refine_eh_models(models, a, ch, cfg);

  // random relative weights of the non-charging slots
  std::vector<double> wts(slots.size(), 1.0);
  if (seed != 0)
    for (auto& w : wts) w = 0.5 + u01(rng);
  const double jitter = seed != 0 ? 0.8 + 0.4 * u01(rng) : 1.0;

  const std::vector<double> fracs = {1.0 / slots.size(), 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.95};
  for (double f0 : fracs) {
    const double f = std::min(0.97, f0 * jitter);
    a.tau.setZero();
    a.tau(0) = f * budget;
    double wsum = 0.0;
    for (std::size_t i = 1; i < slots.size(); ++i) wsum += wts[i];
    for (std::size_t i = 1; i < slots.size(); ++i) a.tau(slots[i]) = (1.0 - f) * budget * wts[i] / wsum;

    bool ok = true;
    for (int k = 0; k < K && ok; ++k)
      for (int n = 0; n < N && ok; ++n) {
        const double E = a.tau2() * std::max(0.0, energy_rate(a, ch, cfg, models, k, n));
        const double avail = 0.99 * E - cfg.Pc[k][n] * cfg.T;
        if (!(avail >= 0.0)) {
          ok = false;
          break;
        }
        const double eta = cfg.eta[k][n];
        if (n < N - 1) {
          const int m = cfg.M[k][n];
          const CMat D = seed != 0 ? random_hermitian_direction(rng, m) : CMat::Identity(m, m);
          a.X[k][n] = std::sqrt(avail / (eta * a.tau3(n) * m)) * D;
        } else {
          const int m = cfg.M[k][cfg.ch()];
          double t4 = 0.0;
          for (int q = 0; q < N; ++q) t4 += a.tau4(N, q);
          for (int q = 0; q < N; ++q) {
            const CMat D = seed != 0 ? random_hermitian_direction(rng, m) : CMat::Identity(m, m);
            a.Xt[k][q] = a.tau4(N, q) > 0.0 ? CMat(std::sqrt(avail / (eta * t4 * m)) * D) : CMat::Zero(m, m);
          }
        }
      }
    if (ok) {
      enforce_energy(a, ch, cfg, models);
      return a;
    }
  }
  // Even charging for the whole block with the full budget cannot cover the circuit power.
  throw InfeasibleInstance("no initialization satisfies the energy constraints");
}

RunResult run(const NetworkConfig& cfg, const ChannelSet& ch, const SolveOptions& opt) {
  opt.validate();
  const auto t_start = Clock::now();
  RunResult res;
  SolveTrace& tr = res.trace;
  const bool det = opt.signal == SignalMode::DeterministicX0;
  SubproblemOptions sopt;
  sopt.objective = opt.objective;
  sopt.cooperative = opt.cooperative;
  sopt.joint = opt.joint_step;

  Allocation a = initialize(cfg, ch, opt.seed, opt);
  Grid2<EhLowerModel> models = make_eh_models(cfg, ch, opt.eh_nodes);
  refine_eh_models(models, a, ch, cfg);
  enforce_energy(a, ch, cfg, models);

  double g = true_objective(a, ch, cfg, opt.objective);
  tr.outer_objective.push_back(g);
  tr.entries.push_back({0, 0, "init", g, seconds_since(t_start), "ok"});

  for (int l = 1; l <= opt.max_outer; ++l) {
    tr.outer_iterations = l;
    tr.inner_objective.emplace_back();
    double cur = g;
    // Step 1: MM over the covariances (tau too in the joint form).
    for (int kappa = 1; kappa <= opt.max_inner; ++kappa) {
      const auto t0 = Clock::now();
      const SurrogateSet sur = compute_surrogates(cfg, ch, a, sopt);
      const ConicProblem prob = opt.joint_step ? build_joint_subproblem(cfg, ch, a, sur, models, sopt)
                                : det ? build_covariance_subproblem_det(cfg, ch, a.tau, a, sur, sopt)
                                      : build_covariance_subproblem(cfg, ch, a.tau, a, sur, models, sopt);
      const ConicSolution sol = solve(prob, opt.solver_tol);
      if (!solved(sol, opt.solver_tol)) {
        tr.entries.push_back({l, kappa, "covariance", cur, seconds_since(t0), to_string(sol.status)});
        break;
      }
      Allocation cand = opt.joint_step ? decode_joint(prob, sol, a, cfg) : decode_covariances(prob, sol, a);
      const bool ok = enforce_energy(cand, ch, cfg, models);
      double v = true_objective(cand, ch, cfg, opt.objective);
      if (!ok || v < cur) {
        // worse than the anchor (solver round-off) or not energy feasible: keep the anchor
        tr.entries.push_back({l, kappa, "covariance", cur, seconds_since(t0), "rejected"});
        break;
      }
      double v_acc = v;
      if (opt.extrapolate) {
        // MM steps tend to repeat; probe further along the last one
        Allocation best = cand;
        for (double alpha = 2.0; alpha <= 16.0; alpha *= 2.0) {
          Allocation ext = extrapolate(a, cand, alpha, cfg);
          repair_charging(ext, ch, cfg, models);
          if (!enforce_energy(ext, ch, cfg, models)) break;
          const double ve = true_objective(ext, ch, cfg, opt.objective);
          if (!(ve > v_acc)) break;
          best = std::move(ext);
          v_acc = ve;
        }
        cand = std::move(best);
      }
      v = v_acc;
      a = std::move(cand);
      if (!det) refine_eh_models(models, a, ch, cfg);
      tr.inner_objective.back().push_back(v);
      tr.entries.push_back({l, kappa, "covariance", v, seconds_since(t0), to_string(sol.status)});
      const double gain = v - cur;
      cur = v;
      if (gain <= opt.inner_tol * std::max(std::abs(cur), 1e-12)) break;
    }
    // Step 2: time LP with the covariances fixed.
    {
      const auto t0 = Clock::now();
      const ConicProblem lp = build_time_lp(cfg, ch, a, models, sopt);
      const ConicSolution sol = solve(lp, opt.solver_tol);
      std::string status = to_string(sol.status);
      if (solved(sol, opt.solver_tol)) {
        Allocation cand = a;
        cand.tau = decode_tau(lp, sol, cfg);
        const bool ok = enforce_energy(cand, ch, cfg, models);
        const double v = true_objective(cand, ch, cfg, opt.objective);
        if (ok && v >= cur) {
          a = std::move(cand);
          cur = v;
          if (!det) refine_eh_models(models, a, ch, cfg);
        } else {
          status = "rejected";
        }
      }
      tr.entries.push_back({l, 0, "time", cur, seconds_since(t0), status});
    }
    tr.outer_objective.push_back(cur);
    const double change = std::abs(cur - g);
    g = cur;
    if (change <= opt.outer_tol) {
      tr.converged = true;
      break;
    }
  }
  res.report = throughput_report(a, ch, cfg);
  res.allocation = std::move(a);
  return res;
}

RunResult run_noncooperative(const NetworkConfig& cfg, const ChannelSet& ch, SolveOptions opt) {
  opt.cooperative = false;
  return run(cfg, ch, opt);
}

}  // namespace wpcn
