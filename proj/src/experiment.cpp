#include "wpcn/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <sstream>
#include <thread>
#include <tuple>

namespace wpcn {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

int worker_count(int requested, std::size_t jobs) {
  int n = requested > 0 ? requested : static_cast<int>(std::thread::hardware_concurrency());
  n = std::max(1, n);
  return static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(n), std::max<std::size_t>(jobs, 1)));
}

// Jobs are claimed from a shared counter; each writes only its own slot.
void parallel_for(std::size_t jobs, int threads, const std::function<void(std::size_t)>& fn) {
  const int n = worker_count(threads, jobs);
  if (n == 1) {
    for (std::size_t i = 0; i < jobs; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (int t = 0; t < n; ++t)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < jobs; i = next++) fn(i);
    });
  for (auto& th : pool) th.join();
}

std::string num(double v) {
  std::ostringstream os;
  os << std::setprecision(12) << v;
  return os.str();
}

std::string rule_name(ChRule r) { return r == ChRule::NearestToHap ? "hap" : "centre"; }

std::ofstream open_out(const std::string& dir, const std::string& name) {
  std::filesystem::create_directories(dir);
  std::ofstream f(std::filesystem::path(dir) / name);
  if (!f) throw InvalidArgument("cannot write to " + dir + "/" + name);
  return f;
}

template <class F>
std::pair<std::string, std::string> guarded(F&& body) {
  try {
    body();
    return {"solved", ""};
  } catch (const InfeasibleInstance& e) {
    return {"infeasible", e.what()};
  } catch (const NumericalFailure& e) {
    return {"numerical_failure", e.what()};
  } catch (const InvalidArgument& e) {
    return {"invalid", e.what()};
  } catch (const std::exception& e) {
    return {"error", e.what()};
  }
}

}  // namespace

std::string to_string(Variant v) {
  switch (v) {
    case Variant::MaxMin: return "maxmin";
    case Variant::Sum: return "sum";
    case Variant::NonCoop: return "noncoop";
    case Variant::Det: return "det";
    case Variant::NonRobust: return "nonrobust";
  }
  return "?";
}

std::string to_string(SweepKind s) {
  switch (s) {
    case SweepKind::None: return "none";
    case SweepKind::Gamma: return "gamma";
    case SweepKind::P0: return "p0";
    case SweepKind::Theta: return "theta";
    case SweepKind::Rho: return "rho";
    case SweepKind::K: return "K";
  }
  return "?";
}

Variant parse_variant(const std::string& s) {
  for (auto v : {Variant::MaxMin, Variant::Sum, Variant::NonCoop, Variant::Det, Variant::NonRobust})
    if (to_string(v) == s) return v;
  throw InvalidArgument("unknown variant: " + s + " (maxmin, sum, noncoop, det, nonrobust)");
}

SweepKind parse_sweep(const std::string& s) {
  for (auto k : {SweepKind::None, SweepKind::Gamma, SweepKind::P0, SweepKind::Theta, SweepKind::Rho, SweepKind::K})
    if (to_string(k) == s) return k;
  throw InvalidArgument("unknown sweep: " + s + " (none, gamma, p0, theta, rho, K)");
}

std::vector<double> default_sweep_values(SweepKind s) {
  switch (s) {
    case SweepKind::None: return {0.0};
    case SweepKind::Gamma: return {0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
    case SweepKind::P0: return {0.5, 1.0, 2.0, 3.0, 5.0, 10.0, 20.0};
    case SweepKind::Theta: return {10.0, 20.0, 30.0, 40.0, 50.0, 60.0, 70.0, 80.0};
    case SweepKind::Rho: return {0.5, 0.6, 0.7, 0.8, 0.9, 0.95, 0.99};
    case SweepKind::K: return {1.0, 2.0, 3.0, 4.0, 5.0, 6.0};
  }
  return {};
}

void ScenarioSpec::validate() const {
  require(trials >= 1, "trials must be >= 1");
  require(!variants.empty(), "variant list is empty");
  require(sweep == SweepKind::None || !values.empty(), "sweep value list is empty");
  require(threads >= 0, "threads must be >= 0");
  solve.validate();
  base.validate();
  for (double v : values) config_at(*this, v).validate();
}

std::uint64_t trial_seed(std::uint64_t master, int trial) {
  return splitmix64(splitmix64(master) ^ static_cast<std::uint64_t>(trial));
}

NetworkConfig config_at(const ScenarioSpec& spec, double value) {
  NetworkConfig cfg = spec.base;
  switch (spec.sweep) {
    case SweepKind::None: return cfg;
    case SweepKind::Gamma:
      cfg.geometry = build_geometry(cfg, value, spec.theta_deg, spec.d_far, true);
      break;
    case SweepKind::Theta:
      cfg.geometry = build_geometry(cfg, spec.gamma, value, spec.d_far, true);
      break;
    case SweepKind::P0:
      require(value > 0.0, "p0 sweep values must be positive");
      cfg.p0 = value;
      break;
    case SweepKind::Rho:
      require(value >= 0.0 && value <= 1.0, "rho sweep values must lie in [0, 1]");
      cfg.rho_h = cfg.rho_g = value;
      break;
    case SweepKind::K: {
      const int K = static_cast<int>(std::lround(value));
      require(K >= 1 && std::abs(value - K) < 1e-9, "K sweep values must be positive integers");
      const int M = spec.base.M[0][0];
      const double Pc = spec.base.Pc[0][0];
      const double eta = spec.base.eta[0][0];
      cfg.K = K;
      fill_uniform(cfg, M, Pc, eta);
      cfg.geometry = build_geometry(cfg, spec.gamma, spec.theta_deg, spec.d_far, true);
      break;
    }
  }
  cfg.validate();
  return cfg;
}

TrialResult run_trial(const ScenarioSpec& spec, double point, int trial, Variant variant) {
  TrialResult r;
  r.point = point;
  r.trial = trial;
  r.variant = variant;
  r.seed = trial_seed(spec.seed, trial);
  const auto t0 = std::chrono::steady_clock::now();
  const auto [status, msg] = guarded([&] {
    const NetworkConfig cfg = config_at(spec, point);
    const ChannelSet ch = sample_channels(cfg, r.seed);
    SolveOptions o = spec.solve;
    RunResult res;
    switch (variant) {
      case Variant::MaxMin:
        o.objective = Objective::MaxMin;
        res = run(cfg, ch, o);
        break;
      case Variant::Sum:
        o.objective = Objective::Sum;
        res = run(cfg, ch, o);
        break;
      case Variant::NonCoop:
        o.objective = Objective::MaxMin;
        res = run_noncooperative(cfg, ch, o);
        break;
      case Variant::Det:
        o.objective = Objective::MaxMin;
        o.signal = SignalMode::DeterministicX0;
        res = run(cfg, ch, o);
        break;
      case Variant::NonRobust:
        o.objective = Objective::MaxMin;
        res = run(cfg, without_error_terms(ch), o);
        res.report = throughput_report(res.allocation, ch, cfg);
        break;
    }
    const double to_mbps = cfg.bandwidth_hz * cfg.T / 1e6;
    r.min_mbps = res.report.min_mbps(cfg);
    r.sum_mbps = res.report.sum_mbps(cfg);
    r.outer_iterations = res.trace.outer_iterations;
    r.converged = res.trace.converged;
    for (const auto& row : res.report.r_user)
      for (double v : row) r.user_mbps.push_back(v * to_mbps);
    for (double v : res.trace.outer_objective) r.trace_mbps.push_back(v * to_mbps);
  });
  r.status = status;
  r.message = msg;
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

std::vector<AggregateRow> aggregate(const std::vector<TrialResult>& trials) {
  std::map<std::pair<double, Variant>, AggregateRow> acc;
  std::map<std::pair<double, int>, double> maxmin_min;
  for (const auto& t : trials)
    if (t.variant == Variant::MaxMin && t.solved()) maxmin_min[{t.point, t.trial}] = t.min_mbps;

  for (const auto& t : trials) {
    auto& a = acc[{t.point, t.variant}];
    a.point = t.point;
    a.variant = t.variant;
    ++a.trials;
    if (t.variant == Variant::NonRobust && (t.solved() || t.status == "infeasible")) {
      // no non-robust design at all while the robust one exists: nothing delivered
      const auto it = maxmin_min.find({t.point, t.trial});
      if (it != maxmin_min.end() && it->second > 0.0) {
        const double loss = t.solved() ? 1.0 - t.min_mbps / it->second : 1.0;
        a.max_loss = a.loss_pairs == 0 ? loss : std::max(a.max_loss, loss);
        a.mean_loss += loss;
        ++a.loss_pairs;
      }
    }
    if (!t.solved()) continue;
    ++a.solved;
    a.mean_min_mbps += t.min_mbps;
    a.mean_sum_mbps += t.sum_mbps;
    a.mean_outer += t.outer_iterations;
  }
  std::vector<AggregateRow> out;
  for (auto& [key, a] : acc) {
    if (a.solved > 0) {
      a.mean_min_mbps /= a.solved;
      a.mean_sum_mbps /= a.solved;
      a.mean_outer /= a.solved;
    }
    if (a.loss_pairs > 0) a.mean_loss /= a.loss_pairs;
    out.push_back(a);
  }
  return out;
}

void write_trials_csv(std::ostream& os, const std::vector<TrialResult>& trials) {
  os << "point,trial,seed,variant,status,min_mbps,sum_mbps,outer_iterations,converged,user_mbps\n";
  for (const auto& t : trials) {
    os << num(t.point) << ',' << t.trial << ',' << t.seed << ',' << to_string(t.variant) << ',' << t.status << ','
       << num(t.min_mbps) << ',' << num(t.sum_mbps) << ',' << t.outer_iterations << ',' << (t.converged ? 1 : 0)
       << ',';
    for (std::size_t i = 0; i < t.user_mbps.size(); ++i) os << (i ? ";" : "") << num(t.user_mbps[i]);
    os << '\n';
  }
}

void write_aggregate_csv(std::ostream& os, const std::vector<AggregateRow>& rows) {
  os << "point,variant,trials,solved,mean_min_mbps,mean_sum_mbps,mean_outer_iterations,mean_loss,max_loss\n";
  for (const auto& a : rows) {
    os << num(a.point) << ',' << to_string(a.variant) << ',' << a.trials << ',' << a.solved << ','
       << num(a.mean_min_mbps) << ',' << num(a.mean_sum_mbps) << ',' << num(a.mean_outer) << ',';
    if (a.loss_pairs > 0) os << num(a.mean_loss) << ',' << num(a.max_loss);
    else os << ',';
    os << '\n';
  }
}

void write_traces_csv(std::ostream& os, const std::vector<TrialResult>& trials) {
  os << "point,trial,variant,outer,objective_mbps\n";
  for (const auto& t : trials)
    for (std::size_t i = 0; i < t.trace_mbps.size(); ++i)
      os << num(t.point) << ',' << t.trial << ',' << to_string(t.variant) << ',' << i << ',' << num(t.trace_mbps[i])
         << '\n';
}

void write_timing_csv(std::ostream& os, const std::vector<TrialResult>& trials) {
  os << "point,trial,variant,seconds,message\n";
  for (const auto& t : trials) {
    std::string msg = t.message;
    std::replace(msg.begin(), msg.end(), ',', ';');
    std::replace(msg.begin(), msg.end(), '\n', ' ');
    os << num(t.point) << ',' << t.trial << ',' << to_string(t.variant) << ',' << num(t.seconds) << ',' << msg << '\n';
  }
}

ScenarioResult run_scenario(const ScenarioSpec& spec) {
  spec.validate();
  const std::vector<double> points = spec.sweep == SweepKind::None ? std::vector<double>{0.0} : spec.values;
  std::vector<std::tuple<double, int, Variant>> jobs;
  for (double p : points)
    for (int t = 0; t < spec.trials; ++t)
      for (auto v : spec.variants) jobs.emplace_back(p, t, v);

  ScenarioResult out;
  out.trials.resize(jobs.size());
  parallel_for(jobs.size(), spec.threads, [&](std::size_t i) {
    const auto& [p, t, v] = jobs[i];
    out.trials[i] = run_trial(spec, p, t, v);
  });
  std::stable_sort(out.trials.begin(), out.trials.end(), [](const TrialResult& a, const TrialResult& b) {
    return std::tie(a.point, a.trial, a.variant) < std::tie(b.point, b.trial, b.variant);
  });
  out.aggregate = aggregate(out.trials);

  if (!spec.output_dir.empty()) {
    auto f1 = open_out(spec.output_dir, "trials.csv");
    write_trials_csv(f1, out.trials);
    auto f2 = open_out(spec.output_dir, "aggregate.csv");
    write_aggregate_csv(f2, out.aggregate);
    auto f3 = open_out(spec.output_dir, "traces.csv");
    write_traces_csv(f3, out.trials);
    auto f4 = open_out(spec.output_dir, "timing.csv");
    write_timing_csv(f4, out.trials);
  }
  return out;
}

void ChStudySpec::validate() const {
  require(N > 2, "the head-selection study needs N > 2");
  require(trials >= 1, "trials must be >= 1");
  require(!K_values.empty(), "K list is empty");
  for (int K : K_values) require(K >= 1, "K values must be >= 1");
  require(threads >= 0, "threads must be >= 0");
  solve.validate();
}

ChStudyResult run_ch_selection_study(const ChStudySpec& spec) {
  spec.validate();
  struct Job {
    int K, trial;
    ChRule rule;
  };
  std::vector<Job> jobs;
  for (int K : spec.K_values)
    for (int t = 0; t < spec.trials; ++t)
      for (auto rule : {ChRule::NearestToHap, ChRule::NearestToCentre}) jobs.push_back({K, t, rule});

  ChStudyResult out;
  out.rows.resize(jobs.size());
  parallel_for(jobs.size(), spec.threads, [&](std::size_t i) {
    const Job& j = jobs[i];
    ChStudyRow& row = out.rows[i];
    row.K = j.K;
    row.trial = j.trial;
    row.rule = j.rule;
    const std::uint64_t seed = trial_seed(trial_seed(spec.seed, j.K), j.trial);
    row.status = guarded([&] {
                   NetworkConfig cfg = spec.base;
                   cfg.K = j.K;
                   cfg.N = spec.N;
                   fill_uniform(cfg, spec.base.M[0][0], spec.base.Pc[0][0], spec.base.eta[0][0]);
                   const auto layout = assign_cluster_heads(sample_disk_layout(j.K, spec.N, seed), j.rule);
                   cfg.geometry = geometry_from_positions(layout, cfg.geometry.d0, cfg.geometry.amplitude_scale);
                   cfg.validate();
                   const ChannelSet ch = sample_channels(cfg, splitmix64(seed));
                   SolveOptions o = spec.solve;
                   o.objective = Objective::MaxMin;
                   const auto res = run(cfg, ch, o);
                   row.min_mbps = res.report.min_mbps(cfg);
                   row.total_mbps = row.min_mbps * j.K * spec.N;
                 }).first;
  });
  std::stable_sort(out.rows.begin(), out.rows.end(), [](const ChStudyRow& a, const ChStudyRow& b) {
    return std::tie(a.K, a.trial, a.rule) < std::tie(b.K, b.trial, b.rule);
  });

  // paired means: a trial counts only when both rules solved it
  std::map<std::pair<int, int>, int> solved_rules;
  for (const auto& r : out.rows) solved_rules[{r.K, r.trial}] += r.status == "solved";
  std::map<std::pair<int, ChRule>, std::pair<double, int>> acc;
  for (const auto& r : out.rows) {
    auto& a = acc[{r.K, r.rule}];
    if (solved_rules[{r.K, r.trial}] != 2) continue;
    a.first += r.total_mbps;
    ++a.second;
  }
  for (const auto& [key, a] : acc) out.means.push_back({key, a.second ? a.first / a.second : 0.0});

  if (!spec.output_dir.empty()) {
    auto f1 = open_out(spec.output_dir, "ch_study.csv");
    write_ch_study_csv(f1, out);
    auto f2 = open_out(spec.output_dir, "ch_study_aggregate.csv");
    write_ch_study_aggregate_csv(f2, out);
  }
  return out;
}

void write_ch_study_csv(std::ostream& os, const ChStudyResult& r) {
  os << "K,trial,rule,status,min_mbps,total_mbps\n";
  for (const auto& row : r.rows)
    os << row.K << ',' << row.trial << ',' << rule_name(row.rule) << ',' << row.status << ',' << num(row.min_mbps)
       << ',' << num(row.total_mbps) << '\n';
}

void write_ch_study_aggregate_csv(std::ostream& os, const ChStudyResult& r) {
  os << "K,rule,mean_total_mbps\n";
  for (const auto& [key, mean] : r.means) os << key.first << ',' << rule_name(key.second) << ',' << num(mean) << '\n';
}

}  // namespace wpcn
