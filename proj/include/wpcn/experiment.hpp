#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "wpcn/optimizer.hpp"

namespace wpcn {

enum class Variant { MaxMin, Sum, NonCoop, Det, NonRobust };
enum class SweepKind { None, Gamma, P0, Theta, Rho, K };

std::string to_string(Variant v);
std::string to_string(SweepKind s);
Variant parse_variant(const std::string& s);
SweepKind parse_sweep(const std::string& s);
std::vector<double> default_sweep_values(SweepKind s);

struct ScenarioSpec {
  NetworkConfig base = default_config();
  SweepKind sweep = SweepKind::None;
  std::vector<double> values;  // ignored for SweepKind::None
  int trials = 100;
  std::vector<Variant> variants{Variant::MaxMin};
  std::uint64_t seed = 1;
  std::string output_dir;  // empty: nothing written
  // ray layout used when a sweep rebuilds the geometry
  double gamma = 0.5;
  double theta_deg = 30.0;
  double d_far = 10.0;
  SolveOptions solve;
  int threads = 0;  // 0: hardware concurrency

  void validate() const;
};

struct TrialResult {
  double point = 0.0;
  int trial = 0;
  std::uint64_t seed = 0;  // channel seed
  Variant variant = Variant::MaxMin;
  std::string status;      // solved, infeasible, numerical_failure, invalid, error
  double min_mbps = 0.0;
  double sum_mbps = 0.0;
  int outer_iterations = 0;
  bool converged = false;
  double seconds = 0.0;
  std::vector<double> user_mbps;   // [k][n] row-major
  std::vector<double> trace_mbps;  // objective after each outer round, entry 0 = start
  std::string message;

  bool solved() const { return status == "solved"; }
};

struct AggregateRow {
  double point = 0.0;
  Variant variant = Variant::MaxMin;
  int trials = 0;
  int solved = 0;
  double mean_min_mbps = 0.0;
  double mean_sum_mbps = 0.0;
  double mean_outer = 0.0;
  // NonRobust rows only, paired with MaxMin on the same draw: 1 - min_nr / min_r,
  // 1 when the non-robust problem is infeasible but the robust one is solved
  double mean_loss = 0.0;
  double max_loss = 0.0;
  int loss_pairs = 0;
};

struct ScenarioResult {
  std::vector<TrialResult> trials;  // sorted by (point, trial, variant)
  std::vector<AggregateRow> aggregate;
};

std::uint64_t trial_seed(std::uint64_t master, int trial);

// Base config moved to one sweep point.
NetworkConfig config_at(const ScenarioSpec& spec, double value);

TrialResult run_trial(const ScenarioSpec& spec, double point, int trial, Variant variant);

// Runs every (point, trial, variant) on a worker pool. Files written when
// output_dir is set: trials.csv, aggregate.csv, traces.csv, timing.csv.
// Only timing.csv depends on the machine.
ScenarioResult run_scenario(const ScenarioSpec& spec);

std::vector<AggregateRow> aggregate(const std::vector<TrialResult>& trials);

void write_trials_csv(std::ostream& os, const std::vector<TrialResult>& trials);
void write_aggregate_csv(std::ostream& os, const std::vector<AggregateRow>& rows);
void write_traces_csv(std::ostream& os, const std::vector<TrialResult>& trials);
void write_timing_csv(std::ostream& os, const std::vector<TrialResult>& trials);

struct ChStudySpec {
  NetworkConfig base = default_config();  // K and geometry are replaced
  int N = 4;
  std::vector<int> K_values{2, 3, 4, 5};
  int trials = 100;
  std::uint64_t seed = 1;
  std::string output_dir;
  SolveOptions solve;
  int threads = 0;

  void validate() const;
};

struct ChStudyRow {
  int K = 0;
  int trial = 0;
  ChRule rule = ChRule::NearestToCentre;
  std::string status;
  double min_mbps = 0.0;
  double total_mbps = 0.0;  // min * K * N
};

struct ChStudyResult {
  std::vector<ChStudyRow> rows;  // sorted by (K, trial, rule)
  // per (K, rule): mean of total_mbps over trials solved under both rules
  std::vector<std::pair<std::pair<int, ChRule>, double>> means;
};

// Disk layout, both head-selection rules on the same user positions and draw.
// Writes ch_study.csv and ch_study_aggregate.csv when output_dir is set.
ChStudyResult run_ch_selection_study(const ChStudySpec& spec);

void write_ch_study_csv(std::ostream& os, const ChStudyResult& r);
void write_ch_study_aggregate_csv(std::ostream& os, const ChStudyResult& r);

}  // namespace wpcn
