#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "wpcn/subproblems.hpp"

namespace wpcn {

enum class SignalMode { RandomQ, DeterministicX0 };

struct SolveOptions {
  double outer_tol = 1e-4;  // absolute change of the true objective (bits)
  double inner_tol = 1e-3;  // relative MM improvement
  int max_outer = 50;
  int max_inner = 30;
  Objective objective = Objective::MaxMin;
  SignalMode signal = SignalMode::RandomQ;
  bool cooperative = true;
  std::uint64_t seed = 0;  // 0: canonical initialization, otherwise randomized
  double solver_tol = 1e-8;
  int eh_nodes = 64;
  // Step 1 also moves tau (perspective form); false gives the plain alternation
  // of a fixed-tau covariance step and the time LP.
  bool joint_step = true;
  // try longer steps along each accepted MM step; kept only if the true objective improves
  bool extrapolate = true;

  void validate() const;
};

struct TraceEntry {
  int outer = 0;
  int inner = 0;  // 0 for the time LP
  std::string stage;
  double objective = 0.0;
  double seconds = 0.0;
  std::string status;
};

struct SolveTrace {
  std::vector<double> outer_objective;              // true objective, entry 0 = initial point
  std::vector<std::vector<double>> inner_objective;  // per outer round, after each accepted MM step
  std::vector<TraceEntry> entries;
  bool converged = false;
  int outer_iterations = 0;

  void write_csv(std::ostream& os) const;
};

struct RunResult {
  Allocation allocation;
  ThroughputReport report;
  SolveTrace trace;
};

// Feasible starting point: tau split over the active slots, isotropic Q (or
// x0), scaled-identity factors using 99% of the available energy. A nonzero
// seed randomizes tau, Q and the factor directions.
Allocation initialize(const NetworkConfig& cfg, const ChannelSet& ch, std::uint64_t seed,
                      const SolveOptions& opt = {});

RunResult run(const NetworkConfig& cfg, const ChannelSet& ch, const SolveOptions& opt);
RunResult run_noncooperative(const NetworkConfig& cfg, const ChannelSet& ch, SolveOptions opt);

// Shrinks transmit factors until every energy constraint holds under the
// model the subproblems use (lower EH model or exact curve). Returns false when
// some circuit power is not covered even with zero transmit power.
bool enforce_energy(Allocation& a, const ChannelSet& ch, const NetworkConfig& cfg,
                    const Grid2<EhLowerModel>& models);

}  // namespace wpcn
