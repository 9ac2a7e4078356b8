#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "wpcn/model.hpp"
#include "wpcn/physics.hpp"
#include "wpcn/subproblems.hpp"

// Brute-force references for tests. Search loops use scalar formulas written
// out again here; physics is only called to re-score a final incumbent.
namespace wpcn::oracle {

struct GridAxis {
  double lo = 0.0;
  double hi = 1.0;
  int points = 2;
};

struct GridSpec {
  std::vector<GridAxis> axes;
  long long budget = 10'000'000;  // hard cap on evaluated points, refinement included
  int refine_points = 21;         // per axis, over +-1 cell around the incumbent; 0 disables

  long long coarse_points() const;
  long long total_points() const;
  void validate() const;
};

// 4 axes over (tau2, tau3, tau4_0, share of the CH transmit energy spent relaying).
GridSpec default_scalar_grid(int points = 48);

struct GridResult {
  double value = 0.0;          // from the scalar formulas
  double physics_value = 0.0;  // the incumbent re-scored by throughput_report
  RVec point;                  // tau2, tau3, tau4_0, split, q
  Allocation allocation;       // the incumbent as an allocation
  long long evaluations = 0;
};

// Exhaustive search on a K=1, N=2, single-antenna instance. tau4_1 takes the
// remaining time and every user spends all harvested energy. The HAP power is
// best of p0, the per-user EH peaks below p0 and points between the peaks.
GridResult grid_search_scalar(const NetworkConfig& cfg, const ChannelSet& ch, Objective obj, bool cooperative,
                              const GridSpec& grid = default_scalar_grid());

// Objective at one point of the scalar model (-inf when energy-infeasible).
double scalar_objective(const NetworkConfig& cfg, const ChannelSet& ch, Objective obj, bool cooperative,
                        double tau2, double tau3, double tau40, double split, double q);

// Harvested power per unit time, written out independently of physics.
double eh_power(double P, const EhParams& eh);

struct GoldenResult {
  double x = 0.0;
  double value = 0.0;
  int iterations = 0;
};
// Maximizes a unimodal f on [lo, hi].
GoldenResult golden_section_max(const std::function<double(double)>& f, double lo, double hi, double tol = 1e-10);

using ScalarFn = std::function<double(const RVec&)>;
// Central differences; throws NumericalFailure on a non-finite evaluation.
RVec finite_diff_gradient(const ScalarFn& f, const RVec& x, double step);
RMat finite_diff_hessian(const ScalarFn& f, const RVec& x, double step);

// [Re x; Im x] <-> x
RVec stack_complex(const CVec& x);
CVec unstack_complex(const RVec& r);

// Received y = sum_j (G_j + Delta_j) V_j s_j + n with s_j ~ CN(0, I),
// Delta_j entries ~ CN(0, var_delta[j]), n ~ CN(0, noise I). Returns the
// sample mean of (s_0 - W y)(s_0 - W y)^H.
CMat mc_decoder_mse(const std::vector<CMat>& G, const std::vector<CMat>& V, const std::vector<double>& var_delta,
                    double noise, const CMat& W, int draws, std::uint64_t seed);

// Sample mean of |x|^2 over draws of CN(0, var).
double mc_second_moment(double var, int draws, std::uint64_t seed);

// Smallest f_true - f_sur over sampled points.
double sampled_domination(const std::function<double(int)>& f_true, const std::function<double(int)>& f_sur,
                          int samples);

}  // namespace wpcn::oracle
