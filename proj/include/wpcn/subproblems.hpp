#pragma once

#include <vector>

#include "wpcn/conic.hpp"
#include "wpcn/surrogate.hpp"

namespace wpcn {

enum class Objective { MaxMin, Sum };

// Hermitian m x m matrices as m^2 reals: diagonal first, then (Re, Im) of
// entry (i, j), i < j, in column-major order of the upper triangle.
int herm_dim(int m);
CMat herm_basis(int m, int a);
RVec herm_encode(const CMat& H);
CMat herm_decode(const RVec& x, int m);
// [[Re H, -Im H], [Im H, Re H]]
RMat real_embedding(const CMat& H);

struct SubproblemOptions {
  Objective objective = Objective::MaxMin;
  bool cooperative = true;
  double tau_eps = 1e-9;  // slots shorter than this are treated as inactive
  bool joint = false;     // surrogates for the joint (tau, covariance) step
};

// Minorizer data at one anchor.
struct SurrogateSet {
  Grid2<SurrogateCoeffs> uch, uhap;  // [k][n], n < N-1
  Grid2<SurrogateCoeffs> chhap;      // [k][n], all n
  Grid2<EnergySurrogate> energy;     // deterministic mode only
};

SurrogateSet compute_surrogates(const NetworkConfig& cfg, const ChannelSet& ch, const Allocation& anchor,
                                const SubproblemOptions& opt);

// Per-user piecewise-linear EH models with p_max = p0 * lambda_max(B_kn).
Grid2<EhLowerModel> make_eh_models(const NetworkConfig& cfg, const ChannelSet& ch, int nodes = 64);
void refine_eh_models(Grid2<EhLowerModel>& models, const Allocation& a, const ChannelSet& ch,
                      const NetworkConfig& cfg);

// Energy available to user (k, n) per unit of tau2, as seen by the subproblems:
// the lower model in random-signal mode and the exact curve in deterministic mode.
double energy_rate(const Allocation& a, const ChannelSet& ch, const NetworkConfig& cfg,
                   const Grid2<EhLowerModel>& models, int k, int n);

// Step 1 subproblems (tau fixed). Variables are named slices in var_map:
//   beta | phi_k_n, t_k     objective epigraph scalars
//   Q (herm, scale p0) or x0 (Re;Im, scale sqrt(p0))
//   X_k_n, Xt_k_n (herm, scale sqrt(ps)); missing when the slot is inactive
//   e_k_n (energy epigraph, scale ps)
ConicProblem build_covariance_subproblem(const NetworkConfig& cfg, const ChannelSet& ch, const RVec& tau,
                                         const Allocation& anchor, const SurrogateSet& sur,
                                         const Grid2<EhLowerModel>& models, const SubproblemOptions& opt);
ConicProblem build_sum_subproblem(const NetworkConfig& cfg, const ChannelSet& ch, const RVec& tau,
                                  const Allocation& anchor, const SurrogateSet& sur,
                                  const Grid2<EhLowerModel>& models, SubproblemOptions opt);
ConicProblem build_covariance_subproblem_det(const NetworkConfig& cfg, const ChannelSet& ch, const RVec& tau,
                                             const Allocation& anchor, const SurrogateSet& sur,
                                             const SubproblemOptions& opt);

// Step 1 with tau free as well: Y = tau*X, Qt = tau2*Q (or xt = tau2*x0), so
// tau*q(Y/tau) is jointly concave. Needs surrogates computed with opt.joint.
// Variables: tau_i, Y_k_n, Yt_k_n, Qt | xt, beta | phi_k_n, t_k, plus epigraph scalars.
ConicProblem build_joint_subproblem(const NetworkConfig& cfg, const ChannelSet& ch, const Allocation& anchor,
                                    const SurrogateSet& sur, const Grid2<EhLowerModel>& models,
                                    const SubproblemOptions& opt);
// X = Y/tau (zero when tau <= tau_eps), Q = Qt/tau2, x0 = xt/tau2.
Allocation decode_joint(const ConicProblem& p, const ConicSolution& s, const Allocation& anchor,
                        const NetworkConfig& cfg, double tau_eps = 1e-12);

// Reads Q/x0/X/Xt back; blocks absent from the problem keep the anchor value.
Allocation decode_covariances(const ConicProblem& p, const ConicSolution& s, const Allocation& anchor);

// Step 2: LP over tau (and beta or the sum epigraph scalars) with covariances fixed.
ConicProblem build_time_lp(const NetworkConfig& cfg, const ChannelSet& ch, const Allocation& fixed,
                           const Grid2<EhLowerModel>& models, const SubproblemOptions& opt);
RVec decode_tau(const ConicProblem& p, const ConicSolution& s, const NetworkConfig& cfg);

// Objective value of an allocation under the exact rate model.
double true_objective(const Allocation& a, const ChannelSet& ch, const NetworkConfig& cfg, Objective obj);

}  // namespace wpcn
