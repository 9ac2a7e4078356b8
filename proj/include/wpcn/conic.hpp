#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Sparse>

#include "wpcn/types.hpp"

namespace wpcn {

enum class ConeType { Nonneg, SecondOrder, RotatedSecondOrder, Psd };

// Rows A*x + b must lie in the cone.
//   SecondOrder:        (t, w)       with ||w|| <= t
//   RotatedSecondOrder: (u, v, w)    with 2uv >= ||w||^2, u, v >= 0
//   Psd:                svec of a symmetric side x side matrix, lower triangle
//                       column-major, off-diagonals scaled by sqrt(2)
struct ConeBlock {
  ConeType type = ConeType::Nonneg;
  int dim = 0;
  int side = 0;  // Psd only
  std::vector<Eigen::Triplet<double>> A;  // (local row, global column, value)
  RVec b;
  std::string label;
};

struct VarSlice {
  std::string name;
  int start = 0;
  int len = 0;
  double scale = 1.0;  // physical value = scale * solver value
};

struct ConicProblem {
  int num_vars = 0;
  RVec objective;  // maximize objective^T x
  std::vector<ConeBlock> cones;
  std::vector<VarSlice> var_map;

  int rows() const;
  const VarSlice* find(const std::string& name) const;
  void validate() const;

  // Builder helpers.
  int add_var(const std::string& name, int len, double scale = 1.0);
  ConeBlock& add_cone(ConeType type, int dim, const std::string& label = {});
};

enum class SolveStatus { Optimal, Infeasible, Unbounded, NumericalLimit };
const char* to_string(SolveStatus s);

struct ConicSolution {
  SolveStatus status = SolveStatus::NumericalLimit;
  RVec x;
  RVec z;  // dual multipliers per cone row
  double objective_value = 0.0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  double gap = 0.0;
  int iterations = 0;
};

struct SolverSettings {
  double tol = 1e-8;
  int max_iter = 100;
  bool equilibrate = true;
};

// Homogeneous self-dual primal-dual interior point method with
// Nesterov-Todd scaling and Mehrotra correction.
ConicSolution solve(const ConicProblem& p, double tol = 1e-8);
ConicSolution solve(const ConicProblem& p, const SolverSettings& s);

// Sparse text format:
//   vars <n>
//   obj <col> <value>                       (nonzeros of the objective)
//   cone <id> <type> <dim> [side]           type in {nonneg, soc, rsoc, psd}
//   a <cone id> <row> <col> <value>
//   b <cone id> <row> <value>
//   var <name> <start> <len> <scale>
void dump_problem(std::ostream& os, const ConicProblem& p);

// svec helpers shared by builders and tests.
int svec_dim(int side);
int svec_index(int side, int i, int j);  // i >= j
RVec svec(const RMat& S);
RMat smat(const RVec& v, int side);

}  // namespace wpcn
