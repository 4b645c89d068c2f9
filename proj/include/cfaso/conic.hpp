#pragma once

#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace cfaso {

// One second-order cone membership constraint: A*x + b lies in the cone
// { (t, u) : t >= ||u||_2 }. Rows of A (and entries of b) are ordered with
// the cone's scalar first. dim >= 1; a one-row constraint is the half-line
// A*x + b >= 0.
struct SocConstraint {
  Eigen::MatrixXd A;
  Eigen::VectorXd b;
};

// Linear objective over variables subject to nonnegativity on selected
// variables plus second-order cone constraints:
//   minimize   objective' x
//   subject to x_i >= 0            for i in nonnegative
//              A_j x + b_j in SOC  for every cone j
struct ConicProgram {
  int num_vars = 0;
  Eigen::VectorXd objective;
  std::vector<int> nonnegative;
  std::vector<SocConstraint> cones;
  std::vector<std::string> var_names;  // optional, for listings only

  void validate() const;               // throws std::invalid_argument when malformed
  std::string debug_listing() const;   // human-readable dump of sizes and rows
};

// Builds the cone rows expressing t >= sum_i u_i^2 through the rotated-cone
// identity (t + 1, 2u, t - 1):  t+1 >= ||(2u, t-1)||  <=>  4t >= 4||u||^2.
SocConstraint epigraph_quadratic(std::span<const int> u_vars, int t_var, int num_vars);

enum class SolveStatus {
  Optimal,         // certified primal-dual optimal within tolerance
  Infeasible,      // certified: a dual improving ray was found
  MaxIterations,   // ran out of iterations before certifying either way
  NumericalFailure // linear algebra or step-size breakdown
};

struct KktResiduals {
  double primal = 0.0;  // ||A x + b - s|| relative, over all constraints
  double dual = 0.0;    // stationarity residual, relative
  double gap = 0.0;     // complementarity (absolute duality gap)
};

struct SolveResult {
  SolveStatus status = SolveStatus::NumericalFailure;
  Eigen::VectorXd x;        // primal point (zeros unless Optimal)
  double objective = 0.0;   // objective' x at the returned point
  KktResiduals residuals;
  int iterations = 0;
};

struct SolverOptions {
  // Feasibility and duality-gap target. If the iteration reaches a numerical
  // dead end, the best iterate is still reported as optimal when it meets ten
  // times this tolerance; the achieved residuals are always in the result.
  double tolerance = 1e-8;
  int max_iterations = 100;
  bool verbose = false;
};

// Primal-dual interior-point solve of the homogeneous self-dual embedding.
// Optimal and Infeasible are certified against the stated tolerance; any
// other outcome is reported honestly rather than guessed.
SolveResult solve_socp(const ConicProgram& program, const SolverOptions& options = {});

const char* to_string(SolveStatus status);

}  // namespace cfaso
