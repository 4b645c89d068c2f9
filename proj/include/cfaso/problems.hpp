#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "cfaso/active_set.hpp"
#include "cfaso/channel.hpp"
#include "cfaso/conic.hpp"

namespace cfaso {

// Downlink power allocation: rho(l, k) is the power AP row l spends on user k.
// Rows line up with the rows of the ChannelStatistics it was computed from.
struct PowerAllocation {
  Eigen::MatrixXd rho;

  double total() const { return rho.sum(); }
};

// Effective SINR of user k under maximum-ratio precoding with statistical
// combining:  (b_k' rho_k)^2 / (sum_i rho_i' C_ki rho_i - (b_k' rho_k)^2 + sigma^2)
// where rho_k is the per-AP power column for user k (entries sqrt'd inside).
// `rho` must have one row per AP row of `stats`.
double sinr(const ChannelStatistics& stats, const PowerAllocation& rho, int user);

// --- power minimization -----------------------------------------------------

// Builds the cone program of minimum total radiated power subject to per-user
// SINR targets and per-AP power budgets, over the APs present in `stats`.
// Variables are the per-link amplitudes u = sqrt(rho) plus one epigraph of
// the total power.
ConicProgram build_power_min(const ChannelStatistics& stats,
                             const Eigen::VectorXd& sinr_targets, double max_tx_power);

struct PowerMinResult {
  SolveStatus status = SolveStatus::NumericalFailure;
  PowerAllocation allocation;   // valid when status == Optimal
  double transmit_power = 0.0;  // sum of rho (radiated only, no fixed terms)
};

PowerMinResult solve_power_min(const ChannelStatistics& stats,
                               const Eigen::VectorXd& sinr_targets, double max_tx_power,
                               double solver_tol = 1e-8);

// --- slack feasibility test ---------------------------------------------------

// Builds the always-feasible variant with one nonnegative slack per user that
// absorbs any SINR shortfall; the objective is the total slack.
ConicProgram build_feasibility(const ChannelStatistics& stats,
                               const Eigen::VectorXd& sinr_targets, double max_tx_power);

struct FeasibilityReport {
  SolveStatus status = SolveStatus::NumericalFailure;
  Eigen::VectorXd slacks;        // per user, >= 0
  double slack_sum = 0.0;
  double min_target_ratio = 0.0; // min_k sinr_k(allocation) / target_k, diagnostic
  bool feasible = false;         // slack_sum <= kSlackZeroTol
  PowerAllocation allocation;    // the power pattern found alongside the slacks
};

// Total slack below which the targets count as servable. An exact solver
// would return exactly zero on feasible instances; finite-precision interior
// points leave slacks around 1e-11 in amplitude units, far below this line.
inline constexpr double kSlackZeroTol = 1e-7;

FeasibilityReport solve_feasibility(const ChannelStatistics& stats,
                                    const Eigen::VectorXd& sinr_targets, double max_tx_power,
                                    double solver_tol = 1e-8);

// --- mixed-binary AP selection ------------------------------------------------

// Outcome of an AP on/off optimization, shared by the exact branch-and-bound
// baseline and the greedy switching pipeline.
struct SwitchingSolution {
  ActiveSet active;             // serving APs (global indices)
  PowerAllocation rho;          // one row per AP of the full network, zeros off
  double transmit_power = 0.0;  // sum of rho
  double total_power = 0.0;     // fixed_ap_power * |active| + pa_inefficiency * transmit
  int measuring_count = 0;      // APs whose statistics were estimated
  int solve_count = 0;          // cone solves spent
  long nodes = 0;               // relaxations explored (baseline only)
  bool feasible = false;
};

struct BranchAndBoundOptions {
  double gap_tol = 1e-6;        // absolute optimality gap at termination
  double integrality_tol = 1e-6;
  double solver_tol = 1e-8;
  long max_nodes = 2000000;     // safety valve; hitting it throws
};

// Exact minimization of fixed_ap_power * |A| + pa_inefficiency * sum(rho) over
// active sets A and feasible allocations, by best-first branch-and-bound on
// the on/off relaxation. `stats` must cover the whole network. Returns
// feasible == false when even the full set cannot meet the targets.
SwitchingSolution branch_and_bound(const ChannelStatistics& stats,
                                   const Eigen::VectorXd& sinr_targets, double max_tx_power,
                                   double fixed_ap_power, double pa_inefficiency,
                                   const BranchAndBoundOptions& options = {});

// --- max-min SINR ---------------------------------------------------------------

// Largest common SINR target that the full AP set can serve, found by
// bisection on the slack feasibility test. The lower bracket starts from the
// SINR reached by an equal full-power allocation (feasible by construction).
double max_min_sinr(const ChannelStatistics& stats, double max_tx_power,
                    double rel_tol = 1e-6, int* solve_count = nullptr,
                    double solver_tol = 1e-8);

}  // namespace cfaso
