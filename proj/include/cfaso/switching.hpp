#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "cfaso/active_set.hpp"
#include "cfaso/channel.hpp"
#include "cfaso/problems.hpp"
#include "cfaso/scenario.hpp"

namespace cfaso {

// Serves channel statistics restricted to any requested AP subset, caching
// both the full estimate and each restriction. Because every (AP, user,
// realization) triple draws from its own RNG stream, restricting the full
// estimate is identical to measuring only the requested APs; callers account
// for which APs they asked about, the provider just hands out numbers.
class StatsProvider {
 public:
  // Defers the Monte Carlo estimation until the first request.
  StatsProvider(CovarianceGrid cov, ScenarioConfig config, std::uint64_t seed);
  // Wraps an already-estimated full-network statistics object.
  explicit StatsProvider(ChannelStatistics full);

  // Statistics restricted to `active` (global AP indices, ascending).
  const ChannelStatistics& measure(const ActiveSet& active);
  // Full-network statistics (what the exhaustive baseline consumes).
  const ChannelStatistics& full();

  int num_aps() const { return num_aps_; }

 private:
  CovarianceGrid cov_;
  ScenarioConfig config_;
  std::uint64_t seed_ = 0;
  bool deferred_ = false;
  std::optional<ChannelStatistics> full_;
  std::unordered_map<std::uint64_t, ChannelStatistics> cache_;
  int num_aps_ = 0;
};

// Every user connects to its nearest AP; the union (deduplicated) is the
// starting active set. Distance ties go to the lowest AP index.
ActiveSet initial_access(const NetworkGeometry& geometry);

enum class PipelineStatus {
  Ok,
  RequirementImpossible,  // all APs active and slacks still positive
  SolverFailure,
};

const char* to_string(PipelineStatus status);

// One step of the pipeline for logging/inspection: which phase emitted it,
// the active set at that point, the latest slack sum and power total (NaN
// when that phase has not produced one), and the cumulative solve count.
struct TraceEvent {
  std::string phase;
  ActiveSet active;
  double slack_sum = 0.0;
  double total_power = 0.0;
  int solve_count = 0;
};

// Grows the active set until the slack test passes: solve the slack
// feasibility problem, and while any user keeps a positive slack, wake the
// unused AP nearest to the worst-slack user (ties: lowest user, then lowest
// AP index) and re-solve. Fails with RequirementImpossible when the whole
// network is active and slacks remain.
struct SearchResult {
  PipelineStatus status = PipelineStatus::Ok;
  ActiveSet active;
  FeasibilityReport report;  // from the last slack solve
  int solve_count = 0;
};

SearchResult feasible_set_search(StatsProvider& provider, const NetworkGeometry& geometry,
                                 const ActiveSet& start, const Eigen::VectorXd& sinr_targets,
                                 double max_tx_power, double solver_tol = 1e-8,
                                 std::vector<TraceEvent>* trace = nullptr,
                                 int trace_solve_offset = 0);

// Shrinks a feasible active set: repeatedly pick the lowest-transmit-power AP
// not yet ruled out, test feasibility without it, and remove it if doing so
// lowers the total power; APs whose removal is feasible but not cheaper are
// permanently excluded from candidacy. The first candidate is chosen from the
// slack-problem allocation handed in by the search phase; once a removal is
// accepted the latest power-minimal allocation takes over. Terminates on an
// infeasible removal or when no candidates remain.
struct PruneResult {
  PipelineStatus status = PipelineStatus::Ok;
  SwitchingSolution solution;
  int solve_count = 0;
};

PruneResult prune_active_aps(StatsProvider& provider, const ActiveSet& active,
                             const FeasibilityReport& entry, const Eigen::VectorXd& sinr_targets,
                             double max_tx_power, double fixed_ap_power, double pa_inefficiency,
                             double solver_tol = 1e-8, std::vector<TraceEvent>* trace = nullptr,
                             int trace_solve_offset = 0);

// The full three-phase pipeline: proximity access, feasible-set search,
// pruning. The returned solution counts *measuring* APs (every AP whose
// statistics were requested) separately from the serving set, and its conic
// solve count is asserted to stay within the 3L + 2 linear budget.
struct PipelineTrace {
  std::vector<TraceEvent> events;
  PipelineStatus status = PipelineStatus::Ok;
  SwitchingSolution solution;  // meaningful when status == Ok

  std::string to_log() const;  // one line per event
};

PipelineTrace run_proposed(const NetworkGeometry& geometry, StatsProvider& provider,
                           const Eigen::VectorXd& sinr_targets, double max_tx_power,
                           double fixed_ap_power, double pa_inefficiency,
                           double solver_tol = 1e-8);

}  // namespace cfaso
