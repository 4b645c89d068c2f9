#include "cfaso/switching.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <utility>

#include "cfaso/conic.hpp"

namespace cfaso {

namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

void append_event(std::vector<TraceEvent>* trace, const char* phase, const ActiveSet& active,
                  double slack_sum, double total_power, int solve_count) {
  if (trace == nullptr) return;
  trace->push_back(TraceEvent{phase, active, slack_sum, total_power, solve_count});
}

double consumed_power(double fixed_ap_power, double pa_inefficiency, int num_active,
                      double transmit_power) {
  return fixed_ap_power * num_active + pa_inefficiency * transmit_power;
}

}  // namespace

StatsProvider::StatsProvider(CovarianceGrid cov, ScenarioConfig config, std::uint64_t seed)
    : cov_(std::move(cov)),
      config_(std::move(config)),
      seed_(seed),
      deferred_(true),
      num_aps_(cov_.num_aps) {
  if (cov_.num_aps <= 0 || cov_.num_users <= 0) {
    throw std::invalid_argument("StatsProvider: covariance grid is empty");
  }
}

StatsProvider::StatsProvider(ChannelStatistics full) : full_(std::move(full)) {
  full_->validate();
  num_aps_ = full_->num_aps;
  for (int l = 0; l < num_aps_; ++l) {
    if (full_->ap_indices[static_cast<std::size_t>(l)] != l) {
      throw std::invalid_argument("StatsProvider: expected full-network statistics (identity rows)");
    }
  }
}

const ChannelStatistics& StatsProvider::full() {
  if (!full_) full_ = estimate_statistics(cov_, config_, seed_);
  return *full_;
}

const ChannelStatistics& StatsProvider::measure(const ActiveSet& active) {
  active.validate(num_aps_);
  if (active.empty()) throw std::invalid_argument("StatsProvider: empty active set");
  if (active.size() == num_aps_) return full();
  const std::uint64_t key = active.mask();
  auto it = cache_.find(key);
  if (it == cache_.end()) {
    it = cache_.emplace(key, restrict_statistics(full(), active)).first;
  }
  return it->second;
}

ActiveSet initial_access(const NetworkGeometry& geometry) {
  const int L = static_cast<int>(geometry.distances.rows());
  const int K = static_cast<int>(geometry.distances.cols());
  if (L <= 0 || K <= 0) throw std::invalid_argument("initial_access: empty geometry");
  ActiveSet set;
  for (int k = 0; k < K; ++k) {
    int best = 0;
    for (int l = 1; l < L; ++l) {
      if (geometry.distances(l, k) < geometry.distances(best, k)) best = l;
    }
    set.add(best);
  }
  return set;
}

const char* to_string(PipelineStatus status) {
  switch (status) {
    case PipelineStatus::Ok: return "Ok";
    case PipelineStatus::RequirementImpossible: return "RequirementImpossible";
    case PipelineStatus::SolverFailure: return "SolverFailure";
  }
  return "Unknown";
}

SearchResult feasible_set_search(StatsProvider& provider, const NetworkGeometry& geometry,
                                 const ActiveSet& start, const Eigen::VectorXd& sinr_targets,
                                 double max_tx_power, double solver_tol,
                                 std::vector<TraceEvent>* trace, int trace_solve_offset) {
  const int L = provider.num_aps();
  if (static_cast<int>(geometry.distances.rows()) != L) {
    throw std::invalid_argument("feasible_set_search: geometry does not match the provider");
  }
  SearchResult result;
  result.active = start;
  if (result.active.empty()) throw std::invalid_argument("feasible_set_search: empty start set");

  while (true) {
    result.report = solve_feasibility(provider.measure(result.active), sinr_targets,
                                      max_tx_power, solver_tol);
    ++result.solve_count;
    append_event(trace, "search", result.active, result.report.slack_sum, kNan,
                 trace_solve_offset + result.solve_count);
    if (result.report.status != SolveStatus::Optimal) {
      result.status = PipelineStatus::SolverFailure;
      return result;
    }
    if (result.report.slacks.maxCoeff() <= kSlackZeroTol) return result;  // all users served
    if (result.active.size() == L) {
      result.status = PipelineStatus::RequirementImpossible;
      return result;
    }

    // Worst-served user (largest slack; maxCoeff picks the lowest index on
    // exact ties), then the nearest still-sleeping AP to that user.
    int worst_user = 0;
    result.report.slacks.maxCoeff(&worst_user);
    int wake = -1;
    for (int l = 0; l < L; ++l) {
      if (result.active.contains(l)) continue;
      if (wake < 0 || geometry.distances(l, worst_user) < geometry.distances(wake, worst_user)) {
        wake = l;
      }
    }
    result.active.add(wake);
  }
}

PruneResult prune_active_aps(StatsProvider& provider, const ActiveSet& active,
                             const FeasibilityReport& entry, const Eigen::VectorXd& sinr_targets,
                             double max_tx_power, double fixed_ap_power, double pa_inefficiency,
                             double solver_tol, std::vector<TraceEvent>* trace,
                             int trace_solve_offset) {
  PruneResult result;
  ActiveSet current = active;
  if (current.empty()) throw std::invalid_argument("prune_active_aps: empty active set");
  const int K = static_cast<int>(sinr_targets.size());
  if (entry.allocation.rho.rows() != current.size() || entry.allocation.rho.cols() != K) {
    throw std::invalid_argument("prune_active_aps: entry allocation does not match the active set");
  }

  // Power totals are always compared between power-minimal allocations, so
  // the reference point for the current set comes from one upfront solve.
  // The slack-problem allocation handed in by the search phase is power-
  // feasible but not power-minimal; it only seeds the removal ordering.
  PowerMinResult current_power_min =
      solve_power_min(provider.measure(current), sinr_targets, max_tx_power, solver_tol);
  ++result.solve_count;
  if (current_power_min.status != SolveStatus::Optimal) {
    // The set passed the slack test yet the exact power problem would not
    // solve: a boundary artifact. Serve with the slack-problem allocation
    // rather than failing the pipeline, and do not attempt to prune.
    result.solution.active = current;
    result.solution.rho.rho = entry.allocation.rho;
    result.solution.transmit_power = entry.allocation.total();
    result.solution.total_power = consumed_power(fixed_ap_power, pa_inefficiency, current.size(),
                                                 result.solution.transmit_power);
    result.solution.solve_count = result.solve_count;
    result.solution.feasible = true;
    append_event(trace, "prune-entry", current, kNan, result.solution.total_power,
                 trace_solve_offset + result.solve_count);
    return result;
  }
  double current_total = consumed_power(fixed_ap_power, pa_inefficiency, current.size(),
                                        current_power_min.transmit_power);
  append_event(trace, "prune-entry", current, kNan, current_total,
               trace_solve_offset + result.solve_count);

  // The first removal candidate is ranked by the allocation handed in by the
  // search phase; every later pick uses the newest power-minimal allocation,
  // which concentrates power on load-bearing APs and exposes idle ones.
  bool first_pick = true;
  ActiveSet excluded;

  while (current.size() > 1) {
    // Cheapest AP by per-AP transmitted power among those not yet ruled out;
    // ascending scan keeps ties on the lowest AP index.
    const Eigen::VectorXd per_ap =
        (first_pick ? entry.allocation.rho : current_power_min.allocation.rho).rowwise().sum();
    first_pick = false;
    int pick_pos = -1;
    for (int pos = 0; pos < current.size(); ++pos) {
      if (excluded.contains(current.aps[static_cast<std::size_t>(pos)])) continue;
      if (pick_pos < 0 || per_ap(pos) < per_ap(pick_pos)) pick_pos = pos;
    }
    if (pick_pos < 0) break;  // every remaining AP is load-bearing
    const int candidate = current.aps[static_cast<std::size_t>(pick_pos)];

    ActiveSet reduced = current;
    reduced.remove(candidate);
    const FeasibilityReport probe =
        solve_feasibility(provider.measure(reduced), sinr_targets, max_tx_power, solver_tol);
    ++result.solve_count;
    if (probe.status != SolveStatus::Optimal || !probe.feasible) {
      // Dropping even the lightest-loaded AP breaks feasibility: stop.
      append_event(trace, "prune-stop", current, probe.slack_sum, current_total,
                   trace_solve_offset + result.solve_count);
      break;
    }

    const PowerMinResult reduced_power_min =
        solve_power_min(provider.measure(reduced), sinr_targets, max_tx_power, solver_tol);
    ++result.solve_count;
    const double reduced_total =
        reduced_power_min.status == SolveStatus::Optimal
            ? consumed_power(fixed_ap_power, pa_inefficiency, reduced.size(),
                             reduced_power_min.transmit_power)
            : std::numeric_limits<double>::infinity();
    if (reduced_total < current_total) {
      current = reduced;
      current_total = reduced_total;
      current_power_min = reduced_power_min;
      append_event(trace, "prune-remove", current, probe.slack_sum, current_total,
                   trace_solve_offset + result.solve_count);
    } else {
      excluded.add(candidate);
      append_event(trace, "prune-keep", current, probe.slack_sum, current_total,
                   trace_solve_offset + result.solve_count);
    }
  }

  result.solution.active = current;
  result.solution.rho.rho = current_power_min.allocation.rho;
  result.solution.transmit_power = current_power_min.transmit_power;
  result.solution.total_power = current_total;
  result.solution.solve_count = result.solve_count;
  result.solution.feasible = true;
  return result;
}

PipelineTrace run_proposed(const NetworkGeometry& geometry, StatsProvider& provider,
                           const Eigen::VectorXd& sinr_targets, double max_tx_power,
                           double fixed_ap_power, double pa_inefficiency, double solver_tol) {
  const int L = provider.num_aps();
  PipelineTrace trace;

  const ActiveSet start = initial_access(geometry);
  append_event(&trace.events, "initial-access", start, kNan, kNan, 0);

  const SearchResult search = feasible_set_search(provider, geometry, start, sinr_targets,
                                                  max_tx_power, solver_tol, &trace.events, 0);
  if (search.status != PipelineStatus::Ok) {
    trace.status = search.status;
    trace.solution.active = search.active;
    trace.solution.rho.rho = Eigen::MatrixXd::Zero(L, sinr_targets.size());
    trace.solution.measuring_count = search.active.size();
    trace.solution.solve_count = search.solve_count;
    trace.solution.feasible = false;
    return trace;
  }

  PruneResult prune =
      prune_active_aps(provider, search.active, search.report, sinr_targets, max_tx_power,
                       fixed_ap_power, pa_inefficiency, solver_tol, &trace.events,
                       search.solve_count);
  trace.status = prune.status;
  trace.solution = std::move(prune.solution);

  // Re-embed the serving-set allocation into full-network rows.
  const Eigen::MatrixXd serving_rho = trace.solution.rho.rho;
  trace.solution.rho.rho = Eigen::MatrixXd::Zero(L, sinr_targets.size());
  for (int pos = 0; pos < trace.solution.active.size(); ++pos) {
    trace.solution.rho.rho.row(trace.solution.active.aps[static_cast<std::size_t>(pos)]) =
        serving_rho.row(pos);
  }

  // Measuring cost: statistics were requested for the search phase's final
  // set and for subsets of it, so the union is exactly that final set.
  trace.solution.measuring_count = search.active.size();
  trace.solution.solve_count = search.solve_count + prune.solve_count;
  if (trace.solution.solve_count > 3 * L + 2) {
    throw std::logic_error("run_proposed: conic solve count exceeded the 3L + 2 budget");
  }
  return trace;
}

std::string PipelineTrace::to_log() const {
  std::ostringstream out;
  out << "status=" << to_string(status) << '\n';
  for (const TraceEvent& e : events) {
    out << e.phase << " active=" << e.active.size() << " [";
    for (int pos = 0; pos < e.active.size(); ++pos) {
      if (pos > 0) out << ' ';
      out << e.active.aps[static_cast<std::size_t>(pos)];
    }
    out << "]";
    out << " slack=";
    if (std::isnan(e.slack_sum)) out << '-';
    else out << e.slack_sum;
    out << " total=";
    if (std::isnan(e.total_power)) out << '-';
    else out << e.total_power;
    out << " solves=" << e.solve_count << '\n';
  }
  return out.str();
}

}  // namespace cfaso
