#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "cfaso/scenario.hpp"

namespace cfaso {

// The two ways of choosing which APs serve: the measurement-frugal pipeline
// ("proposed") and the exhaustive mixed-binary baseline ("mbsocp").
enum class Method { Proposed, MbSocp };
const char* to_string(Method method);

enum class MethodSelection { Proposed, MbSocp, Both };
std::optional<MethodSelection> parse_method_selection(const std::string& text);

// Spectral-efficiency targets used when none are given: 0.25 to 2.25 in
// steps of 0.25 bit/s/Hz.
std::vector<double> default_se_grid();

struct ExperimentPlan {
  ScenarioConfig config;     // rng_seed is the master seed; drops derive from it
  std::vector<double> se_grid = default_se_grid();
  int num_drops = 50;
  MethodSelection methods = MethodSelection::Both;
  double solver_tol = 1e-8;
  double max_min_rel_tol = 1e-4;  // accuracy of the per-drop skip threshold

  void validate() const;  // throws std::invalid_argument on bad fields
};

// One run of one method on one (drop, target) pair; mirrors one CSV row.
struct ExperimentRow {
  int drop_id = 0;
  std::uint64_t seed = 0;  // child seed that generated the drop
  double target_se = 0.0;  // bit/s/Hz per user
  Method method = Method::Proposed;
  int measuring_aps = 0;
  int serving_aps = 0;
  double transmit_power_w = 0.0;         // sum of the allocation
  double scaled_transmit_power_w = 0.0;  // amplifier-inefficiency-scaled
  double total_power_w = 0.0;            // plus fixed per-AP consumption
  double achieved_min_se = 0.0;          // worst user's SE under the allocation
  double energy_efficiency = 0.0;        // Mbit per Joule, bandwidth * sum SE / total power
  int conic_solve_count = 0;
  double wall_time_s = 0.0;
  // Relaxations explored by the exact baseline (0 for the pipeline). Kept
  // for analysis; not part of the 13-column CSV schema.
  long nodes = 0;
};

// A (drop, target) pair whose target exceeded that drop's max-min SINR and
// was therefore not run by either method.
struct SkippedPair {
  int drop_id = 0;
  double target_se = 0.0;
  double max_min_se = 0.0;  // the drop's ceiling, in bit/s/Hz
};

// Per (target, method) means over the non-skipped drops. Both methods
// average over the same drop subset because skipping depends only on the
// drop's max-min ceiling.
struct AggregateRow {
  double target_se = 0.0;
  Method method = Method::Proposed;
  int drops = 0;
  double mean_serving_aps = 0.0;
  double mean_measuring_aps = 0.0;
  double mean_transmit_power_w = 0.0;
  double mean_total_power_w = 0.0;
  double mean_achieved_min_se = 0.0;
  double mean_energy_efficiency = 0.0;
  double mean_conic_solve_count = 0.0;
};

struct ExperimentResult {
  std::vector<ExperimentRow> rows;  // drop-major, then target, then method
  std::vector<SkippedPair> skipped;
  std::vector<AggregateRow> aggregates;
};

// Runs the planned sweep: per drop, generate geometry, estimate statistics
// once, compute the max-min ceiling, then run every selected method on every
// reachable target. `progress` (optional) receives one line per finished
// drop. Output order is deterministic; only wall_time_s varies across runs.
using ProgressFn = std::function<void(const std::string&)>;
ExperimentResult run_experiment(const ExperimentPlan& plan, const ProgressFn& progress = {});

// 13-column CSV (header + one line per row), in row order.
std::string to_csv(const std::vector<ExperimentRow>& rows);

// Aggregate means plus the skipped-pair list, as a two-section CSV.
std::string aggregates_to_csv(const ExperimentResult& result);

// "0.25,0.5,..." -> grid; throws std::invalid_argument on malformed input.
std::vector<double> parse_se_grid(const std::string& text);

}  // namespace cfaso
