#include "cfaso/problems.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <queue>
#include <set>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace cfaso {

namespace {

// sqrt((1+gamma)/gamma): the cone head multiplier that turns an SINR target
// into a norm bound.
double cone_gain(double gamma) { return std::sqrt((1.0 + gamma) / gamma); }

void check_targets(const ChannelStatistics& stats, const Eigen::VectorXd& targets) {
  if (stats.num_aps < 1) throw std::invalid_argument("power problem: no APs in statistics");
  if (targets.size() != stats.num_users)
    throw std::invalid_argument("power problem: one SINR target per user required");
  for (int k = 0; k < targets.size(); ++k)
    if (!(std::isfinite(targets(k)) && targets(k) > 0.0))
      throw std::invalid_argument("power problem: SINR targets must be finite and positive");
}

void check_power(double max_tx_power) {
  if (!(std::isfinite(max_tx_power) && max_tx_power > 0.0))
    throw std::invalid_argument("power problem: per-AP budget must be positive");
}

// Appends the SINR cone of user k over amplitude variables u (k-major layout
// with `stride` amplitudes per user starting at column 0):
//   head = gain * b_k' u_k (+ optional slack)  >=  || [S_k1 u_1; ...; S_kK u_K; sigma] ||
void push_user_cone(ConicProgram& p, const ChannelStatistics& stats,
                    const Eigen::VectorXd& targets, int k, int slack_var) {
  const int L = stats.num_aps, K = stats.num_users;
  const int dim = 1 + K * L + 1;
  SocConstraint cone;
  cone.A = Eigen::MatrixXd::Zero(dim, p.num_vars);
  cone.b = Eigen::VectorXd::Zero(dim);
  const double g = cone_gain(targets(k));
  for (int l = 0; l < L; ++l) cone.A(0, k * L + l) = g * stats.b(l, k);
  if (slack_var >= 0) cone.A(0, slack_var) = 1.0;
  int row = 1;
  for (int i = 0; i < K; ++i) {
    cone.A.block(row, i * L, L, L) = stats.Cki_sqrt(k, i);
    row += L;
  }
  cone.b(dim - 1) = std::sqrt(stats.dl_noise_power);
  p.cones.push_back(std::move(cone));
}

// Per-AP budget: cap >= || (u_{0,l}, ..., u_{K-1,l}) ||. The cap is either the
// constant sqrt(P_max) or sqrt(P_max) * x_var for an on/off relaxation.
void push_ap_cone(ConicProgram& p, int num_users, int stride, int l, double max_tx_power,
                  int x_var) {
  SocConstraint cone;
  cone.A = Eigen::MatrixXd::Zero(num_users + 1, p.num_vars);
  cone.b = Eigen::VectorXd::Zero(num_users + 1);
  if (x_var >= 0)
    cone.A(0, x_var) = std::sqrt(max_tx_power);
  else
    cone.b(0) = std::sqrt(max_tx_power);
  for (int k = 0; k < num_users; ++k) cone.A(1 + k, k * stride + l) = 1.0;
  p.cones.push_back(std::move(cone));
}

Eigen::MatrixXd extract_rho(const Eigen::VectorXd& x, int L, int K) {
  Eigen::MatrixXd rho(L, K);
  for (int k = 0; k < K; ++k)
    for (int l = 0; l < L; ++l) {
      const double u = x(k * L + l);
      rho(l, k) = u * u;
    }
  return rho;
}

}  // namespace

double sinr(const ChannelStatistics& stats, const PowerAllocation& rho, int user) {
  const int L = stats.num_aps, K = stats.num_users;
  if (rho.rho.rows() != L || rho.rho.cols() != K)
    throw std::invalid_argument("sinr: allocation shape does not match statistics");
  if (user < 0 || user >= K) throw std::invalid_argument("sinr: user out of range");
  if ((rho.rho.array() < -1e-12).any())
    throw std::invalid_argument("sinr: negative power entries");

  Eigen::MatrixXd amp = rho.rho.cwiseMax(0.0).cwiseSqrt();
  const double lead = stats.b.col(user).dot(amp.col(user));
  double interference = 0.0;
  for (int i = 0; i < K; ++i)
    interference += amp.col(i).dot(stats.Cki(user, i).real() * amp.col(i));
  const double denom = interference - lead * lead + stats.dl_noise_power;
  return lead * lead / denom;
}

ConicProgram build_power_min(const ChannelStatistics& stats, const Eigen::VectorXd& sinr_targets,
                             double max_tx_power) {
  check_targets(stats, sinr_targets);
  check_power(max_tx_power);
  const int L = stats.num_aps, K = stats.num_users;
  ConicProgram p;
  p.num_vars = L * K + 1;
  const int t_var = L * K;
  p.objective = Eigen::VectorXd::Zero(p.num_vars);
  p.objective(t_var) = 1.0;
  p.nonnegative.resize(static_cast<std::size_t>(L) * K);
  std::iota(p.nonnegative.begin(), p.nonnegative.end(), 0);
  for (int k = 0; k < K; ++k) push_user_cone(p, stats, sinr_targets, k, -1);
  for (int l = 0; l < L; ++l) push_ap_cone(p, K, L, l, max_tx_power, -1);
  std::vector<int> uvars(static_cast<std::size_t>(L) * K);
  std::iota(uvars.begin(), uvars.end(), 0);
  p.cones.push_back(epigraph_quadratic(uvars, t_var, p.num_vars));
  return p;
}

PowerMinResult solve_power_min(const ChannelStatistics& stats, const Eigen::VectorXd& sinr_targets,
                               double max_tx_power, double solver_tol) {
  const ConicProgram p = build_power_min(stats, sinr_targets, max_tx_power);
  SolverOptions opts;
  opts.tolerance = solver_tol;
  const SolveResult r = solve_socp(p, opts);
  PowerMinResult out;
  out.status = r.status;
  if (r.status == SolveStatus::Optimal) {
    out.allocation.rho = extract_rho(r.x, stats.num_aps, stats.num_users);
    out.transmit_power = out.allocation.rho.sum();
  }
  return out;
}

ConicProgram build_feasibility(const ChannelStatistics& stats, const Eigen::VectorXd& sinr_targets,
                               double max_tx_power) {
  check_targets(stats, sinr_targets);
  check_power(max_tx_power);
  const int L = stats.num_aps, K = stats.num_users;
  ConicProgram p;
  p.num_vars = L * K + K;
  p.objective = Eigen::VectorXd::Zero(p.num_vars);
  p.nonnegative.resize(static_cast<std::size_t>(p.num_vars));
  std::iota(p.nonnegative.begin(), p.nonnegative.end(), 0);
  for (int k = 0; k < K; ++k) {
    p.objective(L * K + k) = 1.0;
    push_user_cone(p, stats, sinr_targets, k, L * K + k);
  }
  for (int l = 0; l < L; ++l) push_ap_cone(p, K, L, l, max_tx_power, -1);
  return p;
}

FeasibilityReport solve_feasibility(const ChannelStatistics& stats,
                                    const Eigen::VectorXd& sinr_targets, double max_tx_power,
                                    double solver_tol) {
  const ConicProgram p = build_feasibility(stats, sinr_targets, max_tx_power);
  SolverOptions opts;
  opts.tolerance = solver_tol;
  const SolveResult r = solve_socp(p, opts);
  FeasibilityReport report;
  report.status = r.status;
  if (r.status == SolveStatus::Optimal) {
    const int L = stats.num_aps, K = stats.num_users;
    report.slacks = r.x.segment(L * K, K).cwiseMax(0.0);
    report.slack_sum = report.slacks.sum();
    report.allocation.rho = extract_rho(r.x, L, K);
    double ratio = std::numeric_limits<double>::infinity();
    for (int k = 0; k < K; ++k)
      ratio = std::min(ratio, sinr(stats, report.allocation, k) / sinr_targets(k));
    report.min_target_ratio = ratio;
    report.feasible = report.slack_sum <= kSlackZeroTol;
  }
  return report;
}

// ---------------------------------------------------------------------------
// Branch and bound over AP on/off patterns

namespace {

constexpr std::int8_t kOff = 0, kOn = 1, kFree = 2;

struct BnbNode {
  double bound = 0.0;
  std::vector<std::int8_t> pattern;
  Eigen::VectorXd x_frac;  // relaxation values of the free APs, in pattern order
};

// Best-first: smallest bound wins; the pattern breaks ties deterministically.
struct NodeOrder {
  bool operator()(const BnbNode& a, const BnbNode& b) const {
    if (a.bound != b.bound) return a.bound > b.bound;
    return std::lexicographical_compare(b.pattern.begin(), b.pattern.end(), a.pattern.begin(),
                                        a.pattern.end());
  }
};

struct NodeSolve {
  SolveStatus status = SolveStatus::NumericalFailure;
  double bound = 0.0;
  Eigen::VectorXd x_frac;        // aligned with the free APs of the pattern
  double relax_transmit = 0.0;   // sum of u^2 in the relaxation
  std::vector<int> rounded_up;   // candidate rows with x above the integrality tol
};

}  // namespace

SwitchingSolution branch_and_bound(const ChannelStatistics& stats,
                                   const Eigen::VectorXd& sinr_targets, double max_tx_power,
                                   double fixed_ap_power, double pa_inefficiency,
                                   const BranchAndBoundOptions& options) {
  check_targets(stats, sinr_targets);
  check_power(max_tx_power);
  if (!(fixed_ap_power >= 0.0) || !(pa_inefficiency > 0.0))
    throw std::invalid_argument("branch_and_bound: bad power model parameters");
  const int L = stats.num_aps, K = stats.num_users;
  if (L > 63) throw std::invalid_argument("branch_and_bound: more than 63 APs not supported");

  SwitchingSolution out;
  out.measuring_count = L;

  SolverOptions sopts;
  sopts.tolerance = options.solver_tol;

  // Restricted statistics per candidate mask; masks change only on off-fixing.
  std::unordered_map<std::uint64_t, ChannelStatistics> cache;
  const std::uint64_t full_mask = (L == 63) ? ~0ULL >> 1 : ((1ULL << L) - 1);
  cache.emplace(full_mask, stats);

  auto candidate_rows = [&](const std::vector<std::int8_t>& pattern) {
    std::vector<int> rows;
    for (int l = 0; l < L; ++l)
      if (pattern[static_cast<std::size_t>(l)] != kOff) rows.push_back(l);
    return rows;
  };
  auto mask_of = [&](const std::vector<int>& rows) {
    std::uint64_t m = 0;
    for (int r : rows) m |= 1ULL << static_cast<unsigned>(r);
    return m;
  };
  auto stats_for = [&](const std::vector<int>& rows) -> const ChannelStatistics& {
    const std::uint64_t m = mask_of(rows);
    auto it = cache.find(m);
    if (it == cache.end())
      it = cache.emplace(m, restrict_statistics(stats, ActiveSet(rows))).first;
    return it->second;
  };

  // Incumbent: start from the full set.
  const PowerMinResult full = solve_power_min(stats, sinr_targets, max_tx_power, options.solver_tol);
  out.solve_count = 1;
  if (full.status == SolveStatus::Infeasible) {
    out.feasible = false;
    return out;
  }
  if (full.status != SolveStatus::Optimal)
    throw std::runtime_error("branch_and_bound: full-set power minimization failed numerically");

  std::vector<int> best_rows(static_cast<std::size_t>(L));
  std::iota(best_rows.begin(), best_rows.end(), 0);
  Eigen::MatrixXd best_rho = full.allocation.rho;
  double best_obj = fixed_ap_power * L + pa_inefficiency * full.transmit_power;
  std::set<std::uint64_t> attempted_sets;
  attempted_sets.insert(full_mask);

  // Tries `rows` as an integral solution; updates the incumbent on success.
  auto try_candidate = [&](const std::vector<int>& rows, double estimate,
                           double tol = 0.0) {
    if (rows.empty()) return;
    if (estimate >= best_obj - 1e-12) return;
    const std::uint64_t m = mask_of(rows);
    if (!attempted_sets.insert(m).second) return;
    const ChannelStatistics& sc = stats_for(rows);
    const PowerMinResult r = solve_power_min(sc, sinr_targets, max_tx_power,
                                             tol > 0.0 ? tol : options.solver_tol);
    ++out.solve_count;
    if (r.status != SolveStatus::Optimal) return;
    const double obj = fixed_ap_power * static_cast<double>(rows.size()) +
                       pa_inefficiency * r.transmit_power;
    if (obj < best_obj) {
      best_obj = obj;
      best_rows = rows;
      best_rho = r.allocation.rho;
    }
  };

  // Solves the continuous relaxation of one on/off pattern.
  auto solve_node = [&](const std::vector<std::int8_t>& pattern) {
    NodeSolve ns;
    const std::vector<int> rows = candidate_rows(pattern);
    if (rows.empty()) {
      ns.status = SolveStatus::Infeasible;
      return ns;
    }
    const ChannelStatistics& sc = stats_for(rows);
    const int nc = static_cast<int>(rows.size());
    std::vector<int> free_pos;  // positions within `rows` that are undecided
    int fixed_on = 0;
    for (int j = 0; j < nc; ++j) {
      if (pattern[static_cast<std::size_t>(rows[static_cast<std::size_t>(j)])] == kFree)
        free_pos.push_back(j);
      else
        ++fixed_on;
    }
    const int F = static_cast<int>(free_pos.size());

    ConicProgram p;
    p.num_vars = nc * K + F + 1;
    const int x_base = nc * K;
    const int t_var = nc * K + F;
    p.objective = Eigen::VectorXd::Zero(p.num_vars);
    p.objective(t_var) = pa_inefficiency;
    for (int f = 0; f < F; ++f) p.objective(x_base + f) = fixed_ap_power;
    p.nonnegative.resize(static_cast<std::size_t>(x_base + F));
    std::iota(p.nonnegative.begin(), p.nonnegative.end(), 0);
    for (int k = 0; k < K; ++k) push_user_cone(p, sc, sinr_targets, k, -1);
    for (int j = 0, f = 0; j < nc; ++j) {
      const bool is_free = (f < F && free_pos[static_cast<std::size_t>(f)] == j);
      push_ap_cone(p, K, nc, j, max_tx_power, is_free ? x_base + f : -1);
      if (is_free) ++f;
    }
    for (int f = 0; f < F; ++f) {  // x <= 1
      SocConstraint up;
      up.A = Eigen::MatrixXd::Zero(1, p.num_vars);
      up.A(0, x_base + f) = -1.0;
      up.b = Eigen::VectorXd::Ones(1);
      p.cones.push_back(std::move(up));
    }
    std::vector<int> uvars(static_cast<std::size_t>(nc) * K);
    std::iota(uvars.begin(), uvars.end(), 0);
    p.cones.push_back(epigraph_quadratic(uvars, t_var, p.num_vars));

    const SolveResult r = solve_socp(p, sopts);
    ns.status = r.status;
    if (r.status != SolveStatus::Optimal) return ns;

    ns.bound = r.objective + fixed_ap_power * static_cast<double>(fixed_on);
    ns.x_frac = r.x.segment(x_base, F).cwiseMax(0.0).cwiseMin(1.0);
    double transmit = 0.0;
    for (int j = 0; j < nc * K; ++j) transmit += r.x(j) * r.x(j);
    ns.relax_transmit = transmit;
    for (int j = 0, f = 0; j < nc; ++j) {
      const bool is_free = (f < F && free_pos[static_cast<std::size_t>(f)] == j);
      if (!is_free) {
        ns.rounded_up.push_back(rows[static_cast<std::size_t>(j)]);
      } else {
        if (ns.x_frac(f) > options.integrality_tol)
          ns.rounded_up.push_back(rows[static_cast<std::size_t>(j)]);
        ++f;
      }
    }
    return ns;
  };

  auto is_integral = [&](const Eigen::VectorXd& xf) {
    for (int i = 0; i < xf.size(); ++i)
      if (std::min(xf(i), 1.0 - xf(i)) > options.integrality_tol) return false;
    return true;
  };

  std::priority_queue<BnbNode, std::vector<BnbNode>, NodeOrder> open;

  BnbNode root;
  root.pattern.assign(static_cast<std::size_t>(L), kFree);
  {
    const NodeSolve ns = solve_node(root.pattern);
    ++out.nodes;
    ++out.solve_count;
    if (ns.status == SolveStatus::Infeasible) {
      out.feasible = false;  // cannot happen when the full set was feasible
      return out;
    }
    if (ns.status == SolveStatus::Optimal) {
      try_candidate(ns.rounded_up,
                    fixed_ap_power * static_cast<double>(ns.rounded_up.size()) +
                        pa_inefficiency * ns.relax_transmit);
      root.bound = ns.bound;
      root.x_frac = ns.x_frac;
      if (!is_integral(ns.x_frac) && ns.bound < best_obj - options.gap_tol) open.push(root);
    } else {
      // Unresolved relaxation: every term of the objective is nonnegative, so
      // zero is a valid (if weak) bound; branching will tighten it.
      root.bound = 0.0;
      root.x_frac = Eigen::VectorXd::Constant(L, 0.5);
      if (root.bound < best_obj - options.gap_tol) open.push(root);
    }
  }

  while (!open.empty()) {
    const BnbNode node = open.top();
    open.pop();
    if (node.bound >= best_obj - options.gap_tol) break;  // best-first: all pruned

    // Most fractional free AP; ties go to the lowest AP index.
    int branch_ap = -1, pos = 0;
    double best_frac = -1.0;
    for (int l = 0; l < L; ++l) {
      if (node.pattern[static_cast<std::size_t>(l)] != kFree) continue;
      const double frac = std::min(node.x_frac(pos), 1.0 - node.x_frac(pos));
      if (frac > best_frac) {
        best_frac = frac;
        branch_ap = l;
      }
      ++pos;
    }
    if (branch_ap < 0) continue;  // fully fixed; nothing to expand

    for (const std::int8_t value : {kOff, kOn}) {
      BnbNode child;
      child.pattern = node.pattern;
      child.pattern[static_cast<std::size_t>(branch_ap)] = value;
      const NodeSolve ns = solve_node(child.pattern);
      if (ns.status != SolveStatus::Infeasible) {
        ++out.nodes;
        ++out.solve_count;
      }
      if (out.nodes > options.max_nodes)
        throw std::runtime_error("branch_and_bound: node budget exceeded");
      if (ns.status == SolveStatus::Infeasible) continue;
      if (ns.status != SolveStatus::Optimal) {
        // The interior-point method can stall on relaxations that sit on the
        // feasibility knife edge (a free AP whose cap cone collapses to its
        // apex).  The node is neither solved nor certified infeasible, so it
        // must not be pruned: keep it alive under the parent's bound, which
        // stays valid for the smaller feasible set, and give every free AP a
        // neutral 0.5 so branching proceeds to more constrained children that
        // the solver handles.  The all-frees-on pattern is still tried as an
        // integral candidate (at a slightly looser tolerance when the node is
        // already fully fixed, since the strict solve just failed on it).
        int frees = 0;
        for (int l = 0; l < L; ++l)
          if (child.pattern[static_cast<std::size_t>(l)] == kFree) ++frees;
        try_candidate(candidate_rows(child.pattern), node.bound,
                      frees == 0 ? options.solver_tol * 10.0 : 0.0);
        if (frees > 0 && node.bound < best_obj - options.gap_tol) {
          child.bound = node.bound;
          child.x_frac = Eigen::VectorXd::Constant(frees, 0.5);
          open.push(std::move(child));
        }
        continue;
      }
      try_candidate(ns.rounded_up,
                    fixed_ap_power * static_cast<double>(ns.rounded_up.size()) +
                        pa_inefficiency * ns.relax_transmit);
      if (is_integral(ns.x_frac)) continue;  // leaf; candidate above covers it
      if (ns.bound < best_obj - options.gap_tol) {
        child.bound = ns.bound;
        child.x_frac = ns.x_frac;
        open.push(std::move(child));
      }
    }
  }

  out.feasible = true;
  std::vector<int> global_ids;
  global_ids.reserve(best_rows.size());
  for (int r : best_rows) global_ids.push_back(stats.ap_indices[static_cast<std::size_t>(r)]);
  out.active = ActiveSet(global_ids);
  out.rho.rho = Eigen::MatrixXd::Zero(L, K);
  for (std::size_t j = 0; j < best_rows.size(); ++j)
    out.rho.rho.row(best_rows[j]) = best_rho.row(static_cast<Eigen::Index>(j));
  out.transmit_power = out.rho.rho.sum();
  out.total_power =
      fixed_ap_power * static_cast<double>(best_rows.size()) + pa_inefficiency * out.transmit_power;
  return out;
}

// ---------------------------------------------------------------------------
// Max-min SINR by bisection on the slack feasibility test

double max_min_sinr(const ChannelStatistics& stats, double max_tx_power, double rel_tol,
                    int* solve_count, double solver_tol) {
  check_power(max_tx_power);
  if (!(rel_tol > 0.0)) throw std::invalid_argument("max_min_sinr: tolerance must be positive");
  const int L = stats.num_aps, K = stats.num_users;
  int solves = 0;
  auto feasible = [&](double gamma) {
    const FeasibilityReport r = solve_feasibility(
        stats, Eigen::VectorXd::Constant(K, gamma), max_tx_power, solver_tol);
    ++solves;
    if (r.status != SolveStatus::Optimal)
      throw std::runtime_error("max_min_sinr: feasibility solve failed");
    return r.feasible;
  };

  // Equal split of the full per-AP budget is feasible by construction and
  // witnesses its own minimum SINR as an achievable common target.
  PowerAllocation equal;
  equal.rho = Eigen::MatrixXd::Constant(L, K, max_tx_power / static_cast<double>(K));
  double gamma_lo = std::numeric_limits<double>::infinity();
  for (int k = 0; k < K; ++k) gamma_lo = std::min(gamma_lo, sinr(stats, equal, k));
  if (!(gamma_lo > 0.0))
    throw std::runtime_error("max_min_sinr: degenerate statistics give zero SINR");
  if (!feasible(gamma_lo)) {
    // The witness proves feasibility; only numerical slack can contradict it.
    gamma_lo *= 0.99;
    if (!feasible(gamma_lo))
      throw std::runtime_error("max_min_sinr: lower bracket rejected by the feasibility test");
  }

  double gamma_hi = 10.0 * gamma_lo;
  int doublings = 0;
  while (feasible(gamma_hi)) {
    gamma_lo = gamma_hi;  // keep the bracket tight while growing
    gamma_hi *= 2.0;
    if (++doublings > 60) throw std::runtime_error("max_min_sinr: no finite upper bracket");
  }

  while (gamma_hi - gamma_lo > rel_tol * gamma_lo) {
    const double mid = 0.5 * (gamma_lo + gamma_hi);
    if (feasible(mid))
      gamma_lo = mid;
    else
      gamma_hi = mid;
  }
  if (solve_count) *solve_count = solves;
  return gamma_lo;
}

}  // namespace cfaso
