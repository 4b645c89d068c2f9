#include "cfaso/conic.hpp"

#include <cmath>
#include <set>
#include <sstream>
#include <stdexcept>

namespace cfaso {

void ConicProgram::validate() const {
  if (num_vars < 1) throw std::invalid_argument("conic program: needs at least one variable");
  if (objective.size() != num_vars)
    throw std::invalid_argument("conic program: objective size does not match num_vars");
  if (!objective.allFinite()) throw std::invalid_argument("conic program: non-finite objective");
  std::set<int> seen;
  for (int i : nonnegative) {
    if (i < 0 || i >= num_vars)
      throw std::invalid_argument("conic program: nonnegative index out of range");
    if (!seen.insert(i).second)
      throw std::invalid_argument("conic program: duplicate nonnegative index");
  }
  if (nonnegative.empty() && cones.empty())
    throw std::invalid_argument("conic program: no constraints");
  for (const SocConstraint& c : cones) {
    if (c.A.rows() < 1) throw std::invalid_argument("conic program: empty cone");
    if (c.A.cols() != num_vars)
      throw std::invalid_argument("conic program: cone column count does not match num_vars");
    if (c.b.size() != c.A.rows())
      throw std::invalid_argument("conic program: cone offset size does not match rows");
    if (!c.A.allFinite() || !c.b.allFinite())
      throw std::invalid_argument("conic program: non-finite cone data");
  }
  if (!var_names.empty() && static_cast<int>(var_names.size()) != num_vars)
    throw std::invalid_argument("conic program: var_names size does not match num_vars");
}

std::string ConicProgram::debug_listing() const {
  std::ostringstream os;
  auto name = [&](int i) {
    if (i < static_cast<int>(var_names.size()) && !var_names[static_cast<std::size_t>(i)].empty())
      return var_names[static_cast<std::size_t>(i)];
    return "x" + std::to_string(i);
  };
  os << "conic program: " << num_vars << " vars, " << nonnegative.size() << " nonnegative, "
     << cones.size() << " cones\n";
  os << "min ";
  bool first = true;
  for (int i = 0; i < num_vars; ++i) {
    if (objective(i) == 0.0) continue;
    if (!first) os << " + ";
    os << objective(i) << "*" << name(i);
    first = false;
  }
  if (first) os << "0";
  os << "\n";
  if (!nonnegative.empty()) {
    os << "nonnegative:";
    for (int i : nonnegative) os << " " << name(i);
    os << "\n";
  }
  for (std::size_t j = 0; j < cones.size(); ++j) {
    const SocConstraint& c = cones[j];
    os << "cone " << j << " (dim " << c.A.rows() << "):\n";
    for (int r = 0; r < c.A.rows(); ++r) {
      os << "  [" << (r == 0 ? "head" : "norm") << "] ";
      bool any = false;
      for (int i = 0; i < num_vars; ++i) {
        if (c.A(r, i) == 0.0) continue;
        if (any) os << " + ";
        os << c.A(r, i) << "*" << name(i);
        any = true;
      }
      if (c.b(r) != 0.0 || !any) {
        if (any) os << " + ";
        os << c.b(r);
      }
      os << "\n";
    }
  }
  return os.str();
}

SocConstraint epigraph_quadratic(std::span<const int> u_vars, int t_var, int num_vars) {
  if (t_var < 0 || t_var >= num_vars)
    throw std::invalid_argument("epigraph_quadratic: epigraph variable out of range");
  for (int i : u_vars) {
    if (i < 0 || i >= num_vars)
      throw std::invalid_argument("epigraph_quadratic: variable index out of range");
    if (i == t_var)
      throw std::invalid_argument("epigraph_quadratic: epigraph variable cannot appear in the sum");
  }
  const int m = static_cast<int>(u_vars.size());
  SocConstraint c;
  c.A = Eigen::MatrixXd::Zero(m + 2, num_vars);
  c.b = Eigen::VectorXd::Zero(m + 2);
  c.A(0, t_var) = 1.0;
  c.b(0) = 1.0;
  for (int r = 0; r < m; ++r) c.A(r + 1, u_vars[static_cast<std::size_t>(r)]) = 2.0;
  c.A(m + 1, t_var) = 1.0;
  c.b(m + 1) = -1.0;
  return c;
}

const char* to_string(SolveStatus status) {
  switch (status) {
    case SolveStatus::Optimal: return "optimal";
    case SolveStatus::Infeasible: return "infeasible";
    case SolveStatus::MaxIterations: return "max-iterations";
    case SolveStatus::NumericalFailure: return "numerical-failure";
  }
  return "unknown";
}

}  // namespace cfaso
