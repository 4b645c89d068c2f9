#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "cfaso/conic.hpp"

using namespace cfaso;

namespace {

// One-row cone: a'x + b >= 0.
SocConstraint halfspace(int num_vars, const std::vector<std::pair<int, double>>& terms, double b) {
  SocConstraint c;
  c.A = Eigen::MatrixXd::Zero(1, num_vars);
  c.b = Eigen::VectorXd::Constant(1, b);
  for (auto [i, v] : terms) c.A(0, i) = v;
  return c;
}

}  // namespace

TEST_CASE("minimum of x over x >= 1 is attained at the bound") {
  ConicProgram p;
  p.num_vars = 1;
  p.objective = Eigen::VectorXd::Ones(1);
  p.cones.push_back(halfspace(1, {{0, 1.0}}, -1.0));  // x - 1 >= 0
  p.nonnegative = {0};
  auto r = solve_socp(p);
  REQUIRE(r.status == SolveStatus::Optimal);
  CHECK(r.x(0) == doctest::Approx(1.0).epsilon(1e-7));
  CHECK(r.objective == doctest::Approx(1.0).epsilon(1e-7));
}

TEST_CASE("norm bound with constant vector part: min t s.t. t >= ||(3,4)||") {
  ConicProgram p;
  p.num_vars = 1;
  p.objective = Eigen::VectorXd::Ones(1);
  SocConstraint cone;
  cone.A = Eigen::MatrixXd::Zero(3, 1);
  cone.A(0, 0) = 1.0;
  cone.b = Eigen::VectorXd::Zero(3);
  cone.b(1) = 3.0;
  cone.b(2) = 4.0;
  p.cones.push_back(cone);
  auto r = solve_socp(p);
  REQUIRE(r.status == SolveStatus::Optimal);
  CHECK(r.objective == doctest::Approx(5.0).epsilon(1e-7));
}

TEST_CASE("contradictory constraints are certified infeasible") {
  // x >= 1 together with 0 >= |x|.
  ConicProgram p;
  p.num_vars = 1;
  p.objective = Eigen::VectorXd::Zero(1);
  p.objective(0) = 1.0;
  p.cones.push_back(halfspace(1, {{0, 1.0}}, -1.0));
  SocConstraint zero_norm;
  zero_norm.A = Eigen::MatrixXd::Zero(2, 1);
  zero_norm.A(1, 0) = 1.0;
  zero_norm.b = Eigen::VectorXd::Zero(2);
  p.cones.push_back(zero_norm);
  auto r = solve_socp(p);
  CHECK(r.status == SolveStatus::Infeasible);
}

TEST_CASE("epigraph rows encode t >= sum of squares") {
  const std::vector<int> u = {0, 1};
  SocConstraint c = epigraph_quadratic(u, 2, 3);
  REQUIRE(c.A.rows() == 4);
  // at u = (1,2), t = 5 the cone is tight: (6, 2, 4, 4) has 6^2 = 36 = 4+16+16.
  Eigen::Vector3d x(1.0, 2.0, 5.0);
  Eigen::VectorXd v = c.A * x + c.b;
  CHECK(v(0) == doctest::Approx(6.0));
  CHECK(v(0) * v(0) == doctest::Approx(v.tail(3).squaredNorm()));

  // minimize t subject to t >= u1^2 + u2^2, u1 >= 1, u2 >= 2  ->  t = 5.
  ConicProgram p;
  p.num_vars = 3;
  p.objective = Eigen::VectorXd::Zero(3);
  p.objective(2) = 1.0;
  p.cones.push_back(c);
  p.cones.push_back(halfspace(3, {{0, 1.0}}, -1.0));
  p.cones.push_back(halfspace(3, {{1, 1.0}}, -2.0));
  auto r = solve_socp(p);
  REQUIRE(r.status == SolveStatus::Optimal);
  CHECK(r.objective == doctest::Approx(5.0).epsilon(1e-6));
  CHECK(r.x(0) == doctest::Approx(1.0).epsilon(1e-5));
  CHECK(r.x(1) == doctest::Approx(2.0).epsilon(1e-5));
}

TEST_CASE("epigraph builder rejects bad indices") {
  const std::vector<int> u = {0, 3};
  CHECK_THROWS(epigraph_quadratic(u, 2, 3));          // u index out of range
  const std::vector<int> v = {0, 1};
  CHECK_THROWS(epigraph_quadratic(v, 3, 3));          // t out of range
  const std::vector<int> wv = {0, 2};
  CHECK_THROWS(epigraph_quadratic(wv, 2, 3));         // t inside the sum
}

TEST_CASE("single-link power sizing has the closed-form optimum") {
  // min t  s.t.  t >= u^2,  g*b*u >= ||(sqrt(C) u, sigma)||,  sqrt(P) >= |u|
  // with g^2 = (1+gamma)/gamma. Optimal radiated power: sigma^2/(g^2 b^2 - C).
  auto build = [](double bq, double Cq, double sigma2, double gamma, double pmax) {
    ConicProgram p;
    p.num_vars = 2;  // u, t
    p.objective = Eigen::VectorXd::Zero(2);
    p.objective(1) = 1.0;
    p.nonnegative = {0};
    const std::vector<int> uvars = {0};
    p.cones.push_back(epigraph_quadratic(uvars, 1, 2));
    SocConstraint sinr;
    sinr.A = Eigen::MatrixXd::Zero(3, 2);
    sinr.A(0, 0) = std::sqrt((1.0 + gamma) / gamma) * bq;
    sinr.A(1, 0) = std::sqrt(Cq);
    sinr.b = Eigen::VectorXd::Zero(3);
    sinr.b(2) = std::sqrt(sigma2);
    p.cones.push_back(sinr);
    SocConstraint cap;
    cap.A = Eigen::MatrixXd::Zero(2, 2);
    cap.A(1, 0) = 1.0;
    cap.b = Eigen::VectorXd::Zero(2);
    cap.b(0) = std::sqrt(pmax);
    p.cones.push_back(cap);
    return p;
  };

  SUBCASE("order-one data") {
    auto r = solve_socp(build(1.0, 1.0, 1.0, 1.0, 4.0));
    REQUIRE(r.status == SolveStatus::Optimal);
    CHECK(r.objective == doctest::Approx(1.0).epsilon(1e-6));
  }
  SUBCASE("radio-scale data") {
    // b ~ 1e-5, C ~ 1e-10, sigma^2 ~ 4e-13: the scales this solver must digest.
    const double b = 2.3e-5, C = 4.1e-10, s2 = 3.981e-13, gamma = 1.0;
    const double expect = s2 / (2.0 * b * b - C);
    auto r = solve_socp(build(b, C, s2, gamma, 1.0));
    REQUIRE(r.status == SolveStatus::Optimal);
    CHECK(r.objective == doctest::Approx(expect).epsilon(1e-6));
  }
  SUBCASE("power cap makes the target unreachable") {
    // needs rho = 1 but cap is 0.25 -> infeasible.
    auto r = solve_socp(build(1.0, 1.0, 1.0, 1.0, 0.25));
    CHECK(r.status == SolveStatus::Infeasible);
  }
}

TEST_CASE("random bounded programs match a grid oracle in two variables") {
  std::mt19937 rng(41);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  const double box = 2.0;
  int solved = 0;
  for (int trial = 0; trial < 25; ++trial) {
    ConicProgram p;
    p.num_vars = 2;
    p.objective = Eigen::VectorXd::NullaryExpr(2, [&](Eigen::Index) { return unif(rng); });
    // box 0 <= x <= box via nonnegativity and one-row cones
    p.nonnegative = {0, 1};
    p.cones.push_back(halfspace(2, {{0, -1.0}}, box));
    p.cones.push_back(halfspace(2, {{1, -1.0}}, box));
    // two random cones containing the point x0 = (1,1) strictly
    Eigen::Vector2d x0(1.0, 1.0);
    for (int j = 0; j < 2; ++j) {
      SocConstraint c;
      c.A = Eigen::MatrixXd::NullaryExpr(3, 2, [&](Eigen::Index, Eigen::Index) { return unif(rng); });
      Eigen::Vector3d y;
      y(1) = unif(rng);
      y(2) = unif(rng);
      y(0) = y.tail(2).norm() + 0.5;
      c.b = y - c.A * x0;
      p.cones.push_back(c);
    }
    auto r = solve_socp(p);
    REQUIRE(r.status == SolveStatus::Optimal);
    REQUIRE(r.residuals.primal <= 1e-7);
    REQUIRE(r.residuals.dual <= 1e-7);

    // brute-force feasibility scan
    const int steps = 400;
    double best = 1e300;
    for (int a = 0; a <= steps; ++a) {
      for (int bgrid = 0; bgrid <= steps; ++bgrid) {
        Eigen::Vector2d xg(box * a / steps, box * bgrid / steps);
        bool ok = true;
        for (const auto& c : p.cones) {
          Eigen::VectorXd v = c.A * xg + c.b;
          if (v(0) < v.tail(v.size() - 1).norm()) { ok = false; break; }
        }
        if (ok) best = std::min(best, p.objective.dot(xg));
      }
    }
    REQUIRE(best < 1e299);  // x0 is feasible, so the scan must find something
    CHECK(r.objective <= best + 1e-6);           // solver at least as good as the grid
    CHECK(r.objective >= best - 0.05);           // and not better than a grid refinement allows
    ++solved;
  }
  CHECK(solved == 25);
}

TEST_CASE("iteration cap is reported honestly") {
  ConicProgram p;
  p.num_vars = 1;
  p.objective = Eigen::VectorXd::Ones(1);
  p.cones.push_back(halfspace(1, {{0, 1.0}}, -1.0));
  p.nonnegative = {0};
  SolverOptions opts;
  opts.max_iterations = 1;
  auto r = solve_socp(p, opts);
  CHECK(r.status != SolveStatus::Optimal);
}

TEST_CASE("malformed programs are rejected before solving") {
  ConicProgram p;
  CHECK_THROWS(p.validate());  // no variables

  p.num_vars = 2;
  p.objective = Eigen::VectorXd::Zero(1);  // wrong size
  p.nonnegative = {0};
  CHECK_THROWS(p.validate());

  p.objective = Eigen::VectorXd::Zero(2);
  p.nonnegative = {5};
  CHECK_THROWS(p.validate());

  p.nonnegative = {0};
  SocConstraint c;
  c.A = Eigen::MatrixXd::Zero(2, 3);  // wrong column count
  c.b = Eigen::VectorXd::Zero(2);
  p.cones.push_back(c);
  CHECK_THROWS(p.validate());

  p.cones.clear();
  p.nonnegative.clear();
  CHECK_THROWS(p.validate());  // unconstrained
}

TEST_CASE("debug listing names the pieces") {
  ConicProgram p;
  p.num_vars = 2;
  p.objective = Eigen::VectorXd::Zero(2);
  p.objective(1) = 3.0;
  p.nonnegative = {0};
  p.var_names = {"power", "bound"};
  const std::vector<int> uvars = {0};
  p.cones.push_back(epigraph_quadratic(uvars, 1, 2));
  const std::string text = p.debug_listing();
  CHECK(text.find("power") != std::string::npos);
  CHECK(text.find("bound") != std::string::npos);
  CHECK(text.find("cone 0") != std::string::npos);
  CHECK(text.find("3*bound") != std::string::npos);
}
