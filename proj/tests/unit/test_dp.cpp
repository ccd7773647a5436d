#include <doctest.h>

#include <cmath>
#include <sstream>

#include "skeldp/dp.hpp"
#include "skeldp/errors.hpp"
#include "skeldp/models.hpp"

using namespace skeldp;

namespace {

Model sign_tree(double target, int grid) {
  return make_model_from_json(R"({"kind": "sign_tree", "x0": 0.0, "gain": 0.5, "noise": 0.3,
    "action": {"r": 1, "a_bar": 1.0, "grid": )" + std::to_string(grid) + R"(},
    "payoff": {"type": "target_quadratic", "index": 0, "target": )" + std::to_string(target) + "}}");
}

// Exhaustive two-step value of the sign tree (fair signs).
double enumerate(double target, const std::vector<double>& acts) {
  double best0 = -INFINITY;
  for (double a0 : acts) {
    double v0 = 0.0;
    for (double s1 : {-1.0, 1.0}) {
      double best1 = -INFINITY;
      for (double a1 : acts) {
        double v1 = 0.0;
        for (double s2 : {-1.0, 1.0}) {
          const double x = 0.5 * a0 + 0.3 * s1 + 0.5 * a1 + 0.3 * s2;
          v1 -= 0.5 * (x - target) * (x - target);
        }
        best1 = std::max(best1, v1);
      }
      v0 += 0.5 * best1;
    }
    best0 = std::max(best0, v0);
  }
  return best0;
}

DpConfig config(double horizon, std::size_t n_paths, std::uint64_t seed) {
  DpConfig cfg;
  cfg.epsilon_k = 0.5;
  cfg.horizon = horizon;  // e = horizon / 0.25 steps
  cfg.chi = 1.0;
  cfg.seed = seed;
  cfg.n_paths = n_paths;
  return cfg;
}

}  // namespace

TEST_CASE("action selection prefers the lexicographically largest near-maximiser") {
  const std::vector<double> u = {1.0, 3.0, 2.0, 3.0};
  CHECK(select_action(u, 0.0) == 3);
  const std::vector<double> v = {1.0, 3.0, 2.95, 2.0};
  CHECK(select_action(v, 0.0) == 1);
  CHECK(select_action(v, 0.1) == 2);
  CHECK(select_action(v, 2.0) == 3);
  const std::vector<double> bad = {1.0, NAN};
  CHECK_THROWS_AS(select_action(bad, 0.0), NumericalError);
  CHECK(step_tolerance(0.1, 4) == doctest::Approx(0.025));
  CHECK_THROWS(step_tolerance(0.1, 0));
}

TEST_CASE("least squares recovers exact coefficients and regularises singular designs") {
  const std::size_t n = 50;
  std::vector<double> x(n * 3), y(n * 2);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / n;
    x[i * 3 + 0] = 1.0;
    x[i * 3 + 1] = t;
    x[i * 3 + 2] = t * t;
    y[i * 2 + 0] = 2.0 - 3.0 * t + 0.5 * t * t;
    y[i * 2 + 1] = -1.0 + t;
  }
  const RegressionFit fit = least_squares(x, n, 3, y, 2, 0.0);
  CHECK(fit.escalations == 0);
  CHECK(fit.coef[0] == doctest::Approx(2.0).epsilon(1e-9));
  CHECK(fit.coef[1] == doctest::Approx(-3.0).epsilon(1e-9));
  CHECK(fit.coef[2] == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(fit.coef[3] == doctest::Approx(-1.0).epsilon(1e-9));
  CHECK(fit.coef[4] == doctest::Approx(1.0).epsilon(1e-9));

  // Duplicate column: escalated ridge still reproduces the fitted values.
  for (std::size_t i = 0; i < n; ++i) x[i * 3 + 2] = x[i * 3 + 1];
  const RegressionFit ridge = least_squares(x, n, 3, y, 2, 0.0);
  CHECK(ridge.escalations >= 1);
  CHECK(ridge.coef[3] + (ridge.coef[4] + ridge.coef[5]) * 0.5 == doctest::Approx(-0.5).epsilon(1e-6));

  y[7] = NAN;
  CHECK_THROWS_AS(least_squares(x, n, 3, y, 2, 0.0), NumericalError);
}

TEST_CASE("one-step problem: argmax, value and epsilon budget") {
  const Model m = make_model_from_json(R"({"kind": "sign_tree", "x0": 0.0, "gain": 0.5, "noise": 0.3,
    "action": {"r": 1, "a_bar": 1.0, "grid": 5},
    "payoff": {"type": "target_quadratic", "index": 0, "target": 0.3}})");
  DpConfig cfg = config(0.25, 5000, 2);
  const DpSolution sol = backward_solve(*m.structure, m.payoff, m.actions, cfg);
  CHECK(sol.steps == 1);
  // U(a) = -(0.5 a - 0.3)^2 - 0.09 on the grid {-1, -0.5, 0, 0.5, 1}.
  CHECK(sol.v0_action == 3);
  CHECK(std::abs(sol.v0.mean - (-0.0925)) < 4 * sol.v0.std_err);
  const ValueEstimate pv = evaluate_policy(sol.policy, *m.structure, m.payoff, cfg, 5000);
  CHECK(std::abs(pv.mean - (-0.0925)) < 4 * pv.std_err);

  // The whole budget on a single step admits a = 1 (U = -0.13), the largest action.
  const Policy loose = extract_epsilon_policy(sol.policy.values, 0.1);
  StatePath empty;
  empty.values = {0.0};
  empty.times = {0.0};
  empty.action_dim = 1;
  CHECK(loose.choose(empty.view(0)) == 4);
  CHECK(extract_epsilon_policy(sol.policy.values, 0.01).choose(empty.view(0)) == 3);
  CHECK_THROWS_AS(extract_epsilon_policy(sol.policy.values, -1.0), ConfigError);
}

TEST_CASE("two-step sign tree matches exhaustive enumeration") {
  for (double target : {0.7, -0.2}) {
    CAPTURE(target);
    const Model m = sign_tree(target, 2);
    const DpConfig cfg = config(0.5, 8000, 13);
    const DpSolution sol = backward_solve(*m.structure, m.payoff, m.actions, cfg);
    const double exact = enumerate(target, {-1.0, 1.0});
    CHECK(sol.steps == 2);
    CHECK(std::abs(sol.v0.mean - exact) < 4 * sol.v0.std_err);
    const ValueEstimate pv = evaluate_policy(sol.policy, *m.structure, m.payoff, cfg, 8000);
    CHECK(std::abs(pv.mean - exact) < 4 * pv.std_err);
  }
}

TEST_CASE("sectioning SE is at least the naive SE on the sign tree") {
  const Model m = sign_tree(0.7, 2);
  DpConfig cfg = config(0.5, 4000, 3);
  const DpSolution a = backward_solve(*m.structure, m.payoff, m.actions, cfg);
  CHECK(a.v0.std_err > a.v0_naive_std_err);
  cfg.se_batches = 0;
  const DpSolution b = backward_solve(*m.structure, m.payoff, m.actions, cfg);
  CHECK(b.v0.std_err == a.v0_naive_std_err);
  CHECK(b.v0.mean == a.v0.mean);
}

TEST_CASE("solutions do not depend on the worker count") {
  const Model m = sign_tree(0.7, 3);
  DpConfig cfg = config(0.75, 3000, 8);
  const DpSolution a = backward_solve(*m.structure, m.payoff, m.actions, cfg);
  cfg.workers = 3;
  const DpSolution b = backward_solve(*m.structure, m.payoff, m.actions, cfg);
  CHECK(a.v0.mean == b.v0.mean);
  CHECK(a.v0.std_err == b.v0.std_err);
  CHECK(a.policy.values.steps[1].coef == b.policy.values.steps[1].coef);
}

TEST_CASE("policy text round trip") {
  const Model m = sign_tree(0.7, 3);
  const DpConfig cfg = config(0.75, 2000, 9);
  const DpSolution sol = backward_solve(*m.structure, m.payoff, m.actions, cfg);
  const Policy p = extract_epsilon_policy(sol.policy.values, 0.05);
  std::stringstream ss;
  write_policy(ss, p);
  const Policy back = read_policy(ss);
  CHECK(back.epsilon == p.epsilon);
  CHECK(back.values.basis == p.values.basis);
  CHECK(back.values.grid == p.values.grid);
  REQUIRE(back.horizon() == p.horizon());
  for (std::size_t j = 0; j < p.horizon(); ++j) {
    CHECK(back.values.steps[j].coef == p.values.steps[j].coef);
    CHECK(back.values.steps[j].active == p.values.steps[j].active);
    CHECK(back.values.steps[j].centers == p.values.steps[j].centers);
  }
  const ValueEstimate v1 = evaluate_policy(p, *m.structure, m.payoff, cfg, 500);
  const ValueEstimate v2 = evaluate_policy(back, *m.structure, m.payoff, cfg, 500);
  CHECK(v1.mean == v2.mean);

  std::stringstream bad("skeldp-policy 99\n");
  CHECK_THROWS(read_policy(bad));
}

TEST_CASE("configuration errors name their field") {
  const Model m = sign_tree(0.7, 2);
  DpConfig cfg = config(0.5, 1, 1);
  try {
    backward_solve(*m.structure, m.payoff, m.actions, cfg);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.field() == "n_paths");
  }
  cfg = config(0.5, 100, 1);
  cfg.chi = 1.5;
  CHECK_THROWS_AS(backward_solve(*m.structure, m.payoff, m.actions, cfg), ConfigError);
  CHECK_THROWS_AS(feature_basis_from_name("cubic"), ConfigError);
}
