#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <string>

#include "skeldp.h"

namespace {

const char* kSignTree = R"({"kind": "sign_tree", "x0": 0.0, "gain": 0.5, "noise": 0.3,
  "action": {"r": 1, "a_bar": 1.0, "grid": 2},
  "payoff": {"type": "target_quadratic", "index": 0, "target": 0.7}})";

sk_dp_config sign_tree_config() {
  sk_dp_config c{};
  c.epsilon_k = 0.5;
  c.horizon = 0.5;
  c.chi = 1.0;
  c.seed = 11;
  c.n_paths = 4000;
  c.workers = 1;
  c.se_batches = 10;
  return c;
}

}  // namespace

TEST_CASE("status codes and error fields") {
  CHECK(std::string(sk_version()).size() > 0);
  double v = 0;
  CHECK(sk_exit_time_survival(1.0, &v) == SK_OK);
  CHECK(v == doctest::Approx(0.3707774298).epsilon(1e-9));
  CHECK(sk_exit_time_survival(-1.0, &v) == SK_ERR_INVALID_ARGUMENT);
  CHECK(std::strlen(sk_last_error()) > 0);
  CHECK(sk_exit_time_survival(1.0, nullptr) == SK_ERR_INVALID_ARGUMENT);

  uint64_t steps = 0;
  CHECK(sk_e_steps(1.0, 0.5, 0.5893571815, &steps) == SK_OK);
  CHECK(steps == 7);
  CHECK(sk_e_steps(1.0, 0.0, 1.0, &steps) == SK_ERR_INVALID_ARGUMENT);
  CHECK(std::string(sk_last_error_field()) == "epsilon");

  sk_estimate est{};
  CHECK(sk_chi_lookup("/nonexistent/chi.txt", 2, &est, nullptr, 0) == SK_ERR_IO);
}

TEST_CASE("freeing null handles is a no-op") {
  sk_skeleton_batch_free(nullptr);
  sk_model_free(nullptr);
  sk_solution_free(nullptr);
}

TEST_CASE("model creation reports the offending field") {
  sk_model* m = nullptr;
  CHECK(sk_model_create_json("{not json", &m) == SK_ERR_INVALID_ARGUMENT);
  CHECK(m == nullptr);
  CHECK(sk_model_create_json(R"({"kind": "sign_tree", "gain": 0.5, "noise": 0.3,
    "action": {"r": 1, "a_bar": 1.0, "grid": 0},
    "payoff": {"type": "target_quadratic", "index": 0, "target": 0.7}})", &m) == SK_ERR_INVALID_ARGUMENT);
  CHECK(std::string(sk_last_error_field()).find("grid") != std::string::npos);
}

TEST_CASE("solve the sign tree through the C interface") {
  sk_model* m = nullptr;
  REQUIRE(sk_model_create_json(kSignTree, &m) == SK_OK);
  const sk_dp_config cfg = sign_tree_config();
  sk_solution* s = nullptr;
  REQUIRE(sk_solve(m, &cfg, &s) == SK_OK);
  sk_estimate v0{};
  uint64_t steps = 0, action = 0;
  REQUIRE(sk_solution_value(s, &v0, &steps, &action) == SK_OK);
  CHECK(steps == 2);
  CHECK(action == 1);
  CHECK(std::abs(v0.mean + 0.17) < 4 * v0.std_err);
  sk_estimate pv{};
  REQUIRE(sk_solution_evaluate(s, m, &cfg, 4000, &pv) == SK_OK);
  CHECK(std::abs(pv.mean + 0.17) < 4 * pv.std_err);

  sk_dp_config bad = cfg;
  bad.n_paths = 1;
  sk_solution* none = nullptr;
  CHECK(sk_solve(m, &bad, &none) == SK_ERR_INVALID_ARGUMENT);
  CHECK(std::string(sk_last_error_field()) == "n_paths");
  CHECK(sk_solution_write_policy(s, "/nonexistent/dir/policy.txt", nullptr) == SK_ERR_IO);
  sk_solution_free(s);
  sk_model_free(m);
}

TEST_CASE("hedge defaults and closed-form price") {
  sk_hedge_spec spec;
  sk_hedge_spec_default(&spec);
  CHECK(spec.s1_0 == 49.0);
  CHECK(spec.s2_0 == 52.0);
  CHECK(spec.k == 1);
  double p = 0;
  REQUIRE(sk_margrabe_price(&spec, &p) == SK_OK);
  CHECK(p == doctest::Approx(5.821608).epsilon(2e-6));
  spec.denominator = 7;
  CHECK(sk_hedge_run(&spec, nullptr) == SK_ERR_INVALID_ARGUMENT);
}

TEST_CASE("skeleton batches through handles") {
  sk_skeleton_config c{};
  c.dimension = 2;
  c.epsilon = 0.5;
  c.horizon = 1.0;
  c.chi = 0.5893571815;
  c.seed = 3;
  sk_skeleton_batch* b = nullptr;
  REQUIRE(sk_skeleton_batch_simulate(&c, 5, 4, 1, &b) == SK_OK);
  uint64_t n = 0, steps = 0;
  int d = 0;
  REQUIRE(sk_skeleton_batch_shape(b, &n, &steps, &d) == SK_OK);
  CHECK(n == 4);
  CHECK(steps == 5);
  CHECK(d == 2);
  const double* dt = nullptr;
  const double* eta = nullptr;
  REQUIRE(sk_skeleton_batch_path(b, 3, &dt, &eta) == SK_OK);
  CHECK(dt[0] > 0.0);
  CHECK(std::abs(eta[0]) <= 0.5 + 1e-12);
  CHECK(sk_skeleton_batch_path(b, 4, &dt, &eta) == SK_ERR_INVALID_ARGUMENT);
  sk_skeleton_batch_free(b);
}
