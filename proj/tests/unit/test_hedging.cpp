#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "skeldp/errors.hpp"
#include "skeldp/hedging.hpp"

using namespace skeldp;

TEST_CASE("exchange option price against lognormal Monte Carlo") {
  HedgeSpec spec;
  std::mt19937_64 gen(12345);
  std::normal_distribution<double> z;
  const int n = 400000;
  double sum = 0.0, sum2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double s1 = 49.0 * std::exp(0.2 * z(gen) - 0.02);
    const double s2 = 52.0 * std::exp(0.3 * z(gen) - 0.045);
    const double h = std::max(s1 - s2, 0.0);
    sum += h;
    sum2 += h * h;
  }
  const double mean = sum / n, se = std::sqrt((sum2 / n - mean * mean) / n);
  CHECK(std::abs(margrabe_price(spec) - mean) < 4 * se);
  CHECK(margrabe_price(spec) == doctest::Approx(5.821608).epsilon(2e-6));
}

TEST_CASE("exchange option parity and degenerate volatility") {
  HedgeSpec a;
  HedgeSpec b = a;
  std::swap(b.s1_0, b.s2_0);
  std::swap(b.sigma1, b.sigma2);
  // max(S1 - S2, 0) - max(S2 - S1, 0) = S1 - S2 and both assets are martingales.
  CHECK(margrabe_price(a) - margrabe_price(b) == doctest::Approx(a.s1_0 - a.s2_0).epsilon(1e-12));
  HedgeSpec flat;
  flat.sigma1 = flat.sigma2 = 0.0;
  flat.s1_0 = 55.0;
  CHECK(margrabe_price(flat) == doctest::Approx(3.0).epsilon(1e-12));
  flat.s1_0 = 45.0;
  CHECK(margrabe_price(flat) == 0.0);
}

TEST_CASE("hedge spec validation and step counts") {
  HedgeSpec s;
  s.k = 2;
  s.chi = 0.589;
  CHECK(s.epsilon() == 0.25);
  CHECK(s.steps() == 28);
  s.k = -1;
  CHECK_THROWS_AS(s.validate(), ConfigError);
  s.k = 1;
  s.s1_0 = -1;
  CHECK_THROWS_AS(s.validate(), ConfigError);
  CHECK_THROWS_AS(hedge_denominator_from_name("other"), ConfigError);
  CHECK(hedge_denominator_name(HedgeDenominator::Epsilon2) == "epsilon2");
}

TEST_CASE("analytic hedge reports consistent statistics") {
  HedgeSpec s;
  s.k = 1;
  s.n_mc = 3000;
  s.seed = 4;
  const HedgeResult r = solve_hedge_analytic(s);
  CHECK(r.steps == 7);
  CHECK(r.true_value == doctest::Approx(margrabe_price(s)));
  CHECK(r.mse == doctest::Approx(r.c_star.std_err * r.c_star.std_err));
  // E X = 0 under the martingale dynamics, so c* is close to the unhedged mean
  // and the hedge lowers the dispersion.
  CHECK(std::abs(r.c_star.mean - r.unhedged_mean) < 1.0);
  CHECK(r.mean_sq_error < 60.0);
  CHECK(r.policy.floored == 0);

  HedgeSpec again = s;
  again.workers = 3;
  CHECK(solve_hedge_analytic(again).c_star.mean == r.c_star.mean);
}

TEST_CASE("generic DP on the hedging structure runs and beats doing nothing") {
  HedgeSpec s;
  s.k = 1;
  s.n_mc = 2000;
  s.seed = 5;
  const HedgeGenericResult g = solve_hedge_generic(s, 3, std::nan(""));
  CHECK(g.c == doctest::Approx(margrabe_price(s)));
  CHECK(g.objective.mean > 0.0);
  const HedgeResult a = solve_hedge_analytic(s);
  const ValueEstimate analytic = hedge_objective_analytic(s, a.policy, g.c);
  CHECK(analytic.mean > 0.0);
  CHECK(g.dp.steps == 7);
}

TEST_CASE("table rows") {
  std::ostringstream out;
  write_table_header(out);
  HedgeResult r;
  r.c_star.mean = 5.9;
  r.mse = 0.0001;
  r.true_value = 5.8;
  write_table_row(out, 2, r);
  CHECK(out.str() == "k,result,mse,true_value,difference,pct_error\n2,5.9,0.0001,5.8,0.1,1.724137931\n");
}
