#include <doctest.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <vector>

#include "oracles.hpp"
#include "skeldp/distributions.hpp"
#include "skeldp/errors.hpp"
#include "skeldp/skeleton.hpp"

using namespace skeldp;

namespace {

// Kolmogorov-Smirnov statistic of a sample against a continuous CDF.
template <class Cdf>
double ks_statistic(std::vector<double> xs, Cdf cdf) {
  std::sort(xs.begin(), xs.end());
  const double n = static_cast<double>(xs.size());
  double d = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double f = cdf(xs[i]);
    d = std::max({d, f - i / n, (i + 1) / n - f});
  }
  return d;
}

}  // namespace

TEST_CASE("exit-time survival matches both series") {
  const ExitTimeDist& dist = exit_time();
  CHECK(dist.survival(0.0) == 1.0);
  for (double t : {0.05, 0.2, 0.7, 1.0, 1.3, 3.0, 10.0}) {
    CAPTURE(t);
    CHECK(dist.survival(t) == doctest::Approx(oracle::exit_survival_spectral(t)).epsilon(1e-10));
    if (t <= 3.0) CHECK(dist.survival(t) == doctest::Approx(oracle::exit_survival_images(t)).epsilon(1e-10));
  }
  CHECK(dist.survival(1.0) == doctest::Approx(0.3707774298).epsilon(1e-9));
}

TEST_CASE("survival is monotone and the density is its derivative") {
  const ExitTimeDist& dist = exit_time();
  double prev = 1.0;
  for (double t = 0.01; t < 30.0; t *= 1.07) {
    const double s = dist.survival(t);
    CHECK(s <= prev);
    prev = s;
    const double f = dist.density(t);
    CHECK(f >= 0.0);
    CHECK(f <= 1.0);
    const double h = 1e-5 * std::max(t, 0.1);
    const double fd = t < 1.0 ? (oracle::exit_cdf_images(t + h) - oracle::exit_cdf_images(t - h)) / (2 * h)
                              : (oracle::exit_survival_spectral(t - h) - oracle::exit_survival_spectral(t + h)) / (2 * h);
    CHECK(f == doctest::Approx(fd).epsilon(1e-6));
  }
  CHECK(dist.survival(60.0) < 1e-30);
}

TEST_CASE("mean exit time is one") {
  const ExitTimeDist& dist = exit_time();
  const int n = 120000;
  const double h = 60.0 / n;
  double sum = 0.5 * (dist.survival(0.0) + dist.survival(60.0));
  for (int i = 1; i < n; ++i) sum += dist.survival(i * h);
  CHECK(sum * h == doctest::Approx(1.0).epsilon(1e-7));
}

TEST_CASE("quantile inverts the cdf and tails are stable") {
  const ExitTimeDist& dist = exit_time();
  for (double u : {1e-12, 1e-6, 0.01, 0.3, 0.5, 0.9, 0.999999, 1 - 1e-12}) {
    CAPTURE(u);
    const double t = dist.quantile(u);
    CHECK(std::isfinite(t));
    CHECK(dist.cdf(t) == doctest::Approx(u).epsilon(1e-9));
  }
  CHECK(std::exp(dist.log_survival(50.0)) == doctest::Approx(oracle::exit_survival_spectral(50.0)).epsilon(1e-10));
}

TEST_CASE("exit-time samples pass a Kolmogorov-Smirnov test") {
  Philox4x32 rng(2024, 0);
  std::vector<double> xs(20000);
  for (double& x : xs) x = exit_time().sample(rng);
  const double d = ks_statistic(xs, [](double t) { return 1.0 - oracle::exit_survival(t); });
  CHECK(d < 1.95 / std::sqrt(20000.0));  // 0.1% level
}

TEST_CASE("truncated normal quantile and samples") {
  for (double v : {0.05, 0.5, 4.0}) {
    for (double u : {1e-9, 0.1, 0.5, 0.77, 1 - 1e-9}) {
      const double x = truncated_normal_quantile(u, v, 1.0);
      CHECK(x > -1.0);
      CHECK(x < 1.0);
      CHECK(std::abs(oracle::truncated_normal_cdf(x, v, 1.0) - u) <= 1e-8 * std::min(u, 1 - u) + 1e-15);
      CHECK(std::abs(truncated_normal_cdf(x, v, 1.0) - u) <= 1e-8 * std::min(u, 1 - u) + 1e-15);
    }
    Philox4x32 rng(7, static_cast<std::uint64_t>(v * 100));
    std::vector<double> xs(20000);
    for (double& x : xs) x = sample_nonexit_coordinate(v, 1.0, rng);
    CHECK(ks_statistic(xs, [v](double x) { return oracle::truncated_normal_cdf(x, v, 1.0); }) <
          1.95 / std::sqrt(20000.0));
  }
}

TEST_CASE("chi_d by quadrature matches an independent rule") {
  CHECK(chi_by_quadrature(1) == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(chi_by_quadrature(2) == doctest::Approx(oracle::chi(2)).epsilon(1e-9));
  CHECK(chi_by_quadrature(2) == doctest::Approx(0.58937082625).epsilon(1e-9));
  CHECK(chi_by_quadrature(3) == doctest::Approx(oracle::chi(3)).epsilon(1e-9));
  for (int d = 1; d <= 6; ++d) {
    CHECK(chi_by_quadrature(d) >= 1.0 / (2 * d));
    CHECK(chi_by_quadrature(d) <= 1.0);
  }
}

TEST_CASE("Monte Carlo chi agrees with quadrature and is worker-independent") {
  const ChiEstimate a = estimate_chi(2, 200000, 5, 1);
  CHECK(std::abs(a.estimate - oracle::chi(2)) < 4 * a.std_err);
  const ChiEstimate b = estimate_chi(2, 200000, 5, 3);
  CHECK(a.estimate == b.estimate);
  CHECK(a.std_err == b.std_err);
  CHECK_THROWS_AS(estimate_chi(0, 10, 1), std::invalid_argument);
}

TEST_CASE("kernel nu for d = 2 has unit mass and the expected symmetries") {
  const double eps = 0.25, inf = INFINITY;
  double total = 0.0;
  for (int axis : {1, 2})
    for (int sign : {-1, 1}) total += nu_mass_d2(0.0, inf, sign, axis, -eps, eps, eps);
  CHECK(total == doctest::Approx(1.0).epsilon(1e-9));
  // Each (axis, sign) pair is equally likely.
  CHECK(nu_mass_d2(0.0, inf, 1, 1, -eps, eps, eps) == doctest::Approx(0.25).epsilon(1e-9));
  const double a = 0.3 * eps * eps, b = 0.9 * eps * eps;
  CHECK(nu_mass_d2(a, b, 1, 1, 0.1 * eps, 0.6 * eps, eps) ==
        doctest::Approx(nu_mass_d2(a, b, -1, 2, -0.6 * eps, -0.1 * eps, eps)).epsilon(1e-10));
  CHECK(nu_mass_d2(a, b, 1, 1, 0.0, eps, eps) ==
        doctest::Approx(0.5 * nu_mass_d2(a, b, 1, 1, -eps, eps, eps)).epsilon(1e-10));
  // Time marginal: P(dT <= a) = 1 - S(a / eps^2)^2.
  double below = 0.0;
  for (int axis : {1, 2})
    for (int sign : {-1, 1}) below += nu_mass_d2(0.0, a, sign, axis, -eps, eps, eps);
  const double s = oracle::exit_survival(a / (eps * eps));
  CHECK(below == doctest::Approx(1.0 - s * s).epsilon(1e-9));
  CHECK_THROWS_AS(nu_mass_d2(b, a, 1, 1, 0.0, eps, eps), std::invalid_argument);
  CHECK_THROWS_AS(nu_mass_d2(a, b, 0, 1, 0.0, eps, eps), std::invalid_argument);
  CHECK_THROWS_AS(nu_mass_d2(a, b, 1, 3, 0.0, eps, eps), std::invalid_argument);
}

TEST_CASE("increment second moment") {
  CHECK(increment_second_moment(1) == doctest::Approx(1.0).epsilon(1e-12));
  // Monte Carlo over skeleton steps.
  SkeletonConfig cfg{2, 1.0, 1.0, 0.589, 3};
  Philox4x32 rng(3, 0);
  const SkeletonPath p = simulate_skeleton(cfg, 200000, rng);
  std::vector<double> sq(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) sq[i] = p.increment(i)[0] * p.increment(i)[0];
  const MeanEstimate m = summarize(sq);
  CHECK(std::abs(m.mean - increment_second_moment(2)) < 4 * m.std_err);
}

TEST_CASE("chi fixture table parsing") {
  const auto file = std::filesystem::temp_directory_path() / "skeldp_chi_fixture_test.txt";
  {
    std::ofstream out(file);
    out << "# comment\n\n2 0.5893 0.0001 1000\n3 0.4497 0.0002 1000\n";
  }
  const ChiTable t = ChiTable::load(file.string());
  CHECK(t.has(2));
  CHECK_FALSE(t.has(1));
  CHECK(t.at(3).estimate == doctest::Approx(0.4497));
  CHECK(t.at(2).n_samples == 1000);
  CHECK_THROWS(t.at(5));
  {
    std::ofstream out(file);
    out << "2 abc\n";
  }
  CHECK_THROWS(ChiTable::load(file.string()));
  std::filesystem::remove(file);
  CHECK_THROWS(ChiTable::load("/nonexistent/chi.txt"));

  const ChiTable bundled = ChiTable::load_default();
  for (int d = 1; d <= 4; ++d) CHECK(bundled.has(d));
  CHECK(std::abs(bundled.at(2).estimate - oracle::chi(2)) < 4 * bundled.at(2).std_err);
}
