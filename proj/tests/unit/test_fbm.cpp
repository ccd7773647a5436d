#include <doctest.h>

#include <boost/math/quadrature/tanh_sinh.hpp>
#include <cmath>

#include "skeldp/errors.hpp"
#include "skeldp/fbm.hpp"

using namespace skeldp;

namespace {

double integrate(auto f, double a, double b) {
  boost::math::quadrature::tanh_sinh<double> q;
  return q.integrate(f, a, b);
}

// Kernel from its integral definition; tms = t - s is passed separately so
// that points next to the diagonal keep full precision.
double kernel_by_quadrature(double H, double t, double s, double tms) {
  const double c = molchan_constant(H);
  if (H > 0.5)
    return c * std::pow(s, 0.5 - H) *
           integrate([&](double v) { return std::pow(s + v, H - 0.5) * std::pow(v, H - 1.5); }, 0.0, tms);
  const double k1 = c * std::pow(t, H - 0.5) * std::pow(s, 0.5 - H) * std::pow(tms, H - 0.5);
  const double k2 = c * (0.5 - H) * std::pow(s, 0.5 - H) *
                    integrate([&](double v) { return std::pow(s + v, H - 1.5) * std::pow(v, H - 0.5); }, 0.0, tms);
  return k1 + k2;
}

double kernel_by_quadrature(double H, double t, double s) { return kernel_by_quadrature(H, t, s, t - s); }

}  // namespace

TEST_CASE("kernels agree with their integral definitions") {
  for (double H : {0.6, 0.7, 0.9}) {
    const double c = molchan_constant(H);
    for (auto [t, s] : {std::pair{1.0, 0.3}, {0.5, 0.01}, {2.0, 1.9}}) {
      CAPTURE(H);
      CAPTURE(s);
      CHECK(fbm_kernel_high(H, c, t, s) == doctest::Approx(kernel_by_quadrature(H, t, s)).epsilon(1e-8));
    }
    CHECK(fbm_kernel_high(H, c, 1.0, 1.0) == 0.0);
  }
  for (double H : {0.1, 0.3, 0.45}) {
    const double c = molchan_constant(H);
    for (auto [t, s] : {std::pair{1.0, 0.3}, {0.5, 0.01}, {2.0, 1.5}}) {
      CAPTURE(H);
      CAPTURE(s);
      CHECK(fbm_kernel_low1(H, c, t, s) + fbm_kernel_low2(H, c, t, s) ==
            doctest::Approx(kernel_by_quadrature(H, t, s)).epsilon(1e-8));
    }
    CHECK(fbm_kernel_low2(H, c, 1.0, 1.0) == 0.0);
  }
}

TEST_CASE("step integrals of the kernel derivative are kernel differences") {
  // d/dt K(t, s) = c (t/s)^{H-1/2} (t-s)^{H-3/2} for H > 1/2.
  const double H = 0.7, c = molchan_constant(H), s = 0.2, t1 = 0.5, t2 = 0.8;
  const double rho = integrate(
      [&](double u) { return c * std::pow(u / s, H - 0.5) * std::pow(u - s, H - 1.5); }, t1, t2);
  CHECK(fbm_kernel_high(H, c, t2, s) - fbm_kernel_high(H, c, t1, s) == doctest::Approx(rho).epsilon(1e-9));
}

TEST_CASE("normalisation gives Var B_H(t) = t^{2H}") {
  for (double H : {0.2, 0.3, 0.7, 0.8}) {
    const double t = 0.5;
    auto sq = [](double k) { return k * k; };
    // The omitted (0, 1e-20) piece is of order 1e-20^{2H}.
    const double var = integrate([&](double s) { return sq(kernel_by_quadrature(H, t, s)); }, 1e-20, 0.5 * t) +
                       integrate([&](double w) { return sq(kernel_by_quadrature(H, t, t - w, w)); }, 0.0, 0.5 * t);
    CAPTURE(H);
    CHECK(var == doctest::Approx(std::pow(t, 2 * H)).epsilon(1e-5));
  }
}

TEST_CASE("discrete FBM is linear in the driving path") {
  const std::vector<double> times = {0.0, 0.1, 0.25, 0.3, 0.55, 0.7};
  const std::vector<double> a = {0.0, 0.3, 0.1, -0.2, 0.4, 0.6};
  const std::vector<double> b = {0.0, -0.1, 0.2, 0.2, 0.0, -0.5};
  std::vector<double> ab(a.size()), zero(a.size(), 0.0);
  for (std::size_t i = 0; i < a.size(); ++i) ab[i] = 2.0 * a[i] - b[i];
  for (double H : {0.3, 0.7}) {
    const FbmSpec spec{H, 1.0, 0.0};
    for (std::size_t n = 0; n < times.size(); ++n) {
      CHECK(fbm_at(spec, times, zero, n) == 0.0);
      CHECK(fbm_at(spec, times, ab, n) ==
            doctest::Approx(2.0 * fbm_at(spec, times, a, n) - fbm_at(spec, times, b, n)).epsilon(1e-12));
    }
    CHECK(fbm_at(spec, times, a, 0) == 0.0);
    const auto path = fbm_path(spec, times, a);
    CHECK(path.size() == times.size());
    CHECK(path[4] == fbm_at(spec, times, a, 4));
  }
}

TEST_CASE("H > 1/2 operator uses strictly earlier increments") {
  // With one increment at the first step only, B(T_n) = K(T_n, T_1) (a_1 - a_0).
  const std::vector<double> times = {0.0, 0.2, 0.5, 0.9};
  const std::vector<double> a = {0.0, 1.0, 1.0, 1.0};
  const FbmSpec spec{0.7, 1.0, 0.0};
  const double c = molchan_constant(0.7);
  CHECK(fbm_at(spec, times, a, 3) == doctest::Approx(fbm_kernel_high(0.7, c, 0.9, 0.2)));
  CHECK(fbm_at(spec, times, a, 1) == 0.0);
}

TEST_CASE("spec validation") {
  CHECK_THROWS_AS((FbmSpec{0.5, 1.0, 0.0}.validate()), ConfigError);
  CHECK_THROWS_AS((FbmSpec{1.0, 1.0, 0.0}.validate()), ConfigError);
  CHECK_THROWS_AS((FbmSpec{0.0, 1.0, 0.0}.validate()), ConfigError);
  CHECK_NOTHROW((FbmSpec{0.3, 1.0, 0.0}.validate()));
  CHECK((FbmSpec{0.3, 1.0, 2.5}.c()) == 2.5);
}
