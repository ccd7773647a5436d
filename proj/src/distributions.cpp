#include "skeldp/distributions.hpp"

#include <algorithm>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/erf.hpp>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>

#include "skeldp/errors.hpp"
#include "skeldp/parallel.hpp"

#ifndef SKELDP_DATA_DIR
#define SKELDP_DATA_DIR "data"
#endif

namespace skeldp {
namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kSqrt2 = std::numbers::sqrt2;
constexpr double kInvSqrt2Pi = 0.3989422804014327;
constexpr double kTailCutoff = 80.0;  // S(80) ~ 1e-43

// Upper tail of the standard normal.
inline double normal_sf(double x) { return 0.5 * std::erfc(x / kSqrt2); }

template <class F>
double integrate(F&& f, double a, double b, double tol = 1e-12) {
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, a, b, 15, tol);
}

// Variance of N(0, v) truncated to (-1, 1).
double truncated_unit_variance(double v) {
  if (v <= 0.0) return 0.0;
  const double s = std::sqrt(v);
  const double beta = 1.0 / s;
  const double mass = std::erf(beta / kSqrt2);
  if (mass <= 0.0) return 1.0 / 3.0;
  return v * (1.0 - 2.0 * beta * kInvSqrt2Pi * std::exp(-0.5 * beta * beta) / mass);
}

}  // namespace

ExitTimeDist::ExitTimeDist(int series_terms, double switch_point) : terms_(series_terms), switch_(switch_point) {
  if (series_terms < 1) throw ConfigError("series_terms", "must be positive");
  if (!(switch_point > 0.0)) throw ConfigError("switch_point", "must be positive");
}

double ExitTimeDist::survival_large(double t) const {
  const double c = kPi * kPi * t / 8.0;
  double sum = 0.0;
  for (int n = 0; n < terms_; ++n) {
    const double m = 2.0 * n + 1.0;
    const double term = std::exp(-m * m * c) / m;
    sum += (n % 2 == 0) ? term : -term;
    if (term < 1e-18 * std::abs(sum)) break;
  }
  return 4.0 / kPi * sum;
}

double ExitTimeDist::cdf_small(double t) const {
  const double rt = std::sqrt(t);
  double sum = 0.0;
  for (int k = 0; k < terms_; ++k) {
    const double term = normal_sf((2.0 * k + 1.0) / rt);
    sum += (k % 2 == 0) ? term : -term;
    if (term < 1e-18 * std::abs(sum) || term == 0.0) break;
  }
  return 4.0 * sum;
}

double ExitTimeDist::survival(double t) const {
  if (t <= 0.0) return 1.0;
  if (t >= switch_) return std::clamp(survival_large(t), 0.0, 1.0);
  return std::clamp(1.0 - cdf_small(t), 0.0, 1.0);
}

double ExitTimeDist::density(double t) const {
  if (t <= 0.0) return 0.0;
  double sum = 0.0;
  if (t >= switch_) {
    const double c = kPi * kPi * t / 8.0;
    for (int n = 0; n < terms_; ++n) {
      const double m = 2.0 * n + 1.0;
      const double term = m * std::exp(-m * m * c);
      sum += (n % 2 == 0) ? term : -term;
      if (term < 1e-18 * std::abs(sum)) break;
    }
    return std::max(0.0, kPi / 2.0 * sum);
  }
  const double rt = std::sqrt(t);
  for (int k = 0; k < terms_; ++k) {
    const double m = 2.0 * k + 1.0;
    const double z = m / rt;
    const double term = 2.0 * m * kInvSqrt2Pi * std::exp(-0.5 * z * z);
    sum += (k % 2 == 0) ? term : -term;
    if (term < 1e-18 * std::abs(sum) || term == 0.0) break;
  }
  return std::max(0.0, sum / (t * rt));
}

double ExitTimeDist::log_survival(double t) const {
  if (t <= 0.0) return 0.0;
  if (t < switch_) return std::log1p(-cdf_small(t));
  // Factor out the leading exponential so the far tail does not underflow.
  const double c = kPi * kPi * t / 8.0;
  double rel = 1.0;
  for (int n = 1; n < terms_; ++n) {
    const double m = 2.0 * n + 1.0;
    const double term = std::exp(-(m * m - 1.0) * c) / m;
    rel += (n % 2 == 0) ? term : -term;
    if (term < 1e-18) break;
  }
  return std::log(4.0 / kPi) - c + std::log(rel);
}

double ExitTimeDist::log_cdf(double t) const {
  if (t <= 0.0) return -std::numeric_limits<double>::infinity();
  if (t >= switch_) return std::log1p(-survival_large(t));
  return std::log(cdf_small(t));
}

double ExitTimeDist::quantile(double u) const {
  if (!(u > 0.0 && u < 1.0)) throw std::invalid_argument("quantile: u must lie in (0, 1)");
  // Work on log scale in whichever tail u sits in; g is increasing in t.
  const bool upper = u > 0.5;
  double target, t;
  if (upper) {
    const double q = 1.0 - u;
    target = std::log(q);
    t = std::max(8.0 / (kPi * kPi) * std::log(4.0 / (kPi * q)), 0.05);
  } else {
    target = std::log(u);
    const double z = kSqrt2 * boost::math::erfc_inv(u / 2.0);
    t = 1.0 / (z * z);
  }
  auto g = [&](double s) { return upper ? target - log_survival(s) : log_cdf(s) - target; };
  auto dg = [&](double s) {
    const double f = density(s);
    return upper ? f / survival(s) : f / cdf(s);
  };

  double lo = 0.0, hi = std::numeric_limits<double>::infinity();
  for (int it = 0; it < 200; ++it) {
    const double gv = g(t);
    if (gv == 0.0) return t;
    if (gv < 0.0)
      lo = t;
    else
      hi = t;
    const double slope = dg(t);
    double next = (slope > 0.0 && std::isfinite(slope)) ? t - gv / slope : std::numeric_limits<double>::quiet_NaN();
    if (!(next > lo && next < hi)) next = std::isfinite(hi) ? 0.5 * (lo + hi) : 2.0 * t;
    if (std::abs(next - t) <= 1e-13 * std::max(1.0, t)) return next;
    t = next;
  }
  throw NumericalError("exit-time quantile did not converge");
}

const ExitTimeDist& exit_time() {
  static const ExitTimeDist dist;
  return dist;
}

double truncated_normal_quantile(double u, double variance, double bound) {
  const double scale = std::sqrt(2.0 * variance);
  const double e = std::erf(bound / scale);
  double x = scale * boost::math::erf_inv((2.0 * u - 1.0) * e);
  const double inner = std::nextafter(bound, 0.0);
  return std::clamp(x, -inner, inner);
}

double truncated_normal_cdf(double x, double variance, double bound) {
  if (x <= -bound) return 0.0;
  if (x >= bound) return 1.0;
  const double scale = std::sqrt(2.0 * variance);
  const double e = std::erf(bound / scale);
  return 0.5 * (std::erf(x / scale) + e) / e;
}

double nu_mass_d2(double a, double b, int exit_sign, int exit_axis, double y_lo, double y_hi, double epsilon) {
  if (!(epsilon > 0.0)) throw std::invalid_argument("nu_mass_d2: epsilon must be positive");
  if (!(a >= 0.0 && b > a)) throw std::invalid_argument("nu_mass_d2: need 0 <= a < b");
  if (!(y_lo >= -epsilon && y_hi <= epsilon && y_lo < y_hi))
    throw std::invalid_argument("nu_mass_d2: need -eps <= y_lo < y_hi <= eps");
  if (exit_sign != 1 && exit_sign != -1) throw std::invalid_argument("nu_mass_d2: exit_sign must be +1 or -1");
  if (exit_axis != 1 && exit_axis != 2) throw std::invalid_argument("nu_mass_d2: exit_axis must be 1 or 2");

  const ExitTimeDist& tau = exit_time();
  const double e2 = epsilon * epsilon;
  const double lo = a / e2;
  const double hi = std::min(b / e2, kTailCutoff);
  if (lo >= hi) return 0.0;
  const double ylo = y_lo / epsilon, yhi = y_hi / epsilon;
  auto integrand = [&](double u) {
    if (u <= 0.0) return 0.0;
    const double s = std::sqrt(2.0 * u);
    const double e = std::erf(1.0 / s);
    const double tn = 0.5 * (std::erf(yhi / s) - std::erf(ylo / s)) / e;
    return 0.5 * tau.density(u) * tau.survival(u) * tn;
  };
  // The integrand is negligible below 1e-3 and peaks near 0.3; split there.
  double total = 0.0;
  const double knots[] = {0.0, 0.1, 0.5, 2.0, kTailCutoff};
  for (int i = 0; i + 1 < 5; ++i) {
    const double l = std::max(lo, knots[i]), r = std::min(hi, knots[i + 1]);
    if (l < r) total += integrate(integrand, l, r);
  }
  return total;
}

double increment_second_moment(int d) {
  if (d < 1) throw std::invalid_argument("increment_second_moment: d must be >= 1");
  if (d == 1) return 1.0;
  const ExitTimeDist& tau = exit_time();
  auto integrand = [&](double u) {
    return (d - 1) * tau.density(u) * std::pow(tau.survival(u), d - 1) * truncated_unit_variance(u);
  };
  return 1.0 / d + integrate(integrand, 0.0, 1.0) + integrate(integrand, 1.0, kTailCutoff);
}

ChiEstimate estimate_chi(int d, std::uint64_t n_samples, std::uint64_t seed, unsigned workers) {
  if (d < 1) throw ConfigError("d", "must be >= 1");
  if (n_samples < 2) throw ConfigError("n_samples", "must be >= 2");
  const ExitTimeDist& tau = exit_time();
  std::vector<double> draws(n_samples);
  parallel_for(n_samples, workers, [&](std::size_t i) {
    Philox4x32 rng(seed, i);
    double m = std::numeric_limits<double>::infinity();
    for (int j = 0; j < d; ++j) m = std::min(m, tau.sample(rng));
    draws[i] = m;
  });
  double mean = 0.0, m2 = 0.0;
  for (std::size_t i = 0; i < n_samples; ++i) {
    const double delta = draws[i] - mean;
    mean += delta / static_cast<double>(i + 1);
    m2 += delta * (draws[i] - mean);
  }
  const double var = m2 / static_cast<double>(n_samples - 1);
  return {mean, std::sqrt(var / static_cast<double>(n_samples)), n_samples};
}

double chi_by_quadrature(int d) {
  if (d < 1) throw std::invalid_argument("chi_by_quadrature: d must be >= 1");
  const ExitTimeDist& tau = exit_time();
  auto integrand = [&](double t) { return std::pow(tau.survival(t), d); };
  return integrate(integrand, 0.0, 1.0) + integrate(integrand, 1.0, kTailCutoff);
}

ChiTable ChiTable::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open chi fixture: " + path);
  ChiTable table;
  table.source_ = path;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream row(line);
    ChiFixtureRow r;
    if (!(row >> r.d >> r.value.estimate >> r.value.std_err >> r.value.n_samples))
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": expected 'd estimate std_err n_samples'");
    table.rows_.push_back(r);
  }
  if (table.rows_.empty()) throw std::runtime_error("chi fixture has no rows: " + path);
  return table;
}

std::string ChiTable::default_path() {
  if (const char* env = std::getenv("CHI_FIXTURE_PATH"); env && *env) return env;
  return std::string(SKELDP_DATA_DIR) + "/chi_fixture.txt";
}

ChiTable ChiTable::load_default(const std::string& override_path) {
  return load(override_path.empty() ? default_path() : override_path);
}

bool ChiTable::has(int d) const {
  return std::any_of(rows_.begin(), rows_.end(), [d](const ChiFixtureRow& r) { return r.d == d; });
}

const ChiEstimate& ChiTable::at(int d) const {
  for (const auto& r : rows_)
    if (r.d == d) return r.value;
  throw ConfigError("d", "no chi fixture entry for d=" + std::to_string(d) + " in " + source_);
}

}  // namespace skeldp
