#include "skeldp/fbm.hpp"

#include <boost/math/special_functions/beta.hpp>
#include <cmath>

#include "skeldp/errors.hpp"

namespace skeldp {
namespace {

// Lower incomplete beta B_z(a, b) for a > 0 and -1 < b < 0, from the
// recurrence b B_z(a,b) = (a+b) B_z(a,b+1) - z^a (1-z)^b.
double incomplete_beta_neg_b(double a, double b, double z) {
  if (z <= 0.0) return 0.0;
  return ((a + b) * boost::math::beta(a, b + 1.0, z) - std::pow(z, a) * std::pow(1.0 - z, b)) / b;
}

void check_finite(double v, const char* what) {
  if (!std::isfinite(v)) throw NumericalError(std::string("non-finite fractional kernel value in ") + what);
}

}  // namespace

void FbmSpec::validate() const {
  if (!(H > 0.0 && H < 1.0)) throw ConfigError("H", "must lie in (0, 1)");
  if (H == 0.5) throw ConfigError("H", "H = 1/2 is ordinary Brownian motion; use an Euler structure");
  if (!std::isfinite(sigma)) throw ConfigError("sigma", "must be finite");
  if (constant < 0.0 || !std::isfinite(constant)) throw ConfigError("molchan_constant", "must be >= 0");
}

double FbmSpec::c() const { return constant > 0.0 ? constant : molchan_constant(H); }

double molchan_constant(double H) {
  if (H > 0.5) return std::sqrt(H * (2.0 * H - 1.0) / boost::math::beta(2.0 - 2.0 * H, H - 0.5));
  if (H < 0.5) return std::sqrt(2.0 * H / ((1.0 - 2.0 * H) * boost::math::beta(1.0 - 2.0 * H, H + 0.5)));
  throw ConfigError("H", "no fractional kernel at H = 1/2");
}

double fbm_kernel_high(double H, double c, double t, double s) {
  if (s <= 0.0 || s >= t) return 0.0;
  return c * std::pow(s, H - 0.5) * incomplete_beta_neg_b(H - 0.5, 1.0 - 2.0 * H, 1.0 - s / t);
}

double fbm_kernel_low1(double H, double c, double t, double s) {
  if (s <= 0.0) return 0.0;
  return c * std::pow(t, H - 0.5) * std::pow(s, 0.5 - H) * std::pow(t - s, H - 0.5);
}

double fbm_kernel_low2(double H, double c, double t, double s) {
  if (s >= t) return 0.0;
  return c * (0.5 - H) * std::pow(s, H - 0.5) * boost::math::betac(1.0 - 2.0 * H, H + 0.5, s / t);
}

double fbm_at(const FbmSpec& spec, std::span<const double> times, std::span<const double> a, std::size_t n) {
  if (times.size() != a.size()) throw std::invalid_argument("fbm_at: times and values differ in length");
  if (n >= times.size()) throw std::invalid_argument("fbm_at: step index out of range");
  if (n == 0) return 0.0;
  const double H = spec.H, c = spec.c(), t = times[n];
  double sum = 0.0;
  if (H > 0.5) {
    // sum_j A(T_{j-1}) int_{T_{j-1}}^{T_j} rho_H(t,s) ds, summed by parts.
    for (std::size_t i = 1; i < n; ++i) sum += fbm_kernel_high(H, c, t, times[i]) * (a[i] - a[i - 1]);
  } else {
    double k1_prev = 0.0;  // K1(t, T_0 = 0)
    for (std::size_t j = 1; j < n; ++j) {
      const double k1 = fbm_kernel_low1(H, c, t, times[j]);
      sum += (a[n] - a[j]) * (k1 - k1_prev);
      k1_prev = k1;
    }
    // The j = n bracket A(t) - A(T_n) vanishes and is skipped.
    double k2_prev = fbm_kernel_low2(H, c, t, times[1]);
    for (std::size_t j = 2; j <= n; ++j) {
      const double k2 = fbm_kernel_low2(H, c, t, times[j]);
      sum -= a[j - 1] * (k2 - k2_prev);
      k2_prev = k2;
    }
  }
  check_finite(sum, "fbm_at");
  return sum;
}

std::vector<double> fbm_path(const FbmSpec& spec, std::span<const double> times, std::span<const double> a) {
  spec.validate();
  std::vector<double> out(times.size(), 0.0);
  for (std::size_t n = 1; n < times.size(); ++n) out[n] = fbm_at(spec, times, a, n);
  return out;
}

std::vector<double> skeleton_coordinate(const SkeletonPath& path, int axis) {
  if (axis < 0 || axis >= path.dimension) throw std::invalid_argument("skeleton axis out of range");
  std::vector<double> a(path.size() + 1, 0.0);
  for (std::size_t n = 0; n < path.size(); ++n) a[n + 1] = a[n] + path.increments[n * path.dimension + axis];
  return a;
}

std::vector<double> fbm_high(const SkeletonPath& path, const FbmSpec& spec, int axis) {
  if (!(spec.H > 0.5)) throw ConfigError("H", "fbm_high needs H > 1/2");
  return fbm_path(spec, path.times, skeleton_coordinate(path, axis));
}

std::vector<double> fbm_low(const SkeletonPath& path, const FbmSpec& spec, int axis) {
  if (!(spec.H < 0.5)) throw ConfigError("H", "fbm_low needs H < 1/2");
  return fbm_path(spec, path.times, skeleton_coordinate(path, axis));
}

}  // namespace skeldp
