#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "skeldp/rng.hpp"

namespace skeldp {

/**
 * Law of the exit time tau of a standard Brownian motion from [-1, 1].
 *
 * For t >= switch_point the spectral series
 *   S(t) = (4/pi) sum_n (-1)^n/(2n+1) exp(-(2n+1)^2 pi^2 t / 8)
 * is used, below it the reflection series
 *   1 - S(t) = 4 sum_k (-1)^k Phi^c((2k+1)/sqrt(t)).
 * Both converge in a handful of terms at switch_point = 1.
 */
class ExitTimeDist {
 public:
  explicit ExitTimeDist(int series_terms = 20, double switch_point = 1.0);

  double survival(double t) const;
  double cdf(double t) const { return 1.0 - survival(t); }
  double density(double t) const;

  /// log P(tau > t) and log P(tau <= t) without cancellation in the tails.
  double log_survival(double t) const;
  double log_cdf(double t) const;

  /// Quantile by safeguarded Newton iteration; |t - t*| <= 1e-12 * max(1, t*).
  double quantile(double u) const;

  template <class Rng>
  double sample(Rng& rng) const {
    return quantile(uniform_open(rng));
  }

  int series_terms() const { return terms_; }
  double switch_point() const { return switch_; }

 private:
  double survival_large(double t) const;
  double cdf_small(double t) const;
  int terms_;
  double switch_;
};

/// Shared default instance (stateless, so safe across threads).
const ExitTimeDist& exit_time();

/// Inverse-CDF draw from N(0, variance) truncated to (-bound, bound).
double truncated_normal_quantile(double u, double variance, double bound);
double truncated_normal_cdf(double x, double variance, double bound);

template <class Rng>
double sample_nonexit_coordinate(double variance, double bound, Rng& rng) {
  return truncated_normal_quantile(uniform_open(rng), variance, bound);
}

/// Mass of the one-step skeleton law for d = 2:
/// P(dT in (a,b), exit on `exit_axis` (1|2) with sign `exit_sign`, other
/// coordinate in (y_lo, y_hi)) at grid scale epsilon. b may be +infinity.
double nu_mass_d2(double a, double b, int exit_sign, int exit_axis, double y_lo, double y_hi,
                  double epsilon);

/// E[eta_1^2] / epsilon^2 for one skeleton step in dimension d: the squared
/// increment of a fixed coordinate, averaged over exit and non-exit cases.
double increment_second_moment(int d);

struct ChiEstimate {
  double estimate = 0.0;
  double std_err = 0.0;
  std::uint64_t n_samples = 0;
};

/// Monte Carlo estimate of E min(tau^1..tau^d). Sample i uses stream i.
ChiEstimate estimate_chi(int d, std::uint64_t n_samples, std::uint64_t seed, unsigned workers = 1);

/// Exact chi_d by quadrature of S(t)^d; used as a cross-check only.
double chi_by_quadrature(int d);

struct ChiFixtureRow {
  int d = 0;
  ChiEstimate value;
};

class ChiTable {
 public:
  static ChiTable load(const std::string& path);
  /// Resolution order: explicit path, CHI_FIXTURE_PATH, compiled-in data dir.
  static ChiTable load_default(const std::string& override_path = "");
  static std::string default_path();

  bool has(int d) const;
  const ChiEstimate& at(int d) const;
  const std::vector<ChiFixtureRow>& rows() const { return rows_; }
  const std::string& source() const { return source_; }

 private:
  std::vector<ChiFixtureRow> rows_;
  std::string source_;
};

}  // namespace skeldp
