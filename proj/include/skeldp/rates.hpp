#pragma once

#include <cstdint>
#include <vector>

#include "skeldp/fbm.hpp"
#include "skeldp/skeleton.hpp"

namespace skeldp {

struct RatePoint {
  int k = 0;
  double epsilon = 0.0;
  double mean = 0.0;
  double std_err = 0.0;
  std::uint64_t n_paths = 0;
};

struct RateStudy {
  std::vector<RatePoint> points;
  double slope = 0.0;  // least-squares slope of log(mean) on log(epsilon)
};

double loglog_slope(const std::vector<RatePoint>& pts);

/// E|t - T_{e(k,t)}|^p for each k (epsilon = 2^-k).
RateStudy mesh_rates(int d, double chi, double t, double p, const std::vector<int>& ks, std::size_t n_paths,
                     std::uint64_t seed, unsigned workers = 1);

/// Strong error E max_{n <= e(k,T)} |X^k(T_n) - X(T_n)| for the driftless
/// geometric equation dX = sigma X dB in d = 1, where X(T_n) is the exact
/// solution x0 exp(sigma B(T_n) - sigma^2 T_n / 2) driven by the same
/// Brownian values the skeleton records.
RateStudy euler_rates(double x0, double sigma, double T, const std::vector<int>& ks, std::size_t n_paths,
                      std::uint64_t seed, unsigned workers = 1);

struct FbmMoments {
  double H = 0.0;
  int k = 0;
  std::vector<double> times;       // evaluation times
  std::vector<double> covariance;  // times.size()^2, row-major, sample (mean-zero) second moments
  std::uint64_t n_paths = 0;
};

/// Empirical second moments of B^k_H at the last skeleton time <= t, d = 1.
FbmMoments fbm_moments(double H, int k, const std::vector<double>& times, std::size_t n_paths, std::uint64_t seed,
                       unsigned workers = 1);

}  // namespace skeldp
