#include "skeldp/rates.hpp"

#include <algorithm>
#include <cmath>

#include "skeldp/errors.hpp"
#include "skeldp/parallel.hpp"

namespace skeldp {

double loglog_slope(const std::vector<RatePoint>& pts) {
  if (pts.size() < 2) throw std::invalid_argument("loglog_slope: need at least two points");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(pts.size());
  for (const auto& p : pts) {
    if (!(p.mean > 0.0)) throw NumericalError("loglog_slope: non-positive mean");
    const double x = std::log(p.epsilon), y = std::log(p.mean);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

RateStudy mesh_rates(int d, double chi, double t, double p, const std::vector<int>& ks, std::size_t n_paths,
                     std::uint64_t seed, unsigned workers) {
  RateStudy study;
  for (int k : ks) {
    SkeletonConfig cfg{d, std::ldexp(1.0, -k), t, chi, derive_seed(seed, static_cast<std::uint64_t>(k))};
    const MeanEstimate m = horizon_gap_stats(cfg, t, p, n_paths, workers);
    study.points.push_back({k, cfg.epsilon, m.mean, m.std_err, m.n});
  }
  study.slope = loglog_slope(study.points);
  return study;
}

RateStudy euler_rates(double x0, double sigma, double T, const std::vector<int>& ks, std::size_t n_paths,
                      std::uint64_t seed, unsigned workers) {
  RateStudy study;
  for (int k : ks) {
    SkeletonConfig cfg{1, std::ldexp(1.0, -k), T, 1.0, derive_seed(seed, static_cast<std::uint64_t>(k))};
    cfg.validate();
    const std::uint64_t m = cfg.steps();
    std::vector<double> err(n_paths);
    parallel_for(n_paths, workers, [&](std::size_t i) {
      Philox4x32 rng(cfg.seed, i);
      const SkeletonPath path = simulate_skeleton(cfg, m, rng);
      double x = x0, a = 0.0, worst = 0.0;
      for (std::size_t n = 0; n < m; ++n) {
        x *= 1.0 + sigma * path.increments[n];
        a += path.increments[n];
        const double exact = x0 * std::exp(sigma * a - 0.5 * sigma * sigma * path.times[n + 1]);
        worst = std::max(worst, std::abs(x - exact));
      }
      err[i] = worst;
    });
    const MeanEstimate e = summarize(err);
    study.points.push_back({k, cfg.epsilon, e.mean, e.std_err, e.n});
  }
  study.slope = loglog_slope(study.points);
  return study;
}

FbmMoments fbm_moments(double H, int k, const std::vector<double>& times, std::size_t n_paths, std::uint64_t seed,
                       unsigned workers) {
  if (times.empty()) throw ConfigError("times", "need at least one evaluation time");
  const FbmSpec spec{H, 1.0, 0.0};
  spec.validate();
  const double t_max = *std::max_element(times.begin(), times.end());
  const SkeletonConfig cfg{1, std::ldexp(1.0, -k), t_max, 1.0, seed};
  cfg.validate();
  const std::size_t nt = times.size();
  std::vector<double> values(n_paths * nt);
  parallel_for(n_paths, workers, [&](std::size_t i) {
    Philox4x32 rng(seed, i);
    const SkeletonPath path = simulate_until(cfg, t_max, rng);
    const std::vector<double> a = skeleton_coordinate(path, 0);
    for (std::size_t q = 0; q < nt; ++q) {
      // Index of the last skeleton time <= t.
      const auto it = std::upper_bound(path.times.begin(), path.times.end(), times[q]);
      const std::size_t n = static_cast<std::size_t>(it - path.times.begin()) - 1;
      values[i * nt + q] = fbm_at(spec, path.times, a, n);
    }
  });
  FbmMoments out;
  out.H = H;
  out.k = k;
  out.times = times;
  out.n_paths = n_paths;
  out.covariance.assign(nt * nt, 0.0);
  for (std::size_t i = 0; i < n_paths; ++i)
    for (std::size_t p = 0; p < nt; ++p)
      for (std::size_t q = 0; q < nt; ++q) out.covariance[p * nt + q] += values[i * nt + p] * values[i * nt + q];
  for (double& c : out.covariance) c /= static_cast<double>(n_paths);
  return out;
}

}  // namespace skeldp
