#include "skeldp/skeleton.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

#include "skeldp/distributions.hpp"
#include "skeldp/errors.hpp"
#include "skeldp/parallel.hpp"

namespace skeldp {

void SkeletonConfig::validate() const {
  if (dimension < 1) throw ConfigError("d", "must be >= 1");
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) throw ConfigError("epsilon", "must be positive");
  if (!(horizon > 0.0) || !std::isfinite(horizon)) throw ConfigError("T", "must be positive");
  const double lo = 1.0 / (2.0 * dimension);
  if (!(chi >= lo && chi <= 1.0))
    throw ConfigError("chi", "must lie in [1/(2d), 1], got " + std::to_string(chi));
}

std::uint64_t SkeletonConfig::steps() const { return e_steps(horizon, epsilon, chi); }

std::uint64_t e_steps(double t, double epsilon, double chi) {
  if (!(t >= 0.0)) throw ConfigError("t", "must be >= 0");
  if (!(epsilon > 0.0)) throw ConfigError("epsilon", "must be positive");
  if (!(chi > 0.0)) throw ConfigError("chi", "must be positive");
  return static_cast<std::uint64_t>(std::ceil(t / (epsilon * epsilon * chi)));
}

void append_skeleton_step(SkeletonPath& path, Philox4x32& rng) {
  const ExitTimeDist& tau = exit_time();
  const int d = path.dimension;
  const double eps = path.epsilon;
  double umin = std::numeric_limits<double>::infinity();
  int axis = 0;
  for (int j = 0; j < d; ++j) {
    const double u = tau.sample(rng);
    if (u < umin) {  // strict: ties keep the lowest index
      umin = u;
      axis = j;
    }
  }
  const double dt = eps * eps * umin;
  const double sign = uniform_open(rng) < 0.5 ? 1.0 : -1.0;
  for (int j = 0; j < d; ++j) {
    const double x = (j == axis) ? sign * eps : eps * truncated_normal_quantile(uniform_open(rng), umin, 1.0);
    path.increments.push_back(x);
  }
  path.delta_times.push_back(dt);
  path.exit_axis.push_back(axis);
  if (path.times.empty()) path.times.push_back(0.0);
  path.times.push_back(path.times.back() + dt);
}

namespace {
SkeletonPath empty_path(const SkeletonConfig& cfg, std::size_t reserve) {
  SkeletonPath p;
  p.dimension = cfg.dimension;
  p.epsilon = cfg.epsilon;
  p.delta_times.reserve(reserve);
  p.increments.reserve(reserve * cfg.dimension);
  p.exit_axis.reserve(reserve);
  p.times.reserve(reserve + 1);
  p.times.push_back(0.0);
  return p;
}
}  // namespace

SkeletonPath simulate_skeleton(const SkeletonConfig& cfg, std::size_t n_steps, Philox4x32& rng) {
  SkeletonPath p = empty_path(cfg, n_steps);
  for (std::size_t n = 0; n < n_steps; ++n) append_skeleton_step(p, rng);
  return p;
}

SkeletonPath simulate_until(const SkeletonConfig& cfg, double t_end, Philox4x32& rng) {
  const auto guess = static_cast<std::size_t>(t_end / (cfg.epsilon * cfg.epsilon * cfg.chi) * 1.2) + 8;
  SkeletonPath p = empty_path(cfg, guess);
  while (p.times.back() <= t_end) append_skeleton_step(p, rng);
  return p;
}

std::vector<SkeletonPath> simulate_batch(const SkeletonConfig& cfg, std::size_t n_steps, std::size_t n_paths,
                                         unsigned workers) {
  std::vector<SkeletonPath> out(n_paths);
  parallel_for(n_paths, workers, [&](std::size_t i) {
    Philox4x32 rng(cfg.seed, i);
    out[i] = simulate_skeleton(cfg, n_steps, rng);
  });
  return out;
}

std::span<const double> StepPath::value_at(double t) const {
  // Last jump time <= t.
  const auto it = std::upper_bound(times.begin(), times.end(), t);
  const std::size_t n = it == times.begin() ? 0 : static_cast<std::size_t>(it - times.begin()) - 1;
  return value(n);
}

StepPath reconstruct_Ak(const SkeletonPath& path) {
  StepPath a;
  a.dimension = path.dimension;
  a.times.assign(1, 0.0);
  a.values.assign(path.dimension, 0.0);
  const int d = path.dimension;
  for (std::size_t n = 0; n < path.size(); ++n) {
    a.times.push_back(a.times.back() + path.delta_times[n]);
    for (int j = 0; j < d; ++j) a.values.push_back(a.values[n * d + j] + path.increments[n * d + j]);
  }
  return a;
}

MeanEstimate summarize(std::span<const double> xs) {
  MeanEstimate r;
  r.n = xs.size();
  if (xs.empty()) return r;
  double mean = 0.0, m2 = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double delta = xs[i] - mean;
    mean += delta / static_cast<double>(i + 1);
    m2 += delta * (xs[i] - mean);
  }
  r.mean = mean;
  r.std_err = xs.size() > 1 ? std::sqrt(m2 / static_cast<double>(xs.size() - 1) / static_cast<double>(xs.size())) : 0.0;
  return r;
}

namespace {
// Runs `stat` on a fresh e(k,t)-step path per stream and summarises.
template <class Stat>
MeanEstimate per_path_stat(const SkeletonConfig& cfg, std::size_t n_steps, std::size_t n_paths, unsigned workers,
                           Stat&& stat) {
  std::vector<double> xs(n_paths);
  parallel_for(n_paths, workers, [&](std::size_t i) {
    Philox4x32 rng(cfg.seed, i);
    xs[i] = stat(simulate_skeleton(cfg, n_steps, rng));
  });
  return summarize(xs);
}
}  // namespace

MeanEstimate horizon_gap_stats(const SkeletonConfig& cfg, double t, double p, std::size_t n_paths, unsigned workers) {
  cfg.validate();
  if (t < 0.0) throw ConfigError("t", "must be >= 0");
  if (!(p >= 1.0)) throw ConfigError("p", "must be >= 1");
  const std::uint64_t e = e_steps(t, cfg.epsilon, cfg.chi);
  return per_path_stat(cfg, e, n_paths, workers,
                       [&](const SkeletonPath& path) { return std::pow(std::abs(t - path.times.back()), p); });
}

MeanEstimate horizon_time_stats(const SkeletonConfig& cfg, double t, std::size_t n_paths, unsigned workers) {
  cfg.validate();
  const std::uint64_t e = e_steps(t, cfg.epsilon, cfg.chi);
  return per_path_stat(cfg, e, n_paths, workers, [](const SkeletonPath& path) { return path.times.back(); });
}

MeanEstimate mean_max_step(const SkeletonConfig& cfg, std::size_t n_paths, unsigned workers) {
  cfg.validate();
  return per_path_stat(cfg, cfg.steps(), n_paths, workers, [](const SkeletonPath& path) {
    return path.delta_times.empty() ? 0.0 : *std::max_element(path.delta_times.begin(), path.delta_times.end());
  });
}

namespace {
constexpr char kMagic[4] = {'S', 'K', 'D', 'P'};
constexpr std::uint32_t kBatchVersion = 1;

template <class T>
void put(std::ofstream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <class T>
T get(std::ifstream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw std::runtime_error("truncated skeleton batch file");
  return v;
}
}  // namespace

void write_skeleton_batch(const std::string& file, const std::vector<SkeletonPath>& paths,
                          const std::string& config_text) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + file);
  const std::uint32_t d = paths.empty() ? 0 : static_cast<std::uint32_t>(paths.front().dimension);
  const double eps = paths.empty() ? 0.0 : paths.front().epsilon;
  const std::uint64_t n_steps = paths.empty() ? 0 : paths.front().size();
  for (const auto& p : paths)
    if (p.size() != n_steps || static_cast<std::uint32_t>(p.dimension) != d)
      throw std::invalid_argument("write_skeleton_batch: paths must share dimension and length");
  out.write(kMagic, 4);
  put(out, kBatchVersion);
  put(out, d);
  put(out, eps);
  put(out, n_steps);
  put(out, static_cast<std::uint64_t>(paths.size()));
  put(out, static_cast<std::uint32_t>(config_text.size()));
  out.write(config_text.data(), static_cast<std::streamsize>(config_text.size()));
  for (const auto& p : paths)
    for (std::size_t n = 0; n < n_steps; ++n) {
      put(out, p.delta_times[n]);
      for (std::uint32_t j = 0; j < d; ++j) put(out, p.increments[n * d + j]);
    }
  if (!out) throw std::runtime_error("write failed: " + file);
}

std::vector<SkeletonPath> read_skeleton_batch(const std::string& file, std::string* config_text) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open: " + file);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0) throw std::runtime_error("not a skeleton batch file: " + file);
  if (get<std::uint32_t>(in) != kBatchVersion) throw std::runtime_error("unsupported skeleton batch version");
  const auto d = get<std::uint32_t>(in);
  const auto eps = get<double>(in);
  const auto n_steps = get<std::uint64_t>(in);
  const auto n_paths = get<std::uint64_t>(in);
  std::string text(get<std::uint32_t>(in), '\0');
  in.read(text.data(), static_cast<std::streamsize>(text.size()));
  if (config_text) *config_text = text;
  std::vector<SkeletonPath> paths(n_paths);
  for (auto& p : paths) {
    p.dimension = static_cast<int>(d);
    p.epsilon = eps;
    p.times.push_back(0.0);
    for (std::uint64_t n = 0; n < n_steps; ++n) {
      const double dt = get<double>(in);
      p.delta_times.push_back(dt);
      p.times.push_back(p.times.back() + dt);
      int axis = 0;
      double best = -1.0;
      for (std::uint32_t j = 0; j < d; ++j) {
        const double x = get<double>(in);
        p.increments.push_back(x);
        if (std::abs(x) > best) {
          best = std::abs(x);
          axis = static_cast<int>(j);
        }
      }
      p.exit_axis.push_back(axis);
    }
  }
  return paths;
}

}  // namespace skeldp
