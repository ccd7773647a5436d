#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "skeldp/rng.hpp"

namespace skeldp {

struct SkeletonConfig {
  int dimension = 1;
  double epsilon = 0.5;
  double horizon = 1.0;
  double chi = 1.0;
  std::uint64_t seed = 0;

  /// Throws ConfigError on out-of-range fields.
  void validate() const;
  /// e(k, horizon).
  std::uint64_t steps() const;
};

/// ceil(t / (epsilon^2 * chi)).
std::uint64_t e_steps(double t, double epsilon, double chi);

/// One realisation of the skeleton: n steps of (waiting time, increment).
struct SkeletonPath {
  int dimension = 1;
  double epsilon = 0.0;
  std::vector<double> delta_times;  // n
  std::vector<double> increments;   // n * dimension, row-major
  std::vector<int> exit_axis;       // n, zero-based
  std::vector<double> times;        // n + 1, times[0] = 0

  std::size_t size() const { return delta_times.size(); }
  std::span<const double> increment(std::size_t step) const {
    return {increments.data() + step * dimension, static_cast<std::size_t>(dimension)};
  }
};

/// Appends one step to `path`.
void append_skeleton_step(SkeletonPath& path, Philox4x32& rng);

SkeletonPath simulate_skeleton(const SkeletonConfig& cfg, std::size_t n_steps, Philox4x32& rng);
/// Steps until the cumulative time strictly exceeds t_end.
SkeletonPath simulate_until(const SkeletonConfig& cfg, double t_end, Philox4x32& rng);

/// n_paths paths of n_steps each; path i draws from stream (cfg.seed, i).
std::vector<SkeletonPath> simulate_batch(const SkeletonConfig& cfg, std::size_t n_steps, std::size_t n_paths,
                                         unsigned workers = 1);

/// Right-continuous step path A^k: values[n] = sum of the first n increments.
struct StepPath {
  int dimension = 1;
  std::vector<double> times;   // jump times, times[0] = 0
  std::vector<double> values;  // (times.size()) * dimension

  std::span<const double> value_at(double t) const;
  std::span<const double> value(std::size_t n) const {
    return {values.data() + n * dimension, static_cast<std::size_t>(dimension)};
  }
};

StepPath reconstruct_Ak(const SkeletonPath& path);

struct MeanEstimate {
  double mean = 0.0;
  double std_err = 0.0;
  std::uint64_t n = 0;
};

/// Welford mean and standard error of a sample.
MeanEstimate summarize(std::span<const double> xs);

/// E|t - T_{e(k,t)}|^p.
MeanEstimate horizon_gap_stats(const SkeletonConfig& cfg, double t, double p, std::size_t n_paths,
                               unsigned workers = 1);
/// E T_{e(k,t)}.
MeanEstimate horizon_time_stats(const SkeletonConfig& cfg, double t, std::size_t n_paths, unsigned workers = 1);
/// E max_{n <= e(k,T)} dT_n.
MeanEstimate mean_max_step(const SkeletonConfig& cfg, std::size_t n_paths, unsigned workers = 1);

/// Binary batch dump: "SKDP", u32 version, u32 d, f64 epsilon, u64 n_steps,
/// u64 n_paths, u32 length + config text, then per path per step the
/// row-major f64 record (dt, eta_1..eta_d). Paths must share n_steps.
void write_skeleton_batch(const std::string& file, const std::vector<SkeletonPath>& paths,
                          const std::string& config_text);
std::vector<SkeletonPath> read_skeleton_batch(const std::string& file, std::string* config_text = nullptr);

}  // namespace skeldp
