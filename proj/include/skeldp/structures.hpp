#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "skeldp/fbm.hpp"
#include "skeldp/skeleton.hpp"

namespace skeldp {

/// Box [-a_bar, a_bar]^r with a tensor grid used by the DP.
struct ActionSpace {
  int r = 1;
  double a_bar = 1.0;
  int grid_points_per_axis = 2;

  void validate() const;
  /// All grid actions, lexicographically ascending, flattened (size * r).
  std::vector<double> grid() const;
  std::size_t grid_size() const;
  bool contains(std::span<const double> a) const;
};

/// Path-dependent noise computed once per skeleton path, independent of the
/// control: per-step driver increments plus optional auxiliary state (e.g. the
/// volatility factor) observed at every skeleton time.
struct DriverPath {
  std::size_t steps = 0;
  std::vector<double> times;  // steps + 1
  int width = 0;
  std::vector<double> increments;  // steps * width
  int aux_width = 0;
  std::vector<double> aux;  // (steps + 1) * aux_width

  std::span<const double> increment(std::size_t q) const {  // q >= 1
    return {increments.data() + (q - 1) * width, static_cast<std::size_t>(width)};
  }
  std::span<const double> aux_at(std::size_t j) const {
    return {aux.data() + j * aux_width, static_cast<std::size_t>(aux_width)};
  }
};

/// The state path up to and including step j, as seen by coefficients.
struct PathPrefix {
  std::size_t step = 0;
  double time = 0.0;
  int state_dim = 1;
  std::span<const double> states;  // (step + 1) * state_dim
  std::span<const double> aux;     // auxiliary state at T_step

  std::span<const double> current() const { return states.subspan(step * state_dim, state_dim); }
  double x(int i = 0) const { return states[step * state_dim + i]; }
};

struct StepInput {
  PathPrefix prefix;                   // history through T_{q-1}
  double dt = 0.0;                     // dT_q
  std::span<const double> increment;   // driver increment at q
  std::span<const double> action;      // a_{q-1}
};

/**
 * A controlled imbedded discrete structure: the control enters step q only
 * through a_{q-1}, so the resulting path is non-anticipative by construction.
 */
class Structure {
 public:
  using PrepareFn = std::function<DriverPath(const SkeletonPath&)>;
  using StepFn = std::function<void(const StepInput&, std::span<double> next)>;

  Structure(std::string name, std::vector<double> x0, int action_dim, int skeleton_dim, PrepareFn prepare,
            StepFn step, std::vector<std::string> aux_names = {});

  const std::string& name() const { return name_; }
  int state_dim() const { return static_cast<int>(x0_.size()); }
  int action_dim() const { return action_dim_; }
  int skeleton_dim() const { return skeleton_dim_; }
  const std::vector<double>& x0() const { return x0_; }
  const std::vector<std::string>& aux_names() const { return aux_names_; }

  DriverPath prepare(const SkeletonPath& path) const;
  void step(const StepInput& in, std::span<double> next) const { step_(in, next); }

 private:
  std::string name_;
  std::vector<double> x0_;
  int action_dim_;
  int skeleton_dim_;
  PrepareFn prepare_;
  StepFn step_;
  std::vector<std::string> aux_names_;
};

/// Read-only view of a (possibly partial) state path.
struct StatePathView {
  std::size_t last = 0;  // index of the most recent state
  int state_dim = 1;
  std::span<const double> values;   // (last + 1) * state_dim
  std::span<const double> times;    // last + 1
  int aux_width = 0;
  std::span<const double> aux;      // (last + 1) * aux_width
  std::span<const double> actions;  // last * action_dim
  int action_dim = 0;

  std::span<const double> state(std::size_t j) const { return values.subspan(j * state_dim, state_dim); }
  std::span<const double> terminal() const { return state(last); }
};

struct StatePath {
  int state_dim = 1;
  std::size_t stop_index = 0;
  std::vector<double> values;  // (n + 1) * state_dim
  std::vector<double> times;   // n + 1
  int aux_width = 0;
  std::vector<double> aux;
  int action_dim = 0;
  std::vector<double> actions;

  std::size_t size() const { return times.size(); }
  std::span<const double> state(std::size_t j) const {
    return {values.data() + j * state_dim, static_cast<std::size_t>(state_dim)};
  }
  StatePathView view() const;
  /// View truncated at step j.
  StatePathView view(std::size_t j) const;
};

/// Incremental evaluation, used by the DP to interleave policy and dynamics.
class StructureRun {
 public:
  StructureRun(const Structure& s, const SkeletonPath& path, std::size_t stop);
  /// Advances one step with action a_{current}. Past `stop` the state freezes.
  void advance(std::span<const double> action);
  std::size_t current() const { return j_; }
  std::size_t stop() const { return stop_; }
  PathPrefix prefix() const;
  StatePathView view() const;
  const DriverPath& driver() const { return driver_; }
  StatePath take() &&;

 private:
  const Structure& s_;
  DriverPath driver_;
  std::size_t stop_;
  std::size_t j_ = 0;
  StatePath path_;
};

/// Runs every skeleton step. actions holds at least stop * r entries; the
/// state is frozen after step `stop`.
StatePath evolve(const Structure& s, const SkeletonPath& path, std::span<const double> actions, std::size_t stop);

/// Plain skeleton increments as the driver.
DriverPath skeleton_driver(const SkeletonPath& path);

/// Callable coefficient: (path prefix, action) -> values.
using VectorCoefficient = std::function<void(const PathPrefix&, std::span<const double> action, std::span<double> out)>;

struct SdeCoefficients {
  std::vector<double> x0;
  int d = 1;  // Brownian dimension
  int r = 1;  // action dimension
  VectorCoefficient drift;      // out has n entries
  VectorCoefficient diffusion;  // out has n * d entries, row-major
};

/// X_q = X_{q-1} + alpha dT_q + sigma dA_q.
Structure make_euler_structure(const SdeCoefficients& coeffs, std::string name = "euler_sde");
StatePath euler_pd_sde(const SdeCoefficients& coeffs, const SkeletonPath& path, std::span<const double> actions,
                       std::size_t stop);

/// Scalar X_q = X_{q-1} + alpha dT_q + sigma dB_H; driver is the discrete FBM
/// built on skeleton axis 0.
Structure make_fbm_sde_structure(const FbmSpec& spec, double x0, int r, VectorCoefficient drift,
                                 std::string name = "fbm_sde");
StatePath fbm_drift_sde(const FbmSpec& spec, double x0, int r, VectorCoefficient drift, const SkeletonPath& path,
                        std::span<const double> actions, std::size_t stop);

using ScalarControlFn = std::function<double(double z, std::span<const double> action)>;

struct RoughVolSpec {
  double H = 0.1;
  double nu = 1.0;
  double beta = 1.0;
  double m = 0.0;
  double z0 = 0.0;
  double rho = 0.0;
  double x0 = 1.0;
  int r = 1;
  ScalarControlFn mu;        // drift rate mu(z, a)
  ScalarControlFn vartheta;  // volatility vartheta(z, a), bounded by contract

  void validate() const;
};

/// Z^k at the skeleton times of a d = 2 path.
std::vector<double> rough_vol_factor(const RoughVolSpec& spec, const SkeletonPath& path);
/// State: price; aux: Z.
Structure make_rough_vol_structure(const RoughVolSpec& spec, std::string name = "rough_vol");

struct RoughVolPaths {
  StatePath price;
  std::vector<double> z;
};
RoughVolPaths rough_vol_paths(const RoughVolSpec& spec, const SkeletonPath& path, std::span<const double> actions,
                              std::size_t stop);

}  // namespace skeldp
