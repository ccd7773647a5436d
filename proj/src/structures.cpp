#include "skeldp/structures.hpp"

#include <algorithm>
#include <cmath>

#include "skeldp/errors.hpp"

namespace skeldp {

void ActionSpace::validate() const {
  if (r < 1) throw ConfigError("action_dim", "must be >= 1");
  if (!(a_bar > 0.0) || !std::isfinite(a_bar)) throw ConfigError("a_bar", "must be positive");
  if (grid_points_per_axis < 2) throw ConfigError("grid", "needs at least 2 points per axis");
}

std::size_t ActionSpace::grid_size() const {
  std::size_t n = 1;
  for (int i = 0; i < r; ++i) n *= static_cast<std::size_t>(grid_points_per_axis);
  return n;
}

std::vector<double> ActionSpace::grid() const {
  validate();
  const int g = grid_points_per_axis;
  std::vector<double> axis(g);
  for (int i = 0; i < g; ++i) axis[i] = -a_bar + 2.0 * a_bar * i / (g - 1);
  axis.back() = a_bar;
  const std::size_t n = grid_size();
  std::vector<double> out(n * r);
  // Odometer with the last coordinate fastest: ascending lexicographic order.
  for (std::size_t idx = 0; idx < n; ++idx) {
    std::size_t rem = idx;
    for (int c = r - 1; c >= 0; --c) {
      out[idx * r + c] = axis[rem % g];
      rem /= g;
    }
  }
  return out;
}

bool ActionSpace::contains(std::span<const double> a) const {
  if (static_cast<int>(a.size()) != r) return false;
  return std::all_of(a.begin(), a.end(), [&](double x) { return std::abs(x) <= a_bar; });
}

Structure::Structure(std::string name, std::vector<double> x0, int action_dim, int skeleton_dim, PrepareFn prepare,
                     StepFn step, std::vector<std::string> aux_names)
    : name_(std::move(name)),
      x0_(std::move(x0)),
      action_dim_(action_dim),
      skeleton_dim_(skeleton_dim),
      prepare_(std::move(prepare)),
      step_(std::move(step)),
      aux_names_(std::move(aux_names)) {
  if (x0_.empty()) throw ConfigError("x0", "state dimension must be >= 1");
  if (action_dim_ < 1) throw ConfigError("action_dim", "must be >= 1");
  if (skeleton_dim_ < 1) throw ConfigError("d", "must be >= 1");
}

DriverPath Structure::prepare(const SkeletonPath& path) const {
  if (path.dimension != skeleton_dim_)
    throw std::invalid_argument(name_ + ": skeleton dimension " + std::to_string(path.dimension) + ", expected " +
                                std::to_string(skeleton_dim_));
  DriverPath d = prepare_(path);
  if (d.aux_width != static_cast<int>(aux_names_.size()))
    throw std::logic_error(name_ + ": driver aux width does not match declared aux names");
  return d;
}

StatePathView StatePath::view() const { return view(times.empty() ? 0 : times.size() - 1); }

StatePathView StatePath::view(std::size_t j) const {
  StatePathView v;
  v.last = j;
  v.state_dim = state_dim;
  v.values = std::span<const double>(values).first((j + 1) * state_dim);
  v.times = std::span<const double>(times).first(j + 1);
  v.aux_width = aux_width;
  v.aux = std::span<const double>(aux).first((j + 1) * aux_width);
  v.action_dim = action_dim;
  v.actions = std::span<const double>(actions).first(std::min(actions.size(), j * action_dim));
  return v;
}

StructureRun::StructureRun(const Structure& s, const SkeletonPath& path, std::size_t stop)
    : s_(s), driver_(s.prepare(path)), stop_(stop) {
  if (stop > driver_.steps)
    throw std::invalid_argument(s.name() + ": skeleton has " + std::to_string(driver_.steps) +
                                " steps, fewer than the stopping index " + std::to_string(stop));
  const int n = s.state_dim();
  path_.state_dim = n;
  path_.stop_index = stop;
  path_.aux_width = driver_.aux_width;
  path_.action_dim = s.action_dim();
  path_.values.reserve((driver_.steps + 1) * n);
  path_.values.assign(s.x0().begin(), s.x0().end());
  path_.times.reserve(driver_.steps + 1);
  path_.times.push_back(driver_.times[0]);
  path_.aux.reserve((driver_.steps + 1) * driver_.aux_width);
  const auto a0 = driver_.aux_at(0);
  path_.aux.assign(a0.begin(), a0.end());
  path_.actions.reserve(driver_.steps * s.action_dim());
}

PathPrefix StructureRun::prefix() const {
  PathPrefix p;
  p.step = j_;
  p.time = path_.times[j_];
  p.state_dim = path_.state_dim;
  p.states = std::span<const double>(path_.values);
  p.aux = driver_.aux_at(j_);
  return p;
}

StatePathView StructureRun::view() const { return path_.view(j_); }

void StructureRun::advance(std::span<const double> action) {
  if (j_ >= driver_.steps) throw std::out_of_range(s_.name() + ": no skeleton steps left");
  if (static_cast<int>(action.size()) != s_.action_dim())
    throw std::invalid_argument(s_.name() + ": action has wrong dimension");
  const int n = path_.state_dim;
  const std::size_t q = j_ + 1;
  std::vector<double> next(n);
  if (j_ < stop_) {
    StepInput in;
    in.prefix = prefix();
    in.dt = driver_.times[q] - driver_.times[j_];
    in.increment = driver_.increment(q);
    in.action = action;
    s_.step(in, next);
  } else {
    const auto cur = path_.state(j_);
    std::copy(cur.begin(), cur.end(), next.begin());
  }
  for (double v : next)
    if (!std::isfinite(v))
      throw NumericalError(s_.name() + ": non-finite state at step " + std::to_string(q));
  path_.values.insert(path_.values.end(), next.begin(), next.end());
  path_.times.push_back(driver_.times[q]);
  const auto aq = driver_.aux_at(std::min(q, stop_));
  path_.aux.insert(path_.aux.end(), aq.begin(), aq.end());
  path_.actions.insert(path_.actions.end(), action.begin(), action.end());
  j_ = q;
}

StatePath StructureRun::take() && { return std::move(path_); }

StatePath evolve(const Structure& s, const SkeletonPath& path, std::span<const double> actions, std::size_t stop) {
  const std::size_t r = static_cast<std::size_t>(s.action_dim());
  if (actions.size() < stop * r)
    throw std::invalid_argument(s.name() + ": need " + std::to_string(stop) + " actions, got " +
                                std::to_string(actions.size() / r));
  StructureRun run(s, path, stop);
  const std::vector<double> idle(r, 0.0);
  for (std::size_t j = 0; j < run.driver().steps; ++j) {
    const bool have = (j + 1) * r <= actions.size();
    run.advance(have ? actions.subspan(j * r, r) : std::span<const double>(idle));
  }
  return std::move(run).take();
}

DriverPath skeleton_driver(const SkeletonPath& path) {
  DriverPath d;
  d.steps = path.size();
  d.times = path.times;
  d.width = path.dimension;
  d.increments = path.increments;
  return d;
}

Structure make_euler_structure(const SdeCoefficients& c, std::string name) {
  if (!c.drift || !c.diffusion) throw ConfigError("coefficients", "drift and diffusion must be set");
  const int n = static_cast<int>(c.x0.size());
  const int d = c.d;
  auto drift = c.drift;
  auto diffusion = c.diffusion;
  auto step = [n, d, drift, diffusion](const StepInput& in, std::span<double> next) {
    thread_local std::vector<double> a, s;
    a.assign(n, 0.0);
    s.assign(static_cast<std::size_t>(n) * d, 0.0);
    drift(in.prefix, in.action, a);
    diffusion(in.prefix, in.action, s);
    const auto x = in.prefix.current();
    for (int i = 0; i < n; ++i) {
      double v = x[i] + a[i] * in.dt;
      for (int l = 0; l < d; ++l) v += s[i * d + l] * in.increment[l];
      next[i] = v;
    }
  };
  return Structure(std::move(name), c.x0, c.r, c.d, skeleton_driver, step);
}

StatePath euler_pd_sde(const SdeCoefficients& coeffs, const SkeletonPath& path, std::span<const double> actions,
                       std::size_t stop) {
  return evolve(make_euler_structure(coeffs), path, actions, stop);
}

Structure make_fbm_sde_structure(const FbmSpec& spec, double x0, int r, VectorCoefficient drift, std::string name) {
  spec.validate();
  if (!drift) throw ConfigError("drift", "must be set");
  auto prepare = [spec](const SkeletonPath& path) {
    const auto b = spec.H > 0.5 ? fbm_high(path, spec, 0) : fbm_low(path, spec, 0);
    DriverPath d;
    d.steps = path.size();
    d.times = path.times;
    d.width = 1;
    d.increments.resize(d.steps);
    for (std::size_t q = 1; q <= d.steps; ++q) d.increments[q - 1] = b[q] - b[q - 1];
    return d;
  };
  const double sigma = spec.sigma;
  auto step = [sigma, drift](const StepInput& in, std::span<double> next) {
    double a = 0.0;
    drift(in.prefix, in.action, std::span<double>(&a, 1));
    next[0] = in.prefix.x() + a * in.dt + sigma * in.increment[0];
  };
  return Structure(std::move(name), {x0}, r, 1, prepare, step);
}

StatePath fbm_drift_sde(const FbmSpec& spec, double x0, int r, VectorCoefficient drift, const SkeletonPath& path,
                        std::span<const double> actions, std::size_t stop) {
  return evolve(make_fbm_sde_structure(spec, x0, r, std::move(drift)), path, actions, stop);
}

void RoughVolSpec::validate() const {
  if (!(H > 0.0 && H < 0.5)) throw ConfigError("H", "rough volatility needs 0 < H < 1/2");
  if (!(nu >= 0.0)) throw ConfigError("nu", "must be >= 0");
  if (!(beta >= 0.0)) throw ConfigError("beta", "must be >= 0");
  if (!(rho > -1.0 && rho < 1.0)) throw ConfigError("rho", "must lie in (-1, 1)");
  if (r < 1) throw ConfigError("action_dim", "must be >= 1");
  if (!mu || !vartheta) throw ConfigError("coefficients", "mu and vartheta must be set");
}

std::vector<double> rough_vol_factor(const RoughVolSpec& spec, const SkeletonPath& path) {
  if (path.dimension != 2) throw std::invalid_argument("rough volatility needs a d = 2 skeleton");
  const std::size_t N = path.size();
  std::vector<double> w(N + 1, 0.0);
  if (spec.nu != 0.0) {
    FbmSpec f{spec.H, 1.0, 0.0};
    const double rb = std::sqrt(1.0 - spec.rho * spec.rho);
    std::vector<double> w1 = spec.rho != 0.0 ? fbm_low(path, f, 0) : std::vector<double>(N + 1, 0.0);
    const auto w2 = fbm_low(path, f, 1);
    for (std::size_t n = 0; n <= N; ++n) w[n] = spec.rho * w1[n] + rb * w2[n];
  }
  std::vector<double> z(N + 1);
  double integral = 0.0;  // sum_{j<=n} W(T_{j-1}) e^{beta T_{j-1}} dT_j
  for (std::size_t n = 0; n <= N; ++n) {
    const double t = path.times[n];
    if (n > 0) integral += w[n - 1] * std::exp(spec.beta * path.times[n - 1]) * path.delta_times[n - 1];
    const double decay = std::exp(-spec.beta * t);
    z[n] = spec.m + decay * (spec.z0 - spec.m) + spec.nu * w[n] - spec.beta * spec.nu * decay * integral;
  }
  return z;
}

Structure make_rough_vol_structure(const RoughVolSpec& spec, std::string name) {
  spec.validate();
  auto prepare = [spec](const SkeletonPath& path) {
    DriverPath d;
    d.steps = path.size();
    d.times = path.times;
    d.width = 1;
    d.increments.resize(d.steps);
    for (std::size_t q = 0; q < d.steps; ++q) d.increments[q] = path.increments[q * 2];
    d.aux_width = 1;
    d.aux = rough_vol_factor(spec, path);
    return d;
  };
  auto mu = spec.mu;
  auto vt = spec.vartheta;
  auto step = [mu, vt](const StepInput& in, std::span<double> next) {
    const double x = in.prefix.x();
    const double z = in.prefix.aux[0];
    next[0] = x + x * mu(z, in.action) * in.dt + x * vt(z, in.action) * in.increment[0];
  };
  return Structure(std::move(name), {spec.x0}, spec.r, 2, prepare, step, {"Z"});
}

RoughVolPaths rough_vol_paths(const RoughVolSpec& spec, const SkeletonPath& path, std::span<const double> actions,
                              std::size_t stop) {
  RoughVolPaths out;
  out.price = evolve(make_rough_vol_structure(spec), path, actions, stop);
  out.z = out.price.aux;
  return out;
}

}  // namespace skeldp
