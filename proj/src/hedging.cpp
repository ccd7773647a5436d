#include "skeldp/hedging.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <ostream>

#include "skeldp/distributions.hpp"
#include "skeldp/errors.hpp"
#include "skeldp/parallel.hpp"

namespace skeldp {
namespace {

constexpr double kDenominatorFloor = 1e-12;

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

std::vector<SkeletonPath> hedge_skeletons(const HedgeSpec& spec, std::uint64_t seed) {
  return simulate_batch(spec.skeleton(seed), spec.steps(), spec.n_mc, spec.workers);
}

}  // namespace

HedgeDenominator hedge_denominator_from_name(const std::string& name) {
  if (name == "moment") return HedgeDenominator::Moment;
  if (name == "epsilon2") return HedgeDenominator::Epsilon2;
  throw ConfigError("denominator", "unknown hedge denominator '" + name + "' (moment, epsilon2)");
}

std::string hedge_denominator_name(HedgeDenominator d) {
  return d == HedgeDenominator::Moment ? "moment" : "epsilon2";
}

void HedgeSpec::validate() const {
  if (!(s1_0 > 0.0)) throw ConfigError("s1_0", "must be positive");
  if (!(s2_0 > 0.0)) throw ConfigError("s2_0", "must be positive");
  if (!(sigma1 >= 0.0)) throw ConfigError("sigma1", "must be >= 0");
  if (!(sigma2 >= 0.0)) throw ConfigError("sigma2", "must be >= 0");
  if (!(T > 0.0)) throw ConfigError("T", "must be positive");
  if (k < 1 || k > 20) throw ConfigError("k", "must lie in [1, 20]");
  if (n_mc < 2) throw ConfigError("n_mc", "must be >= 2");
  if (!(chi >= 0.25 && chi <= 1.0)) throw ConfigError("chi", "chi_2 must lie in [1/4, 1]");
  if (workers < 1) throw ConfigError("workers", "must be >= 1");
}

double HedgeSpec::epsilon() const { return std::ldexp(1.0, -k); }
std::uint64_t HedgeSpec::steps() const { return e_steps(T, epsilon(), chi); }
SkeletonConfig HedgeSpec::skeleton(std::uint64_t s) const { return SkeletonConfig{2, epsilon(), T, chi, s}; }

double margrabe_price(const HedgeSpec& spec) {
  if (!(spec.s1_0 > 0.0 && spec.s2_0 > 0.0 && spec.T > 0.0)) throw ConfigError("spec", "prices and T must be positive");
  const double sigma = std::hypot(spec.sigma1, spec.sigma2);
  if (sigma == 0.0) return std::max(spec.s1_0 - spec.s2_0, 0.0);
  const double sq = sigma * std::sqrt(spec.T);
  const double d1 = (std::log(spec.s1_0 / spec.s2_0) + 0.5 * sigma * sigma * spec.T) / sq;
  const double d2 = d1 - sq;
  return spec.s1_0 * normal_cdf(d1) - spec.s2_0 * normal_cdf(d2);
}

AssetPaths simulate_hedge_assets(const HedgeSpec& spec, const SkeletonPath& path) {
  if (path.dimension != 2) throw std::invalid_argument("hedge assets need a d = 2 skeleton");
  AssetPaths a;
  const std::size_t m = path.size();
  a.s1.resize(m + 1);
  a.s2.resize(m + 1);
  a.s1[0] = spec.s1_0;
  a.s2[0] = spec.s2_0;
  for (std::size_t n = 1; n <= m; ++n) {
    a.s1[n] = a.s1[n - 1] * (1.0 + spec.sigma1 * path.increments[(n - 1) * 2]);
    a.s2[n] = a.s2[n - 1] * (1.0 + spec.sigma2 * path.increments[(n - 1) * 2 + 1]);
  }
  return a;
}

void HedgePolicy::holdings(std::size_t n, double s1, double s2, double& v1, double& v2) const {
  const double raw[2] = {s1, s2};
  double u[2];
  steps.at(n).evaluate(FeatureBasis::Poly2, raw, u);
  const double m2 = denominator == HedgeDenominator::Moment ? increment_moment : 1.0;
  const double e2 = epsilon * epsilon * m2;
  const double d1 = std::max(s1 * s1 * sigma1 * sigma1 * e2, kDenominatorFloor);
  const double d2 = std::max(s2 * s2 * sigma2 * sigma2 * e2, kDenominatorFloor);
  v1 = std::clamp(-u[0] / d1, -a_bar, a_bar);
  v2 = std::clamp(-u[1] / d2, -a_bar, a_bar);
}

HedgeResult solve_hedge_analytic(const HedgeSpec& spec) {
  spec.validate();
  const std::size_t m = spec.steps();
  const std::size_t N = spec.n_mc;
  HedgeResult res;
  res.steps = m;
  res.true_value = margrabe_price(spec);

  HedgePolicy& pol = res.policy;
  pol.denominator = spec.denominator;
  pol.sigma1 = spec.sigma1;
  pol.sigma2 = spec.sigma2;
  pol.epsilon = spec.epsilon();
  pol.increment_moment = increment_second_moment(2);
  pol.steps.resize(m);

  // Training paths.
  std::vector<AssetPaths> assets(N);
  {
    const auto sk = hedge_skeletons(spec, derive_seed(spec.seed, stream_tag::kTraining));
    parallel_for(N, spec.workers, [&](std::size_t i) { assets[i] = simulate_hedge_assets(spec, sk[i]); });
  }
  std::vector<double> claim(N), gains(N, 0.0);
  for (std::size_t i = 0; i < N; ++i) claim[i] = std::max(assets[i].s1[m] - assets[i].s2[m], 0.0);

  std::vector<double> raw(N * 2), targets(N * 2), design;
  for (std::size_t n = m; n-- > 0;) {
    for (std::size_t i = 0; i < N; ++i) {
      const AssetPaths& a = assets[i];
      raw[2 * i] = a.s1[n];
      raw[2 * i + 1] = a.s2[n];
      const double resid = gains[i] - claim[i];
      targets[2 * i] = resid * (a.s1[n + 1] - a.s1[n]);
      targets[2 * i + 1] = resid * (a.s2[n + 1] - a.s2[n]);
    }
    StepRegression& reg = pol.steps[n];
    for (int v = 0; v < 2; ++v) {
      double mean = 0.0, m2 = 0.0;
      for (std::size_t i = 0; i < N; ++i) {
        const double x = raw[2 * i + v], delta = x - mean;
        mean += delta / static_cast<double>(i + 1);
        m2 += delta * (x - mean);
      }
      const double sd = std::sqrt(m2 / static_cast<double>(N));
      if (sd > 1e-12 * std::max(1.0, std::abs(mean))) {
        reg.active.push_back(v);
        reg.centers.push_back(mean);
        reg.scales.push_back(sd);
      }
    }
    const int A = static_cast<int>(reg.active.size());
    reg.n_features = feature_count(FeatureBasis::Poly2, A);
    design.assign(N * reg.n_features, 0.0);
    std::vector<double> z(A);
    for (std::size_t i = 0; i < N; ++i) {
      for (int a = 0; a < A; ++a) z[a] = (raw[2 * i + reg.active[a]] - reg.centers[a]) / reg.scales[a];
      polynomial_features(FeatureBasis::Poly2, z,
                          std::span<double>(design).subspan(i * reg.n_features, reg.n_features));
    }
    RegressionFit fit = least_squares(design, N, reg.n_features, targets, 2, 0.0);
    reg.coef = std::move(fit.coef);
    reg.lambda = fit.lambda;
    for (std::size_t i = 0; i < N; ++i) {
      const AssetPaths& a = assets[i];
      double v1, v2;
      pol.holdings(n, a.s1[n], a.s2[n], v1, v2);
      const double e2 = pol.epsilon * pol.epsilon;
      if (a.s1[n] * a.s1[n] * spec.sigma1 * spec.sigma1 * e2 < kDenominatorFloor ||
          a.s2[n] * a.s2[n] * spec.sigma2 * spec.sigma2 * e2 < kDenominatorFloor)
        ++pol.floored;
      gains[i] += v1 * (a.s1[n + 1] - a.s1[n]) + v2 * (a.s2[n + 1] - a.s2[n]);
    }
  }

  // Fresh evaluation paths: c* is the minimiser of E(c + X - H)^2, i.e. E[H - X].
  const auto sk = hedge_skeletons(spec, derive_seed(spec.seed, stream_tag::kEvaluation));
  std::vector<double> diff(N), hvals(N);
  parallel_for(N, spec.workers, [&](std::size_t i) {
    const AssetPaths a = simulate_hedge_assets(spec, sk[i]);
    double x = 0.0;
    for (std::size_t n = 0; n < m; ++n) {
      double v1, v2;
      pol.holdings(n, a.s1[n], a.s2[n], v1, v2);
      x += v1 * (a.s1[n + 1] - a.s1[n]) + v2 * (a.s2[n + 1] - a.s2[n]);
    }
    hvals[i] = std::max(a.s1[m] - a.s2[m], 0.0);
    diff[i] = hvals[i] - x;
  });
  const MeanEstimate est = summarize(diff);
  res.c_star = {est.mean, est.std_err, est.n};
  res.mse = est.std_err * est.std_err;
  double sq = 0.0;
  for (double d : diff) sq += (est.mean - d) * (est.mean - d);
  res.mean_sq_error = sq / static_cast<double>(N);
  res.unhedged_mean = summarize(hvals).mean;
  return res;
}

Structure make_hedge_structure(const HedgeSpec& spec) {
  SdeCoefficients c;
  c.x0 = {spec.s1_0, spec.s2_0, 0.0};
  c.d = 2;
  c.r = 2;
  c.drift = [](const PathPrefix&, std::span<const double>, std::span<double> out) {
    std::fill(out.begin(), out.end(), 0.0);
  };
  const double s1 = spec.sigma1, s2 = spec.sigma2;
  c.diffusion = [s1, s2](const PathPrefix& p, std::span<const double> a, std::span<double> out) {
    const double v1 = s1 * p.x(0), v2 = s2 * p.x(1);
    out[0] = v1;
    out[1] = 0.0;
    out[2] = 0.0;
    out[3] = v2;
    out[4] = a[0] * v1;
    out[5] = a[1] * v2;
  };
  return make_euler_structure(c, "exchange_hedge");
}

Payoff hedge_payoff(double c) {
  return [c](const StatePathView& v) {
    const auto x = v.terminal();
    const double e = c + x[2] - std::max(x[0] - x[1], 0.0);
    return -e * e;
  };
}

DpConfig hedge_dp_config(const HedgeSpec& spec) {
  DpConfig cfg;
  cfg.epsilon_k = spec.epsilon();
  cfg.horizon = spec.T;
  cfg.chi = spec.chi;
  cfg.seed = spec.seed;
  cfg.n_paths = spec.n_mc;
  cfg.workers = spec.workers;
  cfg.se_batches = 0;  // only the policy is used downstream
  return cfg;
}

HedgeGenericResult solve_hedge_generic(const HedgeSpec& spec, std::size_t grid_points, double c, FeatureBasis basis) {
  spec.validate();
  HedgeGenericResult out;
  out.c = std::isnan(c) ? margrabe_price(spec) : c;
  const Structure s = make_hedge_structure(spec);
  const Payoff payoff = hedge_payoff(out.c);
  DpConfig cfg = hedge_dp_config(spec);
  cfg.basis = basis;
  ActionSpace actions{2, 1.0, static_cast<int>(grid_points)};
  out.dp = backward_solve(s, payoff, actions, cfg);
  const ValueEstimate v = evaluate_policy(out.dp.policy, s, payoff, cfg, spec.n_mc);
  out.objective = {-v.mean, v.std_err, v.n_paths};
  return out;
}

ValueEstimate hedge_objective_analytic(const HedgeSpec& spec, const HedgePolicy& policy, double c) {
  const Structure s = make_hedge_structure(spec);
  const DpConfig cfg = hedge_dp_config(spec);
  auto rule = [&policy](const StatePathView& h, std::span<double> a) {
    const auto x = h.terminal();
    policy.holdings(h.last, x[0], x[1], a[0], a[1]);
  };
  const ValueEstimate v = evaluate_rule(rule, s, hedge_payoff(c), cfg, spec.n_mc, stream_tag::kEvaluation);
  return {-v.mean, v.std_err, v.n_paths};
}

void write_table_header(std::ostream& out) { out << "k,result,mse,true_value,difference,pct_error\n"; }

void write_table_row(std::ostream& out, int k, const HedgeResult& r) {
  const auto old = out.precision(10);
  const double diff = r.c_star.mean - r.true_value;
  out << k << ',' << r.c_star.mean << ',' << r.mse << ',' << r.true_value << ',' << std::abs(diff) << ','
      << 100.0 * std::abs(diff) / r.true_value << '\n';
  out.precision(old);
}

}  // namespace skeldp
