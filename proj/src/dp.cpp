#include "skeldp/dp.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include "skeldp/errors.hpp"
#include "skeldp/parallel.hpp"

namespace skeldp {

FeatureBasis feature_basis_from_name(const std::string& name) {
  if (name == "poly2") return FeatureBasis::Poly2;
  if (name == "poly1") return FeatureBasis::Poly1;
  if (name == "poly2_action") return FeatureBasis::Poly2Action;
  throw ConfigError("features", "unknown feature basis '" + name + "' (poly1, poly2, poly2_action)");
}

std::string feature_basis_name(FeatureBasis b) {
  switch (b) {
    case FeatureBasis::Poly1: return "poly1";
    case FeatureBasis::Poly2: return "poly2";
    case FeatureBasis::Poly2Action: return "poly2_action";
  }
  return "poly2";
}

int raw_variable_count(FeatureBasis b, int state_dim, int aux_width, int action_dim) {
  return state_dim + aux_width + 1 + (b == FeatureBasis::Poly2Action ? action_dim : 0);
}

void raw_variables(FeatureBasis b, const StatePathView& h, std::span<double> out) {
  std::size_t k = 0;
  for (double x : h.state(h.last)) out[k++] = x;
  for (int i = 0; i < h.aux_width; ++i) out[k++] = h.aux[h.last * h.aux_width + i];
  out[k++] = h.times[h.last];
  if (b == FeatureBasis::Poly2Action)
    for (int i = 0; i < h.action_dim; ++i) out[k++] = h.last > 0 ? h.actions[(h.last - 1) * h.action_dim + i] : 0.0;
}

int feature_count(FeatureBasis b, int v) {
  if (b == FeatureBasis::Poly1) return 1 + v;
  return 1 + v + v * (v + 1) / 2;
}

void polynomial_features(FeatureBasis b, std::span<const double> z, std::span<double> out) {
  const std::size_t v = z.size();
  std::size_t k = 0;
  out[k++] = 1.0;
  for (std::size_t i = 0; i < v; ++i) out[k++] = z[i];
  if (b == FeatureBasis::Poly1) return;
  for (std::size_t i = 0; i < v; ++i)
    for (std::size_t l = i; l < v; ++l) out[k++] = z[i] * z[l];
}

void StepRegression::evaluate(FeatureBasis basis, std::span<const double> raw, std::span<double> u) const {
  thread_local std::vector<double> z, phi;
  z.resize(active.size());
  for (std::size_t a = 0; a < active.size(); ++a) z[a] = (raw[active[a]] - centers[a]) / scales[a];
  phi.resize(n_features);
  polynomial_features(basis, z, phi);
  const std::size_t g_count = coef.size() / n_features;
  for (std::size_t g = 0; g < g_count; ++g) {
    const double* c = coef.data() + g * n_features;
    double s = 0.0;
    for (int f = 0; f < n_features; ++f) s += c[f] * phi[f];
    u[g] = s;
  }
}

double step_tolerance(double epsilon, std::size_t m) {
  if (m == 0) throw std::invalid_argument("step_tolerance: m must be >= 1");
  return epsilon / static_cast<double>(m);
}

std::size_t select_action(std::span<const double> u, double tol) {
  if (u.empty()) throw std::invalid_argument("select_action: empty action set");
  double best = -std::numeric_limits<double>::infinity();
  for (double x : u) {
    if (!std::isfinite(x)) throw NumericalError("non-finite fitted state-action value");
    best = std::max(best, x);
  }
  // The grid is in ascending lexicographic order, so the last admissible
  // index is the lexicographically largest action.
  for (std::size_t g = u.size(); g-- > 0;)
    if (u[g] >= best - tol) return g;
  return 0;
}

std::size_t Policy::choose(const StatePathView& h) const {
  if (h.last >= values.steps.size()) throw std::out_of_range("policy queried beyond its horizon");
  thread_local std::vector<double> raw, u;
  raw.resize(raw_variable_count(values.basis, values.state_dim, values.aux_width, values.action_dim));
  raw_variables(values.basis, h, raw);
  u.resize(values.grid_size());
  values.steps[h.last].evaluate(values.basis, raw, u);
  return select_action(u, step_tolerance(epsilon, values.horizon()));
}

Policy extract_epsilon_policy(const ValueFunctions& values, double epsilon) {
  if (!(epsilon >= 0.0)) throw ConfigError("epsilon", "must be >= 0");
  if (values.steps.empty()) throw std::invalid_argument("extract_epsilon_policy: empty value functions");
  return Policy{values, epsilon};
}

RegressionFit least_squares(std::span<const double> x, std::size_t rows, std::size_t cols, std::span<const double> y,
                            std::size_t k, double ridge_lambda) {
  using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  if (x.size() != rows * cols || y.size() != rows * k) throw std::invalid_argument("least_squares: shape mismatch");
  Eigen::Map<const RowMat> X(x.data(), rows, cols);
  Eigen::Map<const RowMat> Y(y.data(), rows, k);
  if (!X.allFinite() || !Y.allFinite()) throw NumericalError("least_squares: non-finite design or targets");
  const Eigen::MatrixXd xtx = X.transpose() * X;
  const Eigen::MatrixXd xty = X.transpose() * Y;
  const double scale = std::max(xtx.diagonal().mean(), 1e-300);
  double lambda = ridge_lambda;
  for (int attempt = 0; attempt <= 3; ++attempt) {
    if (attempt > 0) lambda = std::max(ridge_lambda, 1e-10 * scale) * std::pow(10.0, attempt);
    Eigen::MatrixXd a = xtx;
    a.diagonal().array() += lambda;
    Eigen::LLT<Eigen::MatrixXd> llt(a);
    if (llt.info() != Eigen::Success || !(llt.rcond() > 1e-13)) continue;
    const Eigen::MatrixXd b = llt.solve(xty);
    if (!b.allFinite()) continue;
    RegressionFit fit;
    fit.coef.assign(b.data(), b.data() + b.size());
    fit.lambda = lambda;
    fit.escalations = attempt;
    return fit;
  }
  throw NumericalError("least_squares: normal equations singular after 3 ridge escalations (lambda=" +
                       std::to_string(lambda) + ")");
}

void DpConfig::validate() const {
  if (!(epsilon_k > 0.0)) throw ConfigError("epsilon_k", "must be positive");
  if (!(horizon > 0.0)) throw ConfigError("T", "must be positive");
  if (!(chi > 0.0 && chi <= 1.0)) throw ConfigError("chi", "must lie in (0, 1]");
  if (n_paths < 2) throw ConfigError("n_paths", "must be >= 2");
  if (!(ridge_lambda >= 0.0)) throw ConfigError("ridge_lambda", "must be >= 0");
  if (!(policy_epsilon >= 0.0)) throw ConfigError("policy_epsilon", "must be >= 0");
  if (workers < 1) throw ConfigError("workers", "must be >= 1");
  if (se_batches == 1) throw ConfigError("se_batches", "must be 0 or >= 2");
}

namespace {

struct TrainingPath {
  DriverPath driver;
  StatePath path;
};

// X_{j+1} from the history through step j under action theta.
void one_step(const Structure& s, const TrainingPath& tp, std::size_t j, std::span<const double> theta,
              std::span<double> next) {
  StepInput in;
  in.prefix.step = j;
  in.prefix.time = tp.path.times[j];
  in.prefix.state_dim = tp.path.state_dim;
  in.prefix.states = std::span<const double>(tp.path.values).first((j + 1) * tp.path.state_dim);
  in.prefix.aux = tp.driver.aux_at(j);
  in.dt = tp.driver.times[j + 1] - tp.driver.times[j];
  in.increment = tp.driver.increment(j + 1);
  in.action = theta;
  s.step(in, next);
}

double checked_payoff(const Payoff& payoff, const StatePathView& v, std::size_t path, std::uint64_t seed) {
  const double p = payoff(v);
  if (!std::isfinite(p))
    throw NumericalError("non-finite payoff on path " + std::to_string(path) + " (seed " + std::to_string(seed) + ")");
  return p;
}

SkeletonConfig skeleton_config(const Structure& s, const DpConfig& cfg, std::uint64_t seed) {
  SkeletonConfig k{s.skeleton_dim(), cfg.epsilon_k, cfg.horizon, cfg.chi, seed};
  k.validate();
  return k;
}

struct BackwardFit {
  ValueFunctions values;
  std::vector<double> u0;   // mean fitted U_0 per grid action
  std::size_t best = 0;
  double naive_se = 0.0;    // SE of the targets behind u0[best]
};

// Regression Monte Carlo backward sweep over the given training paths.
BackwardFit backward_pass(const Structure& s, const Payoff& payoff, const ActionSpace& actions, const DpConfig& cfg,
                          std::span<TrainingPath> paths) {
  const std::size_t m = cfg.steps();
  const std::vector<double> grid = actions.grid();
  const std::size_t G = actions.grid_size();
  const int r = actions.r;
  const int n = s.state_dim();
  const std::size_t N = paths.size();

  BackwardFit out;
  ValueFunctions& vf = out.values;
  vf.basis = cfg.basis;
  vf.state_dim = n;
  vf.aux_width = paths.front().path.aux_width;
  vf.action_dim = r;
  vf.grid = grid;
  vf.steps.resize(m);
  const int V = raw_variable_count(vf.basis, n, vf.aux_width, r);

  std::vector<double> raw(N * V), targets(N * G);
  for (std::size_t j = m; j-- > 0;) {
    // Targets: V_{j+1} of the history extended with each grid action.
    parallel_for(N, cfg.workers, [&](std::size_t i) {
      TrainingPath& tp = paths[i];
      StatePath& p = tp.path;
      raw_variables(vf.basis, p.view(j), std::span<double>(raw).subspan(i * V, V));
      std::vector<double> saved_x(p.values.begin() + (j + 1) * n, p.values.begin() + (j + 2) * n);
      std::vector<double> saved_a(p.actions.begin() + j * r, p.actions.begin() + (j + 1) * r);
      std::vector<double> next(n), raw_next(V), u(G);
      for (std::size_t g = 0; g < G; ++g) {
        const auto theta = std::span<const double>(grid).subspan(g * r, r);
        one_step(s, tp, j, theta, next);
        std::copy(next.begin(), next.end(), p.values.begin() + (j + 1) * n);
        std::copy(theta.begin(), theta.end(), p.actions.begin() + j * r);
        double value;
        if (j + 1 == m) {
          value = checked_payoff(payoff, p.view(j + 1), i, cfg.seed);
        } else {
          raw_variables(vf.basis, p.view(j + 1), raw_next);
          vf.steps[j + 1].evaluate(vf.basis, raw_next, u);
          value = *std::max_element(u.begin(), u.end());
          if (!std::isfinite(value))
            throw NumericalError("non-finite fitted value at step " + std::to_string(j + 1) + " on path " +
                                 std::to_string(i));
        }
        targets[i * G + g] = value;
      }
      std::copy(saved_x.begin(), saved_x.end(), p.values.begin() + (j + 1) * n);
      std::copy(saved_a.begin(), saved_a.end(), p.actions.begin() + j * r);
    });

    // Standardise the variables that actually vary across paths.
    StepRegression& reg = vf.steps[j];
    for (int v = 0; v < V; ++v) {
      double mean = 0.0, m2 = 0.0;
      for (std::size_t i = 0; i < N; ++i) {
        const double x = raw[i * V + v];
        const double delta = x - mean;
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
    reg.n_features = feature_count(vf.basis, A);
    const int F = reg.n_features;
    std::vector<double> design(N * F);
    {
      std::vector<double> z(A);
      for (std::size_t i = 0; i < N; ++i) {
        for (int a = 0; a < A; ++a) z[a] = (raw[i * V + reg.active[a]] - reg.centers[a]) / reg.scales[a];
        polynomial_features(vf.basis, z, std::span<double>(design).subspan(i * F, F));
      }
    }
    RegressionFit fit = least_squares(design, N, F, targets, G, cfg.ridge_lambda);
    reg.coef = std::move(fit.coef);
    reg.lambda = fit.lambda;

    if (j == 0) {
      // The initial history is shared by all paths, so U_0 is the mean fitted value.
      out.u0.assign(G, 0.0);
      std::vector<double> u(G);
      for (std::size_t i = 0; i < N; ++i) {
        reg.evaluate(vf.basis, std::span<const double>(raw).subspan(i * V, V), u);
        for (std::size_t g = 0; g < G; ++g) out.u0[g] += u[g] / static_cast<double>(N);
      }
      out.best = select_action(out.u0, 0.0);
      std::vector<double> col(N);
      for (std::size_t i = 0; i < N; ++i) col[i] = targets[i * G + out.best];
      out.naive_se = summarize(col).std_err;
    }
  }
  return out;
}

}  // namespace

DpSolution backward_solve(const Structure& s, const Payoff& payoff, const ActionSpace& actions, const DpConfig& cfg) {
  cfg.validate();
  actions.validate();
  if (actions.r != s.action_dim()) throw ConfigError("action_dim", "action space does not match the structure");
  const std::size_t m = cfg.steps();
  if (m < 1) throw ConfigError("T", "e(k,T) must be >= 1");
  const int r = actions.r;
  const std::size_t N = cfg.n_paths;

  const std::uint64_t train_seed = derive_seed(cfg.seed, stream_tag::kTraining);
  const std::uint64_t explore_seed = derive_seed(cfg.seed, stream_tag::kExploration);
  const SkeletonConfig skc = skeleton_config(s, cfg, train_seed);

  // Forward pass: exploration controls uniform on the box.
  std::vector<TrainingPath> paths(N);
  parallel_for(N, cfg.workers, [&](std::size_t i) {
    Philox4x32 rng(train_seed, i);
    const SkeletonPath sk = simulate_skeleton(skc, m, rng);
    Philox4x32 explore(explore_seed, i);
    StructureRun run(s, sk, m);
    std::vector<double> a(r);
    for (std::size_t j = 0; j < m; ++j) {
      for (int c = 0; c < r; ++c) a[c] = actions.a_bar * (2.0 * uniform_open(explore) - 1.0);
      run.advance(a);
    }
    paths[i].driver = run.driver();
    paths[i].path = std::move(run).take();
  });

  BackwardFit full = backward_pass(s, payoff, actions, cfg, paths);
  DpSolution sol;
  sol.v0 = {full.u0[full.best], full.naive_se, N};
  sol.v0_action = full.best;
  sol.v0_naive_std_err = full.naive_se;

  // Sectioning: the spread of V0 refitted on disjoint batches of the same
  // paths captures the regression error that the naive SE ignores.
  const std::size_t B = cfg.se_batches;
  if (B >= 2 && N >= 8 * B) {
    std::vector<double> v(B);
    for (std::size_t b = 0; b < B; ++b) {
      const std::size_t lo = b * N / B, hi = (b + 1) * N / B;
      const BackwardFit part =
          backward_pass(s, payoff, actions, cfg, std::span<TrainingPath>(paths).subspan(lo, hi - lo));
      v[b] = part.u0[part.best];
    }
    sol.v0.std_err = summarize(v).std_err;
  }
  sol.policy = extract_epsilon_policy(full.values, cfg.policy_epsilon);
  sol.steps = m;
  return sol;
}

ValueEstimate evaluate_rule(const ActionRule& rule, const Structure& s, const Payoff& payoff, const DpConfig& cfg,
                            std::size_t n_paths, std::uint64_t seed_tag) {
  cfg.validate();
  const std::size_t m = cfg.steps();
  const std::uint64_t seed = derive_seed(cfg.seed, seed_tag);
  const SkeletonConfig skc = skeleton_config(s, cfg, seed);
  std::vector<double> out(n_paths);
  parallel_for(n_paths, cfg.workers, [&](std::size_t i) {
    Philox4x32 rng(seed, i);
    const SkeletonPath sk = simulate_skeleton(skc, m, rng);
    StructureRun run(s, sk, m);
    std::vector<double> a(s.action_dim());
    for (std::size_t j = 0; j < m; ++j) {
      rule(run.view(), a);
      run.advance(a);
    }
    out[i] = checked_payoff(payoff, run.view(), i, cfg.seed);
  });
  const MeanEstimate est = summarize(out);
  return {est.mean, est.std_err, est.n};
}

ValueEstimate evaluate_policy(const Policy& p, const Structure& s, const Payoff& payoff, const DpConfig& cfg,
                              std::size_t n_paths) {
  if (p.horizon() != cfg.steps())
    throw ConfigError("policy", "policy has " + std::to_string(p.horizon()) + " steps but e(k,T) = " +
                                    std::to_string(cfg.steps()));
  if (p.values.action_dim != s.action_dim()) throw ConfigError("policy", "action dimension mismatch");
  auto rule = [&p](const StatePathView& h, std::span<double> a) {
    const auto chosen = p.action(p.choose(h));
    std::copy(chosen.begin(), chosen.end(), a.begin());
  };
  return evaluate_rule(rule, s, payoff, cfg, n_paths, stream_tag::kEvaluation);
}

namespace {
constexpr const char* kPolicyMagic = "skeldp-policy";
constexpr int kPolicyVersion = 1;

template <class T>
void write_list(std::ostream& out, const std::vector<T>& xs) {
  for (std::size_t i = 0; i < xs.size(); ++i) out << (i ? " " : "") << xs[i];
  out << '\n';
}

void expect(std::istream& in, const std::string& word) {
  std::string got;
  if (!(in >> got) || got != word) throw std::runtime_error("policy file: expected '" + word + "', got '" + got + "'");
}

template <class T>
std::vector<T> read_list(std::istream& in, std::size_t n) {
  std::vector<T> xs(n);
  for (auto& x : xs)
    if (!(in >> x)) throw std::runtime_error("policy file: truncated list");
  return xs;
}
}  // namespace

void write_policy(std::ostream& out, const Policy& p) {
  const ValueFunctions& v = p.values;
  const auto old = out.precision(17);
  out << kPolicyMagic << ' ' << kPolicyVersion << '\n';
  out << "features " << feature_basis_name(v.basis) << '\n';
  out << "state_dim " << v.state_dim << "\naux_width " << v.aux_width << "\naction_dim " << v.action_dim << '\n';
  out << "epsilon " << p.epsilon << '\n';
  out << "grid " << v.grid_size() << '\n';
  write_list(out, v.grid);
  out << "steps " << v.steps.size() << '\n';
  for (std::size_t j = 0; j < v.steps.size(); ++j) {
    const StepRegression& s = v.steps[j];
    out << "step " << j << " active " << s.active.size() << " features " << s.n_features << " lambda " << s.lambda
        << '\n';
    write_list(out, s.active);
    write_list(out, s.centers);
    write_list(out, s.scales);
    write_list(out, s.coef);
  }
  out.precision(old);
}

Policy read_policy(std::istream& in) {
  expect(in, kPolicyMagic);
  int version = 0;
  if (!(in >> version) || version != kPolicyVersion)
    throw std::runtime_error("policy file: unsupported version " + std::to_string(version));
  Policy p;
  ValueFunctions& v = p.values;
  std::string name;
  expect(in, "features");
  in >> name;
  v.basis = feature_basis_from_name(name);
  expect(in, "state_dim");
  in >> v.state_dim;
  expect(in, "aux_width");
  in >> v.aux_width;
  expect(in, "action_dim");
  in >> v.action_dim;
  expect(in, "epsilon");
  in >> p.epsilon;
  std::size_t g = 0, m = 0;
  expect(in, "grid");
  in >> g;
  v.grid = read_list<double>(in, g * v.action_dim);
  expect(in, "steps");
  in >> m;
  if (!in) throw std::runtime_error("policy file: malformed header");
  v.steps.resize(m);
  for (std::size_t j = 0; j < m; ++j) {
    StepRegression& s = v.steps[j];
    std::size_t idx = 0, a = 0;
    expect(in, "step");
    in >> idx;
    if (idx != j) throw std::runtime_error("policy file: steps out of order");
    expect(in, "active");
    in >> a;
    expect(in, "features");
    in >> s.n_features;
    expect(in, "lambda");
    in >> s.lambda;
    s.active = read_list<int>(in, a);
    s.centers = read_list<double>(in, a);
    s.scales = read_list<double>(in, a);
    s.coef = read_list<double>(in, static_cast<std::size_t>(s.n_features) * g);
  }
  return p;
}

void write_values_csv(std::ostream& out, const ValueFunctions& v) {
  const auto old = out.precision(17);
  out << "step,action_index";
  for (int c = 0; c < v.action_dim; ++c) out << ",a" << (c + 1);
  out << ",feature_index,coefficient\n";
  const std::size_t G = v.grid_size();
  for (std::size_t j = 0; j < v.steps.size(); ++j) {
    const StepRegression& s = v.steps[j];
    for (std::size_t g = 0; g < G; ++g)
      for (int f = 0; f < s.n_features; ++f) {
        out << j << ',' << g;
        for (int c = 0; c < v.action_dim; ++c) out << ',' << v.grid[g * v.action_dim + c];
        out << ',' << f << ',' << s.coef[g * s.n_features + f] << '\n';
      }
  }
  out.precision(old);
}

}  // namespace skeldp
