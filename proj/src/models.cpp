#include "skeldp/models.hpp"

#include <algorithm>
#include <cmath>
#include <json.hpp>

#include "skeldp/errors.hpp"

namespace skeldp {
namespace {

using json = nlohmann::json;

double number(const json& j, const std::string& path, const char* key, double fallback) {
  if (!j.contains(key)) return fallback;
  const json& v = j.at(key);
  if (!v.is_number()) throw ConfigError(path + key, "must be a number");
  return v.get<double>();
}

double required_number(const json& j, const std::string& path, const char* key) {
  if (!j.contains(key)) throw ConfigError(path + key, "is required");
  return number(j, path, key, 0.0);
}

int integer(const json& j, const std::string& path, const char* key, int fallback) {
  if (!j.contains(key)) return fallback;
  const json& v = j.at(key);
  if (!v.is_number_integer()) throw ConfigError(path + key, "must be an integer");
  return v.get<int>();
}

// Scalars broadcast to every entry.
std::vector<double> vector_field(const json& j, const std::string& path, const char* key, std::size_t n,
                                 double fallback) {
  if (!j.contains(key)) return std::vector<double>(n, fallback);
  const json& v = j.at(key);
  if (v.is_number()) return std::vector<double>(n, v.get<double>());
  if (!v.is_array() || v.size() != n)
    throw ConfigError(path + key, "must be a number or an array of length " + std::to_string(n));
  std::vector<double> out;
  for (const auto& x : v) {
    if (!x.is_number()) throw ConfigError(path + key, "entries must be numbers");
    out.push_back(x.get<double>());
  }
  return out;
}

// Row-major rows x cols; accepts a nested array, a flat array or a scalar
// (placed on the diagonal).
std::vector<double> matrix_field(const json& j, const std::string& path, const char* key, std::size_t rows,
                                 std::size_t cols) {
  std::vector<double> out(rows * cols, 0.0);
  if (!j.contains(key)) return out;
  const json& v = j.at(key);
  if (v.is_number()) {
    for (std::size_t i = 0; i < std::min(rows, cols); ++i) out[i * cols + i] = v.get<double>();
    return out;
  }
  if (!v.is_array()) throw ConfigError(path + key, "must be a number or an array");
  if (v.size() == rows * cols && (v.empty() || v[0].is_number())) {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = v[i].get<double>();
    return out;
  }
  if (v.size() != rows) throw ConfigError(path + key, "expected " + std::to_string(rows) + " rows");
  for (std::size_t i = 0; i < rows; ++i) {
    if (!v[i].is_array() || v[i].size() != cols)
      throw ConfigError(path + key, "expected " + std::to_string(cols) + " columns in row " + std::to_string(i));
    for (std::size_t l = 0; l < cols; ++l) out[i * cols + l] = v[i][l].get<double>();
  }
  return out;
}

std::vector<double> state_vector(const json& j) {
  if (!j.contains("x0")) throw ConfigError("model.x0", "is required");
  const json& v = j.at("x0");
  if (v.is_number()) return {v.get<double>()};
  if (!v.is_array() || v.empty()) throw ConfigError("model.x0", "must be a number or a non-empty array");
  std::vector<double> x;
  for (const auto& e : v) x.push_back(e.get<double>());
  return x;
}

const json& section(const json& j, const char* key) {
  static const json empty = json::object();
  if (!j.contains(key)) return empty;
  if (!j.at(key).is_object()) throw ConfigError(std::string("model.") + key, "must be an object");
  return j.at(key);
}

ActionSpace parse_actions(const json& j) {
  const json& a = section(j, "action");
  ActionSpace s;
  s.r = integer(a, "model.action.", "r", 1);
  s.a_bar = number(a, "model.action.", "a_bar", 1.0);
  s.grid_points_per_axis = integer(a, "model.action.", "grid", 5);
  s.validate();
  return s;
}

double dot(const std::vector<double>& w, std::span<const double> x) {
  double s = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) s += w[i] * x[i];
  return s;
}

Payoff parse_payoff(const json& j, int n) {
  const json& p = section(j, "payoff");
  const std::string type = p.value("type", "terminal_linear");
  const std::string path = "model.payoff.";
  auto index = [&]() {
    const int i = integer(p, path, "index", 0);
    if (i < 0 || i >= n) throw ConfigError(path + "index", "out of range for state dimension " + std::to_string(n));
    return i;
  };
  if (type == "terminal_linear") {
    const auto w = vector_field(p, path, "w", n, 1.0);
    return [w](const StatePathView& v) { return dot(w, v.terminal()); };
  }
  if (type == "target_quadratic") {
    const int i = index();
    const double target = number(p, path, "target", 0.0);
    const double weight = number(p, path, "weight", 1.0);
    return [i, target, weight](const StatePathView& v) {
      const double e = v.terminal()[i] - target;
      return -weight * e * e;
    };
  }
  if (type == "terminal_call") {
    const int i = index();
    const double strike = number(p, path, "strike", 0.0);
    return [i, strike](const StatePathView& v) { return std::max(v.terminal()[i] - strike, 0.0); };
  }
  if (type == "path_average") {
    const int i = index();
    return [i](const StatePathView& v) {
      double s = 0.0;
      for (std::size_t q = 0; q <= v.last; ++q) s += v.state(q)[i];
      return s / static_cast<double>(v.last + 1);
    };
  }
  throw ConfigError(path + "type", "unknown payoff '" + type +
                                       "' (terminal_linear, target_quadratic, terminal_call, path_average)");
}

std::shared_ptr<const Structure> euler_model(const json& j, int r) {
  SdeCoefficients c;
  c.x0 = state_vector(j);
  const int n = static_cast<int>(c.x0.size());
  c.d = integer(j, "model.", "d", n);
  if (c.d < 1) throw ConfigError("model.d", "must be >= 1");
  c.r = r;
  const int d = c.d;

  const json& dr = section(j, "drift");
  const std::string dtype = dr.value("type", "linear");
  const auto b = vector_field(dr, "model.drift.", "b", n, 0.0);
  const auto B = matrix_field(dr, "model.drift.", "B", n, r);
  auto control = [r, B](std::span<const double> a, int i) {
    double s = 0.0;
    for (int l = 0; l < r; ++l) s += B[i * r + l] * a[l];
    return s;
  };
  if (dtype == "linear") {
    const auto A = matrix_field(dr, "model.drift.", "A", n, n);
    c.drift = [n, A, b, control](const PathPrefix& p, std::span<const double> a, std::span<double> out) {
      const auto x = p.current();
      for (int i = 0; i < n; ++i) {
        double s = b[i] + control(a, i);
        for (int l = 0; l < n; ++l) s += A[i * n + l] * x[l];
        out[i] = s;
      }
    };
  } else if (dtype == "path_mean") {
    const double kappa = number(dr, "model.drift.", "kappa", 1.0);
    c.drift = [n, kappa, b, control](const PathPrefix& p, std::span<const double> a, std::span<double> out) {
      for (int i = 0; i < n; ++i) {
        double mean = 0.0;
        for (std::size_t q = 0; q <= p.step; ++q) mean += p.states[q * n + i];
        mean /= static_cast<double>(p.step + 1);
        out[i] = kappa * (mean - p.x(i)) + b[i] + control(a, i);
      }
    };
  } else {
    throw ConfigError("model.drift.type", "unknown drift '" + dtype + "' (linear, path_mean)");
  }

  const json& df = section(j, "diffusion");
  const std::string stype = df.value("type", "constant");
  const auto sigma = matrix_field(df, "model.diffusion.", "sigma", n, d);
  if (stype == "constant") {
    c.diffusion = [sigma](const PathPrefix&, std::span<const double>, std::span<double> out) {
      std::copy(sigma.begin(), sigma.end(), out.begin());
    };
  } else if (stype == "geometric") {
    c.diffusion = [sigma, n, d](const PathPrefix& p, std::span<const double>, std::span<double> out) {
      for (int i = 0; i < n; ++i)
        for (int l = 0; l < d; ++l) out[i * d + l] = sigma[i * d + l] * p.x(i);
    };
  } else if (stype == "controlled") {
    c.diffusion = [sigma](const PathPrefix&, std::span<const double> a, std::span<double> out) {
      for (std::size_t i = 0; i < sigma.size(); ++i) out[i] = sigma[i] * a[0];
    };
  } else {
    throw ConfigError("model.diffusion.type", "unknown diffusion '" + stype + "' (constant, geometric, controlled)");
  }
  return std::make_shared<const Structure>(make_euler_structure(c, "euler_sde"));
}

std::shared_ptr<const Structure> fbm_model(const json& j, int r) {
  FbmSpec spec;
  spec.H = required_number(j, "model.", "H");
  spec.sigma = number(j, "model.", "sigma", 1.0);
  spec.constant = number(j, "model.", "molchan_constant", 0.0);
  const auto x0 = state_vector(j);
  if (x0.size() != 1) throw ConfigError("model.x0", "fbm_sde has a scalar state");
  const json& dr = section(j, "drift");
  const double a = number(dr, "model.drift.", "a", 0.0);
  const double b = number(dr, "model.drift.", "b", 0.0);
  const auto B = vector_field(dr, "model.drift.", "B", r, 0.0);
  VectorCoefficient drift = [a, b, B](const PathPrefix& p, std::span<const double> act, std::span<double> out) {
    out[0] = a * p.x() + b + dot(B, act);
  };
  return std::make_shared<const Structure>(make_fbm_sde_structure(spec, x0[0], r, drift));
}

std::shared_ptr<const Structure> rough_vol_model(const json& j, int r) {
  RoughVolSpec s;
  s.H = required_number(j, "model.", "H");
  s.nu = number(j, "model.", "nu", 1.0);
  s.beta = number(j, "model.", "beta", 1.0);
  s.m = number(j, "model.", "m", 0.0);
  s.z0 = number(j, "model.", "z0", 0.0);
  s.rho = number(j, "model.", "rho", 0.0);
  const auto x0 = state_vector(j);
  if (x0.size() != 1) throw ConfigError("model.x0", "rough_vol has a scalar price state");
  s.x0 = x0[0];
  s.r = r;
  const json& mu = section(j, "mu");
  const double c0 = number(mu, "model.mu.", "c0", 0.0);
  const auto cm = vector_field(mu, "model.mu.", "c", r, 0.0);
  s.mu = [c0, cm](double, std::span<const double> a) { return c0 + dot(cm, a); };
  const json& vt = section(j, "vartheta");
  const std::string vtype = vt.value("type", "clipped_exp");
  if (vtype != "clipped_exp") throw ConfigError("model.vartheta.type", "unknown vartheta '" + vtype + "' (clipped_exp)");
  const double scale = number(vt, "model.vartheta.", "scale", 0.2);
  const double cap = number(vt, "model.vartheta.", "cap", 1.0);
  if (!(cap > 0.0)) throw ConfigError("model.vartheta.cap", "must be positive");
  const auto cv = vector_field(vt, "model.vartheta.", "c", r, 0.0);
  s.vartheta = [scale, cap, cv](double z, std::span<const double> a) {
    return std::clamp(scale * std::exp(z) + dot(cv, a), 0.0, cap);
  };
  return std::make_shared<const Structure>(make_rough_vol_structure(s));
}

// x_{j+1} = x_j + gain a_j + noise sign(eta_{j+1}): a finite outcome tree.
std::shared_ptr<const Structure> sign_tree_model(const json& j, int r) {
  const auto x0 = state_vector(j);
  if (x0.size() != 1) throw ConfigError("model.x0", "sign_tree has a scalar state");
  const double gain = number(j, "model.", "gain", 0.5);
  const double noise = number(j, "model.", "noise", 0.3);
  auto step = [gain, noise](const StepInput& in, std::span<double> next) {
    const double sign = in.increment[0] > 0.0 ? 1.0 : -1.0;
    next[0] = in.prefix.x() + gain * in.action[0] + noise * sign;
  };
  return std::make_shared<const Structure>(Structure("sign_tree", x0, r, 1, skeleton_driver, step));
}

}  // namespace

Model make_model_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("model", std::string("invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("model", "must be a JSON object");
  Model m;
  m.kind = j.value("kind", "");
  m.actions = parse_actions(j);
  try {
    if (m.kind == "euler_sde")
      m.structure = euler_model(j, m.actions.r);
    else if (m.kind == "fbm_sde")
      m.structure = fbm_model(j, m.actions.r);
    else if (m.kind == "rough_vol")
      m.structure = rough_vol_model(j, m.actions.r);
    else if (m.kind == "sign_tree")
      m.structure = sign_tree_model(j, m.actions.r);
    else
      throw ConfigError("model.kind", "unknown kind '" + m.kind + "' (euler_sde, fbm_sde, rough_vol, sign_tree)");
  } catch (const json::exception& e) {
    throw ConfigError("model", e.what());
  }
  m.payoff = parse_payoff(j, m.structure->state_dim());
  m.canonical_json = j.dump();
  return m;
}

}  // namespace skeldp
