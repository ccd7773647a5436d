// Command-line front end. Talks to the library through the C interface only.

#include <skeldp.h>

#include <CLI11.hpp>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <json.hpp>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace {

using json = nlohmann::json;

/// Configuration problem attributable to a single field.
struct FieldError : std::runtime_error {
  FieldError(std::string f, const std::string& msg) : std::runtime_error(msg), field(std::move(f)) {}
  std::string field;
};

/// Failure during simulation or output.
struct RunError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void check(sk_status s) {
  if (s == SK_OK) return;
  const std::string msg = sk_last_error();
  if (s == SK_ERR_INVALID_ARGUMENT) throw FieldError(sk_last_error_field(), msg);
  throw RunError(msg);
}

std::string num(double v) {
  if (std::isnan(v)) return "";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

enum class Kind { Int, UInt, Real, Text, Object };

struct Param {
  std::string key;
  Kind kind;
  json def;
  std::string help;
  std::optional<std::string> flag;
};

std::string flag_name(const std::string& key) {
  std::string f = key;
  for (char& c : f)
    if (c == '_') c = '-';
  return "--" + f;
}

json convert(const Param& p, const std::string& text) {
  try {
    std::size_t used = 0;
    switch (p.kind) {
      case Kind::Int: {
        const long long v = std::stoll(text, &used);
        if (used != text.size()) break;
        return v;
      }
      case Kind::UInt: {
        if (!text.empty() && text[0] == '-') throw FieldError(p.key, "must be non-negative");
        const unsigned long long v = std::stoull(text, &used);
        if (used != text.size()) break;
        return v;
      }
      case Kind::Real: {
        const double v = std::stod(text, &used);
        if (used != text.size()) break;
        return v;
      }
      case Kind::Text:
        return text;
      case Kind::Object: {
        std::ifstream in(text);
        if (!in) throw FieldError(p.key, "cannot read file '" + text + "'");
        try {
          return json::parse(in);
        } catch (const json::exception& e) {
          throw FieldError(p.key, std::string("invalid JSON: ") + e.what());
        }
      }
    }
  } catch (const std::invalid_argument&) {
  } catch (const std::out_of_range&) {
    throw FieldError(p.key, "value out of range: '" + text + "'");
  }
  throw FieldError(p.key, "cannot parse '" + text + "'");
}

bool kind_matches(Kind k, const json& v) {
  switch (k) {
    case Kind::Int:
      return v.is_number_integer();
    case Kind::UInt:
      return v.is_number_unsigned() || (v.is_number_integer() && v.get<long long>() >= 0);
    case Kind::Real:
      return v.is_number() || v.is_null();
    case Kind::Text:
      return v.is_string();
    case Kind::Object:
      return v.is_object();
  }
  return false;
}

std::vector<int> parse_int_list(const std::string& key, const json& v) {
  std::vector<int> out;
  if (v.is_number_integer()) return {v.get<int>()};
  if (v.is_array()) {
    for (const auto& e : v) {
      if (!e.is_number_integer()) throw FieldError(key, "list entries must be integers");
      out.push_back(e.get<int>());
    }
  } else if (v.is_string()) {
    std::stringstream ss(v.get<std::string>());
    std::string item;
    while (std::getline(ss, item, ',')) {
      try {
        std::size_t used = 0;
        out.push_back(std::stoi(item, &used));
        if (used != item.size()) throw std::invalid_argument(item);
      } catch (const std::exception&) {
        throw FieldError(key, "cannot parse list entry '" + item + "'");
      }
    }
  } else {
    throw FieldError(key, "expected an integer list such as \"1,2,3\"");
  }
  if (out.empty()) throw FieldError(key, "list must not be empty");
  return out;
}

std::vector<double> parse_real_list(const std::string& key, const json& v) {
  std::vector<double> out;
  if (v.is_number()) return {v.get<double>()};
  if (v.is_array()) {
    for (const auto& e : v) {
      if (!e.is_number()) throw FieldError(key, "list entries must be numbers");
      out.push_back(e.get<double>());
    }
  } else if (v.is_string()) {
    std::stringstream ss(v.get<std::string>());
    std::string item;
    while (std::getline(ss, item, ',')) {
      try {
        std::size_t used = 0;
        out.push_back(std::stod(item, &used));
        if (used != item.size()) throw std::invalid_argument(item);
      } catch (const std::exception&) {
        throw FieldError(key, "cannot parse list entry '" + item + "'");
      }
    }
  } else {
    throw FieldError(key, "expected a number list such as \"0.3,0.7\"");
  }
  if (out.empty()) throw FieldError(key, "list must not be empty");
  return out;
}

/// One subcommand: its parameters, merged configuration and emitted files.
class Command {
 public:
  Command(std::string name, std::string description) : name_(std::move(name)), description_(std::move(description)) {
    add("seed", Kind::UInt, 0, "base seed; path i uses the stream derived from (seed, i)");
    add("workers", Kind::UInt, 1, "worker threads; 1 gives byte-identical output");
    add("out", Kind::Text, "", "output CSV path (stdout when empty); a .meta.json sidecar is written next to it");
    add("chi_fixture", Kind::Text, "", "chi_d fixture table (default: CHI_FIXTURE_PATH, then the bundled table)");
  }

  Command& add(std::string key, Kind kind, json def, std::string help) {
    params_.push_back({std::move(key), kind, std::move(def), std::move(help), std::nullopt});
    return *this;
  }

  void attach(CLI::App& root) {
    app_ = root.add_subcommand(name_, description_);
    app_->add_option("--config", config_path_, "JSON config file; command-line flags override it");
    app_->add_flag("--dry-run", dry_run_, "validate the configuration and print the work estimate");
    for (auto& p : params_) {
      auto* opt = app_->add_option(flag_name(p.key), p.flag, p.help);
      if (p.kind == Kind::Object) opt->type_name("FILE");
      if (!p.def.is_null() && p.kind != Kind::Object) opt->description(p.help + " [" + p.def.dump() + "]");
    }
  }

  bool parsed() const { return app_ && app_->parsed(); }
  bool dry_run() const { return dry_run_; }
  const std::string& name() const { return name_; }

  /// Defaults, then the config file (top level and the section named after
  /// the command), then flags.
  void merge() {
    for (const auto& p : params_) cfg_[p.key] = p.def;
    if (!config_path_.empty()) {
      std::ifstream in(config_path_);
      if (!in) throw FieldError("config", "cannot read '" + config_path_ + "'");
      json file;
      try {
        file = json::parse(in);
      } catch (const json::exception& e) {
        throw FieldError("config", std::string("invalid JSON: ") + e.what());
      }
      if (!file.is_object()) throw FieldError("config", "top level must be an object");
      apply(file, "", true);
      if (file.contains(name_)) {
        if (!file[name_].is_object()) throw FieldError(name_, "section must be an object");
        apply(file[name_], name_ + ".", false);
      }
    }
    for (const auto& p : params_)
      if (p.flag) cfg_[p.key] = convert(p, *p.flag);
  }

  const json& cfg() const { return cfg_; }
  const json& at(const std::string& key) const { return cfg_.at(key); }

  std::int64_t integer(const std::string& key, std::int64_t lo, std::int64_t hi) const {
    const auto& v = at(key);
    if (!v.is_number_integer()) throw FieldError(key, "must be an integer");
    const auto x = v.get<std::int64_t>();
    if (x < lo || x > hi)
      throw FieldError(key, "must lie in [" + std::to_string(lo) + ", " + std::to_string(hi) + "], got " +
                                std::to_string(x));
    return x;
  }

  std::uint64_t count(const std::string& key, std::uint64_t lo) const {
    const auto& v = at(key);
    if (!kind_matches(Kind::UInt, v)) throw FieldError(key, "must be a non-negative integer");
    const auto x = v.get<std::uint64_t>();
    if (x < lo) throw FieldError(key, "must be >= " + std::to_string(lo) + ", got " + std::to_string(x));
    return x;
  }

  double real(const std::string& key, double lo, double hi, bool open_lo = false) const {
    const auto& v = at(key);
    if (!v.is_number()) throw FieldError(key, "must be a number");
    const double x = v.get<double>();
    if (!std::isfinite(x) || x < lo || x > hi || (open_lo && x == lo)) {
      std::string range = (open_lo ? "(" : "[") + num(lo) + ", " + (std::isinf(hi) ? "inf)" : num(hi) + "]");
      throw FieldError(key, "must lie in " + range + ", got " + num(x));
    }
    return x;
  }

  std::string text(const std::string& key) const {
    const auto& v = at(key);
    if (!v.is_string()) throw FieldError(key, "must be a string");
    return v.get<std::string>();
  }

  unsigned workers() const { return static_cast<unsigned>(count("workers", 1)); }
  std::uint64_t seed() const { return count("seed", 0); }

  /// chi from the config, or the fixture entry for dimension d.
  double chi(int d) {
    if (!at("chi").is_null()) return real("chi", 0.0, 1.0, true);
    const std::string path = text("chi_fixture");
    sk_estimate e{};
    char source[1024];
    if (sk_chi_lookup(path.empty() ? nullptr : path.c_str(), d, &e, source, sizeof source) != SK_OK)
      throw FieldError("chi", std::string(sk_last_error()) + " (pass --chi or --chi-fixture)");
    results_["chi_fixture_std_err"] = e.std_err;
    results_["chi_fixture_n"] = e.n;
    cfg_["chi"] = e.mean;
    return e.mean;
  }

  /// Config echo: every key except output destinations.
  std::string header() const {
    std::string h = std::string("# skeldp ") + sk_version() + "\n# command = " + name_ + "\n";
    for (const auto& [k, v] : cfg_.items()) {
      if (k == "out" || k.ends_with("_out")) continue;
      h += "# " + k + " = " + v.dump() + "\n";
    }
    return h;
  }

  json& results() { return results_; }

  /// Writes a CSV body with the header, either to the output path or stdout.
  void emit_primary(const std::string& body) {
    const std::string out = text("out");
    if (out.empty()) {
      std::cout << header() << body << std::flush;
      return;
    }
    write_file(out, header() + body);
  }

  void write_file(const std::string& path, const std::string& content) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw RunError("cannot open '" + path + "' for writing");
    f << content;
    if (!f) throw RunError("write failed for '" + path + "'");
    outputs_.push_back(std::filesystem::path(path).filename().string());
  }

  void record_output(const std::string& path) { outputs_.push_back(std::filesystem::path(path).filename().string()); }

  /// Sidecar metadata next to the primary output.
  void finish() {
    const std::string out = text("out");
    if (out.empty()) return;
    json meta;
    meta["artifact"] = "skeldp";
    meta["version"] = sk_version();
    meta["command"] = name_;
    json c = cfg_;
    for (auto it = c.begin(); it != c.end();) {
      if (it.key() == "out" || it.key().ends_with("_out"))
        it = c.erase(it);
      else
        ++it;
    }
    meta["config"] = c;
    meta["outputs"] = outputs_;
    meta["results"] = results_;
    std::ofstream f(out + ".meta.json", std::ios::binary);
    if (!f) throw RunError("cannot write sidecar for '" + out + "'");
    f << meta.dump(2) << '\n';
  }

  std::function<void(Command&)> run;
  std::function<void(Command&)> dry;

 private:
  void apply(const json& obj, const std::string& prefix, bool top_level) {
    for (const auto& [k, v] : obj.items()) {
      const auto it = std::find_if(params_.begin(), params_.end(), [&](const Param& p) { return p.key == k; });
      if (it == params_.end()) {
        if (top_level && v.is_object()) continue;  // another command's section
        throw FieldError(prefix + k, "unknown field for '" + name_ + "'");
      }
      if (!kind_matches(it->kind, v) && !(it->def.is_null() && v.is_null()) && !v.is_array())
        throw FieldError(prefix + k, "has the wrong type");
      cfg_[k] = v;
    }
  }

  std::string name_, description_;
  std::vector<Param> params_;
  CLI::App* app_ = nullptr;
  std::string config_path_;
  bool dry_run_ = false;
  json cfg_ = json::object();
  json results_ = json::object();
  std::vector<std::string> outputs_;
};

std::uint64_t steps_for(double t, int k, double chi) {
  std::uint64_t e = 0;
  check(sk_e_steps(t, std::ldexp(1.0, -k), chi, &e));
  return e;
}

void print_dry(const std::string& steps, const std::string& grid, const std::string& work) {
  std::cout << "e(k,T): " << steps << "\ngrid size: " << grid << "\nestimated work: " << work << "\n";
}

// ---- estimate-chi --------------------------------------------------------

Command make_estimate_chi() {
  Command c("estimate-chi", "Monte Carlo estimate of chi_d = E min(tau_1..tau_d)");
  c.add("d", Kind::Int, 2, "dimension").add("n", Kind::UInt, 1000000, "number of samples");
  c.dry = [](Command& c) {
    const auto d = c.integer("d", 1, 64);
    const auto n = c.count("n", 2);
    c.workers();
    print_dry("n/a", "n/a", std::to_string(n * static_cast<std::uint64_t>(d)) + " exit-time draws");
  };
  c.run = [](Command& c) {
    const int d = static_cast<int>(c.integer("d", 1, 64));
    const auto n = c.count("n", 2);
    sk_estimate e{};
    check(sk_estimate_chi(d, n, c.seed(), c.workers(), &e));
    sk_estimate f{};
    const std::string path = c.text("chi_fixture");
    const bool have = sk_chi_lookup(path.empty() ? nullptr : path.c_str(), d, &f, nullptr, 0) == SK_OK;
    const double z = have ? (e.mean - f.mean) / std::hypot(e.std_err, f.std_err) : std::nan("");
    std::string body = "d,estimate,std_err,n_samples,fixture_estimate,fixture_std_err,z_score\n";
    body += std::to_string(d) + "," + num(e.mean) + "," + num(e.std_err) + "," + std::to_string(e.n) + "," +
            (have ? num(f.mean) : "") + "," + (have ? num(f.std_err) : "") + "," + num(z) + "\n";
    c.emit_primary(body);
    c.results()["estimate"] = e.mean;
    c.results()["std_err"] = e.std_err;
    if (have) c.results()["z_score"] = z;
  };
  return c;
}

// ---- sample-skeleton -----------------------------------------------------

Command make_sample_skeleton() {
  Command c("sample-skeleton", "Simulate skeleton paths (waiting times and increments)");
  c.add("d", Kind::Int, 1, "dimension")
      .add("k", Kind::Int, 4, "level; epsilon = 2^-k")
      .add("T", Kind::Real, 1.0, "horizon used for e(k,T)")
      .add("chi", Kind::Real, nullptr, "chi_d (default: fixture)")
      .add("n_paths", Kind::UInt, 100, "number of paths")
      .add("n_steps", Kind::UInt, 0, "steps per path (0 = e(k,T))")
      .add("format", Kind::Text, "csv", "csv or binary");
  struct Parsed {
    sk_skeleton_config cfg;
    std::uint64_t n_paths, n_steps;
    std::string format;
  };
  auto parse = [](Command& c) {
    Parsed p{};
    p.cfg.dimension = static_cast<int>(c.integer("d", 1, 64));
    const int k = static_cast<int>(c.integer("k", 0, 30));
    p.cfg.epsilon = std::ldexp(1.0, -k);
    p.cfg.horizon = c.real("T", 0.0, 1e6, true);
    p.cfg.chi = c.chi(p.cfg.dimension);
    p.cfg.seed = c.seed();
    p.n_paths = c.count("n_paths", 1);
    p.n_steps = c.count("n_steps", 0);
    if (p.n_steps == 0) p.n_steps = steps_for(p.cfg.horizon, k, p.cfg.chi);
    p.format = c.text("format");
    if (p.format != "csv" && p.format != "binary") throw FieldError("format", "must be 'csv' or 'binary'");
    if (p.format == "binary" && c.text("out").empty()) throw FieldError("out", "binary output needs --out");
    c.workers();
    return p;
  };
  c.dry = [parse](Command& c) {
    const Parsed p = parse(c);
    print_dry(std::to_string(p.n_steps), "n/a",
              std::to_string(p.n_paths * p.n_steps * static_cast<std::uint64_t>(p.cfg.dimension)) + " draws");
  };
  c.run = [parse](Command& c) {
    const Parsed p = parse(c);
    sk_skeleton_batch* batch = nullptr;
    check(sk_skeleton_batch_simulate(&p.cfg, p.n_steps, p.n_paths, c.workers(), &batch));
    std::unique_ptr<sk_skeleton_batch, void (*)(sk_skeleton_batch*)> guard(batch, sk_skeleton_batch_free);
    c.results()["n_paths"] = p.n_paths;
    c.results()["n_steps"] = p.n_steps;
    if (p.format == "binary") {
      check(sk_skeleton_batch_write(batch, c.text("out").c_str(), c.header().c_str()));
      c.record_output(c.text("out"));
      return;
    }
    const int d = p.cfg.dimension;
    std::string body = "path,step,time,dt";
    for (int i = 1; i <= d; ++i) body += ",eta_" + std::to_string(i);
    body += "\n";
    for (std::uint64_t i = 0; i < p.n_paths; ++i) {
      const double *dt = nullptr, *eta = nullptr;
      check(sk_skeleton_batch_path(batch, i, &dt, &eta));
      double t = 0.0;
      for (std::uint64_t n = 0; n < p.n_steps; ++n) {
        t += dt[n];
        body += std::to_string(i) + "," + std::to_string(n + 1) + "," + num(t) + "," + num(dt[n]);
        for (int a = 0; a < d; ++a) body += "," + num(eta[n * d + a]);
        body += "\n";
      }
    }
    c.emit_primary(body);
  };
  return c;
}

// ---- solve -----------------------------------------------------------------

Command make_solve() {
  Command c("solve", "Backward dynamic programming for a model given as JSON");
  c.add("model", Kind::Object, nullptr, "model description (JSON file; inline object in --config)")
      .add("k", Kind::Int, 3, "level; epsilon = 2^-k")
      .add("T", Kind::Real, 1.0, "horizon")
      .add("chi", Kind::Real, nullptr, "chi_d for the model's skeleton dimension (default: fixture)")
      .add("n_paths", Kind::UInt, 10000, "training paths")
      .add("eval_paths", Kind::UInt, 10000, "fresh paths for the policy value (0 skips)")
      .add("features", Kind::Text, "poly2", "feature basis: poly1, poly2, poly2_action")
      .add("ridge", Kind::Real, 0.0, "ridge penalty")
      .add("policy_epsilon", Kind::Real, 0.0, "total optimality slack, split evenly across steps")
      .add("se_batches", Kind::UInt, 10, "disjoint refits for the V0 standard error (0: naive SE)")
      .add("policy_out", Kind::Text, "", "write the policy here")
      .add("values_out", Kind::Text, "", "write value-function coefficients (CSV) here");
  struct Parsed {
    std::unique_ptr<sk_model, void (*)(sk_model*)> model{nullptr, sk_model_free};
    sk_dp_config cfg{};
    std::string features;
    std::uint64_t eval_paths = 0, grid = 0;
    int d = 0;
    int k = 0;
  };
  auto parse = [](Command& c) {
    auto p = std::make_shared<Parsed>();
    if (c.at("model").is_null()) throw FieldError("model", "is required");
    sk_model* m = nullptr;
    const sk_status st = sk_model_create_json(c.at("model").dump().c_str(), &m);
    if (st != SK_OK) {
      const std::string f = sk_last_error_field();
      throw FieldError(f.empty() ? "model" : f, sk_last_error());
    }
    p->model.reset(m);
    int state = 0, action = 0;
    check(sk_model_info(m, &state, &action, &p->d, &p->grid));
    p->k = static_cast<int>(c.integer("k", 0, 30));
    p->features = c.text("features");
    p->cfg.epsilon_k = std::ldexp(1.0, -p->k);
    p->cfg.horizon = c.real("T", 0.0, 1e6, true);
    p->cfg.chi = c.chi(p->d);
    p->cfg.seed = c.seed();
    p->cfg.n_paths = c.count("n_paths", 2);
    p->cfg.features = p->features.c_str();
    p->cfg.ridge_lambda = c.real("ridge", 0.0, 1e12);
    p->cfg.policy_epsilon = c.real("policy_epsilon", 0.0, 1e12);
    p->cfg.workers = c.workers();
    p->cfg.se_batches = static_cast<unsigned>(c.count("se_batches", 0));
    if (p->cfg.se_batches == 1) throw FieldError("se_batches", "must be 0 or >= 2");
    p->eval_paths = c.count("eval_paths", 0);
    if (p->eval_paths == 1) throw FieldError("eval_paths", "must be 0 or >= 2");
    if (p->features != "poly1" && p->features != "poly2" && p->features != "poly2_action")
      throw FieldError("features", "must be poly1, poly2 or poly2_action");
    return p;
  };
  c.dry = [parse](Command& c) {
    const auto p = parse(c);
    const auto e = steps_for(p->cfg.horizon, p->k, p->cfg.chi);
    print_dry(std::to_string(e), std::to_string(p->grid),
              std::to_string(p->cfg.n_paths * e * p->grid) + " structure steps in training, " +
                  std::to_string(p->eval_paths * e) + " in evaluation");
  };
  c.run = [parse](Command& c) {
    const auto p = parse(c);
    sk_solution* s = nullptr;
    check(sk_solve(p->model.get(), &p->cfg, &s));
    std::unique_ptr<sk_solution, void (*)(sk_solution*)> guard(s, sk_solution_free);
    sk_estimate v0{};
    std::uint64_t steps = 0, a0 = 0;
    check(sk_solution_value(s, &v0, &steps, &a0));
    sk_estimate ev{std::nan(""), std::nan(""), 0};
    if (p->eval_paths > 0) check(sk_solution_evaluate(s, p->model.get(), &p->cfg, p->eval_paths, &ev));
    std::string body = "k,epsilon,steps,grid_size,v0,v0_std_err,v0_action,policy_value,policy_std_err,n_paths,eval_paths\n";
    body += std::to_string(p->k) + "," + num(p->cfg.epsilon_k) + "," + std::to_string(steps) + "," +
            std::to_string(p->grid) + "," + num(v0.mean) + "," + num(v0.std_err) + "," + std::to_string(a0) + "," +
            num(ev.mean) + "," + num(ev.std_err) + "," + std::to_string(p->cfg.n_paths) + "," +
            std::to_string(p->eval_paths) + "\n";
    c.emit_primary(body);
    const std::string h = c.header();
    if (const auto f = c.text("policy_out"); !f.empty()) {
      check(sk_solution_write_policy(s, f.c_str(), h.c_str()));
      c.record_output(f);
    }
    if (const auto f = c.text("values_out"); !f.empty()) {
      check(sk_solution_write_values_csv(s, f.c_str(), h.c_str()));
      c.record_output(f);
    }
    c.results()["v0"] = v0.mean;
    c.results()["v0_std_err"] = v0.std_err;
    if (p->eval_paths > 0) {
      c.results()["policy_value"] = ev.mean;
      c.results()["policy_std_err"] = ev.std_err;
    }
  };
  return c;
}

// ---- hedge -----------------------------------------------------------------

Command make_hedge() {
  sk_hedge_spec def{};
  sk_hedge_spec_default(&def);
  Command c("hedge", "Exchange-option hedging benchmark table");
  c.add("k", Kind::Text, "1", "level or comma list of levels, e.g. 1,2,3")
      .add("n_mc", Kind::UInt, def.n_mc, "Monte Carlo paths (training and evaluation each)")
      .add("s1_0", Kind::Real, def.s1_0, "initial price of asset 1")
      .add("s2_0", Kind::Real, def.s2_0, "initial price of asset 2")
      .add("sigma1", Kind::Real, def.sigma1, "volatility of asset 1")
      .add("sigma2", Kind::Real, def.sigma2, "volatility of asset 2")
      .add("T", Kind::Real, def.T, "maturity")
      .add("chi", Kind::Real, nullptr, "chi_2 (default: fixture)")
      .add("denominator", Kind::Text, "moment", "hedge-ratio denominator: moment or epsilon2")
      .add("generic_grid", Kind::UInt, 0, "also run the generic DP with this many grid points per axis (0 skips)");
  struct Parsed {
    sk_hedge_spec spec;
    std::vector<int> ks;
    std::uint64_t grid;
  };
  auto parse = [def](Command& c) {
    Parsed p{def, {}, 0};
    p.ks = parse_int_list("k", c.at("k"));
    for (int k : p.ks)
      if (k < 0 || k > 12) throw FieldError("k", "levels must lie in [0, 12]");
    p.spec.n_mc = c.count("n_mc", 2);
    p.spec.s1_0 = c.real("s1_0", 0.0, 1e12, true);
    p.spec.s2_0 = c.real("s2_0", 0.0, 1e12, true);
    p.spec.sigma1 = c.real("sigma1", 0.0, 10.0);
    p.spec.sigma2 = c.real("sigma2", 0.0, 10.0);
    p.spec.T = c.real("T", 0.0, 1e3, true);
    p.spec.chi = c.chi(2);
    p.spec.seed = c.seed();
    p.spec.workers = c.workers();
    const std::string den = c.text("denominator");
    if (den == "moment")
      p.spec.denominator = SK_DENOM_MOMENT;
    else if (den == "epsilon2")
      p.spec.denominator = SK_DENOM_EPSILON2;
    else
      throw FieldError("denominator", "must be 'moment' or 'epsilon2'");
    p.grid = c.count("generic_grid", 0);
    if (p.grid == 1) throw FieldError("generic_grid", "must be 0 or >= 2");
    return p;
  };
  c.dry = [parse](Command& c) {
    const Parsed p = parse(c);
    std::string steps, work;
    for (int k : p.ks) {
      const auto e = steps_for(p.spec.T, k, p.spec.chi);
      steps += (steps.empty() ? "" : ", ") + std::string("k=") + std::to_string(k) + ": " + std::to_string(e);
      std::uint64_t w = 2 * p.spec.n_mc * e;
      if (p.grid > 0) w += p.spec.n_mc * e * p.grid * p.grid;
      work += (work.empty() ? "" : ", ") + std::string("k=") + std::to_string(k) + ": " + std::to_string(w) +
              " path steps";
    }
    print_dry(steps, p.grid > 0 ? std::to_string(p.grid * p.grid) : "n/a (analytic rule)", work);
  };
  c.run = [parse](Command& c) {
    const Parsed p = parse(c);
    std::string table = "k,result,mse,true_value,difference,pct_error\n";
    std::string raw =
        "k,epsilon,steps,c_star,std_err,n_paths,mean_sq_error,unhedged_mean,denominator,generic_grid,"
        "generic_dp_objective,generic_dp_std_err,analytic_objective,analytic_std_err\n";
    json rows = json::array();
    for (int k : p.ks) {
      sk_hedge_spec spec = p.spec;
      spec.k = k;
      sk_hedge_result r{};
      check(sk_hedge_run(&spec, &r));
      const double diff = std::abs(r.c_star - r.true_value);
      table += std::to_string(k) + "," + num(r.c_star) + "," + num(r.mse) + "," + num(r.true_value) + "," +
               num(diff) + "," + num(100.0 * diff / r.true_value) + "\n";
      sk_estimate gdp{std::nan(""), std::nan(""), 0}, gan = gdp;
      if (p.grid > 0) check(sk_hedge_generic(&spec, p.grid, std::nan(""), &gdp, &gan, nullptr));
      raw += std::to_string(k) + "," + num(std::ldexp(1.0, -k)) + "," + std::to_string(r.steps) + "," +
             num(r.c_star) + "," + num(r.std_err) + "," + std::to_string(r.n_paths) + "," + num(r.mean_sq_error) +
             "," + num(r.unhedged_mean) + "," + c.text("denominator") + "," + std::to_string(p.grid) + "," +
             num(gdp.mean) + "," + num(gdp.std_err) + "," + num(gan.mean) + "," + num(gan.std_err) + "\n";
      rows.push_back({{"k", k}, {"c_star", r.c_star}, {"std_err", r.std_err}, {"true_value", r.true_value}});
    }
    c.emit_primary(table);
    if (const auto out = c.text("out"); !out.empty()) c.write_file(out + ".raw.csv", c.header() + raw);
    else std::cout << raw;
    c.results()["rows"] = rows;
  };
  return c;
}

// ---- rates -----------------------------------------------------------------

Command make_rates() {
  Command c("rates", "Convergence diagnostics: mesh decay, Euler strong error, FBM moments");
  c.add("kind", Kind::Text, "mesh", "mesh, euler or fbm")
      .add("ks", Kind::Text, nullptr, "levels (default 2..6 for mesh, 2..5 for euler)")
      .add("n_paths", Kind::UInt, 10000, "paths per level")
      .add("d", Kind::Int, 1, "mesh: dimension")
      .add("chi", Kind::Real, nullptr, "mesh: chi_d (default: fixture)")
      .add("t", Kind::Real, 1.0, "mesh: time t in E|t - T_e(k,t)|^p")
      .add("p", Kind::Real, 1.0, "mesh: moment order")
      .add("x0", Kind::Real, 1.0, "euler: initial value")
      .add("sigma", Kind::Real, 0.5, "euler: volatility of dX = sigma X dB")
      .add("T", Kind::Real, 1.0, "euler: horizon")
      .add("H", Kind::Real, 0.7, "fbm: Hurst index")
      .add("k", Kind::Int, 5, "fbm: level")
      .add("times", Kind::Text, "0.3,0.5,0.7", "fbm: evaluation times");
  c.dry = [](Command& c) {
    const std::string kind = c.text("kind");
    const auto n = c.count("n_paths", 2);
    c.workers();
    if (kind == "fbm") {
      const int k = static_cast<int>(c.integer("k", 0, 12));
      const auto ts = parse_real_list("times", c.at("times"));
      double tmax = 0;
      for (double t : ts) tmax = std::max(tmax, t);
      const auto e = steps_for(tmax, k, 1.0);
      print_dry(std::to_string(e), "n/a", std::to_string(n * e * e * ts.size()) + " kernel evaluations");
      return;
    }
    if (kind != "mesh" && kind != "euler") throw FieldError("kind", "must be mesh, euler or fbm");
    const bool mesh = kind == "mesh";
    const auto ks = c.at("ks").is_null() ? std::vector<int>{} : parse_int_list("ks", c.at("ks"));
    const std::vector<int> levels = !ks.empty() ? ks : (mesh ? std::vector<int>{2, 3, 4, 5, 6}
                                                             : std::vector<int>{2, 3, 4, 5});
    const int d = mesh ? static_cast<int>(c.integer("d", 1, 64)) : 1;
    const double chi = mesh ? c.chi(d) : 1.0;
    const double t = mesh ? c.real("t", 0.0, 1e6, true) : c.real("T", 0.0, 1e6, true);
    std::string steps;
    std::uint64_t work = 0;
    for (int k : levels) {
      const auto e = steps_for(t, k, chi);
      steps += (steps.empty() ? "" : ", ") + std::string("k=") + std::to_string(k) + ": " + std::to_string(e);
      work += n * e * static_cast<std::uint64_t>(d);
    }
    print_dry(steps, "n/a", std::to_string(work) + " draws");
  };
  c.run = [](Command& c) {
    const std::string kind = c.text("kind");
    const auto n = c.count("n_paths", 2);
    if (kind == "fbm") {
      const double H = c.real("H", 0.0, 1.0, true);
      if (H >= 1.0 || H == 0.5) throw FieldError("H", "must lie in (0, 1) and differ from 0.5");
      const int k = static_cast<int>(c.integer("k", 0, 12));
      const auto ts = parse_real_list("times", c.at("times"));
      for (double t : ts)
        if (!(t > 0.0)) throw FieldError("times", "must be positive");
      std::vector<double> cov(ts.size() * ts.size());
      check(sk_rates_fbm(H, k, ts.data(), ts.size(), n, c.seed(), c.workers(), cov.data()));
      std::string body = "s,t,second_moment,fbm_covariance,relative_error\n";
      for (std::size_t i = 0; i < ts.size(); ++i)
        for (std::size_t j = i; j < ts.size(); ++j) {
          const double s = ts[i], t = ts[j];
          const double exact =
              0.5 * (std::pow(s, 2 * H) + std::pow(t, 2 * H) - std::pow(std::abs(t - s), 2 * H));
          const double m = cov[i * ts.size() + j];
          body += num(s) + "," + num(t) + "," + num(m) + "," + num(exact) + "," + num((m - exact) / exact) + "\n";
        }
      c.emit_primary(body);
      return;
    }
    if (kind != "mesh" && kind != "euler") throw FieldError("kind", "must be mesh, euler or fbm");
    const bool mesh = kind == "mesh";
    auto ks = c.at("ks").is_null() ? (mesh ? std::vector<int>{2, 3, 4, 5, 6} : std::vector<int>{2, 3, 4, 5})
                                   : parse_int_list("ks", c.at("ks"));
    if (ks.size() < 2) throw FieldError("ks", "need at least two levels for a slope");
    for (int k : ks)
      if (k < 0 || k > 14) throw FieldError("ks", "levels must lie in [0, 14]");
    std::vector<sk_rate_point> pts(ks.size());
    double slope = 0.0;
    if (mesh) {
      const int d = static_cast<int>(c.integer("d", 1, 64));
      check(sk_rates_mesh(d, c.chi(d), c.real("t", 0.0, 1e6, true), c.real("p", 0.0, 16.0, true), ks.data(),
                          ks.size(), n, c.seed(), c.workers(), pts.data(), &slope));
    } else {
      check(sk_rates_euler(c.real("x0", 0.0, 1e12, true), c.real("sigma", 0.0, 10.0), c.real("T", 0.0, 1e3, true),
                           ks.data(), ks.size(), n, c.seed(), c.workers(), pts.data(), &slope));
    }
    std::string body = "k,epsilon,mean,std_err,n_paths\n";
    for (const auto& q : pts)
      body += std::to_string(q.k) + "," + num(q.epsilon) + "," + num(q.mean) + "," + num(q.std_err) + "," +
              std::to_string(q.n_paths) + "\n";
    c.emit_primary(body);
    c.results()["slope"] = slope;
    if (!c.text("out").empty()) std::cout << "slope " << num(slope) << "\n";
  };
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"skeldp: discrete-skeleton stochastic control"};
  app.set_version_flag("--version", std::string(sk_version()));
  app.require_subcommand(1);
  std::vector<Command> commands;
  commands.push_back(make_estimate_chi());
  commands.push_back(make_sample_skeleton());
  commands.push_back(make_solve());
  commands.push_back(make_hedge());
  commands.push_back(make_rates());
  for (auto& c : commands) c.attach(app);
  CLI11_PARSE(app, argc, argv);

  for (auto& c : commands) {
    if (!c.parsed()) continue;
    try {
      c.merge();
      if (c.dry_run()) {
        c.dry(c);
        return 0;
      }
      c.run(c);
      c.finish();
      return 0;
    } catch (const FieldError& e) {
      std::cerr << "error: " << c.name() << ": field '" << (e.field.empty() ? "?" : e.field) << "': " << e.what()
                << "\n";
      return 2;
    } catch (const std::exception& e) {
      std::cerr << "error: " << c.name() << " failed (seed " << c.cfg().value("seed", json(0)).dump()
                << ", workers " << c.cfg().value("workers", json(1)).dump() << "): " << e.what() << "\n";
      return 3;
    }
  }
  return 1;
}
