#include "skeldp.h"

#include <cmath>
#include <cstring>
#include <fstream>
#include <new>
#include <string>

#include "skeldp/distributions.hpp"
#include "skeldp/dp.hpp"
#include "skeldp/errors.hpp"
#include "skeldp/hedging.hpp"
#include "skeldp/models.hpp"
#include "skeldp/rates.hpp"
#include "skeldp/skeleton.hpp"

#ifndef SKELDP_VERSION_STRING
#define SKELDP_VERSION_STRING "0.0.0"
#endif

struct sk_skeleton_batch {
  std::vector<skeldp::SkeletonPath> paths;
  std::uint64_t n_steps = 0;
  int d = 1;
};

struct sk_model {
  skeldp::Model model;
};

struct sk_solution {
  skeldp::DpSolution solution;
};

namespace {

thread_local std::string g_error;
thread_local std::string g_field;

sk_status fail(sk_status s, const std::string& msg, const std::string& field = "") {
  g_error = msg;
  g_field = field;
  return s;
}

template <class F>
sk_status guarded(F&& f) {
  try {
    f();
    return SK_OK;
  } catch (const skeldp::ConfigError& e) {
    return fail(SK_ERR_INVALID_ARGUMENT, e.what(), e.field());
  } catch (const skeldp::NumericalError& e) {
    return fail(SK_ERR_NUMERICAL, e.what());
  } catch (const std::invalid_argument& e) {
    return fail(SK_ERR_INVALID_ARGUMENT, e.what());
  } catch (const std::out_of_range& e) {
    return fail(SK_ERR_INVALID_ARGUMENT, e.what());
  } catch (const std::ios_base::failure& e) {
    return fail(SK_ERR_IO, e.what());
  } catch (const std::bad_alloc&) {
    return fail(SK_ERR_INTERNAL, "out of memory");
  } catch (const std::runtime_error& e) {
    return fail(SK_ERR_IO, e.what());
  } catch (const std::exception& e) {
    return fail(SK_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(SK_ERR_INTERNAL, "unknown error");
  }
}

void need(const void* p, const char* name) {
  if (!p) throw std::invalid_argument(std::string(name) + " must not be NULL");
}

sk_estimate to_c(const skeldp::ValueEstimate& v) { return {v.mean, v.std_err, v.n_paths}; }

skeldp::DpConfig dp_config(const sk_dp_config* c) {
  need(c, "cfg");
  skeldp::DpConfig d;
  d.epsilon_k = c->epsilon_k;
  d.horizon = c->horizon;
  d.chi = c->chi;
  d.seed = c->seed;
  d.n_paths = c->n_paths;
  d.basis = skeldp::feature_basis_from_name(c->features && *c->features ? c->features : "poly2");
  d.ridge_lambda = c->ridge_lambda;
  d.policy_epsilon = c->policy_epsilon;
  d.workers = c->workers;
  d.se_batches = c->se_batches;
  d.validate();
  return d;
}

skeldp::HedgeSpec hedge_spec(const sk_hedge_spec* s) {
  need(s, "spec");
  skeldp::HedgeSpec h;
  h.s1_0 = s->s1_0;
  h.s2_0 = s->s2_0;
  h.sigma1 = s->sigma1;
  h.sigma2 = s->sigma2;
  h.T = s->T;
  h.k = s->k;
  h.n_mc = s->n_mc;
  h.chi = s->chi;
  h.seed = s->seed;
  h.workers = s->workers;
  if (s->denominator != SK_DENOM_MOMENT && s->denominator != SK_DENOM_EPSILON2)
    throw skeldp::ConfigError("denominator", "must be 0 (moment) or 1 (epsilon2)");
  h.denominator = s->denominator == SK_DENOM_MOMENT ? skeldp::HedgeDenominator::Moment
                                                    : skeldp::HedgeDenominator::Epsilon2;
  h.validate();
  return h;
}

void write_text(const char* path, const char* header, const auto& body) {
  need(path, "path");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error(std::string("cannot open for writing: ") + path);
  if (header) out << header;
  body(out);
  if (!out) throw std::runtime_error(std::string("write failed: ") + path);
}

void copy_points(const skeldp::RateStudy& s, sk_rate_point* points, double* slope) {
  for (std::size_t i = 0; i < s.points.size(); ++i) {
    const auto& p = s.points[i];
    points[i] = {p.k, p.epsilon, p.mean, p.std_err, p.n_paths};
  }
  if (slope) *slope = s.slope;
}

}  // namespace

extern "C" {

const char* sk_last_error(void) { return g_error.c_str(); }
const char* sk_last_error_field(void) { return g_field.c_str(); }
const char* sk_version(void) { return SKELDP_VERSION_STRING; }

sk_status sk_exit_time_survival(double t, double* out) {
  return guarded([&] {
    need(out, "out");
    if (!(t >= 0.0)) throw std::invalid_argument("t must be >= 0");
    *out = skeldp::exit_time().survival(t);
  });
}

sk_status sk_exit_time_density(double t, double* out) {
  return guarded([&] {
    need(out, "out");
    if (!(t >= 0.0)) throw std::invalid_argument("t must be >= 0");
    *out = skeldp::exit_time().density(t);
  });
}

sk_status sk_nu_mass_d2(double a, double b, int exit_sign, int exit_axis, double y_lo, double y_hi, double epsilon,
                        double* out) {
  return guarded([&] {
    need(out, "out");
    *out = skeldp::nu_mass_d2(a, b, exit_sign, exit_axis, y_lo, y_hi, epsilon);
  });
}

sk_status sk_estimate_chi(int d, uint64_t n_samples, uint64_t seed, unsigned workers, sk_estimate* out) {
  return guarded([&] {
    need(out, "out");
    if (workers < 1) throw skeldp::ConfigError("workers", "must be >= 1");
    const auto e = skeldp::estimate_chi(d, n_samples, seed, workers);
    *out = {e.estimate, e.std_err, e.n_samples};
  });
}

sk_status sk_chi_lookup(const char* path, int d, sk_estimate* out, char* source, size_t source_len) {
  return guarded([&] {
    need(out, "out");
    const auto table = skeldp::ChiTable::load_default(path ? path : "");
    const auto& e = table.at(d);
    *out = {e.estimate, e.std_err, e.n_samples};
    if (source && source_len > 0) {
      std::strncpy(source, table.source().c_str(), source_len - 1);
      source[source_len - 1] = '\0';
    }
  });
}

sk_status sk_e_steps(double t, double epsilon, double chi, uint64_t* out) {
  return guarded([&] {
    need(out, "out");
    *out = skeldp::e_steps(t, epsilon, chi);
  });
}

sk_status sk_skeleton_batch_simulate(const sk_skeleton_config* cfg, uint64_t n_steps, uint64_t n_paths,
                                     unsigned workers, sk_skeleton_batch** out) {
  return guarded([&] {
    need(cfg, "cfg");
    need(out, "out");
    *out = nullptr;
    skeldp::SkeletonConfig c{cfg->dimension, cfg->epsilon, cfg->horizon, cfg->chi, cfg->seed};
    c.validate();
    if (n_paths < 1) throw skeldp::ConfigError("n_paths", "must be >= 1");
    if (workers < 1) throw skeldp::ConfigError("workers", "must be >= 1");
    auto b = std::make_unique<sk_skeleton_batch>();
    b->n_steps = n_steps ? n_steps : c.steps();
    b->d = c.dimension;
    b->paths = skeldp::simulate_batch(c, b->n_steps, n_paths, workers);
    *out = b.release();
  });
}

sk_status sk_skeleton_batch_shape(const sk_skeleton_batch* b, uint64_t* n_paths, uint64_t* n_steps, int* d) {
  return guarded([&] {
    need(b, "batch");
    if (n_paths) *n_paths = b->paths.size();
    if (n_steps) *n_steps = b->n_steps;
    if (d) *d = b->d;
  });
}

sk_status sk_skeleton_batch_path(const sk_skeleton_batch* b, uint64_t i, const double** delta_times,
                                 const double** increments) {
  return guarded([&] {
    need(b, "batch");
    if (i >= b->paths.size()) throw std::out_of_range("path index out of range");
    if (delta_times) *delta_times = b->paths[i].delta_times.data();
    if (increments) *increments = b->paths[i].increments.data();
  });
}

sk_status sk_skeleton_batch_write(const sk_skeleton_batch* b, const char* path, const char* config_text) {
  return guarded([&] {
    need(b, "batch");
    need(path, "path");
    skeldp::write_skeleton_batch(path, b->paths, config_text ? config_text : "");
  });
}

void sk_skeleton_batch_free(sk_skeleton_batch* b) { delete b; }

sk_status sk_model_create_json(const char* json, sk_model** out) {
  return guarded([&] {
    need(json, "json");
    need(out, "out");
    *out = nullptr;
    auto m = std::make_unique<sk_model>();
    m->model = skeldp::make_model_from_json(json);
    *out = m.release();
  });
}

sk_status sk_model_info(const sk_model* m, int* state_dim, int* action_dim, int* skeleton_dim, uint64_t* grid_size) {
  return guarded([&] {
    need(m, "model");
    if (state_dim) *state_dim = m->model.structure->state_dim();
    if (action_dim) *action_dim = m->model.structure->action_dim();
    if (skeleton_dim) *skeleton_dim = m->model.structure->skeleton_dim();
    if (grid_size) *grid_size = m->model.actions.grid_size();
  });
}

void sk_model_free(sk_model* m) { delete m; }

sk_status sk_solve(const sk_model* m, const sk_dp_config* cfg, sk_solution** out) {
  return guarded([&] {
    need(m, "model");
    need(out, "out");
    *out = nullptr;
    const auto c = dp_config(cfg);
    auto s = std::make_unique<sk_solution>();
    s->solution = skeldp::backward_solve(*m->model.structure, m->model.payoff, m->model.actions, c);
    *out = s.release();
  });
}

sk_status sk_solution_value(const sk_solution* s, sk_estimate* v0, uint64_t* steps, uint64_t* v0_action) {
  return guarded([&] {
    need(s, "solution");
    if (v0) *v0 = to_c(s->solution.v0);
    if (steps) *steps = s->solution.steps;
    if (v0_action) *v0_action = s->solution.v0_action;
  });
}

sk_status sk_solution_evaluate(const sk_solution* s, const sk_model* m, const sk_dp_config* cfg, uint64_t n_paths,
                               sk_estimate* out) {
  return guarded([&] {
    need(s, "solution");
    need(m, "model");
    need(out, "out");
    if (n_paths < 2) throw skeldp::ConfigError("eval_paths", "must be >= 2");
    const auto c = dp_config(cfg);
    *out = to_c(skeldp::evaluate_policy(s->solution.policy, *m->model.structure, m->model.payoff, c, n_paths));
  });
}

sk_status sk_solution_write_policy(const sk_solution* s, const char* path, const char* header) {
  return guarded([&] {
    need(s, "solution");
    write_text(path, header, [&](std::ostream& o) { skeldp::write_policy(o, s->solution.policy); });
  });
}

sk_status sk_solution_write_values_csv(const sk_solution* s, const char* path, const char* header) {
  return guarded([&] {
    need(s, "solution");
    write_text(path, header, [&](std::ostream& o) { skeldp::write_values_csv(o, s->solution.policy.values); });
  });
}

void sk_solution_free(sk_solution* s) { delete s; }

void sk_hedge_spec_default(sk_hedge_spec* spec) {
  if (!spec) return;
  const skeldp::HedgeSpec h;
  *spec = {h.s1_0, h.s2_0, h.sigma1, h.sigma2, h.T, h.k, h.n_mc, h.chi, h.seed, h.workers, SK_DENOM_MOMENT};
}

sk_status sk_margrabe_price(const sk_hedge_spec* spec, double* out) {
  return guarded([&] {
    need(spec, "spec");
    need(out, "out");
    skeldp::HedgeSpec h;
    h.s1_0 = spec->s1_0;
    h.s2_0 = spec->s2_0;
    h.sigma1 = spec->sigma1;
    h.sigma2 = spec->sigma2;
    h.T = spec->T;
    *out = skeldp::margrabe_price(h);
  });
}

sk_status sk_hedge_run(const sk_hedge_spec* spec, sk_hedge_result* out) {
  return guarded([&] {
    need(out, "out");
    const auto r = skeldp::solve_hedge_analytic(hedge_spec(spec));
    *out = {r.c_star.mean, r.c_star.std_err, r.mse,   r.mean_sq_error,
            r.true_value,  r.unhedged_mean,  r.steps, r.c_star.n_paths};
  });
}

sk_status sk_hedge_generic(const sk_hedge_spec* spec, uint64_t grid_points, double c, sk_estimate* objective_dp,
                           sk_estimate* objective_analytic, sk_estimate* v0) {
  return guarded([&] {
    const auto h = hedge_spec(spec);
    if (grid_points < 2) throw skeldp::ConfigError("grid", "needs at least 2 points per axis");
    const auto g = skeldp::solve_hedge_generic(h, grid_points, c);
    if (objective_dp) *objective_dp = to_c(g.objective);
    if (v0) *v0 = to_c(g.dp.v0);
    if (objective_analytic) {
      const auto a = skeldp::solve_hedge_analytic(h);
      *objective_analytic = to_c(skeldp::hedge_objective_analytic(h, a.policy, g.c));
    }
  });
}

sk_status sk_rates_mesh(int d, double chi, double t, double p, const int* ks, size_t n_k, uint64_t n_paths,
                        uint64_t seed, unsigned workers, sk_rate_point* points, double* slope) {
  return guarded([&] {
    need(ks, "ks");
    need(points, "points");
    const auto s = skeldp::mesh_rates(d, chi, t, p, std::vector<int>(ks, ks + n_k), n_paths, seed, workers);
    copy_points(s, points, slope);
  });
}

sk_status sk_rates_euler(double x0, double sigma, double T, const int* ks, size_t n_k, uint64_t n_paths,
                         uint64_t seed, unsigned workers, sk_rate_point* points, double* slope) {
  return guarded([&] {
    need(ks, "ks");
    need(points, "points");
    const auto s = skeldp::euler_rates(x0, sigma, T, std::vector<int>(ks, ks + n_k), n_paths, seed, workers);
    copy_points(s, points, slope);
  });
}

sk_status sk_rates_fbm(double H, int k, const double* times, size_t n_times, uint64_t n_paths, uint64_t seed,
                       unsigned workers, double* covariance) {
  return guarded([&] {
    need(times, "times");
    need(covariance, "covariance");
    const auto m =
        skeldp::fbm_moments(H, k, std::vector<double>(times, times + n_times), n_paths, seed, workers);
    std::copy(m.covariance.begin(), m.covariance.end(), covariance);
  });
}

}  // extern "C"
