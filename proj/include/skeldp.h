/*
 * skeldp C interface.
 *
 * Every function returns an sk_status. On failure the message is available
 * from sk_last_error() until the next failing call on the same thread.
 * Objects are opaque handles released with the matching *_free function;
 * passing NULL to a *_free function is a no-op.
 */
#ifndef SKELDP_H
#define SKELDP_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define SK_API __declspec(dllexport)
#else
#define SK_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum sk_status {
  SK_OK = 0,
  SK_ERR_INVALID_ARGUMENT = 1, /* bad configuration or caller bug */
  SK_ERR_NUMERICAL = 2,        /* singular regression, non-finite values */
  SK_ERR_IO = 3,               /* file could not be read or written */
  SK_ERR_INTERNAL = 4
} sk_status;

SK_API const char* sk_last_error(void);
/* Field name of the last configuration error, or "" when not applicable. */
SK_API const char* sk_last_error_field(void);
SK_API const char* sk_version(void);

/* ---- distributions ---------------------------------------------------- */

SK_API sk_status sk_exit_time_survival(double t, double* out);
SK_API sk_status sk_exit_time_density(double t, double* out);
SK_API sk_status sk_nu_mass_d2(double a, double b, int exit_sign, int exit_axis, double y_lo, double y_hi,
                               double epsilon, double* out);

typedef struct sk_estimate {
  double mean;
  double std_err;
  uint64_t n;
} sk_estimate;

SK_API sk_status sk_estimate_chi(int d, uint64_t n_samples, uint64_t seed, unsigned workers, sk_estimate* out);
/* Looks up chi_d in the fixture table. path may be NULL or "" for the default
 * resolution (CHI_FIXTURE_PATH, then the source tree data/ directory). The
 * resolved file name is copied to source (may be NULL). */
SK_API sk_status sk_chi_lookup(const char* path, int d, sk_estimate* out, char* source, size_t source_len);

/* ---- skeleton ---------------------------------------------------------- */

SK_API sk_status sk_e_steps(double t, double epsilon, double chi, uint64_t* out);

typedef struct sk_skeleton_config {
  int dimension;
  double epsilon;
  double horizon;
  double chi;
  uint64_t seed;
} sk_skeleton_config;

typedef struct sk_skeleton_batch sk_skeleton_batch;

/* n_steps = 0 selects e(k, horizon). */
SK_API sk_status sk_skeleton_batch_simulate(const sk_skeleton_config* cfg, uint64_t n_steps, uint64_t n_paths,
                                            unsigned workers, sk_skeleton_batch** out);
SK_API sk_status sk_skeleton_batch_shape(const sk_skeleton_batch* b, uint64_t* n_paths, uint64_t* n_steps, int* d);
/* Borrowed pointers valid until the batch is freed. */
SK_API sk_status sk_skeleton_batch_path(const sk_skeleton_batch* b, uint64_t i, const double** delta_times,
                                        const double** increments);
SK_API sk_status sk_skeleton_batch_write(const sk_skeleton_batch* b, const char* path, const char* config_text);
SK_API void sk_skeleton_batch_free(sk_skeleton_batch* b);

/* ---- models and dynamic programming ----------------------------------- */

typedef struct sk_model sk_model;
SK_API sk_status sk_model_create_json(const char* json, sk_model** out);
SK_API sk_status sk_model_info(const sk_model* m, int* state_dim, int* action_dim, int* skeleton_dim,
                               uint64_t* grid_size);
SK_API void sk_model_free(sk_model* m);

typedef struct sk_dp_config {
  double epsilon_k;
  double horizon;
  double chi;
  uint64_t seed;
  uint64_t n_paths;
  const char* features; /* "poly2" (default when NULL), "poly1", "poly2_action" */
  double ridge_lambda;
  double policy_epsilon;
  unsigned workers;
  /* Disjoint refits behind the V0 standard error; 0 gives the naive SE of
   * the step-0 targets, which ignores regression error. */
  unsigned se_batches;
} sk_dp_config;

typedef struct sk_solution sk_solution;
SK_API sk_status sk_solve(const sk_model* m, const sk_dp_config* cfg, sk_solution** out);
SK_API sk_status sk_solution_value(const sk_solution* s, sk_estimate* v0, uint64_t* steps, uint64_t* v0_action);
/* Fresh evaluation paths under the extracted policy. */
SK_API sk_status sk_solution_evaluate(const sk_solution* s, const sk_model* m, const sk_dp_config* cfg,
                                      uint64_t n_paths, sk_estimate* out);
/* header: text written verbatim before the content (may be NULL). */
SK_API sk_status sk_solution_write_policy(const sk_solution* s, const char* path, const char* header);
SK_API sk_status sk_solution_write_values_csv(const sk_solution* s, const char* path, const char* header);
SK_API void sk_solution_free(sk_solution* s);

/* ---- hedging ------------------------------------------------------------ */

typedef enum sk_hedge_denominator { SK_DENOM_MOMENT = 0, SK_DENOM_EPSILON2 = 1 } sk_hedge_denominator;

typedef struct sk_hedge_spec {
  double s1_0, s2_0, sigma1, sigma2, T;
  int k;
  uint64_t n_mc;
  double chi;
  uint64_t seed;
  unsigned workers;
  int denominator; /* sk_hedge_denominator */
} sk_hedge_spec;

/* The benchmark defaults (49, 52, 0.2, 0.3, 1, k = 1, 3e4 paths). */
SK_API void sk_hedge_spec_default(sk_hedge_spec* spec);
SK_API sk_status sk_margrabe_price(const sk_hedge_spec* spec, double* out);

typedef struct sk_hedge_result {
  double c_star;
  double std_err;
  double mse;
  double mean_sq_error;
  double true_value;
  double unhedged_mean;
  uint64_t steps;
  uint64_t n_paths;
} sk_hedge_result;

SK_API sk_status sk_hedge_run(const sk_hedge_spec* spec, sk_hedge_result* out);
/* Generic DP on the hedging structure with grid_points per axis; c is the
 * cash amount in the quadratic loss (NaN selects the closed-form price).
 * Returns E(c + X - H)^2 under the DP policy and under the fitted analytic
 * rule on the same evaluation paths, plus the in-sample DP value. */
SK_API sk_status sk_hedge_generic(const sk_hedge_spec* spec, uint64_t grid_points, double c,
                                  sk_estimate* objective_dp, sk_estimate* objective_analytic, sk_estimate* v0);

/* ---- convergence diagnostics -------------------------------------------- */

typedef struct sk_rate_point {
  int k;
  double epsilon;
  double mean;
  double std_err;
  uint64_t n_paths;
} sk_rate_point;

/* points must hold n_k entries; ks lists the levels (epsilon = 2^-k). */
SK_API sk_status sk_rates_mesh(int d, double chi, double t, double p, const int* ks, size_t n_k, uint64_t n_paths,
                               uint64_t seed, unsigned workers, sk_rate_point* points, double* slope);
SK_API sk_status sk_rates_euler(double x0, double sigma, double T, const int* ks, size_t n_k, uint64_t n_paths,
                                uint64_t seed, unsigned workers, sk_rate_point* points, double* slope);
/* covariance must hold n_times^2 entries (row-major second moments). */
SK_API sk_status sk_rates_fbm(double H, int k, const double* times, size_t n_times, uint64_t n_paths, uint64_t seed,
                              unsigned workers, double* covariance);

#ifdef __cplusplus
}
#endif

#endif /* SKELDP_H */
