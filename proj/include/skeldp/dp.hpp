#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "skeldp/skeleton.hpp"
#include "skeldp/structures.hpp"

namespace skeldp {

using Payoff = std::function<double(const StatePathView&)>;

/**
 * Feature bases over a history. The raw variables at step j are the current
 * state, the auxiliary state and the time T_j ("poly2", "poly1"), plus the
 * most recent action for "poly2_action". Variables are standardised per step
 * and variables that are constant across paths are dropped.
 */
enum class FeatureBasis { Poly1, Poly2, Poly2Action };

FeatureBasis feature_basis_from_name(const std::string& name);
std::string feature_basis_name(FeatureBasis b);

/// Raw variables of a history view.
int raw_variable_count(FeatureBasis b, int state_dim, int aux_width, int action_dim);
void raw_variables(FeatureBasis b, const StatePathView& h, std::span<double> out);
/// Polynomial features of already standardised active variables.
int feature_count(FeatureBasis b, int active_vars);
void polynomial_features(FeatureBasis b, std::span<const double> z, std::span<double> out);

struct StepRegression {
  std::vector<int> active;       // indices into the raw variables
  std::vector<double> centers;   // per active variable
  std::vector<double> scales;    // per active variable
  int n_features = 1;
  std::vector<double> coef;      // n_features * grid_size, column g = action g
  double lambda = 0.0;           // ridge actually used

  /// Fitted U_j(h, theta_g) for every grid action.
  void evaluate(FeatureBasis basis, std::span<const double> raw, std::span<double> u) const;
};

struct ValueFunctions {
  FeatureBasis basis = FeatureBasis::Poly2;
  int state_dim = 1;
  int aux_width = 0;
  int action_dim = 1;
  std::vector<double> grid;  // grid_size * action_dim, ascending lexicographic
  std::vector<StepRegression> steps;

  std::size_t grid_size() const { return grid.size() / action_dim; }
  std::size_t horizon() const { return steps.size(); }
};

/// Per-step tie tolerance for the epsilon budget split over m steps.
double step_tolerance(double epsilon, std::size_t m);
/// Index of the lexicographically largest action within `tol` of the maximum.
std::size_t select_action(std::span<const double> u, double tol);

struct Policy {
  ValueFunctions values;
  double epsilon = 0.0;

  /// Grid index chosen at a history of length h.last.
  std::size_t choose(const StatePathView& h) const;
  std::span<const double> action(std::size_t g) const {
    return std::span<const double>(values.grid).subspan(g * values.action_dim, values.action_dim);
  }
  std::size_t horizon() const { return values.horizon(); }
};

Policy extract_epsilon_policy(const ValueFunctions& values, double epsilon);

void write_policy(std::ostream& out, const Policy& p);
Policy read_policy(std::istream& in);
/// One row per (step, action, coefficient).
void write_values_csv(std::ostream& out, const ValueFunctions& v);

struct ValueEstimate {
  double mean = 0.0;
  double std_err = 0.0;
  std::uint64_t n_paths = 0;
};

struct DpConfig {
  double epsilon_k = 0.5;
  double horizon = 1.0;
  double chi = 1.0;
  std::uint64_t seed = 0;
  std::size_t n_paths = 10000;
  FeatureBasis basis = FeatureBasis::Poly2;
  double ridge_lambda = 0.0;
  double policy_epsilon = 0.0;
  unsigned workers = 1;
  /// Disjoint batches for the sectioning SE of V0 (used when every batch has
  /// at least 8 paths); 0 keeps the naive SE.
  std::size_t se_batches = 10;

  std::uint64_t steps() const { return e_steps(horizon, epsilon_k, chi); }
  void validate() const;
};

struct DpSolution {
  ValueEstimate v0;  // std_err from sectioning when enabled
  double v0_naive_std_err = 0.0;
  std::size_t v0_action = 0;
  Policy policy;
  std::uint64_t steps = 0;
};

/// Regression Monte Carlo backward induction over the action grid.
DpSolution backward_solve(const Structure& s, const Payoff& payoff, const ActionSpace& actions, const DpConfig& cfg);

/// Fresh paths (evaluation stream) driven by the policy.
ValueEstimate evaluate_policy(const Policy& p, const Structure& s, const Payoff& payoff, const DpConfig& cfg,
                              std::size_t n_paths);

/// Same, with an arbitrary non-anticipative rule writing a_j from the history.
using ActionRule = std::function<void(const StatePathView&, std::span<double>)>;
ValueEstimate evaluate_rule(const ActionRule& rule, const Structure& s, const Payoff& payoff, const DpConfig& cfg,
                            std::size_t n_paths, std::uint64_t seed_tag);

struct RegressionFit {
  std::vector<double> coef;  // F * K, column-major
  double lambda = 0.0;
  int escalations = 0;
};

/// Least squares X b = Y for K right-hand sides via the normal equations.
/// Singular systems trigger ridge regularisation escalated x10 up to three
/// times; after that a NumericalError is thrown.
RegressionFit least_squares(std::span<const double> x, std::size_t rows, std::size_t cols, std::span<const double> y,
                            std::size_t k, double ridge_lambda);

}  // namespace skeldp
