#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "skeldp/skeleton.hpp"

namespace skeldp {

/**
 * Fractional Brownian motion built from the skeleton through the
 * Molchan-Golosov Volterra kernel, normalised so that Var B_H(t) = t^{2H}.
 *
 * H > 1/2:  K(t,s) = c_H s^{1/2-H} int_s^t u^{H-1/2} (u-s)^{H-3/2} du
 * H < 1/2:  K = K1 + K2 with
 *           K1(t,s) = c_H t^{H-1/2} s^{1/2-H} (t-s)^{H-1/2}
 *           K2(t,s) = c_H (1/2-H) s^{1/2-H} int_s^t u^{H-3/2} (u-s)^{H-1/2} du
 * The inner integrals are incomplete beta functions, so every step integral
 * of the kernel derivative is an exact difference of kernel values.
 */
struct FbmSpec {
  double H = 0.7;
  double sigma = 1.0;
  /// Kernel constant; 0 selects the unit-variance normalisation.
  double constant = 0.0;

  void validate() const;
  double c() const;
};

double molchan_constant(double H);

/// K(t, s) for H > 1/2; K(t, t) = 0.
double fbm_kernel_high(double H, double c, double t, double s);
/// K1(t, s) for H < 1/2 (infinite at s = t).
double fbm_kernel_low1(double H, double c, double t, double s);
/// K2(t, s) for H < 1/2 (infinite at s = 0, zero at s = t).
double fbm_kernel_low2(double H, double c, double t, double s);

/// B^k_H(T_n) given skeleton times T_0..T_N and one coordinate A(T_0..T_N) of
/// the step path; O(n) kernel evaluations.
double fbm_at(const FbmSpec& spec, std::span<const double> times, std::span<const double> a, std::size_t n);

/// B^k_H at every skeleton time; O(N^2).
std::vector<double> fbm_path(const FbmSpec& spec, std::span<const double> times, std::span<const double> a);

/// One coordinate of A^k at the skeleton times.
std::vector<double> skeleton_coordinate(const SkeletonPath& path, int axis);

/// The two discrete operators; the output is held constant between skeleton times.
std::vector<double> fbm_high(const SkeletonPath& path, const FbmSpec& spec, int axis = 0);
std::vector<double> fbm_low(const SkeletonPath& path, const FbmSpec& spec, int axis = 0);

}  // namespace skeldp
