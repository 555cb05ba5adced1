#pragma once

#include <span>
#include <vector>

/**
 * @file normstats.hpp
 *
 * @brief Scalar kernels for the standard normal distribution, plus
 * Benjamini-Hochberg adjustment and a Kolmogorov-Smirnov uniformity distance.
 *
 * All functions are pure and throw `std::domain_error` on invalid input.
 */

namespace finmeta {

/// Lower-tail probability Phi(x).
double std_normal_cdf(double x);

/// Upper-tail probability 1 - Phi(x), evaluated through erfc so that it
/// keeps full relative precision far into the right tail.
double std_normal_upper_tail(double x);

/**
 * Inverse of `std_normal_cdf()` for `p` in the open interval (0, 1).
 *
 * Uses Wichura's AS241 rational approximations (about 16 significant
 * digits across the whole range). The upper half is evaluated through the
 * exact complement `1 - p`, so no precision is lost near 1.
 */
double std_normal_quantile(double p);

/// Phi^{-1}(1 - p), computed as -Phi^{-1}(p) so that tiny `p` does not
/// collapse to a quantile of exactly 1.
double std_normal_upper_quantile(double p);

/// Survival function of a chi-square variable with one degree of freedom.
double chisq1_upper_tail(double statistic);

/// Benjamini-Hochberg step-up adjusted p-values, in input order.
std::vector<double> bh_adjust(std::span<const double> p);

/// Two-sided Kolmogorov-Smirnov distance between the empirical CDF of `p`
/// and the Uniform(0, 1) CDF.
double ks_uniform_stat(std::span<const double> p);

}  // namespace finmeta
