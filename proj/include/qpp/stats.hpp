#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace qpp::stats {

double mean(std::span<const double> xs);
/// Population (divide-by-n) standard deviation.
double population_std(std::span<const double> xs);
/// Throws NumericError when either vector has zero variance.
double pearson(std::span<const double> x, std::span<const double> y);

/// Fractional ranks by value descending; ties get the average of the
/// ranks they span. Ranks start at 1.
std::vector<double> fractional_ranks_desc(std::span<const double> values);

/// Regularized lower incomplete gamma P(a, x).
double gamma_p(double a, double x);
/// Chi-square survival function P(X > x) with df degrees of freedom.
double chi2_sf(double x, double df);
/// Two-sided normal p-value for a z statistic.
double normal_two_sided_p(double z);

/// FNV-1a, used for deterministic per-grid-point seeds.
std::uint64_t fnv1a(const std::string& s);

}  // namespace qpp::stats
