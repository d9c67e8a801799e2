#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "repfactor/profile.hpp"
#include "repfactor/signatures.hpp"

namespace repfactor {

enum class Direction { Increasing, Decreasing, None };
const char* to_string(Direction d);

struct TrendResult {
  std::string group_id;
  std::int64_t s_statistic = 0;
  double variance = 0.0;  // tie-corrected Var(S)
  double z_score = 0.0;
  double p_value = 1.0;
  double p_adjusted = 1.0;  // equals p_value unless a correction was applied
  Direction direction = Direction::None;
};

struct BhResult {
  std::vector<bool> rejected;
  std::vector<double> adjusted;
};

enum class Alternative { TwoSided, Greater, Less };
Alternative parse_alternative(const std::string& s);
const char* to_string(Alternative a);

struct VarianceTestResult {
  double chi2 = 0.0;
  int df = 0;
  double p_value = 1.0;
  double sample_variance = 0.0;
  double reference_variance = 0.0;
};

/// Sample Pearson correlation; needs n >= 3 and non-constant inputs.
double pearson(std::span<const double> x, std::span<const double> y);

/// S = sum_{i<j} sgn(x_j - x_i), counted in O(n log n).
std::int64_t mann_kendall_s(std::span<const double> series);

/// Normal approximation with continuity correction and tie-corrected
/// variance; n >= 4.
TrendResult mann_kendall(std::span<const double> series, double alpha = 0.05);

/// Benjamini-Hochberg step-up procedure at level q.
BhResult bh_fdr(std::span<const double> p_values, double q);

/// One-sample chi-square test of a sample variance against a reference.
VarianceTestResult chi_square_variance(std::span<const double> sample, double reference_variance,
                                       Alternative alternative = Alternative::TwoSided);

/// Unbiased sample variance (n - 1 denominator).
double sample_variance(std::span<const double> x);

struct TrendAnalysis {
  std::vector<TrendResult> results;
  std::vector<std::string> skipped;  // groups with fewer than 4 layers
};

/// Mann-Kendall per group over condensed signatures ordered by layer, then
/// BH across groups; directions come from adjusted p < q.
TrendAnalysis layer_trend_analysis(const SignatureTable& table, const std::string& category, double alpha, double q);

enum class GroupProperty { UniqueChars, Ttr, DataSize };
GroupProperty parse_property(const std::string& s);
const char* to_string(GroupProperty p);

struct CorrelationResult {
  double r = 0.0;
  std::size_t n = 0;
};

CorrelationResult property_correlation(const SignatureTable& table,
                                       const std::map<std::string, LanguageProfile>& profiles, GroupProperty property,
                                       int layer, const std::string& category);

/// Groups without a score are left out (benchmarks cover subsets).
CorrelationResult external_score_correlation(const SignatureTable& table, const std::map<std::string, double>& scores,
                                             int layer, const std::string& category = "ALL");

/// Diverse-vs-related comparison: the reference variance is the sample
/// variance of the reference groups' condensed signatures.
VarianceTestResult group_variance_test(const SignatureTable& table, int layer, const std::string& category,
                                       const std::vector<std::string>& sample_groups,
                                       const std::vector<std::string>& reference_groups,
                                       Alternative alternative = Alternative::TwoSided);

}  // namespace repfactor
