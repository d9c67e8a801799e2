#include "repfactor/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "repfactor/special_functions.hpp"

namespace repfactor {
namespace {

void require_finite(std::span<const double> x, const char* what) {
  for (double v : x)
    if (!std::isfinite(v)) throw Error(ErrorCode::NonFiniteValue, what);
}

// Strict inversions (i < j, x_i > x_j) by merge sort; equal values are not
// counted.
std::int64_t count_inversions(std::vector<double>& a, std::vector<double>& scratch, std::size_t lo, std::size_t hi) {
  if (hi - lo < 2) return 0;
  const std::size_t mid = lo + (hi - lo) / 2;
  std::int64_t inv = count_inversions(a, scratch, lo, mid) + count_inversions(a, scratch, mid, hi);
  std::size_t i = lo, j = mid, k = lo;
  while (i < mid && j < hi) {
    if (a[j] < a[i]) {
      inv += static_cast<std::int64_t>(mid - i);
      scratch[k++] = a[j++];
    } else {
      scratch[k++] = a[i++];
    }
  }
  while (i < mid) scratch[k++] = a[i++];
  while (j < hi) scratch[k++] = a[j++];
  std::copy(scratch.begin() + static_cast<std::ptrdiff_t>(lo), scratch.begin() + static_cast<std::ptrdiff_t>(hi),
            a.begin() + static_cast<std::ptrdiff_t>(lo));
  return inv;
}

// Sizes of groups of equal values.
std::vector<std::int64_t> tie_groups(std::span<const double> x) {
  std::vector<double> sorted(x.begin(), x.end());
  std::sort(sorted.begin(), sorted.end());
  std::vector<std::int64_t> out;
  for (std::size_t i = 0; i < sorted.size();) {
    std::size_t j = i;
    while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
    if (j - i > 1) out.push_back(static_cast<std::int64_t>(j - i));
    i = j;
  }
  return out;
}

}  // namespace

const char* to_string(Direction d) {
  switch (d) {
    case Direction::Increasing: return "increasing";
    case Direction::Decreasing: return "decreasing";
    case Direction::None: return "none";
  }
  return "none";
}

Alternative parse_alternative(const std::string& s) {
  if (s == "two_sided" || s == "two-sided") return Alternative::TwoSided;
  if (s == "greater") return Alternative::Greater;
  if (s == "less") return Alternative::Less;
  throw Error(ErrorCode::Usage, "unknown alternative '" + s + "'");
}

const char* to_string(Alternative a) {
  switch (a) {
    case Alternative::TwoSided: return "two_sided";
    case Alternative::Greater: return "greater";
    case Alternative::Less: return "less";
  }
  return "two_sided";
}

GroupProperty parse_property(const std::string& s) {
  if (s == "unique_chars") return GroupProperty::UniqueChars;
  if (s == "ttr") return GroupProperty::Ttr;
  if (s == "data_size") return GroupProperty::DataSize;
  throw Error(ErrorCode::Usage, "unknown property '" + s + "' (unique_chars, ttr, data_size)");
}

const char* to_string(GroupProperty p) {
  switch (p) {
    case GroupProperty::UniqueChars: return "unique_chars";
    case GroupProperty::Ttr: return "ttr";
    case GroupProperty::DataSize: return "data_size";
  }
  return "unique_chars";
}

double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size())
    throw Error(ErrorCode::LengthMismatch, std::to_string(x.size()) + " vs " + std::to_string(y.size()));
  if (x.size() < 3) throw Error(ErrorCode::TooFewPoints, "pearson needs at least 3 points");
  require_finite(x, "pearson x");
  require_finite(y, "pearson y");

  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) throw Error(ErrorCode::ConstantInput, "pearson input is constant");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

std::int64_t mann_kendall_s(std::span<const double> series) {
  require_finite(series, "mann-kendall series");
  const auto n = static_cast<std::int64_t>(series.size());
  std::vector<double> a(series.begin(), series.end());
  std::vector<double> scratch(a.size());
  const std::int64_t inversions = count_inversions(a, scratch, 0, a.size());
  std::int64_t tied_pairs = 0;
  for (std::int64_t t : tie_groups(series)) tied_pairs += t * (t - 1) / 2;
  const std::int64_t pairs = n * (n - 1) / 2;
  return pairs - tied_pairs - 2 * inversions;
}

TrendResult mann_kendall(std::span<const double> series, double alpha) {
  if (series.size() < 4) throw Error(ErrorCode::TooFewPoints, "mann-kendall needs at least 4 points");
  TrendResult r;
  r.s_statistic = mann_kendall_s(series);

  const double n = static_cast<double>(series.size());
  double ties = 0.0;
  for (std::int64_t t : tie_groups(series)) {
    const double td = static_cast<double>(t);
    ties += td * (td - 1.0) * (2.0 * td + 5.0);
  }
  r.variance = (n * (n - 1.0) * (2.0 * n + 5.0) - ties) / 18.0;
  if (r.variance <= 0.0) throw Error(ErrorCode::ZeroVariance, "all values are tied");

  const double s = static_cast<double>(r.s_statistic);
  if (r.s_statistic > 0) r.z_score = (s - 1.0) / std::sqrt(r.variance);
  else if (r.s_statistic < 0) r.z_score = (s + 1.0) / std::sqrt(r.variance);
  r.p_value = std::min(1.0, normal_two_sided_p(r.z_score));
  r.p_adjusted = r.p_value;
  if (r.p_value < alpha && r.s_statistic != 0)
    r.direction = r.s_statistic > 0 ? Direction::Increasing : Direction::Decreasing;
  return r;
}

BhResult bh_fdr(std::span<const double> p_values, double q) {
  if (!(q > 0.0 && q < 1.0)) throw Error(ErrorCode::InvalidQ, "q must be in (0, 1)");
  for (double p : p_values)
    if (!(p >= 0.0 && p <= 1.0)) throw Error(ErrorCode::InvalidP, "p-value outside [0, 1]");

  const std::size_t m = p_values.size();
  BhResult out{std::vector<bool>(m, false), std::vector<double>(m, 1.0)};
  if (m == 0) return out;

  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return p_values[a] < p_values[b]; });

  const double md = static_cast<double>(m);
  std::size_t cutoff = 0;  // number of rejections
  for (std::size_t i = 0; i < m; ++i)
    if (p_values[order[i]] <= static_cast<double>(i + 1) / md * q) cutoff = i + 1;
  for (std::size_t i = 0; i < cutoff; ++i) out.rejected[order[i]] = true;

  double running = 1.0;
  for (std::size_t i = m; i-- > 0;) {
    running = std::min(running, std::min(1.0, md * p_values[order[i]] / static_cast<double>(i + 1)));
    out.adjusted[order[i]] = running;
  }
  return out;
}

double sample_variance(std::span<const double> x) {
  if (x.size() < 2) throw Error(ErrorCode::TooFewPoints, "variance needs at least 2 points");
  const double n = static_cast<double>(x.size());
  const double mean = std::accumulate(x.begin(), x.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : x) ss += (v - mean) * (v - mean);
  return ss / (n - 1.0);
}

VarianceTestResult chi_square_variance(std::span<const double> sample, double reference_variance,
                                       Alternative alternative) {
  if (sample.size() < 2) throw Error(ErrorCode::TooFewPoints, "variance test needs at least 2 points");
  if (!(reference_variance > 0.0)) throw Error(ErrorCode::NonPositiveReference, "reference variance must be > 0");
  require_finite(sample, "variance test sample");

  VarianceTestResult r;
  r.df = static_cast<int>(sample.size()) - 1;
  r.sample_variance = sample_variance(sample);
  r.reference_variance = reference_variance;
  r.chi2 = r.df * r.sample_variance / reference_variance;
  const double lower = chi_square_cdf(r.chi2, r.df);
  const double upper = chi_square_sf(r.chi2, r.df);
  switch (alternative) {
    case Alternative::TwoSided: r.p_value = std::min(1.0, 2.0 * std::min(lower, upper)); break;
    case Alternative::Greater: r.p_value = upper; break;
    case Alternative::Less: r.p_value = lower; break;
  }
  return r;
}

TrendAnalysis layer_trend_analysis(const SignatureTable& table, const std::string& category, double alpha, double q) {
  TrendAnalysis out;
  for (const auto& g : table.groups()) {
    const auto series = table.condensed_series(g, category);
    if (series.empty()) continue;
    if (series.size() < 4) {
      out.skipped.push_back(g + ": only " + std::to_string(series.size()) + " layers");
      continue;
    }
    std::vector<double> values;
    for (const auto& [layer, v] : series) values.push_back(v);
    try {
      TrendResult r = mann_kendall(values, alpha);
      r.group_id = g;
      out.results.push_back(std::move(r));
    } catch (const Error& e) {
      if (e.code() != ErrorCode::ZeroVariance) throw;
      out.skipped.push_back(g + ": all layers tied");
    }
  }

  std::vector<double> p;
  for (const auto& r : out.results) p.push_back(r.p_value);
  const BhResult bh = bh_fdr(p, q);
  for (std::size_t i = 0; i < out.results.size(); ++i) {
    auto& r = out.results[i];
    r.p_adjusted = bh.adjusted[i];
    r.direction = Direction::None;
    if (bh.rejected[i] && r.s_statistic != 0)
      r.direction = r.s_statistic > 0 ? Direction::Increasing : Direction::Decreasing;
  }
  return out;
}

CorrelationResult property_correlation(const SignatureTable& table,
                                       const std::map<std::string, LanguageProfile>& profiles, GroupProperty property,
                                       int layer, const std::string& category) {
  std::vector<double> sig, prop;
  for (const auto& s : table.slice(layer, category)) {
    auto it = profiles.find(s.group_id);
    if (it == profiles.end()) throw Error(ErrorCode::MissingProfile, "no profile for group " + s.group_id);
    sig.push_back(s.condensed);
    switch (property) {
      case GroupProperty::UniqueChars: prop.push_back(static_cast<double>(it->second.unique_chars)); break;
      case GroupProperty::Ttr: prop.push_back(it->second.ttr); break;
      case GroupProperty::DataSize: prop.push_back(static_cast<double>(it->second.data_size)); break;
    }
  }
  if (sig.size() < 3)
    throw Error(ErrorCode::TooFewPoints, "layer " + std::to_string(layer) + ", " + category + ": only " +
                                             std::to_string(sig.size()) + " groups");
  return {pearson(sig, prop), sig.size()};
}

CorrelationResult external_score_correlation(const SignatureTable& table, const std::map<std::string, double>& scores,
                                             int layer, const std::string& category) {
  std::vector<double> sig, score;
  for (const auto& s : table.slice(layer, category)) {
    auto it = scores.find(s.group_id);
    if (it == scores.end()) continue;
    sig.push_back(s.condensed);
    score.push_back(it->second);
  }
  if (sig.size() < 3)
    throw Error(ErrorCode::TooFewPoints, "only " + std::to_string(sig.size()) + " groups have scores");
  return {pearson(sig, score), sig.size()};
}

VarianceTestResult group_variance_test(const SignatureTable& table, int layer, const std::string& category,
                                       const std::vector<std::string>& sample_groups,
                                       const std::vector<std::string>& reference_groups, Alternative alternative) {
  auto collect = [&](const std::vector<std::string>& groups) {
    std::vector<double> out;
    for (const auto& g : groups) {
      const Signature* s = table.find({g, layer, category});
      if (!s)
        throw Error(ErrorCode::MissingEntry,
                    "no signature for " + g + " at layer " + std::to_string(layer) + ", " + category);
      out.push_back(s->condensed);
    }
    return out;
  };
  const auto sample = collect(sample_groups);
  const auto reference = collect(reference_groups);
  return chi_square_variance(sample, sample_variance(reference), alternative);
}

}  // namespace repfactor
