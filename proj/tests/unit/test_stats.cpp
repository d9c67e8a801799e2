#include <algorithm>
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "repfactor/special_functions.hpp"
#include "repfactor/stats.hpp"
#include "tables.hpp"

using namespace repfactor;
using testing_support::condensed_table;

namespace {

template <typename Fn>
ErrorCode error_of(Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::Usage;
}

std::vector<double> random_series(std::mt19937_64& rng, std::size_t n, int levels) {
  // Few levels force ties; levels <= 0 draws continuous values.
  std::vector<double> x(n);
  std::uniform_real_distribution<double> u(-1, 1);
  std::uniform_int_distribution<int> k(0, std::max(levels, 1) - 1);
  for (double& v : x) v = levels > 0 ? double(k(rng)) : u(rng);
  return x;
}

}  // namespace

TEST_CASE("pearson examples") {
  const std::vector<double> a{1, 2, 3};
  CHECK(pearson(a, std::vector<double>{2, 4, 6}) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(pearson(a, std::vector<double>{6, 4, 2}) == doctest::Approx(-1.0).epsilon(1e-15));
  CHECK(error_of([&] { pearson(a, std::vector<double>{1, 2}); }) == ErrorCode::LengthMismatch);
  CHECK(error_of([] { pearson(std::vector<double>{1, 2}, std::vector<double>{1, 2}); }) == ErrorCode::TooFewPoints);
  CHECK(error_of([&] { pearson(a, std::vector<double>{7, 7, 7}); }) == ErrorCode::ConstantInput);
}

TEST_CASE("pearson matches the definitional formula") {
  std::mt19937_64 rng(100);
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> x(3 + trial), y(3 + trial);
    for (std::size_t i = 0; i < x.size(); ++i) {
      x[i] = g(rng) * 50 + 1e3;
      y[i] = 0.3 * x[i] + g(rng) * 20;
    }
    CHECK(std::abs(pearson(x, y) - oracle::pearson(x, y)) <= 1e-12);
  }
}

TEST_CASE("pearson affine behaviour") {
  std::mt19937_64 rng(101);
  std::normal_distribution<double> g;
  std::vector<double> x(30), y(30);
  for (std::size_t i = 0; i < x.size(); ++i) {
    x[i] = g(rng);
    y[i] = x[i] + g(rng);
  }
  const double r = pearson(x, y);
  std::vector<double> ax = x, ny = y;
  for (double& v : ax) v = 3.5 * v - 7;
  for (double& v : ny) v = -2 * v;
  CHECK(pearson(ax, y) == doctest::Approx(r).epsilon(1e-13));
  CHECK(pearson(x, ny) == doctest::Approx(-r).epsilon(1e-13));
}

TEST_CASE("mann_kendall examples") {
  const auto up = mann_kendall(std::vector<double>{1, 2, 3, 4, 5});
  CHECK(up.s_statistic == 10);
  CHECK(up.direction == Direction::Increasing);

  const auto down = mann_kendall(std::vector<double>{5, 4, 3, 2, 1});
  CHECK(down.s_statistic == -10);
  CHECK(down.variance == doctest::Approx(50.0 / 3.0).epsilon(1e-15));
  CHECK(down.z_score == doctest::Approx(-9.0 / std::sqrt(50.0 / 3.0)).epsilon(1e-15));
  CHECK(down.z_score == doctest::Approx(-2.205).epsilon(1e-3));
  CHECK(std::abs(down.p_value - oracle::kMkDescendingFiveP) <= 1e-10);
  CHECK(down.p_value == doctest::Approx(0.0275).epsilon(1e-2));
  CHECK(down.direction == Direction::Decreasing);

  CHECK(error_of([] { mann_kendall(std::vector<double>{2, 2, 2, 2, 2}); }) == ErrorCode::ZeroVariance);
  CHECK(error_of([] { mann_kendall(std::vector<double>{1, 2, 3}); }) == ErrorCode::TooFewPoints);
}

TEST_CASE("mann_kendall matches pair enumeration") {
  std::mt19937_64 rng(102);
  std::uniform_int_distribution<std::size_t> len(4, 50);
  for (int trial = 0; trial < 200; ++trial) {
    const auto x = random_series(rng, len(rng), trial % 3 == 0 ? 0 : 2 + trial % 7);
    CHECK(mann_kendall_s(x) == oracle::mk_s(x));
    if (std::adjacent_find(x.begin(), x.end(), std::not_equal_to<>()) == x.end()) continue;
    CHECK(mann_kendall(x).variance == doctest::Approx(oracle::mk_variance(x)).epsilon(1e-15));
  }
}

TEST_CASE("mann_kendall S is antisymmetric and rank based") {
  std::mt19937_64 rng(103);
  for (int trial = 0; trial < 50; ++trial) {
    auto x = random_series(rng, 5 + trial, trial % 2 ? 4 : 0);
    const auto s = mann_kendall_s(x);
    std::vector<double> rev(x.rbegin(), x.rend());
    CHECK(mann_kendall_s(rev) == -s);
    for (double& v : x) v = std::exp(v) * 4 + 1;  // strictly increasing map
    CHECK(mann_kendall_s(x) == s);
  }
}

TEST_CASE("bh_fdr examples") {
  auto r = bh_fdr(std::vector<double>{0.01, 0.02, 0.03, 0.04}, 0.05);
  CHECK(r.rejected == std::vector<bool>{true, true, true, true});
  r = bh_fdr(std::vector<double>{0.04, 0.5, 0.9}, 0.05);
  CHECK(r.rejected == std::vector<bool>{false, false, false});
  r = bh_fdr(std::vector<double>{0.04}, 0.05);
  CHECK(r.rejected == std::vector<bool>{true});
  CHECK(r.adjusted[0] == 0.04);
  CHECK(error_of([] { bh_fdr(std::vector<double>{1.5}, 0.05); }) == ErrorCode::InvalidP);
  CHECK(error_of([] { bh_fdr(std::vector<double>{0.5}, 1.0); }) == ErrorCode::InvalidQ);
}

TEST_CASE("bh_fdr matches an independent step-up") {
  std::mt19937_64 rng(104);
  std::uniform_int_distribution<std::size_t> len(1, 40);
  std::uniform_real_distribution<double> u(0, 1);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<double> p(len(rng));
    for (double& v : p) {
      v = std::pow(u(rng), 1 + trial % 5);  // skew towards small p
      if (trial % 7 == 0) v = std::round(v * 20) / 20;  // ties
    }
    const double q = 0.01 + 0.2 * u(rng);
    const auto r = bh_fdr(p, q);
    CHECK(r.rejected == oracle::bh_reject(p, q));
    const auto adj = oracle::bh_adjusted(p);
    for (std::size_t i = 0; i < p.size(); ++i) CHECK(r.adjusted[i] == doctest::Approx(adj[i]).epsilon(1e-14));
  }
}

TEST_CASE("lowering a p-value never removes a rejection") {
  std::mt19937_64 rng(105);
  std::uniform_real_distribution<double> u(0, 1);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<double> p(10);
    for (double& v : p) v = u(rng) * u(rng) * 0.2;
    const auto before = bh_fdr(p, 0.05).rejected;
    const std::size_t i = trial % p.size();
    p[i] *= u(rng);
    const auto after = bh_fdr(p, 0.05).rejected;
    for (std::size_t j = 0; j < p.size(); ++j)
      if (before[j]) CHECK(after[j]);
  }
}

TEST_CASE("special functions match high precision references") {
  for (const auto& pt : oracle::normal_cdf_table())
    CHECK(std::abs(normal_cdf(pt.x) - pt.value) <= 1e-10 * std::max(1e-6, pt.value));
  for (const auto& pt : oracle::chi2_table()) {
    CHECK(std::abs(chi_square_cdf(pt.x, pt.df) - pt.cdf) <= 1e-10);
    CHECK(std::abs(chi_square_sf(pt.x, pt.df) - pt.sf) <= 1e-10);
  }
  for (const auto& pt : oracle::gamma_p_table()) CHECK(std::abs(regularized_gamma_p(pt.a, pt.x) - pt.p) <= 1e-10);
  for (int df = 2; df <= 40; df += 2)
    for (double x : {0.1, 1.0, 3.0, 10.0, 25.0, 60.0})
      CHECK(std::abs(chi_square_sf(x, df) - oracle::chi2_sf_even(x, df)) <= 1e-12);
}

TEST_CASE("chi_square_variance examples") {
  // s^2 = sigma0^2 with n = 11: the statistic sits at df exactly.
  std::vector<double> x(11);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = double(i);
  const double s2 = sample_variance(x);
  CHECK(s2 == 11.0);
  auto r = chi_square_variance(x, s2);
  CHECK(r.chi2 == doctest::Approx(10.0).epsilon(1e-15));
  CHECK(r.df == 10);
  CHECK(std::abs(r.p_value - oracle::kChi2TenTenTwoSided) <= 1e-10);

  r = chi_square_variance(x, s2 / 2);
  CHECK(r.chi2 == doctest::Approx(20.0).epsilon(1e-15));
  CHECK(std::abs(r.p_value - oracle::kChi2TwentyTenTwoSided) <= 1e-10);
  CHECK(r.p_value == doctest::Approx(0.0586).epsilon(1e-2));
  CHECK(r.chi2 == doctest::Approx(r.df * r.sample_variance / r.reference_variance).epsilon(1e-12));

  CHECK(chi_square_variance(x, s2 / 2, Alternative::Greater).p_value ==
        doctest::Approx(oracle::chi2_sf_even(20, 10)).epsilon(1e-12));
  CHECK(error_of([] { chi_square_variance(std::vector<double>{1}, 1.0); }) == ErrorCode::TooFewPoints);
  CHECK(error_of([&] { chi_square_variance(x, 0.0); }) == ErrorCode::NonPositiveReference);
}

TEST_CASE("chi_square_variance is scale invariant") {
  std::mt19937_64 rng(106);
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> x(5 + trial % 10);
    for (double& v : x) v = g(rng);
    const double ref = 0.5 + trial * 0.05;
    const double p = chi_square_variance(x, ref).p_value;
    std::vector<double> y = x;
    for (double& v : y) v *= 3.0;
    CHECK(chi_square_variance(y, 9.0 * ref).p_value == doctest::Approx(p).epsilon(1e-12));
  }
}

TEST_CASE("layer_trend_analysis") {
  SUBCASE("all increasing") {
    const auto t = condensed_table({{"a", {1, 2, 3, 4, 5, 6}}, {"b", {0, 1, 4, 9, 16, 25}}, {"c", {-5, -4, -3, -2, -1, 0}}});
    const auto r = layer_trend_analysis(t, "ALL", 0.05, 0.05);
    REQUIRE(r.results.size() == 3);
    for (const auto& x : r.results) CHECK(x.direction == Direction::Increasing);
  }
  SUBCASE("single group reduces to raw mann_kendall") {
    const std::vector<double> v{3, 1, 4, 1, 5, 9, 2, 6, 5, 3, 5};
    const auto r = layer_trend_analysis(condensed_table({{"x", v}}), "ALL", 0.05, 0.05);
    REQUIRE(r.results.size() == 1);
    const auto raw = mann_kendall(v);
    CHECK(r.results[0].s_statistic == raw.s_statistic);
    CHECK(r.results[0].p_value == raw.p_value);
    CHECK(r.results[0].p_adjusted == raw.p_value);
    CHECK(r.results[0].direction == raw.direction);
  }
  SUBCASE("short and tied groups are skipped") {
    const auto r = layer_trend_analysis(
        condensed_table({{"a", {1, 2, 3, 4, 5}}, {"b", {1, 2, 3}}, {"c", {2, 2, 2, 2, 2}}}), "ALL", 0.05, 0.05);
    REQUIRE(r.results.size() == 1);
    CHECK(r.results[0].group_id == "a");
    CHECK(r.skipped.size() == 2);
  }
  SUBCASE("decreasing plus noise against a null group") {
    std::mt19937_64 rng(107);
    std::normal_distribution<double> g;
    int a_flagged = 0, b_flagged = 0;
    for (int draw = 0; draw < 100; ++draw) {
      std::vector<double> a(13), b(13);
      for (int l = 0; l < 13; ++l) {
        a[std::size_t(l)] = 13 - l;
        b[std::size_t(l)] = 5 + 0.1 * g(rng);
      }
      const auto r = layer_trend_analysis(condensed_table({{"a", a}, {"b", b}}), "ALL", 0.05, 0.05);
      a_flagged += r.results[0].direction == Direction::Decreasing;
      b_flagged += r.results[1].direction != Direction::None;
    }
    CHECK(a_flagged == 100);
    CHECK(b_flagged <= 10);
  }
}

TEST_CASE("property_correlation") {
  SignatureTable t;
  std::map<std::string, LanguageProfile> profiles;
  const std::vector<std::pair<std::string, std::size_t>> chars{{"a", 20}, {"b", 35}, {"c", 50}, {"d", 61}};
  for (const auto& [g, u] : chars) {
    Signature s;
    s.group_id = g;
    s.category = "ALL";
    s.condensed = -0.1 * double(u) + 5;
    s.values = Vector<double>::Constant(1, s.condensed);
    t.insert(s);
    profiles[g] = LanguageProfile{g, std::int64_t(u), 0.5, 1000};
  }
  const auto r = property_correlation(t, profiles, GroupProperty::UniqueChars, 0, "ALL");
  CHECK(r.r == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(r.n == 4);
  CHECK(error_of([&] { property_correlation(t, profiles, GroupProperty::Ttr, 0, "ALL"); }) == ErrorCode::ConstantInput);
  profiles.erase("c");
  CHECK(error_of([&] { property_correlation(t, profiles, GroupProperty::UniqueChars, 0, "ALL"); }) ==
        ErrorCode::MissingProfile);
}

TEST_CASE("external_score_correlation") {
  const auto t = condensed_table({{"a", {0.3}}, {"b", {0.9}}, {"c", {0.1}}, {"d", {0.5}}, {"e", {0.7}}});
  std::map<std::string, double> scores;
  for (const auto& [key, s] : t.cells()) scores[key.group] = s.condensed;
  CHECK(external_score_correlation(t, scores, 0).r == doctest::Approx(1.0).epsilon(1e-12));

  scores.erase("b");
  scores.erase("d");
  CHECK(external_score_correlation(t, scores, 0).n == 3);
  scores.erase("a");
  CHECK(error_of([&] { external_score_correlation(t, scores, 0); }) == ErrorCode::TooFewPoints);
}

TEST_CASE("permuted external scores average to zero correlation") {
  std::mt19937_64 rng(108);
  std::normal_distribution<double> g;
  std::map<std::string, std::vector<double>> series;
  std::vector<double> values;
  for (int i = 0; i < 20; ++i) {
    values.push_back(g(rng));
    series["g" + std::to_string(i)] = {values.back()};
  }
  const auto t = condensed_table(series);
  double sum = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    std::shuffle(values.begin(), values.end(), rng);
    std::map<std::string, double> scores;
    for (int i = 0; i < 20; ++i) scores["g" + std::to_string(i)] = values[std::size_t(i)];
    sum += external_score_correlation(t, scores, 0).r;
  }
  CHECK(std::abs(sum / 1000) <= 0.1);
}

TEST_CASE("group_variance_test") {
  const auto t = condensed_table({{"a", {1}}, {"b", {3}}, {"c", {5}}, {"x", {2}}, {"y", {2.5}}, {"z", {3.5}}});
  const auto r = group_variance_test(t, 0, "ALL", {"a", "b", "c"}, {"x", "y", "z"});
  CHECK(r.sample_variance == doctest::Approx(4.0));
  CHECK(r.reference_variance == doctest::Approx(7.0 / 12.0));
  CHECK(r.df == 2);
  CHECK(error_of([&] { group_variance_test(t, 0, "ALL", {"a", "q"}, {"x", "y"}); }) == ErrorCode::MissingEntry);
}
