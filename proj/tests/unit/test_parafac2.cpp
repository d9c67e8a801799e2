#include <algorithm>
#include <numeric>
#include <random>

#include "doctest.h"
#include "repfactor/model_store.hpp"
#include "repfactor/parafac2.hpp"
#include "repfactor/synthetic.hpp"
#include "scratch_dir.hpp"

using namespace repfactor;
using testing_support::ScratchDir;

namespace {

using Slices = std::vector<CovarianceSlice<double>>;

Slices random_slices(std::vector<Index> rows, Index d, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  Slices out;
  for (std::size_t l = 0; l < rows.size(); ++l) {
    CovarianceSlice<double> s;
    s.group_id = "g" + std::to_string(l);
    s.omega.resize(rows[l], d);
    for (Index i = 0; i < s.omega.size(); ++i) s.omega(i) = g(rng);
    out.push_back(std::move(s));
  }
  return out;
}

CovarianceSlice<double> slice(const std::string& id, Matrix<double> omega) {
  CovarianceSlice<double> s;
  s.group_id = id;
  s.omega = std::move(omega);
  return s;
}

ErrorCode error_of(const Slices& slices, const SolverOptions& opts) {
  try {
    decompose(slices, opts);
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::Usage;
}

// Smallest max |sigma - planted| over all column permutations.
double best_sigma_match(const Parafac2Model<double>& model, const PlantedProblem& plant) {
  std::vector<Index> perm(static_cast<std::size_t>(model.rank));
  std::iota(perm.begin(), perm.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    double worst = 0;
    for (std::size_t l = 0; l < plant.sigma.size(); ++l)
      for (Index r = 0; r < model.rank; ++r)
        worst = std::max(worst, std::abs(model.sigma[l](r) - plant.sigma[l](perm[std::size_t(r)])));
    best = std::min(best, worst);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

}  // namespace

TEST_CASE("model shapes and constraints") {
  const Slices slices = random_slices({4, 5}, 6, 1);
  SolverOptions opts;
  opts.rank = 2;
  const auto model = decompose(slices, opts);
  REQUIRE(model.groups() == 2);
  CHECK(model.q[0].rows() == 4);
  CHECK(model.q[0].cols() == 2);
  CHECK(model.q[1].rows() == 5);
  CHECK(model.h.rows() == 2);
  CHECK(model.h.cols() == 2);
  CHECK(model.v.rows() == 6);
  CHECK(model.v.cols() == 2);
  for (const auto& q : model.q)
    CHECK((q.transpose() * q - Matrix<double>::Identity(2, 2)).cwiseAbs().maxCoeff() <= 1e-10);
  CHECK(coupling_deviation(model) <= 1e-8);
  for (Index r = 0; r < 2; ++r) {
    CHECK(model.h.col(r).norm() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(model.v.col(r).norm() == doctest::Approx(1.0).epsilon(1e-12));
    Index at;
    model.h.col(r).cwiseAbs().maxCoeff(&at);
    CHECK(model.h(at, r) > 0);
    CHECK(model.sigma[0](r) + model.sigma[1](r) >= 0);
  }
  CHECK(model.fit >= 0);
  CHECK(model.fit <= 1);
}

TEST_CASE("decompose errors") {
  SolverOptions opts;
  opts.rank = 7;
  CHECK(error_of(random_slices({4, 5}, 6, 2), opts) == ErrorCode::RankTooLarge);
  opts.rank = 5;
  CHECK(error_of(random_slices({4, 5}, 6, 2), opts) == ErrorCode::RankTooLarge);
  opts.rank = 2;
  CHECK(error_of({}, opts) == ErrorCode::EmptySliceList);
  CHECK(error_of({slice("a", Matrix<double>::Zero(3, 3)), slice("b", Matrix<double>::Zero(3, 3))}, opts) ==
        ErrorCode::ZeroInput);
  CHECK(error_of({slice("a", Matrix<double>::Ones(3, 3)), slice("b", Matrix<double>::Ones(3, 4))}, opts) ==
        ErrorCode::ShapeMismatch);
}

TEST_CASE("init is deterministic for a seed") {
  const Slices slices = random_slices({6, 7, 8}, 9, 3);
  for (InitMethod m : {InitMethod::Random, InitMethod::Svd}) {
    SolverOptions opts;
    opts.rank = 3;
    opts.seed = 42;
    opts.init = m;
    const auto a = init_model<double>(slices, opts);
    const auto b = init_model<double>(slices, opts);
    CHECK(a.h == b.h);
    CHECK(a.v == b.v);
    for (std::size_t l = 0; l < slices.size(); ++l) {
      CHECK(a.q[l] == b.q[l]);
      CHECK(a.sigma[l] == b.sigma[l]);
    }
  }
}

TEST_CASE("a planted exact model is a fixed point of the sweep") {
  PlantOptions po;
  po.groups = 4;
  po.slice_rows = 8;
  po.cols = 10;
  po.rank = 3;
  po.seed = 5;
  const PlantedProblem plant = plant_parafac2(po);
  Parafac2Model<double> truth;
  truth.rank = 3;
  truth.h = plant.h;
  truth.v = plant.v;
  truth.q = plant.q;
  truth.sigma = plant.sigma;
  const std::span<const CovarianceSlice<double>> s(plant.slices);
  CHECK(fit_error(truth, s) <= 1e-14);
  const auto swept = als_sweep(truth, s);
  CHECK(swept.fit <= 1e-12);
}

TEST_CASE("one sweep never raises the error") {
  const Slices slices = random_slices({6, 9, 7, 8}, 10, 6);
  const std::span<const CovarianceSlice<double>> s(slices);
  int violations = 0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    SolverOptions opts;
    opts.rank = 1 + Index(seed % 4);
    opts.seed = seed;
    opts.init = InitMethod::Random;
    auto model = init_model<double>(slices, opts);
    double prev = squared_error(model, s);
    const double total = detail::total_squared_norm(s);
    for (int t = 0; t < 20; ++t) {
      model = als_sweep(model, s);
      const double err = model.error_history.back();
      if (err > prev + 1e-12 * total) ++violations;
      prev = err;
    }
  }
  CHECK(violations == 0);
}

TEST_CASE("decompose history is non-increasing") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Slices slices = random_slices({5, 6, 7}, 8, 100 + seed);
    SolverOptions opts;
    opts.rank = 3;
    opts.seed = seed;
    opts.max_sweeps = 300;
    opts.init = seed % 2 ? InitMethod::Random : InitMethod::Svd;
    const auto model = decompose(slices, opts);
    for (std::size_t i = 1; i < model.error_history.size(); ++i)
      CHECK(model.error_history[i] <= model.error_history[i - 1]);
    CHECK(model.iterations == int(model.error_history.size()) - 1);
  }
}

TEST_CASE("single rank-one slice") {
  Matrix<double> omega = Matrix<double>::Zero(3, 3);
  omega(0, 0) = 2;
  const Slices slices{slice("a", omega)};
  SolverOptions opts;
  opts.rank = 1;
  opts.init = InitMethod::Random;
  opts.seed = 9;
  const auto swept = als_sweep(init_model<double>(slices, opts), std::span<const CovarianceSlice<double>>(slices));
  CHECK(swept.sigma[0](0) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(swept.fit <= 1e-12);

  const auto model = decompose(slices, opts);
  CHECK(model.sigma[0](0) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(model.fit <= 1e-12);
}

TEST_CASE("shared rank-one structure") {
  Matrix<double> e12 = Matrix<double>::Zero(2, 2);
  e12(0, 1) = 1;
  const Slices slices{slice("a", 3 * e12), slice("b", 5 * e12)};
  SolverOptions opts;
  opts.rank = 1;
  const auto model = decompose(slices, opts);
  CHECK(model.sigma[0](0) == doctest::Approx(3.0).epsilon(1e-10));
  CHECK(model.sigma[1](0) == doctest::Approx(5.0).epsilon(1e-10));
  CHECK(std::abs(model.v(1, 0)) == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(model.fit <= 1e-10);
}

TEST_CASE("planted recovery") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    PlantOptions po;
    po.seed = seed;
    const PlantedProblem plant = plant_parafac2(po);
    SolverOptions opts;
    opts.rank = 5;
    opts.seed = seed;
    const auto model = decompose(plant.slices, opts);
    CHECK(model.fit <= 1e-5);
    CHECK(best_sigma_match(model, plant) <= 1e-4);
  }
}

TEST_CASE("reconstruct") {
  Parafac2Model<double> m;
  m.rank = 1;
  m.q = {Matrix<double>::Identity(2, 1)};
  m.h = Matrix<double>::Ones(1, 1);
  m.v = Matrix<double>::Zero(2, 1);
  m.v(1, 0) = 1;
  m.sigma = {Vector<double>::Constant(1, 2.0)};
  Matrix<double> expect(2, 2);
  expect << 0, 2, 0, 0;
  CHECK(reconstruct(m, 0) == expect);

  m.sigma[0].setZero();
  CHECK(reconstruct(m, 0).isZero(0.0));

  try {
    reconstruct(m, 1);
    FAIL("expected IndexOutOfRange");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::IndexOutOfRange);
  }
}

TEST_CASE("fit_error") {
  PlantOptions po;
  po.groups = 3;
  po.slice_rows = 6;
  po.cols = 7;
  po.rank = 2;
  const PlantedProblem plant = plant_parafac2(po);
  Parafac2Model<double> truth;
  truth.rank = 2;
  truth.h = plant.h;
  truth.v = plant.v;
  truth.q = plant.q;
  truth.sigma = plant.sigma;
  const std::span<const CovarianceSlice<double>> s(plant.slices);
  CHECK(fit_error(truth, s) <= 1e-14);

  Parafac2Model<double> zero = truth;
  for (auto& v : zero.sigma) v.setZero();
  CHECK(fit_error(zero, s) == 1.0);

  // First-order growth: doubling-free check that the error scales with delta.
  std::mt19937_64 rng(4);
  std::normal_distribution<double> g;
  Matrix<double> dv(truth.v.rows(), truth.v.cols());
  for (Index i = 0; i < dv.size(); ++i) dv(i) = g(rng);
  double last = 0;
  for (double delta : {1e-4, 1e-2}) {
    Parafac2Model<double> p = truth;
    p.v += delta * dv;
    const double e = fit_error(p, s);
    CHECK(e > last);
    CHECK(e <= 10 * delta * dv.norm());
    last = e;
  }
}

TEST_CASE("scaling the slices scales sigma") {
  const Slices slices = random_slices({5, 6, 7}, 8, 11);
  Slices scaled = slices;
  for (auto& s : scaled) s.omega *= 4.0;
  SolverOptions opts;
  opts.rank = 2;
  opts.seed = 3;
  const auto a = decompose(slices, opts);
  const auto b = decompose(scaled, opts);
  CHECK(b.fit == doctest::Approx(a.fit).epsilon(1e-6));
  for (std::size_t l = 0; l < slices.size(); ++l)
    CHECK((b.sigma[l] - 4.0 * a.sigma[l]).cwiseAbs().maxCoeff() <= 1e-5 * a.sigma[l].cwiseAbs().maxCoeff() * 4);
}

TEST_CASE("decompose is deterministic") {
  const Slices slices = random_slices({5, 6, 7}, 8, 12);
  SolverOptions opts;
  opts.rank = 3;
  opts.seed = 77;
  const auto a = decompose(slices, opts);
  const auto b = decompose(slices, opts);
  CHECK(a.v == b.v);
  CHECK(a.h == b.h);
  CHECK(a.error_history == b.error_history);
}

TEST_CASE("model store round trip") {
  ScratchDir dir("model");
  const Slices slices = random_slices({4, 5}, 6, 13);
  SolverOptions opts;
  opts.rank = 2;
  StoredModel st;
  st.model = decompose(slices, opts);
  st.groups = {"g0", "g1"};
  st.layer = 3;
  st.category = "Tense";
  st.options = opts;
  save_model(st, dir.path());
  const StoredModel back = load_model(dir.path());
  CHECK(back.groups == st.groups);
  CHECK(back.layer == 3);
  CHECK(back.category == "Tense");
  CHECK(back.options.rank == 2);
  CHECK(back.model.v == st.model.v);
  CHECK(back.model.h == st.model.h);
  for (std::size_t l = 0; l < 2; ++l) {
    CHECK(back.model.q[l] == st.model.q[l]);
    CHECK(back.model.sigma[l] == st.model.sigma[l]);
  }
  CHECK(back.model.fit == st.model.fit);
  CHECK(back.model.converged == st.model.converged);
}
