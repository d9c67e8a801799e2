#pragma once

// Coupled PARAFAC2 decomposition of cross-covariance slices
//
//   Omega_l  ~=  U_l * diag(sigma_l) * V^T,    U_l = Q_l * H,
//
// with Q_l column-orthonormal, so U_l^T U_l = H^T H for every l. Fitted by
// direct-fitting alternating least squares: each sweep solves an orthogonal
// Procrustes problem per slice for Q_l, then runs one CP-ALS cycle for
// (H, sigma, V) on the projected k x d slices Q_l^T Omega_l.
//
// After each sweep the solver tries an extrapolated step along the change of
// (H, V, sigma), with Q_l re-solved by Procrustes, and keeps it only when the
// error drops below the plain sweep's.
//
// The default start fits the Q-free cross-products Omega_l^T Omega_l on the
// top-k row subspace (see detail::fit_cross_products); `Random` starts from
// seeded orthonormal factors.
//
// Gauge: columns of H and V have unit norm (scale lives in sigma); for each
// component the largest-magnitude entry of H's column is positive and the
// sum over groups of sigma_l[r] is non-negative.

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "repfactor/covariance.hpp"
#include "repfactor/error.hpp"
#include "repfactor/types.hpp"

namespace repfactor {

enum class InitMethod { Random, Svd };

struct SolverOptions {
  Index rank = 64;
  int max_sweeps = 2000;
  double rel_tol = 1e-8;
  std::uint64_t seed = 0;
  InitMethod init = InitMethod::Svd;
};

template <typename Scalar>
struct Parafac2Model {
  Index rank = 0;
  Matrix<Scalar> v;               // d x k, shared right factor
  Matrix<Scalar> h;               // k x k, shared coupling factor
  std::vector<Matrix<Scalar>> q;  // d_l x k, orthonormal columns
  std::vector<Vector<Scalar>> sigma;
  Scalar fit = Scalar(1);
  int iterations = 0;
  bool converged = false;
  // Squared reconstruction error after init and after every sweep.
  std::vector<Scalar> error_history;

  std::size_t groups() const { return q.size(); }
  Matrix<Scalar> u(std::size_t l) const { return q[l] * h; }
};

const char* to_string(InitMethod m);
InitMethod parse_init_method(const std::string& s);

namespace detail {

template <typename Scalar>
void validate_problem(std::span<const CovarianceSlice<Scalar>> slices, const SolverOptions& opts) {
  if (slices.empty()) throw Error(ErrorCode::EmptySliceList, "no slices to decompose");
  if (opts.rank < 1) throw Error(ErrorCode::Usage, "rank must be at least 1");
  if (opts.max_sweeps < 1) throw Error(ErrorCode::Usage, "max_sweeps must be at least 1");
  if (!(opts.rel_tol > 0.0)) throw Error(ErrorCode::Usage, "rel_tol must be positive");

  const Index d = slices.front().omega.cols();
  Index min_rows = slices.front().omega.rows();
  for (const auto& s : slices) {
    if (s.omega.cols() != d)
      throw Error(ErrorCode::ShapeMismatch, "slice " + s.group_id + " has " + std::to_string(s.omega.cols()) +
                                                " columns, expected " + std::to_string(d));
    min_rows = std::min(min_rows, s.omega.rows());
  }
  if (opts.rank > std::min(d, min_rows))
    throw Error(ErrorCode::RankTooLarge, "rank " + std::to_string(opts.rank) + " exceeds min(d, d_l) = " +
                                             std::to_string(std::min(d, min_rows)));
}

template <typename Scalar>
Matrix<Scalar> orthonormal_columns(const Matrix<Scalar>& a) {
  Eigen::HouseholderQR<Matrix<Scalar>> qr(a);
  Matrix<Scalar> q = qr.householderQ() * Matrix<Scalar>::Identity(a.rows(), a.cols());
  // Fix the sign of each column so the R factor has a positive diagonal.
  const Matrix<Scalar>& r = qr.matrixQR();
  for (Index j = 0; j < a.cols(); ++j)
    if (r(j, j) < Scalar(0)) q.col(j) = -q.col(j);
  return q;
}

template <typename Scalar>
Matrix<Scalar> gaussian(Index rows, Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  Matrix<Scalar> a(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) a(i, j) = static_cast<Scalar>(dist(rng));
  return a;
}

// Orthogonal Procrustes: argmax tr(Q^T M) over column-orthonormal Q.
template <typename Scalar>
Matrix<Scalar> procrustes(const Matrix<Scalar>& m) {
  Eigen::JacobiSVD<Matrix<Scalar>> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (svd.info() != Eigen::Success) throw Error(ErrorCode::NumericalBreakdown, "SVD failed in Procrustes update");
  return svd.matrixU() * svd.matrixV().transpose();
}

// Minimum-norm solution of X * G = R for symmetric positive semi-definite G.
template <typename Scalar>
Matrix<Scalar> solve_right(const Matrix<Scalar>& r, const Matrix<Scalar>& g) {
  Eigen::CompleteOrthogonalDecomposition<Matrix<Scalar>> cod(g);
  return cod.solve(r.transpose()).transpose();
}

template <typename Scalar>
Matrix<Scalar> sigma_matrix(const Parafac2Model<Scalar>& model) {
  Matrix<Scalar> c(static_cast<Index>(model.groups()), model.rank);
  for (std::size_t l = 0; l < model.groups(); ++l) c.row(static_cast<Index>(l)) = model.sigma[l].transpose();
  return c;
}

template <typename Scalar>
void normalize_and_fix_signs(Parafac2Model<Scalar>& model) {
  const Index k = model.rank;
  for (Index r = 0; r < k; ++r) {
    const Scalar nh = model.h.col(r).norm();
    const Scalar nv = model.v.col(r).norm();
    if (nh == Scalar(0) || nv == Scalar(0)) {
      // Dead component: reconstruction contribution is zero either way.
      model.h.col(r).setZero();
      model.h(r, r) = Scalar(1);
      model.v.col(r).setZero();
      model.v(r % model.v.rows(), r) = Scalar(1);
      for (auto& s : model.sigma) s(r) = Scalar(0);
      continue;
    }
    model.h.col(r) /= nh;
    model.v.col(r) /= nv;
    for (auto& s : model.sigma) s(r) *= nh * nv;

    Index imax = 0;
    model.h.col(r).cwiseAbs().maxCoeff(&imax);
    if (model.h(imax, r) < Scalar(0)) {
      model.h.col(r) = -model.h.col(r);
      model.v.col(r) = -model.v.col(r);
    }
    Scalar total = 0;
    for (const auto& s : model.sigma) total += s(r);
    if (total < Scalar(0)) {
      model.v.col(r) = -model.v.col(r);
      for (auto& s : model.sigma) s(r) = -s(r);
    }
  }
}

template <typename Scalar>
Scalar total_squared_norm(std::span<const CovarianceSlice<Scalar>> slices) {
  Scalar total = 0;
  for (const auto& s : slices) total += s.omega.squaredNorm();
  return total;
}

template <typename Scalar>
void check_model_shapes(const Parafac2Model<Scalar>& model, std::span<const CovarianceSlice<Scalar>> slices) {
  if (model.groups() != slices.size() || model.sigma.size() != slices.size())
    throw Error(ErrorCode::ShapeMismatch, "model has " + std::to_string(model.groups()) + " groups, got " +
                                              std::to_string(slices.size()) + " slices");
  for (std::size_t l = 0; l < slices.size(); ++l) {
    if (model.q[l].rows() != slices[l].omega.rows() || slices[l].omega.cols() != model.v.rows() ||
        model.q[l].cols() != model.rank || model.sigma[l].size() != model.rank)
      throw Error(ErrorCode::ShapeMismatch, "slice " + std::to_string(l) + " does not match model shapes");
  }
}

}  // namespace detail

template <typename Scalar>
Matrix<Scalar> reconstruct(const Parafac2Model<Scalar>& model, std::size_t l) {
  if (l >= model.groups())
    throw Error(ErrorCode::IndexOutOfRange,
                "group index " + std::to_string(l) + " of " + std::to_string(model.groups()));
  return model.q[l] * model.h * model.sigma[l].asDiagonal() * model.v.transpose();
}

/// Sum over slices of ||Omega_l - reconstruct(l)||_F^2.
template <typename Scalar>
Scalar squared_error(const Parafac2Model<Scalar>& model, std::span<const CovarianceSlice<Scalar>> slices) {
  detail::check_model_shapes(model, slices);
  Scalar err = 0;
  for (std::size_t l = 0; l < slices.size(); ++l) err += (slices[l].omega - reconstruct(model, l)).squaredNorm();
  return err;
}

/// Relative Frobenius reconstruction error over all slices.
template <typename Scalar>
Scalar fit_error(const Parafac2Model<Scalar>& model, std::span<const CovarianceSlice<Scalar>> slices) {
  const Scalar err = squared_error(model, slices);
  const Scalar total = detail::total_squared_norm(slices);
  if (total == Scalar(0)) throw Error(ErrorCode::ZeroInput, "all slices are zero; relative fit is undefined");
  return std::sqrt(err / total);
}

namespace detail {

// Cross-product fit on the k-dimensional row subspace W:
//
//   P_l = (Omega_l W)^T (Omega_l W)  ~=  M_l^T M_l,   M_l = H diag(c_l) A^T,
//
// which is Q-free because Q_l^T Q_l = I. Solved by Levenberg-Marquardt from
// a few seeded starts; V = W A then gives a direct-fitting start that is exact
// for noiseless data.
template <typename Scalar>
struct CrossProductFit {
  Matrix<Scalar> h, a, c;
  Scalar error = std::numeric_limits<Scalar>::infinity();
};

template <typename Scalar>
Scalar cross_product_error(const std::vector<Matrix<Scalar>>& p, const CrossProductFit<Scalar>& x) {
  Scalar e = 0;
  for (std::size_t l = 0; l < p.size(); ++l) {
    const Matrix<Scalar> m = x.h * x.c.row(Index(l)).asDiagonal() * x.a.transpose();
    e += (p[l] - m.transpose() * m).squaredNorm();
  }
  return e;
}

template <typename Scalar>
void cross_product_lm(const std::vector<Matrix<Scalar>>& p, CrossProductFit<Scalar>& x, int max_iter) {
  using Vec = Vector<Scalar>;
  const Index k = x.h.rows();
  const Index n = static_cast<Index>(p.size());
  const Index np = 2 * k * k + n * k;
  const Index kk = k * k;
  Scalar lambda = Scalar(1e-3);
  x.error = cross_product_error(p, x);

  Matrix<Scalar> jac(n * kk, np);
  Vec res(n * kk);
  for (int it = 0; it < max_iter; ++it) {
    jac.setZero();
    for (Index l = 0; l < n; ++l) {
      const Matrix<Scalar> m = x.h * x.c.row(l).asDiagonal() * x.a.transpose();
      const Matrix<Scalar> r = p[std::size_t(l)] - m.transpose() * m;
      res.segment(l * kk, kk) = Eigen::Map<const Vec>(r.data(), kk);
      // Column of d(residual) for a rank-one change dM = u w^T.
      auto put = [&](Index col, const Vec& u, const Vec& w) {
        const Vec mu = m.transpose() * u;
        const Matrix<Scalar> dn = w * mu.transpose() + mu * w.transpose();
        jac.block(l * kk, col, kk, 1) = -Eigen::Map<const Vec>(dn.data(), kk);
      };
      for (Index b = 0; b < k; ++b) {
        const Vec ca = x.c(l, b) * x.a.col(b);
        const Vec ch = x.c(l, b) * x.h.col(b);
        for (Index a = 0; a < k; ++a) {
          put(b * k + a, Vec::Unit(k, a), ca);
          put(kk + b * k + a, ch, Vec::Unit(k, a));
        }
        put(2 * kk + b * n + l, x.h.col(b), x.a.col(b));
      }
    }
    const Matrix<Scalar> jtj = jac.transpose() * jac;
    const Vec g = jac.transpose() * res;
    const Scalar floor = Scalar(1e-12) * std::max(jtj.diagonal().maxCoeff(), std::numeric_limits<Scalar>::min());

    bool accepted = false;
    for (int attempt = 0; attempt < 30 && !accepted; ++attempt) {
      Matrix<Scalar> lhs = jtj;
      lhs.diagonal().array() += lambda * (jtj.diagonal().array() + floor);
      const Vec step = lhs.ldlt().solve(-g);
      CrossProductFit<Scalar> next = x;
      next.h += Eigen::Map<const Matrix<Scalar>>(step.data(), k, k);
      next.a += Eigen::Map<const Matrix<Scalar>>(step.data() + kk, k, k);
      next.c += Eigen::Map<const Matrix<Scalar>>(step.data() + 2 * kk, n, k);
      next.error = cross_product_error(p, next);
      if (std::isfinite(static_cast<double>(next.error)) && next.error < x.error) {
        const Scalar gain = (x.error - next.error) / x.error;
        x = std::move(next);
        lambda = std::max(lambda / Scalar(5), Scalar(1e-15));
        accepted = true;
        if (gain < Scalar(1e-14)) return;
      } else {
        lambda *= Scalar(5);
      }
    }
    if (!accepted) return;
  }
}

// Work bound for the dense LM normal equations; larger ranks skip the
// cross-product stage and start ALS from the subspace alone.
inline bool cross_product_affordable(Index k, std::size_t groups) {
  const double np = 2.0 * double(k) * double(k) + double(groups) * double(k);
  return double(groups) * double(k) * double(k) * np * np <= 2e8;
}

template <typename Scalar>
CrossProductFit<Scalar> fit_cross_products(const std::vector<Matrix<Scalar>>& p, std::uint64_t seed) {
  constexpr int kStarts = 16;
  constexpr int kMaxIter = 300;
  const Index k = p.front().rows();
  const Index n = static_cast<Index>(p.size());
  Scalar norm2 = 0;
  for (const auto& m : p) norm2 += m.squaredNorm();
  const Scalar scale = std::pow(norm2 / Scalar(n * k), Scalar(0.25));

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> jitter(0.0, 0.1);
  CrossProductFit<Scalar> best;
  for (int start = 0; start < kStarts; ++start) {
    CrossProductFit<Scalar> x;
    x.h = gaussian<Scalar>(k, k, rng) * (scale / std::sqrt(Scalar(k)));
    x.a = gaussian<Scalar>(k, k, rng) / std::sqrt(Scalar(k));
    x.c.resize(n, k);
    for (Index i = 0; i < x.c.size(); ++i) x.c(i) = Scalar(1) + static_cast<Scalar>(jitter(rng));
    cross_product_lm(p, x, kMaxIter);
    if (x.error < best.error) best = std::move(x);
    // Local minima repeat across starts, so only an exact fit ends early.
    if (best.error <= Scalar(1e-24) * norm2) break;
  }
  return best;
}

}  // namespace detail

template <typename Scalar>
Parafac2Model<Scalar> init_model(std::span<const CovarianceSlice<Scalar>> slices, const SolverOptions& opts) {
  detail::validate_problem(slices, opts);
  const Index k = opts.rank;
  const Index d = slices.front().omega.cols();

  Parafac2Model<Scalar> model;
  model.rank = k;
  model.h = Matrix<Scalar>::Identity(k, k);
  model.sigma.assign(slices.size(), Vector<Scalar>::Ones(k));

  if (opts.init == InitMethod::Random) {
    std::mt19937_64 rng(opts.seed);
    model.v = detail::orthonormal_columns(detail::gaussian<Scalar>(d, k, rng));
    for (const auto& s : slices)
      model.q.push_back(detail::orthonormal_columns(detail::gaussian<Scalar>(s.omega.rows(), k, rng)));
  } else {
    // Top-k eigenvectors of sum_l Omega_l^T Omega_l.
    Matrix<Scalar> gram = Matrix<Scalar>::Zero(d, d);
    for (const auto& s : slices) gram.noalias() += s.omega.transpose() * s.omega;
    Eigen::SelfAdjointEigenSolver<Matrix<Scalar>> eig(gram);
    if (eig.info() != Eigen::Success) throw Error(ErrorCode::NumericalBreakdown, "eigensolver failed in init");
    const Matrix<Scalar> w = eig.eigenvectors().rightCols(k).rowwise().reverse();
    model.v = w;

    const Scalar total = detail::total_squared_norm(slices);
    if (total > Scalar(0) && detail::cross_product_affordable(k, slices.size())) {
      std::vector<Matrix<Scalar>> p;
      for (const auto& s : slices) {
        const Matrix<Scalar> x = s.omega * w;
        p.push_back(x.transpose() * x);
      }
      const auto fit = detail::fit_cross_products(p, opts.seed);
      if (fit.h.allFinite() && fit.a.allFinite() && fit.c.allFinite()) {
        model.h = fit.h;
        model.v = w * fit.a;
        for (std::size_t l = 0; l < slices.size(); ++l) model.sigma[l] = fit.c.row(Index(l)).transpose();
      }
    }
    for (std::size_t l = 0; l < slices.size(); ++l) {
      const Matrix<Scalar> target =
          slices[l].omega * model.v * model.sigma[l].asDiagonal() * model.h.transpose();
      if (target.squaredNorm() == Scalar(0)) {
        model.q.push_back(Matrix<Scalar>::Identity(slices[l].omega.rows(), k));
      } else {
        model.q.push_back(detail::procrustes<Scalar>(target));
      }
    }
  }
  if (!slices.empty() && detail::total_squared_norm(slices) > Scalar(0)) model.fit = fit_error(model, slices);
  return model;
}

/// One full direct-fitting ALS sweep. The squared error does not increase.
template <typename Scalar>
Parafac2Model<Scalar> als_sweep(Parafac2Model<Scalar> model, std::span<const CovarianceSlice<Scalar>> slices) {
  detail::check_model_shapes(model, slices);
  const std::size_t n = slices.size();

  // (a) Procrustes update of each Q_l.
  for (std::size_t l = 0; l < n; ++l) {
    const Matrix<Scalar> target =
        slices[l].omega * model.v * model.sigma[l].asDiagonal() * model.h.transpose();
    model.q[l] = detail::procrustes<Scalar>(target);
  }

  // (b) One CP-ALS cycle on B_l = Q_l^T Omega_l ~= H diag(sigma_l) V^T.
  std::vector<Matrix<Scalar>> b(n);
  for (std::size_t l = 0; l < n; ++l) b[l] = model.q[l].transpose() * slices[l].omega;

  const Index k = model.rank;
  Matrix<Scalar> c = detail::sigma_matrix(model);

  {
    Matrix<Scalar> rhs = Matrix<Scalar>::Zero(k, k);
    for (std::size_t l = 0; l < n; ++l) rhs.noalias() += b[l] * model.v * c.row(Index(l)).asDiagonal();
    const Matrix<Scalar> g = (model.v.transpose() * model.v).cwiseProduct(c.transpose() * c);
    model.h = detail::solve_right<Scalar>(rhs, g);
  }
  {
    Matrix<Scalar> rhs = Matrix<Scalar>::Zero(model.v.rows(), k);
    for (std::size_t l = 0; l < n; ++l) rhs.noalias() += b[l].transpose() * model.h * c.row(Index(l)).asDiagonal();
    const Matrix<Scalar> g = (model.h.transpose() * model.h).cwiseProduct(c.transpose() * c);
    model.v = detail::solve_right<Scalar>(rhs, g);
  }
  {
    const Matrix<Scalar> g = (model.h.transpose() * model.h).cwiseProduct(model.v.transpose() * model.v);
    Matrix<Scalar> rhs(static_cast<Index>(n), k);
    for (std::size_t l = 0; l < n; ++l)
      rhs.row(Index(l)) = (model.h.transpose() * b[l] * model.v).diagonal().transpose();
    c = detail::solve_right<Scalar>(rhs, g);
    for (std::size_t l = 0; l < n; ++l) model.sigma[l] = c.row(Index(l)).transpose();
  }

  // (c) Unit-norm columns, scale into sigma.
  detail::normalize_and_fix_signs(model);

  if (!model.h.allFinite() || !model.v.allFinite() || !c.allFinite())
    throw Error(ErrorCode::NumericalBreakdown, "non-finite factor after ALS sweep");

  const Scalar err = squared_error<Scalar>(model, slices);
  const Scalar total = detail::total_squared_norm(slices);
  model.fit = total > Scalar(0) ? std::sqrt(err / total) : Scalar(0);
  model.error_history.push_back(err);
  ++model.iterations;
  return model;
}

namespace detail {

// Moves (H, V, sigma) to cur + step * (cur - prev), re-solves Q_l and returns
// the candidate with its squared error.
template <typename Scalar>
std::pair<Parafac2Model<Scalar>, Scalar> extrapolate(const Parafac2Model<Scalar>& prev,
                                                     const Parafac2Model<Scalar>& cur,
                                                     std::span<const CovarianceSlice<Scalar>> slices, Scalar step) {
  Parafac2Model<Scalar> next = cur;
  next.h += step * (cur.h - prev.h);
  next.v += step * (cur.v - prev.v);
  for (std::size_t l = 0; l < slices.size(); ++l) next.sigma[l] += step * (cur.sigma[l] - prev.sigma[l]);
  for (std::size_t l = 0; l < slices.size(); ++l)
    next.q[l] = procrustes<Scalar>(slices[l].omega * next.v * next.sigma[l].asDiagonal() * next.h.transpose());
  normalize_and_fix_signs(next);
  const Scalar err = squared_error<Scalar>(next, slices);
  return {std::move(next), err};
}

}  // namespace detail

/// Runs ALS sweeps from `init_model` until the relative change of the
/// squared error drops below `rel_tol` or `max_sweeps` is reached.
/// Non-convergence is reported through `converged`, not thrown.
template <typename Scalar>
Parafac2Model<Scalar> decompose(std::span<const CovarianceSlice<Scalar>> slices, const SolverOptions& opts) {
  detail::validate_problem(slices, opts);
  for (const auto& s : slices) {
    if (!s.omega.allFinite()) throw Error(ErrorCode::NumericalBreakdown, "non-finite slice " + s.group_id);
    if (s.omega.squaredNorm() == Scalar(0)) throw Error(ErrorCode::ZeroInput, "slice " + s.group_id + " is all zero");
  }

  const Scalar total = detail::total_squared_norm(slices);
  constexpr Scalar kFloor = Scalar(1e-30);
  // A fit at rounding level is exact; further sweeps only shuffle noise.
  const Scalar exact = Scalar(64) * std::numeric_limits<Scalar>::epsilon();

  Parafac2Model<Scalar> model = init_model(slices, opts);
  detail::normalize_and_fix_signs(model);
  Scalar prev = squared_error<Scalar>(model, slices);
  model.error_history.assign(1, prev);

  for (int t = 0; t < opts.max_sweeps; ++t) {
    Parafac2Model<Scalar> swept = als_sweep(model, slices);
    Scalar err = swept.error_history.back();
    if (t > 0) {
      const Scalar step = std::cbrt(static_cast<Scalar>(t + 1));
      auto [candidate, cerr] = detail::extrapolate<Scalar>(model, swept, slices, step);
      if (std::isfinite(static_cast<double>(cerr)) && cerr < err) {
        candidate.error_history.back() = cerr;
        candidate.fit = std::sqrt(cerr / total);
        swept = std::move(candidate);
        err = cerr;
      }
    }
    // Exact arithmetic never lets a sweep raise the error; when rounding
    // does, the fit has stalled and the previous iterate is kept.
    if (err > prev) {
      model.converged = true;
      break;
    }
    model = std::move(swept);
    if (!std::isfinite(static_cast<double>(err))) throw Error(ErrorCode::NumericalBreakdown, "non-finite error");
    const Scalar rel = (prev - err) / std::max(prev, kFloor);
    prev = err;
    if (rel < Scalar(opts.rel_tol) || err <= exact * exact * total) {
      model.converged = true;
      break;
    }
  }
  return model;
}

template <typename Scalar>
Parafac2Model<Scalar> decompose(const std::vector<CovarianceSlice<Scalar>>& slices, const SolverOptions& opts) {
  return decompose<Scalar>(std::span<const CovarianceSlice<Scalar>>(slices), opts);
}

/// max_l || U_l^T U_l - H^T H ||_inf (entrywise).
template <typename Scalar>
Scalar coupling_deviation(const Parafac2Model<Scalar>& model) {
  const Matrix<Scalar> hh = model.h.transpose() * model.h;
  Scalar worst = 0;
  for (std::size_t l = 0; l < model.groups(); ++l) {
    const Matrix<Scalar> u = model.u(l);
    worst = std::max(worst, (u.transpose() * u - hh).cwiseAbs().maxCoeff());
  }
  return worst;
}

}  // namespace repfactor
