#pragma once

#include <optional>
#include <string>
#include <vector>

#include "repfactor/error.hpp"
#include "repfactor/manifest.hpp"
#include "repfactor/types.hpp"

namespace repfactor {

/// Cross-covariance Omega = Z^T Y of one group (d_l x d).
template <typename Scalar>
struct CovarianceSlice {
  std::string group_id;
  Matrix<Scalar> omega;
  Index m = 0;
};

template <typename Derived>
Matrix<typename Derived::Scalar> center_columns(const Eigen::MatrixBase<Derived>& x) {
  using Scalar = typename Derived::Scalar;
  const Eigen::Matrix<Scalar, 1, Eigen::Dynamic> mean = x.colwise().mean();
  return x.rowwise() - mean;
}

ReprMatrix center_columns(const ReprMatrix& m);

namespace detail {

inline constexpr Index kGramLeafRows = 64;

// Z^T Y accumulated as a balanced tree over contiguous row blocks. The split
// points depend only on the row count, so the summation order is fixed.
template <typename DerivedZ, typename DerivedY>
Matrix<typename DerivedZ::Scalar> pairwise_gram(const Eigen::MatrixBase<DerivedZ>& z,
                                                const Eigen::MatrixBase<DerivedY>& y, Index begin, Index end) {
  const Index n = end - begin;
  if (n <= kGramLeafRows) {
    return z.middleRows(begin, n).transpose() * y.middleRows(begin, n);
  }
  const Index mid = begin + n / 2;
  Matrix<typename DerivedZ::Scalar> left = pairwise_gram(z, y, begin, mid);
  left += pairwise_gram(z, y, mid, end);
  return left;
}

}  // namespace detail

struct CovarianceOptions {
  bool center = true;
  bool normalize = false;
  // Verify that inputs are column-centered before forming the product.
  bool strict = false;
};

template <typename DerivedZ, typename DerivedY>
CovarianceSlice<typename DerivedZ::Scalar> cross_covariance(const Eigen::MatrixBase<DerivedZ>& z,
                                                            const Eigen::MatrixBase<DerivedY>& y, bool normalize,
                                                            bool strict = false) {
  using Scalar = typename DerivedZ::Scalar;
  if (z.rows() != y.rows())
    throw Error(ErrorCode::RowCountMismatch,
                "control has " + std::to_string(z.rows()) + " rows, experimental has " + std::to_string(y.rows()));
  const Index m = z.rows();
  if (normalize && m < 2) throw Error(ErrorCode::DegenerateSample, "normalization needs at least 2 rows");

  if (strict) {
    auto centered = [m](const auto& a) {
      const Scalar scale = a.cwiseAbs().maxCoeff();
      const Scalar tol = Scalar(1e-12) * Scalar(m) * (scale > Scalar(0) ? scale : Scalar(1));
      return (a.colwise().sum().cwiseAbs().array() <= tol).all();
    };
    if (!centered(z) || !centered(y)) throw Error(ErrorCode::DimensionMismatch, "inputs are not column-centered");
  }

  CovarianceSlice<Scalar> s;
  s.m = m;
  s.omega = detail::pairwise_gram(z, y, 0, m);
  if (normalize) s.omega /= Scalar(m - 1);
  return s;
}

CovarianceSlice<double> cross_covariance(const ReprMatrix& z, const ReprMatrix& y, const CovarianceOptions& opts);

/// One slice per group in `groups` (all manifest groups when empty), in
/// manifest order. Throws MissingEntry naming the first group without the
/// requested (layer, category) cell.
std::vector<CovarianceSlice<double>> build_slices(const AnalysisSet& set, int layer, const std::string& category,
                                                  const CovarianceOptions& opts,
                                                  const std::vector<std::string>& groups = {});

/// Groups that have an entry for (layer, category), in manifest order.
std::vector<std::string> groups_with_cell(const AnalysisSet& set, int layer, const std::string& category);

}  // namespace repfactor
