#pragma once

// RFM1 binary matrix format.
//
//   offset  size  field
//   0       4     ASCII "RFM1"
//   4       1     version (1)
//   5       1     dtype (0 = f32, 1 = f64)
//   6       2     zero padding
//   8       8     rows, u64 little-endian
//   16      8     cols, u64 little-endian
//   24      ...   rows*cols values, row-major, little-endian

#include <cstdint>
#include <filesystem>
#include <string>

#include "repfactor/types.hpp"

namespace repfactor {

enum class DType : std::uint8_t { F32 = 0, F64 = 1 };

inline constexpr std::size_t kRfmHeaderSize = 24;

struct ReprMatrix {
  Matrix<double> values;
  std::string group_id;
  int layer = 0;
  std::string category = "ALL";
  // Storage precision on disk; f32 payloads are widened exactly on read.
  DType dtype = DType::F64;

  Index rows() const { return values.rows(); }
  Index cols() const { return values.cols(); }
};

struct RfmHeader {
  std::uint64_t rows = 0;
  std::uint64_t cols = 0;
  DType dtype = DType::F64;
};

/// Parses and validates the header only; also checks the payload length.
RfmHeader read_header(const std::filesystem::path& path);

ReprMatrix read_matrix(const std::filesystem::path& path);

void write_matrix(const ReprMatrix& m, const std::filesystem::path& path);

/// Convenience for plain Eigen matrices (always written as f64).
void write_matrix(const Eigen::Ref<const Matrix<double>>& values, const std::filesystem::path& path);

/// Throws NonFiniteValue if any entry is NaN or infinite.
void check_finite(const Eigen::Ref<const Matrix<double>>& values, const std::string& what);

}  // namespace repfactor
