#include "repfactor/matrix_io.hpp"

#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <vector>

#include "repfactor/error.hpp"

namespace repfactor {
namespace {

constexpr std::array<char, 4> kMagic = {'R', 'F', 'M', '1'};
constexpr std::uint8_t kVersion = 1;

void put_u64(unsigned char* out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out[i] = static_cast<unsigned char>(v >> (8 * i));
}

std::uint64_t get_u64(const unsigned char* in) {
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | in[i];
  return v;
}

std::size_t value_size(DType t) { return t == DType::F32 ? 4 : 8; }

RfmHeader parse_header(const unsigned char* buf, const std::filesystem::path& path) {
  if (std::memcmp(buf, kMagic.data(), kMagic.size()) != 0)
    throw Error(ErrorCode::BadMagic, path.string() + " does not start with RFM1");
  if (buf[4] != kVersion)
    throw Error(ErrorCode::BadMagic, path.string() + ": unsupported version " + std::to_string(buf[4]));
  if (buf[5] > 1)
    throw Error(ErrorCode::BadMagic, path.string() + ": unknown dtype " + std::to_string(buf[5]));
  RfmHeader h;
  h.dtype = static_cast<DType>(buf[5]);
  h.rows = get_u64(buf + 8);
  h.cols = get_u64(buf + 16);
  if (h.rows == 0 || h.cols == 0)
    throw Error(ErrorCode::DimensionMismatch, path.string() + ": empty matrix");
  return h;
}

void check_payload_size(const RfmHeader& h, std::uintmax_t file_size, const std::filesystem::path& path) {
  const std::uintmax_t payload = file_size - kRfmHeaderSize;
  const std::uintmax_t vs = value_size(h.dtype);
  // rows*cols*vs may overflow for hostile headers; compare by division.
  if (h.rows > payload / vs / h.cols)
    throw Error(ErrorCode::TruncatedPayload, path.string() + ": declared " + std::to_string(h.rows) + "x" +
                                                 std::to_string(h.cols) + " exceeds file length");
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::error_code ec;
  if (!std::filesystem::is_regular_file(path, ec))
    throw Error(ErrorCode::MissingFile, path.string());
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::MissingFile, path.string());
  return in;
}

}  // namespace

void check_finite(const Eigen::Ref<const Matrix<double>>& values, const std::string& what) {
  if (!values.allFinite()) throw Error(ErrorCode::NonFiniteValue, what);
}

RfmHeader read_header(const std::filesystem::path& path) {
  auto in = open_input(path);
  std::array<unsigned char, kRfmHeaderSize> buf{};
  if (!in.read(reinterpret_cast<char*>(buf.data()), buf.size()))
    throw Error(ErrorCode::BadMagic, path.string() + ": shorter than header");
  RfmHeader h = parse_header(buf.data(), path);
  check_payload_size(h, std::filesystem::file_size(path), path);
  return h;
}

ReprMatrix read_matrix(const std::filesystem::path& path) {
  const RfmHeader h = read_header(path);
  auto in = open_input(path);
  in.seekg(kRfmHeaderSize);

  const auto rows = static_cast<Index>(h.rows);
  const auto cols = static_cast<Index>(h.cols);
  const std::size_t vs = value_size(h.dtype);
  std::vector<unsigned char> payload(h.rows * h.cols * vs);
  if (!in.read(reinterpret_cast<char*>(payload.data()), static_cast<std::streamsize>(payload.size())))
    throw Error(ErrorCode::TruncatedPayload, path.string());

  ReprMatrix m;
  m.dtype = h.dtype;
  m.values.resize(rows, cols);
  const unsigned char* p = payload.data();
  for (Index r = 0; r < rows; ++r) {
    for (Index c = 0; c < cols; ++c, p += vs) {
      if (h.dtype == DType::F64) {
        m.values(r, c) = std::bit_cast<double>(get_u64(p));
      } else {
        std::uint32_t bits = 0;
        for (int i = 3; i >= 0; --i) bits = (bits << 8) | p[i];
        m.values(r, c) = static_cast<double>(std::bit_cast<float>(bits));
      }
    }
  }
  check_finite(m.values, path.string());
  return m;
}

void write_matrix(const ReprMatrix& m, const std::filesystem::path& path) {
  if (m.rows() < 1 || m.cols() < 1) throw Error(ErrorCode::DimensionMismatch, "cannot write empty matrix");
  check_finite(m.values, path.string());

  const std::size_t vs = value_size(m.dtype);
  std::vector<unsigned char> buf(kRfmHeaderSize + static_cast<std::size_t>(m.rows() * m.cols()) * vs, 0);
  std::memcpy(buf.data(), kMagic.data(), kMagic.size());
  buf[4] = kVersion;
  buf[5] = static_cast<unsigned char>(m.dtype);
  put_u64(buf.data() + 8, static_cast<std::uint64_t>(m.rows()));
  put_u64(buf.data() + 16, static_cast<std::uint64_t>(m.cols()));

  unsigned char* p = buf.data() + kRfmHeaderSize;
  for (Index r = 0; r < m.rows(); ++r) {
    for (Index c = 0; c < m.cols(); ++c, p += vs) {
      if (m.dtype == DType::F64) {
        put_u64(p, std::bit_cast<std::uint64_t>(m.values(r, c)));
      } else {
        const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(m.values(r, c)));
        for (int i = 0; i < 4; ++i) p[i] = static_cast<unsigned char>(bits >> (8 * i));
      }
    }
  }

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!out) throw Error(ErrorCode::IoFailure, "short write to " + path.string());
}

void write_matrix(const Eigen::Ref<const Matrix<double>>& values, const std::filesystem::path& path) {
  ReprMatrix m;
  m.values = values;
  write_matrix(m, path);
}

}  // namespace repfactor
