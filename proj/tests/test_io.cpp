#include <cstring>
#include <limits>

#include <gtest/gtest.h>

#include "helpers.hpp"
#include "wush/tensor_io.hpp"

namespace wush {
namespace {

using testing::error_code;
using testing::gaussian_matrix;

std::string header(std::uint8_t version, std::uint8_t dtype, std::uint8_t ndim, std::initializer_list<std::uint64_t> dims) {
  std::string h = "WTEN";
  h += static_cast<char>(version);
  h += static_cast<char>(dtype);
  h += static_cast<char>(ndim);
  h += '\0';
  for (std::uint64_t d : dims)
    for (int b = 0; b < 8; ++b) h += static_cast<char>((d >> (8 * b)) & 0xff);
  return h;
}

std::string doubles(std::size_t n) {
  std::string s(n * 8, '\0');
  for (std::size_t i = 0; i < n; ++i) {
    const double v = static_cast<double>(i) + 0.5;
    std::memcpy(s.data() + 8 * i, &v, 8);
  }
  return s;
}

TEST(TensorIo, FileRoundTripIsExact) {
  const auto dir = testing::scratch_dir("tensor_roundtrip");
  const Matrix m = gaussian_matrix(3, 5, 1);
  write_tensor((dir / "m.wten").string(), m);
  EXPECT_EQ(read_tensor((dir / "m.wten").string()), m);
}

TEST(TensorIo, Layout) {
  const Matrix m{{1.5, 2.5}, {3.5, 4.5}, {5.5, 6.5}};
  const std::string bytes = encode_tensor(m);
  EXPECT_EQ(bytes.substr(0, 24), header(1, 1, 2, {3, 2}));
  EXPECT_EQ(bytes.size(), 24u + 6u * 8u);
  EXPECT_EQ(decode_tensor(header(1, 1, 2, {2, 2}) + doubles(4)), (Matrix{{0.5, 1.5}, {2.5, 3.5}}));
}

TEST(TensorIo, Float32AndVectors) {
  const Matrix m{{0.5, -2.0, 1e-3}};
  const Matrix back = decode_tensor(encode_tensor(m, DType::F32));
  for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(back(0, j), static_cast<double>(static_cast<float>(m(0, j))));
  const Matrix v = decode_tensor(header(1, 1, 1, {3}) + doubles(3));
  EXPECT_EQ(v.rows(), 3u);
  EXPECT_EQ(v.cols(), 1u);
}

TEST(TensorIo, Errors) {
  std::string bad = encode_tensor(Matrix::identity(2));
  bad.replace(0, 4, "XXXX");
  EXPECT_EQ(error_code([&] { decode_tensor(bad); }), Errc::BadMagic);
  EXPECT_EQ(error_code([] { decode_tensor(header(1, 1, 2, {2, 2}) + doubles(3)); }), Errc::TruncatedPayload);
  EXPECT_EQ(error_code([] { decode_tensor(header(1, 1, 2, {2, 2}) + doubles(5)); }), Errc::BadHeader);
  EXPECT_EQ(error_code([] { decode_tensor(header(2, 1, 2, {2, 2}) + doubles(4)); }), Errc::UnsupportedVersion);
  EXPECT_EQ(error_code([] { decode_tensor(header(1, 7, 2, {2, 2}) + doubles(4)); }), Errc::BadHeader);
  EXPECT_EQ(error_code([] { decode_tensor(header(1, 1, 3, {2, 2, 1}) + doubles(4)); }), Errc::BadHeader);
  const std::uint64_t huge = std::numeric_limits<std::uint64_t>::max() / 2;
  EXPECT_EQ(error_code([&] { decode_tensor(header(1, 1, 2, {huge, huge})); }), Errc::DimOverflow);
  EXPECT_EQ(error_code([] { decode_tensor("WTE"); }), Errc::BadMagic);
  EXPECT_EQ(error_code([] { read_tensor("/nonexistent/dir/t.wten"); }), Errc::IoFailure);
  std::string reserved = header(1, 1, 1, {1}) + doubles(1);
  reserved[7] = 1;
  EXPECT_EQ(error_code([&] { decode_tensor(reserved); }), Errc::BadHeader);
}

}  // namespace
}  // namespace wush
