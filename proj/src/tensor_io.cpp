#include "wush/tensor_io.hpp"

#include <bit>
#include <fstream>
#include <iterator>
#include <vector>

#include "wush/error.hpp"

namespace wush {

namespace {

// Element count limit keeps rows * cols * 8 well inside size_t and memory.
constexpr std::uint64_t kMaxElements = std::uint64_t{1} << 34;

template <typename U>
void put_le(std::string& out, U v) {
  for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

template <typename U>
U get_le(const std::string& in, std::size_t pos) {
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
  return v;
}

}  // namespace

std::string encode_tensor(const Matrix& m, DType dtype) {
  std::string out = "WTEN";
  out.push_back(static_cast<char>(kTensorVersion));
  out.push_back(static_cast<char>(dtype));
  out.push_back(2);
  out.push_back(0);
  put_le<std::uint64_t>(out, m.rows());
  put_le<std::uint64_t>(out, m.cols());
  for (double v : m.data()) {
    if (dtype == DType::F64) {
      put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
    } else {
      put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
    }
  }
  return out;
}

Matrix decode_tensor(const std::string& bytes) {
  if (bytes.size() < 4 || bytes.compare(0, 4, "WTEN") != 0) throw Error(Errc::BadMagic, "not a WTEN tensor file");
  if (bytes.size() < 8) throw Error(Errc::BadHeader, "header shorter than 8 bytes");
  const auto version = static_cast<std::uint8_t>(bytes[4]);
  const auto dtype = static_cast<std::uint8_t>(bytes[5]);
  const auto ndim = static_cast<std::uint8_t>(bytes[6]);
  const auto reserved = static_cast<std::uint8_t>(bytes[7]);
  if (version != kTensorVersion) {
    throw Error(Errc::UnsupportedVersion, "tensor version " + std::to_string(version));
  }
  if (dtype > 1) throw Error(Errc::BadHeader, "unknown dtype " + std::to_string(dtype));
  if (ndim < 1 || ndim > 2) throw Error(Errc::BadHeader, "ndim must be 1 or 2, got " + std::to_string(ndim));
  if (reserved != 0) throw Error(Errc::BadHeader, "reserved header byte is nonzero");
  const std::size_t header = 8 + 8 * static_cast<std::size_t>(ndim);
  if (bytes.size() < header) throw Error(Errc::TruncatedPayload, "file ends inside the dims");
  std::uint64_t dims[2] = {0, 1};
  for (std::size_t i = 0; i < ndim; ++i) dims[i] = get_le<std::uint64_t>(bytes, 8 + 8 * i);
  if (dims[1] != 0 && dims[0] > kMaxElements / dims[1]) {
    throw Error(Errc::DimOverflow, "dims " + std::to_string(dims[0]) + " x " + std::to_string(dims[1]));
  }
  const std::uint64_t count = dims[0] * dims[1];
  const std::size_t width = dtype == 1 ? 8 : 4;
  const std::uint64_t payload = count * width;
  if (bytes.size() - header < payload) {
    throw Error(Errc::TruncatedPayload, "payload has " + std::to_string(bytes.size() - header) + " bytes, expected " +
                                            std::to_string(payload));
  }
  if (bytes.size() - header > payload) throw Error(Errc::BadHeader, "trailing bytes after payload");
  std::vector<double> data(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t pos = header + i * width;
    data[i] = dtype == 1 ? std::bit_cast<double>(get_le<std::uint64_t>(bytes, pos))
                         : static_cast<double>(std::bit_cast<float>(get_le<std::uint32_t>(bytes, pos)));
  }
  return Matrix(dims[0], dims[1], std::move(data));
}

void write_tensor(const std::string& path, const Matrix& m, DType dtype) {
  const std::string bytes = encode_tensor(m, dtype);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error(Errc::IoFailure, "cannot open '" + path + "' for writing");
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw Error(Errc::IoFailure, "write to '" + path + "' failed");
}

Matrix read_tensor(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(Errc::IoFailure, "cannot open '" + path + "'");
  const std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return decode_tensor(bytes);
}

}  // namespace wush
