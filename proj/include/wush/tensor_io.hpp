#pragma once

#include <cstdint>
#include <string>

#include "wush/matrix.hpp"

namespace wush {

// "WTEN" container: magic, version (1), dtype (0 = f32, 1 = f64), ndim (1 or 2),
// one reserved zero byte, ndim little-endian u64 dims, row-major little-endian
// payload. A 1-d tensor of length n reads as an n x 1 matrix.
enum class DType : std::uint8_t { F32 = 0, F64 = 1 };

constexpr std::uint8_t kTensorVersion = 1;

void write_tensor(const std::string& path, const Matrix& m, DType dtype = DType::F64);
Matrix read_tensor(const std::string& path);

std::string encode_tensor(const Matrix& m, DType dtype = DType::F64);
Matrix decode_tensor(const std::string& bytes);

}  // namespace wush
