#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <variant>
#include <vector>

#include "shotdirector/tensor.hpp"

namespace shotdirector {

// Binary tensor container.
//
//   offset 0   8 bytes   magic "SHDTNSR\0"
//   offset 8   u32 LE    format version (1)
//   offset 12  u32 LE    reserved, zero
//   offset 16  u32 LE    tensor count
//   per tensor:
//     u32 LE   dtype (1 = float32, 2 = float64)
//     u32 LE   rank
//     u64 LE   extents[rank]
//     payload  prod(extents) little-endian IEEE-754 values
//
// Reading and writing are bit-exact.

inline constexpr char kTensorMagic[8] = {'S', 'H', 'D', 'T', 'N', 'S', 'R', '\0'};
inline constexpr std::uint32_t kTensorFormatVersion = 1;

enum class DType : std::uint32_t { Float32 = 1, Float64 = 2 };

using AnyTensor = std::variant<Tensor<float>, Tensor<double>>;

void write_tensors(std::ostream& out, const std::vector<AnyTensor>& tensors);
std::vector<AnyTensor> read_tensors(std::istream& in);

std::string encode_tensors(const std::vector<AnyTensor>& tensors);
std::vector<AnyTensor> decode_tensors(const std::string& bytes);

void save_tensors(const std::filesystem::path& path, const std::vector<AnyTensor>& tensors);
std::vector<AnyTensor> load_tensors(const std::filesystem::path& path);

/// Returns the tensor as double, widening float32 payloads.
Tensor<double> as_double(const AnyTensor& t);

}  // namespace shotdirector
