#include "shotdirector/tensor_io.hpp"

#include <bit>
#include <cstring>
#include <istream>
#include <ostream>
#include <sstream>

#include "shotdirector/errors.hpp"
#include "shotdirector/file_util.hpp"

namespace shotdirector {

std::string shape_to_string(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

namespace {

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

template <typename U>
void put_le(std::ostream& out, U value) {
  unsigned char buf[sizeof(U)];
  for (std::size_t i = 0; i < sizeof(U); ++i) buf[i] = static_cast<unsigned char>(value >> (8 * i));
  out.write(reinterpret_cast<const char*>(buf), sizeof(U));
}

template <typename U>
U get_le(std::istream& in, const char* what) {
  unsigned char buf[sizeof(U)];
  if (!in.read(reinterpret_cast<char*>(buf), sizeof(U))) {
    throw LoadError(std::string("tensor file truncated while reading ") + what);
  }
  U value = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) value |= static_cast<U>(buf[i]) << (8 * i);
  return value;
}

template <typename T>
using Bits = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;

template <typename T>
void write_one(std::ostream& out, const Tensor<T>& t) {
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(sizeof(T) == 4 ? DType::Float32 : DType::Float64));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(t.rank()));
  for (std::size_t e : t.shape()) put_le<std::uint64_t>(out, e);
  for (T v : t.values()) put_le<Bits<T>>(out, std::bit_cast<Bits<T>>(v));
}

template <typename T>
Tensor<T> read_payload(std::istream& in, Shape shape) {
  // Guard against absurd extents before allocating.
  std::size_t count = 1;
  for (std::size_t e : shape) {
    if (e != 0 && count > (std::size_t{1} << 40) / e) throw LoadError("tensor extents too large");
    count *= e;
  }
  std::vector<T> data(count);
  for (auto& v : data) v = std::bit_cast<T>(get_le<Bits<T>>(in, "payload"));
  return Tensor<T>(std::move(shape), std::move(data));
}

}  // namespace

void write_tensors(std::ostream& out, const std::vector<AnyTensor>& tensors) {
  out.write(kTensorMagic, sizeof(kTensorMagic));
  put_le<std::uint32_t>(out, kTensorFormatVersion);
  put_le<std::uint32_t>(out, 0);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& t : tensors) std::visit([&](const auto& x) { write_one(out, x); }, t);
}

std::vector<AnyTensor> read_tensors(std::istream& in) {
  char magic[sizeof(kTensorMagic)];
  if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kTensorMagic, sizeof(magic)) != 0) {
    throw LoadError("not a tensor file (bad magic)");
  }
  const auto version = get_le<std::uint32_t>(in, "version");
  if (version != kTensorFormatVersion) {
    throw LoadError("unsupported tensor file version " + std::to_string(version));
  }
  get_le<std::uint32_t>(in, "reserved");
  const auto count = get_le<std::uint32_t>(in, "tensor count");
  std::vector<AnyTensor> tensors;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto dtype = get_le<std::uint32_t>(in, "dtype");
    const auto rank = get_le<std::uint32_t>(in, "rank");
    if (rank > 16) throw LoadError("tensor rank " + std::to_string(rank) + " too large");
    Shape shape(rank);
    for (auto& e : shape) e = static_cast<std::size_t>(get_le<std::uint64_t>(in, "extent"));
    if (dtype == static_cast<std::uint32_t>(DType::Float32)) {
      tensors.emplace_back(read_payload<float>(in, std::move(shape)));
    } else if (dtype == static_cast<std::uint32_t>(DType::Float64)) {
      tensors.emplace_back(read_payload<double>(in, std::move(shape)));
    } else {
      throw LoadError("unknown tensor dtype " + std::to_string(dtype));
    }
  }
  if (in.peek() != std::char_traits<char>::eof()) throw LoadError("trailing bytes after last tensor");
  return tensors;
}

std::string encode_tensors(const std::vector<AnyTensor>& tensors) {
  std::ostringstream ss(std::ios::binary);
  write_tensors(ss, tensors);
  return ss.str();
}

std::vector<AnyTensor> decode_tensors(const std::string& bytes) {
  std::istringstream ss(bytes, std::ios::binary);
  return read_tensors(ss);
}

void save_tensors(const std::filesystem::path& path, const std::vector<AnyTensor>& tensors) {
  write_file_atomic(path, encode_tensors(tensors));
}

std::vector<AnyTensor> load_tensors(const std::filesystem::path& path) {
  return decode_tensors(read_file(path));
}

Tensor<double> as_double(const AnyTensor& t) {
  if (const auto* d = std::get_if<Tensor<double>>(&t)) return *d;
  return tensor_cast<double>(std::get<Tensor<float>>(t));
}

}  // namespace shotdirector
