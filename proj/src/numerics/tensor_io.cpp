#include "sstbert/numerics/tensor_io.hpp"

#include <array>
#include <bit>
#include <istream>
#include <ostream>

namespace sstbert::numerics {

namespace {

template <typename U>
void write_le(std::ostream& out, U v) {
  std::array<char, sizeof(U)> bytes;
  for (std::size_t i = 0; i < sizeof(U); ++i) {
    bytes[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  }
  out.write(bytes.data(), bytes.size());
}

template <typename U>
U read_le(std::istream& in) {
  std::array<unsigned char, sizeof(U)> bytes;
  in.read(reinterpret_cast<char*>(bytes.data()), bytes.size());
  if (!in) throw FormatError("unexpected end of data");
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(bytes[i]) << (8 * i);
  return v;
}

constexpr std::uint32_t kMaxRank = 8;

}  // namespace

void write_u32(std::ostream& out, std::uint32_t v) { write_le(out, v); }
void write_u64(std::ostream& out, std::uint64_t v) { write_le(out, v); }
void write_f32(std::ostream& out, float v) { write_le(out, std::bit_cast<std::uint32_t>(v)); }

void write_string(std::ostream& out, const std::string& s) {
  write_u32(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::uint32_t read_u32(std::istream& in) { return read_le<std::uint32_t>(in); }
std::uint64_t read_u64(std::istream& in) { return read_le<std::uint64_t>(in); }
float read_f32(std::istream& in) { return std::bit_cast<float>(read_le<std::uint32_t>(in)); }

std::string read_string(std::istream& in, std::uint32_t max_len) {
  const std::uint32_t n = read_u32(in);
  if (n > max_len) throw FormatError("string length " + std::to_string(n) + " exceeds limit");
  std::string s(n, '\0');
  in.read(s.data(), n);
  if (!in) throw FormatError("unexpected end of data in string");
  return s;
}

void write_tensor_table(std::ostream& out, const TensorTable& table) {
  write_u32(out, static_cast<std::uint32_t>(table.size()));
  for (const auto& [name, tensor] : table) {
    write_string(out, name);
    write_u32(out, static_cast<std::uint32_t>(tensor.rank()));
    for (std::size_t d : tensor.shape()) write_u32(out, static_cast<std::uint32_t>(d));
    for (float v : tensor.values()) write_f32(out, v);
  }
}

TensorTable read_tensor_table(std::istream& in) {
  const std::uint32_t count = read_u32(in);
  TensorTable table;
  for (std::uint32_t t = 0; t < count; ++t) {
    std::string name = read_string(in, 4096);
    const std::uint32_t rank = read_u32(in);
    if (rank == 0 || rank > kMaxRank) {
      throw FormatError("tensor '" + name + "' has invalid rank " + std::to_string(rank));
    }
    Shape shape(rank);
    std::uint64_t total = 1;
    for (auto& d : shape) {
      d = read_u32(in);
      if (d == 0) throw FormatError("tensor '" + name + "' has a zero dimension");
      total *= d;
      if (total > (1ull << 34)) throw FormatError("tensor '" + name + "' is implausibly large");
    }
    std::vector<float> values(total);
    for (float& v : values) v = read_f32(in);
    table.push_back({std::move(name), Tensor<float>(std::move(shape), std::move(values))});
  }
  return table;
}

const Tensor<float>* find_tensor(const TensorTable& table, const std::string& name) {
  for (const auto& entry : table) {
    if (entry.name == name) return &entry.tensor;
  }
  return nullptr;
}

}  // namespace sstbert::numerics
