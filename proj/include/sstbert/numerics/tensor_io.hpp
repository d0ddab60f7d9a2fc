#pragma once

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "sstbert/numerics/tensor.hpp"

namespace sstbert::numerics {

template <typename T>
struct NamedTensor {
  std::string name;
  Tensor<T> tensor;
};

/// Name-indexed tensor payload as stored in checkpoints.
using TensorTable = std::vector<NamedTensor<float>>;

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Little-endian primitives, independent of host byte order.
void write_u32(std::ostream& out, std::uint32_t v);
void write_u64(std::ostream& out, std::uint64_t v);
void write_f32(std::ostream& out, float v);
void write_string(std::ostream& out, const std::string& s);  // u32 length + bytes

std::uint32_t read_u32(std::istream& in);
std::uint64_t read_u64(std::istream& in);
float read_f32(std::istream& in);
std::string read_string(std::istream& in, std::uint32_t max_len = 1u << 20);

/// u32 count, then per tensor: name (u32 length + bytes), u32 rank,
/// u32 dims[rank], f32 data[product(dims)].
void write_tensor_table(std::ostream& out, const TensorTable& table);
TensorTable read_tensor_table(std::istream& in);

/// Looks a tensor up by name; nullptr when absent.
const Tensor<float>* find_tensor(const TensorTable& table, const std::string& name);

}  // namespace sstbert::numerics
