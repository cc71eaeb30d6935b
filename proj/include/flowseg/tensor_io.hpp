#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "flowseg/field.hpp"
#include "flowseg/levelset.hpp"
#include "flowseg/solver.hpp"

namespace flowseg {

// File layout (all integers unsigned 32-bit little-endian):
//   "CMF1" version=1 ndim dims[ndim] float32 payload
// A named container replaces ndim with 0xFFFFFFFF, followed by a count and,
// per entry, a name length, the UTF-8 name, and a tensor record
// (ndim dims[ndim] payload).

inline constexpr std::uint32_t kTensorVersion = 1;
inline constexpr std::uint32_t kContainerMarker = 0xFFFFFFFFu;

struct Tensor {
  std::vector<std::uint32_t> dims;
  std::vector<float> values;

  std::size_t element_count() const;
  friend bool operator==(const Tensor&, const Tensor&) = default;
};

using NamedTensors = std::vector<std::pair<std::string, Tensor>>;

class TensorFileError : public std::runtime_error {
 public:
  enum class Kind { bad_magic, unsupported_version, truncated, dimension_overflow, io, format };

  TensorFileError(Kind kind, const std::string& message) : std::runtime_error(message), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

std::vector<std::uint8_t> encode_tensor(const Tensor& t);
std::vector<std::uint8_t> encode_tensors(const NamedTensors& tensors);
/// Accepts a single tensor (returned under the empty name) or a container.
NamedTensors decode_tensors(const std::vector<std::uint8_t>& bytes);

void write_tensor(const std::filesystem::path& path, const Tensor& t);
void write_tensors(const std::filesystem::path& path, const NamedTensors& tensors);
/// Throws TensorFileError (format) if the file holds a named container.
Tensor read_tensor(const std::filesystem::path& path);
NamedTensors read_tensors(const std::filesystem::path& path);

/// Looks up `name`; throws TensorFileError (format) if absent.
const Tensor& find_tensor(const NamedTensors& tensors, const std::string& name);

Tensor to_tensor(const ScalarField& f);
Tensor to_tensor(const Mask& m);
/// [3, H, W]: source, sink, edge.
Tensor to_tensor(const CapacityMaps& caps);

ScalarField field_from_tensor(const Tensor& t);
/// Nonzero values become foreground.
Mask mask_from_tensor(const Tensor& t);
/// Accepts [3, H, W].
CapacityMaps caps_from_tensor(const Tensor& t);

}  // namespace flowseg
