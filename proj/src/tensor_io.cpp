#include "flowseg/tensor_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>

namespace flowseg {

namespace {

constexpr char kMagic[4] = {'C', 'M', 'F', '1'};
constexpr std::uint32_t kMaxDims = 16;
// 2^31 elements keeps every payload below 8 GiB.
constexpr std::uint64_t kMaxElements = std::uint64_t{1} << 31;

using Kind = TensorFileError::Kind;

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_record(std::vector<std::uint8_t>& out, const Tensor& t) {
  if (t.dims.size() > kMaxDims) throw TensorFileError(Kind::dimension_overflow, "too many dimensions");
  if (t.element_count() != t.values.size()) {
    throw TensorFileError(Kind::format, "tensor value count does not match its dimensions");
  }
  put_u32(out, static_cast<std::uint32_t>(t.dims.size()));
  for (std::uint32_t d : t.dims) put_u32(out, d);
  for (float v : t.values) put_u32(out, std::bit_cast<std::uint32_t>(v));
}

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}

  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }

  std::string text(std::size_t n, const char* what) {
    need(n, what);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }

  Tensor record_after_ndim(std::uint32_t ndim) {
    if (ndim > kMaxDims) {
      throw TensorFileError(Kind::dimension_overflow, "ndim " + std::to_string(ndim) + " exceeds " +
                                                          std::to_string(kMaxDims));
    }
    Tensor t;
    std::uint64_t count = 1;
    for (std::uint32_t i = 0; i < ndim; ++i) {
      const std::uint32_t d = u32("dimensions");
      t.dims.push_back(d);
      if (d != 0 && count > kMaxElements / d) {
        throw TensorFileError(Kind::dimension_overflow, "element count exceeds 2^31");
      }
      count *= d;
    }
    if (count > kMaxElements) throw TensorFileError(Kind::dimension_overflow, "element count exceeds 2^31");
    need(count * 4, "payload");
    t.values.resize(count);
    for (std::size_t i = 0; i < count; ++i) t.values[i] = std::bit_cast<float>(u32("payload"));
    return t;
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::uint64_t n, const char* what) const {
    if (bytes_.size() - pos_ < n) throw TensorFileError(Kind::truncated, std::string("truncated ") + what);
  }

  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
};

std::vector<std::uint8_t> header() {
  std::vector<std::uint8_t> out(kMagic, kMagic + 4);
  put_u32(out, kTensorVersion);
  return out;
}

void write_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw TensorFileError(Kind::io, "cannot open " + path.string() + " for writing");
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw TensorFileError(Kind::io, "write failed: " + path.string());
}

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw TensorFileError(Kind::io, "cannot open " + path.string());
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>());
}

GridDomain plane_domain(const Tensor& t, const char* what) {
  if (t.dims.size() != 2) throw TensorFileError(Kind::format, std::string(what) + " needs a 2-D tensor");
  return GridDomain(t.dims[0], t.dims[1]);
}

}  // namespace

std::size_t Tensor::element_count() const {
  std::size_t n = 1;
  for (std::uint32_t d : dims) n *= d;
  return n;
}

std::vector<std::uint8_t> encode_tensor(const Tensor& t) {
  auto out = header();
  put_record(out, t);
  return out;
}

std::vector<std::uint8_t> encode_tensors(const NamedTensors& tensors) {
  auto out = header();
  put_u32(out, kContainerMarker);
  put_u32(out, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& [name, t] : tensors) {
    put_u32(out, static_cast<std::uint32_t>(name.size()));
    out.insert(out.end(), name.begin(), name.end());
    put_record(out, t);
  }
  return out;
}

NamedTensors decode_tensors(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 4) throw TensorFileError(Kind::truncated, "truncated magic");
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) throw TensorFileError(Kind::bad_magic, "bad magic");
  Reader r(bytes);
  r.text(4, "magic");
  const std::uint32_t version = r.u32("version");
  if (version != kTensorVersion) {
    throw TensorFileError(Kind::unsupported_version, "unsupported version " + std::to_string(version));
  }
  NamedTensors out;
  const std::uint32_t ndim = r.u32("ndim");
  if (ndim != kContainerMarker) {
    out.emplace_back("", r.record_after_ndim(ndim));
  } else {
    const std::uint32_t count = r.u32("entry count");
    for (std::uint32_t i = 0; i < count; ++i) {
      std::string name = r.text(r.u32("name length"), "name");
      Tensor t = r.record_after_ndim(r.u32("ndim"));
      out.emplace_back(std::move(name), std::move(t));
    }
  }
  if (!r.done()) throw TensorFileError(Kind::format, "trailing bytes after tensor data");
  return out;
}

void write_tensor(const std::filesystem::path& path, const Tensor& t) { write_bytes(path, encode_tensor(t)); }

void write_tensors(const std::filesystem::path& path, const NamedTensors& tensors) {
  write_bytes(path, encode_tensors(tensors));
}

NamedTensors read_tensors(const std::filesystem::path& path) { return decode_tensors(read_bytes(path)); }

Tensor read_tensor(const std::filesystem::path& path) {
  const auto bytes = read_bytes(path);
  NamedTensors all = decode_tensors(bytes);
  if (bytes.size() >= 12 && bytes[8] == 0xFF && bytes[9] == 0xFF && bytes[10] == 0xFF && bytes[11] == 0xFF) {
    throw TensorFileError(Kind::format, path.string() + " holds a named container, not a single tensor");
  }
  return std::move(all.front().second);
}

const Tensor& find_tensor(const NamedTensors& tensors, const std::string& name) {
  for (const auto& [n, t] : tensors) {
    if (n == name) return t;
  }
  throw TensorFileError(Kind::format, "missing tensor '" + name + "'");
}

Tensor to_tensor(const ScalarField& f) {
  Tensor t{{static_cast<std::uint32_t>(f.domain().height), static_cast<std::uint32_t>(f.domain().width)}, {}};
  t.values.reserve(f.size());
  for (double v : f.values()) t.values.push_back(static_cast<float>(v));
  return t;
}

Tensor to_tensor(const Mask& m) {
  Tensor t{{static_cast<std::uint32_t>(m.domain().height), static_cast<std::uint32_t>(m.domain().width)}, {}};
  for (std::uint8_t v : m.values()) t.values.push_back(static_cast<float>(v));
  return t;
}

Tensor to_tensor(const CapacityMaps& caps) {
  const GridDomain d = caps.domain();
  Tensor t{{3, static_cast<std::uint32_t>(d.height), static_cast<std::uint32_t>(d.width)}, {}};
  for (const ScalarField* f : {&caps.source, &caps.sink, &caps.edge}) {
    for (double v : f->values()) t.values.push_back(static_cast<float>(v));
  }
  return t;
}

ScalarField field_from_tensor(const Tensor& t) {
  const GridDomain d = plane_domain(t, "field");
  return ScalarField(d, std::vector<double>(t.values.begin(), t.values.end()));
}

Mask mask_from_tensor(const Tensor& t) {
  const GridDomain d = plane_domain(t, "mask");
  std::vector<std::uint8_t> v;
  for (float x : t.values) v.push_back(x != 0.0f ? 1 : 0);
  return Mask(d, std::move(v));
}

CapacityMaps caps_from_tensor(const Tensor& t) {
  if (t.dims.size() != 3 || t.dims[0] != 3) throw TensorFileError(Kind::format, "capacities need a [3, H, W] tensor");
  const GridDomain d(t.dims[1], t.dims[2]);
  const auto plane = [&](std::size_t k) {
    const auto begin = t.values.begin() + static_cast<std::ptrdiff_t>(k * d.size());
    return ScalarField(d, std::vector<double>(begin, begin + static_cast<std::ptrdiff_t>(d.size())));
  };
  CapacityMaps caps{plane(0), plane(1), plane(2)};
  caps.validate();
  return caps;
}

}  // namespace flowseg
