#include "evoroc/checkpoint.hpp"

#include <map>

#include "evoroc/binary_io.hpp"

namespace evoroc {

namespace {
constexpr char kMagic[4] = {'E', 'V', 'O', 'M'};
constexpr std::uint32_t kVersion = 1;
}  // namespace

std::string serialize_tensors(const std::vector<NamedTensor>& tensors) {
  ByteWriter w;
  w.bytes({kMagic, 4});
  w.u32(kVersion);
  w.u32(static_cast<std::uint32_t>(tensors.size()));
  for (const auto& [name, t] : tensors) {
    require(name.size() <= 0xffff, ErrorCode::kInvalidArgument, "tensor name too long");
    require(t.ndim() <= 0xff, ErrorCode::kInvalidArgument, "tensor rank too large");
    w.u16(static_cast<std::uint16_t>(name.size()));
    w.bytes(name);
    w.u8(static_cast<std::uint8_t>(t.ndim()));
    for (std::size_t e : t.shape()) w.u32(static_cast<std::uint32_t>(e));
    for (float v : t.values()) w.f32(v);
  }
  return w.take();
}

std::vector<NamedTensor> deserialize_tensors(std::string_view bytes) {
  ByteReader r(bytes);
  require(r.bytes(4) == std::string_view(kMagic, 4), ErrorCode::kBadMagic, "not an EVOM checkpoint");
  const std::uint32_t version = r.u32();
  require(version == kVersion, ErrorCode::kVersionMismatch,
          "EVOM version " + std::to_string(version) + ", supported " + std::to_string(kVersion));
  const std::uint32_t count = r.u32();
  std::vector<NamedTensor> out;
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name(r.bytes(r.u16()));
    const std::uint8_t ndim = r.u8();
    require(ndim >= 1, ErrorCode::kShapeMismatch, "tensor " + name + " has rank 0");
    Shape shape(ndim);
    for (std::size_t& e : shape) {
      e = r.u32();
      require(e > 0, ErrorCode::kShapeMismatch, "tensor " + name + " has a zero extent");
    }
    const std::size_t n = shape_size(shape);
    require(r.remaining() / 4 >= n, ErrorCode::kTruncated, "tensor " + name + " data is truncated");
    std::vector<float> data(n);
    for (float& v : data) v = r.f32();
    out.emplace_back(std::move(name), Tensor(std::move(shape), std::move(data)));
  }
  require(r.remaining() == 0, ErrorCode::kInvalidArgument, "trailing bytes after EVOM tensors");
  return out;
}

std::string serialize_model(const CnnParams& params) {
  validate_architecture(params);
  std::vector<NamedTensor> tensors;
  visit_params(params, [&](std::string_view name, const Tensor& t) { tensors.emplace_back(std::string(name), t); });
  return serialize_tensors(tensors);
}

CnnModel deserialize_model(std::string_view bytes) {
  std::map<std::string, Tensor, std::less<>> by_name;
  for (auto& [name, t] : deserialize_tensors(bytes)) {
    require(by_name.emplace(name, std::move(t)).second, ErrorCode::kInvalidArgument, "duplicate tensor " + name);
  }
  CnnModel m;
  visit_params(m, [&](std::string_view name, Tensor& t) {
    auto it = by_name.find(name);
    require(it != by_name.end(), ErrorCode::kInvalidArgument, "checkpoint lacks tensor " + std::string(name));
    t = std::move(it->second);
  });
  validate_architecture(m.params());
  return m;
}

void save_model(const CnnParams& params, const std::filesystem::path& path) {
  write_file(path, serialize_model(params));
}

CnnModel load_model(const std::filesystem::path& path) { return deserialize_model(read_file(path)); }

}  // namespace evoroc
