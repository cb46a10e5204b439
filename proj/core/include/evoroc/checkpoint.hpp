#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "evoroc/model.hpp"

namespace evoroc {

// EVOM container: "EVOM", u32 version=1, u32 tensor count, then per tensor a
// u16-length UTF-8 name, u8 ndim, ndim x u32 extents and f32 data, all
// little-endian.
using NamedTensor = std::pair<std::string, Tensor>;

std::string serialize_tensors(const std::vector<NamedTensor>& tensors);
std::vector<NamedTensor> deserialize_tensors(std::string_view bytes);

std::string serialize_model(const CnnParams& params);
// Requires all twelve tensors with the fixed architecture shapes.
CnnModel deserialize_model(std::string_view bytes);

void save_model(const CnnParams& params, const std::filesystem::path& path);
CnnModel load_model(const std::filesystem::path& path);

}  // namespace evoroc
