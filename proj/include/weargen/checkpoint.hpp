#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>
#include <torch/torch.h>

namespace weargen::ckpt {

/// On-disk layout (little-endian):
///   "WGCKPT01"                       8-byte magic
///   u32 meta_len, meta_len bytes     JSON object (architecture + provenance)
///   u32 count
///   count x { u32 name_len, name, u8 dtype (0=f32, 1=i64), u32 ndim, i64 dims[ndim], raw data }
/// Entries are parameters then buffers, in module registration order.
struct Checkpoint {
  nlohmann::json meta;
  std::vector<std::pair<std::string, torch::Tensor>> tensors;
};

void save(const std::filesystem::path& path, const nlohmann::json& meta, const torch::nn::Module& module);
Checkpoint load(const std::filesystem::path& path);

/// Copies tensors into `module` by name. Throws InvalidArgument on a missing
/// name or shape mismatch.
void load_into(torch::nn::Module& module, const Checkpoint& ckpt);

/// FNV-1a over all parameter and buffer bytes, in registration order.
std::uint64_t digest(const torch::nn::Module& module);

}  // namespace weargen::ckpt
