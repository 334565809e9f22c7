#include "weargen/checkpoint.hpp"

#include <array>
#include <cstring>
#include <fstream>

#include "weargen/errors.hpp"

namespace weargen::ckpt {

namespace {

constexpr std::array<char, 8> kMagic = {'W', 'G', 'C', 'K', 'P', 'T', '0', '1'};

template <typename T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw IoError("checkpoint truncated");
  return v;
}

std::vector<std::pair<std::string, torch::Tensor>> entries(const torch::nn::Module& module) {
  std::vector<std::pair<std::string, torch::Tensor>> out;
  for (const auto& p : module.named_parameters(true)) out.emplace_back(p.key(), p.value());
  for (const auto& b : module.named_buffers(true)) out.emplace_back(b.key(), b.value());
  return out;
}

}  // namespace

void save(const std::filesystem::path& path, const nlohmann::json& meta, const torch::nn::Module& module) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot write checkpoint " + path.string());
  os.write(kMagic.data(), kMagic.size());
  const std::string meta_s = meta.dump();
  put<std::uint32_t>(os, static_cast<std::uint32_t>(meta_s.size()));
  os.write(meta_s.data(), static_cast<std::streamsize>(meta_s.size()));
  const auto items = entries(module);
  put<std::uint32_t>(os, static_cast<std::uint32_t>(items.size()));
  for (const auto& [name, tensor] : items) {
    put<std::uint32_t>(os, static_cast<std::uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    const bool is_long = tensor.scalar_type() == torch::kLong;
    auto t = tensor.detach().to(torch::kCPU, is_long ? torch::kLong : torch::kFloat32).contiguous();
    put<std::uint8_t>(os, is_long ? 1 : 0);
    put<std::uint32_t>(os, static_cast<std::uint32_t>(t.dim()));
    for (auto d : t.sizes()) put<std::int64_t>(os, d);
    os.write(static_cast<const char*>(t.data_ptr()), static_cast<std::streamsize>(t.numel() * t.element_size()));
  }
  if (!os) throw IoError("failed writing checkpoint " + path.string());
}

Checkpoint load(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open checkpoint " + path.string());
  std::array<char, 8> magic{};
  is.read(magic.data(), magic.size());
  if (!is || magic != kMagic) throw IoError("not a weargen checkpoint: " + path.string());
  Checkpoint ck;
  const auto meta_len = get<std::uint32_t>(is);
  std::string meta_s(meta_len, '\0');
  is.read(meta_s.data(), meta_len);
  if (!is) throw IoError("checkpoint truncated");
  ck.meta = nlohmann::json::parse(meta_s);
  const auto count = get<std::uint32_t>(is);
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto name_len = get<std::uint32_t>(is);
    std::string name(name_len, '\0');
    is.read(name.data(), name_len);
    const auto dtype = get<std::uint8_t>(is);
    const auto ndim = get<std::uint32_t>(is);
    std::vector<int64_t> dims(ndim);
    for (auto& d : dims) d = get<std::int64_t>(is);
    auto t = torch::empty(dims, dtype == 1 ? torch::kLong : torch::kFloat32);
    is.read(static_cast<char*>(t.data_ptr()), static_cast<std::streamsize>(t.numel() * t.element_size()));
    if (!is) throw IoError("checkpoint truncated");
    ck.tensors.emplace_back(std::move(name), std::move(t));
  }
  return ck;
}

void load_into(torch::nn::Module& module, const Checkpoint& ckpt) {
  torch::NoGradGuard guard;
  std::unordered_map<std::string, const torch::Tensor*> by_name;
  for (const auto& [name, t] : ckpt.tensors) by_name[name] = &t;
  for (auto& [name, target] : entries(module)) {
    auto it = by_name.find(name);
    if (it == by_name.end()) throw InvalidArgument("checkpoint lacks tensor '" + name + "'");
    if (it->second->sizes() != target.sizes()) throw InvalidArgument("checkpoint shape mismatch for '" + name + "'");
    target.copy_(*it->second);
  }
}

std::uint64_t digest(const torch::nn::Module& module) {
  std::uint64_t h = 1469598103934665603ULL;
  for (const auto& [name, tensor] : entries(module)) {
    auto t = tensor.detach().contiguous();
    const auto* bytes = static_cast<const unsigned char*>(t.data_ptr());
    const auto n = static_cast<std::size_t>(t.numel() * t.element_size());
    for (std::size_t i = 0; i < n; ++i) {
      h ^= bytes[i];
      h *= 1099511628211ULL;
    }
  }
  return h;
}

}  // namespace weargen::ckpt
