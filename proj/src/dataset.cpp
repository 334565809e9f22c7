#include <cstdio>
#include <fstream>
#include <sstream>

#include "weargen/errors.hpp"
#include "weargen/image_ops.hpp"
#include "weargen/synthworld.hpp"

namespace weargen::synth {

namespace fs = std::filesystem;

std::string record_name(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%06zu", index);
  return buf;
}

std::vector<ManifestRow> generate_dataset(const SceneConfig& config, std::uint64_t global_seed, std::size_t n,
                                          const fs::path& out_dir) {
  if (n < 1) throw InvalidArgument("generate_dataset: n must be at least 1");
  std::error_code ec;
  for (const char* sub : {"worn", "unworn", "shoe_only", "trimask", "pose"}) {
    fs::create_directories(out_dir / sub, ec);
    if (ec) throw IoError("cannot create " + (out_dir / sub).string() + ": " + ec.message());
  }
  std::ofstream manifest(out_dir / "manifest", std::ios::trunc);
  if (!manifest) throw IoError("cannot write " + (out_dir / "manifest").string());

  std::vector<ManifestRow> rows;
  rows.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint64_t seed = record_seed(global_seed, i);
    const SceneSample s = sample_scene(seed, config);
    const std::string name = record_name(i);
    img::write_png(out_dir / "worn" / (name + ".png"), s.worn);
    img::write_png(out_dir / "unworn" / (name + ".png"), s.unworn);
    img::write_png(out_dir / "shoe_only" / (name + ".png"), s.shoe_only);
    img::write_png(out_dir / "trimask" / (name + ".png"), s.tri_mask);

    nlohmann::json j = geom::pose_to_json(s.pose);
    j["seed"] = seed;
    j["tags"] = tags_to_string(s.tags);
    nlohmann::json shoes = nlohmann::json::array();
    for (const auto& g : s.geometry) shoes.push_back(geom::shoe_geometry_to_json(g));
    j["shoes"] = std::move(shoes);
    std::ofstream pf(out_dir / "pose" / (name + ".json"), std::ios::trunc);
    if (!pf) throw IoError("cannot write pose annotation for record " + name);
    pf << j.dump(1) << '\n';

    manifest << i << ' ' << seed << ' ' << tags_to_string(s.tags) << '\n';
    rows.push_back({i, seed, s.tags});
  }
  if (!manifest) throw IoError("failed writing manifest");
  return rows;
}

std::vector<ManifestRow> read_manifest(const fs::path& dataset_dir) {
  std::ifstream in(dataset_dir / "manifest");
  if (!in) throw IoError("cannot read manifest in " + dataset_dir.string());
  std::vector<ManifestRow> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    ManifestRow row;
    std::string tags;
    if (!(ls >> row.index >> row.seed >> tags)) throw IoError("malformed manifest line: " + line);
    row.tags = tags_from_string(tags);
    rows.push_back(row);
  }
  return rows;
}

SceneSample load_record(const fs::path& dataset_dir, const ManifestRow& row) {
  const std::string name = record_name(row.index);
  SceneSample s;
  s.seed = row.seed;
  s.tags = row.tags;
  s.worn = img::read_png(dataset_dir / "worn" / (name + ".png"));
  s.unworn = img::read_png(dataset_dir / "unworn" / (name + ".png"));
  s.shoe_only = img::read_png(dataset_dir / "shoe_only" / (name + ".png"));
  s.tri_mask = img::read_png(dataset_dir / "trimask" / (name + ".png"), true);
  std::ifstream pf(dataset_dir / "pose" / (name + ".json"));
  if (!pf) throw IoError("missing pose annotation for record " + name);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(pf);
  } catch (const nlohmann::json::exception& e) {
    throw IoError("bad pose annotation for record " + name + ": " + e.what());
  }
  s.pose = geom::pose_from_json(j);
  if (j.contains("shoes")) {
    for (const auto& g : j["shoes"]) s.geometry.push_back(geom::shoe_geometry_from_json(g));
  }
  return s;
}

std::vector<SceneSample> load_dataset(const fs::path& dataset_dir, std::size_t limit) {
  auto rows = read_manifest(dataset_dir);
  if (limit > 0 && rows.size() > limit) rows.resize(limit);
  std::vector<SceneSample> out;
  out.reserve(rows.size());
  for (const auto& row : rows) out.push_back(load_record(dataset_dir, row));
  return out;
}

}  // namespace weargen::synth
