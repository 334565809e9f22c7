#include "unit.hpp"

#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <fstream>

#include "fixtures.hpp"
#include "support.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Result {
  int code = -1;
  std::string output;  // stdout and stderr
};

Result cli(const std::string& args) {
  const std::string cmd = std::string(WEARGEN_CLI) + " " + args + " 2>&1";
  Result r;
  FILE* p = popen(cmd.c_str(), "r");
  REQUIRE(p != nullptr);
  std::array<char, 4096> buf{};
  while (std::fgets(buf.data(), buf.size(), p)) r.output += buf.data();
  const int status = pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), {}};
}

json last_json(const std::string& out) {
  const auto pos = out.find('{');
  REQUIRE(pos != std::string::npos);
  return json::parse(out.substr(pos));
}

void write(const fs::path& p, const std::string& text) {
  std::ofstream f(p);
  f << text;
}

}  // namespace

TEST_CASE("gen-data writes the requested rows, reproducibly") {
  testing::TempDir dir("cli-gen");
  const auto r = cli("gen-data --n 10 --seed 5 --out " + (dir.path / "a").string());
  REQUIRE_MESSAGE(r.code == 0, r.output);
  const std::string manifest = slurp(dir.path / "a/manifest");
  CHECK(std::count(manifest.begin(), manifest.end(), '\n') == 10);
  CHECK(last_json(r.output).at("rows") == 10);
  REQUIRE(cli("gen-data --n 10 --seed 5 --out " + (dir.path / "b").string()).code == 0);
  CHECK(slurp(dir.path / "b/manifest") == manifest);
  CHECK(slurp(dir.path / "b/worn/000007.png") == slurp(dir.path / "a/worn/000007.png"));
}

TEST_CASE("training subcommands are reproducible") {
  testing::TempDir dir("cli-train");
  write(dir.path / "tiny.ini",
        "[data]\nwd_count = 6\nleg_count = 6\n[wd]\niterations = 3\nbase_channels = 8\nbatch_size = 4\n"
        "[lps1]\niterations = 3\nbase_channels = 8\nbatch_size = 4\ntrain_count = 6\n"
        "[lps2]\niterations = 5\nhidden = 32\nbatch_size = 8\n");
  const std::string cfg = "--config " + (dir.path / "tiny.ini").string();
  REQUIRE(cli("gen-data --kind wd " + cfg).code == 0);
  REQUIRE(cli("gen-data --kind legs " + cfg).code == 0);
  for (const std::string sub : {"train-wd", "train-lps1", "train-lps2"}) {
    const auto a = cli(sub + " " + cfg + " --seed 3 --out " + (dir.path / (sub + "-a.ckpt")).string());
    const auto b = cli(sub + " " + cfg + " --seed 3 --out " + (dir.path / (sub + "-b.ckpt")).string());
    REQUIRE_MESSAGE(a.code == 0, a.output);
    REQUIRE_MESSAGE(b.code == 0, b.output);
    CHECK_MESSAGE(slurp(dir.path / (sub + "-a.ckpt")) == slurp(dir.path / (sub + "-b.ckpt")), sub);
  }
}

TEST_CASE("errors carry kind and stage") {
  testing::TempDir dir("cli-err");
  write(dir.path / "empty.ini", "");
  const auto r = cli("infer --test-index 0 --config " + (dir.path / "empty.ini").string());
  CHECK(r.code == 2);
  CHECK(r.output.find("kind=config") != std::string::npos);
  CHECK(r.output.find("stage=wd") != std::string::npos);

  write(dir.path / "bad.ini", "[lps2]\nsample_step = 4\n");
  const auto bad = cli("config --config " + (dir.path / "bad.ini").string());
  CHECK(bad.code == 2);
  CHECK(bad.output.find("stage=lps2") != std::string::npos);

  const auto no_data = cli("train-wd --config " + (dir.path / "empty.ini").string());
  CHECK(no_data.code == 2);
  CHECK(no_data.output.find("stage=wd") != std::string::npos);

  CHECK(cli("no-such-command").code != 0);
  CHECK(cli("infer --tags floor=wood --config " + (dir.path / "empty.ini").string()).code != 0);
}

TEST_CASE("config subcommand") {
  const auto keys = cli("config --keys");
  REQUIRE(keys.code == 0);
  CHECK(keys.output.find("sw.cfg_scale\t7") != std::string::npos);
  const auto dump = cli("config");
  REQUIRE(dump.code == 0);
  CHECK(dump.output.find("[eval]") != std::string::npos);
}

TEST_CASE("eval --run scores a persisted run") {
  testing::TempDir dir("cli-eval");
  auto c = weargen::cfg::parse_config("");
  c.base_dir = dir.path;
  const auto s = weargen::synth::sample_scene(33, weargen::synth::SceneConfig{});
  const auto run = dir.path / "runs/gt";
  weargen::pipe::persist_run(testing::ground_truth_run(s, 32), testing::ground_truth_inputs(s), c,
                             {{"no_pose", false}, {"two_class", false}}, run);
  fs::remove(run / "metrics/metrics.json");
  const auto r = cli("eval --run " + run.string());
  REQUIRE_MESSAGE(r.code == 0, r.output);
  const json m = last_json(r.output);
  CHECK(m.at("id_consistency") == 0);
  for (const char* k : {"visible_pixels", "wearable_pixels", "foot_points"}) CHECK(m.contains(k));
  CHECK(m.at("leg_image").contains("coverage"));
  CHECK(m.at("leg_image").contains("precision"));
  CHECK(m.at("plausibility").at("pass") == true);
  CHECK(fs::exists(run / "metrics/metrics.json"));
}
