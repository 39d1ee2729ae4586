#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "savir/cli/app.hpp"
#include "savir/cli/settings.hpp"
#include "savir/error.hpp"

using namespace savir::cli;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code = 0;
  std::string out;
  std::string err;
};

Result invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "savir");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("savir_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::map<std::string, fs::file_time_type> snapshot(const fs::path& dir) {
  std::map<std::string, fs::file_time_type> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) files[e.path().string()] = e.last_write_time();
  return files;
}

const std::vector<std::string> kSmallData = {"--set", "data.image_size=64", "--set", "data.train=16",
                                             "--set", "data.val=8",         "--set", "data.test=8"};

const std::vector<std::string> kTinyModel = {"--set", "model.d_model=16", "--set", "model.heads=2",
                                             "--set", "model.backbone_channels=4,6,8,8"};

std::vector<std::string> cat(std::vector<std::string> a, const std::vector<std::string>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

}  // namespace

TEST_CASE("settings parse sections, comments and overrides") {
  Settings s;
  s.merge_text("seed = 9  # trailing comment\n\n[data]\nlayout = grid2x2\n; full-line comment\n[train]\nepochs=3\n", "t.ini");
  CHECK(s.get("seed") == "9");
  CHECK(s.get("data.layout") == "grid2x2");
  CHECK(s.get_int("train.epochs") == 3);
  s.set("train.learning_rate=0.002");
  CHECK(s.get_double("train.learning_rate") == 0.002);
  CHECK(s.get_int_list("model.backbone_channels") == std::vector<int>{32, 64, 96, 128});

  Settings echoed;
  echoed.merge_text(s.to_ini(), "echo");
  CHECK(echoed.to_ini() == s.to_ini());
}

TEST_CASE("settings reject unknown keys and bad values") {
  Settings s;
  CHECK_THROWS_WITH_AS(s.merge_text("[data]\ncolour = red\n", "x.ini"), doctest::Contains("data.colour"), savir::ConfigError);
  CHECK_THROWS_WITH_AS(s.merge_text("[data]\nlayout\n", "x.ini"), doctest::Contains("x.ini:2"), savir::ConfigError);
  CHECK_THROWS_AS(s.set("no_equals_sign"), savir::ConfigError);
  s.set("train.epochs", "many");
  CHECK_THROWS_WITH_AS(s.get_int("train.epochs"), doctest::Contains("train.epochs"), savir::ConfigError);
  s.set("data.layout", "hexagonal");
  CHECK_THROWS_WITH_AS(recipe_from(s), doctest::Contains("data.layout"), savir::ConfigError);
}

TEST_CASE("defaults map onto the run configuration") {
  const Settings s;
  const auto run = run_from(s);
  CHECK(run.learning_rate == 1e-4);
  CHECK(run.adam_beta1 == 0.9);
  CHECK(run.adam_beta2 == 0.999);
  CHECK(run.adam_epsilon == 1e-8);
  CHECK(run.batch_size == 32);
  CHECK(run.epochs == 30);
  CHECK(run.model.d_model == 64);
  CHECK(run.model.heads == 3);
  CHECK(run.model.depth == 1);
  CHECK(run.model.image_size == 96);
  CHECK(run.model.dropout == 0.5);
  const auto recipe = recipe_from(s);
  CHECK(recipe.counts.at("train") == 5000);
}

TEST_CASE("gen then validate agrees completely") {
  const auto dir = scratch("gen");
  auto r = invoke(cat({"gen", "--out", (dir / "data").string(), "--seed", "4", "--set", "data.layout=grid2x2"}, kSmallData));
  REQUIRE_MESSAGE(r.code == 0, r.err);
  CHECK(fs::exists(dir / "data" / "manifest.json"));
  CHECK(fs::exists(dir / "data" / "config.ini"));
  const auto before = snapshot(dir / "data");
  r = invoke({"validate", (dir / "data").string()});
  CHECK(r.code == 0);
  CHECK(r.out.find("agreement 100.00% ties 0") != std::string::npos);
  CHECK(snapshot(dir / "data") == before);
  fs::remove_all(dir);
}

TEST_CASE("gen is reproducible from the echoed config") {
  const auto dir = scratch("repro");
  REQUIRE(invoke(cat({"gen", "--out", (dir / "a").string(), "--seed", "11"}, kSmallData)).code == 0);
  REQUIRE(invoke({"gen", "--config", (dir / "a" / "config.ini").string(), "--out", (dir / "b").string()}).code == 0);
  for (const char* f : {"train.rpmd", "val.rpmd", "test.rpmd", "manifest.json", "config.ini"}) {
    std::ifstream a(dir / "a" / f, std::ios::binary), b(dir / "b" / f, std::ios::binary);
    const std::string sa((std::istreambuf_iterator<char>(a)), {}), sb((std::istreambuf_iterator<char>(b)), {});
    CHECK_MESSAGE(sa == sb, f);
  }
  fs::remove_all(dir);
}

TEST_CASE("train with zero epochs writes a checkpoint and a chance-level evaluation") {
  const auto dir = scratch("train0");
  REQUIRE(invoke(cat({"gen", "--out", (dir / "data").string()}, kSmallData)).code == 0);
  const auto before = snapshot(dir / "data");
  auto args = cat(cat({"train", "--out", (dir / "run").string(), "--set", "train.epochs=0", "--set",
                       "train.dataset=" + (dir / "data").string()},
                      kSmallData),
                  kTinyModel);
  const auto r = invoke(args);
  REQUIRE_MESSAGE(r.code == 0, r.err);
  CHECK(fs::exists(dir / "run" / "best.ckpt"));
  CHECK(fs::exists(dir / "run" / "best.ckpt.json"));
  CHECK(fs::exists(dir / "run" / "metrics.csv"));
  CHECK(fs::exists(dir / "run" / "eval" / "heatmap.csv"));
  CHECK(r.out.find("test accuracy") != std::string::npos);
  CHECK(snapshot(dir / "data") == before);

  const auto ev = invoke(cat({"analyze", "--out", (dir / "analysis").string(), "--set",
                              "eval.checkpoint=" + (dir / "run" / "best.ckpt").string(), "--set",
                              "eval.dataset=" + (dir / "data").string()},
                             {}));
  REQUIRE_MESSAGE(ev.code == 0, ev.err);
  for (const char* f : {"margins.csv", "margin_histogram.csv", "margin_cdf.csv", "heatmap.csv", "report.json", "config.ini"}) {
    CHECK_MESSAGE(fs::exists(dir / "analysis" / f), f);
  }
  fs::remove_all(dir);
}

TEST_CASE("failures exit nonzero with distinct diagnostics") {
  const auto dir = scratch("errors");
  auto r = invoke({"gen", "--out", (dir / "x").string(), "--set", "data.shape=round"});
  CHECK(r.code == kBadConfig);
  CHECK(r.err.find("data.shape") != std::string::npos);

  {
    std::ofstream(dir / "bad.ini") << "[model]\nwidth = 3\n";
  }
  r = invoke({"gen", "--config", (dir / "bad.ini").string(), "--out", (dir / "x").string()});
  CHECK(r.code == kBadConfig);
  CHECK(r.err.find("model.width") != std::string::npos);

  r = invoke({"gen", "--config", (dir / "missing.ini").string(), "--out", (dir / "x").string()});
  CHECK(r.code == kNotFound);

  r = invoke({"validate", (dir / "nowhere").string()});
  CHECK(r.code == kNotFound);

  r = invoke({"frobnicate"});
  CHECK(r.code == kUsage);

  REQUIRE(invoke(cat({"gen", "--out", (dir / "data").string()}, kSmallData)).code == 0);
  r = invoke(cat({"train", "--out", (dir / "run").string(), "--set", "train.epochs=0", "--set",
                  "train.dataset=" + (dir / "data").string(), "--set", "data.image_size=96"},
                 kTinyModel));
  CHECK(r.code == kBadConfig);
  CHECK(r.err.find("does not match") != std::string::npos);

  {
    std::ofstream(dir / "data" / "val.rpmd", std::ios::binary | std::ios::trunc) << "RPMX";
  }
  r = invoke({"validate", (dir / "data").string()});
  CHECK(r.code == kBadFormat);
  CHECK(r.err.find("byte offset") != std::string::npos);

  r = invoke({"ablate", "--out", (dir / "abl").string(), "--set", "ablate.name=everything"});
  CHECK(r.code == kBadConfig);
  fs::remove_all(dir);
}
