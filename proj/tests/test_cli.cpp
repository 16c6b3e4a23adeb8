// Copyright 2026 The aftunet Authors
// SPDX-License-Identifier: Apache-2.0

#include <filesystem>
#include <fstream>
#include <sstream>

#include "aftunet/errors.hpp"
#include "aftunet/synth.hpp"
#include "aftunet/volume.hpp"
#include "cli.hpp"
#include "dataset.hpp"
#include "doctest.h"
#include "run_config.hpp"

namespace fs = std::filesystem;
using namespace aft;
using namespace aft::cli;

namespace {

struct Result {
  int code = -1;
  std::string out, err;
};

Result run(std::vector<std::string> args, LogLevel level = LogLevel::kInfo) {
  std::ostringstream out, err;
  Result r;
  r.code = run_cli(args, out, err, level);
  r.out = out.str();
  r.err = err.str();
  return r;
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("aftunet_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

void write(const fs::path& p, const std::string& text) {
  std::ofstream os(p);
  os << text;
}

int count_lines(const std::string& text) {
  return static_cast<int>(std::count(text.begin(), text.end(), '\n'));
}

const char* kTinyConfig =
    "# small enough to train in a test\n"
    "channels=4,8\n"
    "classes=3\n"
    "layers=1\n"
    "heads=2\n"
    "n_a=2\n"
    "epochs=3\n"
    "phase1_epochs=1\n"
    "lr_phase1=1e-3   # trailing comment\n"
    "lr_phase2=1e-4\n";

}  // namespace

TEST_CASE("synth writes N pairs plus a manifest, deterministically") {
  const fs::path dir = scratch("synth");
  Result r = run({"synth", "--out", (dir / "a").string(), "--scans", "3", "--dims", "16x20x6",
                  "--classes", "3", "--seed", "9"});
  REQUIRE(r.code == 0);
  int aftv = 0, other = 0;
  for (const auto& e : fs::directory_iterator(dir / "a")) {
    (e.path().extension() == ".aftv" ? aftv : other) += 1;
  }
  CHECK(aftv == 6);
  CHECK(other == 1);

  const auto entries = parse_manifest(slurp(dir / "a" / kManifestName));
  REQUIRE(entries.size() == 3);
  for (const auto& e : entries) {
    CHECK(fs::exists(dir / "a" / e.image));
    CHECK(fs::exists(dir / "a" / e.labels));
    CHECK(e.height == 16);
    CHECK(e.width == 20);
    CHECK(e.depth == 6);
    const VolumeHeader h = read_volume_header(dir / "a" / e.image);
    CHECK(h.height == 16);
    CHECK(h.depth == 6);
  }
  // the files are the library's scans
  const Scan s1 = synth_scan(1, {16, 20, 6}, 3, 9);
  CHECK(read_volume(dir / "a" / entries[1].image).voxels == s1.image.voxels);

  SUBCASE("same seed, any worker count, identical bytes") {
    REQUIRE(run({"synth", "--out", (dir / "b").string(), "--scans", "3", "--dims", "16x20x6",
                 "--classes", "3", "--seed", "9", "--workers", "3"})
                .code == 0);
    for (const auto& e : fs::directory_iterator(dir / "a")) {
      CHECK(slurp(e.path()) == slurp(dir / "b" / e.path().filename()));
    }
  }
  SUBCASE("different seed, different data") {
    REQUIRE(run({"synth", "--out", (dir / "c").string(), "--scans", "3", "--dims", "16x20x6",
                 "--classes", "3", "--seed", "10"})
                .code == 0);
    CHECK(slurp(dir / "a" / entries[0].image) != slurp(dir / "c" / entries[0].image));
  }
}

TEST_CASE("config file parsing") {
  RunConfig c;
  apply_config_text(c, kTinyConfig, "tiny");
  CHECK(c.model.codec.channels == std::vector<int>{4, 8});
  CHECK(c.model_config().codec.blocks == 2);
  CHECK(c.train.lr_phase1 == 1e-3);
  CHECK_NOTHROW(c.validate());

  SUBCASE("format round-trips") {
    c.class_names = {"liver", "kidney"};
    c.window_lo = -125.5;
    RunConfig back;
    apply_config_text(back, format_config(c), "dump");
    CHECK(format_config(back) == format_config(c));
    for (const auto& k : config_keys()) CHECK(get_field(back, k) == get_field(c, k));
  }
  SUBCASE("errors name the field") {
    RunConfig d;
    CHECK_THROWS_WITH_AS(apply_config_text(d, "epochs=3\nwarmup=2\n", "f.cfg"),
                         "f.cfg:2: unknown config key 'warmup'", ConfigError);
    CHECK_THROWS_WITH_AS(set_field(d, "epochs", "3.5"), "epochs: expected an integer, got '3.5'",
                         ConfigError);
    CHECK_THROWS_WITH_AS(set_field(d, "elastic", "maybe"), "elastic: expected true or false, got 'maybe'",
                         ConfigError);
    CHECK_THROWS_AS(apply_config_text(d, "just words\n", "f.cfg"), ConfigError);
    CHECK_THROWS_AS(apply_override(d, "epochs"), ConfigError);
  }
  SUBCASE("validation names the constraint") {
    RunConfig d = c;
    d.model.heads = 3;
    CHECK_THROWS_AS(d.validate(), ConfigError);
    d = c;
    d.blocks = 3;
    CHECK_THROWS_WITH_AS(d.validate(), "channels must list one width per block (3), got 2", ConfigError);
    d = c;
    d.window_hi = d.window_lo;
    CHECK_THROWS_AS(d.validate(), ConfigError);
    d = c;
    d.class_names = {"only_one"};
    CHECK_THROWS_AS(d.validate(), ConfigError);
  }
}

TEST_CASE("precedence: flags over file over defaults") {
  const fs::path dir = scratch("precedence");
  REQUIRE(run({"synth", "--out", (dir / "data").string(), "--scans", "1", "--dims", "16x16x4",
               "--classes", "3", "--seed", "1"})
              .code == 0);
  write(dir / "run.cfg", std::string(kTinyConfig) + "seed=5\nweight_decay=0.5\n");
  auto resolved = [&](const fs::path& out) {
    RunConfig c;
    apply_config_file(c, out / "run.cfg");
    return c;
  };

  Result r = run({"train", "--config", (dir / "run.cfg").string(), "--data", (dir / "data").string(),
                  "--out", (dir / "file").string()},
                 LogLevel::kQuiet);
  REQUIRE(r.code == 0);
  CHECK(r.out.empty());
  RunConfig c = resolved(dir / "file");
  CHECK(c.train.seed == 5);                    // file over default
  CHECK(c.train.weight_decay == 0.5);          // file over default
  CHECK(c.train.beta2 == RunConfig{}.train.beta2);  // default
  CHECK(c.model.height == 16);                 // derived from data
  CHECK(count_lines(slurp(dir / "file" / "train.log")) == 3);

  r = run({"train", "--config", (dir / "run.cfg").string(), "--data", (dir / "data").string(),
           "--out", (dir / "set").string(), "--set", "seed=6", "--set", "epochs=2"});
  REQUIRE(r.code == 0);
  c = resolved(dir / "set");
  CHECK(c.train.seed == 6);
  CHECK(c.train.weight_decay == 0.5);
  CHECK(count_lines(slurp(dir / "set" / "train.log")) == 2);
  CHECK(r.out.find("epoch=1 lr=0.001 loss=") != std::string::npos);
  CHECK(r.out.find("epoch=2 lr=0.0001 loss=") != std::string::npos);

  r = run({"train", "--config", (dir / "run.cfg").string(), "--data", (dir / "data").string(),
           "--out", (dir / "flag").string(), "--set", "seed=6", "--seed", "7", "--set", "epochs=2",
           "--epochs", "1"});
  REQUIRE(r.code == 0);
  c = resolved(dir / "flag");
  CHECK(c.train.seed == 7);
  CHECK(c.train.epochs == 1);
  CHECK(count_lines(slurp(dir / "flag" / "train.log")) == 1);

  SUBCASE("train.log is append-only across a resume") {
    r = run({"train", "--config", (dir / "run.cfg").string(), "--data", (dir / "data").string(),
             "--out", (dir / "flag").string(), "--seed", "7", "--epochs", "3", "--resume",
             (dir / "flag" / "checkpoint.aftc").string()});
    REQUIRE(r.code == 0);
    const std::string log = slurp(dir / "flag" / "train.log");
    CHECK(count_lines(log) == 3);
    CHECK(log.find("\nepoch=3 lr=0.0001 loss=") != std::string::npos);
  }
}

TEST_CASE("predict writes labels on the input grid") {
  const fs::path dir = scratch("predict");
  REQUIRE(run({"synth", "--out", (dir / "data").string(), "--scans", "1", "--dims", "16x16x4",
               "--classes", "3", "--seed", "1"})
              .code == 0);
  write(dir / "run.cfg", kTinyConfig);
  REQUIRE(run({"train", "--config", (dir / "run.cfg").string(), "--data", (dir / "data").string(),
               "--out", (dir / "run").string(), "--epochs", "1"})
              .code == 0);
  const std::string ckpt = (dir / "run" / "checkpoint.aftc").string();

  SUBCASE("target spacing") {
    const auto in = dir / "data" / "scan_000_image.aftv";
    REQUIRE(run({"predict", "--checkpoint", ckpt, "--in", in.string(), "--out", (dir / "p.aftv").string()})
                .code == 0);
    const LabelVolume p = read_labels(dir / "p.aftv");
    const Volume v = read_volume(in);
    CHECK(p.height == v.height);
    CHECK(p.width == v.width);
    CHECK(p.depth == v.depth);
    CHECK(p.spacing == v.spacing);
  }
  SUBCASE("coarser slices and a smaller plane") {
    Volume v = synth_scan(0, {12, 10, 3}, 3, 4).image;
    v.spacing = {5.0f, 1.0f, 1.0f};
    write_volume(dir / "coarse.aftv", v);
    REQUIRE(run({"predict", "--checkpoint", ckpt, "--in", (dir / "coarse.aftv").string(), "--out",
                 (dir / "out" / "coarse_labels.aftv").string()})
                .code == 0);
    const LabelVolume p = read_labels(dir / "out" / "coarse_labels.aftv");
    CHECK(p.height == 12);
    CHECK(p.width == 10);
    CHECK(p.depth == 3);
    CHECK(p.spacing == v.spacing);
  }
}

TEST_CASE("eval on a checkpoint overfit to one scan") {
  const fs::path dir = scratch("eval");
  REQUIRE(run({"synth", "--out", (dir / "data").string(), "--scans", "1", "--dims", "32x32x16",
               "--classes", "3", "--seed", "2"})
              .code == 0);
  write(dir / "run.cfg",
        "channels=8,16,32\nclasses=3\nlayers=1\nheads=2\nn_a=2\n"
        "epochs=400\nphase1_epochs=320\nlr_phase1=1e-3\nlr_phase2=1e-4\n"
        "class_names=tube,blob\n");
  REQUIRE(run({"train", "--config", (dir / "run.cfg").string(), "--data", (dir / "data").string(),
               "--out", (dir / "run").string()},
              LogLevel::kQuiet)
              .code == 0);
  Result r = run({"eval", "--checkpoint", (dir / "run" / "checkpoint.aftc").string(), "--data",
                  (dir / "data").string(), "--metrics", (dir / "m" / "metrics.txt").string()});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("tube") != std::string::npos);
  CHECK(r.out.find("mean") != std::string::npos);
  const std::string metrics = slurp(dir / "m" / "metrics.txt");
  const auto at = metrics.find("dsc.mean=");
  REQUIRE(at != std::string::npos);
  const double mean = std::stod(metrics.substr(at + 9));
  MESSAGE("overfit mean DSC " << mean);
  CHECK(mean >= 0.90);
  CHECK(metrics.find("dsc.blob=") != std::string::npos);
  CHECK(metrics.find("scans=1\n") != std::string::npos);
}

TEST_CASE("bench prints the instrumented counts") {
  const fs::path dir = scratch("bench");
  Result r = run({"bench", "--grids", "16x16x8,4x4x1", "--out", (dir / "bench.txt").string()});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("2048") != std::string::npos);
  CHECK(r.out.find("264") != std::string::npos);
  const std::string kv = slurp(dir / "bench.txt");
  CHECK(kv.find("16x16x8.comparisons_per_query_full=2048\n") != std::string::npos);
  CHECK(kv.find("16x16x8.comparisons_per_query_factorized=264\n") != std::string::npos);
  CHECK(kv.find("4x4x1.comparisons_per_query_factorized=17\n") != std::string::npos);

  r = run({"bench", "--grids", "4x4x2", "--profile", "--set", "channels=8,16", "--set", "heads=2"});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("transformer") != std::string::npos);
}

TEST_CASE("failures exit nonzero with one machine-parseable line") {
  const fs::path dir = scratch("errors");
  auto check_failure = [](const Result& r, int code, const std::string& kind) {
    CHECK(r.code == code);
    CHECK(r.err.rfind("error: " + kind + ": ", 0) == 0);
    CHECK(count_lines(r.err) == 1);
  };

  check_failure(run({}), kExitUsage, "usage");
  check_failure(run({"launch"}), kExitUsage, "usage");
  check_failure(run({"bench"}), kExitUsage, "usage");
  check_failure(run({"bench", "--grids", "4x4x2", "--frobnicate"}), kExitUsage, "usage");
  check_failure(run({"bench", "--grids", "4x4"}), kExitUsage, "config");
  check_failure(run({"train", "--set", "warmup=3"}), kExitUsage, "config");
  check_failure(run({"train", "--config", (dir / "missing.cfg").string()}), kExitUsage, "config");
  check_failure(run({"synth", "--out", (dir / "s").string(), "--dims", "4x4"}), kExitUsage, "config");
  CHECK_THROWS_AS(parse_log_level("loud"), ConfigError);
  CHECK(parse_log_level("") == LogLevel::kInfo);
  CHECK(parse_log_level("debug") == LogLevel::kDebug);

  check_failure(run({"eval", "--checkpoint", (dir / "none.aftc").string(), "--data", dir.string()}),
                kExitData, "format");
  write(dir / "blocker", "a file where a directory should go");
  check_failure(run({"synth", "--out", (dir / "blocker" / "sub").string()}), kExitData, "io");

  REQUIRE(run({"synth", "--out", (dir / "data").string(), "--scans", "1", "--dims", "16x16x4",
               "--classes", "3", "--seed", "1"})
              .code == 0);
  const std::string data = (dir / "data").string();
  write(dir / "run.cfg", kTinyConfig);
  const std::string cfg = (dir / "run.cfg").string();

  check_failure(run({"train", "--config", cfg, "--data", data, "--set", "classes=2", "--out",
                     (dir / "r0").string()}),
                kExitData, "format");

  SUBCASE("corrupt manifest") {
    write(dir / "data" / kManifestName, "scan_000 image=scan_000_image.aftv dims=16x16x4\n");
    check_failure(run({"train", "--config", cfg, "--data", data}), kExitData, "format");
  }
  SUBCASE("manifest dims disagree with the file") {
    write(dir / "data" / kManifestName,
          "scan_000 image=scan_000_image.aftv labels=scan_000_labels.aftv dims=16x16x5\n");
    check_failure(run({"train", "--config", cfg, "--data", data}), kExitData, "format");
  }
  SUBCASE("resume into a different architecture") {
    REQUIRE(run({"train", "--config", cfg, "--data", data, "--out", (dir / "r1").string()}).code == 0);
    check_failure(run({"train", "--config", cfg, "--data", data, "--set", "layers=2", "--out",
                       (dir / "r2").string(), "--resume", (dir / "r1" / "checkpoint.aftc").string()}),
                  kExitData, "checkpoint");
  }
  SUBCASE("diverging training") {
    check_failure(run({"train", "--config", cfg, "--data", data, "--out", (dir / "r3").string(),
                       "--set", "lr_phase1=1e300", "--set", "weight_decay=1e300"}),
                  kExitNumeric, "numeric");
  }
}
