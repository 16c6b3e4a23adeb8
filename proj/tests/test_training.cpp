// Copyright 2026 The aftunet Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

#include "aftunet/errors.hpp"
#include "aftunet/grad_check.hpp"
#include "aftunet/inference.hpp"
#include "aftunet/losses.hpp"
#include "aftunet/slice_group.hpp"
#include "aftunet/training.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace aft;
namespace fs = std::filesystem;

namespace {

ModelConfig tiny_model(int neighbors = 2) {
  ModelConfig m;
  m.codec.blocks = 2;
  m.codec.channels = {4, 8};
  m.codec.classes = 3;
  m.layers = 1;
  m.heads = 2;
  m.neighbors = neighbors;
  m.height = 16;
  m.width = 16;
  return m;
}

TrainConfig tiny_train(int epochs = 10) {
  TrainConfig t;
  t.epochs = epochs;
  t.phase1_epochs = epochs;
  t.lr_phase1 = 1e-3;
  t.seed = 11;
  return t;
}

std::vector<Scan> tiny_scans(int n, std::uint64_t seed = 5) {
  return synth_dataset(n, {16, 16, 8}, 3, seed);
}

std::vector<double> flat_params(const AftUnet& m) {
  std::vector<double> out;
  for (const auto& p : m.parameters().params()) out.insert(out.end(), p.tensor.data().begin(), p.tensor.data().end());
  return out;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path temp_dir(const std::string& name) {
  fs::path dir = fs::temp_directory_path() / ("aftunet_test_training_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("learning-rate schedule") {
  TrainConfig t;
  CHECK(lr_at(0, t) == 1e-4);
  CHECK(lr_at(499, t) == 1e-4);
  CHECK(lr_at(500, t) == 1e-5);
  CHECK(lr_at(549, t) == 1e-5);
  CHECK_THROWS_AS(lr_at(550, t), ConfigError);
  CHECK_THROWS_AS(lr_at(-1, t), ConfigError);

  TrainConfig desk;
  desk.epochs = 100;
  desk.phase1_epochs = 80;
  CHECK(lr_at(79, desk) == desk.lr_phase1);
  CHECK(lr_at(80, desk) == desk.lr_phase2);
  int changes = 0;
  for (int e = 1; e < desk.epochs; ++e) changes += lr_at(e, desk) != lr_at(e - 1, desk);
  CHECK(changes == 1);

  desk.phase1_epochs = 101;
  CHECK_THROWS_AS(desk.validate(), ConfigError);
  desk.phase1_epochs = 80;
  desk.lr_phase2 = 0.0;
  CHECK_THROWS_AS(desk.validate(), ConfigError);
}

TEST_CASE("adam step") {
  std::mt19937_64 rng(1);
  ParameterStore store;
  Tensor a = store.add("a", {6});
  Tensor b = store.add("b", {6});
  for (std::size_t i = 0; i < 6; ++i) {
    a.mutable_data()[i] = b.mutable_data()[i] = static_cast<float>(0.1 * (static_cast<double>(i) - 2.5));
  }
  TrainConfig cfg;
  cfg.weight_decay = 0.0;

  SUBCASE("zero gradient leaves parameters unchanged") {
    AdamState s;
    const std::vector<double> before(a.data().begin(), a.data().end());
    adam_step(store, s, 1e-2, cfg);
    CHECK(std::vector<double>(a.data().begin(), a.data().end()) == before);
    CHECK(s.step == 1);
  }
  SUBCASE("first step moves by lr * g / (|g| + eps)") {
    AdamState s;
    const std::vector<double> g{0.5, -2.0, 1e-3, 3.0, -0.25, 0.0};
    const std::vector<double> before(a.data().begin(), a.data().end());
    for (std::size_t i = 0; i < 6; ++i) a.mutable_grad()[i] = g[i];
    const double lr = 1e-2;
    adam_step(store, s, lr, cfg);
    for (std::size_t i = 0; i < 6; ++i) {
      const double want = before[i] - lr * g[i] / (std::abs(g[i]) + cfg.eps);
      CHECK(a.data()[i] == doctest::Approx(want).epsilon(1e-6));
      CHECK(a.data()[i] == static_cast<double>(static_cast<float>(a.data()[i])));
    }
  }
  SUBCASE("identical parameters with identical gradients stay identical") {
    AdamState s;
    for (int step = 0; step < 5; ++step) {
      for (std::size_t i = 0; i < 6; ++i) a.mutable_grad()[i] = b.mutable_grad()[i] = std::sin(step + i);
      adam_step(store, s, 1e-2, cfg);
    }
    CHECK(std::vector<double>(a.data().begin(), a.data().end()) ==
          std::vector<double>(b.data().begin(), b.data().end()));
  }
  SUBCASE("weight decay is coupled into the gradient") {
    AdamState s;
    cfg.weight_decay = 0.1;
    const std::vector<double> before(a.data().begin(), a.data().end());
    adam_step(store, s, 1e-3, cfg);
    // g = wd * theta, so the first step is lr * sign(theta)
    for (std::size_t i = 0; i < 6; ++i) {
      CHECK(a.data()[i] == doctest::Approx(before[i] - 1e-3 * (before[i] > 0 ? 1 : -1)).epsilon(1e-5));
    }
  }
  SUBCASE("non-finite gradient names the parameter and changes nothing") {
    AdamState s;
    const std::vector<double> before(a.data().begin(), a.data().end());
    a.mutable_grad()[0] = 1.0;
    b.mutable_grad()[3] = std::numeric_limits<double>::quiet_NaN();
    try {
      adam_step(store, s, 1e-2, cfg);
      FAIL("expected NumericError");
    } catch (const NumericError& e) {
      CHECK(std::string(e.what()).find("parameter b") != std::string::npos);
    }
    CHECK(std::vector<double>(a.data().begin(), a.data().end()) == before);
    CHECK(s.step == 0);
  }
}

TEST_CASE("model construction and forward") {
  AftUnet m(tiny_model());
  m.init(3);
  for (const auto& p : m.parameters().params()) {
    for (double x : p.tensor.data()) REQUIRE(x == static_cast<double>(static_cast<float>(x)));
  }
  AftUnet same(tiny_model());
  same.init(3);
  CHECK(flat_params(m) == flat_params(same));
  auto by_module = m.parameters().count_by_prefix(1);
  CHECK(by_module.size() == 3);
  CHECK(by_module["encoder"] + by_module["transformer"] + by_module["decoder"] == m.parameters().count());

  std::mt19937_64 rng(4);
  Tensor x = testing::random_tensor({2, 1, 16, 16}, rng, 0, 1, false);
  CHECK(m.forward(x).shape() == Shape{2, 3, 16, 16});
  CHECK_THROWS_AS(m.forward(testing::random_tensor({3, 1, 16, 16}, rng, 0, 1, false)), ShapeError);

  ModelConfig bad = tiny_model();
  bad.heads = 3;
  CHECK_THROWS_AS(AftUnet{bad}, ConfigError);
  bad = tiny_model();
  bad.height = 17;
  CHECK_THROWS_AS(AftUnet{bad}, ConfigError);
  bad = tiny_model(3);
  CHECK_THROWS_AS(AftUnet{bad}, ConfigError);
}

TEST_CASE("composed model gradient check") {
  ModelConfig mc = tiny_model();
  mc.layers = 2;
  mc.heads = 2;
  AftUnet m(mc);
  m.init(5);
  std::mt19937_64 rng(6);
  Tensor x = testing::random_tensor({2, 1, 16, 16}, rng, 0, 1, false);
  std::vector<std::uint8_t> y(2 * 16 * 16);
  for (auto& v : y) v = static_cast<std::uint8_t>(rng() % 3);
  // Step 1e-6: ReLU and max-pool switch points lie within 1e-5 of some
  // weights here, which would bias the central difference.
  auto r = grad_check([&] { return combined_loss(m.forward(x), y); }, m.parameters().params(), 1e-6);
  CAPTURE(r.worst_param);
  CHECK(r.max_rel_error < 1e-4);
}

TEST_CASE("train_epoch") {
  const auto scans = tiny_scans(5);
  SUBCASE("one optimizer step per scan") {
    AftUnet m(tiny_model());
    m.init(1);
    Trainer t(m, tiny_train(3));
    t.train_epoch(scans);
    CHECK(t.steps() == 5);
    t.train_epoch(scans);
    CHECK(t.steps() == 10);
    CHECK(t.epoch() == 2);
  }
  SUBCASE("same seed gives the same trajectory") {
    AftUnet a(tiny_model()), b(tiny_model());
    a.init(1);
    b.init(1);
    Trainer ta(a, tiny_train(3)), tb(b, tiny_train(3));
    for (int e = 0; e < 3; ++e) CHECK(ta.train_epoch(scans) == tb.train_epoch(scans));
    CHECK(flat_params(a) == flat_params(b));

    AftUnet c(tiny_model());
    c.init(1);
    TrainConfig other = tiny_train(3);
    other.seed = 12;
    Trainer tc(c, other);
    tc.train_epoch(scans);
    CHECK(flat_params(c) != flat_params(a));
  }
  SUBCASE("elastic augmentation is deterministic too") {
    TrainConfig cfg = tiny_train(2);
    cfg.elastic = true;
    AftUnet a(tiny_model()), b(tiny_model());
    a.init(1);
    b.init(1);
    Trainer ta(a, cfg), tb(b, cfg);
    CHECK(ta.train_epoch(scans) == tb.train_epoch(scans));
  }
  SUBCASE("errors") {
    AftUnet m(tiny_model());
    m.init(1);
    Trainer t(m, tiny_train(1));
    CHECK_THROWS_AS(t.train_epoch({}), ShapeError);
    CHECK_THROWS_AS(t.train_epoch(synth_dataset(1, {8, 8, 4}, 3, 0)), ShapeError);
    t.train_epoch(scans);
    CHECK_THROWS_AS(t.train_epoch(scans), ConfigError);  // past the schedule
  }
}

TEST_CASE("overfitting a single scan") {
  const auto scans = tiny_scans(1, 9);
  AftUnet m(tiny_model());
  m.init(2);

  SUBCASE("loss over 50 epochs") {
    Trainer t(m, tiny_train(50));
    const double start = probe_loss(m, scans);
    for (int e = 0; e < 50; ++e) t.train_epoch(scans);
    CHECK(probe_loss(m, scans) < 0.9 * start);
  }
  SUBCASE("loss on one fixed group decreases for 50 steps") {
    const SliceGroup g = sample_slice_group(scans[0].image, scans[0].labels, 4, 2, 1);
    TrainConfig cfg = tiny_train(1);
    AdamState s;
    double prev = std::numeric_limits<double>::infinity();
    for (int step = 0; step < 50; ++step) {
      m.parameters().zero_grad();
      Tensor loss = combined_loss(m.forward(g.slices), g.labels);
      CHECK(loss.item() < prev);
      prev = loss.item();
      loss.backward();
      adam_step(m.parameters(), s, 2e-4, cfg);
    }
  }
}

TEST_CASE("checkpoints") {
  const fs::path dir = temp_dir("ckpt");
  const auto scans = tiny_scans(3);

  SUBCASE("save, load, save is byte-identical") {
    AftUnet m(tiny_model());
    m.init(1);
    Trainer t(m, tiny_train(4));
    t.train_epoch(scans);
    save_checkpoint(dir / "a.aftc", m, &t);

    AftUnet m2(tiny_model());
    m2.init(99);
    Trainer t2(m2, tiny_train(4));
    load_checkpoint(dir / "a.aftc", m2, &t2);
    CHECK(flat_params(m2) == flat_params(m));
    CHECK(t2.epoch() == 1);
    CHECK(t2.steps() == 3);
    CHECK(t2.optimizer().m == t.optimizer().m);
    CHECK(t2.optimizer().v == t.optimizer().v);
    save_checkpoint(dir / "b.aftc", m2, &t2);
    CHECK(slurp(dir / "a.aftc") == slurp(dir / "b.aftc"));
  }
  SUBCASE("resumed training matches uninterrupted training") {
    AftUnet full(tiny_model());
    full.init(1);
    Trainer tf(full, tiny_train(3));
    std::vector<double> losses;
    for (int e = 0; e < 3; ++e) losses.push_back(tf.train_epoch(scans));

    AftUnet first(tiny_model());
    first.init(1);
    Trainer t1(first, tiny_train(3));
    CHECK(t1.train_epoch(scans) == losses[0]);
    save_checkpoint(dir / "mid.aftc", first, &t1);

    AftUnet resumed(tiny_model());
    Trainer t2(resumed, tiny_train(3));
    load_checkpoint(dir / "mid.aftc", resumed, &t2);
    CHECK(t2.train_epoch(scans) == losses[1]);
    CHECK(t2.train_epoch(scans) == losses[2]);
    CHECK(flat_params(resumed) == flat_params(full));
  }
  SUBCASE("config mismatch is reported") {
    AftUnet m(tiny_model());
    m.init(1);
    save_checkpoint(dir / "m.aftc", m);
    ModelConfig other = tiny_model();
    other.layers = 2;
    AftUnet m2(other);
    try {
      load_checkpoint(dir / "m.aftc", m2);
      FAIL("expected ConfigMismatchError");
    } catch (const ConfigMismatchError& e) {
      CHECK(std::string(e.what()).find("layers") != std::string::npos);
    }
    other = tiny_model();
    other.codec.channels = {4, 16};
    AftUnet m3(other);
    CHECK_THROWS_AS(load_checkpoint(dir / "m.aftc", m3), ConfigMismatchError);

    // a model-only checkpoint cannot resume a trainer
    AftUnet m4(tiny_model());
    Trainer t4(m4, tiny_train(2));
    CHECK_THROWS_AS(load_checkpoint(dir / "m.aftc", m4, &t4), FormatError);
  }
  SUBCASE("stored config round-trips") {
    ModelConfig mc = tiny_model(4);
    mc.shared_merge_fc = true;
    mc.frequency = 3;
    const ModelConfig back = decode_model_config(encode_model_config(mc));
    CHECK(encode_model_config(back) == encode_model_config(mc));
    AftUnet m(mc);
    m.init(1);
    save_checkpoint(dir / "c.aftc", m);
    CHECK(encode_model_config(read_checkpoint_config(dir / "c.aftc")) == encode_model_config(mc));
    CHECK_THROWS_AS(decode_model_config({1.0f, 2.0f}), FormatError);
  }
  fs::remove_all(dir);
}

TEST_CASE("prediction through the full model") {
  AftUnet m(tiny_model(4));
  m.init(1);
  auto scans = synth_dataset(1, {12, 16, 5}, 3, 3);
  std::vector<SegmentationGroup> groups;
  LabelVolume pred = predict_volume(m, scans[0].image, &groups);
  CHECK(pred.depth == 5);
  CHECK(pred.height == 12);
  CHECK(pred.width == 16);
  REQUIRE(groups.size() == 5);
  for (int d = 0; d < 5; ++d) {
    const auto mid = argmax_slice(groups[static_cast<std::size_t>(d)].logits, 2);
    for (int y = 0; y < 12; ++y) {
      for (int x = 0; x < 16; ++x) CHECK(pred.at(y, x, d) == mid[static_cast<std::size_t>(y * 16 + x)]);
    }
  }
  CHECK_THROWS_AS(predict_volume(m, synth_dataset(1, {32, 16, 3}, 3, 0)[0].image), ShapeError);
  const Scan fitted = fit_to_model(scans[0], m.config());
  CHECK(fitted.image.height == 16);
  CHECK(fitted.labels.height == 16);
}
