// Copyright 2026 The aftunet Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "aftunet/errors.hpp"
#include "aftunet/grad_check.hpp"
#include "aftunet/ops.hpp"
#include "aftunet/tensor_file.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace aft;
using aft::testing::random_tensor;
using aft::testing::weighted_sum;

namespace {

constexpr double kGradTol = 1e-4;

double channel_mean(std::span<const double> v, std::size_t begin, std::size_t len) {
  double s = 0.0;
  for (std::size_t i = 0; i < len; ++i) s += v[begin + i];
  return s / static_cast<double>(len);
}

double channel_var(std::span<const double> v, std::size_t begin, std::size_t len) {
  const double m = channel_mean(v, begin, len);
  double s = 0.0;
  for (std::size_t i = 0; i < len; ++i) s += (v[begin + i] - m) * (v[begin + i] - m);
  return s / static_cast<double>(len);
}

}  // namespace

TEST_CASE("tensor invariants") {
  Tensor t = Tensor::zeros({2, 3, 4});
  CHECK(t.numel() == 24);
  CHECK(t.dim(-1) == 4);
  CHECK_THROWS_AS(Tensor::from_data({2, 2}, {1.0, 2.0, 3.0}), ShapeError);
  CHECK_THROWS_AS(t.dim(3), ShapeError);
  Tensor g = Tensor::zeros({2, 2}, true);
  CHECK(g.grad().size() == 4);
}

TEST_CASE("fan-out accumulates gradients") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    Tensor x = random_tensor({3, 4}, rng);
    // f(x) = sum(x*x), g(x) = sum(relu(x)); d/dx (f+g) = 2x + [x>0]
    Tensor y = ops::add(ops::sum(ops::mul(x, x)), ops::sum(ops::relu(x)));
    y.backward();
    for (std::size_t i = 0; i < 12; ++i) {
      const double xv = x.data()[i];
      CHECK(x.grad()[i] == doctest::Approx(2.0 * xv + (xv > 0 ? 1.0 : 0.0)).epsilon(1e-12));
    }
  }
}

TEST_CASE("backward accumulates across calls") {
  Tensor x = Tensor::from_data({2}, {1.0, -2.0}, true);
  ops::sum(ops::scale(x, 3.0)).backward();
  ops::sum(ops::scale(x, 3.0)).backward();
  CHECK(x.grad()[0] == 6.0);
  x.zero_grad();
  CHECK(x.grad()[1] == 0.0);
}

TEST_CASE("no-grad guard records nothing") {
  Tensor x = Tensor::from_data({2}, {1.0, 2.0}, true);
  NoGradGuard guard;
  Tensor y = ops::sum(x);
  CHECK_FALSE(y.requires_grad());
}

TEST_CASE("conv2d") {
  SUBCASE("1x1 identity kernel returns the input") {
    std::mt19937_64 rng(1);
    Tensor x = random_tensor({3, 4, 5}, rng, -1, 1, false);
    std::vector<double> w(9, 0.0);
    for (int i = 0; i < 3; ++i) w[static_cast<std::size_t>(i * 3 + i)] = 1.0;
    Tensor y = ops::conv2d(x, Tensor::from_data({3, 3, 1, 1}, w), Tensor::zeros({3}), 0);
    REQUIRE(y.shape() == x.shape());
    for (std::size_t i = 0; i < 60; ++i) CHECK(y.data()[i] == x.data()[i]);
  }
  SUBCASE("3x3 ones kernel on a constant image") {
    const double c = 0.7;
    Tensor x = Tensor::full({1, 5, 6}, c);
    Tensor y = ops::conv2d(x, Tensor::full({1, 1, 3, 3}, 1.0), Tensor::zeros({1}), 1);
    REQUIRE(y.shape() == Shape{1, 5, 6});
    for (int h = 1; h < 4; ++h) {
      for (int w = 1; w < 5; ++w) CHECK(y.data()[static_cast<std::size_t>(h * 6 + w)] == doctest::Approx(9 * c));
    }
    CHECK(y.data()[0] == doctest::Approx(4 * c));  // corner sees a 2x2 window
    CHECK(y.data()[1] == doctest::Approx(6 * c));  // edge sees a 2x3 window
  }
  SUBCASE("output extent formula") {
    Tensor y = ops::conv2d(Tensor::zeros({2, 7, 9}), Tensor::zeros({4, 2, 3, 3}), Tensor(), 0);
    CHECK(y.shape() == Shape{4, 5, 7});
  }
  SUBCASE("channel mismatch") {
    CHECK_THROWS_AS(ops::conv2d(Tensor::zeros({2, 4, 4}), Tensor::zeros({3, 3, 3, 3}), Tensor(), 1),
                    ShapeError);
  }
  SUBCASE("gradients match central differences") {
    std::mt19937_64 rng(2);
    Tensor x = random_tensor({2, 2, 5, 5}, rng);
    Tensor w = random_tensor({3, 2, 3, 3}, rng);
    Tensor b = random_tensor({3}, rng);
    auto r = grad_check([&] { return weighted_sum(ops::conv2d(x, w, b, 1)); }, {x, w, b});
    CHECK(r.max_rel_error < kGradTol);
    auto r0 = grad_check([&] { return weighted_sum(ops::conv2d(x, w, b, 0)); }, {x, w, b});
    CHECK(r0.max_rel_error < kGradTol);
  }
}

TEST_CASE("maxpool2") {
  Tensor x = Tensor::from_data({1, 2, 2}, {1, 2, 3, 4}, true);
  Tensor y = ops::maxpool2(x);
  REQUIRE(y.shape() == Shape{1, 1, 1});
  CHECK(y.item() == 4.0);

  Tensor c = ops::maxpool2(Tensor::full({2, 4, 6}, 3.5));
  CHECK(c.shape() == Shape{2, 2, 3});
  for (double v : c.data()) CHECK(v == 3.5);

  CHECK_THROWS_AS(ops::maxpool2(Tensor::zeros({1, 3, 4})), ShapeError);

  SUBCASE("gradient of sum lands on each window argmax") {
    std::mt19937_64 rng(3);
    Tensor in = random_tensor({2, 4, 4}, rng);
    ops::sum(ops::maxpool2(in)).backward();
    auto v = in.data();
    for (int p = 0; p < 2; ++p) {
      for (int oy = 0; oy < 2; ++oy) {
        for (int ox = 0; ox < 2; ++ox) {
          int best = -1;
          for (int dy = 0; dy < 2; ++dy) {
            for (int dx = 0; dx < 2; ++dx) {
              int idx = p * 16 + (2 * oy + dy) * 4 + 2 * ox + dx;
              if (best < 0 || v[static_cast<std::size_t>(idx)] > v[static_cast<std::size_t>(best)]) best = idx;
            }
          }
          for (int dy = 0; dy < 2; ++dy) {
            for (int dx = 0; dx < 2; ++dx) {
              int idx = p * 16 + (2 * oy + dy) * 4 + 2 * ox + dx;
              CHECK(in.grad()[static_cast<std::size_t>(idx)] == (idx == best ? 1.0 : 0.0));
            }
          }
        }
      }
    }
    auto r = grad_check([&] { return weighted_sum(ops::maxpool2(in)); }, {in});
    CHECK(r.max_rel_error < kGradTol);
  }
  SUBCASE("ties route to the first cell in scan order") {
    Tensor t = Tensor::from_data({1, 2, 2}, {5, 5, 5, 5}, true);
    ops::sum(ops::maxpool2(t)).backward();
    CHECK(t.grad()[0] == 1.0);
    CHECK(t.grad()[1] == 0.0);
    CHECK(t.grad()[2] == 0.0);
    CHECK(t.grad()[3] == 0.0);
  }
}

TEST_CASE("upsample2") {
  Tensor y = ops::upsample2(Tensor::from_data({1, 1, 1}, {1.0}));
  CHECK(y.shape() == Shape{1, 2, 2});
  for (double v : y.data()) CHECK(v == 1.0);

  Tensor x = Tensor::zeros({3, 8, 6});
  CHECK(ops::upsample2(ops::maxpool2(x)).shape() == x.shape());

  std::mt19937_64 rng(4);
  Tensor in = random_tensor({2, 3, 3}, rng);
  auto r = grad_check([&] { return weighted_sum(ops::upsample2(in)); }, {in});
  CHECK(r.max_rel_error < kGradTol);
  in.zero_grad();
  ops::sum(ops::upsample2(in)).backward();
  for (double g : in.grad()) CHECK(g == 4.0);
}

TEST_CASE("instance_norm") {
  Tensor ones = Tensor::full({2}, 1.0);
  Tensor zeros = Tensor::zeros({2});
  SUBCASE("constant channel maps to zero") {
    Tensor y = ops::instance_norm(Tensor::full({2, 3, 3}, 4.2), ones, zeros);
    for (double v : y.data()) CHECK(v == doctest::Approx(0.0));
  }
  SUBCASE("gamma 0, beta 5") {
    std::mt19937_64 rng(5);
    Tensor y = ops::instance_norm(random_tensor({2, 3, 3}, rng), Tensor::zeros({2}),
                                  Tensor::full({2}, 5.0));
    for (double v : y.data()) CHECK(v == 5.0);
  }
  SUBCASE("per-channel statistics") {
    std::mt19937_64 rng(6);
    for (int trial = 0; trial < 10; ++trial) {
      Tensor x = random_tensor({3, 2, 5, 4}, rng, -3.0, 7.0);
      Tensor y = ops::instance_norm(x, Tensor::full({2}, 1.0), Tensor::zeros({2}));
      for (std::size_t g = 0; g < 6; ++g) {
        CHECK(std::abs(channel_mean(y.data(), g * 20, 20)) < 1e-5);
        CHECK(std::abs(channel_var(y.data(), g * 20, 20) - 1.0) < 1e-3);
      }
    }
  }
  SUBCASE("gradients") {
    std::mt19937_64 rng(7);
    Tensor x = random_tensor({2, 2, 4, 4}, rng);
    Tensor gamma = random_tensor({2}, rng, 0.5, 1.5);
    Tensor beta = random_tensor({2}, rng);
    auto r = grad_check([&] { return weighted_sum(ops::instance_norm(x, gamma, beta)); },
                        {x, gamma, beta});
    CHECK(r.max_rel_error < kGradTol);
  }
}

TEST_CASE("layer_norm") {
  Tensor ones = Tensor::full({4}, 1.0);
  Tensor zeros = Tensor::zeros({4});
  Tensor y = ops::layer_norm(Tensor::full({2, 4}, -1.5), ones, zeros);
  for (double v : y.data()) CHECK(v == doctest::Approx(0.0));

  // mean 0, var 1 already
  Tensor z = Tensor::from_data({4}, {1.0, -1.0, 1.0, -1.0});
  Tensor zn = ops::layer_norm(z, ones, zeros);
  for (std::size_t i = 0; i < 4; ++i) CHECK(zn.data()[i] == doctest::Approx(z.data()[i]).epsilon(1e-5));

  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 10; ++trial) {
    Tensor x = random_tensor({5, 3, 8}, rng, -4.0, 2.0);
    Tensor out = ops::layer_norm(x, Tensor::full({8}, 1.0), Tensor::zeros({8}));
    for (std::size_t r = 0; r < 15; ++r) {
      CHECK(std::abs(channel_mean(out.data(), r * 8, 8)) < 1e-5);
      CHECK(std::abs(channel_var(out.data(), r * 8, 8) - 1.0) < 1e-3);
    }
  }

  Tensor x = random_tensor({3, 2, 6}, rng);
  Tensor gamma = random_tensor({6}, rng, 0.5, 1.5);
  Tensor beta = random_tensor({6}, rng);
  auto r = grad_check([&] { return weighted_sum(ops::layer_norm(x, gamma, beta)); }, {x, gamma, beta});
  CHECK(r.max_rel_error < kGradTol);
}

TEST_CASE("linear") {
  std::mt19937_64 rng(9);
  Tensor x = random_tensor({2, 3, 4}, rng, -1, 1, false);
  std::vector<double> eye(16, 0.0);
  for (int i = 0; i < 4; ++i) eye[static_cast<std::size_t>(i * 5)] = 1.0;
  Tensor y = ops::linear(x, Tensor::from_data({4, 4}, eye), Tensor::zeros({4}));
  for (std::size_t i = 0; i < 24; ++i) CHECK(y.data()[i] == x.data()[i]);

  Tensor b = Tensor::from_data({3}, {1.0, -2.0, 0.5});
  Tensor c = ops::linear(x, Tensor::zeros({3, 4}), b);
  CHECK(c.shape() == Shape{2, 3, 3});
  for (std::size_t i = 0; i < 18; ++i) CHECK(c.data()[i] == b.data()[i % 3]);

  CHECK_THROWS_AS(ops::linear(x, Tensor::zeros({3, 5}), Tensor()), ShapeError);

  Tensor xi = random_tensor({5, 4}, rng);
  Tensor w = random_tensor({3, 4}, rng);
  Tensor bias = random_tensor({3}, rng);
  auto r = grad_check([&] { return weighted_sum(ops::linear(xi, w, bias)); }, {xi, w, bias});
  CHECK(r.max_rel_error < kGradTol);
}

TEST_CASE("softmax") {
  Tensor u = ops::softmax(Tensor::zeros({4}));
  for (double v : u.data()) CHECK(v == doctest::Approx(0.25));
  CHECK(ops::softmax(Tensor::from_data({1}, {-3.0})).item() == 1.0);

  std::mt19937_64 rng(10);
  for (int trial = 0; trial < 50; ++trial) {
    Tensor x = random_tensor({3, 7}, rng, -20.0, 20.0, false);
    Tensor y = ops::softmax(x);
    std::vector<double> shifted(x.data().begin(), x.data().end());
    for (auto& v : shifted) v += 123.25;
    Tensor ys = ops::softmax(Tensor::from_data({3, 7}, shifted));
    for (std::size_t r = 0; r < 3; ++r) {
      double s = 0.0;
      for (std::size_t i = 0; i < 7; ++i) {
        CHECK(y.data()[r * 7 + i] >= 0.0);
        s += y.data()[r * 7 + i];
      }
      CHECK(std::abs(s - 1.0) <= 1e-6);
    }
    for (std::size_t i = 0; i < 21; ++i) CHECK(std::abs(y.data()[i] - ys.data()[i]) < 1e-12);
  }
  // large logits stay finite
  Tensor big = ops::softmax(Tensor::from_data({2}, {1000.0, 0.0}));
  CHECK(big.data()[0] == doctest::Approx(1.0));

  Tensor x = random_tensor({2, 5}, rng);
  auto r = grad_check([&] { return weighted_sum(ops::softmax(x)); }, {x});
  CHECK(r.max_rel_error < kGradTol);
}

TEST_CASE("shape plumbing gradients") {
  std::mt19937_64 rng(12);
  Tensor a = random_tensor({2, 3, 4}, rng);
  Tensor b = random_tensor({2, 2, 4}, rng);
  Tensor p = ops::permute(a, {2, 0, 1});
  CHECK(p.shape() == Shape{4, 2, 3});
  // out[k][i][j] == a[i][j][k]
  CHECK(p.data()[(3 * 2 + 1) * 3 + 2] == a.data()[(1 * 3 + 2) * 4 + 3]);

  Tensor c = ops::concat({a, b}, 1);
  CHECK(c.shape() == Shape{2, 5, 4});
  CHECK(c.data()[(1 * 5 + 4) * 4 + 2] == b.data()[(1 * 2 + 1) * 4 + 2]);

  Tensor n = ops::narrow(a, 2, 1, 2);
  CHECK(n.shape() == Shape{2, 3, 2});
  CHECK(n.data()[0] == a.data()[1]);

  auto r = grad_check(
      [&] {
        return ops::add(weighted_sum(ops::permute(a, {1, 2, 0}), 1),
                        ops::add(weighted_sum(ops::concat({a, b}, 1), 2),
                                 weighted_sum(ops::reshape(ops::narrow(b, 0, 1, 1), {8}), 3)));
      },
      {a, b});
  CHECK(r.max_rel_error < kGradTol);
}

TEST_CASE("grad_check oracle") {
  std::mt19937_64 rng(13);
  SUBCASE("quadratic") {
    Tensor x = random_tensor({10}, rng);
    auto r = grad_check([&] { return ops::sum(ops::mul(x, x)); }, {x});
    CHECK(r.max_rel_error < 1e-7);
    CHECK(r.checked == 10);
  }
  SUBCASE("conv2d + instance_norm composite") {
    Tensor x = random_tensor({2, 5, 6}, rng);
    Tensor w = random_tensor({3, 2, 3, 3}, rng);
    Tensor b = random_tensor({3}, rng);
    Tensor gamma = random_tensor({3}, rng, 0.5, 1.5);
    Tensor beta = random_tensor({3}, rng);
    auto r = grad_check(
        [&] { return weighted_sum(ops::relu(ops::instance_norm(ops::conv2d(x, w, b, 1), gamma, beta))); },
        {{"x", x}, {"conv.weight", w}, {"conv.bias", b}, {"norm.gamma", gamma}, {"norm.beta", beta}});
    CHECK(r.max_rel_error < kGradTol);
  }
  SUBCASE("non-finite values are diagnosed") {
    Tensor x = Tensor::from_data({2}, {1.0, std::numeric_limits<double>::infinity()}, true);
    Tensor y = Tensor::from_data({2}, {1.0, 2.0}, true);
    CHECK_THROWS_AS(grad_check([&] { return ops::sum(ops::mul(x, y)); }, {{"w", y}, {"x", x}}),
                    NumericError);

    // finite at the base point, blows up under perturbation
    Tensor p = Tensor::from_data({1}, {1.0}, true);
    auto f = [&] {
      if (p.data()[0] > 1.0) return Tensor::scalar(std::numeric_limits<double>::infinity());
      return ops::sum(ops::mul(p, p));
    };
    try {
      grad_check(f, {{"bad.weight", p}});
      FAIL("expected NumericError");
    } catch (const NumericError& e) {
      CHECK(std::string(e.what()).find("bad.weight") != std::string::npos);
    }
  }
}

TEST_CASE("tensor file format") {
  std::vector<NamedTensor> entries{{"a.weight", {2, 3}, {1, 2, 3, 4, 5, 6}},
                                   {"b", {}, {0.5f}},
                                   {"c.bias", {4}, {-1.f, 1e-8f, 3.25f, 7.f}}};
  std::stringstream ss;
  write_tensor_file(ss, entries);
  const std::string bytes = ss.str();
  CHECK(bytes.substr(0, 4) == "AFTC");
  // version 1, 3 entries, little-endian
  CHECK(bytes[4] == 1);
  CHECK(bytes[8] == 3);
  // first entry: name length 8 then name
  CHECK(bytes[12] == 8);
  CHECK(bytes.substr(14, 8) == "a.weight");
  CHECK(bytes[22] == 2);  // rank

  std::stringstream in(bytes);
  auto back = read_tensor_file(in);
  REQUIRE(back.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(back[i].name == entries[i].name);
    CHECK(back[i].shape == entries[i].shape);
    CHECK(back[i].values == entries[i].values);
  }

  std::string bad = bytes;
  bad[0] = 'X';
  std::stringstream bad_in(bad);
  CHECK_THROWS_AS(read_tensor_file(bad_in), FormatError);

  std::stringstream trunc(bytes.substr(0, bytes.size() - 3));
  CHECK_THROWS_AS(read_tensor_file(trunc), FormatError);
}
