/*
 * Copyright 2026 The mdunet Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <doctest.h>

#include <cmath>
#include <random>

#include "gradcheck/gradcheck.hpp"
#include "tensor/graph.hpp"
#include "tensor/parameter_store.hpp"

using namespace mdu;

namespace {

Tensor<double> random_tensor(Shape s, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Tensor<double> t(std::move(s));
  for (auto& v : t.data()) v = n(rng);
  return t;
}

// Direct summation with zero padding, stride 1.
Tensor<double> naive_conv(const Tensor<double>& x, const Tensor<double>& k,
                          const Tensor<double>* bias, std::size_t dh, std::size_t dw) {
  const std::size_t B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const std::size_t O = k.dim(0), KH = k.dim(2), KW = k.dim(3);
  const long ph = long((KH - 1) * dh / 2), pw = long((KW - 1) * dw / 2);
  Tensor<double> out(Shape{B, O, H, W});
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t o = 0; o < O; ++o)
      for (std::size_t y = 0; y < H; ++y)
        for (std::size_t xx = 0; xx < W; ++xx) {
          double s = bias ? (*bias)[o] : 0.0;
          for (std::size_t c = 0; c < C; ++c)
            for (std::size_t i = 0; i < KH; ++i)
              for (std::size_t j = 0; j < KW; ++j) {
                const long yy = long(y) + long(i * dh) - ph;
                const long xw = long(xx) + long(j * dw) - pw;
                if (yy < 0 || xw < 0 || yy >= long(H) || xw >= long(W)) continue;
                s += x.at(b, c, std::size_t(yy), std::size_t(xw)) * k.at(o, c, i, j);
              }
          out.at(b, o, y, xx) = s;
        }
  return out;
}

// Bounding box side lengths of the nonzero entries of a 1×1×H×W tensor.
std::pair<std::size_t, std::size_t> support(const Tensor<double>& t) {
  std::size_t y0 = t.dim(2), y1 = 0, x0 = t.dim(3), x1 = 0;
  bool any = false;
  for (std::size_t y = 0; y < t.dim(2); ++y)
    for (std::size_t x = 0; x < t.dim(3); ++x)
      if (t.at(0, 0, y, x) != 0.0) {
        any = true;
        y0 = std::min(y0, y), y1 = std::max(y1, y);
        x0 = std::min(x0, x), x1 = std::max(x1, x);
      }
  if (!any) return {0, 0};
  return {y1 - y0 + 1, x1 - x0 + 1};
}

}  // namespace

TEST_CASE("tensor rejects zero extents and length mismatches") {
  CHECK_THROWS_AS(Tensor<float>(Shape{2, 0, 3}), ShapeError);
  CHECK_THROWS_AS(Tensor<float>(Shape{2, 3}, std::vector<float>(5)), ShapeError);
  Tensor<float> t(Shape{2, 3}, 1.5f);
  CHECK(t.size() == 6);
  CHECK(shape_string(t.shape()) == "2×3");
}

TEST_CASE("conv2d 1x1 identity kernel returns its input") {
  Graph<double> g;
  const Var x = g.constant(Tensor<double>(Shape{1, 1, 3, 3}, 1.0));
  const Var k = g.constant(Tensor<double>(Shape{1, 1, 1, 1}, 1.0));
  const Var b = g.constant(Tensor<double>(Shape{1}, 0.0));
  const auto& out = g.value(g.conv2d(x, k, b));
  for (double v : out.data()) CHECK(v == 1.0);
}

TEST_CASE("conv2d matches direct summation for dilated and asymmetric kernels") {
  std::mt19937_64 rng(11);
  struct Case {
    std::size_t kh, kw, dh, dw;
  };
  for (const Case c : {Case{1, 1, 1, 1}, Case{3, 3, 1, 1}, Case{5, 5, 1, 1}, Case{3, 3, 2, 2},
                       Case{3, 3, 4, 4}, Case{1, 3, 1, 1}, Case{3, 1, 1, 1}, Case{1, 5, 1, 2},
                       Case{5, 1, 4, 1}}) {
    for (int rep = 0; rep < 3; ++rep) {
      const Tensor<double> x = random_tensor(Shape{2, 3, 7, 9}, rng);
      const Tensor<double> k = random_tensor(Shape{4, 3, c.kh, c.kw}, rng);
      const Tensor<double> b = random_tensor(Shape{4}, rng);
      Graph<double> g;
      const auto& got = g.value(g.conv2d(g.constant(x), g.constant(k), g.constant(b),
                                         Dilation{c.dh, c.dw}));
      const Tensor<double> want = naive_conv(x, k, &b, c.dh, c.dw);
      REQUIRE(got.shape() == want.shape());
      for (std::size_t i = 0; i < got.size(); ++i) CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-12));
    }
  }
}

TEST_CASE("dilated impulse response support is (k-1)d+1 per axis") {
  for (std::size_t d : {1u, 2u, 4u}) {
    Tensor<double> x(Shape{1, 1, 9, 9}, 0.0);
    x.at(0, 0, 4, 4) = 1.0;
    if (d == 4) x = [] {
      Tensor<double> t(Shape{1, 1, 33, 33}, 0.0);
      t.at(0, 0, 16, 16) = 1.0;
      return t;
    }();
    Tensor<double> k(Shape{1, 1, 3, 3}, 0.0);
    for (std::size_t i = 0; i < 9; ++i) k[i] = 1.0 + double(i);
    Graph<double> g;
    const auto& out = g.value(g.conv2d(g.constant(x), g.constant(k), std::nullopt, {d, d}));
    // oracle from direct summation
    const auto want = support(naive_conv(x, k, nullptr, d, d));
    CHECK(support(out) == want);
    CHECK(want.first == 2 * d + 1);
    CHECK(want.second == 2 * d + 1);
  }
}

TEST_CASE("conv2d diagnostics") {
  Graph<float> g;
  const Var x = g.constant(Tensor<float>(Shape{1, 3, 4, 4}));
  CHECK_THROWS_AS(g.conv2d(x, g.constant(Tensor<float>(Shape{2, 2, 3, 3})), std::nullopt),
                  ShapeError);
  CHECK_THROWS_AS(g.conv2d(x, g.constant(Tensor<float>(Shape{2, 3, 2, 2})), std::nullopt),
                  ShapeError);
  CHECK_NOTHROW(g.conv2d(x, g.constant(Tensor<float>(Shape{2, 3, 1, 3})), std::nullopt));
  try {
    g.conv2d(x, g.constant(Tensor<float>(Shape{2, 2, 3, 3})), std::nullopt);
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("1×3×4×4") != std::string::npos);
    CHECK(msg.find("2×2×3×3") != std::string::npos);
  }
}

TEST_CASE("maxpool picks window maxima and routes ties to the first element") {
  Graph<double> g;
  const Var x = g.variable(Tensor<double>(Shape{1, 1, 2, 2}, std::vector<double>{1, 2, 3, 4}));
  const Var y = g.maxpool2d(x);
  CHECK(g.value(y).shape() == Shape{1, 1, 1, 1});
  CHECK(g.value(y)[0] == 4.0);

  Graph<double> h;
  const Var c = h.variable(Tensor<double>(Shape{1, 2, 4, 4}, 3.0));
  const Var p = h.maxpool2d(c);
  for (double v : h.value(p).data()) CHECK(v == 3.0);
  h.backward(h.sum(p));
  const Tensor<double> grad = h.grad(c);
  for (std::size_t ch = 0; ch < 2; ++ch)
    for (std::size_t wy = 0; wy < 2; ++wy)
      for (std::size_t wx = 0; wx < 2; ++wx) {
        CHECK(grad.at(0, ch, 2 * wy, 2 * wx) == 1.0);
        CHECK(grad.at(0, ch, 2 * wy, 2 * wx + 1) == 0.0);
        CHECK(grad.at(0, ch, 2 * wy + 1, 2 * wx) == 0.0);
        CHECK(grad.at(0, ch, 2 * wy + 1, 2 * wx + 1) == 0.0);
      }

  CHECK_THROWS_AS(h.maxpool2d(h.constant(Tensor<double>(Shape{1, 1, 3, 4}))), ShapeError);
}

TEST_CASE("pool and upsample shape algebra over random shapes") {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<std::size_t> e(1, 6);
  for (int i = 0; i < 50; ++i) {
    const Shape s{e(rng), e(rng), 2 * e(rng), 2 * e(rng)};
    Graph<float> g;
    const Var x = g.constant(Tensor<float>(s));
    CHECK(g.value(g.maxpool2d(x)).shape() == Shape{s[0], s[1], s[2] / 2, s[3] / 2});
    CHECK(g.value(g.avgpool2d(x)).shape() == Shape{s[0], s[1], s[2] / 2, s[3] / 2});
    CHECK(g.value(g.upsample2x(x)).shape() == Shape{s[0], s[1], s[2] * 2, s[3] * 2});
  }
  Graph<float> g;
  CHECK(g.value(g.maxpool2d(g.constant(Tensor<float>(Shape{1, 32, 256, 256})))).shape() ==
        Shape{1, 32, 128, 128});
}

TEST_CASE("upsample replicates and its backward is the adjoint") {
  Graph<double> g;
  const auto& up = g.value(g.upsample2x(g.constant(Tensor<double>(Shape{1, 1, 1, 1}, 7.0))));
  CHECK(up.shape() == Shape{1, 1, 2, 2});
  for (double v : up.data()) CHECK(v == 7.0);

  std::mt19937_64 rng(5);
  for (int rep = 0; rep < 10; ++rep) {
    const Tensor<double> x = random_tensor(Shape{1, 2, 4, 4}, rng);
    const Tensor<double> y = random_tensor(Shape{1, 2, 8, 8}, rng);
    Graph<double> h;
    const Var xv = h.variable(x);
    const Var u = h.upsample2x(xv);
    double lhs = 0;
    for (std::size_t i = 0; i < y.size(); ++i) lhs += h.value(u)[i] * y[i];
    h.backward(h.weighted_sum(u, y));
    // adjoint of nearest replication: 2×2 block sums
    double rhs = 0;
    for (std::size_t c = 0; c < 2; ++c)
      for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 4; ++j) {
          const double block = y.at(0, c, 2 * i, 2 * j) + y.at(0, c, 2 * i + 1, 2 * j) +
                               y.at(0, c, 2 * i, 2 * j + 1) + y.at(0, c, 2 * i + 1, 2 * j + 1);
          CHECK(h.grad(xv).at(0, c, i, j) == doctest::Approx(block).epsilon(1e-14));
          rhs += x.at(0, c, i, j) * block;
        }
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
  }
}

TEST_CASE("concat keeps order and slice undoes it") {
  std::mt19937_64 rng(9);
  const Tensor<double> a = random_tensor(Shape{1, 2, 4, 4}, rng);
  const Tensor<double> b = random_tensor(Shape{1, 3, 4, 4}, rng);
  const Tensor<double> c = random_tensor(Shape{1, 1, 4, 4}, rng);
  Graph<double> g;
  const Var av = g.constant(a), bv = g.constant(b), cv = g.constant(c);
  const std::vector<Var> ab{av, bv};
  const Var cat = g.concat(ab);
  CHECK(g.value(cat).shape() == Shape{1, 5, 4, 4});
  CHECK(g.value(g.slice_channels(cat, 0, 2)).data()[5] == a[5]);
  const auto& back_a = g.value(g.slice_channels(cat, 0, 2));
  const auto& back_b = g.value(g.slice_channels(cat, 2, 3));
  CHECK(std::equal(back_a.data().begin(), back_a.data().end(), a.data().begin()));
  CHECK(std::equal(back_b.data().begin(), back_b.data().end(), b.data().begin()));

  // associativity in content
  const std::vector<Var> bc{bv, cv};
  const std::vector<Var> left{cat, cv};
  const std::vector<Var> right{av, g.concat(bc)};
  const std::vector<Var> flat{av, bv, cv};
  const auto& l = g.value(g.concat(left));
  const auto& r = g.value(g.concat(right));
  const auto& f = g.value(g.concat(flat));
  CHECK(std::equal(l.data().begin(), l.data().end(), f.data().begin()));
  CHECK(std::equal(r.data().begin(), r.data().end(), f.data().begin()));

  const std::vector<Var> bad{av, g.constant(Tensor<double>(Shape{1, 1, 4, 2}))};
  try {
    g.concat(bad);
    FAIL("concat accepted a spatial mismatch");
  } catch (const ShapeError& e) {
    CHECK(std::string(e.what()).find("input 1") != std::string::npos);
  }
  const std::vector<Var> bad_add{av, g.constant(Tensor<double>(Shape{1, 3, 4, 4}))};
  CHECK_THROWS_AS(g.add(bad_add), ShapeError);
}

TEST_CASE("softmax over channels is a per-pixel simplex") {
  Graph<double> g;
  const auto& half = g.value(g.softmax_channels(g.constant(Tensor<double>(Shape{1, 2, 3, 3}))));
  for (double v : half.data()) CHECK(v == 0.5);

  std::mt19937_64 rng(21);
  for (int rep = 0; rep < 20; ++rep) {
    Tensor<double> x = random_tensor(Shape{2, 3, 4, 5}, rng);
    for (auto& v : x.data()) v *= 30.0;
    Graph<double> h;
    const auto& p = h.value(h.softmax_channels(h.constant(x)));
    for (std::size_t b = 0; b < 2; ++b)
      for (std::size_t px = 0; px < 20; ++px) {
        double s = 0;
        for (std::size_t c = 0; c < 3; ++c) {
          const double v = p[(b * 3 + c) * 20 + px];
          CHECK(v >= 0.0);
          s += v;
        }
        CHECK(std::abs(s - 1.0) <= 1e-6);
      }
  }
}

TEST_CASE("batchnorm uses batch statistics in training and running statistics otherwise") {
  std::mt19937_64 rng(4);
  Tensor<double> x = random_tensor(Shape{4, 2, 3, 3}, rng);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = 3.0 * x[i] + 5.0;
  BatchNormStats<double> stats(2);
  Graph<double> g;
  const Var gamma = g.constant(Tensor<double>(Shape{2}, 1.0));
  const Var beta = g.constant(Tensor<double>(Shape{2}, 0.0));
  const auto& y = g.value(g.batchnorm2d(g.constant(x), gamma, beta, stats, true));
  for (std::size_t c = 0; c < 2; ++c) {
    double m = 0, v = 0, xm = 0, xv = 0;
    for (std::size_t b = 0; b < 4; ++b)
      for (std::size_t p = 0; p < 9; ++p) {
        m += y[(b * 2 + c) * 9 + p];
        xm += x[(b * 2 + c) * 9 + p];
      }
    m /= 36, xm /= 36;
    for (std::size_t b = 0; b < 4; ++b)
      for (std::size_t p = 0; p < 9; ++p) {
        v += std::pow(y[(b * 2 + c) * 9 + p] - m, 2);
        xv += std::pow(x[(b * 2 + c) * 9 + p] - xm, 2);
      }
    CHECK(std::abs(m) < 1e-12);
    CHECK(v / 36 == doctest::Approx(1.0).epsilon(1e-3));
    CHECK(stats.running_mean[c] == doctest::Approx(0.1 * xm).epsilon(1e-12));
    CHECK(stats.running_var[c] == doctest::Approx(0.9 + 0.1 * xv / 35).epsilon(1e-12));
  }
  Graph<double> h;
  BatchNormStats<double> fixed(2);
  fixed.running_mean.fill(1.0);
  fixed.running_var.fill(4.0);
  const auto& z = h.value(h.batchnorm2d(h.constant(x), h.constant(Tensor<double>(Shape{2}, 1.0)),
                                        h.constant(Tensor<double>(Shape{2}, 0.0)), fixed, false));
  CHECK(z[0] == doctest::Approx((x[0] - 1.0) / std::sqrt(4.0 + 1e-5)).epsilon(1e-12));
  CHECK(fixed.running_mean[0] == 1.0);
}

TEST_CASE("losses on spec examples") {
  const double clamp = -std::log(1.0 - 1e-7);
  {
    Graph<double> g;
    Tensor<double> p(Shape{1, 2, 2, 2}, 0.0);
    Tensor<double> t(Shape{1, 2, 2}, std::vector<double>{0, 1, 1, 0});
    for (std::size_t px = 0; px < 4; ++px) p[std::size_t(t[px]) * 4 + px] = 1.0;
    CHECK(g.value(g.cross_entropy(g.constant(p), t))[0] == doctest::Approx(clamp).epsilon(1e-9));
  }
  {
    Graph<double> g;
    Tensor<double> t(Shape{2, 3, 3}, 0.0);
    t[4] = 1;
    const auto& ce = g.value(g.cross_entropy(g.constant(Tensor<double>(Shape{2, 2, 3, 3}, 0.5)), t));
    CHECK(ce[0] == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  }
  {
    // ten-voxel lesion in a 64×64 slice, exact one-hot prediction
    Graph<double> g;
    Tensor<double> t(Shape{1, 64, 64}, 0.0);
    for (std::size_t i = 0; i < 10; ++i) t[100 + 64 * i] = 1.0;
    Tensor<double> p(Shape{1, 2, 64, 64}, 0.0);
    for (std::size_t i = 0; i < 4096; ++i) p[std::size_t(t[i]) * 4096 + i] = 1.0;
    CHECK(g.value(g.soft_dice(g.constant(p), t))[0] == 0.0);
  }
  {
    Graph<double> g;
    Tensor<double> p(Shape{1, 2, 2, 2}, 0.5);
    p[0] = 0.52;  // channel sum 1.02
    const Tensor<double> t(Shape{1, 2, 2}, 0.0);
    CHECK_THROWS_AS(g.cross_entropy(g.constant(p), t), ValueError);
    CHECK_THROWS_AS(g.soft_dice(g.constant(p), t), ValueError);
    p[0] = 0.50005;  // within 1e-4
    CHECK_NOTHROW(g.cross_entropy(g.constant(p), t));
  }
}

TEST_CASE("losses are non-negative and soft dice stays in [0, 1]") {
  std::mt19937_64 rng(8);
  std::uniform_int_distribution<int> bit(0, 1);
  for (int rep = 0; rep < 30; ++rep) {
    Graph<double> g;
    const Var p = g.softmax_channels(g.constant(random_tensor(Shape{2, 2, 5, 5}, rng)));
    Tensor<double> t(Shape{2, 5, 5});
    for (auto& v : t.data()) v = bit(rng);
    const double ce = g.value(g.cross_entropy(p, t))[0];
    const double sd = g.value(g.soft_dice(p, t))[0];
    CHECK(ce >= 0.0);
    CHECK(sd >= 0.0);
    CHECK(sd <= 1.0);
  }
}

TEST_CASE("backward basics") {
  std::mt19937_64 rng(2);
  Graph<double> g;
  const Var x = g.variable(random_tensor(Shape{2, 3, 4}, rng));
  g.backward(g.sum(x));
  const Tensor<double> gs = g.grad(x);
  for (double v : gs.data()) CHECK(v == 1.0);

  // diamond: x feeds relu and itself, summed
  Graph<double> h;
  Tensor<double> xs(Shape{1, 1, 2, 2}, std::vector<double>{-1.0, 2.0, 3.0, -4.0});
  const Var xv = h.variable(xs);
  const std::vector<Var> parts{h.relu(xv), xv};
  h.backward(h.sum(h.add(parts)));
  const Tensor<double> gx = h.grad(xv);
  CHECK(gx[0] == 1.0);
  CHECK(gx[1] == 2.0);
  CHECK(gx[2] == 2.0);
  CHECK(gx[3] == 1.0);

  Graph<double> k;
  const Var nonscalar = k.variable(Tensor<double>(Shape{2}, 1.0));
  CHECK_THROWS_AS(k.backward(nonscalar), ShapeError);
}

TEST_CASE("parameter gradients accumulate and zero") {
  ParameterStore<double> store(1);
  auto& p = store.create("w", Shape{1, 1, 1, 1}, Init::kOnes);
  CHECK_THROWS_AS(store.create("w", Shape{1}, Init::kZeros), ConfigError);
  for (int i = 0; i < 2; ++i) {
    Graph<double> g;
    const Var w = g.parameter(p);
    g.backward(g.sum(g.conv2d(g.constant(Tensor<double>(Shape{1, 1, 2, 2}, 1.0)), w, std::nullopt)));
  }
  CHECK(p.grad[0] == 8.0);
  store.zero_grad();
  CHECK(p.grad[0] == 0.0);
}

TEST_CASE("seeded initialisation is deterministic") {
  ParameterStore<float> a(42), b(42), c(43);
  const auto& pa = a.create("k", Shape{8, 4, 3, 3}, Init::kHeNormal, 36);
  const auto& pb = b.create("k", Shape{8, 4, 3, 3}, Init::kHeNormal, 36);
  const auto& pc = c.create("k", Shape{8, 4, 3, 3}, Init::kHeNormal, 36);
  CHECK(std::equal(pa.value.data().begin(), pa.value.data().end(), pb.value.data().begin()));
  CHECK_FALSE(std::equal(pa.value.data().begin(), pa.value.data().end(), pc.value.data().begin()));
}

TEST_CASE("finite-difference checks pass for every op") {
  for (const auto& op : gradcheck_ops()) {
    CAPTURE(op);
    const GradcheckResult r = gradcheck_op(op, 7, 5);
    CHECK(r.passed);
    CHECK(r.max_rel_error <= 1e-6);
  }
  CHECK_THROWS_AS(gradcheck_op("no_such_op"), ConfigError);
}
