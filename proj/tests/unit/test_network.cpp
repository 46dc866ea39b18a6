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

#include <algorithm>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

#include "network/network.hpp"

using namespace mdu;

namespace {

std::string read_golden(const std::string& name) {
  std::ifstream f(std::string(MDU_GOLDEN_DIR) + "/" + name, std::ios::binary);
  REQUIRE(f);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

NetworkConfig small(std::size_t n, Fusion fusion, std::size_t side = 16, std::size_t depth = 2) {
  NetworkConfig c;
  c.modalities = NetworkConfig::default_modalities(n);
  c.fusion = fusion;
  c.base_width = 4;
  c.depth = depth;
  c.height = c.width = side;
  return c;
}

std::vector<Tensor<double>> random_inputs(const NetworkConfig& c, std::size_t batch,
                                          std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<Tensor<double>> out;
  for (std::size_t m = 0; m < c.num_modalities(); ++m) {
    Tensor<double> t(Shape{batch, 1, c.height, c.width});
    for (auto& v : t.data()) v = u(rng);
    out.push_back(std::move(t));
  }
  return out;
}

template <typename T>
Var run(Network<T>& net, Graph<T>& g, const std::vector<Tensor<T>>& inputs, bool training,
        ShapeTable* trace = nullptr) {
  std::vector<Var> vars;
  for (const auto& t : inputs) vars.push_back(g.constant(t));
  return net.forward(g, vars, training, trace);
}

const ShapeRow& row(const ShapeTable& t, const std::string& name) {
  for (const auto& r : t.rows)
    if (r.name == name) return r;
  FAIL("no row " << name);
  return t.rows.front();
}

}  // namespace

TEST_CASE("default shape tables match the golden files") {
  NetworkConfig hd;
  NetworkConfig late;
  late.fusion = Fusion::kLate;
  CHECK(shape_table(hd).text() == read_golden("shapes_hyperdense.txt"));
  CHECK(shape_table(late).text() == read_golden("shapes_late.txt"));

  const ShapeTable h = shape_table(hd);
  CHECK(row(h, "Layer 2").input == Shape{128, 128, 128});
  CHECK(row(h, "Layer 3").input == Shape{384, 64, 64});
  CHECK(row(h, "Layer 4").input == Shape{896, 32, 32});
  CHECK(row(h, "Bridge").input == Shape{1920, 16, 16});
  CHECK(row(h, "Bridge").output == Shape{512, 16, 16});
  const ShapeTable l = shape_table(late);
  CHECK(row(l, "Bridge").input == Shape{1024, 16, 16});
  CHECK(row(l, "Bridge").output == Shape{512, 16, 16});
}

TEST_CASE("decoder rows coincide between late and hyper-dense fusion") {
  NetworkConfig hd;
  NetworkConfig late;
  late.fusion = Fusion::kLate;
  const ShapeTable a = shape_table(hd), b = shape_table(late);
  REQUIRE(a.rows.size() == b.rows.size());
  const auto bridge = std::find_if(a.rows.begin(), a.rows.end(),
                                   [](const ShapeRow& r) { return r.name == kBridgeName; });
  for (auto it = bridge + 1; it != a.rows.end(); ++it) {
    const auto& other = b.rows[std::size_t(it - a.rows.begin())];
    CHECK(*it == other);
  }
}

TEST_CASE("hyper-dense input channels follow N times the sum of earlier widths") {
  for (std::size_t n = 1; n <= 5; ++n)
    for (std::size_t base : {2u, 8u, 32u}) {
      NetworkConfig c;
      c.modalities = NetworkConfig::default_modalities(n);
      c.base_width = base;
      for (std::size_t l = 1; l <= c.depth; ++l) {
        std::size_t sum = 0;
        for (std::size_t j = 0; j < l; ++j) sum += base * (std::size_t{1} << j);
        CHECK(c.encoder_input_channels(l) == n * sum);
      }
    }
}

TEST_CASE("single-stream hyper-dense is a densely connected single path") {
  NetworkConfig c;
  c.modalities = NetworkConfig::default_modalities(1);
  const ShapeTable t = shape_table(c);
  CHECK(row(t, "Layer 2").input[0] == 32);
  CHECK(row(t, "Layer 3").input[0] == 96);
  CHECK(row(t, "Layer 4").input[0] == 224);
  CHECK(row(t, "Bridge").input[0] == 480);
  CHECK(permutation(1, 3, 1) ==
        std::vector<FeatureBlock>{{1, 2}, {1, 1}, {1, 0}});
}

TEST_CASE("permutation examples") {
  CHECK(permutation(1, 2, 2) == std::vector<FeatureBlock>{{1, 1}, {2, 1}, {1, 0}, {2, 0}});
  CHECK(permutation(2, 2, 2) == std::vector<FeatureBlock>{{2, 1}, {1, 1}, {2, 0}, {1, 0}});
  CHECK(permutation(3, 1, 4) == std::vector<FeatureBlock>{{3, 0}, {4, 0}, {1, 0}, {2, 0}});
  CHECK_THROWS_AS(permutation(0, 1, 2), ConfigError);
  CHECK_THROWS_AS(permutation(3, 1, 2), ConfigError);
}

TEST_CASE("permutations are reorderings of one block multiset") {
  for (std::size_t n = 1; n <= 6; ++n)
    for (std::size_t l = 1; l <= 5; ++l) {
      std::vector<FeatureBlock> ref;
      for (std::size_t j = 0; j < l; ++j)
        for (std::size_t s = 1; s <= n; ++s) ref.push_back({s, j});
      std::sort(ref.begin(), ref.end());
      for (std::size_t s = 1; s <= n; ++s) {
        const auto p = permutation(s, l, n);
        CHECK(p.size() == n * l);
        // layer groups descend and each opens with the stream's own block
        for (std::size_t g = 0; g < l; ++g) {
          CHECK(p[g * n].stream == s);
          CHECK(p[g * n].layer == l - 1 - g);
        }
        auto sorted = p;
        std::sort(sorted.begin(), sorted.end());
        CHECK(sorted == ref);
      }
    }
}

TEST_CASE("connectivity in-degrees") {
  auto in_degree = [](const std::vector<Edge>& edges, FeatureBlock dst) {
    return std::count_if(edges.begin(), edges.end(), [&](const Edge& e) { return e.dst == dst; });
  };
  NetworkConfig two;
  two.modalities = NetworkConfig::default_modalities(2);
  const auto e2 = connectivity_graph(two);
  CHECK(in_degree(e2, {1, 3}) == 6);
  CHECK(in_degree(e2, {2, 3}) == 6);

  NetworkConfig four;
  const auto e4 = connectivity_graph(four);
  CHECK(in_degree(e4, {0, 4}) == 16);
  for (std::size_t l = 1; l < 4; ++l)
    for (std::size_t s = 1; s <= 4; ++s) CHECK(in_degree(e4, {s, l}) == long(4 * l));

  NetworkConfig late;
  late.fusion = Fusion::kLate;
  const auto el = connectivity_graph(late);
  for (std::size_t l = 1; l < 4; ++l)
    for (std::size_t s = 1; s <= 4; ++s) CHECK(in_degree(el, {s, l}) == 1);
  CHECK(in_degree(el, {0, 4}) == 4);

  const std::string text = connectivity_text(e2);
  CHECK(text.find("2.2 -> 1.3\n") != std::string::npos);
  CHECK(text.find("0.4 -> 0.5\n") != std::string::npos);
}

TEST_CASE("config validation") {
  NetworkConfig c;
  c.height = 100;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = NetworkConfig{};
  c.modalities.clear();
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = NetworkConfig{};
  c.num_classes = 1;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = NetworkConfig{};
  c.dilations = {3, 3};
  CHECK_THROWS_AS(c.validate(), ConfigError);
  CHECK_THROWS_AS(Network<float>(c, 0), ConfigError);
}

TEST_CASE("runtime shapes agree with the symbolic table on random configs") {
  std::mt19937_64 rng(101);
  std::uniform_int_distribution<std::size_t> n(1, 4), base(1, 4), depth(1, 3), mult(1, 3), pick(0, 2);
  for (int rep = 0; rep < 50; ++rep) {
    NetworkConfig c;
    c.modalities = NetworkConfig::default_modalities(n(rng));
    c.fusion = static_cast<Fusion>(pick(rng));
    c.module = rep % 2 ? ModuleVariant::kAsymmetric : ModuleVariant::kStandard;
    c.base_width = base(rng);
    c.depth = depth(rng);
    c.height = (std::size_t{1} << c.depth) * mult(rng);
    c.width = (std::size_t{1} << c.depth) * mult(rng);
    c.batchnorm = rep % 3 != 0;
    c.dense_pool = rep % 4 == 0 ? DensePool::kAverage : DensePool::kMax;
    CAPTURE(rep);
    Network<float> net(c, std::uint64_t(rep));
    Graph<float> g;
    std::vector<Var> in;
    for (std::size_t m = 0; m < c.num_modalities(); ++m)
      in.push_back(g.constant(Tensor<float>(Shape{2, 1, c.height, c.width}, 0.5f)));
    ShapeTable trace;
    const Var y = net.forward(g, in, true, &trace);
    CHECK(trace == shape_table(c));
    CHECK(g.value(y).shape() == Shape{2, c.num_classes, c.height, c.width});
  }
}

TEST_CASE("output is a per-pixel probability simplex") {
  std::mt19937_64 rng(5);
  const NetworkConfig c = small(3, Fusion::kHyperdense);
  Network<double> net(c, 9);
  Graph<double> g;
  const auto& p = g.value(run(net, g, random_inputs(c, 2, rng), false));
  const std::size_t hw = c.height * c.width;
  for (std::size_t b = 0; b < 2; ++b)
    for (std::size_t i = 0; i < hw; ++i) {
      const double s = p[(b * 2) * hw + i] + p[(b * 2 + 1) * hw + i];
      CHECK(std::abs(s - 1.0) < 1e-9);
    }
}

TEST_CASE("gradients reach every encoder layer of every stream") {
  std::mt19937_64 rng(77);
  for (std::size_t n : {2u, 3u}) {
    const NetworkConfig c = small(n, Fusion::kHyperdense, 16, 3);
    Network<double> net(c, 4);
    Graph<double> g;
    const Var p = run(net, g, random_inputs(c, 2, rng), true);
    Tensor<double> target(Shape{2, c.height, c.width});
    std::bernoulli_distribution coin(0.3);
    for (auto& v : target.data()) v = coin(rng);
    g.backward(g.cross_entropy(p, target));
    std::map<std::string, double> per_layer;
    for (auto* param : net.store().parameters()) {
      if (!param->name.starts_with("stream") || !param->name.ends_with("/weight")) continue;
      const std::string layer = param->name.substr(0, param->name.find('/', param->name.find('/') + 1));
      for (double v : param->grad.data()) per_layer[layer] += std::abs(v);
    }
    CHECK(per_layer.size() == n * c.depth);
    for (const auto& [name, mass] : per_layer) {
      CAPTURE(name);
      CHECK(mass > 0.0);
    }
  }
}

TEST_CASE("same seed gives the same network and output") {
  std::mt19937_64 rng(3);
  const NetworkConfig c = small(2, Fusion::kHyperdense);
  const auto inputs = random_inputs(c, 1, rng);
  Network<double> a(c, 12), b(c, 12), other(c, 13);
  Graph<double> ga, gb, gc;
  const auto& ya = ga.value(run(a, ga, inputs, false));
  const auto& yb = gb.value(run(b, gb, inputs, false));
  const auto& yc = gc.value(run(other, gc, inputs, false));
  CHECK(std::equal(ya.data().begin(), ya.data().end(), yb.data().begin()));
  CHECK_FALSE(std::equal(ya.data().begin(), ya.data().end(), yc.data().begin()));
}

TEST_CASE("factorised network is smaller with the same table") {
  for (auto fusion : {Fusion::kEarly, Fusion::kLate, Fusion::kHyperdense}) {
    NetworkConfig a = small(2, fusion, 32, 3);
    NetworkConfig b = a;
    b.module = ModuleVariant::kAsymmetric;
    CHECK(Network<float>(b, 0).parameter_count() < Network<float>(a, 0).parameter_count());
    CHECK(shape_table(a) == shape_table(b));
  }
  CHECK(Network<float>(NetworkConfig{}, 0).parameter_count() == 3829162);
}

TEST_CASE("early fusion stacks modalities into one stream") {
  NetworkConfig c;
  c.fusion = Fusion::kEarly;
  const ShapeTable t = shape_table(c);
  CHECK(t.rows.front().input == Shape{4, 256, 256});
  CHECK(row(t, "Bridge").input == Shape{256, 16, 16});
  CHECK(connectivity_graph(c).size() < connectivity_graph(NetworkConfig{}).size());
}

TEST_CASE("decoder inputs equal the upsampled width (skips are summed)") {
  for (auto fusion : {Fusion::kLate, Fusion::kHyperdense}) {
    NetworkConfig c;
    c.fusion = fusion;
    const ShapeTable t = shape_table(c);
    for (std::size_t i = 1; i <= c.depth; ++i) {
      const auto& up = row(t, upsample_name(i));
      const auto& dec = row(t, decoder_layer_name(c, i));
      CHECK(dec.input == up.output);
    }
  }
}

TEST_CASE("forward rejects the wrong number of modality inputs") {
  const NetworkConfig c = small(3, Fusion::kLate);
  Network<float> net(c, 0);
  Graph<float> g;
  std::vector<Var> two{g.constant(Tensor<float>(Shape{1, 1, 16, 16})),
                       g.constant(Tensor<float>(Shape{1, 1, 16, 16}))};
  CHECK_THROWS(net.forward(g, two, false));
}
