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

#include "gradcheck/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>

#include "network/network.hpp"
#include "tensor/errors.hpp"
#include "tensor/graph.hpp"

namespace mdu {

namespace {

constexpr double kStep = 1e-5;

using Builder = std::function<Var(Graph<double>&, const std::vector<Var>&)>;

struct Instance {
  std::vector<Tensor<double>> inputs;
  Builder f;
};

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}
  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(gen_); }
  double normal() { return std::normal_distribution<double>(0.0, 1.0)(gen_); }
  std::size_t pick(std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(gen_);
  }
  Tensor<double> normal(Shape s) {
    Tensor<double> t(std::move(s));
    for (auto& v : t.data()) v = normal();
    return t;
  }
  // Magnitudes in [0.05, 1] so ReLU sees no input near its kink.
  Tensor<double> off_zero(Shape s) {
    Tensor<double> t(std::move(s));
    for (auto& v : t.data()) v = uniform(0.05, 1.0) * (pick(0, 1) ? 1.0 : -1.0);
    return t;
  }
  // Pairwise distinct values spaced 0.01 apart so pooling argmaxes are stable.
  Tensor<double> distinct(Shape s) {
    Tensor<double> t(std::move(s));
    std::vector<double> vals(t.size());
    for (std::size_t i = 0; i < vals.size(); ++i) vals[i] = 0.01 * double(i) - 0.005 * double(vals.size());
    for (std::size_t i = vals.size(); i > 1; --i) std::swap(vals[i - 1], vals[pick(0, i - 1)]);
    std::copy(vals.begin(), vals.end(), t.data().begin());
    return t;
  }
  // Per-pixel probabilities bounded away from 0 and 1.
  Tensor<double> simplex(std::size_t b, std::size_t c, std::size_t h, std::size_t w) {
    Tensor<double> t(Shape{b, c, h, w});
    const std::size_t hw = h * w;
    for (std::size_t i = 0; i < b; ++i) {
      for (std::size_t px = 0; px < hw; ++px) {
        double total = 0;
        for (std::size_t k = 0; k < c; ++k) total += (t[(i * c + k) * hw + px] = uniform(0.2, 1.0));
        for (std::size_t k = 0; k < c; ++k) t[(i * c + k) * hw + px] /= total;
      }
    }
    return t;
  }
  Tensor<double> labels(std::size_t b, std::size_t h, std::size_t w, std::size_t classes) {
    Tensor<double> t(Shape{b, h, w});
    for (auto& v : t.data()) v = double(pick(0, classes - 1));
    return t;
  }

 private:
  std::mt19937_64 gen_;
};

Instance make_conv(Rng& r, std::size_t kh, std::size_t kw, Dilation d) {
  const std::size_t b = r.pick(1, 2), cin = r.pick(1, 3), cout = r.pick(1, 3);
  const std::size_t h = r.pick(3, 7), w = r.pick(3, 7);
  const bool bias = r.pick(0, 1);
  Instance in;
  in.inputs = {r.normal(Shape{b, cin, h, w}), r.normal(Shape{cout, cin, kh, kw})};
  if (bias) in.inputs.push_back(r.normal(Shape{cout}));
  in.f = [d, bias](Graph<double>& g, const std::vector<Var>& v) {
    return g.conv2d(v[0], v[1], bias ? std::optional<Var>(v[2]) : std::nullopt, d);
  };
  return in;
}

Instance make_instance(const std::string& op, Rng& r) {
  const auto dims = [&r] {
    return Shape{r.pick(1, 2), r.pick(1, 3), 2 * r.pick(1, 3), 2 * r.pick(1, 3)};
  };
  Instance in;
  if (op == "conv2d") {
    const std::size_t k = r.pick(0, 1) ? 3 : 1;
    return make_conv(r, k, k, {1, 1});
  }
  if (op == "conv2d_dilated") {
    const std::size_t d = r.pick(2, 4);
    return make_conv(r, 3, 3, {d, d});
  }
  if (op == "conv2d_asymmetric") {
    const std::size_t n = r.pick(0, 1) ? 3 : 5;
    const std::size_t d = r.pick(1, 2);
    return r.pick(0, 1) ? make_conv(r, 1, n, {1, d}) : make_conv(r, n, 1, {d, 1});
  }
  if (op == "maxpool2d" || op == "avgpool2d") {
    in.inputs = {r.distinct(dims())};
    const bool mx = op == "maxpool2d";
    in.f = [mx](Graph<double>& g, const std::vector<Var>& v) {
      return mx ? g.maxpool2d(v[0]) : g.avgpool2d(v[0]);
    };
    return in;
  }
  if (op == "upsample2x") {
    in.inputs = {r.normal(dims())};
    in.f = [](Graph<double>& g, const std::vector<Var>& v) { return g.upsample2x(v[0]); };
    return in;
  }
  if (op == "concat") {
    const Shape s = dims();
    const std::size_t parts = r.pick(2, 3);
    for (std::size_t i = 0; i < parts; ++i) {
      in.inputs.push_back(r.normal(Shape{s[0], r.pick(1, 3), s[2], s[3]}));
    }
    in.f = [](Graph<double>& g, const std::vector<Var>& v) { return g.concat(v); };
    return in;
  }
  if (op == "slice_channels") {
    const Shape s{r.pick(1, 2), r.pick(2, 5), 2, 3};
    const std::size_t begin = r.pick(0, s[1] - 1);
    const std::size_t count = r.pick(1, s[1] - begin);
    in.inputs = {r.normal(s)};
    in.f = [begin, count](Graph<double>& g, const std::vector<Var>& v) {
      return g.slice_channels(v[0], begin, count);
    };
    return in;
  }
  if (op == "add") {
    const Shape s = dims();
    const std::size_t parts = r.pick(2, 3);
    for (std::size_t i = 0; i < parts; ++i) in.inputs.push_back(r.normal(s));
    in.f = [](Graph<double>& g, const std::vector<Var>& v) { return g.add(v); };
    return in;
  }
  if (op == "relu") {
    in.inputs = {r.off_zero(dims())};
    in.f = [](Graph<double>& g, const std::vector<Var>& v) { return g.relu(v[0]); };
    return in;
  }
  if (op == "softmax") {
    in.inputs = {r.normal(Shape{r.pick(1, 2), r.pick(2, 4), r.pick(1, 4), r.pick(1, 4)})};
    in.f = [](Graph<double>& g, const std::vector<Var>& v) { return g.softmax_channels(v[0]); };
    return in;
  }
  if (op == "batchnorm2d") {
    const Shape s{2, r.pick(1, 3), r.pick(2, 4), r.pick(2, 4)};
    in.inputs = {r.normal(s), r.normal(Shape{s[1]}), r.normal(Shape{s[1]})};
    in.f = [c = s[1]](Graph<double>& g, const std::vector<Var>& v) {
      // Running statistics do not enter the training-mode output.
      BatchNormStats<double> stats(c);
      return g.batchnorm2d(v[0], v[1], v[2], stats, true);
    };
    return in;
  }
  if (op == "cross_entropy" || op == "soft_dice") {
    const std::size_t b = r.pick(1, 2), c = op == "soft_dice" ? 2 : r.pick(2, 3);
    const std::size_t h = r.pick(2, 4), w = r.pick(2, 4);
    in.inputs = {r.simplex(b, c, h, w)};
    const Tensor<double> target = r.labels(b, h, w, c);
    const bool ce = op == "cross_entropy";
    in.f = [target, ce](Graph<double>& g, const std::vector<Var>& v) {
      return ce ? g.cross_entropy(v[0], target) : g.soft_dice(v[0], target);
    };
    return in;
  }
  if (op == "sum") {
    in.inputs = {r.normal(dims())};
    in.f = [](Graph<double>& g, const std::vector<Var>& v) { return g.sum(v[0]); };
    return in;
  }
  throw ConfigError("unknown gradcheck op '" + op + "'");
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) h = (h ^ c) * 1099511628211ull;
  return h;
}

double relative_error(double a, double n, double floor) {
  return std::abs(a - n) / std::max({std::abs(a), std::abs(n), floor, 1e-12});
}

}  // namespace

std::string GradcheckResult::line() const {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-22s %s  max rel err %.3e (threshold %.0e, %zu instances, %zu coords)",
                name.c_str(), passed ? "PASS" : "FAIL", max_rel_error, threshold, instances,
                coordinates);
  return buf;
}

const std::vector<std::string>& gradcheck_ops() {
  static const std::vector<std::string> ops = {
      "conv2d",  "conv2d_dilated", "conv2d_asymmetric", "maxpool2d", "avgpool2d",
      "upsample2x", "concat",      "slice_channels",    "add",       "relu",
      "softmax", "batchnorm2d",    "cross_entropy",     "soft_dice", "sum"};
  return ops;
}

GradcheckResult gradcheck_op(const std::string& name, std::uint64_t seed, std::size_t instances) {
  if (std::find(gradcheck_ops().begin(), gradcheck_ops().end(), name) == gradcheck_ops().end()) {
    throw ConfigError("unknown gradcheck op '" + name + "'");
  }
  GradcheckResult res;
  res.name = name;
  res.threshold = kOpGradTolerance;
  Rng rng(seed ^ fnv1a(name));
  for (std::size_t inst = 0; inst < instances; ++inst) {
    Instance in = make_instance(name, rng);
    Tensor<double> weights;
    const auto eval = [&](bool with_grad, std::vector<Tensor<double>>* grads) {
      Graph<double> g;
      std::vector<Var> vars;
      for (const auto& t : in.inputs) vars.push_back(g.variable(t));
      const Var out = in.f(g, vars);
      if (weights.size() == 0) weights = rng.normal(g.value(out).shape());
      const Var loss = g.weighted_sum(out, weights);
      if (with_grad) {
        g.backward(loss);
        for (const Var v : vars) grads->push_back(g.grad(v));
      }
      return g.value(loss)[0];
    };
    std::vector<Tensor<double>> analytic;
    eval(true, &analytic);
    std::vector<std::vector<double>> numeric(in.inputs.size());
    double scale = 0;
    for (std::size_t i = 0; i < in.inputs.size(); ++i) {
      for (std::size_t k = 0; k < in.inputs[i].size(); ++k) {
        const double x0 = in.inputs[i][k];
        in.inputs[i][k] = x0 + kStep;
        const double up = eval(false, nullptr);
        in.inputs[i][k] = x0 - kStep;
        const double down = eval(false, nullptr);
        in.inputs[i][k] = x0;
        numeric[i].push_back((up - down) / (2 * kStep));
        scale = std::max(scale, std::abs(numeric[i].back()));
      }
    }
    for (std::size_t i = 0; i < in.inputs.size(); ++i) {
      for (std::size_t k = 0; k < numeric[i].size(); ++k) {
        res.max_rel_error = std::max(
            res.max_rel_error, relative_error(analytic[i][k], numeric[i][k], 1e-3 * scale));
        ++res.coordinates;
      }
    }
    ++res.instances;
  }
  res.passed = res.max_rel_error <= res.threshold;
  return res;
}

GradcheckResult gradcheck_full_network_small(std::uint64_t seed, std::size_t coords_per_tensor) {
  NetworkConfig cfg;
  cfg.modalities = NetworkConfig::default_modalities(2);
  cfg.fusion = Fusion::kHyperdense;
  cfg.base_width = 4;
  cfg.depth = 2;
  cfg.height = 16;
  cfg.width = 16;
  Network<double> net(cfg, seed);
  Rng rng(seed + 0x9e3779b97f4a7c15ull);
  const std::size_t batch = 2;
  std::vector<Tensor<double>> inputs;
  for (std::size_t m = 0; m < cfg.num_modalities(); ++m) {
    Tensor<double> x(Shape{batch, 1, cfg.height, cfg.width});
    for (auto& v : x.data()) v = rng.uniform(0.0, 1.0);
    inputs.push_back(std::move(x));
  }
  const Tensor<double> target = rng.labels(batch, cfg.height, cfg.width, 2);
  const auto eval = [&](bool with_grad) {
    Graph<double> g;
    std::vector<Var> in;
    for (const auto& x : inputs) in.push_back(g.constant(x));
    const Var loss = g.cross_entropy(net.forward(g, in, true), target);
    if (with_grad) {
      net.store().zero_grad();
      g.backward(loss);
    }
    return g.value(loss)[0];
  };

  eval(true);
  GradcheckResult res;
  res.name = "full_network_small";
  res.threshold = kNetworkGradTolerance;
  res.instances = 1;
  std::vector<double> analytic, numeric;
  double scale = 0;
  for (auto* p : net.store().parameters()) {
    const Tensor<double> grad = p->grad;
    std::vector<std::size_t> idx(p->value.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    for (std::size_t i = idx.size(); i > 1; --i) std::swap(idx[i - 1], idx[rng.pick(0, i - 1)]);
    idx.resize(std::min(idx.size(), coords_per_tensor));
    for (std::size_t k : idx) {
      const double x0 = p->value[k];
      p->value[k] = x0 + kStep;
      const double up = eval(false);
      p->value[k] = x0 - kStep;
      const double down = eval(false);
      p->value[k] = x0;
      analytic.push_back(grad[k]);
      numeric.push_back((up - down) / (2 * kStep));
      scale = std::max(scale, std::abs(numeric.back()));
    }
  }
  for (std::size_t j = 0; j < numeric.size(); ++j) {
    res.max_rel_error =
        std::max(res.max_rel_error, relative_error(analytic[j], numeric[j], 1e-3 * scale));
    ++res.coordinates;
  }
  res.passed = res.max_rel_error <= res.threshold;
  return res;
}

}  // namespace mdu
