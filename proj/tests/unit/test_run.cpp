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
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "data/container.hpp"
#include "run/checkpoint.hpp"
#include "run/commands.hpp"
#include "run/run_config.hpp"
#include "tensor/errors.hpp"

using namespace mdu;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string config_error(const std::string& text) {
  try {
    parse_run_config_text(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  FAIL("config accepted: " << text);
  return {};
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("mdu_test_run_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) { return read_file(p); }

RunConfig tiny_run(const fs::path& root) {
  RunConfig rc = parse_run_config_text(R"({
    "seed": 3,
    "network": {"modalities": 2, "base_width": 4, "depth": 2, "height": 16, "width": 16},
    "train": {"lr0": 0.001, "decay_epoch": 2, "epochs": 3, "batch_size": 4}
  })");
  SynthOptions opt;
  opt.seed = 11;
  opt.num_cases = 4;
  opt.height = opt.width = 16;
  opt.depth = 2;
  run_synth(root / "data", opt, 2);
  rc.train_data = (root / "data").string();
  rc.out_dir = (root / "out").string();
  resolve_data_dirs(rc);
  return rc;
}

}  // namespace

TEST_CASE("config defaults and overrides") {
  const RunConfig d = parse_run_config_text("{}");
  CHECK(d.network.num_modalities() == 4);
  CHECK(d.network.fusion == Fusion::kHyperdense);
  CHECK(d.train.lr0 == 1e-4);
  CHECK(d.train.decay_epoch == 100);

  const RunConfig rc = parse_run_config_text(R"({
    "seed": 9,
    "network": {"modalities": ["A", "B"], "fusion": "late", "module": "asymmetric",
                "base_width": 8, "depth": 3, "height": 64, "width": 32,
                "batchnorm": false, "dense_pool": "average", "dilations": [2, 3]},
    "train": {"lr0": 0.01, "decay_epoch": 5, "decay_factor": 0.5, "betas": [0.8, 0.95],
              "epsilon": 1e-6, "batch_size": 2, "epochs": 10, "loss": "soft_dice",
              "checkpoint_every": 2},
    "data": {"train": "t", "val": "v"},
    "out": "o"
  })");
  CHECK(rc.seed == 9);
  CHECK(rc.train.seed == 9);
  CHECK(rc.network.modalities == std::vector<std::string>{"A", "B"});
  CHECK(rc.network.fusion == Fusion::kLate);
  CHECK(rc.network.module == ModuleVariant::kAsymmetric);
  CHECK(rc.network.dense_pool == DensePool::kAverage);
  CHECK(rc.network.dilations == std::array<std::size_t, 2>{2, 3});
  CHECK(rc.train.beta1 == 0.8);
  CHECK(rc.train.loss == LossKind::kSoftDice);
  CHECK(rc.train_data == "t");
  CHECK(rc.out_dir == "o");

  // round trip
  const RunConfig back = parse_run_config(to_json(rc));
  CHECK(to_json(back) == to_json(rc));

  CHECK(parse_run_config_text(R"({"network": {"modalities": 3}})").network.modalities ==
        std::vector<std::string>{"M1", "M2", "M3"});
}

TEST_CASE("config errors name the field") {
  CHECK(config_error(R"({"network": {"widht": 3}})").find("network.widht") != std::string::npos);
  CHECK(config_error(R"({"bogus": 1})").find("bogus") != std::string::npos);
  CHECK(config_error(R"({"train": {"lr0": "fast"}})").find("train.lr0") != std::string::npos);
  CHECK(config_error(R"({"network": {"fusion": "middle"}})").find("network.fusion") !=
        std::string::npos);
  CHECK(config_error(R"({"network": {"num_classes": 3}})").find("num_classes") !=
        std::string::npos);
  CHECK(config_error(R"({"train": {"epochs": 10}})").find("decay_epoch") != std::string::npos);
  CHECK(config_error(R"({"network": {"height": 100}})").find("network") != std::string::npos);
  CHECK(config_error("{not json").size() > 0);
}

TEST_CASE("MDU_SEED overrides the seed") {
  ::unsetenv("MDU_SEED");
  CHECK_FALSE(seed_from_env().has_value());
  ::setenv("MDU_SEED", "1234", 1);
  CHECK(seed_from_env() == std::optional<std::uint64_t>(1234));
  ::setenv("MDU_SEED", "12x", 1);
  CHECK_THROWS_AS(seed_from_env(), ConfigError);
  ::unsetenv("MDU_SEED");
}

TEST_CASE("checkpoint round trip reproduces predictions bitwise") {
  NetworkConfig c;
  c.modalities = {"M1", "M2"};
  c.base_width = 4;
  c.depth = 2;
  c.height = c.width = 16;
  Network<float> net(c, 21);
  // non-trivial running statistics
  Graph<float> warm;
  std::vector<Var> in{warm.constant(Tensor<float>(Shape{2, 1, 16, 16}, 0.3f)),
                      warm.constant(Tensor<float>(Shape{2, 1, 16, 16}, 0.7f))};
  net.forward(warm, in, true);

  const std::string bytes = encode_checkpoint(net, 21, 7);
  CHECK(bytes.substr(0, 4) == "MDTP");
  const Checkpoint ck = decode_checkpoint(bytes);
  CHECK(ck.seed == 21);
  CHECK(ck.epoch == 7);
  CHECK(ck.network->parameter_count() == net.parameter_count());
  CHECK(encode_checkpoint(*ck.network, 21, 7) == bytes);

  Graph<float> g1, g2;
  std::vector<Var> a{g1.constant(Tensor<float>(Shape{1, 1, 16, 16}, 0.2f)),
                     g1.constant(Tensor<float>(Shape{1, 1, 16, 16}, 0.9f))};
  std::vector<Var> b{g2.constant(Tensor<float>(Shape{1, 1, 16, 16}, 0.2f)),
                     g2.constant(Tensor<float>(Shape{1, 1, 16, 16}, 0.9f))};
  const auto& ya = g1.value(net.forward(g1, a, false));
  const auto& yb = g2.value(ck.network->forward(g2, b, false));
  CHECK(std::equal(ya.data().begin(), ya.data().end(), yb.data().begin()));

  CHECK_THROWS_AS(decode_checkpoint(bytes.substr(0, bytes.size() - 4)), DataError);
  CHECK_THROWS_AS(decode_checkpoint(bytes + "x"), DataError);
  std::string wrong = bytes;
  wrong[3] = 'C';
  CHECK_THROWS_AS(decode_checkpoint(wrong), DataError);
}

TEST_CASE("inspect report") {
  const InspectReport r = run_inspect(NetworkConfig{});
  CHECK(r.parameter_count == 3829162);
  CHECK(r.table_csv.rfind("layer,input,output\n", 0) == 0);
  CHECK(r.table_csv.find("Bridge,1920x16x16,512x16x16") != std::string::npos);
  CHECK(r.connectivity.find("1.0 -> 1.1") != std::string::npos);
}

TEST_CASE("pgm encoding") {
  const std::uint8_t m[6] = {0, 1, 0, 1, 1, 0};
  const std::string p = encode_pgm(m, 2, 3);
  CHECK(p.rfind("P5\n3 2\n255\n", 0) == 0);
  CHECK(p.size() == 11 + 6);
  CHECK(std::uint8_t(p[12]) == 255);
  CHECK(std::uint8_t(p[11]) == 0);
}

TEST_CASE("train, eval and predict on a tiny synthetic run") {
  const fs::path root = scratch("pipeline");
  const RunConfig rc = tiny_run(root);
  CHECK(fs::path(rc.train_data).filename() == "train");
  CHECK(fs::path(rc.val_data).filename() == "val");
  std::vector<std::string> lines;
  const TrainLog log = run_train(rc, [&](const std::string& l) { lines.push_back(l); });
  CHECK(lines.size() == 3);
  CHECK(lines[0].rfind("epoch 1/3", 0) == 0);

  const fs::path out(rc.out_dir);
  for (const char* f : {kCheckpointFile, kLogFile, kTimingFile, kManifestFile})
    CHECK(fs::exists(out / f));
  CHECK(slurp(out / kLogFile) == log.csv());
  const RunConfig manifest = parse_run_config_text(slurp(out / kManifestFile));
  CHECK(to_json(manifest).at("network") == to_json(rc).at("network"));
  CHECK(manifest.seed == 3);

  // evaluation of the final checkpoint agrees with the last logged epoch
  const MetricsReport rep = run_eval(out / kCheckpointFile, rc.val_data, root / "eval");
  CHECK(rep.cases.size() == 2);
  CHECK(rep.dsc.mean == doctest::Approx(log.epochs.back().val_dsc).epsilon(1e-12));
  CHECK(fs::exists(root / "eval" / "metrics.csv"));
  const std::string summary = slurp(root / "eval" / "summary.txt");
  CHECK(summary.find("DSC") != std::string::npos);
  CHECK(summary.find("±") != std::string::npos);

  const std::size_t n = run_predict(out / kCheckpointFile, rc.val_data, root / "pred", true);
  CHECK(n == 2);
  std::size_t pgm = 0, mdt = 0;
  for (const auto& e : fs::directory_iterator(root / "pred")) {
    pgm += e.path().extension() == ".pgm";
    mdt += e.path().extension() == ".mdt";
  }
  CHECK(mdt == 2);
  CHECK(pgm == 4);  // two slices each
  const auto preds = load_cases(root / "pred");
  CHECK(preds[0].mask.has_value());

  fs::remove_all(root);
}

TEST_CASE("training twice with the same seed writes identical logs") {
  const fs::path root = scratch("repro");
  RunConfig rc = tiny_run(root);
  rc.out_dir = (root / "a").string();
  run_train(rc);
  rc.out_dir = (root / "b").string();
  run_train(rc);
  CHECK(slurp(root / "a" / kLogFile) == slurp(root / "b" / kLogFile));
  CHECK(slurp(root / "a" / kCheckpointFile) == slurp(root / "b" / kCheckpointFile));
  fs::remove_all(root);
}

TEST_CASE("data problems surface as DataError") {
  const fs::path root = scratch("bad");
  RunConfig rc = tiny_run(root);
  rc.network.modalities = {"M1", "M2", "M3"};
  CHECK_THROWS_AS(run_train(rc), DataError);
  rc = tiny_run(root);
  rc.train_data = (root / "missing").string();
  rc.val_data.clear();
  CHECK_THROWS_AS(run_train(rc), DataError);
  fs::remove_all(root);
}
