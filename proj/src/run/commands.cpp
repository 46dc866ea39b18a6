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

#include "run/commands.hpp"

#include <cstdio>

#include "data/container.hpp"
#include "network/network.hpp"
#include "network/topology.hpp"
#include "run/checkpoint.hpp"
#include "tensor/errors.hpp"

namespace mdu {

namespace fs = std::filesystem;

namespace {

std::vector<Case> load_prepared(const fs::path& dir, const NetworkConfig& cfg) {
  std::vector<Case> cases = load_cases(dir);
  if (cases.empty()) throw DataError("no .mdt cases in '" + dir.string() + "'");
  for (auto& c : cases) c = prepare_case(std::move(c), cfg);
  return cases;
}

void make_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create '" + dir.string() + "': " + ec.message());
}

}  // namespace

void resolve_data_dirs(RunConfig& rc) {
  if (rc.train_data.empty()) throw ConfigError("data.train: no training data directory given");
  if (!rc.val_data.empty()) return;
  const fs::path root(rc.train_data);
  if (fs::is_directory(root / "train") && fs::is_directory(root / "val")) {
    rc.train_data = (root / "train").string();
    rc.val_data = (root / "val").string();
  }
}

TrainLog run_train(const RunConfig& rc_in, const Progress& progress) {
  RunConfig rc = rc_in;
  rc.validate();
  resolve_data_dirs(rc);
  if (rc.out_dir.empty()) throw ConfigError("out: no output directory given");
  const fs::path out(rc.out_dir);

  const std::vector<Case> train_cases = load_prepared(rc.train_data, rc.network);
  const std::vector<Case> val_cases =
      rc.val_data.empty() ? std::vector<Case>{} : load_prepared(rc.val_data, rc.network);

  make_dir(out);
  write_file(out / kManifestFile, to_json(rc).dump(2) + "\n");

  Network<float> net(rc.network, rc.seed);
  TrainHooks hooks;
  hooks.on_epoch = [&](const EpochRecord& r) {
    if (!progress) return;
    char line[256];
    std::snprintf(line, sizeof line, "epoch %zu/%zu  loss %.6f  val_dsc %.4f  lr %.3g  %.1f s",
                  r.epoch, rc.train.epochs, r.train_loss, r.val_dsc, r.lr, r.wall_seconds);
    progress(line);
  };
  hooks.checkpoint = [&](std::size_t epoch) {
    save_checkpoint(out / kCheckpointFile, net, rc.seed, epoch);
    if (rc.train.checkpoint_every && epoch % rc.train.checkpoint_every == 0) {
      char name[64];
      std::snprintf(name, sizeof name, "checkpoint_e%04zu.mdp", epoch);
      save_checkpoint(out / name, net, rc.seed, epoch);
    }
  };
  TrainLog log = train(net, train_cases, val_cases, rc.train, hooks);
  write_file(out / kLogFile, log.csv());
  write_file(out / kTimingFile, log.timing_csv());
  return log;
}

MetricsReport run_eval(const fs::path& checkpoint, const fs::path& data_dir,
                       const fs::path& out_dir) {
  Checkpoint ck = load_checkpoint(checkpoint);
  const std::vector<Case> cases = load_prepared(data_dir, ck.network->config());
  for (const auto& c : cases) {
    if (!c.mask) throw DataError("case '" + c.id + "' has no ground-truth mask to evaluate against");
  }
  MetricsReport report = evaluate_cases(*ck.network, cases);
  if (!out_dir.empty()) {
    make_dir(out_dir);
    write_file(out_dir / "metrics.csv", report.csv());
    write_file(out_dir / "summary.txt", report.summary(checkpoint.filename().string()));
  }
  return report;
}

std::string encode_pgm(const std::uint8_t* mask, std::size_t h, std::size_t w) {
  std::string out = "P5\n" + std::to_string(w) + " " + std::to_string(h) + "\n255\n";
  for (std::size_t i = 0; i < h * w; ++i) out.push_back(char(mask[i] ? 255 : 0));
  return out;
}

std::size_t run_predict(const fs::path& checkpoint, const fs::path& data_dir,
                        const fs::path& out_dir, bool write_pgm) {
  Checkpoint ck = load_checkpoint(checkpoint);
  std::vector<Case> raw = load_cases(data_dir);
  if (raw.empty()) throw DataError("no .mdt cases in '" + data_dir.string() + "'");
  make_dir(out_dir);
  for (auto& c : raw) {
    const Case prepared = prepare_case(c, ck.network->config());
    c.mask = predict_case(*ck.network, prepared);
    save_case(out_dir / (c.id + ".mdt"), c);
    if (write_pgm) {
      const auto [d, h, w] = c.shape();
      for (std::size_t z = 0; z < d; ++z) {
        char name[32];
        std::snprintf(name, sizeof name, "_z%03zu.pgm", z);
        write_file(out_dir / (c.id + name), encode_pgm(c.mask->data() + z * h * w, h, w));
      }
    }
  }
  return raw.size();
}

InspectReport run_inspect(const NetworkConfig& cfg) {
  cfg.validate();
  InspectReport r;
  const ShapeTable table = shape_table(cfg);
  r.table_text = table.text();
  r.table_csv = table.csv();
  r.connectivity = connectivity_text(connectivity_graph(cfg));
  r.parameter_count = Network<float>(cfg, 0).parameter_count();
  return r;
}

void run_synth(const fs::path& out_dir, const SynthOptions& options, std::size_t val_cases) {
  const std::vector<Case> cases = synth_dataset(options);
  if (val_cases == 0) {
    make_dir(out_dir);
    for (const auto& c : cases) save_case(out_dir / (c.id + ".mdt"), c);
    return;
  }
  make_dir(out_dir / "train");
  for (const auto& c : cases) save_case(out_dir / "train" / (c.id + ".mdt"), c);
  SynthOptions vopt = options;
  vopt.num_cases = val_cases;
  vopt.first_index = options.first_index + options.num_cases;
  make_dir(out_dir / "val");
  for (const auto& c : synth_dataset(vopt)) save_case(out_dir / "val" / (c.id + ".mdt"), c);
}

}  // namespace mdu
