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

// mdunet command-line front end. Talks to the library only through the C API.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "mdunet/mdunet.h"

namespace {

// Exit codes: 0 ok, 1 check failed or internal error, 2 config/usage,
// 3 data, 4 divergence.
int exit_code(mdu_status s) {
  switch (s) {
    case MDU_OK: return 0;
    case MDU_ERR_CONFIG:
    case MDU_ERR_ARGUMENT: return 2;
    case MDU_ERR_DATA: return 3;
    case MDU_ERR_DIVERGENCE: return 4;
    default: return 1;
  }
}

int fail(mdu_status s) {
  std::cerr << "error: " << mdu_last_error() << "\n";
  return exit_code(s);
}

struct Owned {
  char* p = nullptr;
  ~Owned() { mdu_string_free(p); }
  std::string str() const { return p ? p : ""; }
};

struct ConfigHandle {
  mdu_config* p = nullptr;
  ~ConfigHandle() { mdu_config_free(p); }
};

bool write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  f << text;
  return bool(f);
}

mdu_status load_config(const std::string& path, ConfigHandle& cfg) {
  const mdu_status s = path.empty() ? mdu_config_default(&cfg.p) : mdu_config_load(path.c_str(), &cfg.p);
  if (s != MDU_OK) return s;
  return mdu_config_apply_env(cfg.p);
}

void print_progress(const char* line, void*) { std::cout << line << std::endl; }

int cmd_train(const std::string& config, const std::string& data, const std::string& val,
              const std::string& out, bool quiet) {
  ConfigHandle cfg;
  if (const auto s = load_config(config, cfg); s != MDU_OK) return fail(s);
  const mdu_status s = mdu_train(cfg.p, data.c_str(), val.c_str(), out.c_str(),
                                 quiet ? nullptr : print_progress, nullptr);
  if (s != MDU_OK) return fail(s);
  return 0;
}

int cmd_eval(const std::string& checkpoint, const std::string& data, const std::string& out) {
  Owned csv, summary;
  const mdu_status s = mdu_eval(checkpoint.c_str(), data.c_str(), out.c_str(), &csv.p, &summary.p);
  if (s != MDU_OK) return fail(s);
  std::cout << csv.str() << "\n" << summary.str();
  return 0;
}

int cmd_predict(const std::string& checkpoint, const std::string& data, const std::string& out,
                bool pgm) {
  std::size_t n = 0;
  const mdu_status s = mdu_predict(checkpoint.c_str(), data.c_str(), out.c_str(), pgm ? 1 : 0, &n);
  if (s != MDU_OK) return fail(s);
  std::cout << "wrote predictions for " << n << " cases to " << out << "\n";
  return 0;
}

int cmd_inspect(const std::string& config, const std::string& patch, bool csv,
                const std::string& out) {
  ConfigHandle cfg;
  if (const auto s = load_config(config, cfg); s != MDU_OK) return fail(s);
  if (!patch.empty()) {
    if (const auto s = mdu_config_patch(cfg.p, patch.c_str()); s != MDU_OK) return fail(s);
  }
  Owned text, table_csv, edges;
  std::uint64_t params = 0;
  const mdu_status s = mdu_inspect(cfg.p, &text.p, &table_csv.p, &edges.p, &params);
  if (s != MDU_OK) return fail(s);
  std::cout << (csv ? table_csv.str() : text.str());
  std::cout << "parameters: " << params << "\n";
  if (!out.empty()) {
    std::error_code ec;
    std::filesystem::create_directories(out, ec);
    const std::filesystem::path dir(out);
    if (ec || !write_text(dir / "shape_table.txt", text.str()) ||
        !write_text(dir / "shape_table.csv", table_csv.str()) ||
        !write_text(dir / "connectivity.txt", edges.str()) ||
        !write_text(dir / "parameter_count.txt", std::to_string(params) + "\n")) {
      std::cerr << "error: cannot write inspection files to '" << out << "'\n";
      return 3;
    }
  }
  return 0;
}

int cmd_gradcheck(const std::string& op, bool network, bool all, std::uint64_t seed,
                  std::size_t instances) {
  std::vector<std::string> ops;
  if (all) {
    Owned names;
    if (const auto s = mdu_gradcheck_ops(&names.p); s != MDU_OK) return fail(s);
    std::istringstream in(names.str());
    for (std::string name; in >> name;) ops.push_back(name);
  } else if (!op.empty()) {
    ops.push_back(op);
  }
  if (ops.empty() && !network) {
    std::cerr << "error: give --op NAME, --all or --full-network-small\n";
    return 2;
  }
  bool ok = true;
  for (const auto& name : ops) {
    Owned report;
    int passed = 0;
    const mdu_status s =
        mdu_gradcheck_op(name.c_str(), seed, instances, nullptr, &passed, &report.p);
    if (s != MDU_OK) return fail(s);
    std::cout << report.str() << "\n";
    ok = ok && passed;
  }
  if (network) {
    Owned report;
    int passed = 0;
    const mdu_status s = mdu_gradcheck_network_small(seed, nullptr, &passed, &report.p);
    if (s != MDU_OK) return fail(s);
    std::cout << report.str() << "\n";
    ok = ok && passed;
  }
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dense multi-path U-Net: training, evaluation and inspection"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(mdu_version()));

  std::string config, data, val, out, checkpoint, op, patch;
  bool quiet = false, pgm = false, csv = false, network = false, all = false;
  std::uint64_t seed = 0;
  std::size_t instances = 20;

  auto* train = app.add_subcommand("train", "Train a network on a directory of .mdt cases");
  train->add_option("--config", config, "Run config (JSON)")->required()->check(CLI::ExistingFile);
  train->add_option("--data", data, "Training cases, or a directory with train/ and val/");
  train->add_option("--val", val, "Validation cases");
  train->add_option("--out", out, "Output directory");
  train->add_flag("--quiet", quiet, "No per-epoch progress");

  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint against ground-truth masks");
  eval->add_option("--checkpoint", checkpoint)->required()->check(CLI::ExistingFile);
  eval->add_option("--data", data)->required();
  eval->add_option("--out", out, "Directory for metrics.csv and summary.txt");

  auto* predict = app.add_subcommand("predict", "Write predicted masks for every case");
  predict->add_option("--checkpoint", checkpoint)->required()->check(CLI::ExistingFile);
  predict->add_option("--data", data)->required();
  predict->add_option("--out", out)->required();
  predict->add_flag("--pgm", pgm, "Also write one PGM image per slice");

  auto* inspect = app.add_subcommand("inspect", "Print the layer shape table and parameter count");
  inspect->add_option("--config", config, "Run config (JSON); defaults when omitted");
  inspect->add_option("--set", patch, "JSON merge patch applied to the config");
  inspect->add_flag("--csv", csv, "Print the table as CSV");
  inspect->add_option("--out", out, "Directory for table, connectivity and count files");

  auto* grad = app.add_subcommand("gradcheck", "Finite-difference gradient checks");
  grad->add_option("--op", op, "Primitive op to check");
  grad->add_flag("--all", all, "Check every primitive op");
  grad->add_flag("--full-network-small", network, "Check a small hyper-dense network");
  grad->add_option("--seed", seed);
  grad->add_option("--instances", instances, "Random instances per op");

  mdu_synth_options synth_opt;
  mdu_synth_defaults(&synth_opt);
  bool plain = false;
  std::size_t size = synth_opt.height;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic multi-modal dataset");
  synth->add_option("--out", out)->required();
  synth->add_option("--seed", synth_opt.seed);
  synth->add_option("--cases", synth_opt.num_cases, "Training cases");
  synth->add_option("--val-cases", synth_opt.val_cases, "Validation cases (train/ and val/ split)");
  synth->add_option("--size", size, "Slice height and width");
  synth->add_option("--depth", synth_opt.depth, "Slices per case; 0 draws 2 or 4");
  synth->add_option("--modalities", synth_opt.num_modalities);
  synth->add_flag("--plain", plain, "Lesion visible in every modality");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  if (*train) return cmd_train(config, data, val, out, quiet);
  if (*eval) return cmd_eval(checkpoint, data, out);
  if (*predict) return cmd_predict(checkpoint, data, out, pgm);
  if (*inspect) return cmd_inspect(config, patch, csv, out);
  if (*grad) return cmd_gradcheck(op, network, all, seed, instances);
  if (*synth) {
    synth_opt.height = synth_opt.width = size;
    synth_opt.conjunctive = plain ? 0 : 1;
    const mdu_status s = mdu_synth(out.c_str(), &synth_opt);
    if (s != MDU_OK) return fail(s);
    return 0;
  }
  return 2;
}
