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

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>

#include "data/synth.hpp"
#include "metrics/metrics.hpp"
#include "run/run_config.hpp"
#include "train/trainer.hpp"

namespace mdu {

using Progress = std::function<void(const std::string& line)>;

// Artifact names inside a run directory.
inline constexpr const char* kCheckpointFile = "checkpoint.mdp";
inline constexpr const char* kLogFile = "log.csv";
inline constexpr const char* kTimingFile = "timing.csv";
inline constexpr const char* kManifestFile = "manifest.json";

// Resolves the train/val case directories: explicit paths win, otherwise a
// data directory with train/ and val/ subdirectories is split accordingly.
void resolve_data_dirs(RunConfig& rc);

// Trains per `rc`, writing checkpoint, log, timing and manifest into
// rc.out_dir. The manifest is written before the first epoch.
TrainLog run_train(const RunConfig& rc, const Progress& progress = {});

// Evaluates a checkpoint on every case of `data_dir`. When `out_dir` is
// non-empty, writes metrics.csv and summary.txt there.
MetricsReport run_eval(const std::filesystem::path& checkpoint,
                       const std::filesystem::path& data_dir,
                       const std::filesystem::path& out_dir);

// Writes <case>.mdt (input volumes with the predicted mask) per case and,
// when asked, one PGM per slice. Returns the number of cases processed.
std::size_t run_predict(const std::filesystem::path& checkpoint,
                        const std::filesystem::path& data_dir,
                        const std::filesystem::path& out_dir, bool write_pgm);

struct InspectReport {
  std::string table_text;
  std::string table_csv;
  std::string connectivity;
  std::size_t parameter_count = 0;
};

InspectReport run_inspect(const NetworkConfig& cfg);

// Writes synthetic cases as <id>.mdt; with val_cases > 0 the directory gets
// train/ and val/ subdirectories.
void run_synth(const std::filesystem::path& out_dir, const SynthOptions& options,
               std::size_t val_cases);

// Binary P5 image with foreground 255.
std::string encode_pgm(const std::uint8_t* mask, std::size_t h, std::size_t w);

}  // namespace mdu
