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

#include "mdunet/mdunet.h"

#include <cstdlib>
#include <cstring>
#include <memory>
#include <string>

#include "data/container.hpp"
#include "gradcheck/gradcheck.hpp"
#include "metrics/metrics.hpp"
#include "run/checkpoint.hpp"
#include "run/commands.hpp"
#include "run/run_config.hpp"
#include "tensor/errors.hpp"

struct mdu_config {
  mdu::RunConfig rc;
};

struct mdu_model {
  std::unique_ptr<mdu::Network<float>> net;
  std::uint64_t seed = 0;
};

namespace {

thread_local std::string g_last_error;

template <typename F>
mdu_status guarded(F&& f) {
  try {
    f();
    g_last_error.clear();
    return MDU_OK;
  } catch (const mdu::ConfigError& e) {
    g_last_error = e.what();
    return MDU_ERR_CONFIG;
  } catch (const mdu::DataError& e) {
    g_last_error = e.what();
    return MDU_ERR_DATA;
  } catch (const mdu::DivergenceError& e) {
    g_last_error = e.what();
    return MDU_ERR_DIVERGENCE;
  } catch (const mdu::ShapeError& e) {
    g_last_error = e.what();
    return MDU_ERR_SHAPE;
  } catch (const mdu::ValueError& e) {
    g_last_error = e.what();
    return MDU_ERR_VALUE;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return MDU_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown error";
    return MDU_ERR_INTERNAL;
  }
}

char* dup(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void emit(char** out, const std::string& s) {
  if (out) *out = dup(s);
}

std::string str(const char* s) { return s ? s : ""; }

mdu_status argument_error(const char* what) {
  g_last_error = what;
  return MDU_ERR_ARGUMENT;
}

}  // namespace

extern "C" {

const char* mdu_version(void) { return "1.0.0"; }

const char* mdu_last_error(void) { return g_last_error.c_str(); }

void mdu_string_free(char* s) { std::free(s); }

mdu_status mdu_config_default(mdu_config** out) {
  if (!out) return argument_error("mdu_config_default: null output");
  return guarded([&] { *out = new mdu_config{}; });
}

mdu_status mdu_config_parse(const char* json_text, mdu_config** out) {
  if (!json_text || !out) return argument_error("mdu_config_parse: null argument");
  return guarded([&] {
    auto cfg = std::make_unique<mdu_config>();
    cfg->rc = mdu::parse_run_config_text(json_text);
    *out = cfg.release();
  });
}

mdu_status mdu_config_load(const char* path, mdu_config** out) {
  if (!path || !out) return argument_error("mdu_config_load: null argument");
  return guarded([&] {
    std::string text;
    try {
      text = mdu::read_file(path);
    } catch (const mdu::DataError& e) {
      throw mdu::ConfigError(e.what());
    }
    auto cfg = std::make_unique<mdu_config>();
    cfg->rc = mdu::parse_run_config_text(text, path);
    *out = cfg.release();
  });
}

mdu_status mdu_config_patch(mdu_config* cfg, const char* json_patch) {
  if (!cfg || !json_patch) return argument_error("mdu_config_patch: null argument");
  return guarded([&] {
    nlohmann::json patch;
    try {
      patch = nlohmann::json::parse(json_patch);
    } catch (const nlohmann::json::parse_error& e) {
      throw mdu::ConfigError(std::string("config patch is not valid JSON: ") + e.what());
    }
    nlohmann::json j = mdu::to_json(cfg->rc);
    j.merge_patch(patch);
    cfg->rc = mdu::parse_run_config(j);
  });
}

mdu_status mdu_config_apply_env(mdu_config* cfg) {
  if (!cfg) return argument_error("mdu_config_apply_env: null config");
  return guarded([&] {
    if (const auto seed = mdu::seed_from_env()) {
      cfg->rc.seed = *seed;
      cfg->rc.train.seed = *seed;
    }
  });
}

mdu_status mdu_config_to_json(const mdu_config* cfg, char** out) {
  if (!cfg || !out) return argument_error("mdu_config_to_json: null argument");
  return guarded([&] { *out = dup(mdu::to_json(cfg->rc).dump(2) + "\n"); });
}

uint64_t mdu_config_seed(const mdu_config* cfg) { return cfg ? cfg->rc.seed : 0; }

void mdu_config_free(mdu_config* cfg) { delete cfg; }

mdu_status mdu_model_create(const mdu_config* cfg, mdu_model** out) {
  if (!cfg || !out) return argument_error("mdu_model_create: null argument");
  return guarded([&] {
    auto m = std::make_unique<mdu_model>();
    m->net = std::make_unique<mdu::Network<float>>(cfg->rc.network, cfg->rc.seed);
    m->seed = cfg->rc.seed;
    *out = m.release();
  });
}

mdu_status mdu_model_load(const char* checkpoint_path, mdu_model** out) {
  if (!checkpoint_path || !out) return argument_error("mdu_model_load: null argument");
  return guarded([&] {
    mdu::Checkpoint ck = mdu::load_checkpoint(checkpoint_path);
    auto m = std::make_unique<mdu_model>();
    m->net = std::move(ck.network);
    m->seed = ck.seed;
    *out = m.release();
  });
}

mdu_status mdu_model_save(const mdu_model* model, const char* checkpoint_path) {
  if (!model || !checkpoint_path) return argument_error("mdu_model_save: null argument");
  return guarded([&] { mdu::save_checkpoint(checkpoint_path, *model->net, model->seed, 0); });
}

size_t mdu_model_parameter_count(const mdu_model* model) {
  return model ? model->net->parameter_count() : 0;
}

size_t mdu_model_num_modalities(const mdu_model* model) {
  return model ? model->net->config().num_modalities() : 0;
}

mdu_status mdu_model_predict(mdu_model* model, const float* inputs, size_t batch,
                             uint8_t* mask_out) {
  if (!model || !inputs || !mask_out || batch == 0) {
    return argument_error("mdu_model_predict: null argument or empty batch");
  }
  return guarded([&] {
    const auto& cfg = model->net->config();
    const std::size_t plane = cfg.height * cfg.width;
    mdu::Graph<float> g;
    std::vector<mdu::Var> in;
    for (std::size_t m = 0; m < cfg.num_modalities(); ++m) {
      const float* src = inputs + m * batch * plane;
      in.push_back(g.constant(mdu::Tensor<float>(mdu::Shape{batch, 1, cfg.height, cfg.width},
                                                 std::vector<float>(src, src + batch * plane))));
    }
    const auto& p = g.value(model->net->forward(g, in, false));
    const std::size_t classes = cfg.num_classes;
    for (std::size_t b = 0; b < batch; ++b) {
      for (std::size_t k = 0; k < plane; ++k) {
        std::size_t best = 0;
        for (std::size_t c = 1; c < classes; ++c) {
          if (p[(b * classes + c) * plane + k] > p[(b * classes + best) * plane + k]) best = c;
        }
        mask_out[b * plane + k] = static_cast<uint8_t>(best);
      }
    }
  });
}

void mdu_model_free(mdu_model* model) { delete model; }

mdu_status mdu_inspect(const mdu_config* cfg, char** table_text, char** table_csv,
                       char** connectivity, uint64_t* parameter_count) {
  if (!cfg) return argument_error("mdu_inspect: null config");
  return guarded([&] {
    const mdu::InspectReport r = mdu::run_inspect(cfg->rc.network);
    emit(table_text, r.table_text);
    emit(table_csv, r.table_csv);
    emit(connectivity, r.connectivity);
    if (parameter_count) *parameter_count = r.parameter_count;
  });
}

mdu_status mdu_train(const mdu_config* cfg, const char* data_dir, const char* val_dir,
                     const char* out_dir, mdu_progress_fn progress, void* user) {
  if (!cfg) return argument_error("mdu_train: null config");
  return guarded([&] {
    mdu::RunConfig rc = cfg->rc;
    if (!str(data_dir).empty()) {
      rc.train_data = data_dir;
      rc.val_data.clear();
    }
    if (!str(val_dir).empty()) rc.val_data = val_dir;
    if (!str(out_dir).empty()) rc.out_dir = out_dir;
    mdu::Progress cb;
    if (progress) cb = [progress, user](const std::string& line) { progress(line.c_str(), user); };
    mdu::run_train(rc, cb);
  });
}

mdu_status mdu_eval(const char* checkpoint_path, const char* data_dir, const char* out_dir,
                    char** metrics_csv, char** summary) {
  if (!checkpoint_path || !data_dir) return argument_error("mdu_eval: null argument");
  return guarded([&] {
    const mdu::MetricsReport r = mdu::run_eval(checkpoint_path, data_dir, str(out_dir));
    emit(metrics_csv, r.csv());
    emit(summary, r.summary(std::filesystem::path(checkpoint_path).filename().string()));
  });
}

mdu_status mdu_predict(const char* checkpoint_path, const char* data_dir, const char* out_dir,
                       int write_pgm, size_t* cases_done) {
  if (!checkpoint_path || !data_dir || !out_dir) {
    return argument_error("mdu_predict: null argument");
  }
  return guarded([&] {
    const std::size_t n = mdu::run_predict(checkpoint_path, data_dir, out_dir, write_pgm != 0);
    if (cases_done) *cases_done = n;
  });
}

mdu_status mdu_gradcheck_ops(char** names) {
  if (!names) return argument_error("mdu_gradcheck_ops: null output");
  return guarded([&] {
    std::string s;
    for (const auto& op : mdu::gradcheck_ops()) s += (s.empty() ? "" : " ") + op;
    *names = dup(s);
  });
}

mdu_status mdu_gradcheck_op(const char* op, uint64_t seed, size_t instances,
                            double* max_rel_error, int* passed, char** report) {
  if (!op) return argument_error("mdu_gradcheck_op: null op");
  return guarded([&] {
    const mdu::GradcheckResult r = mdu::gradcheck_op(op, seed, instances);
    if (max_rel_error) *max_rel_error = r.max_rel_error;
    if (passed) *passed = r.passed ? 1 : 0;
    emit(report, r.line());
  });
}

mdu_status mdu_gradcheck_network_small(uint64_t seed, double* max_rel_error, int* passed,
                                       char** report) {
  return guarded([&] {
    const mdu::GradcheckResult r = mdu::gradcheck_full_network_small(seed);
    if (max_rel_error) *max_rel_error = r.max_rel_error;
    if (passed) *passed = r.passed ? 1 : 0;
    emit(report, r.line());
  });
}

void mdu_synth_defaults(mdu_synth_options* opt) {
  if (!opt) return;
  const mdu::SynthOptions d;
  opt->seed = d.seed;
  opt->num_cases = d.num_cases;
  opt->val_cases = 0;
  opt->height = d.height;
  opt->width = d.width;
  opt->depth = d.depth;
  opt->num_modalities = d.num_modalities;
  opt->conjunctive = d.conjunctive ? 1 : 0;
}

mdu_status mdu_synth(const char* out_dir, const mdu_synth_options* opt) {
  if (!out_dir || !opt) return argument_error("mdu_synth: null argument");
  return guarded([&] {
    mdu::SynthOptions o;
    o.seed = opt->seed;
    o.num_cases = opt->num_cases;
    o.height = opt->height;
    o.width = opt->width;
    o.depth = opt->depth;
    o.num_modalities = opt->num_modalities;
    o.conjunctive = opt->conjunctive != 0;
    mdu::run_synth(out_dir, o, opt->val_cases);
  });
}

mdu_status mdu_metrics(const uint8_t* reference, const uint8_t* segmentation, size_t depth,
                       size_t height, size_t width, const double spacing[3], double* dsc,
                       double* mhd_mm, int* mhd_defined, double* vs, int* vs_defined) {
  if (!reference || !segmentation) return argument_error("mdu_metrics: null mask");
  return guarded([&] {
    const std::size_t n = depth * height * width;
    const mdu::SegmentationMask::Spacing sp =
        spacing ? mdu::SegmentationMask::Spacing{spacing[0], spacing[1], spacing[2]}
                : mdu::SegmentationMask::Spacing{1.0, 1.0, 1.0};
    const mdu::SegmentationMask ref({depth, height, width},
                                    std::vector<std::uint8_t>(reference, reference + n), sp);
    const mdu::SegmentationMask seg({depth, height, width},
                                    std::vector<std::uint8_t>(segmentation, segmentation + n), sp);
    if (dsc) *dsc = mdu::dsc(ref, seg);
    const auto h = mdu::mhd(ref, seg);
    if (mhd_mm) *mhd_mm = h.value_or(0.0);
    if (mhd_defined) *mhd_defined = h ? 1 : 0;
    const auto v = mdu::vs(ref, seg);
    if (vs) *vs = v.value_or(0.0);
    if (vs_defined) *vs_defined = v ? 1 : 0;
  });
}

}  // extern "C"
