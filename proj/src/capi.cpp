/*
 * Copyright 2026 SLLEN Contributors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "sllen/sllen.h"

#include <cstdlib>
#include <cstring>
#include <sstream>
#include <string>

#include "sllen/pipeline.hpp"

namespace {

thread_local std::string g_last_error;

sllen_status status_of(sllen::Err code) {
  using sllen::Err;
  switch (code) {
    case Err::ConfigError:
    case Err::InvalidParam:
    case Err::TokenBudgetExceeded:
    case Err::PatchLargerThanImage:
      return SLLEN_ERR_CONFIG;
    case Err::EmptyDataset:
    case Err::NoReference:
      return SLLEN_ERR_EMPTY_DATASET;
    case Err::NonFiniteLoss:
      return SLLEN_ERR_NUMERIC;
    case Err::FileNotFound:
    case Err::UnsupportedFormat:
    case Err::CorruptImage:
    case Err::IoError:
    case Err::WeightLoadError:
      return SLLEN_ERR_IO;
    case Err::DegenerateShape:
    case Err::ShapeMismatch:
    case Err::LengthMismatch:
    case Err::LabelOutOfRange:
    case Err::ImageTooSmall:
      return SLLEN_ERR_SHAPE;
    case Err::Internal:
      return SLLEN_ERR_INTERNAL;
  }
  return SLLEN_ERR_INTERNAL;
}

template <class F>
sllen_status guarded(F&& body) {
  try {
    body();
    return SLLEN_OK;
  } catch (const sllen::Error& e) {
    g_last_error = e.what();
    return status_of(e.code());
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return SLLEN_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown error";
    return SLLEN_ERR_INTERNAL;
  }
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out) std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void emit(char** slot, const std::string& text) {
  if (slot) *slot = dup_string(text);
}

sllen_status require(const void* p, const char* what) {
  if (p) return SLLEN_OK;
  g_last_error = std::string("null ") + what;
  return SLLEN_ERR_CONFIG;
}

}  // namespace

struct sllen_config {
  sllen::ConfigDoc doc = sllen::ConfigDoc::defaults();
};

struct sllen_enhancer {
  sllen::Enhancer impl;
};

extern "C" {

const char* sllen_last_error(void) { return g_last_error.c_str(); }

const char* sllen_version(void) { return "0.3.0"; }

void sllen_free(char* text) { std::free(text); }

sllen_config* sllen_config_new(void) {
  try {
    return new sllen_config();
  } catch (...) {
    g_last_error = "out of memory";
    return nullptr;
  }
}

void sllen_config_free(sllen_config* cfg) { delete cfg; }

sllen_status sllen_config_load_file(sllen_config* cfg, const char* path) {
  if (sllen_status s = require(cfg, "config"); s != SLLEN_OK) return s;
  if (sllen_status s = require(path, "path"); s != SLLEN_OK) return s;
  return guarded([&] { cfg->doc = sllen::ConfigDoc::from_file(path); });
}

sllen_status sllen_config_set(sllen_config* cfg, const char* key, const char* value) {
  if (sllen_status s = require(cfg, "config"); s != SLLEN_OK) return s;
  if (sllen_status s = require(key, "key"); s != SLLEN_OK) return s;
  if (sllen_status s = require(value, "value"); s != SLLEN_OK) return s;
  return guarded([&] { cfg->doc.set(key, value); });
}

sllen_status sllen_config_dump(const sllen_config* cfg, char** out_text) {
  if (sllen_status s = require(cfg, "config"); s != SLLEN_OK) return s;
  if (sllen_status s = require(out_text, "output slot"); s != SLLEN_OK) return s;
  return guarded([&] { *out_text = dup_string(cfg->doc.text()); });
}

sllen_status sllen_train(const sllen_config* cfg, char** out_summary) {
  if (sllen_status s = require(cfg, "config"); s != SLLEN_OK) return s;
  return guarded([&] {
    sllen::RunLog log = sllen::train_run(cfg->doc.resolve());
    std::ostringstream os;
    os << "trained " << log.rows.size() << " step(s)";
    if (!log.rows.empty()) {
      os.precision(6);
      os << ", final total loss " << log.rows.back().total;
    }
    os << "\ncheckpoint: " << log.final_checkpoint << "\n";
    emit(out_summary, os.str());
  });
}

sllen_status sllen_enhance(const sllen_config* cfg, char** out_summary) {
  if (sllen_status s = require(cfg, "config"); s != SLLEN_OK) return s;
  return guarded([&] {
    int n = sllen::enhance_run(cfg->doc.resolve());
    emit(out_summary, "enhanced " + std::to_string(n) + " image(s)\n");
  });
}

sllen_status sllen_evaluate(const sllen_config* cfg, char** out_summary) {
  if (sllen_status s = require(cfg, "config"); s != SLLEN_OK) return s;
  return guarded([&] {
    sllen::MetricReport rep = sllen::evaluate_run(cfg->doc.resolve());
    emit(out_summary, rep.csv());
  });
}

sllen_status sllen_ablate(const sllen_config* cfg, char** out_summary) {
  if (sllen_status s = require(cfg, "config"); s != SLLEN_OK) return s;
  return guarded([&] {
    std::vector<sllen::AblationRow> rows = sllen::ablate_run(cfg->doc.resolve());
    emit(out_summary, sllen::ablation_csv(rows));
  });
}

sllen_status sllen_gradstat(const sllen_config* cfg, char** out_summary) {
  if (sllen_status s = require(cfg, "config"); s != SLLEN_OK) return s;
  return guarded([&] {
    sllen::GradStat st = sllen::gradstat_run(cfg->doc.resolve());
    std::ostringstream os;
    os.precision(12);
    os << "images: " << st.images << "\nmean average gradient: " << st.mean << "\n";
    emit(out_summary, os.str());
  });
}

sllen_status sllen_decompose(const sllen_config* cfg, char** out_summary) {
  if (sllen_status s = require(cfg, "config"); s != SLLEN_OK) return s;
  return guarded([&] {
    std::vector<sllen::DecomposeRow> rows = sllen::decompose_run(cfg->doc.resolve());
    std::ostringstream os;
    os << "id,itv\n";
    os.precision(12);
    for (const sllen::DecomposeRow& r : rows) os << r.id << ',' << r.itv << '\n';
    emit(out_summary, os.str());
  });
}

sllen_enhancer* sllen_enhancer_open(const sllen_config* cfg) {
  if (require(cfg, "config") != SLLEN_OK) return nullptr;
  sllen_enhancer* out = nullptr;
  sllen_status s = guarded([&] {
    out = new sllen_enhancer{sllen::open_enhancer(cfg->doc.resolve())};
  });
  return s == SLLEN_OK ? out : nullptr;
}

sllen_status sllen_enhancer_run_file(sllen_enhancer* e, const char* in_path,
                                     const char* out_path) {
  if (sllen_status s = require(e, "enhancer"); s != SLLEN_OK) return s;
  if (sllen_status s = require(in_path, "input path"); s != SLLEN_OK) return s;
  if (sllen_status s = require(out_path, "output path"); s != SLLEN_OK) return s;
  return guarded([&] { e->impl.enhance_file(in_path, out_path); });
}

void sllen_enhancer_close(sllen_enhancer* e) { delete e; }

}  // extern "C"
