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

// Command-line front end. Everything goes through the C API in sllen.h so
// this binary doubles as a smoke test for the shared library surface.
//
// Exit codes: 0 success, 1 usage/config/IO error, 2 empty dataset,
// 3 non-finite loss.

#include <cstdio>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "sllen/sllen.h"

namespace {

// Ordered key=value assignments collected while parsing, applied to the
// config document after the --config file so flags win.
using Assignments = std::vector<std::pair<std::string, std::string>>;

void map_flag(CLI::App* cmd, Assignments& out, const std::string& flag,
              std::string key, const std::string& desc) {
  cmd->add_option_function<std::string>(
      flag, [&out, key = std::move(key)](const std::string& v) { out.emplace_back(key, v); },
      desc);
}

int exit_code(sllen_status s) {
  switch (s) {
    case SLLEN_OK:
      return 0;
    case SLLEN_ERR_EMPTY_DATASET:
      return 2;
    case SLLEN_ERR_NUMERIC:
      return 3;
    default:
      return 1;
  }
}

int fail(const char* context) {
  std::fprintf(stderr, "error: %s: %s\n", context, sllen_last_error());
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"low-light image enhancement with semantic guidance"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string("sllen ") + sllen_version());

  std::string config_path;
  app.add_option("--config", config_path, "JSON config file (flags override it)");

  Assignments sets;
  map_flag(&app, sets, "--seed", "seed", "seed for init and batch order");
  map_flag(&app, sets, "--out", "out", "output directory (default: run)");
  app.add_option_function<std::vector<std::string>>(
      "--set",
      [&sets](const std::vector<std::string>& kvs) {
        for (const std::string& kv : kvs) {
          size_t eq = kv.find('=');
          if (eq == std::string::npos)
            throw CLI::ValidationError("--set", "expected key=value, got \"" + kv + "\"");
          sets.emplace_back(kv.substr(0, eq), kv.substr(eq + 1));
        }
      },
      "extra config assignment key=value (repeatable)");

  CLI::App* train = app.add_subcommand("train", "fit the network on paired low/reference images");
  map_flag(train, sets, "--low-dir", "train.low_dir", "directory of low-light inputs");
  map_flag(train, sets, "--ref-dir", "train.ref_dir", "directory of normal-light references");
  map_flag(train, sets, "--labels-dir", "train.labels_dir", "directory of label maps (optional)");
  map_flag(train, sets, "--steps", "train.steps", "optimizer steps");
  map_flag(train, sets, "--batch-size", "train.batch_size", "images per step (default 6)");
  map_flag(train, sets, "--lr", "train.lr", "learning rate (default 1e-4)");
  map_flag(train, sets, "--patch", "train.patch", "square crop size, 0 = whole image");
  map_flag(train, sets, "--variant", "train.variant",
           "full | no_hsf | no_ief | unet (default full)");
  map_flag(train, sets, "--checkpoint-every", "train.checkpoint_every",
           "periodic checkpoint interval, 0 = final only");
  map_flag(train, sets, "--clip-norm", "train.clip_norm", "global gradient norm cap, 0 = off");
  map_flag(train, sets, "--resume", "train.resume", "checkpoint to continue from");

  CLI::App* enhance = app.add_subcommand("enhance", "run a trained network over a directory");
  map_flag(enhance, sets, "--checkpoint", "enhance.checkpoint", "trained weights or checkpoint");
  map_flag(enhance, sets, "--input-dir", "enhance.input_dir", "directory of images to enhance");
  map_flag(enhance, sets, "--output-dir", "enhance.output_dir",
           "PNG destination (default OUT/enhanced)");

  CLI::App* evaluate = app.add_subcommand("evaluate", "score predictions and write a metric CSV");
  map_flag(evaluate, sets, "--pred-dir", "evaluate.pred_dir", "directory of predictions");
  map_flag(evaluate, sets, "--ref-dir", "evaluate.ref_dir", "references (paired mode)");
  map_flag(evaluate, sets, "--low-dir", "evaluate.low_dir", "original inputs (unpaired mode)");
  map_flag(evaluate, sets, "--mode", "evaluate.mode", "paired | unpaired (default paired)");
  map_flag(evaluate, sets, "--labels-dir", "evaluate.labels_dir",
           "ground-truth label maps; enables the segmentation score");
  map_flag(evaluate, sets, "--report", "evaluate.report", "CSV path (default OUT/metrics.csv)");

  CLI::App* ablate =
      app.add_subcommand("ablate", "train and score every variant from one seed and data order");
  map_flag(ablate, sets, "--mode", "ablate.mode", "branch | loss (default branch)");
  map_flag(ablate, sets, "--low-dir", "train.low_dir", "directory of low-light inputs");
  map_flag(ablate, sets, "--ref-dir", "train.ref_dir", "directory of normal-light references");
  map_flag(ablate, sets, "--steps", "train.steps", "optimizer steps per variant");
  map_flag(ablate, sets, "--batch-size", "train.batch_size", "images per step");
  map_flag(ablate, sets, "--lr", "train.lr", "learning rate");
  map_flag(ablate, sets, "--patch", "train.patch", "square crop size, 0 = whole image");

  CLI::App* gradstat =
      app.add_subcommand("gradstat", "histogram of per-image average gradients");
  map_flag(gradstat, sets, "--input-dir", "gradstat.input_dir", "directory of images");
  map_flag(gradstat, sets, "--bins", "gradstat.bins", "histogram bins (default 64)");
  map_flag(gradstat, sets, "--report", "gradstat.report", "CSV path (default OUT/gradstat.csv)");

  CLI::App* decompose =
      app.add_subcommand("decompose", "illumination ratio maps for matched low/enhanced pairs");
  map_flag(decompose, sets, "--low-dir", "decompose.low_dir", "directory of low-light inputs");
  map_flag(decompose, sets, "--enhanced-dir", "decompose.enhanced_dir",
           "directory of enhanced outputs");

  for (CLI::App* sub : {train, enhance, evaluate, ablate, gradstat, decompose})
    sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);  // prints the message
    return 1;
  }

  sllen_config* cfg = sllen_config_new();
  if (!cfg) return fail("config");
  struct ConfigGuard {
    sllen_config* c;
    ~ConfigGuard() { sllen_config_free(c); }
  } guard{cfg};

  if (!config_path.empty() &&
      sllen_config_load_file(cfg, config_path.c_str()) != SLLEN_OK)
    return fail(config_path.c_str());
  for (const auto& [key, value] : sets)
    if (sllen_config_set(cfg, key.c_str(), value.c_str()) != SLLEN_OK)
      return fail(key.c_str());

  sllen_status status = SLLEN_ERR_INTERNAL;
  char* summary = nullptr;
  const std::string name = app.get_subcommands().front()->get_name();
  if (name == "train")
    status = sllen_train(cfg, &summary);
  else if (name == "enhance")
    status = sllen_enhance(cfg, &summary);
  else if (name == "evaluate")
    status = sllen_evaluate(cfg, &summary);
  else if (name == "ablate")
    status = sllen_ablate(cfg, &summary);
  else if (name == "gradstat")
    status = sllen_gradstat(cfg, &summary);
  else if (name == "decompose")
    status = sllen_decompose(cfg, &summary);

  if (status != SLLEN_OK) {
    std::fprintf(stderr, "error: %s\n", sllen_last_error());
  } else if (summary) {
    std::fputs(summary, stdout);
  }
  sllen_free(summary);
  return exit_code(status);
}
