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

#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "sllen/metrics.hpp"
#include "sllen/trainer.hpp"

namespace sllen {

// Fully resolved settings for one command invocation. Everything lands under
// `out`; the global seed drives training init and batch order while the
// frozen networks keep their own seeds.
struct RunConfig {
  uint64_t seed = 0;
  std::string out = "run";

  std::string low_dir, ref_dir, labels_dir;  // training data
  std::string resume;                        // checkpoint to continue from
  TrainConfig train;

  std::string enh_checkpoint, enh_input, enh_output;

  std::string eval_pred, eval_ref, eval_low, eval_labels, eval_report;
  bool eval_paired = true;

  std::string ablate_mode = "branch";  // or "loss"

  std::string grad_input, grad_report;
  int grad_bins = 64;

  std::string dec_low, dec_enhanced;
};

// JSON config document with strict key checking. Unknown keys fail at load
// or at set(); flag overrides go through set() with dotted paths such as
// "train.steps" or "evaluate.mode".
class ConfigDoc {
 public:
  static ConfigDoc defaults();
  static ConfigDoc from_text(const std::string& text, const std::string& origin);
  static ConfigDoc from_file(const std::string& path);

  void set(const std::string& dotted_key, const std::string& value);
  RunConfig resolve() const;
  std::string text() const;

 private:
  ConfigDoc();
  struct Impl;
  std::shared_ptr<Impl> impl_;
};

// train: fit on the stem-paired dataset, writing config.snapshot, log.csv
// and checkpoints under cfg.out.
RunLog train_run(const RunConfig& cfg);

// Holds a loaded network (+ frozen semantic net when needed) for repeated
// enhancement. Accepts trainer checkpoints and bare weight files.
class Enhancer {
 public:
  Enhancer(const std::string& checkpoint, const SsnConfig& ssn_cfg);
  ~Enhancer();
  Enhancer(Enhancer&&) noexcept;
  Enhancer& operator=(Enhancer&&) noexcept;

  ImageTensor enhance(const ImageTensor& low);
  void enhance_file(const std::string& in_path, const std::string& out_path);
  // Enhances every image in in_dir to PNGs with the same stems; returns the
  // number written.
  int enhance_dir(const std::string& in_dir, const std::string& out_dir);

  SllenNet& net();
  const Ssn* ssn() const;

 private:
  std::unique_ptr<SllenNet> net_;
  std::unique_ptr<Ssn> ssn_;
};

Enhancer open_enhancer(const RunConfig& cfg);
int enhance_run(const RunConfig& cfg);  // returns image count

// evaluate: metric CSV for stem-matched prediction/reference (or /low)
// directories; written to cfg.eval_report.
MetricReport evaluate_run(const RunConfig& cfg);

std::vector<AblationRow> ablate_run(const RunConfig& cfg);  // csv + bar plot under cfg.out

struct GradStat {
  std::vector<double> edges;    // grad_bins + 1 ascending edges
  std::vector<int64_t> counts;  // per-bin image counts
  double mean = 0;              // dataset mean of per-image average gradients
  int64_t images = 0;
};

GradStat gradstat_run(const RunConfig& cfg);

struct DecomposeRow {
  std::string id;
  double itv = 0;
};

// decompose: per stem-matched (low, enhanced) pair, write the raw
// illumination ratio blob and a normalized preview PNG; returns the
// smoothness loss of each map.
std::vector<DecomposeRow> decompose_run(const RunConfig& cfg);

}  // namespace sllen
