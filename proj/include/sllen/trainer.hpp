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
#include <unordered_map>
#include <vector>

#include "sllen/dataset.hpp"
#include "sllen/losses.hpp"
#include "sllen/net.hpp"
#include "sllen/ssn.hpp"

namespace sllen {

struct TrainConfig {
  double lr = 1e-4;
  int batch_size = 6;
  int64_t steps = 0;
  int patch = 0;  // random square crop; 0 trains on full frames
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  double clip_norm = 0;  // global-norm gradient clip; 0 disables
  int64_t checkpoint_every = 0;  // extra checkpoints; the final step always gets one
  uint64_t seed = 0;

  NetConfig net;
  SsnConfig ssn;
  FeatureExtractorConfig perceptual;
  LossWeights loss_weights;

  void validate() const;  // ConfigError / InvalidParam on nonsense values
};

std::string train_config_json(const TrainConfig& cfg);

struct RunLog {
  std::vector<LossBreakdown> rows;  // rows[i] belongs to step start+i
  std::vector<double> step_seconds;
  int64_t first_step = 0;
  std::string config_json;
  std::string final_checkpoint;
};

// Owns the enhancement network, the frozen semantic network, the frozen
// perceptual extractor, and the optimizer state.
class Trainer {
 public:
  explicit Trainer(const TrainConfig& cfg);

  SllenNet& net() { return *net_; }
  // Null for the plain encoder/decoder variant, which never consults it.
  const Ssn* ssn() const { return ssn_.get(); }
  const FeatureExtractor& extractor() const { return feat_; }
  int64_t step() const { return step_; }

  // One forward/backward/ADAM update over a batch with references. Returns
  // the pre-update loss breakdown averaged over the batch.
  LossBreakdown train_step(const Batch& batch);

  // Run cfg.steps optimizer steps over shuffled epochs of `pairs`. Writes
  // config.snapshot, log.csv, and ckpt-<step>.bin files under run_dir
  // (pass "" to keep everything in memory). resume_ckpt restarts from a
  // saved checkpoint and continues its step counter.
  RunLog fit(const std::vector<SamplePair>& pairs, const std::string& run_dir,
             const std::string& resume_ckpt = "");

  void save_checkpoint(const std::string& path) const;
  void load_checkpoint(const std::string& path);

 private:
  TrainConfig cfg_;
  std::unique_ptr<SllenNet> net_;
  std::unique_ptr<Ssn> ssn_;
  FeatureExtractor feat_;
  std::vector<Parameter*> params_;
  std::vector<Tensor> adam_m_, adam_v_;
  int64_t adam_t_ = 0;
  int64_t step_ = 0;

  // Frozen-input caches keyed by sample id + crop rectangle.
  std::unordered_map<std::string, SemanticOutputs> sem_cache_;
  std::unordered_map<std::string, std::vector<Tensor>> feat_cache_;

  const SemanticOutputs* semantic_for(const std::string& id, const CropInfo& crop,
                                      const ImageTensor& low);
  const std::vector<Tensor>* features_for(const std::string& id, const CropInfo& crop,
                                          const ImageTensor& ref);
  void adam_update();
};

// Pad to the network's required multiple, run one forward (with semantic
// inputs when the variant consumes them), and crop back. ssn may be null
// only for variants that ignore it.
ImageTensor enhance_image(SllenNet& net, const Ssn* ssn, const ImageTensor& low);

struct AblationRow {
  std::string name;
  int64_t params = 0;
  double psnr = 0, ssim = 0, loe = 0, ceiq = 0;
};

// Train every architecture variant from the same seed and data order, then
// score each on a deterministic 20% hold-out (stem-hash split). The rows
// land in run_dir/ablation.csv.
std::vector<AblationRow> run_ablation(const TrainConfig& base, const std::vector<SamplePair>& pairs,
                                      const std::string& run_dir);

// Same harness, but toggling loss terms on the FULL variant: all-on and
// each of lambda_kd / lambda_itv / lambda_gra zeroed.
std::vector<AblationRow> loss_ablation(const TrainConfig& base, const std::vector<SamplePair>& pairs,
                                       const std::string& run_dir);

std::string ablation_csv(const std::vector<AblationRow>& rows);

struct TimingRow {
  int size = 0;
  double median_seconds = 0;
};

// Median forward wall time per square input size, after one warm-up pass.
std::vector<TimingRow> time_inference(SllenNet& net, const Ssn* ssn, const std::vector<int>& sizes,
                                      int repeats);

}  // namespace sllen
