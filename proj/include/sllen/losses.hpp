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
#include <string>
#include <vector>

#include "sllen/autodiff.hpp"
#include "sllen/net.hpp"
#include "sllen/tensor.hpp"

namespace sllen {

// Frozen feature extractor backing the perceptual loss. Three flavors:
//   "identity"  features == the image itself (perceptual loss == MSE)
//   "random"    seeded random 3-stage strided conv stack, tapped after each
//               stage's ReLU
//   "file"      conv stack loaded from a weight container
// The extractor never trains; its tensors are plain constants fed onto the
// tape with requires_grad off.
struct FeatureExtractorConfig {
  std::string kind = "random";
  std::string weights_path;  // for kind == "file"
  std::uint64_t seed = 0;
};

class FeatureExtractor {
 public:
  static FeatureExtractor make(const FeatureExtractorConfig& cfg);
  static FeatureExtractor identity();
  static FeatureExtractor seeded(std::uint64_t seed);
  static FeatureExtractor from_file(const std::string& path);

  bool is_identity() const { return stages_.empty(); }

  // Tap activations for a (3,H,W) image, one tensor per stage (or the image
  // itself for the identity extractor).
  std::vector<Tensor> features(const Tensor& img) const;
  std::vector<ad::Value> features(ad::Tape& tape, ad::Value img) const;

  std::uint64_t fingerprint() const;
  void save_weights(const std::string& path) const;

 private:
  struct Stage {
    Tensor w, b;
  };
  std::vector<Stage> stages_;
};

struct LossWeights {
  double lambda_kd = 1.0;
  double lambda_itv = 5.0;
  double lambda_gra = 1.0;
  double G = 0.051;
  double huber_delta = 1.0;
};

struct LossBreakdown {
  double l_s = 0, l_vgg = 0, l_kd = 0, l_itv = 0, l_gra = 0, total = 0;

  static std::string csv_header();  // "step,l_s,l_vgg,l_kd,l_itv,l_gra,total"
  std::string csv_row(std::int64_t step) const;
};

// Raises NonFiniteLoss naming the first non-finite term.
void check_finite(const LossBreakdown& b);

namespace losses {

// ---- plain (no tape) evaluation ----
double smooth_loss(const Tensor& O, const Tensor& GT, double delta = 1.0);
double perceptual_loss(const Tensor& O, const Tensor& GT, const FeatureExtractor& feat);
double kd_loss(const std::vector<Tensor>& E, const std::vector<Tensor>& D);
double itv_loss(const Tensor& U);
double gra_loss(const std::vector<Tensor>& batch_O, double G);

// Full breakdown for one image. U is derived internally from (low, trace.O).
LossBreakdown total_loss(const ForwardTrace& trace, const Tensor& GT, const Tensor& low,
                         const LossWeights& w, const FeatureExtractor& feat);

// ---- tape-side terms (per image; the trainer averages across the batch) ----
ad::Value smooth_term(ad::Tape& t, ad::Value O, ad::Value GT_in, double delta);
ad::Value perceptual_term(ad::Tape& t, const FeatureExtractor& feat, ad::Value O,
                          const std::vector<Tensor>& gt_feats);
ad::Value kd_term(ad::Tape& t, const std::vector<ad::Value>& E, const std::vector<ad::Value>& D);
ad::Value itv_term(ad::Tape& t, ad::Value low, ad::Value O, double eps = 1e-4);
ad::Value gra_term(ad::Tape& t, ad::Value O, double G);

// All five terms plus the weighted total for one image on one tape. gt_feats
// must come from the same extractor (cache them once per reference image).
struct TapeLossTerms {
  ad::Value l_s, l_vgg, l_kd, l_itv, l_gra, total;
};
TapeLossTerms total_loss_on_tape(ad::Tape& t, const SllenNet::Trace& trace, ad::Value low,
                                 const Tensor& GT, const std::vector<Tensor>& gt_feats,
                                 const LossWeights& w, const FeatureExtractor& feat);

// Reads the scalar term values of a built tape into a breakdown (values are
// available right after the forward pass, before backward()).
LossBreakdown read_terms(const ad::Tape& t, const TapeLossTerms& terms);

}  // namespace losses
}  // namespace sllen
