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

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "sllen/image.hpp"

namespace sllen {

// Peak signal-to-noise ratio in dB for a dynamic range of 1.0. Identical
// images (zero MSE) report the cap of 100 dB.
double psnr(const ImageTensor& O, const ImageTensor& GT);

// Single-scale SSIM on the luma channel: 11x11 Gaussian window, sigma 1.5,
// C1 = 0.01^2, C2 = 0.03^2, averaged over all fully-interior window
// positions. Raises ImageTooSmall below 11x11.
double ssim(const ImageTensor& O, const ImageTensor& GT);

// Lightness order error. Lightness is the per-pixel channel maximum; both
// maps are nearest-neighbor downsampled until the longer side is <= 100,
// then every ordered pixel pair is checked for an order flip. The sum of
// flips is divided by the pixel count (not the pair count), so values scale
// into the hundreds on real images.
double loe(const ImageTensor& low, const ImageTensor& O);

// 256-bin CDF histogram equalization. The mapping is built from the
// grayscale histogram and applied to every channel.
ImageTensor histeq(const ImageTensor& img);

// Contrast-quality score from three histogram-derived features:
//   f1  whole-image-statistics SSIM between the image and histeq(image)
//   f2  Shannon entropy (bits) of the 256-bin grayscale histogram
//   f3  cross-entropy (bits) between the image's histogram and its
//       equalized pair's, add-one smoothed, divided by 8
// score = f1 + 0.35*f2 - 0.5*f3. f1 deliberately uses global statistics so
// the score is a pure function of the histogram pair.
double ceiq(const ImageTensor& img);

struct MiouResult {
  std::vector<double> per_class;  // NaN for classes absent from both maps
  std::vector<bool> present;
  double mean = 0;
};

// Intersection-over-union per class, averaged over the classes that appear
// in either map. Label ids must lie in [0, num_classes).
MiouResult miou(const LabelMap& pred, const LabelMap& gt, int num_classes);

// Per-pixel argmax over the class axis of a (num_classes,H,W) probability
// tensor.
LabelMap argmax_labels(const Tensor& S);

enum class EvalMode { Paired, Unpaired };

struct MetricRow {
  std::string id;
  std::optional<double> psnr, ssim, loe, ceiq, miou;
};

struct MetricReport {
  std::vector<MetricRow> rows;  // ordered by stem
  MetricRow average;            // id == "AVERAGE"; fields present where any row had them
  int count = 0;

  // Header id,psnr,ssim,loe,ceiq,miou; absent values stay blank; the last
  // row is AVERAGE.
  std::string csv() const;
};

using Segmenter = std::function<LabelMap(const ImageTensor&)>;

// Score every stem present in both directories. Paired mode treats
// other_dir as references (psnr/ssim/loe/ceiq); unpaired mode treats it as
// the low-light originals (loe/ceiq only). When labels_dir is set, a
// segmenter must be supplied: it produces the predicted map and labels_dir
// holds the ground truth, adding the miou column.
MetricReport evaluate_dir(const std::string& pred_dir, const std::string& other_dir, EvalMode mode,
                          const std::string& labels_dir = {}, const Segmenter& segmenter = {},
                          int num_classes = 21);

}  // namespace sllen
