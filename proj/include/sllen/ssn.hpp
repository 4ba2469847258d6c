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

#include <string>
#include <vector>

#include "sllen/autodiff.hpp"
#include "sllen/image.hpp"

namespace sllen {

// Frozen fully-convolutional segmentation provider. It supplies the class
// probability map S and the 512-channel embedding B tapped from an
// intermediate stage; it is never trained here.
struct SsnConfig {
  int num_classes = 21;
  int tap_stage = 4;               // 1-based conv stage index; stage must be 512-wide
  bool tap_post_activation = true; // tap after ReLU (false: pre-activation)
  std::string weights_path;        // empty: weights seeded from `seed`
  uint64_t seed = 0;
};

struct SemanticOutputs {
  Tensor S;  // (num_classes, H, W), softmax over classes
  Tensor B;  // (512, H/8, W/8)
};

class Ssn {
 public:
  static Ssn build(const SsnConfig& cfg);

  SemanticOutputs forward(const ImageTensor& img) const;

  const SsnConfig& config() const { return cfg_; }
  int num_stages() const { return static_cast<int>(stages_.size()); }
  void save_weights(const std::string& path) const;  // f32 blocks
  uint64_t fingerprint() const;                       // hash over parameter bytes

 private:
  struct Stage {
    Parameter w;
    Parameter b;
    int stride = 1;
  };

  SsnConfig cfg_;
  std::vector<Stage> stages_;
  Parameter head_w_;
  Parameter head_b_;

  Ssn() = default;
};

}  // namespace sllen
