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

#include <filesystem>

#include "doctest.h"
#include "sllen/common.hpp"
#include "sllen/ssn.hpp"

using namespace sllen;
namespace fs = std::filesystem;

namespace {

ImageTensor noise_image(int h, int w, uint64_t seed) {
  Tensor t({3, h, w});
  Rng rng(seed);
  for (int64_t i = 0; i < t.numel(); ++i) t[i] = rng.uniform();
  return ImageTensor::rgb(std::move(t));
}

}  // namespace

TEST_CASE("semantic outputs have the contracted shapes") {
  SsnConfig cfg;
  cfg.num_classes = 7;
  cfg.seed = 5;
  Ssn ssn = Ssn::build(cfg);
  CHECK(ssn.num_stages() >= 5);

  ImageTensor img = noise_image(32, 24, 1);
  SemanticOutputs out = ssn.forward(img);
  REQUIRE(out.S.rank() == 3);
  CHECK(out.S.dim(0) == 7);
  CHECK(out.S.dim(1) == 32);
  CHECK(out.S.dim(2) == 24);
  REQUIRE(out.B.rank() == 3);
  CHECK(out.B.dim(0) == 512);
  CHECK(out.B.dim(1) == 4);   // 1/8 of the input height
  CHECK(out.B.dim(2) == 3);   // 1/8 of the input width

  // S is a categorical distribution at every pixel.
  for (int y = 0; y < 32; ++y)
    for (int x = 0; x < 24; ++x) {
      double s = 0;
      for (int c = 0; c < 7; ++c) {
        double p = out.S.at(c, y, x);
        CHECK(p >= 0.0);
        s += p;
      }
      CHECK(s == doctest::Approx(1.0).epsilon(1e-5));
    }

  // The default tap point sits after a ReLU, so B is nonnegative.
  CHECK(out.B.min_value() >= 0.0);
  CHECK(out.B.all_finite());
}

TEST_CASE("seeded builds are reproducible, different seeds differ") {
  SsnConfig cfg;
  cfg.num_classes = 5;
  cfg.seed = 11;
  Ssn a = Ssn::build(cfg);
  Ssn b = Ssn::build(cfg);
  CHECK(a.fingerprint() == b.fingerprint());

  ImageTensor img = noise_image(16, 16, 2);
  SemanticOutputs oa = a.forward(img);
  SemanticOutputs ob = b.forward(img);
  CHECK(max_abs_diff(oa.S, ob.S) == 0.0);
  CHECK(max_abs_diff(oa.B, ob.B) == 0.0);

  cfg.seed = 12;
  Ssn c = Ssn::build(cfg);
  CHECK(c.fingerprint() != a.fingerprint());
  CHECK(max_abs_diff(c.forward(img).B, oa.B) > 0.0);
}

TEST_CASE("weights written to disk rebuild the same network") {
  fs::path dir = fs::temp_directory_path() / "sllen_ssn";
  fs::create_directories(dir);
  fs::path weights = dir / "ssn.bin";

  SsnConfig cfg;
  cfg.num_classes = 4;
  cfg.seed = 21;
  Ssn original = Ssn::build(cfg);
  original.save_weights(weights.string());

  SsnConfig from_file = cfg;
  from_file.weights_path = weights.string();
  from_file.seed = 999;  // must be ignored when weights come from a file
  Ssn restored = Ssn::build(from_file);

  ImageTensor img = noise_image(24, 16, 3);
  SemanticOutputs a = original.forward(img);
  SemanticOutputs b = restored.forward(img);
  // Weights pass through f32 storage; outputs agree to float precision.
  CHECK(max_abs_diff(a.S, b.S) < 1e-5);
  CHECK(max_abs_diff(a.B, b.B) < 1e-4);
  fs::remove_all(dir);
}

TEST_CASE("pre-activation tap changes the embedding") {
  SsnConfig cfg;
  cfg.num_classes = 4;
  cfg.seed = 31;
  Ssn post = Ssn::build(cfg);

  cfg.tap_post_activation = false;
  Ssn pre = Ssn::build(cfg);

  ImageTensor img = noise_image(16, 16, 4);
  Tensor b_post = post.forward(img).B;
  Tensor b_pre = pre.forward(img).B;
  // Pre-activation values may dip below zero; the ReLU'd tap may not.
  CHECK(b_post.min_value() >= 0.0);
  CHECK(b_pre.min_value() < 0.0);
  CHECK(max_abs_diff(b_post, b_pre) > 0.0);
}

TEST_CASE("config validation rejects nonsense") {
  SsnConfig cfg;
  cfg.num_classes = 1;
  CHECK_THROWS_AS(Ssn::build(cfg), Error);
  cfg.num_classes = 21;
  cfg.tap_stage = 0;
  CHECK_THROWS_AS(Ssn::build(cfg), Error);
}
