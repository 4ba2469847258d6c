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

#include <cmath>
#include <filesystem>

#include "doctest.h"
#include "sllen/common.hpp"
#include "sllen/losses.hpp"
#include "sllen/net.hpp"
#include "sllen/ssn.hpp"

using namespace sllen;
namespace fs = std::filesystem;

namespace {

Tensor noise(const std::vector<int>& shape, uint64_t seed, double lo = 0.0, double hi = 1.0) {
  Tensor t(shape);
  Rng rng(seed);
  for (int64_t i = 0; i < t.numel(); ++i) t[i] = lo + (hi - lo) * rng.uniform();
  return t;
}

// Channel plane [[0,d],[0,d]] has average gradient d/4 exactly (powers of
// two only), which pins the target-gradient loss to machine zero.
Tensor step_image(const std::vector<double>& avg_per_channel) {
  Tensor t({static_cast<int>(avg_per_channel.size()), 2, 2});
  for (size_t c = 0; c < avg_per_channel.size(); ++c) {
    double d = 4.0 * avg_per_channel[c];
    t.at(static_cast<int>(c), 0, 1) = d;
    t.at(static_cast<int>(c), 1, 1) = d;
  }
  return t;
}

}  // namespace

TEST_CASE("every loss vanishes on its fixed point") {
  Tensor O = noise({3, 8, 8}, 21);

  CHECK(losses::smooth_loss(O, O) == 0.0);
  CHECK(losses::perceptual_loss(O, O, FeatureExtractor::identity()) == 0.0);
  CHECK(losses::perceptual_loss(O, O, FeatureExtractor::seeded(5)) == 0.0);

  Tensor A = noise({4, 3, 3}, 22), B = noise({8, 2, 2}, 23);
  // Pairing is E[i] with D[n-1-i], so a mirrored list matches exactly.
  CHECK(losses::kd_loss({A, B}, {B, A}) == 0.0);

  CHECK(losses::itv_loss(Tensor::full({3, 6, 6}, 0.73)) == 0.0);

  Tensor flat = step_image({0.051, 0.051, 0.051});
  CHECK(losses::gra_loss({flat}, 0.051) == 0.0);
}

TEST_CASE("hand-computed values") {
  Tensor u = Tensor::from({1, 2, 2}, {0, 1, 0, 1});
  CHECK(losses::itv_loss(u) == 0.5);

  Tensor img = step_image({0.061, 0.051, 0.041});
  CHECK(std::abs(losses::gra_loss({img}, 0.051) - 0.02 / 3.0) <= 1e-9);

  // Batch form averages the per-image penalties.
  Tensor img2 = step_image({0.051, 0.051, 0.051});
  CHECK(std::abs(losses::gra_loss({img, img2}, 0.051) - 0.01 / 3.0) <= 1e-9);

  // Huber: quadratic inside the delta, linear outside.
  Tensor gt = Tensor::from({1, 1, 1}, {0.0});
  CHECK(losses::smooth_loss(Tensor::from({1, 1, 1}, {0.5}), gt) == doctest::Approx(0.125));
  CHECK(losses::smooth_loss(Tensor::from({1, 1, 1}, {2.0}), gt) == doctest::Approx(1.5));
  CHECK(losses::smooth_loss(Tensor::from({1, 1, 1}, {2.0}), gt, 2.0) == doctest::Approx(2.0));
}

TEST_CASE("identity extractor reduces the perceptual term to mse") {
  Tensor O = noise({3, 5, 7}, 31);
  Tensor GT = noise({3, 5, 7}, 32);
  double want = 0;
  for (int64_t i = 0; i < O.numel(); ++i) {
    double d = O[i] - GT[i];
    want += d * d;
  }
  want /= static_cast<double>(O.numel());
  CHECK(losses::perceptual_loss(O, GT, FeatureExtractor::identity()) ==
        doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("distillation gradients reach the decoder side only") {
  Parameter pe("teacher", noise({2, 3, 3}, 41));
  Parameter pd("student", noise({2, 3, 3}, 42));

  ad::Tape t;
  ad::Value l = losses::kd_term(t, {t.param(pe)}, {t.param(pd)});
  t.backward(l);
  t.accumulate_param_grads();

  CHECK(pe.grad.max_value() == 0.0);
  CHECK(pe.grad.min_value() == 0.0);
  double n = static_cast<double>(pd.value.numel());
  for (int64_t i = 0; i < pd.value.numel(); ++i) {
    double want = 2.0 * (pd.value[i] - pe.value[i]) / n;
    CHECK(pd.grad[i] == doctest::Approx(want).epsilon(1e-12));
  }
}

TEST_CASE("tape terms match the plain evaluators on a real forward pass") {
  NetConfig ncfg;
  ncfg.base_channels = 8;
  ncfg.depth = 3;
  ncfg.num_classes = 6;
  ncfg.seed = 17;
  SllenNet net(ncfg);

  SsnConfig scfg;
  scfg.num_classes = 6;
  scfg.seed = 18;
  Ssn ssn = Ssn::build(scfg);

  Tensor low = noise({3, 16, 16}, 51, 0.02, 0.4);
  Tensor GT = noise({3, 16, 16}, 52, 0.3, 0.95);
  SemanticOutputs sem = ssn.forward(ImageTensor::rgb(low));

  FeatureExtractor feat = FeatureExtractor::seeded(3);
  LossWeights w;

  ad::Tape t;
  SllenNet::Trace tr = net.forward(t, low, &sem.S, &sem.B);
  losses::TapeLossTerms terms =
      losses::total_loss_on_tape(t, tr, t.input(low), GT, feat.features(GT), w, feat);
  LossBreakdown on_tape = losses::read_terms(t, terms);

  ForwardTrace plain_tr = net.forward_eval(low, &sem.S, &sem.B);
  LossBreakdown plain = losses::total_loss(plain_tr, GT, low, w, feat);

  CHECK(on_tape.l_s == doctest::Approx(plain.l_s).epsilon(1e-12));
  CHECK(on_tape.l_vgg == doctest::Approx(plain.l_vgg).epsilon(1e-12));
  CHECK(on_tape.l_kd == doctest::Approx(plain.l_kd).epsilon(1e-12));
  CHECK(on_tape.l_itv == doctest::Approx(plain.l_itv).epsilon(1e-12));
  CHECK(on_tape.l_gra == doctest::Approx(plain.l_gra).epsilon(1e-12));
  CHECK(on_tape.total == doctest::Approx(plain.total).epsilon(1e-12));

  // The weighted sum is what it says it is.
  double want_total = plain.l_s + plain.l_vgg + w.lambda_kd * plain.l_kd +
                      w.lambda_itv * plain.l_itv + w.lambda_gra * plain.l_gra;
  CHECK(plain.total == doctest::Approx(want_total).epsilon(1e-12));
}

TEST_CASE("per-channel power transform hits its textbook value") {
  ad::Tape t;
  ad::Value x = t.input(Tensor::full({1, 2, 2}, 3.0));
  ad::Value alpha = t.input(Tensor::from({1}, {2.0}));
  ad::Value beta = t.input(Tensor::from({1}, {0.5}));
  ad::Value y = t.channel_scale(t.channel_pow(t.rectify_positive(x, 1e-6), alpha), beta);
  for (int64_t i = 0; i < 4; ++i) CHECK(std::abs(t.val(y)[i] - 4.5) < 1e-5);
}

TEST_CASE("non-finite terms are named") {
  LossBreakdown ok;
  ok.l_s = 0.1;
  ok.total = 0.1;
  CHECK_NOTHROW(check_finite(ok));

  LossBreakdown bad = ok;
  bad.l_vgg = std::nan("");
  try {
    check_finite(bad);
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.code() == Err::NonFiniteLoss);
    CHECK(std::string(e.what()).find("l_vgg") != std::string::npos);
  }

  LossBreakdown inf = ok;
  inf.l_itv = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(check_finite(inf), Error);
}

TEST_CASE("extractor flavors are deterministic and persistable") {
  FeatureExtractor a = FeatureExtractor::seeded(7);
  FeatureExtractor b = FeatureExtractor::seeded(7);
  CHECK(a.fingerprint() == b.fingerprint());
  CHECK(a.fingerprint() != FeatureExtractor::seeded(8).fingerprint());
  CHECK_FALSE(a.is_identity());
  CHECK(FeatureExtractor::identity().is_identity());

  Tensor img = noise({3, 16, 16}, 61);
  std::vector<Tensor> fa = a.features(img);
  std::vector<Tensor> fb = b.features(img);
  REQUIRE(fa.size() == 3);
  REQUIRE(fa.size() == fb.size());
  for (size_t i = 0; i < fa.size(); ++i) CHECK(max_abs_diff(fa[i], fb[i]) == 0.0);
  // Strided taps shrink the grid stage by stage.
  CHECK(fa[0].dim(1) == 8);
  CHECK(fa[1].dim(1) == 4);
  CHECK(fa[2].dim(1) == 2);

  fs::path file = fs::temp_directory_path() / "sllen_feat_rt.bin";
  a.save_weights(file.string());
  FeatureExtractor c = FeatureExtractor::from_file(file.string());
  std::vector<Tensor> fc = c.features(img);
  REQUIRE(fc.size() == fa.size());
  // Containers hold f32, so the reload agrees to float precision.
  for (size_t i = 0; i < fa.size(); ++i) CHECK(max_abs_diff(fa[i], fc[i]) < 1e-5);
  fs::remove(file);

  FeatureExtractorConfig cfg;
  cfg.kind = "nonsense";
  CHECK_THROWS_AS(FeatureExtractor::make(cfg), Error);
  cfg.kind = "file";
  cfg.weights_path = "";
  CHECK_THROWS_AS(FeatureExtractor::make(cfg), Error);
}
