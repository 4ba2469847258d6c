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

#include "sllen/ssn.hpp"

#include <cmath>
#include <cstring>

#include "kernels.hpp"
#include "sllen/serialize.hpp"

namespace sllen {

namespace {

// Stage widths: three stride-2 stages, then the 512-wide tap stage at 1/8
// resolution, then one more refinement stage before the class head.
struct StagePlan {
  int in, out, stride;
};

std::vector<StagePlan> stage_plan() {
  return {
      {3, 64, 2}, {64, 128, 2}, {128, 256, 2}, {256, 512, 1}, {512, 256, 1},
  };
}

void he_init(Tensor& w, Rng& rng) {
  // fan_in for (OC,IC,KH,KW) or (M,N) weights.
  int64_t fan = w.rank() == 4 ? static_cast<int64_t>(w.dim(1)) * w.dim(2) * w.dim(3) : w.dim(1);
  double std = std::sqrt(2.0 / static_cast<double>(fan));
  for (int64_t i = 0; i < w.numel(); ++i) w[i] = std * rng.normal();
}

}  // namespace

Ssn Ssn::build(const SsnConfig& cfg) {
  auto plan = stage_plan();
  if (cfg.tap_stage < 1 || cfg.tap_stage > static_cast<int>(plan.size()))
    raise(Err::ConfigError, "tap_stage " + std::to_string(cfg.tap_stage) + " out of range 1.." +
                                std::to_string(plan.size()));
  if (plan[static_cast<size_t>(cfg.tap_stage - 1)].out != 512)
    raise(Err::ConfigError, "tap_stage " + std::to_string(cfg.tap_stage) + " is " +
                                std::to_string(plan[static_cast<size_t>(cfg.tap_stage - 1)].out) +
                                "-wide; the tapped stage must output 512 channels");
  if (cfg.num_classes < 2) raise(Err::ConfigError, "num_classes must be >= 2");

  Ssn net;
  net.cfg_ = cfg;
  for (size_t s = 0; s < plan.size(); ++s) {
    Stage st;
    st.stride = plan[s].stride;
    st.w = Parameter("ssn.stage" + std::to_string(s + 1) + ".w",
                     Tensor({plan[s].out, plan[s].in, 3, 3}));
    st.b = Parameter("ssn.stage" + std::to_string(s + 1) + ".b", Tensor({plan[s].out}));
    net.stages_.push_back(std::move(st));
  }
  net.head_w_ = Parameter("ssn.head.w", Tensor({cfg.num_classes, plan.back().out, 1, 1}));
  net.head_b_ = Parameter("ssn.head.b", Tensor({cfg.num_classes}));

  if (cfg.weights_path.empty()) {
    for (Stage& st : net.stages_) {
      Rng rng(hash_combine(cfg.seed, hash_str(st.w.name)));
      he_init(st.w.value, rng);
    }
    Rng rng(hash_combine(cfg.seed, hash_str(net.head_w_.name)));
    he_init(net.head_w_.value, rng);
  } else {
    BlockFile bf = read_blocks(cfg.weights_path);
    for (Stage& st : net.stages_) {
      st.w.value = bf.expect(st.w.name, st.w.value.shape());
      st.b.value = bf.expect(st.b.name, st.b.value.shape());
    }
    net.head_w_.value = bf.expect(net.head_w_.name, net.head_w_.value.shape());
    net.head_b_.value = bf.expect(net.head_b_.name, net.head_b_.value.shape());
    size_t expected = net.stages_.size() * 2 + 2;
    if (bf.blocks.size() != expected)
      raise(Err::WeightLoadError, cfg.weights_path + ": manifest lists " +
                                      std::to_string(bf.blocks.size()) + " blocks, expected " +
                                      std::to_string(expected));
  }
  return net;
}

SemanticOutputs Ssn::forward(const ImageTensor& img) const {
  if (img.channels() != 3)
    raise(Err::ShapeMismatch, "ssn expects a 3-channel image, got " +
                                  shape_str(img.data.shape()));
  int h = img.height(), w = img.width();
  if (h % 8 != 0 || w % 8 != 0)
    raise(Err::ShapeMismatch, "ssn input H,W must be divisible by 8, got " +
                                  shape_str(img.data.shape()));

  SemanticOutputs out;
  Tensor x = img.data;
  for (size_t s = 0; s < stages_.size(); ++s) {
    Tensor pre = kern::conv2d(x, stages_[s].w.value, &stages_[s].b.value, stages_[s].stride, 1);
    Tensor post = kern::relu(pre);
    if (static_cast<int>(s) + 1 == cfg_.tap_stage)
      out.B = cfg_.tap_post_activation ? post : std::move(pre);
    x = std::move(post);
  }
  Tensor logits = kern::conv2d(x, head_w_.value, &head_b_.value, 1, 0);
  Tensor up = kern::resize_bilinear(logits, h, w);
  out.S = kern::softmax_channels(up);
  return out;
}

void Ssn::save_weights(const std::string& path) const {
  BlockWriter bw;
  bw.set_header("{\"kind\":\"ssn\",\"num_classes\":" + std::to_string(cfg_.num_classes) + "}");
  for (const Stage& st : stages_) {
    bw.add(st.w.name, st.w.value);
    bw.add(st.b.name, st.b.value);
  }
  bw.add(head_w_.name, head_w_.value);
  bw.add(head_b_.name, head_b_.value);
  bw.write(path);
}

uint64_t Ssn::fingerprint() const {
  uint64_t h = 1469598103934665603ULL;
  auto feed = [&h](const Tensor& t) {
    const unsigned char* p = reinterpret_cast<const unsigned char*>(t.data());
    size_t n = sizeof(double) * static_cast<size_t>(t.numel());
    for (size_t i = 0; i < n; ++i) {
      h ^= p[i];
      h *= 1099511628211ULL;
    }
  };
  for (const Stage& st : stages_) {
    feed(st.w.value);
    feed(st.b.value);
  }
  feed(head_w_.value);
  feed(head_b_.value);
  return h;
}

}  // namespace sllen
