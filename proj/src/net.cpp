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

#include "sllen/net.hpp"

#include <cmath>

#include "kernels.hpp"
#include "sllen/serialize.hpp"

namespace sllen {

const char* variant_name(Variant v) {
  switch (v) {
    case Variant::FULL: return "full";
    case Variant::NO_HSF: return "no_hsf";
    case Variant::NO_IEF: return "no_ief";
    case Variant::UNET: return "unet";
  }
  return "full";
}

Variant variant_from_name(const std::string& s) {
  if (s == "full") return Variant::FULL;
  if (s == "no_hsf" || s == "sllen-1") return Variant::NO_HSF;
  if (s == "no_ief" || s == "sllen-2") return Variant::NO_IEF;
  if (s == "unet" || s == "sllen-3") return Variant::UNET;
  raise(Err::ConfigError, "unknown variant '" + s + "' (full|no_hsf|no_ief|unet)");
}

int NetConfig::required_multiple() const {
  int m = 1 << depth;
  // The semantic branch pools the full-resolution map three times, and the
  // embedding input arrives at 1/8 resolution.
  if (uses_hsf() || uses_ief()) m = std::max(m, 8);
  return m;
}

void NetConfig::validate() const {
  if (base_channels < 1) raise(Err::ConfigError, "base_channels must be >= 1");
  if (depth < 1 || depth > 6) raise(Err::ConfigError, "depth must be in 1..6");
  if (bottleneck_channels < 0) raise(Err::ConfigError, "bottleneck_channels must be >= 0");
  if (attention_dk < 1) raise(Err::ConfigError, "attention_dk must be >= 1");
  if (token_cap < 1) raise(Err::ConfigError, "token_cap must be >= 1");
  if (num_classes < 2) raise(Err::ConfigError, "num_classes must be >= 2");
}

void SllenNet::register_conv(ConvP& p, const std::string& name, int oc, int ic, int k) {
  p.w = Parameter(name + ".w", Tensor({oc, ic, k, k}));
  p.b = Parameter(name + ".b", Tensor({oc}));
  param_list_.push_back(&p.w);
  param_list_.push_back(&p.b);
}

void SllenNet::register_lin(LinP& p, const std::string& name, int m, int n) {
  p.w = Parameter(name + ".w", Tensor({m, n}));
  p.b = Parameter(name + ".b", Tensor({m}));
  param_list_.push_back(&p.w);
  param_list_.push_back(&p.b);
}

void SllenNet::init_params() {
  for (Parameter* p : param_list_) {
    if (p->value.rank() == 1) continue;  // biases start at zero
    Rng rng(hash_combine(cfg_.seed, hash_str(p->name)));
    int64_t fan = p->value.rank() == 4
                      ? static_cast<int64_t>(p->value.dim(1)) * p->value.dim(2) * p->value.dim(3)
                      : p->value.dim(1);
    double std = std::sqrt(2.0 / static_cast<double>(fan));
    for (int64_t i = 0; i < p->value.numel(); ++i) p->value[i] = std * rng.normal();
  }
  if (cfg_.uses_ief()) {
    // The per-channel transform starts as the identity: zero head weights
    // with softplus(bias) == 1 give alpha == beta == 1, so the branch cannot
    // amplify the bottleneck before the heads have learned anything.
    double at_one = std::log(std::exp(1.0) - 1.0);
    rsaeb_alpha_.w.value.fill(0.0);
    rsaeb_alpha_.b.value.fill(at_one);
    rsaeb_beta_.w.value.fill(0.0);
    rsaeb_beta_.b.value.fill(at_one);
  }
}

SllenNet::SllenNet(const NetConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  int b = cfg_.base_channels;
  int d = cfg_.depth;
  int cb = cfg_.bottleneck();

  enc_c1_.resize(static_cast<size_t>(d));
  enc_c2_.resize(static_cast<size_t>(d));
  down_.resize(static_cast<size_t>(d));
  for (int s = 0; s < d; ++s) {
    int ws = b << s;
    int in = s == 0 ? 3 : ws;  // the previous stride-2 conv already widened
    std::string tag = "enc" + std::to_string(s + 1);
    register_conv(enc_c1_[static_cast<size_t>(s)], tag + ".c1", ws, in, 3);
    register_conv(enc_c2_[static_cast<size_t>(s)], tag + ".c2", ws, ws, 3);
    int down_out = s == d - 1 ? cb : b << (s + 1);
    register_conv(down_[static_cast<size_t>(s)], tag + ".down", down_out, ws, 3);
  }
  register_conv(bott_c1_, "bott.c1", cb, cb, 3);
  register_conv(bott_c2_, "bott.c2", cb, cb, 3);

  if (cfg_.uses_hsf()) {
    register_conv(hseb_c1_, "hseb.c1", 64, cfg_.num_classes, 3);
    register_conv(hseb_c2_, "hseb.c2", 128, 64, 3);
    register_conv(hseb_c3_, "hseb.c3", 512, 128, 3);
    register_conv(attn_q_, "hsbab.q", cfg_.attention_dk, cb, 1);
    register_conv(attn_k_, "hsbab.k", cfg_.attention_dk, 512, 1);
    register_conv(attn_v_, "hsbab.v", cb, cb, 1);
  }
  if (cfg_.uses_ief()) {
    register_conv(rsaeb_proj_, "rsaeb.proj", cb, 512, 1);
    register_conv(rsaeb_c1_, "rsaeb.c1", cb, cb, 3);
    register_conv(rsaeb_c2_, "rsaeb.c2", cb, cb, 3);
    register_lin(rsaeb_fc_, "rsaeb.fc", cb, cb);
    register_lin(rsaeb_alpha_, "rsaeb.alpha", cb, cb);
    register_lin(rsaeb_beta_, "rsaeb.beta", cb, cb);
  }
  if (cfg_.uses_fusion()) {
    register_conv(ffb_h_, "ffb.h", cb, cb, 3);
    register_conv(ffb_b_, "ffb.b", cb, cb, 3);
    register_conv(ffb_w_, "ffb.w", 1, 2 * cb, 3);
  }

  dec_up_.resize(static_cast<size_t>(d));
  dec_c1_.resize(static_cast<size_t>(d));
  dec_c2_.resize(static_cast<size_t>(d));
  for (int j = 0; j < d; ++j) {
    int u = b << (d - 1 - j);
    int in = j == 0 ? cb : b << (d - j);
    std::string tag = "dec" + std::to_string(j + 1);
    register_conv(dec_up_[static_cast<size_t>(j)], tag + ".up", u, in, 3);
    register_conv(dec_c1_[static_cast<size_t>(j)], tag + ".c1", u, 2 * u, 3);
    register_conv(dec_c2_[static_cast<size_t>(j)], tag + ".c2", u, u, 3);
  }
  register_conv(out_, "out", 3, b, 3);

  init_params();
}

std::vector<Parameter*> SllenNet::parameters() { return param_list_; }

std::vector<const Parameter*> SllenNet::parameters() const {
  return {param_list_.begin(), param_list_.end()};
}

Parameter* SllenNet::find_param(const std::string& name) {
  for (Parameter* p : param_list_)
    if (p->name == name) return p;
  return nullptr;
}

int64_t SllenNet::param_count() const {
  int64_t n = 0;
  for (const Parameter* p : param_list_) n += p->value.numel();
  return n;
}

ad::Value SllenNet::conv_relu(ad::Tape& t, ad::Value x, ConvP& p, int stride, int pad) {
  return t.relu(t.conv2d(x, t.param(p.w), t.param(p.b), stride, pad));
}

SllenNet::Trace SllenNet::forward(ad::Tape& t, const Tensor& img, const Tensor* S,
                                  const Tensor* B) {
  if (img.rank() != 3 || img.dim(0) != 3)
    raise(Err::ShapeMismatch, "network input must be (3,H,W), got " + shape_str(img.shape()));
  int h = img.dim(1), w = img.dim(2);
  int mult = cfg_.required_multiple();
  if (h % mult || w % mult)
    raise(Err::ShapeMismatch, "input H,W must be divisible by " + std::to_string(mult) +
                                  " for this configuration, got " + shape_str(img.shape()));
  if (h < 8 || w < 8)
    raise(Err::ShapeMismatch, "input must be at least 8x8, got " + shape_str(img.shape()));
  if (cfg_.uses_hsf()) {
    if (!S) raise(Err::InvalidParam, "variant needs the semantic map S");
    if (S->rank() != 3 || S->dim(0) != cfg_.num_classes || S->dim(1) != h || S->dim(2) != w)
      raise(Err::ShapeMismatch, "semantic map " + shape_str(S->shape()) + " does not match (" +
                                    std::to_string(cfg_.num_classes) + "," + std::to_string(h) +
                                    "," + std::to_string(w) + ")");
  }
  int d = cfg_.depth;
  int lh = h >> d, lw = w >> d;
  if (cfg_.uses_ief()) {
    if (!B) raise(Err::InvalidParam, "variant needs the embedding B");
    if (B->rank() != 3 || B->dim(0) != 512)
      raise(Err::ShapeMismatch, "embedding B must be (512,h,w), got " + shape_str(B->shape()));
  }

  Trace tr;
  // ---- encoder ----
  ad::Value x = t.input(img, false);
  std::vector<ad::Value> skips;
  for (int s = 0; s < d; ++s) {
    x = conv_relu(t, x, enc_c1_[static_cast<size_t>(s)], 1, 1);
    x = conv_relu(t, x, enc_c2_[static_cast<size_t>(s)], 1, 1);
    tr.E.push_back(x);
    skips.push_back(x);
    x = conv_relu(t, x, down_[static_cast<size_t>(s)], 2, 1);
  }
  x = conv_relu(t, x, bott_c1_, 1, 1);
  tr.L = conv_relu(t, x, bott_c2_, 1, 1);

  // ---- branches ----
  ad::Value fused;
  if (cfg_.variant == Variant::UNET) {
    fused = tr.L;
    tr.F = fused;
  } else {
    ad::Value lh_branch, lb_branch;
    if (cfg_.uses_hsf()) {
      // HSEB: 64/128/512 conv stack over S, pooled to 1/8 and aligned to L.
      ad::Value sIn = t.input(*S, false);
      ad::Value hfeat = t.maxpool2(conv_relu(t, sIn, hseb_c1_, 1, 1));
      hfeat = t.maxpool2(conv_relu(t, hfeat, hseb_c2_, 1, 1));
      hfeat = t.maxpool2(conv_relu(t, hfeat, hseb_c3_, 1, 1));
      hfeat = t.resize_bilinear(hfeat, lh, lw);

      // HSBAB: queries/values from L, keys from the semantic feature.
      int tokens = lh * lw;
      if (tokens > cfg_.token_cap)
        raise(Err::TokenBudgetExceeded,
              std::to_string(tokens) + " attention tokens exceed cap " +
                  std::to_string(cfg_.token_cap));
      ad::Value q = t.conv2d(tr.L, t.param(attn_q_.w), t.param(attn_q_.b), 1, 0);
      ad::Value k = t.conv2d(hfeat, t.param(attn_k_.w), t.param(attn_k_.b), 1, 0);
      ad::Value vv = t.conv2d(tr.L, t.param(attn_v_.w), t.param(attn_v_.b), 1, 0);
      ad::Value qt = t.tokens_from_chw(q);
      ad::Value kt = t.tokens_from_chw(k);
      ad::Value vt = t.tokens_from_chw(vv);
      ad::Value scores =
          t.mul_scalar(t.matmul_nt(qt, kt), 1.0 / std::sqrt(static_cast<double>(cfg_.attention_dk)));
      tr.attention = t.softmax_rows(scores);
      ad::Value mixed = t.chw_from_tokens(t.matmul(tr.attention, vt), cfg_.bottleneck(), lh, lw);
      lh_branch = cfg_.attention_residual ? t.add(mixed, tr.L) : mixed;
    } else {
      lh_branch = tr.L;
    }
    tr.L_H = lh_branch;

    if (cfg_.uses_ief()) {
      // RSAEB: per-channel power law with coefficients predicted from B.
      Tensor b_resized = kern::resize_bilinear(*B, lh, lw);
      ad::Value bIn = t.input(std::move(b_resized), false);
      ad::Value bf = t.relu(t.conv2d(bIn, t.param(rsaeb_proj_.w), t.param(rsaeb_proj_.b), 1, 0));
      bf = conv_relu(t, bf, rsaeb_c1_, 1, 1);
      bf = conv_relu(t, bf, rsaeb_c2_, 1, 1);
      ad::Value g = t.global_avg_pool(bf);
      g = t.relu(t.linear(g, t.param(rsaeb_fc_.w), t.param(rsaeb_fc_.b)));
      tr.alpha = t.softplus(t.linear(g, t.param(rsaeb_alpha_.w), t.param(rsaeb_alpha_.b)));
      tr.beta = t.softplus(t.linear(g, t.param(rsaeb_beta_.w), t.param(rsaeb_beta_.b)));
      ad::Value lpos = t.rectify_positive(tr.L, 1e-6);
      lb_branch = t.channel_scale(t.channel_pow(lpos, tr.alpha), tr.beta);
    } else {
      lb_branch = tr.L;
    }
    tr.L_B = lb_branch;

    // FFB: convex per-pixel fusion of the two projected branches.
    tr.Lp_H = conv_relu(t, lh_branch, ffb_h_, 1, 1);
    tr.Lp_B = conv_relu(t, lb_branch, ffb_b_, 1, 1);
    ad::Value cat = t.concat_ch(tr.Lp_H, tr.Lp_B);
    tr.W_map = t.sigmoid(t.conv2d(cat, t.param(ffb_w_.w), t.param(ffb_w_.b), 1, 1));
    tr.F = t.blend_map(tr.W_map, tr.Lp_H, tr.Lp_B);
    fused = tr.F;
  }

  // ---- decoder ----
  x = fused;
  for (int j = 0; j < d; ++j) {
    x = t.upsample_nearest2(x);
    x = conv_relu(t, x, dec_up_[static_cast<size_t>(j)], 1, 1);
    x = t.concat_ch(x, skips[static_cast<size_t>(d - 1 - j)]);
    x = conv_relu(t, x, dec_c1_[static_cast<size_t>(j)], 1, 1);
    x = conv_relu(t, x, dec_c2_[static_cast<size_t>(j)], 1, 1);
    tr.D.push_back(x);
  }
  tr.O = t.sigmoid(t.conv2d(x, t.param(out_.w), t.param(out_.b), 1, 1));
  return tr;
}

ForwardTrace SllenNet::forward_eval(const Tensor& img, const Tensor* S, const Tensor* B) {
  ad::Tape t;
  Trace tr = forward(t, img, S, B);
  ForwardTrace out;
  out.O = t.val(tr.O);
  out.L = t.val(tr.L);
  if (tr.L_H.valid()) out.L_H = t.val(tr.L_H);
  if (tr.L_B.valid()) out.L_B = t.val(tr.L_B);
  if (tr.Lp_H.valid()) out.Lp_H = t.val(tr.Lp_H);
  if (tr.Lp_B.valid()) out.Lp_B = t.val(tr.Lp_B);
  if (tr.F.valid()) out.F = t.val(tr.F);
  for (ad::Value e : tr.E) out.E.push_back(t.val(e));
  for (ad::Value dv : tr.D) out.D.push_back(t.val(dv));
  if (tr.alpha.valid()) out.alpha = t.val(tr.alpha);
  if (tr.beta.valid()) out.beta = t.val(tr.beta);
  if (tr.W_map.valid()) out.W_map = t.val(tr.W_map);
  if (tr.attention.valid()) out.attention = t.val(tr.attention);
  return out;
}

std::string net_config_json(const NetConfig& c) {
  std::string s = "{";
  s += "\"base_channels\":" + std::to_string(c.base_channels);
  s += ",\"depth\":" + std::to_string(c.depth);
  s += ",\"bottleneck_channels\":" + std::to_string(c.bottleneck_channels);
  s += ",\"attention_dk\":" + std::to_string(c.attention_dk);
  s += ",\"token_cap\":" + std::to_string(c.token_cap);
  s += ",\"num_classes\":" + std::to_string(c.num_classes);
  s += std::string(",\"attention_residual\":") + (c.attention_residual ? "true" : "false");
  s += std::string(",\"variant\":\"") + variant_name(c.variant) + "\"";
  s += "}";
  return s;
}

void SllenNet::save_weights(const std::string& path) const {
  BlockWriter bw;
  bw.set_header("{\"kind\":\"sllen-net\",\"net\":" + net_config_json(cfg_) + "}");
  for (const Parameter* p : param_list_) bw.add(p->name, p->value);
  bw.write(path);
}

void SllenNet::load_weights(const std::string& path) {
  BlockFile bf = read_blocks(path);
  std::string want = "\"net\":" + net_config_json(cfg_);
  if (bf.header.find(want) == std::string::npos)
    raise(Err::ConfigError, path + ": checkpoint config does not match this network (" +
                                bf.header + " vs expected " + want + ")");
  if (bf.blocks.size() != param_list_.size())
    raise(Err::WeightLoadError, path + ": manifest lists " + std::to_string(bf.blocks.size()) +
                                    " blocks, network has " + std::to_string(param_list_.size()) +
                                    " parameters");
  for (Parameter* p : param_list_) p->value = bf.expect(p->name, p->value.shape());
}

}  // namespace sllen
