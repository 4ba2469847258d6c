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

// FULL: both enhancement branches. NO_HSF drops the semantic-attention
// branch, NO_IEF drops the embedding-transform branch, UNET is the bare
// encoder/decoder with F = L.
enum class Variant { FULL, NO_HSF, NO_IEF, UNET };

const char* variant_name(Variant v);
Variant variant_from_name(const std::string& s);

struct NetConfig;
std::string net_config_json(const NetConfig& c);

struct NetConfig {
  int base_channels = 32;
  int depth = 3;                  // downsampling stages
  int bottleneck_channels = 0;    // 0: base_channels << depth
  int attention_dk = 64;
  int token_cap = 4096;           // max h*w tokens entering attention
  int num_classes = 21;           // channel count of the semantic map S
  bool attention_residual = true; // L_H = Attn + L (false: L_H = Attn)
  Variant variant = Variant::FULL;
  uint64_t seed = 0;

  int bottleneck() const {
    return bottleneck_channels > 0 ? bottleneck_channels : base_channels << depth;
  }
  bool uses_hsf() const { return variant == Variant::FULL || variant == Variant::NO_IEF; }
  bool uses_ief() const { return variant == Variant::FULL || variant == Variant::NO_HSF; }
  bool uses_fusion() const { return variant != Variant::UNET; }
  // Inputs must have H and W divisible by this.
  int required_multiple() const;
  void validate() const;  // ConfigError on nonsense values
};

// Concrete tensors captured from one forward pass. Fields not produced by
// the variant are left empty.
struct ForwardTrace {
  Tensor O;                 // (3,H,W) in [0,1]
  Tensor L;                 // bottleneck
  Tensor L_H, L_B;          // branch outputs
  Tensor Lp_H, Lp_B;        // fusion-input projections
  Tensor F;                 // fused bottleneck
  std::vector<Tensor> E;    // encoder embeddings, shallow to deep
  std::vector<Tensor> D;    // decoder embeddings, deep to shallow
  Tensor alpha, beta;       // per-channel transform vectors
  Tensor W_map;             // (1,h,w) fusion weight
  Tensor attention;         // (T,T) row-stochastic
};

class SllenNet {
 public:
  explicit SllenNet(const NetConfig& cfg);

  const NetConfig& config() const { return cfg_; }
  std::vector<Parameter*> parameters();
  std::vector<const Parameter*> parameters() const;
  Parameter* find_param(const std::string& name);  // nullptr if absent
  int64_t param_count() const;

  // Tape handles from one forward pass; pass S/B only for variants that
  // consume them (they are ignored otherwise, and required when used).
  struct Trace {
    ad::Value O, L, L_H, L_B, Lp_H, Lp_B, F;
    std::vector<ad::Value> E, D;
    ad::Value alpha, beta, W_map, attention;
  };

  Trace forward(ad::Tape& t, const Tensor& img, const Tensor* S, const Tensor* B);
  ForwardTrace forward_eval(const Tensor& img, const Tensor* S, const Tensor* B);

  void save_weights(const std::string& path) const;  // f32 blocks + config header
  void load_weights(const std::string& path);        // hard error on config mismatch

 private:
  struct ConvP {
    Parameter w, b;
  };
  struct LinP {
    Parameter w, b;
  };

  NetConfig cfg_;
  // encoder
  std::vector<ConvP> enc_c1_, enc_c2_, down_;
  ConvP bott_c1_, bott_c2_;
  // semantic branch
  ConvP hseb_c1_, hseb_c2_, hseb_c3_;
  ConvP attn_q_, attn_k_, attn_v_;
  // embedding branch
  ConvP rsaeb_proj_, rsaeb_c1_, rsaeb_c2_;
  LinP rsaeb_fc_, rsaeb_alpha_, rsaeb_beta_;
  // fusion
  ConvP ffb_h_, ffb_b_, ffb_w_;
  // decoder
  std::vector<ConvP> dec_up_, dec_c1_, dec_c2_;
  ConvP out_;

  std::vector<Parameter*> param_list_;

  void register_conv(ConvP& p, const std::string& name, int oc, int ic, int k);
  void register_lin(LinP& p, const std::string& name, int m, int n);
  void init_params();
  ad::Value conv_relu(ad::Tape& t, ad::Value x, ConvP& p, int stride, int pad);
};

}  // namespace sllen
