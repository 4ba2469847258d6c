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
#include <string>
#include <vector>

#include "sllen/tensor.hpp"

namespace sllen {

// Trainable weight. Lives outside any tape; tapes bind to it by pointer and
// push gradients back through Tape::accumulate_param_grads.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;

  Parameter() = default;
  Parameter(std::string n, Tensor v) : name(std::move(n)), value(std::move(v)) {
    grad = Tensor::zeros(value.shape());
  }
  void zero_grad() { grad.fill(0.0); }
};

namespace ad {

// Handle into a Tape. Invalid (id < 0) handles stand for "absent", e.g. a
// conv without bias.
struct Value {
  int id = -1;
  bool valid() const { return id >= 0; }
};

// Dynamic reverse-mode tape. Build the graph by calling op methods, then
// backward() on a scalar root. The tape owns all intermediate values; it is
// rebuilt from scratch for every training step.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // ---- leaves ----
  Value input(Tensor t, bool requires_grad = false);
  Value param(Parameter& p);

  // ---- access ----
  const Tensor& val(Value v) const;
  const Tensor& grad(Value v) const;  // zeros if nothing flowed back
  bool requires_grad(Value v) const;
  size_t size() const { return nodes_.size(); }

  // ---- elementwise ----
  Value add(Value a, Value b);
  Value sub(Value a, Value b);
  Value mul(Value a, Value b);
  Value divide(Value a, Value b);
  Value add_scalar(Value a, double s);
  Value mul_scalar(Value a, double s);
  Value relu(Value a);
  Value sigmoid(Value a);
  Value softplus(Value a);
  Value abs_val(Value a);
  // max(x, 0) + eps; keeps bases strictly positive before channel_pow.
  Value rectify_positive(Value a, double eps);
  // Elementwise Huber penalty with threshold delta (applied to a residual).
  Value huber(Value a, double delta);

  // ---- structure ----
  Value conv2d(Value x, Value w, Value b, int stride, int pad);
  Value maxpool2(Value a);
  Value upsample_nearest2(Value a);
  Value resize_bilinear(Value a, int oh, int ow);
  Value concat_ch(Value a, Value b);
  Value global_avg_pool(Value a);            // (C,H,W) -> (C)
  Value linear(Value x, Value w, Value b);   // (N) x (M,N) [+ (M)] -> (M)
  Value tokens_from_chw(Value a);            // (C,H,W) -> (H*W, C)
  Value chw_from_tokens(Value a, int c, int h, int w);
  Value matmul(Value a, Value b);            // (M,K)(K,N) -> (M,N)
  Value matmul_nt(Value a, Value b);         // (M,K)(N,K)^T -> (M,N)
  Value softmax_rows(Value a);
  Value channel_pow(Value x, Value a);       // y[c] = x[c]^a[c], x > 0
  Value channel_scale(Value x, Value s);     // y[c] = s[c] * x[c]
  // w is (1,H,W); returns w*a + (1-w)*b with w broadcast over channels.
  Value blend_map(Value w, Value a, Value b);
  // Forward differences with a zero last column/row, and their adjoints.
  Value diff_x(Value a);
  Value diff_y(Value a);

  // ---- reductions ----
  Value mean_all(Value a);                   // -> (1)
  Value sum_all(Value a);                    // -> (1)
  Value mean_per_channel(Value a);           // (C,H,W) -> (C)

  // ---- control ----
  Value stop_gradient(Value a);

  // Run reverse accumulation from a scalar root. May be called once.
  void backward(Value root);

  // Add scale * d(root)/d(param) into every bound Parameter's grad.
  void accumulate_param_grads(double scale = 1.0);

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    bool grad_alloc = false;
    std::function<void()> back;
    Parameter* bound = nullptr;
  };

  std::vector<Node> nodes_;
  bool ran_backward_ = false;

  int push(Tensor value, bool requires_grad);
  Tensor& gbuf(int id);
  const Tensor& v(Value x) const { return nodes_[static_cast<size_t>(x.id)].value; }
  void check(Value x, const char* who) const;
};

}  // namespace ad
}  // namespace sllen
