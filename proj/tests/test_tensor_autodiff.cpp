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
#include <functional>
#include <vector>

#include "doctest.h"
#include "sllen/autodiff.hpp"
#include "sllen/common.hpp"
#include "sllen/tensor.hpp"

using namespace sllen;

namespace {

Tensor random_tensor(const std::vector<int>& shape, uint64_t seed, double lo = -1.0,
                     double hi = 1.0) {
  Tensor t(shape);
  Rng rng(seed);
  for (int64_t i = 0; i < t.numel(); ++i) t[i] = rng.uniform(lo, hi);
  return t;
}

// Central finite differences on every coordinate of `x0` against the
// analytic gradient of the scalar that `build` produces from the input.
void fd_check(const Tensor& x0,
              const std::function<ad::Value(ad::Tape&, ad::Value)>& build,
              double tol = 1e-6) {
  ad::Tape tape;
  ad::Value x = tape.input(x0, true);
  ad::Value root = build(tape, x);
  REQUIRE(tape.val(root).numel() == 1);
  tape.backward(root);
  Tensor analytic = tape.grad(x);

  const double h = 1e-6;
  for (int64_t i = 0; i < x0.numel(); ++i) {
    auto eval = [&](double delta) {
      Tensor xs = x0;
      xs[i] += delta;
      ad::Tape t2;
      return t2.val(build(t2, t2.input(xs, false)))[0];
    };
    double fd = (eval(h) - eval(-h)) / (2 * h);
    CHECK(std::abs(analytic[i] - fd) <=
          tol * std::max({1.0, std::abs(analytic[i]), std::abs(fd)}));
  }
}

}  // namespace

TEST_CASE("tensor shape bookkeeping and accessors") {
  Tensor t = Tensor::zeros({2, 3, 4});
  CHECK(t.rank() == 3);
  CHECK(t.numel() == 24);
  CHECK(t.dim(2) == 4);
  t.at(1, 2, 3) = 7.5;
  CHECK(t[23] == 7.5);
  CHECK(t.max_value() == 7.5);
  CHECK(t.min_value() == 0.0);
  CHECK(t.mean_value() == doctest::Approx(7.5 / 24).epsilon(1e-12));
  CHECK(t.all_finite());
  t[0] = std::nan("");
  CHECK_FALSE(t.all_finite());

  Tensor u = Tensor::from({2, 2}, {1, 2, 3, 4});
  CHECK(u.at(1, 0) == 3.0);
  CHECK(max_abs_diff(u, u) == 0.0);
  CHECK(shape_str(u.shape()) == "(2,2)");
}

TEST_CASE("elementwise ops forward values") {
  ad::Tape t;
  ad::Value a = t.input(Tensor::from({3}, {-1.0, 0.0, 2.0}));
  CHECK(t.val(t.relu(a))[0] == 0.0);
  CHECK(t.val(t.relu(a))[2] == 2.0);
  CHECK(t.val(t.sigmoid(a))[1] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(t.val(t.softplus(a))[1] == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(t.val(t.abs_val(a))[0] == 1.0);
  CHECK(t.val(t.add_scalar(a, 3.0))[0] == 2.0);
  CHECK(t.val(t.mul_scalar(a, -2.0))[2] == -4.0);
  CHECK(t.val(t.rectify_positive(a, 1e-6))[0] == 1e-6);
  CHECK(t.val(t.rectify_positive(a, 1e-6))[2] == doctest::Approx(2.000001).epsilon(1e-12));
  // Huber: quadratic inside the threshold, linear outside.
  ad::Value r = t.input(Tensor::from({2}, {0.5, 3.0}));
  ad::Value hb = t.huber(r, 1.0);
  CHECK(t.val(hb)[0] == doctest::Approx(0.125).epsilon(1e-12));
  CHECK(t.val(hb)[1] == doctest::Approx(2.5).epsilon(1e-12));
}

TEST_CASE("elementwise and reduction gradients match finite differences") {
  Tensor x = random_tensor({2, 3, 3}, 91, 0.2, 1.5);
  fd_check(x, [](ad::Tape& t, ad::Value v) { return t.mean_all(t.mul(v, v)); });
  fd_check(x, [](ad::Tape& t, ad::Value v) { return t.sum_all(t.sigmoid(v)); });
  fd_check(x, [](ad::Tape& t, ad::Value v) { return t.mean_all(t.softplus(v)); });
  fd_check(x, [](ad::Tape& t, ad::Value v) {
    return t.mean_all(t.divide(v, t.add_scalar(t.mul(v, v), 1.0)));
  });
  fd_check(x, [](ad::Tape& t, ad::Value v) {
    return t.sum_all(t.huber(t.add_scalar(v, -0.85), 0.4));
  });
  fd_check(x, [](ad::Tape& t, ad::Value v) { return t.sum_all(t.mean_per_channel(v)); });
}

TEST_CASE("conv2d matches a hand example and its gradient checks out") {
  // 1x1 kernel acting as a channel mixer on a 1x2x2 input.
  ad::Tape t;
  Tensor img = Tensor::from({1, 2, 2}, {1, 2, 3, 4});
  Tensor w = Tensor::from({2, 1, 1, 1}, {2, -1});
  Tensor b = Tensor::from({2}, {0.5, 0});
  ad::Value y = t.conv2d(t.input(img), t.input(w), t.input(b), 1, 0);
  CHECK(t.val(y).dim(0) == 2);
  CHECK(t.val(y).at(0, 0, 0) == 2.5);
  CHECK(t.val(y).at(1, 1, 1) == -4.0);

  // Gradients through weights, bias, and input, with stride and padding.
  Tensor x0 = random_tensor({2, 4, 4}, 17);
  Tensor w0 = random_tensor({3, 2, 3, 3}, 18, -0.5, 0.5);
  Tensor b0 = random_tensor({3}, 19, -0.2, 0.2);
  fd_check(x0, [&](ad::Tape& tp, ad::Value v) {
    return tp.mean_all(tp.conv2d(v, tp.input(w0), tp.input(b0), 1, 1));
  });
  fd_check(w0, [&](ad::Tape& tp, ad::Value v) {
    return tp.mean_all(tp.conv2d(tp.input(x0), v, tp.input(b0), 2, 1));
  });
  fd_check(b0, [&](ad::Tape& tp, ad::Value v) {
    return tp.mean_all(tp.conv2d(tp.input(x0), tp.input(w0), v, 1, 0));
  });
}

TEST_CASE("pooling, upsampling and resize") {
  ad::Tape t;
  Tensor img = Tensor::from({1, 2, 2}, {1, 5, 3, 2});
  CHECK(t.val(t.maxpool2(t.input(img))).numel() == 1);
  CHECK(t.val(t.maxpool2(t.input(img)))[0] == 5.0);

  ad::Value up = t.upsample_nearest2(t.input(img));
  CHECK(t.val(up).dim(1) == 4);
  CHECK(t.val(up).at(0, 0, 1) == 1.0);
  CHECK(t.val(up).at(0, 1, 2) == 5.0);

  // Bilinear resize keeps a constant map constant.
  ad::Value rz = t.resize_bilinear(t.input(Tensor::full({2, 3, 5}, 0.73)), 7, 4);
  CHECK(t.val(rz).dim(1) == 7);
  CHECK(max_abs_diff(t.val(rz), Tensor::full({2, 7, 4}, 0.73)) < 1e-12);

  Tensor x0 = random_tensor({1, 4, 4}, 23);
  fd_check(x0, [](ad::Tape& tp, ad::Value v) { return tp.mean_all(tp.maxpool2(v)); });
  fd_check(x0, [](ad::Tape& tp, ad::Value v) {
    return tp.mean_all(tp.upsample_nearest2(v));
  });
  fd_check(x0, [](ad::Tape& tp, ad::Value v) {
    return tp.sum_all(tp.resize_bilinear(v, 3, 7));
  });
}

TEST_CASE("concat, tokens, linear algebra round trips") {
  ad::Tape t;
  ad::Value a = t.input(Tensor::full({2, 2, 2}, 1.0));
  ad::Value b = t.input(Tensor::full({3, 2, 2}, 2.0));
  ad::Value cat = t.concat_ch(a, b);
  CHECK(t.val(cat).dim(0) == 5);
  CHECK(t.val(cat).at(4, 1, 1) == 2.0);

  Tensor x = random_tensor({3, 2, 4}, 31);
  ad::Value tok = t.tokens_from_chw(t.input(x));
  CHECK(t.val(tok).dim(0) == 8);
  CHECK(t.val(tok).dim(1) == 3);
  ad::Value back = t.chw_from_tokens(tok, 3, 2, 4);
  CHECK(max_abs_diff(t.val(back), x) == 0.0);

  // matmul_nt(a, b) == matmul(a, b^T) checked against an explicit loop.
  Tensor ma = random_tensor({2, 3}, 41);
  Tensor mb = random_tensor({4, 3}, 42);
  ad::Value mm = t.matmul_nt(t.input(ma), t.input(mb));
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 4; ++j) {
      double want = 0;
      for (int k = 0; k < 3; ++k) want += ma.at(i, k) * mb.at(j, k);
      CHECK(t.val(mm).at(i, j) == doctest::Approx(want).epsilon(1e-12));
    }

  Tensor w = random_tensor({3, 5}, 43);
  Tensor bias = random_tensor({3}, 44);
  Tensor vin = random_tensor({5}, 45);
  fd_check(vin, [&](ad::Tape& tp, ad::Value v) {
    return tp.sum_all(tp.linear(v, tp.input(w), tp.input(bias)));
  });
  fd_check(w, [&](ad::Tape& tp, ad::Value v) {
    return tp.mean_all(tp.linear(tp.input(vin), v, tp.input(bias)));
  });
  fd_check(ma, [&](ad::Tape& tp, ad::Value v) {
    return tp.mean_all(tp.matmul_nt(v, tp.input(mb)));
  });
  Tensor mk = random_tensor({3, 4}, 46);
  fd_check(mk, [&](ad::Tape& tp, ad::Value v) {
    return tp.mean_all(tp.matmul(tp.input(ma), v));
  });
}

TEST_CASE("softmax rows normalize and differentiate") {
  Tensor logits = random_tensor({4, 6}, 51, -2, 2);
  ad::Tape t;
  ad::Value sm = t.softmax_rows(t.input(logits));
  Tensor p = t.val(sm);
  for (int r = 0; r < 4; ++r) {
    double s = 0;
    for (int c = 0; c < 6; ++c) {
      s += p.at(r, c);
      CHECK(p.at(r, c) >= 0.0);
    }
    CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
  }
  // Uniform logits give uniform probabilities.
  ad::Value u = t.softmax_rows(t.input(Tensor::full({2, 5}, 3.25)));
  CHECK(max_abs_diff(t.val(u), Tensor::full({2, 5}, 0.2)) < 1e-15);

  fd_check(logits, [](ad::Tape& tp, ad::Value v) {
    // Weighted sum so every row contributes a distinct gradient.
    ad::Value w = tp.input(Tensor::from({4, 6}, {1,  2, 3, 4, 5, 6,  6, 5, 4, 3, 2, 1,
                                                 -1, 0, 1, 0, 2, 0, 0.5, 1, 0, 2, 1, 3}));
    return tp.sum_all(tp.mul(tp.softmax_rows(v), w));
  });
}

TEST_CASE("channel transforms and fusion blend") {
  Tensor x = random_tensor({3, 3, 3}, 61, 0.1, 2.0);  // positive bases
  Tensor alpha = Tensor::from({3}, {0.5, 1.0, 2.0});
  Tensor beta = Tensor::from({3}, {2.0, 0.5, 1.5});
  ad::Tape t;
  ad::Value y = t.channel_scale(t.channel_pow(t.input(x), t.input(alpha)), t.input(beta));
  CHECK(t.val(y).at(2, 1, 1) ==
        doctest::Approx(1.5 * x.at(2, 1, 1) * x.at(2, 1, 1)).epsilon(1e-12));

  fd_check(x, [&](ad::Tape& tp, ad::Value v) {
    return tp.mean_all(tp.channel_pow(v, tp.input(alpha)));
  });
  fd_check(alpha, [&](ad::Tape& tp, ad::Value v) {
    return tp.mean_all(tp.channel_pow(tp.input(x), v));
  });
  fd_check(beta, [&](ad::Tape& tp, ad::Value v) {
    return tp.mean_all(tp.channel_scale(tp.input(x), v));
  });

  // blend_map is convex: w == 1 picks a, w == 0 picks b.
  Tensor wa = Tensor::full({1, 2, 2}, 1.0);
  Tensor ta = Tensor::full({2, 2, 2}, 5.0), tb = Tensor::full({2, 2, 2}, -3.0);
  ad::Value f1 = t.blend_map(t.input(wa), t.input(ta), t.input(tb));
  CHECK(max_abs_diff(t.val(f1), ta) == 0.0);
  Tensor wmid = Tensor::full({1, 2, 2}, 0.25);
  ad::Value f2 = t.blend_map(t.input(wmid), t.input(ta), t.input(tb));
  CHECK(t.val(f2)[0] == doctest::Approx(-1.0).epsilon(1e-12));

  Tensor w0 = random_tensor({1, 3, 3}, 62, 0.1, 0.9);
  fd_check(w0, [&](ad::Tape& tp, ad::Value v) {
    return tp.mean_all(tp.blend_map(v, tp.input(random_tensor({2, 3, 3}, 63)),
                                    tp.input(random_tensor({2, 3, 3}, 64))));
  });
}

TEST_CASE("spatial differences zero out the last line") {
  Tensor x = random_tensor({1, 3, 4}, 71);
  ad::Tape t;
  Tensor gx = t.val(t.diff_x(t.input(x)));
  Tensor gy = t.val(t.diff_y(t.input(x)));
  for (int r = 0; r < 3; ++r) CHECK(gx.at(0, r, 3) == 0.0);
  for (int c = 0; c < 4; ++c) CHECK(gy.at(0, 2, c) == 0.0);
  CHECK(gx.at(0, 1, 1) == doctest::Approx(x.at(0, 1, 2) - x.at(0, 1, 1)).epsilon(1e-15));
  CHECK(gy.at(0, 0, 2) == doctest::Approx(x.at(0, 1, 2) - x.at(0, 0, 2)).epsilon(1e-15));

  fd_check(x, [](ad::Tape& tp, ad::Value v) {
    ad::Value dx = tp.diff_x(v), dy = tp.diff_y(v);
    return tp.mean_all(tp.add(tp.mul(dx, dx), tp.mul(dy, dy)));
  });
}

TEST_CASE("global average pool") {
  Tensor x = random_tensor({4, 3, 5}, 81);
  ad::Tape t;
  Tensor g = t.val(t.global_avg_pool(t.input(x)));
  CHECK(g.rank() == 1);
  CHECK(g.dim(0) == 4);
  double want = 0;
  for (int i = 0; i < 15; ++i) want += x[15 + i];
  CHECK(g[1] == doctest::Approx(want / 15).epsilon(1e-12));
  fd_check(x, [](ad::Tape& tp, ad::Value v) { return tp.sum_all(tp.global_avg_pool(v)); });
}

TEST_CASE("stop_gradient blocks the backward path") {
  Tensor x0 = random_tensor({2, 2}, 99);
  ad::Tape t;
  ad::Value x = t.input(x0, true);
  ad::Value frozen = t.stop_gradient(x);
  ad::Value live = t.mul(x, x);
  ad::Value root = t.mean_all(t.add(live, t.mul(frozen, frozen)));
  t.backward(root);
  Tensor g = t.grad(x);
  // Only the live branch contributes: d/dx mean(x^2) = 2x / n.
  for (int64_t i = 0; i < x0.numel(); ++i)
    CHECK(g[i] == doctest::Approx(2 * x0[i] / 4).epsilon(1e-12));
}

TEST_CASE("parameter binding accumulates scaled gradients") {
  Parameter p("w", Tensor::from({2}, {1.0, -2.0}));
  {
    ad::Tape t;
    ad::Value w = t.param(p);
    t.backward(t.sum_all(t.mul(w, w)));
    t.accumulate_param_grads(0.5);
  }
  CHECK(p.grad[0] == doctest::Approx(1.0).epsilon(1e-12));   // 0.5 * 2*1
  CHECK(p.grad[1] == doctest::Approx(-2.0).epsilon(1e-12));  // 0.5 * 2*(-2)
  {
    ad::Tape t;
    ad::Value w = t.param(p);
    t.backward(t.sum_all(w));
    t.accumulate_param_grads(1.0);
  }
  // Accumulation adds on top of the previous pass.
  CHECK(p.grad[0] == doctest::Approx(2.0).epsilon(1e-12));
  p.zero_grad();
  CHECK(p.grad.max_value() == 0.0);
}

TEST_CASE("deterministic rng streams") {
  Rng a(123), b(123), c(124);
  for (int i = 0; i < 100; ++i) {
    double u = a.uniform();
    CHECK(u == b.uniform());
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
  CHECK(a.normal() == b.normal());
  CHECK(a.uniform() != c.uniform());
  CHECK(hash_combine(1, 2) != hash_combine(2, 1));
  CHECK(hash_str("enc1.c1.w") != hash_str("enc1.c1.b"));
}
