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

// Internal dense kernels shared by the tape ops and the frozen segmentation
// network. Not installed; include only from src/.

#pragma once

#include <cblas.h>

#include <vector>

#include "sllen/tensor.hpp"

namespace sllen {
namespace kern {

// Row-major C(M,N) = alpha * op(A) * op(B) + beta * C.
// op(A) is (M,K): stored A is (M,K) when !ta, (K,M) when ta.
inline void gemm(bool ta, bool tb, int M, int N, int K, double alpha, const double* A,
                 const double* B, double beta, double* C) {
  int lda = ta ? M : K;
  int ldb = tb ? K : N;
  cblas_dgemm(CblasRowMajor, ta ? CblasTrans : CblasNoTrans, tb ? CblasTrans : CblasNoTrans, M, N,
              K, alpha, A, lda, B, ldb, beta, C, N);
}

struct ConvDims {
  int ic, ih, iw;
  int oc, kh, kw;
  int stride, pad;
  int oh, ow;
};

inline ConvDims conv_dims(const std::vector<int>& xs, const std::vector<int>& ws, int stride,
                          int pad) {
  ConvDims d{};
  d.ic = xs[0];
  d.ih = xs[1];
  d.iw = xs[2];
  d.oc = ws[0];
  d.kh = ws[2];
  d.kw = ws[3];
  d.stride = stride;
  d.pad = pad;
  d.oh = (d.ih + 2 * pad - d.kh) / stride + 1;
  d.ow = (d.iw + 2 * pad - d.kw) / stride + 1;
  if (ws[1] != d.ic)
    raise(Err::ShapeMismatch, "conv2d weight expects " + std::to_string(ws[1]) +
                                  " input channels, image has " + std::to_string(d.ic));
  if (d.oh <= 0 || d.ow <= 0)
    raise(Err::DegenerateShape, "conv2d output would be empty for input " + shape_str(xs));
  return d;
}

// Unfold (IC,IH,IW) into (IC*KH*KW, OH*OW) with zero padding.
void im2col(const double* x, const ConvDims& d, double* col);

// Fold-add the column gradient back into (IC,IH,IW).
void col2im_add(const double* col, const ConvDims& d, double* dx);

// y (OC,OH,OW) = w (OC,IC,KH,KW) * x + b (optional, size OC).
// `col` must hold IC*KH*KW*OH*OW doubles when kh*kw > 1 or stride > 1.
void conv2d_forward(const double* x, const double* w, const double* b, const ConvDims& d,
                    double* col, double* y);

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor* b, int stride, int pad);
Tensor maxpool2(const Tensor& x);
Tensor upsample_nearest2(const Tensor& x);
Tensor avgpool2(const Tensor& x);
Tensor resize_bilinear(const Tensor& x, int oh, int ow);
Tensor softmax_channels(const Tensor& x);
Tensor relu(const Tensor& x);

}  // namespace kern
}  // namespace sllen
