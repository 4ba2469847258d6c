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

#include "sllen/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <memory>

#include "kernels.hpp"

namespace sllen {
namespace kern {

void im2col(const double* x, const ConvDims& d, double* col) {
  const int ohow = d.oh * d.ow;
  for (int ic = 0; ic < d.ic; ++ic) {
    const double* xc = x + static_cast<size_t>(ic) * d.ih * d.iw;
    for (int kh = 0; kh < d.kh; ++kh) {
      for (int kw = 0; kw < d.kw; ++kw) {
        double* row = col + (static_cast<size_t>(ic) * d.kh * d.kw + kh * d.kw + kw) * ohow;
        for (int oh = 0; oh < d.oh; ++oh) {
          int iy = oh * d.stride - d.pad + kh;
          double* out = row + static_cast<size_t>(oh) * d.ow;
          if (iy < 0 || iy >= d.ih) {
            std::memset(out, 0, sizeof(double) * d.ow);
            continue;
          }
          const double* src = xc + static_cast<size_t>(iy) * d.iw;
          for (int ow = 0; ow < d.ow; ++ow) {
            int ix = ow * d.stride - d.pad + kw;
            out[ow] = (ix < 0 || ix >= d.iw) ? 0.0 : src[ix];
          }
        }
      }
    }
  }
}

void col2im_add(const double* col, const ConvDims& d, double* dx) {
  const int ohow = d.oh * d.ow;
  for (int ic = 0; ic < d.ic; ++ic) {
    double* xc = dx + static_cast<size_t>(ic) * d.ih * d.iw;
    for (int kh = 0; kh < d.kh; ++kh) {
      for (int kw = 0; kw < d.kw; ++kw) {
        const double* row = col + (static_cast<size_t>(ic) * d.kh * d.kw + kh * d.kw + kw) * ohow;
        for (int oh = 0; oh < d.oh; ++oh) {
          int iy = oh * d.stride - d.pad + kh;
          if (iy < 0 || iy >= d.ih) continue;
          double* dst = xc + static_cast<size_t>(iy) * d.iw;
          const double* src = row + static_cast<size_t>(oh) * d.ow;
          for (int ow = 0; ow < d.ow; ++ow) {
            int ix = ow * d.stride - d.pad + kw;
            if (ix >= 0 && ix < d.iw) dst[ix] += src[ow];
          }
        }
      }
    }
  }
}

void conv2d_forward(const double* x, const double* w, const double* b, const ConvDims& d,
                    double* col, double* y) {
  const int ohow = d.oh * d.ow;
  const int ickk = d.ic * d.kh * d.kw;
  if (d.kh == 1 && d.kw == 1 && d.stride == 1 && d.pad == 0) {
    gemm(false, false, d.oc, ohow, d.ic, 1.0, w, x, 0.0, y);
  } else {
    im2col(x, d, col);
    gemm(false, false, d.oc, ohow, ickk, 1.0, w, col, 0.0, y);
  }
  if (b) {
    for (int oc = 0; oc < d.oc; ++oc) {
      double* yr = y + static_cast<size_t>(oc) * ohow;
      for (int i = 0; i < ohow; ++i) yr[i] += b[oc];
    }
  }
}

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor* b, int stride, int pad) {
  ConvDims d = conv_dims(x.shape(), w.shape(), stride, pad);
  Tensor y({d.oc, d.oh, d.ow});
  std::vector<double> col;
  if (!(d.kh == 1 && d.kw == 1 && d.stride == 1 && d.pad == 0))
    col.resize(static_cast<size_t>(d.ic) * d.kh * d.kw * d.oh * d.ow);
  conv2d_forward(x.data(), w.data(), b ? b->data() : nullptr, d, col.data(), y.data());
  return y;
}

Tensor maxpool2(const Tensor& x) {
  int c = x.dim(0), h = x.dim(1), w = x.dim(2);
  if (h % 2 || w % 2)
    raise(Err::DegenerateShape, "maxpool2 needs even spatial dims, got " + shape_str(x.shape()));
  Tensor y({c, h / 2, w / 2});
  for (int ch = 0; ch < c; ++ch)
    for (int i = 0; i < h / 2; ++i)
      for (int j = 0; j < w / 2; ++j) {
        double m = x.at(ch, 2 * i, 2 * j);
        m = std::max(m, x.at(ch, 2 * i, 2 * j + 1));
        m = std::max(m, x.at(ch, 2 * i + 1, 2 * j));
        m = std::max(m, x.at(ch, 2 * i + 1, 2 * j + 1));
        y.at(ch, i, j) = m;
      }
  return y;
}

Tensor upsample_nearest2(const Tensor& x) {
  int c = x.dim(0), h = x.dim(1), w = x.dim(2);
  Tensor y({c, 2 * h, 2 * w});
  for (int ch = 0; ch < c; ++ch)
    for (int i = 0; i < 2 * h; ++i)
      for (int j = 0; j < 2 * w; ++j) y.at(ch, i, j) = x.at(ch, i / 2, j / 2);
  return y;
}

Tensor avgpool2(const Tensor& x) {
  int c = x.dim(0), h = x.dim(1), w = x.dim(2);
  if (h % 2 || w % 2)
    raise(Err::DegenerateShape, "avgpool2 needs even spatial dims, got " + shape_str(x.shape()));
  Tensor y({c, h / 2, w / 2});
  for (int ch = 0; ch < c; ++ch)
    for (int i = 0; i < h / 2; ++i)
      for (int j = 0; j < w / 2; ++j)
        y.at(ch, i, j) = 0.25 * (x.at(ch, 2 * i, 2 * j) + x.at(ch, 2 * i, 2 * j + 1) +
                                 x.at(ch, 2 * i + 1, 2 * j) + x.at(ch, 2 * i + 1, 2 * j + 1));
  return y;
}

Tensor resize_bilinear(const Tensor& x, int oh, int ow) {
  int c = x.dim(0), h = x.dim(1), w = x.dim(2);
  if (oh == h && ow == w) return x;
  Tensor y({c, oh, ow});
  double sy = static_cast<double>(h) / oh;
  double sx = static_cast<double>(w) / ow;
  for (int i = 0; i < oh; ++i) {
    double fy = (i + 0.5) * sy - 0.5;
    int y0 = static_cast<int>(std::floor(fy));
    double wy = fy - y0;
    int y0c = std::clamp(y0, 0, h - 1);
    int y1c = std::clamp(y0 + 1, 0, h - 1);
    for (int j = 0; j < ow; ++j) {
      double fx = (j + 0.5) * sx - 0.5;
      int x0 = static_cast<int>(std::floor(fx));
      double wx = fx - x0;
      int x0c = std::clamp(x0, 0, w - 1);
      int x1c = std::clamp(x0 + 1, 0, w - 1);
      for (int ch = 0; ch < c; ++ch) {
        double top = (1.0 - wx) * x.at(ch, y0c, x0c) + wx * x.at(ch, y0c, x1c);
        double bot = (1.0 - wx) * x.at(ch, y1c, x0c) + wx * x.at(ch, y1c, x1c);
        y.at(ch, i, j) = (1.0 - wy) * top + wy * bot;
      }
    }
  }
  return y;
}

Tensor softmax_channels(const Tensor& x) {
  int c = x.dim(0), h = x.dim(1), w = x.dim(2);
  Tensor y(x.shape());
  int64_t hw = static_cast<int64_t>(h) * w;
  for (int64_t p = 0; p < hw; ++p) {
    double m = -1e300;
    for (int ch = 0; ch < c; ++ch) m = std::max(m, x[ch * hw + p]);
    double s = 0.0;
    for (int ch = 0; ch < c; ++ch) {
      double e = std::exp(x[ch * hw + p] - m);
      y[ch * hw + p] = e;
      s += e;
    }
    for (int ch = 0; ch < c; ++ch) y[ch * hw + p] /= s;
  }
  return y;
}

Tensor relu(const Tensor& x) {
  Tensor y(x.shape());
  for (int64_t i = 0; i < x.numel(); ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
  return y;
}

}  // namespace kern

namespace ad {

int Tape::push(Tensor value, bool requires_grad) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  nodes_.push_back(std::move(n));
  return static_cast<int>(nodes_.size()) - 1;
}

Tensor& Tape::gbuf(int id) {
  Node& n = nodes_[static_cast<size_t>(id)];
  if (!n.grad_alloc) {
    n.grad = Tensor::zeros(n.value.shape());
    n.grad_alloc = true;
  }
  return n.grad;
}

void Tape::check(Value x, const char* who) const {
  if (!x.valid() || x.id >= static_cast<int>(nodes_.size()))
    raise(Err::Internal, std::string(who) + ": invalid tape value");
}

Value Tape::input(Tensor t, bool requires_grad) { return {push(std::move(t), requires_grad)}; }

Value Tape::param(Parameter& p) {
  int id = push(p.value, true);
  nodes_[static_cast<size_t>(id)].bound = &p;
  return {id};
}

const Tensor& Tape::val(Value x) const {
  check(x, "val");
  return nodes_[static_cast<size_t>(x.id)].value;
}

const Tensor& Tape::grad(Value x) const {
  check(x, "grad");
  const Node& n = nodes_[static_cast<size_t>(x.id)];
  if (!n.grad_alloc) {
    static thread_local Tensor zeros;
    zeros = Tensor::zeros(n.value.shape());
    return zeros;
  }
  return n.grad;
}

bool Tape::requires_grad(Value x) const {
  check(x, "requires_grad");
  return nodes_[static_cast<size_t>(x.id)].requires_grad;
}

// ---------------------------------------------------------------------------
// elementwise
// ---------------------------------------------------------------------------

Value Tape::add(Value a, Value b) {
  check(a, "add");
  check(b, "add");
  if (!v(a).same_shape(v(b)))
    raise(Err::ShapeMismatch, "add " + shape_str(v(a).shape()) + " vs " + shape_str(v(b).shape()));
  Tensor y = v(a);
  const Tensor& tb = v(b);
  for (int64_t i = 0; i < y.numel(); ++i) y[i] += tb[i];
  bool rg = requires_grad(a) || requires_grad(b);
  Value out{push(std::move(y), rg)};
  if (rg) {
    int ia = a.id, ib = b.id, io = out.id;
    nodes_[static_cast<size_t>(io)].back = [this, ia, ib, io] {
      const Tensor& g = nodes_[static_cast<size_t>(io)].grad;
      if (nodes_[static_cast<size_t>(ia)].requires_grad) {
        Tensor& da = gbuf(ia);
        for (int64_t i = 0; i < g.numel(); ++i) da[i] += g[i];
      }
      if (nodes_[static_cast<size_t>(ib)].requires_grad) {
        Tensor& db = gbuf(ib);
        for (int64_t i = 0; i < g.numel(); ++i) db[i] += g[i];
      }
    };
  }
  return out;
}

Value Tape::sub(Value a, Value b) {
  check(a, "sub");
  check(b, "sub");
  if (!v(a).same_shape(v(b)))
    raise(Err::ShapeMismatch, "sub " + shape_str(v(a).shape()) + " vs " + shape_str(v(b).shape()));
  Tensor y = v(a);
  const Tensor& tb = v(b);
  for (int64_t i = 0; i < y.numel(); ++i) y[i] -= tb[i];
  bool rg = requires_grad(a) || requires_grad(b);
  Value out{push(std::move(y), rg)};
  if (rg) {
    int ia = a.id, ib = b.id, io = out.id;
    nodes_[static_cast<size_t>(io)].back = [this, ia, ib, io] {
      const Tensor& g = nodes_[static_cast<size_t>(io)].grad;
      if (nodes_[static_cast<size_t>(ia)].requires_grad) {
        Tensor& da = gbuf(ia);
        for (int64_t i = 0; i < g.numel(); ++i) da[i] += g[i];
      }
      if (nodes_[static_cast<size_t>(ib)].requires_grad) {
        Tensor& db = gbuf(ib);
        for (int64_t i = 0; i < g.numel(); ++i) db[i] -= g[i];
      }
    };
  }
  return out;
}

Value Tape::mul(Value a, Value b) {
  check(a, "mul");
  check(b, "mul");
  if (!v(a).same_shape(v(b)))
    raise(Err::ShapeMismatch, "mul " + shape_str(v(a).shape()) + " vs " + shape_str(v(b).shape()));
  Tensor y = v(a);
  const Tensor& tb = v(b);
  for (int64_t i = 0; i < y.numel(); ++i) y[i] *= tb[i];
  bool rg = requires_grad(a) || requires_grad(b);
  Value out{push(std::move(y), rg)};
  if (rg) {
    int ia = a.id, ib = b.id, io = out.id;
    nodes_[static_cast<size_t>(io)].back = [this, ia, ib, io] {
      const Tensor& g = nodes_[static_cast<size_t>(io)].grad;
      const Tensor& ta = nodes_[static_cast<size_t>(ia)].value;
      const Tensor& tb2 = nodes_[static_cast<size_t>(ib)].value;
      if (nodes_[static_cast<size_t>(ia)].requires_grad) {
        Tensor& da = gbuf(ia);
        for (int64_t i = 0; i < g.numel(); ++i) da[i] += g[i] * tb2[i];
      }
      if (nodes_[static_cast<size_t>(ib)].requires_grad) {
        Tensor& db = gbuf(ib);
        for (int64_t i = 0; i < g.numel(); ++i) db[i] += g[i] * ta[i];
      }
    };
  }
  return out;
}

Value Tape::divide(Value a, Value b) {
  check(a, "divide");
  check(b, "divide");
  if (!v(a).same_shape(v(b)))
    raise(Err::ShapeMismatch,
          "divide " + shape_str(v(a).shape()) + " vs " + shape_str(v(b).shape()));
  Tensor y = v(a);
  const Tensor& tb = v(b);
  for (int64_t i = 0; i < y.numel(); ++i) y[i] /= tb[i];
  bool rg = requires_grad(a) || requires_grad(b);
  Value out{push(std::move(y), rg)};
  if (rg) {
    int ia = a.id, ib = b.id, io = out.id;
    nodes_[static_cast<size_t>(io)].back = [this, ia, ib, io] {
      const Tensor& g = nodes_[static_cast<size_t>(io)].grad;
      const Tensor& ta = nodes_[static_cast<size_t>(ia)].value;
      const Tensor& tb2 = nodes_[static_cast<size_t>(ib)].value;
      if (nodes_[static_cast<size_t>(ia)].requires_grad) {
        Tensor& da = gbuf(ia);
        for (int64_t i = 0; i < g.numel(); ++i) da[i] += g[i] / tb2[i];
      }
      if (nodes_[static_cast<size_t>(ib)].requires_grad) {
        Tensor& db = gbuf(ib);
        for (int64_t i = 0; i < g.numel(); ++i) db[i] -= g[i] * ta[i] / (tb2[i] * tb2[i]);
      }
    };
  }
  return out;
}

Value Tape::add_scalar(Value a, double s) {
  check(a, "add_scalar");
  Tensor y = v(a);
  for (int64_t i = 0; i < y.numel(); ++i) y[i] += s;
  bool rg = requires_grad(a);
  Value out{push(std::move(y), rg)};
  if (rg) {
    int ia = a.id, io = out.id;
    nodes_[static_cast<size_t>(io)].back = [this, ia, io] {
      const Tensor& g = nodes_[static_cast<size_t>(io)].grad;
      Tensor& da = gbuf(ia);
      for (int64_t i = 0; i < g.numel(); ++i) da[i] += g[i];
    };
  }
  return out;
}

Value Tape::mul_scalar(Value a, double s) {
  check(a, "mul_scalar");
  Tensor y = v(a);
  for (int64_t i = 0; i < y.numel(); ++i) y[i] *= s;
  bool rg = requires_grad(a);
  Value out{push(std::move(y), rg)};
  if (rg) {
    int ia = a.id, io = out.id;
    nodes_[static_cast<size_t>(io)].back = [this, ia, io, s] {
      const Tensor& g = nodes_[static_cast<size_t>(io)].grad;
      Tensor& da = gbuf(ia);
      for (int64_t i = 0; i < g.numel(); ++i) da[i] += g[i] * s;
    };
  }
  return out;
}

Value Tape::relu(Value a) {
  check(a, "relu");
  Tensor y = v(a);
  for (int64_t i = 0; i < y.numel(); ++i) y[i] = y[i] > 0.0 ? y[i] : 0.0;
  bool rg = requires_grad(a);
  Value out{push(std::move(y), rg)};
  if (rg) {
    int ia = a.id, io = out.id;
    nodes_[static_cast<size_t>(io)].back = [this, ia, io] {
      const Tensor& g = nodes_[static_cast<size_t>(io)].grad;
      const Tensor& x = nodes_[static_cast<size_t>(ia)].value;
      Tensor& da = gbuf(ia);
      for (int64_t i = 0; i < g.numel(); ++i)
        if (x[i] > 0.0) da[i] += g[i];
    };
  }
  return out;
}

Value Tape::sigmoid(Value a) {
  check(a, "sigmoid");
  Tensor y = v(a);
  for (int64_t i = 0; i < y.numel(); ++i) y[i] = 1.0 / (1.0 + std::exp(-y[i]));
  bool rg = requires_grad(a);
  Value out{push(std::move(y), rg)};
  if (rg) {
    int ia = a.id, io = out.id;
    nodes_[static_cast<size_t>(io)].back = [this, ia, io] {
      const Node& o = nodes_[static_cast<size_t>(io)];
      const Tensor& g = o.grad;
      const Tensor& y2 = o.value;
      Tensor& da = gbuf(ia);
      for (int64_t i = 0; i < g.numel(); ++i) da[i] += g[i] * y2[i] * (1.0 - y2[i]);
    };
  }
  return out;
}

namespace {
double softplus_val(double x) {
  if (x > 30.0) return x;
  if (x < -30.0) return std::exp(x);
  return std::log1p(std::exp(x));
}
}  // namespace

Value Tape::softplus(Value a) {
  check(a, "softplus");
  Tensor y = v(a);
  for (int64_t i = 0; i < y.numel(); ++i) y[i] = softplus_val(y[i]);
  bool rg = requires_grad(a);
  Value out{push(std::move(y), rg)};
  if (rg) {
    int ia = a.id, io = out.id;
    nodes_[static_cast<size_t>(io)].back = [this, ia, io] {
      const Tensor& g = nodes_[static_cast<size_t>(io)].grad;
      const Tensor& x = nodes_[static_cast<size_t>(ia)].value;
      Tensor& da = gbuf(ia);
      for (int64_t i = 0; i < g.numel(); ++i) da[i] += g[i] / (1.0 + std::exp(-x[i]));
    };
  }
  return out;
}

Value Tape::abs_val(Value a) {
  check(a, "abs_val");
  Tensor y = v(a);
  for (int64_t i = 0; i < y.numel(); ++i) y[i] = std::fabs(y[i]);
  bool rg = requires_grad(a);
  Value out{push(std::move(y), rg)};
  if (rg) {
    int ia = a.id, io = out.id;
    nodes_[static_cast<size_t>(io)].back = [this, ia, io] {
      const Tensor& g = nodes_[static_cast<size_t>(io)].grad;
      const Tensor& x = nodes_[static_cast<size_t>(ia)].value;
      Tensor& da = gbuf(ia);
      for (int64_t i = 0; i < g.numel(); ++i) {
        if (x[i] > 0.0)
          da[i] += g[i];
        else if (x[i] < 0.0)
          da[i] -= g[i];
      }
    };
  }
  return out;
}

Value Tape::rectify_positive(Value a, double eps) {
  check(a, "rectify_positive");
  Tensor y = v(a);
  for (int64_t i = 0; i < y.numel(); ++i) y[i] = (y[i] > 0.0 ? y[i] : 0.0) + eps;
  bool rg = requires_grad(a);
  Value out{push(std::move(y), rg)};
  if (rg) {
    int ia = a.id, io = out.id;
    nodes_[static_cast<size_t>(io)].back = [this, ia, io] {
      const Tensor& g = nodes_[static_cast<size_t>(io)].grad;
      const Tensor& x = nodes_[static_cast<size_t>(ia)].value;
      Tensor& da = gbuf(ia);
      for (int64_t i = 0; i < g.numel(); ++i)
        if (x[i] > 0.0) da[i] += g[i];
    };
  }
  return out;
}

Value Tape::huber(Value a, double delta) {
  check(a, "huber");
  const Tensor& x = v(a);
  Tensor y(x.shape());
  for (int64_t i = 0; i < x.numel(); ++i) {
    double r = std::fabs(x[i]);
    y[i] = r <= delta ? 0.5 * x[i] * x[i] : delta * (r - 0.5 * delta);
  }
  bool rg = requires_grad(a);
  Value out{push(std::move(y), rg)};
  if (rg) {
    int ia = a.id, io = out.id;
    nodes_[static_cast<size_t>(io)].back = [this, ia, io, delta] {
      const Tensor& g = nodes_[static_cast<size_t>(io)].grad;
      const Tensor& x2 = nodes_[static_cast<size_t>(ia)].value;
      Tensor& da = gbuf(ia);
      for (int64_t i = 0; i < g.numel(); ++i) {
        double d = std::fabs(x2[i]) <= delta ? x2[i] : (x2[i] > 0.0 ? delta : -delta);
        da[i] += g[i] * d;
      }
    };
  }
  return out;
}

// ---------------------------------------------------------------------------
// structure
// ---------------------------------------------------------------------------

Value Tape::conv2d(Value x, Value w, Value b, int stride, int pad) {
  check(x, "conv2d");
  check(w, "conv2d");
  if (v(x).rank() != 3 || v(w).rank() != 4)
    raise(Err::ShapeMismatch, "conv2d expects (C,H,W) input and (OC,IC,KH,KW) weight");
  kern::ConvDims d = kern::conv_dims(v(x).shape(), v(w).shape(), stride, pad);
  if (b.valid() && (v(b).rank() != 1 || v(b).dim(0) != d.oc))
    raise(Err::ShapeMismatch, "conv2d bias must be (OC)");

  bool onebyone = d.kh == 1 && d.kw == 1 && stride == 1 && pad == 0;
  auto col = std::make_shared<std::vector<double>>();
  if (!onebyone) col->resize(static_cast<size_t>(d.ic) * d.kh * d.kw * d.oh * d.ow);
  Tensor y({d.oc, d.oh, d.ow});
  kern::conv2d_forward(v(x).data(), v(w).data(), b.valid() ? v(b).data() : nullptr, d, col->data(),
                       y.data());

  bool rg = requires_grad(x) || requires_grad(w) || (b.valid() && requires_grad(b));
  Value out{push(std::move(y), rg)};
  if (!rg) return out;

  // The unfolded input is only needed for dW; drop it when w is frozen.
  if (!requires_grad(w)) col.reset();

  int ix = x.id, iw = w.id, ib = b.valid() ? b.id : -1, io = out.id;
  nodes_[static_cast<size_t>(io)].back = [this, ix, iw, ib, io, d, col, onebyone] {
    const Tensor& dy = nodes_[static_cast<size_t>(io)].grad;
    const int ohow = d.oh * d.ow;
    const int ickk = d.ic * d.kh * d.kw;
    if (ib >= 0 && nodes_[static_cast<size_t>(ib)].requires_grad) {
      Tensor& db = gbuf(ib);
      for (int oc = 0; oc < d.oc; ++oc) {
        const double* row = dy.data() + static_cast<size_t>(oc) * ohow;
        double s = 0.0;
        for (int i = 0; i < ohow; ++i) s += row[i];
        db[oc] += s;
      }
    }
    if (nodes_[static_cast<size_t>(iw)].requires_grad) {
      Tensor& dw = gbuf(iw);
      const double* colp = onebyone ? nodes_[static_cast<size_t>(ix)].value.data() : col->data();
      kern::gemm(false, true, d.oc, ickk, ohow, 1.0, dy.data(), colp, 1.0, dw.data());
    }
    if (nodes_[static_cast<size_t>(ix)].requires_grad) {
      Tensor& dx = gbuf(ix);
      const Tensor& wv = nodes_[static_cast<size_t>(iw)].value;
      if (onebyone) {
        kern::gemm(true, false, d.ic, ohow, d.oc, 1.0, wv.data(), dy.data(), 1.0, dx.data());
      } else {
        std::vector<double> dcol(static_cast<size_t>(ickk) * ohow);
        kern::gemm(true, false, ickk, ohow, d.oc, 1.0, wv.data(), dy.data(), 0.0, dcol.data());
        kern::col2im_add(dcol.data(), d, dx.data());
      }
    }
  };
  return out;
}

Value Tape::maxpool2(Value a) {
  check(a, "maxpool2");
  const Tensor& x = v(a);
  int c = x.dim(0), h = x.dim(1), w = x.dim(2);
  if (h % 2 || w % 2)
    raise(Err::DegenerateShape, "maxpool2 needs even spatial dims, got " + shape_str(x.shape()));
  Tensor y({c, h / 2, w / 2});
  auto arg = std::make_shared<std::vector<int64_t>>(static_cast<size_t>(y.numel()));
  int64_t k = 0;
  for (int ch = 0; ch < c; ++ch)
    for (int i = 0; i < h / 2; ++i)
      for (int j = 0; j < w / 2; ++j, ++k) {
        int64_t base = (static_cast<int64_t>(ch) * h + 2 * i) * w + 2 * j;
        int64_t cand[4] = {base, base + 1, base + w, base + w + 1};
        int64_t best = cand[0];
        for (int q = 1; q < 4; ++q)
          if (x[cand[q]] > x[best]) best = cand[q];
        (*arg)[static_cast<size_t>(k)] = best;
        y[k] = x[best];
      }
  bool rg = requires_grad(a);
  Value out{push(std::move(y), rg)};
  if (rg) {
    int ia = a.id, io = out.id;
    nodes_[static_cast<size_t>(io)].back = [this, ia, io, arg] {
      const Tensor& g = nodes_[static_cast<size_t>(io)].grad;
      Tensor& da = gbuf(ia);
      for (int64_t i = 0; i < g.numel(); ++i) da[(*arg)[static_cast<size_t>(i)]] += g[i];
    };
  }
  return out;
}

Value Tape::upsample_nearest2(Value a) {
  check(a, "upsample_nearest2");
  Tensor y = kern::upsample_nearest2(v(a));
  bool rg = requires_grad(a);
  Value out{push(std::move(y), rg)};
  if (rg) {
    int ia = a.id, io = out.id;
    nodes_[static_cast<size_t>(io)].back = [this, ia, io] {
      const Tensor& g = nodes_[static_cast<size_t>(io)].grad;
      Tensor& da = gbuf(ia);
      int c = da.dim(0), h = da.dim(1), w = da.dim(2);
      for (int ch = 0; ch < c; ++ch)
        for (int i = 0; i < 2 * h; ++i)
          for (int j = 0; j < 2 * w; ++j) da.at(ch, i / 2, j / 2) += g.at(ch, i, j);
    };
  }
  return out;
}

Value Tape::resize_bilinear(Value a, int oh, int ow) {
  check(a, "resize_bilinear");
  const Tensor& x = v(a);
  if (x.rank() != 3) raise(Err::ShapeMismatch, "resize_bilinear expects (C,H,W)");
  int c = x.dim(0), h = x.dim(1), w = x.dim(2);
  if (oh == h && ow == w) {
    // Identity resize still creates a node so callers get a uniform graph.
    Tensor y = x;
    bool rg = requires_grad(a);
    Value out{push(std::move(y), rg)};
    if (rg) {
      int ia = a.id, io = out.id;
      nodes_[static_cast<size_t>(io)].back = [this, ia, io] {
        const Tensor& g = nodes_[static_cast<size_t>(io)].grad;
        Tensor& da = gbuf(ia);
        for (int64_t i = 0; i < g.numel(); ++i) da[i] += g[i];
      };
    }
    return out;
  }
  Tensor y = kern::resize_bilinear(x, oh, ow);
  bool rg = requires_grad(a);
  Value out{push(std::move(y), rg)};
  if (rg) {
    int ia = a.id, io = out.id;
    nodes_[static_cast<size_t>(io)].back = [this, ia, io, c, h, w, oh, ow] {
      const Tensor& g = nodes_[static_cast<size_t>(io)].grad;
      Tensor& da = gbuf(ia);
      double sy = static_cast<double>(h) / oh;
      double sx = static_cast<double>(w) / ow;
      for (int i = 0; i < oh; ++i) {
        double fy = (i + 0.5) * sy - 0.5;
        int y0 = static_cast<int>(std::floor(fy));
        double wy = fy - y0;
        int y0c = std::clamp(y0, 0, h - 1);
        int y1c = std::clamp(y0 + 1, 0, h - 1);
        for (int j = 0; j < ow; ++j) {
          double fx = (j + 0.5) * sx - 0.5;
          int x0 = static_cast<int>(std::floor(fx));
          double wx = fx - x0;
          int x0c = std::clamp(x0, 0, w - 1);
          int x1c = std::clamp(x0 + 1, 0, w - 1);
          for (int ch = 0; ch < c; ++ch) {
            double gv = g.at(ch, i, j);
            da.at(ch, y0c, x0c) += gv * (1.0 - wy) * (1.0 - wx);
            da.at(ch, y0c, x1c) += gv * (1.0 - wy) * wx;
            da.at(ch, y1c, x0c) += gv * wy * (1.0 - wx);
            da.at(ch, y1c, x1c) += gv * wy * wx;
          }
        }
      }
    };
  }
  return out;
}

Value Tape::concat_ch(Value a, Value b) {
  check(a, "concat_ch");
  check(b, "concat_ch");
  const Tensor& ta = v(a);
  const Tensor& tb = v(b);
  if (ta.rank() != 3 || tb.rank() != 3 || ta.dim(1) != tb.dim(1) || ta.dim(2) != tb.dim(2))
    raise(Err::ShapeMismatch,
          "concat_ch " + shape_str(ta.shape()) + " vs " + shape_str(tb.shape()));
  Tensor y({ta.dim(0) + tb.dim(0), ta.dim(1), ta.dim(2)});
  std::memcpy(y.data(), ta.data(), sizeof(double) * ta.numel());
  std::memcpy(y.data() + ta.numel(), tb.data(), sizeof(double) * tb.numel());
  bool rg = requires_grad(a) || requires_grad(b);
  Value out{push(std::move(y), rg)};
  if (rg) {
    int ia = a.id, ib = b.id, io = out.id;
    int64_t na = ta.numel();
    nodes_[static_cast<size_t>(io)].back = [this, ia, ib, io, na] {
      const Tensor& g = nodes_[static_cast<size_t>(io)].grad;
      if (nodes_[static_cast<size_t>(ia)].requires_grad) {
        Tensor& da = gbuf(ia);
        for (int64_t i = 0; i < na; ++i) da[i] += g[i];
      }
      if (nodes_[static_cast<size_t>(ib)].requires_grad) {
        Tensor& db = gbuf(ib);
        for (int64_t i = 0; i < db.numel(); ++i) db[i] += g[na + i];
      }
    };
  }
  return out;
}

Value Tape::global_avg_pool(Value a) {
  check(a, "global_avg_pool");
  const Tensor& x = v(a);
  int c = x.dim(0);
  int64_t hw = static_cast<int64_t>(x.dim(1)) * x.dim(2);
  Tensor y({c});
  for (int ch = 0; ch < c; ++ch) {
    double s = 0.0;
    const double* p = x.data() + ch * hw;
    for (int64_t i = 0; i < hw; ++i) s += p[i];
    y[ch] = s / static_cast<double>(hw);
  }
  bool rg = requires_grad(a);
  Value out{push(std::move(y), rg)};
  if (rg) {
    int ia = a.id, io = out.id;
    nodes_[static_cast<size_t>(io)].back = [this, ia, io, hw] {
      const Tensor& g = nodes_[static_cast<size_t>(io)].grad;
      Tensor& da = gbuf(ia);
      int c2 = da.dim(0);
      for (int ch = 0; ch < c2; ++ch) {
        double gi = g[ch] / static_cast<double>(hw);
        double* p = da.data() + ch * hw;
        for (int64_t i = 0; i < hw; ++i) p[i] += gi;
      }
    };
  }
  return out;
}

Value Tape::linear(Value x, Value w, Value b) {
  check(x, "linear");
  check(w, "linear");
  const Tensor& tx = v(x);
  const Tensor& tw = v(w);
  if (tx.rank() != 1 || tw.rank() != 2 || tw.dim(1) != tx.dim(0))
    raise(Err::ShapeMismatch, "linear " + shape_str(tw.shape()) + " x " + shape_str(tx.shape()));
  int m = tw.dim(0), n = tw.dim(1);
  Tensor y({m});
  kern::gemm(false, false, m, 1, n, 1.0, tw.data(), tx.data(), 0.0, y.data());
  if (b.valid()) {
    if (v(b).rank() != 1 || v(b).dim(0) != m) raise(Err::ShapeMismatch, "linear bias must be (M)");
    for (int i = 0; i < m; ++i) y[i] += v(b)[i];
  }
  bool rg = requires_grad(x) || requires_grad(w) || (b.valid() && requires_grad(b));
  Value out{push(std::move(y), rg)};
  if (rg) {
    int ix = x.id, iw = w.id, ib = b.valid() ? b.id : -1, io = out.id;
    nodes_[static_cast<size_t>(io)].back = [this, ix, iw, ib, io, m, n] {
      const Tensor& g = nodes_[static_cast<size_t>(io)].grad;
      if (ib >= 0 && nodes_[static_cast<size_t>(ib)].requires_grad) {
        Tensor& db = gbuf(ib);
        for (int i = 0; i < m; ++i) db[i] += g[i];
      }
      if (nodes_[static_cast<size_t>(iw)].requires_grad) {
        Tensor& dw = gbuf(iw);
        const Tensor& tx2 = nodes_[static_cast<size_t>(ix)].value;
        // dW += g (M,1) * x^T (1,N)
        kern::gemm(false, false, m, n, 1, 1.0, g.data(), tx2.data(), 1.0, dw.data());
      }
      if (nodes_[static_cast<size_t>(ix)].requires_grad) {
        Tensor& dx = gbuf(ix);
        const Tensor& tw2 = nodes_[static_cast<size_t>(iw)].value;
        kern::gemm(true, false, n, 1, m, 1.0, tw2.data(), g.data(), 1.0, dx.data());
      }
    };
  }
  return out;
}

Value Tape::tokens_from_chw(Value a) {
  check(a, "tokens_from_chw");
  const Tensor& x = v(a);
  if (x.rank() != 3) raise(Err::ShapeMismatch, "tokens_from_chw expects (C,H,W)");
  int c = x.dim(0);
  int64_t t = static_cast<int64_t>(x.dim(1)) * x.dim(2);
  Tensor y({static_cast<int>(t), c});
  for (int ch = 0; ch < c; ++ch)
    for (int64_t p = 0; p < t; ++p) y[p * c + ch] = x[ch * t + p];
  bool rg = requires_grad(a);
  Value out{push(std::move(y), rg)};
  if (rg) {
    int ia = a.id, io = out.id;
    nodes_[static_cast<size_t>(io)].back = [this, ia, io, c, t] {
      const Tensor& g = nodes_[static_cast<size_t>(io)].grad;
      Tensor& da = gbuf(ia);
      for (int ch = 0; ch < c; ++ch)
        for (int64_t p = 0; p < t; ++p) da[ch * t + p] += g[p * c + ch];
    };
  }
  return out;
}

Value Tape::chw_from_tokens(Value a, int c, int h, int w) {
  check(a, "chw_from_tokens");
  const Tensor& x = v(a);
  if (x.rank() != 2 || x.dim(0) != h * w || x.dim(1) != c)
    raise(Err::ShapeMismatch, "chw_from_tokens: tokens " + shape_str(x.shape()) + " vs (" +
                                  std::to_string(c) + "," + std::to_string(h) + "," +
                                  std::to_string(w) + ")");
  int64_t t = static_cast<int64_t>(h) * w;
  Tensor y({c, h, w});
  for (int ch = 0; ch < c; ++ch)
    for (int64_t p = 0; p < t; ++p) y[ch * t + p] = x[p * c + ch];
  bool rg = requires_grad(a);
  Value out{push(std::move(y), rg)};
  if (rg) {
    int ia = a.id, io = out.id;
    nodes_[static_cast<size_t>(io)].back = [this, ia, io, c, t] {
      const Tensor& g = nodes_[static_cast<size_t>(io)].grad;
      Tensor& da = gbuf(ia);
      for (int ch = 0; ch < c; ++ch)
        for (int64_t p = 0; p < t; ++p) da[p * c + ch] += g[ch * t + p];
    };
  }
  return out;
}

Value Tape::matmul(Value a, Value b) {
  check(a, "matmul");
  check(b, "matmul");
  const Tensor& ta = v(a);
  const Tensor& tb = v(b);
  if (ta.rank() != 2 || tb.rank() != 2 || ta.dim(1) != tb.dim(0))
    raise(Err::ShapeMismatch, "matmul " + shape_str(ta.shape()) + " x " + shape_str(tb.shape()));
  int m = ta.dim(0), k = ta.dim(1), n = tb.dim(1);
  Tensor y({m, n});
  kern::gemm(false, false, m, n, k, 1.0, ta.data(), tb.data(), 0.0, y.data());
  bool rg = requires_grad(a) || requires_grad(b);
  Value out{push(std::move(y), rg)};
  if (rg) {
    int ia = a.id, ib = b.id, io = out.id;
    nodes_[static_cast<size_t>(io)].back = [this, ia, ib, io, m, k, n] {
      const Tensor& g = nodes_[static_cast<size_t>(io)].grad;
      if (nodes_[static_cast<size_t>(ia)].requires_grad) {
        Tensor& da = gbuf(ia);
        const Tensor& tb2 = nodes_[static_cast<size_t>(ib)].value;
        kern::gemm(false, true, m, k, n, 1.0, g.data(), tb2.data(), 1.0, da.data());
      }
      if (nodes_[static_cast<size_t>(ib)].requires_grad) {
        Tensor& db = gbuf(ib);
        const Tensor& ta2 = nodes_[static_cast<size_t>(ia)].value;
        kern::gemm(true, false, k, n, m, 1.0, ta2.data(), g.data(), 1.0, db.data());
      }
    };
  }
  return out;
}

Value Tape::matmul_nt(Value a, Value b) {
  check(a, "matmul_nt");
  check(b, "matmul_nt");
  const Tensor& ta = v(a);
  const Tensor& tb = v(b);
  if (ta.rank() != 2 || tb.rank() != 2 || ta.dim(1) != tb.dim(1))
    raise(Err::ShapeMismatch,
          "matmul_nt " + shape_str(ta.shape()) + " x " + shape_str(tb.shape()) + "^T");
  int m = ta.dim(0), k = ta.dim(1), n = tb.dim(0);
  Tensor y({m, n});
  kern::gemm(false, true, m, n, k, 1.0, ta.data(), tb.data(), 0.0, y.data());
  bool rg = requires_grad(a) || requires_grad(b);
  Value out{push(std::move(y), rg)};
  if (rg) {
    int ia = a.id, ib = b.id, io = out.id;
    nodes_[static_cast<size_t>(io)].back = [this, ia, ib, io, m, k, n] {
      const Tensor& g = nodes_[static_cast<size_t>(io)].grad;
      if (nodes_[static_cast<size_t>(ia)].requires_grad) {
        Tensor& da = gbuf(ia);
        const Tensor& tb2 = nodes_[static_cast<size_t>(ib)].value;
        kern::gemm(false, false, m, k, n, 1.0, g.data(), tb2.data(), 1.0, da.data());
      }
      if (nodes_[static_cast<size_t>(ib)].requires_grad) {
        Tensor& db = gbuf(ib);
        const Tensor& ta2 = nodes_[static_cast<size_t>(ia)].value;
        kern::gemm(true, false, n, k, m, 1.0, g.data(), ta2.data(), 1.0, db.data());
      }
    };
  }
  return out;
}

Value Tape::softmax_rows(Value a) {
  check(a, "softmax_rows");
  const Tensor& x = v(a);
  if (x.rank() != 2) raise(Err::ShapeMismatch, "softmax_rows expects a matrix");
  int m = x.dim(0), n = x.dim(1);
  Tensor y({m, n});
  for (int i = 0; i < m; ++i) {
    const double* xr = x.data() + static_cast<size_t>(i) * n;
    double* yr = y.data() + static_cast<size_t>(i) * n;
    double mx = xr[0];
    for (int j = 1; j < n; ++j) mx = std::max(mx, xr[j]);
    double s = 0.0;
    for (int j = 0; j < n; ++j) {
      yr[j] = std::exp(xr[j] - mx);
      s += yr[j];
    }
    for (int j = 0; j < n; ++j) yr[j] /= s;
  }
  bool rg = requires_grad(a);
  Value out{push(std::move(y), rg)};
  if (rg) {
    int ia = a.id, io = out.id;
    nodes_[static_cast<size_t>(io)].back = [this, ia, io, m, n] {
      const Node& o = nodes_[static_cast<size_t>(io)];
      Tensor& da = gbuf(ia);
      for (int i = 0; i < m; ++i) {
        const double* g = o.grad.data() + static_cast<size_t>(i) * n;
        const double* y2 = o.value.data() + static_cast<size_t>(i) * n;
        double* d = da.data() + static_cast<size_t>(i) * n;
        double dot = 0.0;
        for (int j = 0; j < n; ++j) dot += g[j] * y2[j];
        for (int j = 0; j < n; ++j) d[j] += y2[j] * (g[j] - dot);
      }
    };
  }
  return out;
}

Value Tape::channel_pow(Value x, Value a) {
  check(x, "channel_pow");
  check(a, "channel_pow");
  const Tensor& tx = v(x);
  const Tensor& ta = v(a);
  if (tx.rank() != 3 || ta.rank() != 1 || ta.dim(0) != tx.dim(0))
    raise(Err::ShapeMismatch,
          "channel_pow " + shape_str(tx.shape()) + " with " + shape_str(ta.shape()));
  int c = tx.dim(0);
  int64_t hw = static_cast<int64_t>(tx.dim(1)) * tx.dim(2);
  Tensor y(tx.shape());
  for (int ch = 0; ch < c; ++ch)
    for (int64_t i = 0; i < hw; ++i) y[ch * hw + i] = std::pow(tx[ch * hw + i], ta[ch]);
  bool rg = requires_grad(x) || requires_grad(a);
  Value out{push(std::move(y), rg)};
  if (rg) {
    int ix = x.id, ia = a.id, io = out.id;
    nodes_[static_cast<size_t>(io)].back = [this, ix, ia, io, c, hw] {
      const Node& o = nodes_[static_cast<size_t>(io)];
      const Tensor& g = o.grad;
      const Tensor& tx2 = nodes_[static_cast<size_t>(ix)].value;
      const Tensor& ta2 = nodes_[static_cast<size_t>(ia)].value;
      if (nodes_[static_cast<size_t>(ix)].requires_grad) {
        Tensor& dx = gbuf(ix);
        for (int ch = 0; ch < c; ++ch)
          for (int64_t i = 0; i < hw; ++i)
            dx[ch * hw + i] +=
                g[ch * hw + i] * ta2[ch] * std::pow(tx2[ch * hw + i], ta2[ch] - 1.0);
      }
      if (nodes_[static_cast<size_t>(ia)].requires_grad) {
        Tensor& da = gbuf(ia);
        for (int ch = 0; ch < c; ++ch) {
          double s = 0.0;
          for (int64_t i = 0; i < hw; ++i)
            s += g[ch * hw + i] * o.value[ch * hw + i] * std::log(tx2[ch * hw + i]);
          da[ch] += s;
        }
      }
    };
  }
  return out;
}

Value Tape::channel_scale(Value x, Value s) {
  check(x, "channel_scale");
  check(s, "channel_scale");
  const Tensor& tx = v(x);
  const Tensor& ts = v(s);
  if (tx.rank() != 3 || ts.rank() != 1 || ts.dim(0) != tx.dim(0))
    raise(Err::ShapeMismatch,
          "channel_scale " + shape_str(tx.shape()) + " with " + shape_str(ts.shape()));
  int c = tx.dim(0);
  int64_t hw = static_cast<int64_t>(tx.dim(1)) * tx.dim(2);
  Tensor y(tx.shape());
  for (int ch = 0; ch < c; ++ch)
    for (int64_t i = 0; i < hw; ++i) y[ch * hw + i] = ts[ch] * tx[ch * hw + i];
  bool rg = requires_grad(x) || requires_grad(s);
  Value out{push(std::move(y), rg)};
  if (rg) {
    int ix = x.id, is = s.id, io = out.id;
    nodes_[static_cast<size_t>(io)].back = [this, ix, is, io, c, hw] {
      const Tensor& g = nodes_[static_cast<size_t>(io)].grad;
      const Tensor& tx2 = nodes_[static_cast<size_t>(ix)].value;
      const Tensor& ts2 = nodes_[static_cast<size_t>(is)].value;
      if (nodes_[static_cast<size_t>(ix)].requires_grad) {
        Tensor& dx = gbuf(ix);
        for (int ch = 0; ch < c; ++ch)
          for (int64_t i = 0; i < hw; ++i) dx[ch * hw + i] += g[ch * hw + i] * ts2[ch];
      }
      if (nodes_[static_cast<size_t>(is)].requires_grad) {
        Tensor& ds = gbuf(is);
        for (int ch = 0; ch < c; ++ch) {
          double acc = 0.0;
          for (int64_t i = 0; i < hw; ++i) acc += g[ch * hw + i] * tx2[ch * hw + i];
          ds[ch] += acc;
        }
      }
    };
  }
  return out;
}

Value Tape::blend_map(Value w, Value a, Value b) {
  check(w, "blend_map");
  check(a, "blend_map");
  check(b, "blend_map");
  const Tensor& tw = v(w);
  const Tensor& ta = v(a);
  const Tensor& tb = v(b);
  if (!ta.same_shape(tb) || tw.rank() != 3 || tw.dim(0) != 1 || tw.dim(1) != ta.dim(1) ||
      tw.dim(2) != ta.dim(2))
    raise(Err::ShapeMismatch, "blend_map w=" + shape_str(tw.shape()) + " a=" +
                                  shape_str(ta.shape()) + " b=" + shape_str(tb.shape()));
  int c = ta.dim(0);
  int64_t hw = static_cast<int64_t>(ta.dim(1)) * ta.dim(2);
  Tensor y(ta.shape());
  for (int ch = 0; ch < c; ++ch)
    for (int64_t i = 0; i < hw; ++i)
      y[ch * hw + i] = tw[i] * ta[ch * hw + i] + (1.0 - tw[i]) * tb[ch * hw + i];
  bool rg = requires_grad(w) || requires_grad(a) || requires_grad(b);
  Value out{push(std::move(y), rg)};
  if (rg) {
    int iw = w.id, ia = a.id, ib = b.id, io = out.id;
    nodes_[static_cast<size_t>(io)].back = [this, iw, ia, ib, io, c, hw] {
      const Tensor& g = nodes_[static_cast<size_t>(io)].grad;
      const Tensor& tw2 = nodes_[static_cast<size_t>(iw)].value;
      const Tensor& ta2 = nodes_[static_cast<size_t>(ia)].value;
      const Tensor& tb2 = nodes_[static_cast<size_t>(ib)].value;
      if (nodes_[static_cast<size_t>(iw)].requires_grad) {
        Tensor& dw = gbuf(iw);
        for (int ch = 0; ch < c; ++ch)
          for (int64_t i = 0; i < hw; ++i)
            dw[i] += g[ch * hw + i] * (ta2[ch * hw + i] - tb2[ch * hw + i]);
      }
      if (nodes_[static_cast<size_t>(ia)].requires_grad) {
        Tensor& da = gbuf(ia);
        for (int ch = 0; ch < c; ++ch)
          for (int64_t i = 0; i < hw; ++i) da[ch * hw + i] += g[ch * hw + i] * tw2[i];
      }
      if (nodes_[static_cast<size_t>(ib)].requires_grad) {
        Tensor& db = gbuf(ib);
        for (int ch = 0; ch < c; ++ch)
          for (int64_t i = 0; i < hw; ++i) db[ch * hw + i] += g[ch * hw + i] * (1.0 - tw2[i]);
      }
    };
  }
  return out;
}

Value Tape::diff_x(Value a) {
  check(a, "diff_x");
  const Tensor& x = v(a);
  if (x.rank() != 3) raise(Err::ShapeMismatch, "diff_x expects (C,H,W)");
  int c = x.dim(0), h = x.dim(1), w = x.dim(2);
  Tensor y(x.shape());
  for (int ch = 0; ch < c; ++ch)
    for (int i = 0; i < h; ++i)
      for (int j = 0; j < w; ++j)
        y.at(ch, i, j) = j + 1 < w ? x.at(ch, i, j + 1) - x.at(ch, i, j) : 0.0;
  bool rg = requires_grad(a);
  Value out{push(std::move(y), rg)};
  if (rg) {
    int ia = a.id, io = out.id;
    nodes_[static_cast<size_t>(io)].back = [this, ia, io, c, h, w] {
      const Tensor& g = nodes_[static_cast<size_t>(io)].grad;
      Tensor& da = gbuf(ia);
      for (int ch = 0; ch < c; ++ch)
        for (int i = 0; i < h; ++i)
          for (int j = 0; j + 1 < w; ++j) {
            da.at(ch, i, j + 1) += g.at(ch, i, j);
            da.at(ch, i, j) -= g.at(ch, i, j);
          }
    };
  }
  return out;
}

Value Tape::diff_y(Value a) {
  check(a, "diff_y");
  const Tensor& x = v(a);
  if (x.rank() != 3) raise(Err::ShapeMismatch, "diff_y expects (C,H,W)");
  int c = x.dim(0), h = x.dim(1), w = x.dim(2);
  Tensor y(x.shape());
  for (int ch = 0; ch < c; ++ch)
    for (int i = 0; i < h; ++i)
      for (int j = 0; j < w; ++j)
        y.at(ch, i, j) = i + 1 < h ? x.at(ch, i + 1, j) - x.at(ch, i, j) : 0.0;
  bool rg = requires_grad(a);
  Value out{push(std::move(y), rg)};
  if (rg) {
    int ia = a.id, io = out.id;
    nodes_[static_cast<size_t>(io)].back = [this, ia, io, c, h, w] {
      const Tensor& g = nodes_[static_cast<size_t>(io)].grad;
      Tensor& da = gbuf(ia);
      for (int ch = 0; ch < c; ++ch)
        for (int i = 0; i + 1 < h; ++i)
          for (int j = 0; j < w; ++j) {
            da.at(ch, i + 1, j) += g.at(ch, i, j);
            da.at(ch, i, j) -= g.at(ch, i, j);
          }
    };
  }
  return out;
}

Value Tape::mean_all(Value a) {
  check(a, "mean_all");
  const Tensor& x = v(a);
  double s = 0.0;
  for (int64_t i = 0; i < x.numel(); ++i) s += x[i];
  int64_t n = x.numel();
  Tensor y = Tensor::scalar(s / static_cast<double>(n));
  bool rg = requires_grad(a);
  Value out{push(std::move(y), rg)};
  if (rg) {
    int ia = a.id, io = out.id;
    nodes_[static_cast<size_t>(io)].back = [this, ia, io, n] {
      double g = nodes_[static_cast<size_t>(io)].grad[0] / static_cast<double>(n);
      Tensor& da = gbuf(ia);
      for (int64_t i = 0; i < da.numel(); ++i) da[i] += g;
    };
  }
  return out;
}

Value Tape::sum_all(Value a) {
  check(a, "sum_all");
  const Tensor& x = v(a);
  double s = 0.0;
  for (int64_t i = 0; i < x.numel(); ++i) s += x[i];
  Tensor y = Tensor::scalar(s);
  bool rg = requires_grad(a);
  Value out{push(std::move(y), rg)};
  if (rg) {
    int ia = a.id, io = out.id;
    nodes_[static_cast<size_t>(io)].back = [this, ia, io] {
      double g = nodes_[static_cast<size_t>(io)].grad[0];
      Tensor& da = gbuf(ia);
      for (int64_t i = 0; i < da.numel(); ++i) da[i] += g;
    };
  }
  return out;
}

Value Tape::mean_per_channel(Value a) {
  check(a, "mean_per_channel");
  const Tensor& x = v(a);
  if (x.rank() != 3) raise(Err::ShapeMismatch, "mean_per_channel expects (C,H,W)");
  return global_avg_pool(a);
}

Value Tape::stop_gradient(Value a) {
  check(a, "stop_gradient");
  return {push(v(a), false)};
}

// ---------------------------------------------------------------------------
// reverse pass
// ---------------------------------------------------------------------------

void Tape::backward(Value root) {
  check(root, "backward");
  if (ran_backward_) raise(Err::Internal, "backward may only run once per tape");
  ran_backward_ = true;
  Node& r = nodes_[static_cast<size_t>(root.id)];
  if (r.value.numel() != 1) raise(Err::Internal, "backward root must be scalar");
  if (!r.requires_grad) return;
  gbuf(root.id)[0] = 1.0;
  for (int i = root.id; i >= 0; --i) {
    Node& n = nodes_[static_cast<size_t>(i)];
    if (n.grad_alloc && n.back) n.back();
  }
}

void Tape::accumulate_param_grads(double scale) {
  for (Node& n : nodes_) {
    if (!n.bound || !n.grad_alloc) continue;
    Tensor& dst = n.bound->grad;
    for (int64_t i = 0; i < dst.numel(); ++i) dst[i] += scale * n.grad[i];
  }
}

}  // namespace ad
}  // namespace sllen
