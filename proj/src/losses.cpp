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

#include "sllen/losses.hpp"

#include <cmath>
#include <sstream>

#include "kernels.hpp"
#include "sllen/image.hpp"
#include "sllen/serialize.hpp"

namespace sllen {

namespace {

// Stage widths for the seeded default stack: 3 -> 8 -> 16 -> 32, each a 3x3
// stride-2 conv followed by ReLU.
constexpr int kSeededWidths[] = {8, 16, 32};

void he_fill(Tensor& w, Rng& rng) {
  int64_t fan = static_cast<int64_t>(w.dim(1)) * w.dim(2) * w.dim(3);
  double std = std::sqrt(2.0 / static_cast<double>(fan));
  for (int64_t i = 0; i < w.numel(); ++i) w[i] = std * rng.normal();
}

double mse(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b))
    raise(Err::ShapeMismatch, "feature shapes differ: " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  double s = 0;
  for (int64_t i = 0; i < a.numel(); ++i) {
    double d = a[i] - b[i];
    s += d * d;
  }
  return s / static_cast<double>(a.numel());
}

}  // namespace

FeatureExtractor FeatureExtractor::identity() { return FeatureExtractor{}; }

FeatureExtractor FeatureExtractor::seeded(std::uint64_t seed) {
  FeatureExtractor fe;
  int in = 3;
  int idx = 1;
  for (int out : kSeededWidths) {
    Stage st;
    st.w = Tensor::zeros({out, in, 3, 3});
    st.b = Tensor::zeros({out});
    Rng rng(hash_combine(seed, hash_str("feat.stage" + std::to_string(idx))));
    he_fill(st.w, rng);
    fe.stages_.push_back(std::move(st));
    in = out;
    ++idx;
  }
  return fe;
}

FeatureExtractor FeatureExtractor::from_file(const std::string& path) {
  BlockFile bf = read_blocks(path);
  FeatureExtractor fe;
  int in = 3;
  for (int idx = 1;; ++idx) {
    std::string stem = "feat.stage" + std::to_string(idx);
    const Block* w = bf.find(stem + ".w");
    if (!w) break;
    const Block* b = bf.find(stem + ".b");
    if (!b) raise(Err::WeightLoadError, "missing block " + stem + ".b");
    if (w->tensor.rank() != 4 || w->tensor.dim(1) != in || w->tensor.dim(2) != 3 ||
        w->tensor.dim(3) != 3)
      raise(Err::WeightLoadError,
            stem + ".w has shape " + shape_str(w->tensor.shape()) + ", expected (*," +
                std::to_string(in) + ",3,3)");
    int out = static_cast<int>(w->tensor.dim(0));
    if (b->tensor.rank() != 1 || b->tensor.dim(0) != out)
      raise(Err::WeightLoadError, stem + ".b does not match " + stem + ".w");
    fe.stages_.push_back(Stage{w->tensor, b->tensor});
    in = out;
  }
  if (fe.stages_.empty()) raise(Err::WeightLoadError, "no feat.stageN.w blocks in " + path);
  return fe;
}

FeatureExtractor FeatureExtractor::make(const FeatureExtractorConfig& cfg) {
  if (cfg.kind == "identity") return identity();
  if (cfg.kind == "random") return seeded(cfg.seed);
  if (cfg.kind == "file") {
    if (cfg.weights_path.empty())
      raise(Err::ConfigError, "perceptual extractor kind \"file\" needs a weights path");
    return from_file(cfg.weights_path);
  }
  raise(Err::ConfigError, "unknown perceptual extractor kind \"" + cfg.kind +
                              "\" (want identity, random, or file)");
}

std::vector<Tensor> FeatureExtractor::features(const Tensor& img) const {
  if (stages_.empty()) return {img};
  std::vector<Tensor> out;
  Tensor x = img;
  for (const Stage& st : stages_) {
    out.push_back(kern::relu(kern::conv2d(x, st.w, &st.b, 2, 1)));
    x = out.back();
  }
  return out;
}

std::vector<ad::Value> FeatureExtractor::features(ad::Tape& tape, ad::Value img) const {
  if (stages_.empty()) return {img};
  std::vector<ad::Value> out;
  ad::Value x = img;
  for (const Stage& st : stages_) {
    ad::Value w = tape.input(st.w);
    ad::Value b = tape.input(st.b);
    x = tape.relu(tape.conv2d(x, w, b, 2, 1));
    out.push_back(x);
  }
  return out;
}

std::uint64_t FeatureExtractor::fingerprint() const {
  std::uint64_t h = 1469598103934665603ULL;
  auto feed = [&h](const void* ptr, size_t n) {
    const unsigned char* p = static_cast<const unsigned char*>(ptr);
    for (size_t i = 0; i < n; ++i) {
      h ^= p[i];
      h *= 1099511628211ULL;
    }
  };
  if (stages_.empty()) {
    feed("identity", 8);
    return h;
  }
  for (const Stage& st : stages_) {
    feed(st.w.data(), sizeof(double) * static_cast<size_t>(st.w.numel()));
    feed(st.b.data(), sizeof(double) * static_cast<size_t>(st.b.numel()));
  }
  return h;
}

void FeatureExtractor::save_weights(const std::string& path) const {
  if (stages_.empty())
    raise(Err::InvalidParam, "the identity extractor has no weights to save");
  BlockWriter bw;
  bw.set_header("{\"kind\":\"feature-extractor\",\"stages\":" +
                std::to_string(stages_.size()) + "}");
  for (size_t i = 0; i < stages_.size(); ++i) {
    std::string stem = "feat.stage" + std::to_string(i + 1);
    bw.add(stem + ".w", stages_[i].w);
    bw.add(stem + ".b", stages_[i].b);
  }
  bw.write(path);
}

std::string LossBreakdown::csv_header() { return "step,l_s,l_vgg,l_kd,l_itv,l_gra,total"; }

std::string LossBreakdown::csv_row(std::int64_t step) const {
  std::ostringstream os;
  os.precision(12);
  os << step << ',' << l_s << ',' << l_vgg << ',' << l_kd << ',' << l_itv << ',' << l_gra << ','
     << total;
  return os.str();
}

void check_finite(const LossBreakdown& b) {
  struct Named {
    const char* name;
    double v;
  };
  const Named terms[] = {{"l_s", b.l_s},     {"l_vgg", b.l_vgg}, {"l_kd", b.l_kd},
                         {"l_itv", b.l_itv}, {"l_gra", b.l_gra}, {"total", b.total}};
  for (const Named& t : terms)
    if (!std::isfinite(t.v))
      raise(Err::NonFiniteLoss, std::string(t.name) + " is non-finite (" + std::to_string(t.v) + ")");
}

namespace losses {

double smooth_loss(const Tensor& O, const Tensor& GT, double delta) {
  if (!O.same_shape(GT))
    raise(Err::ShapeMismatch, "output " + shape_str(O.shape()) + " vs target " + shape_str(GT.shape()));
  double s = 0;
  for (int64_t i = 0; i < O.numel(); ++i) {
    double e = std::fabs(O[i] - GT[i]);
    s += e <= delta ? 0.5 * e * e : delta * (e - 0.5 * delta);
  }
  return s / static_cast<double>(O.numel());
}

double perceptual_loss(const Tensor& O, const Tensor& GT, const FeatureExtractor& feat) {
  if (!O.same_shape(GT))
    raise(Err::ShapeMismatch, "output " + shape_str(O.shape()) + " vs target " + shape_str(GT.shape()));
  std::vector<Tensor> fo = feat.features(O);
  std::vector<Tensor> fg = feat.features(GT);
  double s = 0;
  for (size_t i = 0; i < fo.size(); ++i) s += mse(fo[i], fg[i]);
  return s;
}

double kd_loss(const std::vector<Tensor>& E, const std::vector<Tensor>& D) {
  if (E.size() != D.size())
    raise(Err::LengthMismatch, "teacher has " + std::to_string(E.size()) + " embeddings, student " +
                                   std::to_string(D.size()));
  size_t n = E.size();
  double s = 0;
  for (size_t i = 0; i < n; ++i) s += mse(E[i], D[n - 1 - i]);
  return s;
}

double itv_loss(const Tensor& U) {
  GradientField g = spatial_gradients(U);
  double s = 0;
  for (int64_t i = 0; i < U.numel(); ++i) s += g.gx[i] * g.gx[i] + g.gy[i] * g.gy[i];
  return s / static_cast<double>(U.numel());
}

double gra_loss(const std::vector<Tensor>& batch_O, double G) {
  if (batch_O.empty()) raise(Err::InvalidParam, "gra_loss needs at least one image");
  double total = 0;
  for (const Tensor& O : batch_O) {
    std::vector<double> avg = avg_gradient(O);
    double s = 0;
    for (double a : avg) s += std::fabs(a - G);
    total += s / static_cast<double>(avg.size());
  }
  return total / static_cast<double>(batch_O.size());
}

LossBreakdown total_loss(const ForwardTrace& trace, const Tensor& GT, const Tensor& low,
                         const LossWeights& w, const FeatureExtractor& feat) {
  LossBreakdown b;
  b.l_s = smooth_loss(trace.O, GT, w.huber_delta);
  b.l_vgg = perceptual_loss(trace.O, GT, feat);
  b.l_kd = kd_loss(trace.E, trace.D);
  b.l_itv = itv_loss(
      retinex_decompose(ImageTensor::rgb(low), ImageTensor::rgb(trace.O), 1e-4).data);
  b.l_gra = gra_loss({trace.O}, w.G);
  b.total = b.l_s + b.l_vgg + w.lambda_kd * b.l_kd + w.lambda_itv * b.l_itv + w.lambda_gra * b.l_gra;
  check_finite(b);
  return b;
}

ad::Value smooth_term(ad::Tape& t, ad::Value O, ad::Value GT_in, double delta) {
  return t.mean_all(t.huber(t.sub(O, GT_in), delta));
}

ad::Value perceptual_term(ad::Tape& t, const FeatureExtractor& feat, ad::Value O,
                          const std::vector<Tensor>& gt_feats) {
  std::vector<ad::Value> fo = feat.features(t, O);
  if (fo.size() != gt_feats.size())
    raise(Err::LengthMismatch, "cached target features do not match the extractor's tap count");
  ad::Value acc;
  for (size_t i = 0; i < fo.size(); ++i) {
    ad::Value d = t.sub(fo[i], t.input(gt_feats[i]));
    ad::Value m = t.mean_all(t.mul(d, d));
    acc = acc.valid() ? t.add(acc, m) : m;
  }
  return acc;
}

ad::Value kd_term(ad::Tape& t, const std::vector<ad::Value>& E, const std::vector<ad::Value>& D) {
  if (E.size() != D.size())
    raise(Err::LengthMismatch, "teacher has " + std::to_string(E.size()) + " embeddings, student " +
                                   std::to_string(D.size()));
  size_t n = E.size();
  ad::Value acc;
  for (size_t i = 0; i < n; ++i) {
    ad::Value d = t.sub(t.stop_gradient(E[i]), D[n - 1 - i]);
    ad::Value m = t.mean_all(t.mul(d, d));
    acc = acc.valid() ? t.add(acc, m) : m;
  }
  return acc;
}

ad::Value itv_term(ad::Tape& t, ad::Value low, ad::Value O, double eps) {
  ad::Value U = t.divide(low, t.add_scalar(O, eps));
  ad::Value gx = t.diff_x(U);
  ad::Value gy = t.diff_y(U);
  return t.mean_all(t.add(t.mul(gx, gx), t.mul(gy, gy)));
}

ad::Value gra_term(ad::Tape& t, ad::Value O, double G) {
  ad::Value mag = t.mul_scalar(t.add(t.abs_val(t.diff_x(O)), t.abs_val(t.diff_y(O))), 0.5);
  ad::Value avg = t.mean_per_channel(mag);
  return t.mean_all(t.abs_val(t.add_scalar(avg, -G)));
}

TapeLossTerms total_loss_on_tape(ad::Tape& t, const SllenNet::Trace& trace, ad::Value low,
                                 const Tensor& GT, const std::vector<Tensor>& gt_feats,
                                 const LossWeights& w, const FeatureExtractor& feat) {
  TapeLossTerms r;
  ad::Value gt = t.input(GT);
  r.l_s = smooth_term(t, trace.O, gt, w.huber_delta);
  r.l_vgg = perceptual_term(t, feat, trace.O, gt_feats);
  r.l_kd = kd_term(t, trace.E, trace.D);
  r.l_itv = itv_term(t, low, trace.O);
  r.l_gra = gra_term(t, trace.O, w.G);
  r.total = t.add(r.l_s, r.l_vgg);
  r.total = t.add(r.total, t.mul_scalar(r.l_kd, w.lambda_kd));
  r.total = t.add(r.total, t.mul_scalar(r.l_itv, w.lambda_itv));
  r.total = t.add(r.total, t.mul_scalar(r.l_gra, w.lambda_gra));
  return r;
}

LossBreakdown read_terms(const ad::Tape& t, const TapeLossTerms& terms) {
  LossBreakdown b;
  b.l_s = t.val(terms.l_s)[0];
  b.l_vgg = t.val(terms.l_vgg)[0];
  b.l_kd = t.val(terms.l_kd)[0];
  b.l_itv = t.val(terms.l_itv)[0];
  b.l_gra = t.val(terms.l_gra)[0];
  b.total = t.val(terms.total)[0];
  return b;
}

}  // namespace losses
}  // namespace sllen
