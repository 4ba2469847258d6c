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

#include "sllen/metrics.hpp"

#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include "sllen/dataset.hpp"

namespace fs = std::filesystem;

namespace sllen {

namespace {

constexpr double kC1 = 0.01 * 0.01;
constexpr double kC2 = 0.03 * 0.03;
constexpr int kWin = 11;
constexpr double kSigma = 1.5;
constexpr int kLoeCap = 100;
constexpr int kBins = 256;

void require_same_shape(const ImageTensor& a, const ImageTensor& b, const char* who) {
  if (!a.data.same_shape(b.data))
    raise(Err::ShapeMismatch, std::string(who) + ": " + shape_str(a.data.shape()) + " vs " +
                                  shape_str(b.data.shape()));
}

// (H,W) luma plane; already the only channel for grayscale input.
Tensor luma(const ImageTensor& img) {
  Tensor g = to_gray(img);
  return g;
}

std::vector<double> gaussian_kernel_1d() {
  std::vector<double> k(kWin);
  double sum = 0;
  for (int i = 0; i < kWin; ++i) {
    double d = i - (kWin - 1) / 2.0;
    k[static_cast<size_t>(i)] = std::exp(-d * d / (2.0 * kSigma * kSigma));
    sum += k[static_cast<size_t>(i)];
  }
  for (double& v : k) v /= sum;
  return k;
}

int histogram_bin(double v) {
  int b = static_cast<int>(v * kBins);
  if (b < 0) b = 0;
  if (b >= kBins) b = kBins - 1;
  return b;
}

std::vector<int64_t> gray_histogram(const Tensor& g) {
  std::vector<int64_t> h(kBins, 0);
  for (int64_t i = 0; i < g.numel(); ++i) ++h[static_cast<size_t>(histogram_bin(g[i]))];
  return h;
}

// SSIM from whole-image first and second moments; used by ceiq so the score
// stays a function of the histogram pair alone.
double global_stats_ssim(const Tensor& x, const Tensor& y) {
  int64_t n = x.numel();
  double mx = 0, my = 0;
  for (int64_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double vx = 0, vy = 0, cov = 0;
  for (int64_t i = 0; i < n; ++i) {
    vx += (x[i] - mx) * (x[i] - mx);
    vy += (y[i] - my) * (y[i] - my);
    cov += (x[i] - mx) * (y[i] - my);
  }
  vx /= static_cast<double>(n);
  vy /= static_cast<double>(n);
  cov /= static_cast<double>(n);
  return ((2 * mx * my + kC1) * (2 * cov + kC2)) / ((mx * mx + my * my + kC1) * (vx + vy + kC2));
}

// Lightness plane for LOE: per-pixel channel max, nearest-neighbor reduced
// so the longer side fits kLoeCap.
Tensor lightness_reduced(const ImageTensor& img) {
  int c = img.channels(), h = img.height(), w = img.width();
  Tensor light({h, w});
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double m = img.data.at(0, y, x);
      for (int ch = 1; ch < c; ++ch) m = std::max(m, img.data.at(ch, y, x));
      light.at(y, x) = m;
    }
  int longer = std::max(h, w);
  if (longer <= kLoeCap) return light;
  double scale = static_cast<double>(kLoeCap) / longer;
  int nh = std::max(1, static_cast<int>(std::llround(h * scale)));
  int nw = std::max(1, static_cast<int>(std::llround(w * scale)));
  Tensor out({nh, nw});
  for (int y = 0; y < nh; ++y) {
    int sy = std::min(h - 1, static_cast<int>((y + 0.5) * h / nh));
    for (int x = 0; x < nw; ++x) {
      int sx = std::min(w - 1, static_cast<int>((x + 0.5) * w / nw));
      out.at(y, x) = light.at(sy, sx);
    }
  }
  return out;
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(10);
  os << v;
  return os.str();
}

}  // namespace

double psnr(const ImageTensor& O, const ImageTensor& GT) {
  require_same_shape(O, GT, "psnr");
  double mse = 0;
  int64_t n = O.data.numel();
  for (int64_t i = 0; i < n; ++i) {
    double d = O.data[i] - GT.data[i];
    mse += d * d;
  }
  mse /= static_cast<double>(n);
  if (mse == 0.0) return 100.0;
  return 10.0 * std::log10(1.0 / mse);
}

double ssim(const ImageTensor& O, const ImageTensor& GT) {
  require_same_shape(O, GT, "ssim");
  Tensor x = luma(O);
  Tensor y = luma(GT);
  int h = x.dim(0), w = x.dim(1);
  if (h < kWin || w < kWin)
    raise(Err::ImageTooSmall, "ssim needs at least " + std::to_string(kWin) + "x" +
                                  std::to_string(kWin) + ", got " + std::to_string(h) + "x" +
                                  std::to_string(w));

  // Separable Gaussian filtering of x, y, x^2, y^2, xy at valid positions.
  std::vector<double> k = gaussian_kernel_1d();
  int oh = h - kWin + 1, ow = w - kWin + 1;
  auto blur = [&](auto&& get) {
    // Horizontal pass over full rows, then vertical pass over valid rows.
    Tensor tmp({h, ow});
    for (int r = 0; r < h; ++r)
      for (int c = 0; c < ow; ++c) {
        double s = 0;
        for (int i = 0; i < kWin; ++i) s += k[static_cast<size_t>(i)] * get(r, c + i);
        tmp.at(r, c) = s;
      }
    Tensor out({oh, ow});
    for (int r = 0; r < oh; ++r)
      for (int c = 0; c < ow; ++c) {
        double s = 0;
        for (int i = 0; i < kWin; ++i) s += k[static_cast<size_t>(i)] * tmp.at(r + i, c);
        out.at(r, c) = s;
      }
    return out;
  };

  Tensor mx = blur([&](int r, int c) { return x.at(r, c); });
  Tensor my = blur([&](int r, int c) { return y.at(r, c); });
  Tensor mxx = blur([&](int r, int c) { return x.at(r, c) * x.at(r, c); });
  Tensor myy = blur([&](int r, int c) { return y.at(r, c) * y.at(r, c); });
  Tensor mxy = blur([&](int r, int c) { return x.at(r, c) * y.at(r, c); });

  double acc = 0;
  for (int r = 0; r < oh; ++r)
    for (int c = 0; c < ow; ++c) {
      double ux = mx.at(r, c), uy = my.at(r, c);
      double vx = mxx.at(r, c) - ux * ux;
      double vy = myy.at(r, c) - uy * uy;
      double cov = mxy.at(r, c) - ux * uy;
      acc += ((2 * ux * uy + kC1) * (2 * cov + kC2)) /
             ((ux * ux + uy * uy + kC1) * (vx + vy + kC2));
    }
  return acc / (static_cast<double>(oh) * ow);
}

double loe(const ImageTensor& low, const ImageTensor& O) {
  require_same_shape(low, O, "loe");
  Tensor a = lightness_reduced(low);
  Tensor b = lightness_reduced(O);
  int64_t m = a.numel();
  const double* pa = a.data();
  const double* pb = b.data();
  int64_t flips = 0;
  for (int64_t i = 0; i < m; ++i) {
    double ai = pa[i], bi = pb[i];
    for (int64_t j = 0; j < m; ++j) {
      bool u = ai >= pa[j];
      bool v = bi >= pb[j];
      flips += (u != v) ? 1 : 0;
    }
  }
  return static_cast<double>(flips) / static_cast<double>(m);
}

ImageTensor histeq(const ImageTensor& img) {
  Tensor g = luma(img);
  std::vector<int64_t> h = gray_histogram(g);
  int64_t n = g.numel();
  std::vector<double> map(kBins);
  int64_t cdf = 0;
  for (int i = 0; i < kBins; ++i) {
    cdf += h[static_cast<size_t>(i)];
    map[static_cast<size_t>(i)] = static_cast<double>(cdf) / static_cast<double>(n);
  }
  Tensor out = img.data;
  for (int64_t i = 0; i < out.numel(); ++i) out[i] = map[static_cast<size_t>(histogram_bin(out[i]))];
  return ImageTensor(std::move(out), img.color_space);
}

double ceiq(const ImageTensor& img) {
  ImageTensor eq = histeq(img);
  Tensor g = luma(img);
  Tensor geq = luma(eq);

  double f1 = global_stats_ssim(g, geq);

  std::vector<int64_t> hp = gray_histogram(g);
  std::vector<int64_t> hq = gray_histogram(geq);
  int64_t n = g.numel();

  double f2 = 0;
  for (int64_t c : hp) {
    if (c == 0) continue;
    double p = static_cast<double>(c) / static_cast<double>(n);
    f2 -= p * std::log2(p);
  }

  // Add-one smoothed cross-entropy between the two histograms, in units of
  // the 8-bit maximum.
  double f3 = 0;
  double denom = static_cast<double>(n + kBins);
  for (int i = 0; i < kBins; ++i) {
    double p = (static_cast<double>(hp[static_cast<size_t>(i)]) + 1.0) / denom;
    double q = (static_cast<double>(hq[static_cast<size_t>(i)]) + 1.0) / denom;
    f3 -= p * std::log2(q);
  }
  f3 /= 8.0;

  return f1 + 0.35 * f2 - 0.5 * f3;
}

MiouResult miou(const LabelMap& pred, const LabelMap& gt, int num_classes) {
  if (pred.height != gt.height || pred.width != gt.width)
    raise(Err::ShapeMismatch, "label maps are " + std::to_string(pred.height) + "x" +
                                  std::to_string(pred.width) + " vs " + std::to_string(gt.height) +
                                  "x" + std::to_string(gt.width));
  if (num_classes < 1) raise(Err::InvalidParam, "num_classes must be >= 1");

  std::vector<int64_t> inter(static_cast<size_t>(num_classes), 0);
  std::vector<int64_t> uni(static_cast<size_t>(num_classes), 0);
  size_t total = pred.ids.size();
  for (size_t i = 0; i < total; ++i) {
    int p = pred.ids[i], g = gt.ids[i];
    if (p < 0 || p >= num_classes)
      raise(Err::LabelOutOfRange, "predicted label " + std::to_string(p) + " outside [0," +
                                      std::to_string(num_classes) + ")");
    if (g < 0 || g >= num_classes)
      raise(Err::LabelOutOfRange, "ground-truth label " + std::to_string(g) + " outside [0," +
                                      std::to_string(num_classes) + ")");
    if (p == g) {
      ++inter[static_cast<size_t>(p)];
      ++uni[static_cast<size_t>(p)];
    } else {
      ++uni[static_cast<size_t>(p)];
      ++uni[static_cast<size_t>(g)];
    }
  }

  MiouResult r;
  r.per_class.assign(static_cast<size_t>(num_classes), std::nan(""));
  r.present.assign(static_cast<size_t>(num_classes), false);
  // Extended precision for the mean so small exact fractions (counts are
  // integers) survive the average without an extra rounding step.
  long double sum = 0;
  int present = 0;
  for (int c = 0; c < num_classes; ++c) {
    if (uni[static_cast<size_t>(c)] == 0) continue;
    long double iou = static_cast<long double>(inter[static_cast<size_t>(c)]) /
                      static_cast<long double>(uni[static_cast<size_t>(c)]);
    r.per_class[static_cast<size_t>(c)] = static_cast<double>(iou);
    r.present[static_cast<size_t>(c)] = true;
    sum += iou;
    ++present;
  }
  r.mean = present > 0 ? static_cast<double>(sum / present) : 0.0;
  return r;
}

LabelMap argmax_labels(const Tensor& S) {
  if (S.rank() != 3) raise(Err::ShapeMismatch, "expected (C,H,W), got " + shape_str(S.shape()));
  int c = S.dim(0), h = S.dim(1), w = S.dim(2);
  LabelMap lm;
  lm.height = h;
  lm.width = w;
  lm.ids.resize(static_cast<size_t>(h) * w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      int best = 0;
      double bv = S.at(0, y, x);
      for (int k = 1; k < c; ++k)
        if (S.at(k, y, x) > bv) {
          bv = S.at(k, y, x);
          best = k;
        }
      lm.ids[static_cast<size_t>(y) * w + x] = best;
    }
  return lm;
}

std::string MetricReport::csv() const {
  std::ostringstream os;
  os << "id,psnr,ssim,loe,ceiq,miou\n";
  auto emit = [&os](const MetricRow& r) {
    os << r.id << ',';
    if (r.psnr) os << fmt(*r.psnr);
    os << ',';
    if (r.ssim) os << fmt(*r.ssim);
    os << ',';
    if (r.loe) os << fmt(*r.loe);
    os << ',';
    if (r.ceiq) os << fmt(*r.ceiq);
    os << ',';
    if (r.miou) os << fmt(*r.miou);
    os << '\n';
  };
  for (const MetricRow& r : rows) emit(r);
  emit(average);
  return os.str();
}

MetricReport evaluate_dir(const std::string& pred_dir, const std::string& other_dir, EvalMode mode,
                          const std::string& labels_dir, const Segmenter& segmenter,
                          int num_classes) {
  auto preds = list_images(pred_dir);
  std::map<std::string, std::string> others;
  for (auto& [stem, path] : list_images(other_dir)) others[stem] = path;

  bool with_labels = !labels_dir.empty();
  if (with_labels && !segmenter)
    raise(Err::InvalidParam, "a segmenter is required when a label directory is given");

  struct Job {
    std::string id, pred_path, other_path, label_path;
  };
  std::vector<Job> jobs;
  for (auto& [stem, path] : preds) {
    auto it = others.find(stem);
    if (it == others.end()) continue;
    Job j{stem, path, it->second, ""};
    if (with_labels) {
      fs::path lp = fs::path(labels_dir) / (stem + ".png");
      if (!fs::exists(lp))
        raise(Err::FileNotFound, "no label map for stem \"" + stem + "\" in " + labels_dir);
      j.label_path = lp.string();
    }
    jobs.push_back(std::move(j));
  }
  if (jobs.empty())
    raise(Err::EmptyDataset, "no stems shared between " + pred_dir + " and " + other_dir);

  std::vector<MetricRow> rows(jobs.size());
  auto score_one = [&](size_t idx) {
    const Job& j = jobs[idx];
    ImageTensor pred = load_image(j.pred_path);
    ImageTensor other = load_image(j.other_path);
    MetricRow row;
    row.id = j.id;
    if (mode == EvalMode::Paired) {
      row.psnr = psnr(pred, other);
      row.ssim = ssim(pred, other);
      row.loe = loe(other, pred);
    } else {
      row.loe = loe(other, pred);
    }
    row.ceiq = ceiq(pred);
    if (with_labels) {
      LabelMap gt = load_label_map(j.label_path);
      LabelMap hat = segmenter(pred);
      row.miou = miou(hat, gt, num_classes).mean;
    }
    rows[idx] = std::move(row);
  };

  int workers = std::min<int>(thread_cap(), static_cast<int>(jobs.size()));
  if (workers <= 1) {
    for (size_t i = 0; i < jobs.size(); ++i) score_one(i);
  } else {
    std::atomic<size_t> next{0};
    std::exception_ptr first_error;
    std::mutex err_mu;
    auto run = [&] {
      for (;;) {
        size_t i = next.fetch_add(1);
        if (i >= jobs.size()) return;
        try {
          score_one(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(err_mu);
          if (!first_error) first_error = std::current_exception();
          return;
        }
      }
    };
    std::vector<std::thread> pool;
    for (int t = 0; t < workers; ++t) pool.emplace_back(run);
    for (auto& th : pool) th.join();
    if (first_error) std::rethrow_exception(first_error);
  }

  MetricReport rep;
  rep.rows = std::move(rows);
  rep.count = static_cast<int>(rep.rows.size());
  rep.average.id = "AVERAGE";
  auto average_of = [&](std::optional<double> MetricRow::* field) {
    double s = 0;
    int n = 0;
    for (const MetricRow& r : rep.rows)
      if (r.*field) {
        s += *(r.*field);
        ++n;
      }
    return n > 0 ? std::optional<double>(s / n) : std::nullopt;
  };
  rep.average.psnr = average_of(&MetricRow::psnr);
  rep.average.ssim = average_of(&MetricRow::ssim);
  rep.average.loe = average_of(&MetricRow::loe);
  rep.average.ceiq = average_of(&MetricRow::ceiq);
  rep.average.miou = average_of(&MetricRow::miou);
  return rep;
}

}  // namespace sllen
