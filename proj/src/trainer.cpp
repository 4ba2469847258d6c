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

#include "sllen/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "sllen/metrics.hpp"
#include "sllen/serialize.hpp"

namespace fs = std::filesystem;

namespace sllen {

namespace {

// Caches of frozen per-sample inputs are keyed by sample id and crop
// rectangle; bound so long randomized-crop runs cannot grow them forever.
constexpr size_t kCacheCap = 512;

std::string cache_key(const std::string& id, const CropInfo& c) {
  return id + ":" + std::to_string(c.y) + "," + std::to_string(c.x) + "," + std::to_string(c.h) +
         "," + std::to_string(c.w);
}

std::string num(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

int64_t parse_header_int(const std::string& header, const std::string& key, const char* path) {
  std::string tag = "\"" + key + "\":";
  size_t pos = header.find(tag);
  if (pos == std::string::npos)
    raise(Err::WeightLoadError, std::string(path) + ": header lacks " + tag);
  return std::strtoll(header.c_str() + pos + tag.size(), nullptr, 10);
}

}  // namespace

void TrainConfig::validate() const {
  if (lr <= 0) raise(Err::ConfigError, "lr must be > 0");
  if (batch_size < 1) raise(Err::ConfigError, "batch_size must be >= 1");
  if (adam_beta1 < 0 || adam_beta1 >= 1 || adam_beta2 < 0 || adam_beta2 >= 1)
    raise(Err::ConfigError, "adam betas must lie in [0,1)");
  if (adam_eps <= 0) raise(Err::ConfigError, "adam_eps must be > 0");
  if (clip_norm < 0) raise(Err::ConfigError, "clip_norm must be >= 0");
  if (checkpoint_every < 0) raise(Err::ConfigError, "checkpoint_every must be >= 0");
  if (patch < 0) raise(Err::ConfigError, "patch must be >= 0");
  net.validate();
  if (patch > 0 && patch % net.required_multiple() != 0)
    raise(Err::ConfigError, "patch " + std::to_string(patch) + " must be a multiple of " +
                                std::to_string(net.required_multiple()));
}

std::string train_config_json(const TrainConfig& cfg) {
  std::string s = "{";
  s += "\"lr\":" + num(cfg.lr);
  s += ",\"batch_size\":" + std::to_string(cfg.batch_size);
  s += ",\"steps\":" + std::to_string(cfg.steps);
  s += ",\"patch\":" + std::to_string(cfg.patch);
  s += ",\"adam_beta1\":" + num(cfg.adam_beta1);
  s += ",\"adam_beta2\":" + num(cfg.adam_beta2);
  s += ",\"adam_eps\":" + num(cfg.adam_eps);
  s += ",\"clip_norm\":" + num(cfg.clip_norm);
  s += ",\"checkpoint_every\":" + std::to_string(cfg.checkpoint_every);
  s += ",\"seed\":" + std::to_string(cfg.seed);
  s += ",\"net\":" + net_config_json(cfg.net);
  s += ",\"ssn\":{\"num_classes\":" + std::to_string(cfg.ssn.num_classes) +
       ",\"tap_stage\":" + std::to_string(cfg.ssn.tap_stage) +
       ",\"tap_post_activation\":" + (cfg.ssn.tap_post_activation ? "true" : "false") +
       ",\"weights_path\":\"" + cfg.ssn.weights_path + "\"" +
       ",\"seed\":" + std::to_string(cfg.ssn.seed) + "}";
  s += ",\"perceptual\":{\"kind\":\"" + cfg.perceptual.kind + "\",\"weights_path\":\"" +
       cfg.perceptual.weights_path + "\",\"seed\":" + std::to_string(cfg.perceptual.seed) + "}";
  s += ",\"loss\":{\"lambda_kd\":" + num(cfg.loss_weights.lambda_kd) +
       ",\"lambda_itv\":" + num(cfg.loss_weights.lambda_itv) +
       ",\"lambda_gra\":" + num(cfg.loss_weights.lambda_gra) + ",\"G\":" + num(cfg.loss_weights.G) +
       ",\"huber_delta\":" + num(cfg.loss_weights.huber_delta) + "}";
  s += "}";
  return s;
}

Trainer::Trainer(const TrainConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  net_ = std::make_unique<SllenNet>(cfg_.net);
  if (cfg_.net.uses_hsf() || cfg_.net.uses_ief()) {
    SsnConfig sc = cfg_.ssn;
    sc.num_classes = cfg_.net.num_classes;
    ssn_ = std::make_unique<Ssn>(Ssn::build(sc));
  }
  feat_ = FeatureExtractor::make(cfg_.perceptual);
  params_ = net_->parameters();
  for (Parameter* p : params_) {
    adam_m_.push_back(Tensor::zeros(p->value.shape()));
    adam_v_.push_back(Tensor::zeros(p->value.shape()));
  }
}

const SemanticOutputs* Trainer::semantic_for(const std::string& id, const CropInfo& crop,
                                             const ImageTensor& low) {
  std::string key = cache_key(id, crop);
  auto it = sem_cache_.find(key);
  if (it != sem_cache_.end()) return &it->second;
  if (sem_cache_.size() >= kCacheCap) sem_cache_.clear();
  return &sem_cache_.emplace(key, ssn_->forward(low)).first->second;
}

const std::vector<Tensor>* Trainer::features_for(const std::string& id, const CropInfo& crop,
                                                 const ImageTensor& ref) {
  std::string key = cache_key(id, crop);
  auto it = feat_cache_.find(key);
  if (it != feat_cache_.end()) return &it->second;
  if (feat_cache_.size() >= kCacheCap) feat_cache_.clear();
  return &feat_cache_.emplace(key, feat_.features(ref.data)).first->second;
}

LossBreakdown Trainer::train_step(const Batch& batch) {
  if (batch.size() == 0) raise(Err::EmptyDataset, "empty batch");
  if (!batch.has_references() ||
      batch.references.size() != batch.lows.size())
    raise(Err::NoReference, "training needs a reference for every low image");

  for (Parameter* p : params_) p->zero_grad();

  int n = batch.size();
  bool wants_semantic = cfg_.net.uses_hsf() || cfg_.net.uses_ief();
  LossBreakdown sum;
  for (int i = 0; i < n; ++i) {
    const ImageTensor& low = batch.lows[static_cast<size_t>(i)];
    const ImageTensor& ref = batch.references[static_cast<size_t>(i)];
    const std::string& id = batch.ids[static_cast<size_t>(i)];
    const CropInfo& ci = batch.crops[static_cast<size_t>(i)];

    const SemanticOutputs* sem = wants_semantic ? semantic_for(id, ci, low) : nullptr;
    const std::vector<Tensor>* gtf = features_for(id, ci, ref);

    ad::Tape tape;
    SllenNet::Trace tr =
        net_->forward(tape, low.data, sem ? &sem->S : nullptr, sem ? &sem->B : nullptr);
    ad::Value low_v = tape.input(low.data);
    losses::TapeLossTerms terms =
        losses::total_loss_on_tape(tape, tr, low_v, ref.data, *gtf, cfg_.loss_weights, feat_);
    LossBreakdown b = losses::read_terms(tape, terms);
    try {
      check_finite(b);
    } catch (const Error& e) {
      raise(e.code(), std::string(e.what()) + " (image " + id + ")");
    }
    sum.l_s += b.l_s;
    sum.l_vgg += b.l_vgg;
    sum.l_kd += b.l_kd;
    sum.l_itv += b.l_itv;
    sum.l_gra += b.l_gra;
    sum.total += b.total;

    tape.backward(terms.total);
    tape.accumulate_param_grads(1.0 / n);
  }

  sum.l_s /= n;
  sum.l_vgg /= n;
  sum.l_kd /= n;
  sum.l_itv /= n;
  sum.l_gra /= n;
  sum.total /= n;

  if (cfg_.clip_norm > 0) {
    double sq = 0;
    for (Parameter* p : params_)
      for (int64_t i = 0; i < p->grad.numel(); ++i) sq += p->grad[i] * p->grad[i];
    double norm = std::sqrt(sq);
    if (norm > cfg_.clip_norm) {
      double scale = cfg_.clip_norm / norm;
      for (Parameter* p : params_)
        for (int64_t i = 0; i < p->grad.numel(); ++i) p->grad[i] *= scale;
    }
  }

  adam_update();
  ++step_;
  return sum;
}

void Trainer::adam_update() {
  ++adam_t_;
  double b1 = cfg_.adam_beta1, b2 = cfg_.adam_beta2;
  double bc1 = 1.0 - std::pow(b1, static_cast<double>(adam_t_));
  double bc2 = 1.0 - std::pow(b2, static_cast<double>(adam_t_));
  for (size_t k = 0; k < params_.size(); ++k) {
    Tensor& p = params_[k]->value;
    Tensor& g = params_[k]->grad;
    Tensor& m = adam_m_[k];
    Tensor& v = adam_v_[k];
    for (int64_t i = 0; i < p.numel(); ++i) {
      m[i] = b1 * m[i] + (1.0 - b1) * g[i];
      v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
      p[i] -= cfg_.lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + cfg_.adam_eps);
    }
  }
}

void Trainer::save_checkpoint(const std::string& path) const {
  BlockWriter bw;
  bw.set_header("{\"kind\":\"sllen-checkpoint\",\"step\":" + std::to_string(step_) +
                ",\"adam_t\":" + std::to_string(adam_t_) + ",\"net\":" +
                net_config_json(cfg_.net) + "}");
  for (size_t k = 0; k < params_.size(); ++k) {
    bw.add("net." + params_[k]->name, params_[k]->value, /*f64=*/true);
    bw.add("adam.m." + params_[k]->name, adam_m_[k], /*f64=*/true);
    bw.add("adam.v." + params_[k]->name, adam_v_[k], /*f64=*/true);
  }
  bw.write(path);
}

void Trainer::load_checkpoint(const std::string& path) {
  BlockFile bf = read_blocks(path);
  std::string want = "\"net\":" + net_config_json(cfg_.net);
  if (bf.header.find(want) == std::string::npos)
    raise(Err::ConfigError,
          path + ": checkpoint was written for a different network config (" + bf.header + ")");
  step_ = parse_header_int(bf.header, "step", path.c_str());
  adam_t_ = parse_header_int(bf.header, "adam_t", path.c_str());
  for (size_t k = 0; k < params_.size(); ++k) {
    params_[k]->value = bf.expect("net." + params_[k]->name, params_[k]->value.shape());
    adam_m_[k] = bf.expect("adam.m." + params_[k]->name, params_[k]->value.shape());
    adam_v_[k] = bf.expect("adam.v." + params_[k]->name, params_[k]->value.shape());
  }
}

RunLog Trainer::fit(const std::vector<SamplePair>& pairs, const std::string& run_dir,
                    const std::string& resume_ckpt) {
  if (cfg_.steps < 1) raise(Err::InvalidParam, "steps must be >= 1");
  if (pairs.empty()) raise(Err::EmptyDataset, "no training pairs");
  for (const SamplePair& p : pairs)
    if (!p.reference) raise(Err::NoReference, "sample " + p.id + " has no reference");

  if (!resume_ckpt.empty()) load_checkpoint(resume_ckpt);

  RunLog log;
  log.first_step = step_;
  log.config_json = train_config_json(cfg_);

  std::ofstream csv;
  if (!run_dir.empty()) {
    fs::create_directories(run_dir);
    std::string snap = (fs::path(run_dir) / "config.snapshot").string();
    if (!fs::exists(snap)) write_text_atomic(snap, log.config_json + "\n");

    // On resume, drop any logged rows at or past the restart step so the
    // file stays strictly ordered.
    fs::path log_path = fs::path(run_dir) / "log.csv";
    std::string keep = LossBreakdown::csv_header() + "\n";
    if (step_ > 0 && fs::exists(log_path)) {
      std::ifstream in(log_path);
      std::string line;
      std::getline(in, line);  // header
      while (std::getline(in, line)) {
        if (line.empty()) continue;
        int64_t s = std::strtoll(line.c_str(), nullptr, 10);
        if (s < step_) keep += line + "\n";
      }
    }
    write_text_atomic(log_path.string(), keep);
    csv.open(log_path, std::ios::app);
    if (!csv) raise(Err::IoError, "cannot append to " + log_path.string());
  }

  int64_t n = static_cast<int64_t>(pairs.size());
  int64_t bpe = (n + cfg_.batch_size - 1) / cfg_.batch_size;
  int64_t cached_epoch = -1;
  std::vector<Batch> batches;

  while (step_ < cfg_.steps) {
    int64_t epoch = step_ / bpe;
    int64_t k = step_ % bpe;
    if (epoch != cached_epoch) {
      batches = epoch_batches(pairs, cfg_.batch_size, cfg_.patch, cfg_.seed, epoch);
      cached_epoch = epoch;
    }
    int64_t s0 = step_;
    auto t0 = std::chrono::steady_clock::now();
    LossBreakdown b;
    try {
      b = train_step(batches[static_cast<size_t>(k)]);
    } catch (const Error& e) {
      if (e.code() == Err::NonFiniteLoss)
        raise(e.code(), "step " + std::to_string(s0) + ": " + e.what());
      throw;
    }
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    log.rows.push_back(b);
    log.step_seconds.push_back(secs);
    if (csv.is_open()) {
      csv << b.csv_row(s0) << "\n";
      csv.flush();
    }

    if (!run_dir.empty() && cfg_.checkpoint_every > 0 && step_ % cfg_.checkpoint_every == 0 &&
        step_ < cfg_.steps) {
      save_checkpoint((fs::path(run_dir) / ("ckpt-" + std::to_string(step_) + ".bin")).string());
    }
  }

  if (!run_dir.empty()) {
    log.final_checkpoint =
        (fs::path(run_dir) / ("ckpt-" + std::to_string(step_) + ".bin")).string();
    save_checkpoint(log.final_checkpoint);
  }
  return log;
}

ImageTensor enhance_image(SllenNet& net, const Ssn* ssn, const ImageTensor& low) {
  const NetConfig& cfg = net.config();
  bool wants_semantic = cfg.uses_hsf() || cfg.uses_ief();
  if (wants_semantic && !ssn)
    raise(Err::InvalidParam, "this variant needs the semantic network for inference");
  int h = low.height(), w = low.width();
  ImageTensor padded = pad_reflect_to_multiple(low, cfg.required_multiple());
  const Tensor* S = nullptr;
  const Tensor* B = nullptr;
  SemanticOutputs sem;
  if (wants_semantic) {
    sem = ssn->forward(padded);
    S = &sem.S;
    B = &sem.B;
  }
  ForwardTrace tr = net.forward_eval(padded.data, S, B);
  return crop(ImageTensor::rgb(tr.O), 0, 0, h, w);
}

namespace {

AblationRow score_holdout(const std::string& name, Trainer& tr,
                          const std::vector<SamplePair>& holdout) {
  AblationRow row;
  row.name = name;
  row.params = tr.net().param_count();
  for (const SamplePair& p : holdout) {
    ImageTensor O = enhance_image(tr.net(), tr.ssn(), p.low);
    row.psnr += psnr(O, *p.reference);
    row.ssim += ssim(O, *p.reference);
    row.loe += loe(p.low, O);
    row.ceiq += ceiq(O);
  }
  double n = static_cast<double>(holdout.size());
  row.psnr /= n;
  row.ssim /= n;
  row.loe /= n;
  row.ceiq /= n;
  return row;
}

void split_by_stem(const std::vector<SamplePair>& pairs, std::vector<SamplePair>& train,
                   std::vector<SamplePair>& holdout) {
  for (const SamplePair& p : pairs) {
    if (hash_str(p.id) % 5 == 0)
      holdout.push_back(p);
    else
      train.push_back(p);
  }
  if (train.empty() || holdout.empty())
    raise(Err::EmptyDataset,
          "stem-hash split left a side empty (" + std::to_string(train.size()) + " train / " +
              std::to_string(holdout.size()) + " held out); add more images");
}

}  // namespace

std::string ablation_csv(const std::vector<AblationRow>& rows) {
  std::ostringstream os;
  os << "name,params,psnr,ssim,loe,ceiq\n";
  os.precision(10);
  for (const AblationRow& r : rows)
    os << r.name << ',' << r.params << ',' << r.psnr << ',' << r.ssim << ',' << r.loe << ','
       << r.ceiq << '\n';
  return os.str();
}

std::vector<AblationRow> run_ablation(const TrainConfig& base, const std::vector<SamplePair>& pairs,
                                      const std::string& run_dir) {
  std::vector<SamplePair> train, holdout;
  split_by_stem(pairs, train, holdout);

  const Variant variants[] = {Variant::FULL, Variant::NO_HSF, Variant::NO_IEF, Variant::UNET};
  std::vector<AblationRow> rows;
  for (Variant v : variants) {
    TrainConfig cfg = base;
    cfg.net.variant = v;
    Trainer tr(cfg);
    std::string sub = run_dir.empty() ? "" : (fs::path(run_dir) / variant_name(v)).string();
    tr.fit(train, sub);
    rows.push_back(score_holdout(variant_name(v), tr, holdout));
  }
  if (!run_dir.empty())
    write_text_atomic((fs::path(run_dir) / "ablation.csv").string(), ablation_csv(rows));
  return rows;
}

std::vector<AblationRow> loss_ablation(const TrainConfig& base,
                                       const std::vector<SamplePair>& pairs,
                                       const std::string& run_dir) {
  std::vector<SamplePair> train, holdout;
  split_by_stem(pairs, train, holdout);

  struct Setting {
    const char* name;
    double LossWeights::* zeroed;
  };
  const Setting settings[] = {{"all_on", nullptr},
                              {"no_kd", &LossWeights::lambda_kd},
                              {"no_itv", &LossWeights::lambda_itv},
                              {"no_gra", &LossWeights::lambda_gra}};
  std::vector<AblationRow> rows;
  for (const Setting& s : settings) {
    TrainConfig cfg = base;
    cfg.net.variant = Variant::FULL;
    if (s.zeroed) cfg.loss_weights.*(s.zeroed) = 0.0;
    Trainer tr(cfg);
    std::string sub = run_dir.empty() ? "" : (fs::path(run_dir) / s.name).string();
    tr.fit(train, sub);
    rows.push_back(score_holdout(s.name, tr, holdout));
  }
  if (!run_dir.empty())
    write_text_atomic((fs::path(run_dir) / "ablation.csv").string(), ablation_csv(rows));
  return rows;
}

std::vector<TimingRow> time_inference(SllenNet& net, const Ssn* ssn, const std::vector<int>& sizes,
                                      int repeats) {
  if (repeats < 3) raise(Err::InvalidParam, "repeats must be >= 3");
  std::vector<TimingRow> out;
  Rng rng(7);
  for (int size : sizes) {
    if (size < 8) raise(Err::InvalidParam, "size must be >= 8");
    Tensor img({3, size, size});
    for (int64_t i = 0; i < img.numel(); ++i) img[i] = rng.uniform();
    ImageTensor in = ImageTensor::rgb(std::move(img));

    enhance_image(net, ssn, in);  // warm-up
    std::vector<double> times;
    for (int r = 0; r < repeats; ++r) {
      auto t0 = std::chrono::steady_clock::now();
      enhance_image(net, ssn, in);
      times.push_back(
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    }
    out.push_back(TimingRow{size, median_of(times)});
  }
  return out;
}

}  // namespace sllen
