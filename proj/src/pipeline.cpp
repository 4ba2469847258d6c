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

#include "sllen/pipeline.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "sllen/losses.hpp"
#include "sllen/plot.hpp"
#include "sllen/serialize.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace sllen {

namespace {

// ---- config schema -------------------------------------------------------

const std::map<std::string, std::set<std::string>>& section_keys() {
  static const std::map<std::string, std::set<std::string>> schema = {
      {"train",
       {"low_dir", "ref_dir", "labels_dir", "steps", "batch_size", "lr", "patch", "variant",
        "checkpoint_every", "clip_norm", "adam_beta1", "adam_beta2", "adam_eps", "resume"}},
      {"net",
       {"base_channels", "depth", "bottleneck_channels", "attention_dk", "token_cap",
        "attention_residual"}},
      {"ssn", {"num_classes", "tap_stage", "tap_post_activation", "weights_path", "seed"}},
      {"perceptual", {"kind", "weights_path", "seed"}},
      {"loss", {"lambda_kd", "lambda_itv", "lambda_gra", "G", "huber_delta"}},
      {"enhance", {"checkpoint", "input_dir", "output_dir"}},
      {"evaluate", {"pred_dir", "ref_dir", "low_dir", "mode", "labels_dir", "report"}},
      {"ablate", {"mode"}},
      {"gradstat", {"input_dir", "bins", "report"}},
      {"decompose", {"low_dir", "enhanced_dir"}},
  };
  return schema;
}

const std::set<std::string>& top_scalar_keys() {
  static const std::set<std::string> keys = {"seed", "out"};
  return keys;
}

void check_document(const json& doc, const std::string& origin) {
  if (!doc.is_object()) raise(Err::ConfigError, origin + ": config must be a JSON object");
  for (auto it = doc.begin(); it != doc.end(); ++it) {
    const std::string& key = it.key();
    if (top_scalar_keys().count(key)) continue;
    auto sec = section_keys().find(key);
    if (sec == section_keys().end())
      raise(Err::ConfigError, origin + ": unknown config key \"" + key + "\"");
    if (!it.value().is_object())
      raise(Err::ConfigError, origin + ": \"" + key + "\" must be an object");
    for (auto jt = it.value().begin(); jt != it.value().end(); ++jt)
      if (!sec->second.count(jt.key()))
        raise(Err::ConfigError,
              origin + ": unknown config key \"" + key + "." + jt.key() + "\"");
  }
}

template <class T>
T fetch(const json& obj, const std::string& key, T fallback) {
  auto it = obj.find(key);
  if (it == obj.end()) return fallback;
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    raise(Err::ConfigError, "config key \"" + key + "\" has the wrong type");
  }
}

const json& section(const json& doc, const char* name) {
  static const json empty = json::object();
  auto it = doc.find(name);
  return it == doc.end() ? empty : *it;
}

// ---- checkpoint header parsing -------------------------------------------

// Pull the balanced {...} object that follows "key": in a header line.
std::string extract_object(const std::string& text, const std::string& key) {
  std::string tag = "\"" + key + "\":";
  size_t pos = text.find(tag);
  if (pos == std::string::npos) return "";
  size_t start = text.find('{', pos + tag.size());
  if (start == std::string::npos) return "";
  int depth = 0;
  for (size_t i = start; i < text.size(); ++i) {
    if (text[i] == '{') ++depth;
    if (text[i] == '}' && --depth == 0) return text.substr(start, i - start + 1);
  }
  return "";
}

NetConfig net_config_from_header(const std::string& header, const std::string& path) {
  std::string obj = extract_object(header, "net");
  if (obj.empty())
    raise(Err::WeightLoadError, path + ": no network config in the weight-file header");
  json j;
  try {
    j = json::parse(obj);
  } catch (const json::exception& e) {
    raise(Err::WeightLoadError, path + ": bad network config in header: " + e.what());
  }
  NetConfig nc;
  nc.base_channels = fetch<int>(j, "base_channels", nc.base_channels);
  nc.depth = fetch<int>(j, "depth", nc.depth);
  nc.bottleneck_channels = fetch<int>(j, "bottleneck_channels", nc.bottleneck_channels);
  nc.attention_dk = fetch<int>(j, "attention_dk", nc.attention_dk);
  nc.token_cap = fetch<int>(j, "token_cap", nc.token_cap);
  nc.num_classes = fetch<int>(j, "num_classes", nc.num_classes);
  nc.attention_residual = fetch<bool>(j, "attention_residual", nc.attention_residual);
  nc.variant = variant_from_name(fetch<std::string>(j, "variant", "full"));
  return nc;
}

std::string default_under(const std::string& out, const char* leaf, const std::string& chosen) {
  return chosen.empty() ? (fs::path(out) / leaf).string() : chosen;
}

}  // namespace

// ---- ConfigDoc -------------------------------------------------------------

struct ConfigDoc::Impl {
  json doc = json::object();
  std::string origin = "<config>";
};

ConfigDoc::ConfigDoc() : impl_(std::make_shared<Impl>()) {}

ConfigDoc ConfigDoc::defaults() { return ConfigDoc(); }

ConfigDoc ConfigDoc::from_text(const std::string& text, const std::string& origin) {
  ConfigDoc cd;
  try {
    cd.impl_->doc = json::parse(text);
  } catch (const json::exception& e) {
    raise(Err::ConfigError, origin + ": " + e.what());
  }
  cd.impl_->origin = origin;
  check_document(cd.impl_->doc, origin);
  return cd;
}

ConfigDoc ConfigDoc::from_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) raise(Err::FileNotFound, "config file " + path + " not found");
  std::ostringstream buf;
  buf << f.rdbuf();
  return from_text(buf.str(), path);
}

void ConfigDoc::set(const std::string& dotted_key, const std::string& value) {
  std::string sec, key;
  size_t dot = dotted_key.find('.');
  if (dot == std::string::npos) {
    key = dotted_key;
  } else {
    sec = dotted_key.substr(0, dot);
    key = dotted_key.substr(dot + 1);
  }
  if (sec.empty()) {
    if (!top_scalar_keys().count(key))
      raise(Err::ConfigError, "unknown config key \"" + key + "\"");
  } else {
    auto it = section_keys().find(sec);
    if (it == section_keys().end() || !it->second.count(key) || key.find('.') != std::string::npos)
      raise(Err::ConfigError, "unknown config key \"" + dotted_key + "\"");
  }

  json parsed;
  try {
    parsed = json::parse(value);
    if (parsed.is_object() || parsed.is_array()) parsed = json(value);
  } catch (const json::exception&) {
    parsed = json(value);  // bare strings (paths, names) arrive unquoted
  }
  if (sec.empty())
    impl_->doc[key] = parsed;
  else
    impl_->doc[sec][key] = parsed;
}

namespace {

// The full settable schema with its default values, one entry per key that
// check_document() accepts. set()/load overlays replace entries via JSON
// merge, so a dump always shows the document a run would actually use.
json defaults_document() {
  RunConfig rc;
  const TrainConfig& t = rc.train;
  json d;
  d["seed"] = rc.seed;
  d["out"] = rc.out;
  d["train"] = {{"low_dir", rc.low_dir},
                {"ref_dir", rc.ref_dir},
                {"labels_dir", rc.labels_dir},
                {"resume", rc.resume},
                {"steps", t.steps},
                {"batch_size", 6},
                {"lr", t.lr},
                {"patch", t.patch},
                {"variant", variant_name(t.net.variant)},
                {"checkpoint_every", t.checkpoint_every},
                {"clip_norm", t.clip_norm},
                {"adam_beta1", t.adam_beta1},
                {"adam_beta2", t.adam_beta2},
                {"adam_eps", t.adam_eps}};
  d["net"] = {{"base_channels", t.net.base_channels},
              {"depth", t.net.depth},
              {"bottleneck_channels", t.net.bottleneck_channels},
              {"attention_dk", t.net.attention_dk},
              {"token_cap", t.net.token_cap},
              {"attention_residual", t.net.attention_residual}};
  d["ssn"] = {{"num_classes", t.ssn.num_classes},
              {"tap_stage", t.ssn.tap_stage},
              {"tap_post_activation", t.ssn.tap_post_activation},
              {"weights_path", t.ssn.weights_path},
              {"seed", t.ssn.seed}};
  d["perceptual"] = {{"kind", t.perceptual.kind},
                     {"weights_path", t.perceptual.weights_path},
                     {"seed", t.perceptual.seed}};
  d["loss"] = {{"lambda_kd", t.loss_weights.lambda_kd},
               {"lambda_itv", t.loss_weights.lambda_itv},
               {"lambda_gra", t.loss_weights.lambda_gra},
               {"G", t.loss_weights.G},
               {"huber_delta", t.loss_weights.huber_delta}};
  d["enhance"] = {{"checkpoint", rc.enh_checkpoint},
                  {"input_dir", rc.enh_input},
                  {"output_dir", rc.enh_output}};
  d["evaluate"] = {{"pred_dir", rc.eval_pred}, {"ref_dir", rc.eval_ref},
                   {"low_dir", rc.eval_low},  {"mode", "paired"},
                   {"labels_dir", rc.eval_labels}, {"report", rc.eval_report}};
  d["ablate"] = {{"mode", rc.ablate_mode}};
  d["gradstat"] = {{"input_dir", rc.grad_input}, {"bins", rc.grad_bins},
                   {"report", rc.grad_report}};
  d["decompose"] = {{"low_dir", rc.dec_low}, {"enhanced_dir", rc.dec_enhanced}};
  return d;
}

}  // namespace

std::string ConfigDoc::text() const {
  json eff = defaults_document();
  eff.merge_patch(impl_->doc);
  return eff.dump(2);
}

RunConfig ConfigDoc::resolve() const {
  const json& doc = impl_->doc;
  check_document(doc, impl_->origin);

  RunConfig rc;
  rc.seed = fetch<uint64_t>(doc, "seed", 0);
  rc.out = fetch<std::string>(doc, "out", "run");

  const json& jt = section(doc, "train");
  rc.low_dir = fetch<std::string>(jt, "low_dir", "");
  rc.ref_dir = fetch<std::string>(jt, "ref_dir", "");
  rc.labels_dir = fetch<std::string>(jt, "labels_dir", "");
  rc.resume = fetch<std::string>(jt, "resume", "");
  rc.train.steps = fetch<int64_t>(jt, "steps", 0);
  rc.train.batch_size = fetch<int>(jt, "batch_size", 6);
  rc.train.lr = fetch<double>(jt, "lr", 1e-4);
  rc.train.patch = fetch<int>(jt, "patch", 0);
  rc.train.checkpoint_every = fetch<int64_t>(jt, "checkpoint_every", 0);
  rc.train.clip_norm = fetch<double>(jt, "clip_norm", 0.0);
  rc.train.adam_beta1 = fetch<double>(jt, "adam_beta1", 0.9);
  rc.train.adam_beta2 = fetch<double>(jt, "adam_beta2", 0.999);
  rc.train.adam_eps = fetch<double>(jt, "adam_eps", 1e-8);
  rc.train.net.variant = variant_from_name(fetch<std::string>(jt, "variant", "full"));

  const json& jn = section(doc, "net");
  rc.train.net.base_channels = fetch<int>(jn, "base_channels", 32);
  rc.train.net.depth = fetch<int>(jn, "depth", 3);
  rc.train.net.bottleneck_channels = fetch<int>(jn, "bottleneck_channels", 0);
  rc.train.net.attention_dk = fetch<int>(jn, "attention_dk", 64);
  rc.train.net.token_cap = fetch<int>(jn, "token_cap", 4096);
  rc.train.net.attention_residual = fetch<bool>(jn, "attention_residual", true);

  const json& js = section(doc, "ssn");
  rc.train.ssn.num_classes = fetch<int>(js, "num_classes", 21);
  rc.train.ssn.tap_stage = fetch<int>(js, "tap_stage", 4);
  rc.train.ssn.tap_post_activation = fetch<bool>(js, "tap_post_activation", true);
  rc.train.ssn.weights_path = fetch<std::string>(js, "weights_path", "");
  rc.train.ssn.seed = fetch<uint64_t>(js, "seed", 0);

  const json& jp = section(doc, "perceptual");
  rc.train.perceptual.kind = fetch<std::string>(jp, "kind", "random");
  rc.train.perceptual.weights_path = fetch<std::string>(jp, "weights_path", "");
  rc.train.perceptual.seed = fetch<uint64_t>(jp, "seed", 0);

  const json& jl = section(doc, "loss");
  rc.train.loss_weights.lambda_kd = fetch<double>(jl, "lambda_kd", 1.0);
  rc.train.loss_weights.lambda_itv = fetch<double>(jl, "lambda_itv", 5.0);
  rc.train.loss_weights.lambda_gra = fetch<double>(jl, "lambda_gra", 1.0);
  rc.train.loss_weights.G = fetch<double>(jl, "G", 0.051);
  rc.train.loss_weights.huber_delta = fetch<double>(jl, "huber_delta", 1.0);

  const json& je = section(doc, "enhance");
  rc.enh_checkpoint = fetch<std::string>(je, "checkpoint", "");
  rc.enh_input = fetch<std::string>(je, "input_dir", "");
  rc.enh_output = fetch<std::string>(je, "output_dir", "");

  const json& jv = section(doc, "evaluate");
  rc.eval_pred = fetch<std::string>(jv, "pred_dir", "");
  rc.eval_ref = fetch<std::string>(jv, "ref_dir", "");
  rc.eval_low = fetch<std::string>(jv, "low_dir", "");
  rc.eval_labels = fetch<std::string>(jv, "labels_dir", "");
  rc.eval_report = fetch<std::string>(jv, "report", "");
  std::string mode = fetch<std::string>(jv, "mode", "paired");
  if (mode == "paired")
    rc.eval_paired = true;
  else if (mode == "unpaired")
    rc.eval_paired = false;
  else
    raise(Err::ConfigError, "evaluate.mode must be \"paired\" or \"unpaired\", got \"" + mode + "\"");

  const json& ja = section(doc, "ablate");
  rc.ablate_mode = fetch<std::string>(ja, "mode", "branch");
  if (rc.ablate_mode != "branch" && rc.ablate_mode != "loss")
    raise(Err::ConfigError, "ablate.mode must be \"branch\" or \"loss\"");

  const json& jg = section(doc, "gradstat");
  rc.grad_input = fetch<std::string>(jg, "input_dir", "");
  rc.grad_report = fetch<std::string>(jg, "report", "");
  rc.grad_bins = fetch<int>(jg, "bins", 64);

  const json& jd = section(doc, "decompose");
  rc.dec_low = fetch<std::string>(jd, "low_dir", "");
  rc.dec_enhanced = fetch<std::string>(jd, "enhanced_dir", "");

  // The global seed drives the trainable network and the data order; the
  // frozen stand-in networks keep their own configured seeds.
  rc.train.seed = rc.seed;
  rc.train.net.seed = rc.seed;
  rc.train.net.num_classes = rc.train.ssn.num_classes;
  return rc;
}

// ---- commands --------------------------------------------------------------

RunLog train_run(const RunConfig& cfg) {
  if (cfg.low_dir.empty() || cfg.ref_dir.empty())
    raise(Err::ConfigError, "train needs train.low_dir and train.ref_dir");
  if (cfg.train.steps < 1) raise(Err::ConfigError, "train.steps must be >= 1");
  ScanReport scan = scan_paired_dir(cfg.low_dir, cfg.ref_dir, cfg.labels_dir);
  Trainer trainer(cfg.train);
  return trainer.fit(scan.pairs, cfg.out, cfg.resume);
}

Enhancer::Enhancer(const std::string& checkpoint, const SsnConfig& ssn_cfg) {
  BlockFile bf = read_blocks(checkpoint);
  NetConfig nc = net_config_from_header(bf.header, checkpoint);
  net_ = std::make_unique<SllenNet>(nc);
  std::string prefix = bf.header.find("\"kind\":\"sllen-checkpoint\"") != std::string::npos
                           ? "net."
                           : "";
  for (Parameter* p : net_->parameters())
    p->value = bf.expect(prefix + p->name, p->value.shape());
  if (nc.uses_hsf() || nc.uses_ief()) {
    SsnConfig sc = ssn_cfg;
    sc.num_classes = nc.num_classes;
    ssn_ = std::make_unique<Ssn>(Ssn::build(sc));
  }
}

Enhancer::~Enhancer() = default;
Enhancer::Enhancer(Enhancer&&) noexcept = default;
Enhancer& Enhancer::operator=(Enhancer&&) noexcept = default;

SllenNet& Enhancer::net() { return *net_; }
const Ssn* Enhancer::ssn() const { return ssn_.get(); }

ImageTensor Enhancer::enhance(const ImageTensor& low) {
  return enhance_image(*net_, ssn_.get(), low);
}

void Enhancer::enhance_file(const std::string& in_path, const std::string& out_path) {
  save_image(enhance(load_image(in_path)), out_path);
}

int Enhancer::enhance_dir(const std::string& in_dir, const std::string& out_dir) {
  auto images = list_images(in_dir);
  if (images.empty()) raise(Err::EmptyDataset, "no images in " + in_dir);
  for (auto& [stem, path] : images)
    enhance_file(path, (fs::path(out_dir) / (stem + ".png")).string());
  return static_cast<int>(images.size());
}

Enhancer open_enhancer(const RunConfig& cfg) {
  if (cfg.enh_checkpoint.empty()) raise(Err::ConfigError, "enhance needs enhance.checkpoint");
  return Enhancer(cfg.enh_checkpoint, cfg.train.ssn);
}

int enhance_run(const RunConfig& cfg) {
  if (cfg.enh_input.empty()) raise(Err::ConfigError, "enhance needs enhance.input_dir");
  Enhancer e = open_enhancer(cfg);
  return e.enhance_dir(cfg.enh_input, default_under(cfg.out, "enhanced", cfg.enh_output));
}

MetricReport evaluate_run(const RunConfig& cfg) {
  if (cfg.eval_pred.empty()) raise(Err::ConfigError, "evaluate needs evaluate.pred_dir");
  std::string other = cfg.eval_paired ? cfg.eval_ref : cfg.eval_low;
  if (other.empty())
    raise(Err::ConfigError, cfg.eval_paired ? "paired evaluation needs evaluate.ref_dir"
                                            : "unpaired evaluation needs evaluate.low_dir");

  Segmenter seg;
  if (!cfg.eval_labels.empty()) {
    auto ssn = std::make_shared<Ssn>(Ssn::build(cfg.train.ssn));
    seg = [ssn](const ImageTensor& img) {
      ImageTensor padded = pad_reflect_to_multiple(img, 8);
      LabelMap full = argmax_labels(ssn->forward(padded).S);
      LabelMap out;
      out.height = img.height();
      out.width = img.width();
      out.ids.resize(static_cast<size_t>(out.height) * out.width);
      for (int y = 0; y < out.height; ++y)
        for (int x = 0; x < out.width; ++x)
          out.ids[static_cast<size_t>(y) * out.width + x] = full.at(y, x);
      return out;
    };
  }

  MetricReport rep =
      evaluate_dir(cfg.eval_pred, other, cfg.eval_paired ? EvalMode::Paired : EvalMode::Unpaired,
                   cfg.eval_labels, seg, cfg.train.ssn.num_classes);
  write_text_atomic(default_under(cfg.out, "metrics.csv", cfg.eval_report), rep.csv());
  return rep;
}

std::vector<AblationRow> ablate_run(const RunConfig& cfg) {
  if (cfg.low_dir.empty() || cfg.ref_dir.empty())
    raise(Err::ConfigError, "ablate needs train.low_dir and train.ref_dir");
  if (cfg.train.steps < 1) raise(Err::ConfigError, "train.steps must be >= 1");
  ScanReport scan = scan_paired_dir(cfg.low_dir, cfg.ref_dir);

  std::vector<AblationRow> rows = cfg.ablate_mode == "branch"
                                      ? run_ablation(cfg.train, scan.pairs, cfg.out)
                                      : loss_ablation(cfg.train, scan.pairs, cfg.out);

  std::vector<std::string> groups;
  std::vector<std::vector<double>> values;
  for (const AblationRow& r : rows) {
    groups.push_back(r.name);
    values.push_back({r.psnr, r.ssim, r.loe, r.ceiq});
  }
  save_bar_plot((fs::path(cfg.out) / "ablation.png").string(),
                cfg.ablate_mode == "branch" ? "branch ablation (hold-out)" : "loss ablation (hold-out)",
                groups, {"psnr", "ssim", "loe", "ceiq"}, values);
  return rows;
}

GradStat gradstat_run(const RunConfig& cfg) {
  if (cfg.grad_input.empty()) raise(Err::ConfigError, "gradstat needs gradstat.input_dir");
  if (cfg.grad_bins < 1) raise(Err::ConfigError, "gradstat.bins must be >= 1");
  auto images = list_images(cfg.grad_input);
  if (images.empty()) raise(Err::EmptyDataset, "no images in " + cfg.grad_input);

  std::vector<double> g;
  for (auto& [stem, path] : images) {
    std::vector<double> per_channel = avg_gradient(load_image(path));
    double m = 0;
    for (double v : per_channel) m += v;
    g.push_back(m / static_cast<double>(per_channel.size()));
  }

  GradStat st;
  st.images = static_cast<int64_t>(g.size());
  for (double v : g) st.mean += v;
  st.mean /= static_cast<double>(g.size());

  double hi = 0;
  for (double v : g) hi = std::max(hi, v);
  if (hi <= 0) hi = 1e-9;
  int bins = cfg.grad_bins;
  st.edges.resize(static_cast<size_t>(bins) + 1);
  for (int i = 0; i <= bins; ++i)
    st.edges[static_cast<size_t>(i)] = hi * static_cast<double>(i) / bins;
  st.counts.assign(static_cast<size_t>(bins), 0);
  for (double v : g) {
    int b = std::min(bins - 1, static_cast<int>(v / hi * bins));
    ++st.counts[static_cast<size_t>(b)];
  }

  std::ostringstream csv;
  csv << "bin_lo,bin_hi,count\n";
  csv.precision(12);
  for (int i = 0; i < bins; ++i)
    csv << st.edges[static_cast<size_t>(i)] << ',' << st.edges[static_cast<size_t>(i) + 1] << ','
        << st.counts[static_cast<size_t>(i)] << '\n';
  write_text_atomic(default_under(cfg.out, "gradstat.csv", cfg.grad_report), csv.str());
  return st;
}

std::vector<DecomposeRow> decompose_run(const RunConfig& cfg) {
  if (cfg.dec_low.empty() || cfg.dec_enhanced.empty())
    raise(Err::ConfigError, "decompose needs decompose.low_dir and decompose.enhanced_dir");
  auto lows = list_images(cfg.dec_low);
  std::map<std::string, std::string> enh;
  for (auto& [stem, path] : list_images(cfg.dec_enhanced)) enh[stem] = path;

  std::vector<std::string> unmatched;
  for (auto& [stem, path] : lows)
    if (!enh.count(stem)) unmatched.push_back(stem);
  for (auto& [stem, path] : enh) {
    bool found = false;
    for (auto& [ls, lp] : lows)
      if (ls == stem) {
        found = true;
        break;
      }
    if (!found) unmatched.push_back(stem);
  }
  if (!unmatched.empty()) {
    std::string list;
    for (size_t i = 0; i < unmatched.size() && i < 8; ++i) list += " " + unmatched[i];
    raise(Err::InvalidParam, "unmatched stems between low and enhanced dirs:" + list);
  }
  if (lows.empty()) raise(Err::EmptyDataset, "no images in " + cfg.dec_low);

  fs::path out_dir = fs::path(cfg.out) / "decomposed";
  std::vector<DecomposeRow> rows;
  for (auto& [stem, path] : lows) {
    ImageTensor low = load_image(path);
    ImageTensor enhanced = load_image(enh[stem]);
    ImageTensor u = retinex_decompose(low, enhanced, 1e-4);
    write_umap(u.data, (out_dir / (stem + ".umap")).string());
    save_image(render_normalized(u.data), (out_dir / (stem + ".png")).string());
    rows.push_back(DecomposeRow{stem, losses::itv_loss(u.data)});
  }
  return rows;
}

}  // namespace sllen
