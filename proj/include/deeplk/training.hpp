#pragma once

#include <zlib.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "deeplk/core.hpp"
#include "deeplk/image.hpp"
#include "deeplk/loss.hpp"
#include "deeplk/warp.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

namespace deeplk {

struct TrainConfig {
  double b_translation = 0.06;   // Laplace scale for translation, fraction of box size
  double b_scale = 1.0 / 30.0;   // Laplace scale for the scale factor
  double truncation = 0.3;       // max |perturbation|
  int samples_per_template = 4;
  int epochs = 10;
  double learning_rate = 1e-3;
  int batch_size = 16;
  std::uint64_t seed = 1;
  double damping = 1e-4;
  int template_size = 64;
  double context = 2.0;
  WarpFamily family = WarpFamily::kTranslationScale;
  double brightness_aug = 0.1;
  double contrast_aug = 0.1;
  double saturation_aug = 0.05;  // 3-channel inputs only
};

struct BoxPerturbation {
  double dx = 0.0;  // center shift, fraction of box width/height
  double dy = 0.0;
  double ds = 0.0;  // size scales by (1 + ds)
};

inline BoxPerturbation sample_perturbation(Rng& rng, const TrainConfig& cfg) {
  const auto truncate = [&](double v) {
    return std::clamp(v, -cfg.truncation, cfg.truncation);
  };
  BoxPerturbation d;
  d.dx = truncate(rng.laplace(cfg.b_translation));
  d.dy = truncate(rng.laplace(cfg.b_translation));
  if (cfg.family == WarpFamily::kTranslationScale)
    d.ds = truncate(rng.laplace(cfg.b_scale));
  return d;
}

/// Deterministic core of training-pair synthesis: template patch from the
/// first frame at its box, source patch from the second frame at the
/// perturbed box, and the ground-truth correction mapping the perturbed crop
/// frame onto the true box (aligner convention). Photometric jitter is
/// applied independently to both patches when aug_rng is given.
inline LossSample make_pair_at(const Image& frame_t, const Image& frame_t1,
                               const Box& gt_t, const Box& gt_t1,
                               const BoxPerturbation& delta, const TrainConfig& cfg,
                               Rng* aug_rng = nullptr, std::string id = {}) {
  const double scale = 1.0 + delta.ds;
  const Box perturbed{gt_t.cx + delta.dx * gt_t.w, gt_t.cy + delta.dy * gt_t.h,
                      gt_t.w * scale, gt_t.h * scale};
  if (!perturbed.valid())
    throw std::invalid_argument("make_pair: degenerate perturbed box");
  LossSample sample;
  sample.tpl = crop_resize(frame_t, gt_t, cfg.context, cfg.template_size);
  sample.src = crop_resize(frame_t1, perturbed, cfg.context, cfg.template_size);
  sample.dp_gt = box_correction(perturbed, gt_t1, cfg.context, cfg.family);
  if (aug_rng) {
    sample.tpl = photometric_augment(sample.tpl, *aug_rng, cfg.brightness_aug,
                                     cfg.contrast_aug, cfg.saturation_aug);
    sample.src = photometric_augment(sample.src, *aug_rng, cfg.brightness_aug,
                                     cfg.contrast_aug, cfg.saturation_aug);
  }
  sample.id = std::move(id);
  return sample;
}

inline LossSample make_pair(const Image& frame_t, const Image& frame_t1,
                            const Box& gt_t, const Box& gt_t1,
                            const TrainConfig& cfg, Rng& rng, std::string id = {}) {
  const BoxPerturbation delta = sample_perturbation(rng, cfg);
  return make_pair_at(frame_t, frame_t1, gt_t, gt_t1, delta, cfg, &rng, std::move(id));
}

/// Single-frame convenience: treats the object as stationary between frames.
inline LossSample make_pair(const Image& frame_t, const Image& frame_t1,
                            const Box& gt_t, const TrainConfig& cfg, Rng& rng,
                            std::string id = {}) {
  return make_pair(frame_t, frame_t1, gt_t, gt_t, cfg, rng, std::move(id));
}

/// Adaptive-moment gradient descent with bias correction.
struct AdamOptimizer {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  FeatureParams m;
  FeatureParams v;
  long long t = 0;

  AdamOptimizer(const FeatureParams& params, double lr)
      : learning_rate(lr), m(zeros_like(params)), v(zeros_like(params)) {}

  void update(FeatureParams& params, const FeatureParams& grads) {
    ++t;
    const double c1 = 1.0 - std::pow(beta1, static_cast<double>(t));
    const double c2 = 1.0 - std::pow(beta2, static_cast<double>(t));
    for (std::size_t li = 0; li < params.layers.size(); ++li) {
      auto step = [&](std::vector<double>& p, std::vector<double>& mm,
                      std::vector<double>& vv, const std::vector<double>& g) {
        for (std::size_t i = 0; i < p.size(); ++i) {
          mm[i] = beta1 * mm[i] + (1.0 - beta1) * g[i];
          vv[i] = beta2 * vv[i] + (1.0 - beta2) * g[i] * g[i];
          p[i] -= learning_rate * (mm[i] / c1) / (std::sqrt(vv[i] / c2) + eps);
        }
      };
      step(params.layers[li].weights, m.layers[li].weights, v.layers[li].weights,
           grads.layers[li].weights);
      step(params.layers[li].bias, m.layers[li].bias, v.layers[li].bias,
           grads.layers[li].bias);
    }
  }
};

struct TrainSequence {
  std::vector<Image> frames;
  std::vector<Box> gt;
  double fps = 30.0;
};

struct TrainResult {
  FeatureParams params;
  std::vector<double> epoch_loss;  // mean conditional LK loss per epoch
};

/// Minibatch training of the feature extractor on the conditional LK loss.
/// Pairs are resampled every epoch; gradients are accumulated in sample-index
/// order and updates are serialized, so a fixed seed reproduces the run
/// bit for bit.
inline TrainResult train(const std::vector<TrainSequence>& sequences,
                         const TrainConfig& cfg, const FeatureParams& theta_init) {
  std::vector<std::pair<int, int>> templates;  // (sequence, frame t)
  for (std::size_t s = 0; s < sequences.size(); ++s) {
    const auto& seq = sequences[s];
    if (seq.gt.size() != seq.frames.size())
      throw DataError("train: ground truth count does not match frame count");
    for (std::size_t t = 0; t + 1 < seq.frames.size(); ++t)
      templates.emplace_back(static_cast<int>(s), static_cast<int>(t));
  }
  if (templates.empty())
    throw DataError("train: no usable frame pairs in the training set");

  Rng rng(cfg.seed);
  TrainResult result;
  result.params = theta_init;
  AdamOptimizer opt(theta_init, cfg.learning_rate);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::vector<LossSample> pairs;
    pairs.reserve(templates.size() * cfg.samples_per_template);
    for (const auto& [s, t] : templates) {
      const auto& seq = sequences[static_cast<std::size_t>(s)];
      for (int k = 0; k < cfg.samples_per_template; ++k) {
        std::ostringstream id;
        id << "seq" << s << ":frame" << t << ":" << k;
        pairs.push_back(make_pair(seq.frames[t], seq.frames[t + 1], seq.gt[t],
                                  seq.gt[t + 1], cfg, rng, id.str()));
      }
    }
    std::vector<std::size_t> order(pairs.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    shuffle(order, rng);

    double epoch_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      FeatureParams grads = zeros_like(result.params);
      for (std::size_t i = start; i < end; ++i) {
        const LossSample& sample = pairs[order[i]];
        LossCache cache;
        const double value = conditional_lk_forward(result.params, sample,
                                                    cfg.family, cfg.damping, &cache);
        if (!std::isfinite(value))
          throw NumericalError("train: non-finite loss at sample " + sample.id);
        const LossGrad g = conditional_lk_backward(result.params, cache);
        axpy_params(grads, g.grad_theta, 1.0);
        epoch_sum += value;
      }
      scale_params(grads, 1.0 / static_cast<double>(end - start));
      opt.update(result.params, grads);
    }
    result.epoch_loss.push_back(epoch_sum / static_cast<double>(pairs.size()));
  }
  return result;
}

// ---------------------------------------------------------------------------
// Checkpoint persistence.
//
// File layout: magic "DLK1", a u32 little-endian byte length followed by a
// "key = value" text header, all tensors as little-endian float64 in
// declaration order (per layer: weights then bias), and a trailing u32 CRC32
// of every preceding byte.
// ---------------------------------------------------------------------------

struct Checkpoint {
  int version = 1;
  FeatureParams params;
  TrainConfig config;
  int epoch = 0;
  double running_loss = 0.0;
};

inline std::string layer_spec_string(const FeatureParams& params) {
  std::ostringstream out;
  for (std::size_t i = 0; i < params.layers.size(); ++i) {
    const auto& l = params.layers[i];
    if (i) out << ";";
    out << l.kernel_size << "," << l.in_channels << "," << l.out_channels << ","
        << (l.relu ? 1 : 0);
  }
  return out.str();
}

inline bool same_extractor_spec(const FeatureParams& a, const FeatureParams& b) {
  return a.kind == b.kind && a.gradchan_value == b.gradchan_value &&
         a.mean_subtract == b.mean_subtract &&
         layer_spec_string(a) == layer_spec_string(b);
}

namespace detail {

inline std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void append_u32(std::string& out, std::uint32_t v) {
  char bytes[4];
  std::memcpy(bytes, &v, 4);
  out.append(bytes, 4);
}

inline std::uint32_t read_u32(const std::string& buf, std::size_t off) {
  std::uint32_t v;
  std::memcpy(&v, buf.data() + off, 4);
  return v;
}

inline std::map<std::string, std::string> parse_header(const std::string& text,
                                                       const std::string& path) {
  std::map<std::string, std::string> kv;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw DataError("malformed checkpoint header line in " + path + ": " + line);
    auto trim = [](std::string s) {
      const auto a = s.find_first_not_of(" \t");
      const auto b = s.find_last_not_of(" \t");
      return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return kv;
}

}  // namespace detail

inline void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::ostringstream header;
  const TrainConfig& c = ckpt.config;
  header << "version = " << ckpt.version << "\n"
         << "kind = " << extractor_kind_name(ckpt.params.kind) << "\n"
         << "gradchan_value = " << (ckpt.params.gradchan_value ? 1 : 0) << "\n"
         << "mean_subtract = " << (ckpt.params.mean_subtract ? 1 : 0) << "\n"
         << "layers = " << layer_spec_string(ckpt.params) << "\n"
         << "epoch = " << ckpt.epoch << "\n"
         << "running_loss = " << detail::fmt_double(ckpt.running_loss) << "\n"
         << "b_translation = " << detail::fmt_double(c.b_translation) << "\n"
         << "b_scale = " << detail::fmt_double(c.b_scale) << "\n"
         << "truncation = " << detail::fmt_double(c.truncation) << "\n"
         << "samples_per_template = " << c.samples_per_template << "\n"
         << "epochs = " << c.epochs << "\n"
         << "learning_rate = " << detail::fmt_double(c.learning_rate) << "\n"
         << "batch_size = " << c.batch_size << "\n"
         << "seed = " << c.seed << "\n"
         << "damping = " << detail::fmt_double(c.damping) << "\n"
         << "template_size = " << c.template_size << "\n"
         << "context = " << detail::fmt_double(c.context) << "\n"
         << "family = " << (c.family == WarpFamily::kTranslation ? "translation"
                                                                 : "translation_scale")
         << "\n"
         << "brightness_aug = " << detail::fmt_double(c.brightness_aug) << "\n"
         << "contrast_aug = " << detail::fmt_double(c.contrast_aug) << "\n"
         << "saturation_aug = " << detail::fmt_double(c.saturation_aug) << "\n";
  const std::string header_text = header.str();

  std::string buf = "DLK1";
  detail::append_u32(buf, static_cast<std::uint32_t>(header_text.size()));
  buf += header_text;
  for (const auto& layer : ckpt.params.layers) {
    const auto append_tensor = [&buf](const std::vector<double>& t) {
      const std::size_t off = buf.size();
      buf.resize(off + t.size() * sizeof(double));
      std::memcpy(buf.data() + off, t.data(), t.size() * sizeof(double));
    };
    append_tensor(layer.weights);
    append_tensor(layer.bias);
  }
  const auto crc = static_cast<std::uint32_t>(
      crc32(0L, reinterpret_cast<const Bytef*>(buf.data()),
            static_cast<uInt>(buf.size())));
  detail::append_u32(buf, crc);

  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write checkpoint: " + path);
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw DataError("short write: " + path);
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  const std::string buf = ss.str();

  if (buf.size() < 12 || buf.compare(0, 4, "DLK1") != 0)
    throw DataError("not a checkpoint file (bad magic): " + path);
  const std::uint32_t header_len = detail::read_u32(buf, 4);
  if (buf.size() < 12 + static_cast<std::size_t>(header_len))
    throw DataError("truncated checkpoint: " + path);
  const auto stored_crc = detail::read_u32(buf, buf.size() - 4);
  const auto crc = static_cast<std::uint32_t>(
      crc32(0L, reinterpret_cast<const Bytef*>(buf.data()),
            static_cast<uInt>(buf.size() - 4)));
  if (crc != stored_crc)
    throw DataError("checkpoint checksum failure: " + path);

  const auto kv = detail::parse_header(buf.substr(8, header_len), path);
  const auto get = [&](const std::string& key) -> const std::string& {
    const auto it = kv.find(key);
    if (it == kv.end())
      throw DataError("checkpoint header missing key '" + key + "': " + path);
    return it->second;
  };

  Checkpoint ckpt;
  ckpt.version = std::stoi(get("version"));
  if (ckpt.version != 1)
    throw DataError("unsupported checkpoint version in " + path + ": " +
                    get("version"));
  const std::string kind = get("kind");
  if (kind == "identity")
    ckpt.params.kind = ExtractorKind::kIdentity;
  else if (kind == "gradchan")
    ckpt.params.kind = ExtractorKind::kGradChannels;
  else if (kind == "conv")
    ckpt.params.kind = ExtractorKind::kConv;
  else
    throw DataError("unknown extractor kind in " + path + ": " + kind);
  ckpt.params.gradchan_value = get("gradchan_value") != "0";
  ckpt.params.mean_subtract = get("mean_subtract") != "0";
  ckpt.epoch = std::stoi(get("epoch"));
  ckpt.running_loss = std::stod(get("running_loss"));
  TrainConfig& c = ckpt.config;
  c.b_translation = std::stod(get("b_translation"));
  c.b_scale = std::stod(get("b_scale"));
  c.truncation = std::stod(get("truncation"));
  c.samples_per_template = std::stoi(get("samples_per_template"));
  c.epochs = std::stoi(get("epochs"));
  c.learning_rate = std::stod(get("learning_rate"));
  c.batch_size = std::stoi(get("batch_size"));
  c.seed = std::stoull(get("seed"));
  c.damping = std::stod(get("damping"));
  c.template_size = std::stoi(get("template_size"));
  c.context = std::stod(get("context"));
  c.family = get("family") == "translation" ? WarpFamily::kTranslation
                                            : WarpFamily::kTranslationScale;
  c.brightness_aug = std::stod(get("brightness_aug"));
  c.contrast_aug = std::stod(get("contrast_aug"));
  c.saturation_aug = std::stod(get("saturation_aug"));

  // Layer tensors.
  std::size_t off = 8 + header_len;
  const std::string layers = get("layers");
  if (!layers.empty()) {
    std::istringstream ls(layers);
    std::string item;
    while (std::getline(ls, item, ';')) {
      int k, cin, cout, relu;
      if (std::sscanf(item.c_str(), "%d,%d,%d,%d", &k, &cin, &cout, &relu) != 4)
        throw DataError("malformed layer spec in " + path + ": " + item);
      ConvLayer layer;
      layer.kernel_size = k;
      layer.in_channels = cin;
      layer.out_channels = cout;
      layer.relu = relu != 0;
      layer.weights.resize(static_cast<std::size_t>(k) * k * cin * cout);
      layer.bias.resize(cout);
      const auto read_tensor = [&](std::vector<double>& t) {
        const std::size_t bytes = t.size() * sizeof(double);
        if (off + bytes + 4 > buf.size())
          throw DataError("truncated checkpoint tensor data: " + path);
        std::memcpy(t.data(), buf.data() + off, bytes);
        off += bytes;
      };
      read_tensor(layer.weights);
      read_tensor(layer.bias);
      ckpt.params.layers.push_back(std::move(layer));
    }
  }
  if (off + 4 != buf.size())
    throw DataError("checkpoint has trailing bytes: " + path);
  return ckpt;
}

}  // namespace deeplk
