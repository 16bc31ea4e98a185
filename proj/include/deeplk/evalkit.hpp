#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "deeplk/core.hpp"
#include "deeplk/features.hpp"
#include "deeplk/image.hpp"
#include "deeplk/image_io.hpp"
#include "deeplk/warp.hpp"

namespace deeplk {

/// Intersection over union of two axis-aligned boxes.
inline double iou(const Box& a, const Box& b) {
  if (!a.valid() || !b.valid())
    throw std::invalid_argument("iou: boxes must have positive size");
  const double iw = std::min(a.x2(), b.x2()) - std::max(a.x1(), b.x1());
  const double ih = std::min(a.y2(), b.y2()) - std::max(a.y1(), b.y1());
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  const double inter = iw * ih;
  // rounding in x2() - x1() can push the ratio a hair past 1 for identical boxes
  return std::min(1.0, inter / (a.w * a.h + b.w * b.h - inter));
}

/// Fraction of frames with IoU strictly above each threshold on the grid
/// 0.00 .. 1.00, step 0.01, plus the mean over the grid (AUC). The strict
/// inequality makes the 1.00 bucket unreachable, so perfect predictions top
/// out at 100/101.
struct SuccessCurve {
  std::vector<double> thresholds;
  std::vector<double> success;
  double auc = 0.0;
  double success_at_050 = 0.0;
};

inline SuccessCurve success_curve(const std::vector<Box>& pred,
                                  const std::vector<Box>& gt) {
  if (pred.size() != gt.size())
    throw std::invalid_argument("success_curve: prediction/gt length mismatch");
  if (pred.empty()) throw std::invalid_argument("success_curve: empty input");
  std::vector<double> overlaps(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) overlaps[i] = iou(pred[i], gt[i]);
  SuccessCurve curve;
  curve.thresholds.resize(101);
  curve.success.resize(101);
  double sum = 0.0;
  for (int k = 0; k <= 100; ++k) {
    const double tau = k * 0.01;
    int hits = 0;
    for (const double v : overlaps)
      if (v > tau) ++hits;
    curve.thresholds[k] = tau;
    curve.success[k] = static_cast<double>(hits) / overlaps.size();
    sum += curve.success[k];
    if (k == 50) curve.success_at_050 = curve.success[k];
  }
  curve.auc = sum / 101.0;
  return curve;
}

/// Separable Gaussian blur with edge-replicate borders; kernel truncated at
/// three sigma.
inline Image gaussian_blur(const Image& img, double sigma) {
  if (sigma <= 0.0) return img;
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> kernel(2 * radius + 1);
  double norm = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    kernel[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
    norm += kernel[i + radius];
  }
  for (double& k : kernel) k /= norm;

  Image tmp(img.rows, img.cols, img.channels);
  for (int y = 0; y < img.rows; ++y)
    for (int x = 0; x < img.cols; ++x)
      for (int c = 0; c < img.channels; ++c) {
        double acc = 0.0;
        for (int i = -radius; i <= radius; ++i) {
          const int xx = std::clamp(x + i, 0, img.cols - 1);
          acc += kernel[i + radius] * img.at(y, xx, c);
        }
        tmp.at(y, x, c) = acc;
      }
  Image out(img.rows, img.cols, img.channels);
  for (int y = 0; y < img.rows; ++y)
    for (int x = 0; x < img.cols; ++x)
      for (int c = 0; c < img.channels; ++c) {
        double acc = 0.0;
        for (int i = -radius; i <= radius; ++i) {
          const int yy = std::clamp(y + i, 0, img.rows - 1);
          acc += kernel[i + radius] * tmp.at(yy, x, c);
        }
        out.at(y, x, c) = acc;
      }
  return out;
}

/// Seeded noise on a coarse cell lattice, Gaussian-blurred and rescaled to
/// [lo, hi]. cell_size > 1 lengthens the correlation structure.
inline Image make_blurred_noise(int rows, int cols, int channels, Rng& rng,
                                double sigma = 2.0, int cell_size = 1,
                                double lo = 0.1, double hi = 0.9) {
  Image img(rows, cols, channels);
  const int crows = (rows + cell_size - 1) / cell_size;
  const int ccols = (cols + cell_size - 1) / cell_size;
  std::vector<double> cells(static_cast<std::size_t>(crows) * ccols * channels);
  for (double& v : cells) v = rng.uniform01();
  for (int y = 0; y < rows; ++y)
    for (int x = 0; x < cols; ++x)
      for (int c = 0; c < channels; ++c)
        img.at(y, x, c) =
            cells[(static_cast<std::size_t>(y / cell_size) * ccols + x / cell_size) *
                      channels +
                  c];
  img = gaussian_blur(img, sigma);
  double mn = img.data[0], mx = img.data[0];
  for (const double v : img.data) {
    mn = std::min(mn, v);
    mx = std::max(mx, v);
  }
  const double span = mx > mn ? mx - mn : 1.0;
  for (double& v : img.data) v = lo + (hi - lo) * (v - mn) / span;
  return img;
}

struct SynthConfig {
  int width = 160;
  int height = 120;
  int frames = 100;
  int channels = 1;
  std::uint64_t seed = 1;
  double b_x = 0.06;              // translation Laplace scale, fraction of box size
  double b_s = 1.0 / 30.0;        // log-scale Laplace scale
  double brightness_drift = 0.0;  // peak additive brightness over the sequence
  double box_w = 32.0;
  double box_h = 32.0;
  double motion_truncation = 0.2;  // per-step translation cap, fraction of box size
  double scale_truncation = 0.1;   // per-step |log scale| cap
  double blur_sigma = 2.0;
  int texture_cells = 1;           // noise lattice cell size, pixels
  double grating_amp = 0.0;        // optional periodic overlay on the foreground
  double grating_period = 4.0;     // period in image pixels at the initial box size
  double grating_angle = 0.0;
  double fps = 30.0;
};

struct SynthSequence {
  std::vector<Image> frames;
  std::vector<Box> gt;
  double fps = 30.0;
};

/// Renders a textured foreground patch on a differently textured background
/// and moves it with Laplace-distributed per-frame translation and log-scale
/// steps. Ground-truth boxes are exact and clamped to stay fully inside the
/// frame. Deterministic given the config seed.
inline SynthSequence synth_sequence(const SynthConfig& cfg) {
  if (cfg.frames < 2) throw std::invalid_argument("synth_sequence: frames must be >= 2");
  Rng rng(cfg.seed);
  const Image background = make_blurred_noise(cfg.height, cfg.width, cfg.channels,
                                              rng, cfg.blur_sigma, cfg.texture_cells,
                                              0.05, 0.55);
  const int fg_res = 64;
  Image foreground = make_blurred_noise(fg_res, fg_res, cfg.channels, rng,
                                        cfg.blur_sigma, cfg.texture_cells,
                                        0.45, 0.95);
  if (cfg.grating_amp > 0.0) {
    // period is given in image pixels at the initial box size; convert to the
    // texture's own grid
    const double period_tex =
        cfg.grating_period * (fg_res - 1) / std::max(cfg.box_w, 1.0);
    const double kx = std::cos(cfg.grating_angle) * 2.0 * M_PI / period_tex;
    const double ky = std::sin(cfg.grating_angle) * 2.0 * M_PI / period_tex;
    for (int y = 0; y < fg_res; ++y)
      for (int x = 0; x < fg_res; ++x)
        for (int c = 0; c < cfg.channels; ++c)
          foreground.at(y, x, c) = clamp01(
              foreground.at(y, x, c) + cfg.grating_amp * std::sin(kx * x + ky * y));
  }

  SynthSequence seq;
  seq.fps = cfg.fps;
  Box box{cfg.width / 2.0, cfg.height / 2.0, cfg.box_w, cfg.box_h};

  const auto clamp_box = [&](Box b) {
    const double max_w = std::min(cfg.width, cfg.height) / 2.5;
    b.w = std::clamp(b.w, 12.0, max_w);
    b.h = std::clamp(b.h, 12.0, max_w);
    b.cx = std::clamp(b.cx, b.w / 2.0, cfg.width - 1.0 - b.w / 2.0);
    b.cy = std::clamp(b.cy, b.h / 2.0, cfg.height - 1.0 - b.h / 2.0);
    return b;
  };
  box = clamp_box(box);

  for (int t = 0; t < cfg.frames; ++t) {
    if (t > 0) {
      Box next = box;
      if (cfg.b_x > 0.0) {
        const double max_dx = cfg.motion_truncation * box.w;
        const double max_dy = cfg.motion_truncation * box.h;
        next.cx += std::clamp(rng.laplace(cfg.b_x * box.w), -max_dx, max_dx);
        next.cy += std::clamp(rng.laplace(cfg.b_x * box.h), -max_dy, max_dy);
      }
      if (cfg.b_s > 0.0) {
        const double ds = std::clamp(rng.laplace(cfg.b_s), -cfg.scale_truncation,
                                     cfg.scale_truncation);
        next.w *= std::exp(ds);
        next.h *= std::exp(ds);
      }
      box = clamp_box(next);
    }
    Image frame = background;
    const int x_lo = std::max(0, static_cast<int>(std::ceil(box.x1())));
    const int x_hi = std::min(cfg.width - 1, static_cast<int>(std::floor(box.x2())));
    const int y_lo = std::max(0, static_cast<int>(std::ceil(box.y1())));
    const int y_hi = std::min(cfg.height - 1, static_cast<int>(std::floor(box.y2())));
    for (int y = y_lo; y <= y_hi; ++y) {
      const double fy = (y - box.y1()) / box.h * (fg_res - 1);
      for (int x = x_lo; x <= x_hi; ++x) {
        const double fx = (x - box.x1()) / box.w * (fg_res - 1);
        sample_bilinear_into(foreground, fx, fy, &frame.at(y, x, 0));
      }
    }
    if (cfg.brightness_drift != 0.0) {
      const double offset =
          cfg.brightness_drift * std::sin(2.0 * M_PI * t / cfg.frames);
      for (double& v : frame.data) v = clamp01(v + offset);
    }
    seq.frames.push_back(std::move(frame));
    seq.gt.push_back(box);
  }
  return seq;
}

// ---------------------------------------------------------------------------
// Sequence directory layout: frames/ with zero-padded numbered images in
// lexicographic order, groundtruth.txt with one "x,y,w,h" line per frame
// (top-left corner convention), optional fps.txt.
// ---------------------------------------------------------------------------

inline std::vector<Box> parse_boxes(std::istream& in, const std::string& path) {
  std::vector<Box> boxes;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    double x, y, w, h;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ls(line);
    if (!(ls >> x >> y >> w >> h))
      throw DataError(path + ":" + std::to_string(line_no) + ": malformed box line");
    if (w <= 0.0 || h <= 0.0)
      throw DataError(path + ":" + std::to_string(line_no) +
                      ": box must have positive size");
    boxes.push_back(Box::from_top_left(x, y, w, h));
  }
  return boxes;
}

inline std::vector<Box> load_boxes(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open ground truth file: " + path);
  return parse_boxes(in, path);
}

struct LoadedSequence {
  std::vector<std::string> frame_paths;
  std::vector<Box> gt;  // may be empty for tracking-only runs
  double fps = 30.0;

  Image frame(std::size_t i) const { return load_image(frame_paths.at(i)); }
  std::size_t size() const { return frame_paths.size(); }
};

inline LoadedSequence load_sequence(const std::string& dir) {
  namespace fs = std::filesystem;
  const fs::path frames_dir = fs::path(dir) / "frames";
  if (!fs::is_directory(frames_dir))
    throw DataError("sequence directory has no frames/ subdirectory: " + dir);
  LoadedSequence seq;
  for (const auto& entry : fs::directory_iterator(frames_dir)) {
    if (!entry.is_regular_file()) continue;
    const std::string ext = entry.path().extension().string();
    if (ext == ".png" || ext == ".pgm" || ext == ".ppm" || ext == ".pnm")
      seq.frame_paths.push_back(entry.path().string());
  }
  std::sort(seq.frame_paths.begin(), seq.frame_paths.end());
  if (seq.frame_paths.empty()) throw DataError("no frames found in " + dir);

  const fs::path gt_path = fs::path(dir) / "groundtruth.txt";
  if (fs::exists(gt_path)) {
    seq.gt = load_boxes(gt_path.string());
    if (seq.gt.size() != seq.frame_paths.size())
      throw DataError("frame/ground-truth count mismatch in " + dir + ": " +
                      std::to_string(seq.frame_paths.size()) + " frames vs " +
                      std::to_string(seq.gt.size()) + " boxes");
  }
  const fs::path fps_path = fs::path(dir) / "fps.txt";
  if (fs::exists(fps_path)) {
    std::ifstream in(fps_path);
    if (!(in >> seq.fps)) throw DataError("malformed fps.txt in " + dir);
  }
  return seq;
}

inline void write_sequence(const std::string& dir, const SynthSequence& seq,
                           const std::string& ext = "pgm") {
  namespace fs = std::filesystem;
  fs::create_directories(fs::path(dir) / "frames");
  for (std::size_t i = 0; i < seq.frames.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "%06zu.%s", i, ext.c_str());
    save_image((fs::path(dir) / "frames" / name).string(), seq.frames[i]);
  }
  std::ofstream gt((fs::path(dir) / "groundtruth.txt").string());
  if (!gt) throw DataError("cannot write ground truth in " + dir);
  for (const Box& b : seq.gt) {
    char line[128];
    std::snprintf(line, sizeof line, "%.6f,%.6f,%.6f,%.6f\n", b.x1(), b.y1(), b.w,
                  b.h);
    gt << line;
  }
  std::ofstream fps((fs::path(dir) / "fps.txt").string());
  fps << seq.fps << "\n";
}

/// Results file: one "x,y,w,h,flag" line per frame, top-left convention,
/// flag 1 marking frames where alignment failed.
inline void write_results(const std::string& path, const std::vector<Box>& boxes,
                          const std::vector<bool>& failed) {
  if (boxes.size() != failed.size())
    throw std::invalid_argument("write_results: box/flag count mismatch");
  std::ofstream out(path);
  if (!out) throw DataError("cannot write results file: " + path);
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    char line[160];
    std::snprintf(line, sizeof line, "%.6f,%.6f,%.6f,%.6f,%d\n", boxes[i].x1(),
                  boxes[i].y1(), boxes[i].w, boxes[i].h, failed[i] ? 1 : 0);
    out << line;
  }
}

inline std::pair<std::vector<Box>, std::vector<bool>> read_results(
    const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open results file: " + path);
  std::vector<Box> boxes;
  std::vector<bool> failed;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    double x, y, w, h;
    int flag;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ls(line);
    if (!(ls >> x >> y >> w >> h >> flag))
      throw DataError(path + ":" + std::to_string(line_no) +
                      ": malformed results line");
    boxes.push_back(Box::from_top_left(x, y, w, h));
    failed.push_back(flag != 0);
  }
  return {std::move(boxes), std::move(failed)};
}

// ---------------------------------------------------------------------------
// Cost-curve diagnostic: feature-space SSD as a function of horizontal shift.
// ---------------------------------------------------------------------------

struct CostCurvePoint {
  double shift = 0.0;
  double ssd = 0.0;
};

inline std::vector<CostCurvePoint> cost_curve(const FeatureParams& theta,
                                              const Patch& tpl, const Image& source,
                                              double context, double max_shift = 8.0,
                                              double step = 0.5) {
  if (step <= 0.0 || max_shift <= 0.0)
    throw std::invalid_argument("cost_curve: range and step must be > 0");
  const FeatureMap phi_tpl = feature_forward(theta, tpl.img);
  std::vector<CostCurvePoint> curve;
  for (double shift = -max_shift; shift <= max_shift + 1e-9; shift += step) {
    Box shifted = tpl.box;
    shifted.cx += shift;
    const Patch patch = crop_resize(source, shifted, context, tpl.side());
    const FeatureMap phi = feature_forward(theta, patch.img);
    double ssd = 0.0;
    for (std::size_t i = 0; i < phi.data.size(); ++i) {
      const double d = phi.data[i] - phi_tpl.data[i];
      ssd += d * d;
    }
    curve.push_back({shift, ssd});
  }
  return curve;
}

/// Strict interior local minima on the shift grid.
inline int count_local_minima(const std::vector<CostCurvePoint>& curve) {
  int count = 0;
  for (std::size_t i = 1; i + 1 < curve.size(); ++i)
    if (curve[i].ssd < curve[i - 1].ssd && curve[i].ssd < curve[i + 1].ssd) ++count;
  return count;
}

inline void write_cost_csv(std::ostream& out, const std::vector<CostCurvePoint>& c) {
  out << "shift,ssd\n";
  for (const auto& p : c) {
    char line[64];
    std::snprintf(line, sizeof line, "%.3f,%.9g\n", p.shift, p.ssd);
    out << line;
  }
}

inline void write_success_csv(std::ostream& out, const SuccessCurve& c) {
  out << "threshold,success\n";
  for (std::size_t i = 0; i < c.thresholds.size(); ++i) {
    char line[64];
    std::snprintf(line, sizeof line, "%.2f,%.9g\n", c.thresholds[i], c.success[i]);
    out << line;
  }
}

}  // namespace deeplk
