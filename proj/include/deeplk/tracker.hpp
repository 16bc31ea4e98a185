#pragma once

#include <cmath>
#include <utility>

#include "deeplk/features.hpp"
#include "deeplk/iclk.hpp"
#include "deeplk/image.hpp"
#include "deeplk/warp.hpp"

namespace deeplk {

/// Template adaptation rates matching 30 FPS and 240 FPS video; other rates
/// scale 0.03 in proportion to 30 / fps.
inline double alpha_for_fps(double fps) {
  if (fps <= 0.0) return 0.03;
  if (fps == 240.0) return 0.0037;
  return 0.03 * (30.0 / fps);
}

/// Exponential template-feature update: (1 - alpha) * adapted + alpha * fresh.
/// alpha = 0 returns `adapted` bitwise unchanged; alpha = 1 replaces it.
inline FeatureMap blend_features(const FeatureMap& adapted, const FeatureMap& fresh,
                                 double alpha) {
  if (!adapted.same_shape(fresh))
    throw std::invalid_argument("blend_features: shape mismatch");
  if (alpha <= 0.0) return adapted;
  if (alpha >= 1.0) return fresh;
  FeatureMap out = adapted;
  for (std::size_t i = 0; i < out.data.size(); ++i)
    out.data[i] = (1.0 - alpha) * adapted.data[i] + alpha * fresh.data[i];
  return out;
}

struct TrackerConfig {
  double alpha = 0.03;        // template feature adaptation rate, in [0, 1]
  int template_size = 64;
  double context = 2.0;
  double damping = -1.0;      // < 0: automatic, scaled by trace(W^T W)
  int phase1_iters = 10;      // translation-only budget
  int phase2_iters = 10;      // translation + scale budget
  double tol = 1e-3;
};

/// Per-sequence tracker: translation-then-scale alignment schedule with
/// early stopping, plus exponential adaptation of the template features.
/// Single-owner mutable state; the feature parameters are shared read-only.
class Tracker {
 public:
  struct FrameResult {
    Box box;
    bool failed = false;
    int iterations = 0;
  };

  Tracker(const Image& frame0, const Box& box0, FeatureParams theta,
          const TrackerConfig& cfg)
      : theta_(std::move(theta)), cfg_(cfg), ref_box_(box0) {
    if (cfg.alpha < 0.0 || cfg.alpha > 1.0)
      throw std::invalid_argument("Tracker: alpha must be in [0, 1]");
    if (!box0.valid()) throw std::invalid_argument("Tracker: invalid initial box");
    adapted_phi_ = features_at(frame0, box0);
    rebuild_models();
  }

  const Box& box() const { return ref_box_; }
  long frame_index() const { return frame_index_; }
  const FeatureMap& adapted_features() const { return adapted_phi_; }

  FrameResult track(const Image& frame) {
    AlignOptions opts;
    opts.context = cfg_.context;
    opts.tol = cfg_.tol;

    opts.max_iters = cfg_.phase1_iters;
    const AlignResult phase1 = align(model_translation_, frame, ref_box_,
                                     WarpParams::identity(WarpFamily::kTranslation),
                                     theta_, opts);

    WarpParams seed = WarpParams::identity(WarpFamily::kTranslationScale);
    seed.tx = phase1.p_final.tx;
    seed.ty = phase1.p_final.ty;
    opts.max_iters = cfg_.phase2_iters;
    const AlignResult phase2 =
        align(model_scale_, frame, ref_box_, seed, theta_, opts);

    FrameResult result;
    result.iterations = phase1.iterations + phase2.iterations;
    WarpParams p;
    if (phase2.valid)
      p = phase2.p_final;
    else if (phase1.valid)
      p = WarpParams{WarpFamily::kTranslationScale, phase1.p_final.tx,
                     phase1.p_final.ty, 0.0};
    else {
      result.box = ref_box_;  // coast: keep the previous box, flag the frame
      result.failed = true;
      ++frame_index_;
      return result;
    }

    const Box new_box = warp_to_box(p, ref_box_, cfg_.context);
    ref_box_ = new_box;
    result.box = new_box;
    ++frame_index_;

    if (cfg_.alpha > 0.0) {
      adapted_phi_ = blend_features(adapted_phi_, features_at(frame, new_box),
                                    cfg_.alpha);
      rebuild_models();
    }
    return result;
  }

 private:
  FeatureMap features_at(const Image& frame, const Box& box) const {
    const Patch patch = crop_resize(frame, box, cfg_.context, cfg_.template_size);
    return feature_forward(theta_, patch.img);
  }

  void rebuild_models() {
    model_translation_ =
        build_template_model(adapted_phi_, WarpFamily::kTranslation, cfg_.damping);
    model_scale_ = build_template_model(adapted_phi_, WarpFamily::kTranslationScale,
                                        cfg_.damping);
  }

  FeatureParams theta_;
  TrackerConfig cfg_;
  Box ref_box_;
  FeatureMap adapted_phi_;
  TemplateModel model_translation_;
  TemplateModel model_scale_;
  long frame_index_ = 0;
};

}  // namespace deeplk
