#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <cassert>
#include <cmath>
#include <limits>
#include <vector>

#include "deeplk/features.hpp"
#include "deeplk/image.hpp"
#include "deeplk/warp.hpp"

namespace deeplk {

/// The "one-shot learned" linear layer formed from a template's features:
/// the template feature Jacobian W, the damped pseudo-inverse R and the bias
/// b = -R * vec(phi). Immutable after construction and shareable read-only.
struct TemplateModel {
  FeatureMap phi;
  WarpFamily family = WarpFamily::kTranslation;
  double damping = 0.0;     // lambda actually used
  Eigen::MatrixXd W;        // N x dof
  Eigen::MatrixXd A_inv;    // (W^T W + lambda I)^-1, dof x dof
  Eigen::MatrixXd R;        // dof x N
  Eigen::VectorXd b;        // dof

  int side() const { return phi.rows; }
  int feature_channels() const { return phi.channels; }
  std::size_t feature_size() const { return phi.data.size(); }
};

inline Eigen::Map<const Eigen::VectorXd> as_vector(const FeatureMap& m) {
  return {m.data.data(), static_cast<Eigen::Index>(m.data.size())};
}

/// Assembles the template feature Jacobian: per grid location, the feature
/// gradients (converted from pixel units to normalized coordinates by the
/// factor side/2) composed with the warp Jacobian at the identity warp.
inline Eigen::MatrixXd template_jacobian(const FeatureMap& phi, WarpFamily family) {
  const auto [gx, gy] = image_gradients(phi);
  const int side = phi.rows;
  const int ch = phi.channels;
  const int dof = warp_dof(family);
  const double grid_scale = side / 2.0;
  Eigen::MatrixXd W(static_cast<Eigen::Index>(phi.data.size()), dof);
  for (int y = 0; y < side; ++y) {
    const double ny = normalized_coord(y, side);
    for (int x = 0; x < side; ++x) {
      const double nx = normalized_coord(x, side);
      for (int c = 0; c < ch; ++c) {
        const Eigen::Index row = static_cast<Eigen::Index>(phi.index(y, x, c));
        const double dx = grid_scale * gx.at(y, x, c);
        const double dy = grid_scale * gy.at(y, x, c);
        W(row, 0) = dx;
        W(row, 1) = dy;
        if (dof == 3) W(row, 2) = dx * nx + dy * ny;
      }
    }
  }
  return W;
}

/// Builds the regression pair (R, b) from template features. damping < 0
/// selects the automatic value 1e-4 * trace(W^T W) / dof (with a tiny
/// absolute floor so constant templates stay well-posed).
inline TemplateModel build_template_model(const FeatureMap& phi, WarpFamily family,
                                          double damping = -1.0) {
  if (phi.rows != phi.cols)
    throw std::invalid_argument("build_template_model: feature map must be square");
  TemplateModel model;
  model.phi = phi;
  model.family = family;
  model.W = template_jacobian(phi, family);
  const int dof = warp_dof(family);
  Eigen::MatrixXd normal = model.W.transpose() * model.W;
  double lambda = damping;
  if (lambda < 0.0) lambda = 1e-4 * normal.trace() / dof + 1e-12;
  model.damping = lambda;
  normal.diagonal().array() += lambda;
  Eigen::LLT<Eigen::MatrixXd> llt(normal);
  if (llt.info() != Eigen::Success)
    throw NumericalError(
        "build_template_model: normal matrix not positive definite; raise damping");
  model.A_inv = llt.solve(Eigen::MatrixXd::Identity(dof, dof));
  model.R = model.A_inv * model.W.transpose();
  model.b = -(model.R * as_vector(model.phi));
  assert((model.b + model.R * as_vector(model.phi)).lpNorm<Eigen::Infinity>() <=
         1e-10 * (1.0 + model.b.lpNorm<Eigen::Infinity>()));
  return model;
}

/// One linear regression step: dp = R * vec(phi_source) + b.
inline WarpParams regression_step(const TemplateModel& model,
                                  const FeatureMap& phi_source) {
  if (!phi_source.same_shape(model.phi))
    throw std::invalid_argument("regression_step: feature shape mismatch");
  const Eigen::VectorXd dp = model.R * as_vector(phi_source) + model.b;
  return vector_to_params(model.family, dp);
}

struct AlignOptions {
  double context = 2.0;
  int max_iters = 20;
  double tol = 1e-3;  // infinity-norm convergence threshold on dp
};

struct AlignResult {
  WarpParams p_final;
  int iterations = 0;
  std::vector<double> ssd_trace;  // feature-space squared residual per iteration
  bool stopped_early = false;
  bool valid = false;  // at least one finite residual was recorded
};

/// Iterative aligner. Each iteration crops the source at the current warp,
/// extracts features and applies the regression step; the update is
/// inverse-composed into the state. Stops on convergence, on iteration
/// budget, or as soon as the residual stops decreasing, and returns the
/// iterate with the minimum recorded residual.
inline AlignResult align(const TemplateModel& model, const Image& source,
                         const Box& ref_box, const WarpParams& p_init,
                         const FeatureParams& theta, const AlignOptions& opts = {}) {
  AlignResult result;
  result.p_final = p_init;
  WarpParams p = p_init;
  double best_ssd = std::numeric_limits<double>::infinity();
  double prev_ssd = std::numeric_limits<double>::infinity();
  for (int it = 0; it < opts.max_iters; ++it) {
    const Box box = warp_to_box(p, ref_box, opts.context);
    const Patch patch = crop_resize(source, box, opts.context, model.side());
    const FeatureMap phi = feature_forward(theta, patch.img);
    if (!phi.same_shape(model.phi))
      throw std::invalid_argument("align: feature extractor does not match model");
    const Eigen::VectorXd residual = as_vector(phi) - as_vector(model.phi);
    const double ssd = residual.squaredNorm();
    result.iterations = it + 1;
    result.ssd_trace.push_back(ssd);
    if (!std::isfinite(ssd)) {
      result.stopped_early = true;
      break;
    }
    result.valid = true;
    if (ssd < best_ssd) {
      best_ssd = ssd;
      result.p_final = p;
    }
    if (ssd > prev_ssd) {  // residual no longer decreasing
      result.stopped_early = true;
      break;
    }
    prev_ssd = ssd;
    const Eigen::VectorXd dp_vec = model.R * residual;
    if (dp_vec.lpNorm<Eigen::Infinity>() < opts.tol) break;
    const WarpParams dp = vector_to_params(model.family, dp_vec);
    if (model.family == WarpFamily::kTranslationScale && 1.0 + dp.s <= 0.0) {
      result.stopped_early = true;  // degenerate update; keep the best iterate
      break;
    }
    p = inverse_compose(p, dp);
  }
  return result;
}

}  // namespace deeplk
