#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "deeplk/features.hpp"
#include "deeplk/iclk.hpp"
#include "deeplk/image.hpp"
#include "deeplk/warp.hpp"

namespace deeplk {

/// Huber loss with transition point 1, summed over dimensions:
/// x^2/2 for |x| <= 1, |x| - 1/2 otherwise.
inline double huber(const Eigen::VectorXd& e) {
  double sum = 0.0;
  for (Eigen::Index i = 0; i < e.size(); ++i) {
    const double a = std::abs(e(i));
    sum += a <= 1.0 ? 0.5 * a * a : a - 0.5;
  }
  return sum;
}

/// Derivative of the Huber loss: per-dimension clip to [-1, 1].
inline Eigen::VectorXd huber_grad(const Eigen::VectorXd& e) {
  Eigen::VectorXd g(e.size());
  for (Eigen::Index i = 0; i < e.size(); ++i)
    g(i) = std::min(std::max(e(i), -1.0), 1.0);
  return g;
}

/// One training example: a template patch, a source patch cropped at a
/// perturbed box, and the ground-truth correction. dp_gt uses the aligner's
/// convention, i.e. the warp that maps the perturbed crop frame onto the true
/// box (what align should return starting from the perturbed box); the
/// regression target is its inverse.
struct LossSample {
  Patch tpl;
  Patch src;
  WarpParams dp_gt;
  std::string id;
};

/// Everything the backward pass needs from a forward evaluation.
struct LossCache {
  FeatureCache tpl_cache;
  FeatureCache src_cache;
  TemplateModel model;
  Eigen::VectorXd d;       // vec(phi_src) - vec(phi_tpl)
  Eigen::VectorXd target;  // regression target derived from dp_gt
  Eigen::VectorXd e;       // R d - target
  double value = 0.0;
};

/// Loss on the one-step warp prediction: extracts features of both patches,
/// forms the regression pair from the template features, and applies the
/// Huber loss to the prediction error e = R (phi_src - phi_tpl) - target.
/// damping must be an explicit constant here: the backward pass treats
/// lambda as independent of the features.
inline double conditional_lk_forward(const FeatureParams& theta,
                                     const LossSample& sample, WarpFamily family,
                                     double damping, LossCache* cache = nullptr) {
  if (!sample.tpl.img.same_shape(sample.src.img))
    throw std::invalid_argument("conditional_lk_forward: patch shape mismatch");
  if (damping < 0.0)
    throw std::invalid_argument("conditional_lk_forward: damping must be >= 0");
  LossCache local;
  LossCache& c = cache ? *cache : local;
  const FeatureMap phi_tpl = feature_forward(theta, sample.tpl.img, &c.tpl_cache);
  const FeatureMap phi_src = feature_forward(theta, sample.src.img, &c.src_cache);
  try {
    c.model = build_template_model(phi_tpl, family, damping);
  } catch (const NumericalError& err) {
    throw NumericalError(std::string(err.what()) + " (sample " + sample.id + ")");
  }
  WarpParams gt = sample.dp_gt;
  gt.family = family;
  if (family == WarpFamily::kTranslation) gt.s = 0.0;
  c.target = params_to_vector(warp_inverse(gt));
  c.d = as_vector(phi_src) - as_vector(phi_tpl);
  c.e = c.model.R * c.d - c.target;
  c.value = huber(c.e);
  return c.value;
}

struct LossGrad {
  double value = 0.0;
  FeatureParams grad_theta;
  Eigen::VectorXd residual;   // e = prediction - target
  FeatureMap grad_phi_tpl;    // dL/dphi(template), feature space
  FeatureMap grad_phi_src;    // dL/dphi(source), feature space
};

/// Analytic gradient of the conditional LK loss with respect to the feature
/// extractor parameters. The template branch differentiates through the
/// damped pseudo-inverse R = (W^T W + lambda I)^-1 W^T using
/// d(A^-1) = -A^-1 dA A^-1; since W is linear in the template features, the
/// contraction collapses to the stencil adjoint applied to two rank-one
/// cotangent fields.
inline LossGrad conditional_lk_backward(const FeatureParams& theta,
                                        const LossCache& cache) {
  const TemplateModel& model = cache.model;
  const int side = model.side();
  const int ch = model.feature_channels();
  const int dof = warp_dof(model.family);
  const double grid_scale = side / 2.0;

  const Eigen::VectorXd u = huber_grad(cache.e);
  const Eigen::VectorXd a = model.A_inv * u;
  const Eigen::VectorXd q = cache.e + cache.target;  // = R d
  const Eigen::VectorXd Wa = model.W * a;
  const Eigen::VectorXd Wq = model.W * q;
  const Eigen::VectorXd alpha = cache.d - Wq;
  const Eigen::VectorXd grad_phi_src = model.R.transpose() * u;

  // Cotangent of W as two rank-one pieces: M = alpha a^T - Wa q^T. Contract
  // with the warp Jacobian per pixel, then push through the stencil adjoint.
  Image px(side, side, ch), py(side, side, ch);
  for (int y = 0; y < side; ++y) {
    const double ny = normalized_coord(y, side);
    for (int x = 0; x < side; ++x) {
      const double nx = normalized_coord(x, side);
      double ja_x = a(0), ja_y = a(1);
      double jq_x = q(0), jq_y = q(1);
      if (dof == 3) {
        ja_x += a(2) * nx;
        ja_y += a(2) * ny;
        jq_x += q(2) * nx;
        jq_y += q(2) * ny;
      }
      for (int c = 0; c < ch; ++c) {
        const std::size_t r = px.index(y, x, c);
        px.data[r] = alpha(static_cast<Eigen::Index>(r)) * ja_x -
                     Wa(static_cast<Eigen::Index>(r)) * jq_x;
        py.data[r] = alpha(static_cast<Eigen::Index>(r)) * ja_y -
                     Wa(static_cast<Eigen::Index>(r)) * jq_y;
      }
    }
  }
  Image grad_phi_tpl = image_gradients_adjoint(px, py);
  for (std::size_t i = 0; i < grad_phi_tpl.data.size(); ++i)
    grad_phi_tpl.data[i] = grad_phi_tpl.data[i] * grid_scale -
                           grad_phi_src(static_cast<Eigen::Index>(i));

  FeatureMap grad_src_map(side, side, ch);
  for (std::size_t i = 0; i < grad_src_map.data.size(); ++i)
    grad_src_map.data[i] = grad_phi_src(static_cast<Eigen::Index>(i));

  auto [grads_tpl, gin_tpl] = feature_backward(theta, cache.tpl_cache, grad_phi_tpl);
  auto [grads_src, gin_src] = feature_backward(theta, cache.src_cache, grad_src_map);
  (void)gin_tpl;
  (void)gin_src;
  axpy_params(grads_tpl, grads_src, 1.0);

  LossGrad out;
  out.value = cache.value;
  out.grad_theta = std::move(grads_tpl);
  out.residual = cache.e;
  out.grad_phi_tpl = std::move(grad_phi_tpl);
  out.grad_phi_src = std::move(grad_src_map);
  return out;
}

struct GradCheckReport {
  double max_rel_err = 0.0;
  std::ptrdiff_t worst_coordinate = -1;
  double analytic_at_worst = 0.0;
  double numeric_at_worst = 0.0;
  int checked = 0;
  bool pass = true;
};

/// Central finite differences of conditional_lk_forward against the analytic
/// gradient, coordinate by coordinate. Above max_coords coordinates a seeded
/// random subset is checked instead. Relative error uses
/// |a - n| / max(|a|, |n|, 1e-8).
inline GradCheckReport gradient_check(const FeatureParams& theta,
                                      const LossSample& sample, WarpFamily family,
                                      double damping, double epsilon,
                                      double tolerance, int max_coords = -1,
                                      std::uint64_t subset_seed = 0) {
  if (epsilon <= 0.0)
    throw std::invalid_argument("gradient_check: epsilon must be > 0");
  GradCheckReport report;
  const std::size_t n = theta.parameter_count();
  if (n == 0) return report;

  LossCache cache;
  conditional_lk_forward(theta, sample, family, damping, &cache);
  const LossGrad grad = conditional_lk_backward(theta, cache);

  std::vector<std::size_t> coords(n);
  for (std::size_t i = 0; i < n; ++i) coords[i] = i;
  if (max_coords > 0 && n > static_cast<std::size_t>(max_coords)) {
    Rng rng(subset_seed);
    shuffle(coords, rng);
    coords.resize(static_cast<std::size_t>(max_coords));
    std::sort(coords.begin(), coords.end());
  }

  for (const std::size_t i : coords) {
    FeatureParams plus = theta;
    add_to_parameter(plus, i, epsilon);
    const double lp = conditional_lk_forward(plus, sample, family, damping);
    FeatureParams minus = theta;
    add_to_parameter(minus, i, -epsilon);
    const double lm = conditional_lk_forward(minus, sample, family, damping);
    const double numeric = (lp - lm) / (2.0 * epsilon);
    const double analytic = get_parameter(grad.grad_theta, i);
    const double rel = std::abs(analytic - numeric) /
                       std::max({std::abs(analytic), std::abs(numeric), 1e-8});
    ++report.checked;
    if (rel > report.max_rel_err) {
      report.max_rel_err = rel;
      report.worst_coordinate = static_cast<std::ptrdiff_t>(i);
      report.analytic_at_worst = analytic;
      report.numeric_at_worst = numeric;
    }
  }
  report.pass = report.max_rel_err < tolerance;
  return report;
}

}  // namespace deeplk
