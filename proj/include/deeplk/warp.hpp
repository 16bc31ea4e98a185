#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>

#include "deeplk/core.hpp"

namespace deeplk {

enum class WarpFamily { kTranslation, kTranslationScale };

inline int warp_dof(WarpFamily family) {
  return family == WarpFamily::kTranslation ? 2 : 3;
}

/// Geometric warp state in normalized template coordinates (the patch spans
/// [-1, 1] on both axes). p = 0 is the identity warp; scale enters as a
/// multiplicative factor (1 + s) so the identity stays exact.
struct WarpParams {
  WarpFamily family = WarpFamily::kTranslation;
  double tx = 0.0;
  double ty = 0.0;
  double s = 0.0;  // unused for kTranslation

  static WarpParams identity(WarpFamily f) { return WarpParams{f, 0.0, 0.0, 0.0}; }

  int dof() const { return warp_dof(family); }
  bool invertible() const {
    return family == WarpFamily::kTranslation || 1.0 + s > 0.0;
  }
};

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

inline Vec2 apply_warp(const WarpParams& p, Vec2 pt) {
  if (p.family == WarpFamily::kTranslation)
    return {pt.x + p.tx, pt.y + p.ty};
  const double f = 1.0 + p.s;
  return {f * pt.x + p.tx, f * pt.y + p.ty};
}

/// Derivative of the warped point with respect to the parameters, evaluated
/// at the identity warp. 2 x dof.
inline Eigen::MatrixXd warp_jacobian(WarpFamily family, Vec2 pt) {
  Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(2, warp_dof(family));
  jac(0, 0) = 1.0;
  jac(1, 1) = 1.0;
  if (family == WarpFamily::kTranslationScale) {
    jac(0, 2) = pt.x;
    jac(1, 2) = pt.y;
  }
  return jac;
}

/// q such that W(x; q) = W^-1(x; p) for all x.
inline WarpParams warp_inverse(const WarpParams& p) {
  if (p.family == WarpFamily::kTranslation)
    return {p.family, -p.tx, -p.ty, 0.0};
  const double f = 1.0 + p.s;
  if (f <= 0.0) throw NumericalError("warp_inverse: scale factor not positive");
  return {p.family, -p.tx / f, -p.ty / f, 1.0 / f - 1.0};
}

/// Inverse-compositional update: returns p' with W(x; p') = W(W^-1(x; dp); p).
inline WarpParams inverse_compose(const WarpParams& p, const WarpParams& dp) {
  if (p.family != dp.family)
    throw std::invalid_argument("inverse_compose: mismatched warp families");
  if (p.family == WarpFamily::kTranslation)
    return {p.family, p.tx - dp.tx, p.ty - dp.ty, 0.0};
  const double fd = 1.0 + dp.s;
  if (fd <= 0.0)
    throw NumericalError("inverse_compose: degenerate update, 1 + ds <= 0");
  const double f = (1.0 + p.s) / fd;
  return {p.family, p.tx - f * dp.tx, p.ty - f * dp.ty, f - 1.0};
}

/// Axis-aligned box in image pixels, center-based.
struct Box {
  double cx = 0.0;
  double cy = 0.0;
  double w = 0.0;
  double h = 0.0;

  static Box from_top_left(double x, double y, double w, double h) {
    return {x + w / 2.0, y + h / 2.0, w, h};
  }
  double x1() const { return cx - w / 2.0; }
  double y1() const { return cy - h / 2.0; }
  double x2() const { return cx + w / 2.0; }
  double y2() const { return cy + h / 2.0; }
  bool valid() const { return w > 0.0 && h > 0.0; }
};

/// Maps a warp expressed in the crop frame of ref_box back to an image-space
/// box: the box whose crop frame coincides with applying p in normalized
/// coordinates.
inline Box warp_to_box(const WarpParams& p, const Box& ref_box, double context) {
  const double f = p.family == WarpFamily::kTranslationScale ? 1.0 + p.s : 1.0;
  return {ref_box.cx + p.tx * (context * ref_box.w / 2.0),
          ref_box.cy + p.ty * (context * ref_box.h / 2.0),
          f * ref_box.w, f * ref_box.h};
}

/// Inverse of warp_to_box: the warp p with warp_to_box(p, from, context) = to.
/// Anisotropic box changes are projected onto the isotropic scale parameter
/// via the geometric mean of the two axis ratios.
inline WarpParams box_correction(const Box& from, const Box& to, double context,
                                 WarpFamily family) {
  if (!from.valid() || !to.valid())
    throw std::invalid_argument("box_correction: boxes must have positive size");
  WarpParams p = WarpParams::identity(family);
  p.tx = (to.cx - from.cx) / (context * from.w / 2.0);
  p.ty = (to.cy - from.cy) / (context * from.h / 2.0);
  if (family == WarpFamily::kTranslationScale)
    p.s = std::sqrt((to.w / from.w) * (to.h / from.h)) - 1.0;
  return p;
}

inline Eigen::VectorXd params_to_vector(const WarpParams& p) {
  Eigen::VectorXd v(p.dof());
  v(0) = p.tx;
  v(1) = p.ty;
  if (p.dof() == 3) v(2) = p.s;
  return v;
}

inline WarpParams vector_to_params(WarpFamily family, const Eigen::VectorXd& v) {
  if (v.size() != warp_dof(family))
    throw std::invalid_argument("vector_to_params: size does not match family");
  return {family, v(0), v(1), family == WarpFamily::kTranslationScale ? v(2) : 0.0};
}

}  // namespace deeplk
