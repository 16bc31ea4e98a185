#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <utility>
#include <vector>

#include "deeplk/core.hpp"
#include "deeplk/warp.hpp"

namespace deeplk {

/// Dense H x W x C grid of doubles, row-major (row, col, channel). Pixel
/// values are nominally in [0, 1] after loading; feature maps reuse the same
/// container with unconstrained values.
struct Image {
  int rows = 0;
  int cols = 0;
  int channels = 0;
  std::vector<double> data;

  Image() = default;
  Image(int rows_, int cols_, int channels_, double fill = 0.0)
      : rows(rows_), cols(cols_), channels(channels_) {
    if (rows < 3 || cols < 3)
      throw std::invalid_argument("Image: both sides must be >= 3");
    if (channels < 1) throw std::invalid_argument("Image: channels must be >= 1");
    data.assign(static_cast<std::size_t>(rows) * cols * channels, fill);
  }

  std::size_t index(int y, int x, int c) const {
    return (static_cast<std::size_t>(y) * cols + x) * channels + c;
  }
  double& at(int y, int x, int c) { return data[index(y, x, c)]; }
  double at(int y, int x, int c) const { return data[index(y, x, c)]; }

  std::size_t size() const { return data.size(); }
  bool same_shape(const Image& o) const {
    return rows == o.rows && cols == o.cols && channels == o.channels;
  }
};

/// Feature maps share the grid representation; spatial size always equals the
/// input patch size (stride-1, same-padding contract).
using FeatureMap = Image;

/// Square resampled crop together with the image-space box it came from.
struct Patch {
  Image img;
  Box box;

  int side() const { return img.rows; }
};

/// Bilinear sample at continuous pixel coordinates, one value per channel.
/// Coordinates outside the grid are clamped to the border (edge replicate),
/// so the function is total.
inline void sample_bilinear_into(const Image& img, double x, double y, double* out) {
  x = std::clamp(x, 0.0, static_cast<double>(img.cols - 1));
  y = std::clamp(y, 0.0, static_cast<double>(img.rows - 1));
  int x0 = std::min(static_cast<int>(x), img.cols - 2);
  int y0 = std::min(static_cast<int>(y), img.rows - 2);
  const double fx = x - x0;
  const double fy = y - y0;
  const double w00 = (1.0 - fx) * (1.0 - fy);
  const double w10 = fx * (1.0 - fy);
  const double w01 = (1.0 - fx) * fy;
  const double w11 = fx * fy;
  const double* p00 = &img.data[img.index(y0, x0, 0)];
  const double* p10 = p00 + img.channels;
  const double* p01 = p00 + static_cast<std::size_t>(img.cols) * img.channels;
  const double* p11 = p01 + img.channels;
  for (int c = 0; c < img.channels; ++c)
    out[c] = w00 * p00[c] + w10 * p10[c] + w01 * p01[c] + w11 * p11[c];
}

inline std::vector<double> sample_bilinear(const Image& img, double x, double y) {
  std::vector<double> out(img.channels);
  sample_bilinear_into(img, x, y, out.data());
  return out;
}

/// Resamples an out_size x out_size grid over the region centered on the box,
/// with half-extents (context * w / 2, context * h / 2). Samples sit at cell
/// centers, so a box spanning the full pixel area of the image with context 1
/// and out_size = image size reproduces the image exactly.
inline Patch crop_resize(const Image& img, const Box& box, double context,
                         int out_size) {
  if (!box.valid())
    throw std::invalid_argument("crop_resize: box must have positive size");
  if (out_size < 3) throw std::invalid_argument("crop_resize: out_size too small");
  const double ewx = context * box.w / 2.0;
  const double ewy = context * box.h / 2.0;
  const double step_x = 2.0 * ewx / out_size;
  const double step_y = 2.0 * ewy / out_size;
  Patch patch{Image(out_size, out_size, img.channels), box};
  double* dst = patch.img.data.data();
  for (int i = 0; i < out_size; ++i) {
    const double y = box.cy - ewy + (i + 0.5) * step_y;
    for (int j = 0; j < out_size; ++j) {
      const double x = box.cx - ewx + (j + 0.5) * step_x;
      sample_bilinear_into(img, x, y, dst);
      dst += img.channels;
    }
  }
  return patch;
}

/// Normalized coordinate of cell i on an S-cell axis: the patch spans [-1, 1]
/// with samples at cell centers.
inline double normalized_coord(int i, int side) {
  return (2.0 * i + 1.0) / side - 1.0;
}

/// Finite-difference gradients per channel, in pixel units: central
/// differences in the interior, one-sided at the two border rows/columns.
inline std::pair<Image, Image> image_gradients(const Image& grid) {
  if (grid.rows < 3 || grid.cols < 3)
    throw std::invalid_argument("image_gradients: side must be >= 3");
  Image gx(grid.rows, grid.cols, grid.channels);
  Image gy(grid.rows, grid.cols, grid.channels);
  const int C = grid.channels;
  for (int y = 0; y < grid.rows; ++y) {
    for (int x = 0; x < grid.cols; ++x) {
      for (int c = 0; c < C; ++c) {
        if (x == 0)
          gx.at(y, x, c) = grid.at(y, 1, c) - grid.at(y, 0, c);
        else if (x == grid.cols - 1)
          gx.at(y, x, c) = grid.at(y, x, c) - grid.at(y, x - 1, c);
        else
          gx.at(y, x, c) = 0.5 * (grid.at(y, x + 1, c) - grid.at(y, x - 1, c));
        if (y == 0)
          gy.at(y, x, c) = grid.at(1, x, c) - grid.at(0, x, c);
        else if (y == grid.rows - 1)
          gy.at(y, x, c) = grid.at(y, x, c) - grid.at(y - 1, x, c);
        else
          gy.at(y, x, c) = 0.5 * (grid.at(y + 1, x, c) - grid.at(y - 1, x, c));
      }
    }
  }
  return {std::move(gx), std::move(gy)};
}

/// Adjoint of image_gradients: given cotangents for (d/dx, d/dy), accumulates
/// the gradient with respect to the input grid. Mirrors the forward stencil
/// exactly, including the one-sided border rows.
inline Image image_gradients_adjoint(const Image& px, const Image& py) {
  if (!px.same_shape(py))
    throw std::invalid_argument("image_gradients_adjoint: shape mismatch");
  Image out(px.rows, px.cols, px.channels, 0.0);
  const int C = px.channels;
  for (int y = 0; y < px.rows; ++y) {
    for (int x = 0; x < px.cols; ++x) {
      for (int c = 0; c < C; ++c) {
        const double vx = px.at(y, x, c);
        if (x == 0) {
          out.at(y, 1, c) += vx;
          out.at(y, 0, c) -= vx;
        } else if (x == px.cols - 1) {
          out.at(y, x, c) += vx;
          out.at(y, x - 1, c) -= vx;
        } else {
          out.at(y, x + 1, c) += 0.5 * vx;
          out.at(y, x - 1, c) -= 0.5 * vx;
        }
        const double vy = py.at(y, x, c);
        if (y == 0) {
          out.at(1, x, c) += vy;
          out.at(0, x, c) -= vy;
        } else if (y == px.rows - 1) {
          out.at(y, x, c) += vy;
          out.at(y - 1, x, c) -= vy;
        } else {
          out.at(y + 1, x, c) += 0.5 * vy;
          out.at(y - 1, x, c) -= 0.5 * vy;
        }
      }
    }
  }
  return out;
}

/// Deterministic core of the photometric jitter: clamp(gain * v + bias, 0, 1)
/// with an optional extra per-channel gain (3-channel saturation jitter).
inline Patch apply_photometric(const Patch& patch, double gain, double bias,
                               const std::vector<double>& channel_gains = {}) {
  Patch out = patch;
  const int C = patch.img.channels;
  if (!channel_gains.empty() && static_cast<int>(channel_gains.size()) != C)
    throw std::invalid_argument("apply_photometric: channel gain count mismatch");
  for (std::size_t i = 0; i < out.img.data.size(); ++i) {
    const double g = channel_gains.empty() ? gain : gain * channel_gains[i % C];
    out.img.data[i] = clamp01(g * patch.img.data[i] + bias);
  }
  return out;
}

/// Random brightness/contrast jitter: gain ~ U(1-contrast, 1+contrast),
/// bias ~ U(-brightness, +brightness). For 3-channel patches a per-channel
/// gain jitter of the given saturation range is applied on top; grayscale
/// inputs skip it. Deterministic given the Rng state.
inline Patch photometric_augment(const Patch& patch, Rng& rng,
                                 double brightness_range, double contrast_range,
                                 double saturation_range = 0.0) {
  if (brightness_range < 0.0 || contrast_range < 0.0 || saturation_range < 0.0)
    throw std::invalid_argument("photometric_augment: ranges must be >= 0");
  const double gain = rng.uniform(1.0 - contrast_range, 1.0 + contrast_range);
  const double bias = rng.uniform(-brightness_range, brightness_range);
  std::vector<double> channel_gains;
  if (patch.img.channels == 3 && saturation_range > 0.0) {
    channel_gains.resize(3);
    for (double& g : channel_gains)
      g = rng.uniform(1.0 - saturation_range, 1.0 + saturation_range);
  }
  return apply_photometric(patch, gain, bias, channel_gains);
}

}  // namespace deeplk
