#pragma once

#include <cmath>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "deeplk/core.hpp"
#include "deeplk/image.hpp"

namespace testutil {

/// f(x, y) = ax * x + ay * y + c, same in every channel.
inline deeplk::Image ramp_image(int rows, int cols, double ax, double ay,
                                double c = 0.0, int channels = 1) {
  deeplk::Image img(rows, cols, channels);
  for (int y = 0; y < rows; ++y)
    for (int x = 0; x < cols; ++x)
      for (int ch = 0; ch < channels; ++ch)
        img.at(y, x, ch) = ax * x + ay * y + c;
  return img;
}

inline deeplk::Image random_image(int rows, int cols, int channels, deeplk::Rng& rng,
                                  double lo = 0.0, double hi = 1.0) {
  deeplk::Image img(rows, cols, channels);
  for (double& v : img.data) v = rng.uniform(lo, hi);
  return img;
}

/// Independent scalar reference for bilinear interpolation (single channel).
inline double bilinear_reference(const deeplk::Image& img, double x, double y,
                                 int c) {
  x = std::clamp(x, 0.0, static_cast<double>(img.cols - 1));
  y = std::clamp(y, 0.0, static_cast<double>(img.rows - 1));
  const int x0 = std::min(static_cast<int>(std::floor(x)), img.cols - 2);
  const int y0 = std::min(static_cast<int>(std::floor(y)), img.rows - 2);
  const double fx = x - x0, fy = y - y0;
  return img.at(y0, x0, c) * (1 - fx) * (1 - fy) +
         img.at(y0, x0 + 1, c) * fx * (1 - fy) +
         img.at(y0 + 1, x0, c) * (1 - fx) * fy +
         img.at(y0 + 1, x0 + 1, c) * fx * fy;
}

/// Brute-force per-pixel stencil loop for finite-difference gradients.
inline std::pair<deeplk::Image, deeplk::Image> gradient_reference(
    const deeplk::Image& g) {
  deeplk::Image gx(g.rows, g.cols, g.channels), gy(g.rows, g.cols, g.channels);
  for (int y = 0; y < g.rows; ++y)
    for (int x = 0; x < g.cols; ++x)
      for (int c = 0; c < g.channels; ++c) {
        double dx, dy;
        if (x == 0)
          dx = g.at(y, 1, c) - g.at(y, 0, c);
        else if (x == g.cols - 1)
          dx = g.at(y, x, c) - g.at(y, x - 1, c);
        else
          dx = (g.at(y, x + 1, c) - g.at(y, x - 1, c)) / 2.0;
        if (y == 0)
          dy = g.at(1, x, c) - g.at(0, x, c);
        else if (y == g.rows - 1)
          dy = g.at(y, x, c) - g.at(y - 1, x, c);
        else
          dy = (g.at(y + 1, x, c) - g.at(y - 1, x, c)) / 2.0;
        gx.at(y, x, c) = dx;
        gy.at(y, x, c) = dy;
      }
  return {gx, gy};
}

/// Sinusoidal grating plus a smooth noise floor; period in pixels along the
/// grating normal at the given angle.
inline deeplk::Image grating_image(int rows, int cols, double period, double angle,
                                   double grating_amp, const deeplk::Image& noise,
                                   double noise_amp) {
  deeplk::Image img(rows, cols, 1);
  const double kx = std::cos(angle) * 2.0 * M_PI / period;
  const double ky = std::sin(angle) * 2.0 * M_PI / period;
  for (int y = 0; y < rows; ++y)
    for (int x = 0; x < cols; ++x)
      img.at(y, x, 0) = 0.5 + grating_amp * std::sin(kx * x + ky * y) +
                        noise_amp * (noise.at(y, x, 0) - 0.5);
  for (double& v : img.data) v = deeplk::clamp01(v);
  return img;
}

/// Unique scratch directory under the system temp root.
class TempDir {
 public:
  explicit TempDir(const std::string& stem) {
    static std::mt19937_64 gen{std::random_device{}()};
    path_ = std::filesystem::temp_directory_path() /
            (stem + "-" + std::to_string(gen()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }
  std::string str(const std::string& rel = "") const {
    return rel.empty() ? path_.string() : (path_ / rel).string();
  }

 private:
  std::filesystem::path path_;
};

}  // namespace testutil
