#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "deeplk/core.hpp"
#include "deeplk/image.hpp"

namespace deeplk {

enum class ExtractorKind { kIdentity, kGradChannels, kConv };

inline std::string extractor_kind_name(ExtractorKind k) {
  switch (k) {
    case ExtractorKind::kIdentity: return "identity";
    case ExtractorKind::kGradChannels: return "gradchan";
    case ExtractorKind::kConv: return "conv";
  }
  return "unknown";
}

/// Stride-1, zero same-padded convolution layer. Weights are stored as
/// (dy, dx, cin, cout) with cout fastest.
struct ConvLayer {
  int kernel_size = 3;
  int in_channels = 1;
  int out_channels = 1;
  bool relu = false;
  std::vector<double> weights;
  std::vector<double> bias;

  std::size_t weight_index(int dy, int dx, int ci, int co) const {
    return ((static_cast<std::size_t>(dy) * kernel_size + dx) * in_channels + ci) *
               out_channels +
           co;
  }
};

struct ConvSpec {
  int kernel_size = 3;
  int out_channels = 1;
  bool relu = false;
};

/// All trainable state of the feature extractor, plus the extractor kind tag.
struct FeatureParams {
  ExtractorKind kind = ExtractorKind::kIdentity;
  bool gradchan_value = true;   // include the raw value channel in kGradChannels
  bool mean_subtract = false;   // subtract 0.5 from inputs before extraction
  std::vector<ConvLayer> layers;

  int out_channels(int in_channels) const {
    switch (kind) {
      case ExtractorKind::kIdentity: return in_channels;
      case ExtractorKind::kGradChannels:
        return in_channels * (gradchan_value ? 3 : 2);
      case ExtractorKind::kConv:
        return layers.empty() ? in_channels : layers.back().out_channels;
    }
    return in_channels;
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += l.weights.size() + l.bias.size();
    return n;
  }
};

inline FeatureParams zeros_like(const FeatureParams& params) {
  FeatureParams z = params;
  for (auto& l : z.layers) {
    std::fill(l.weights.begin(), l.weights.end(), 0.0);
    std::fill(l.bias.begin(), l.bias.end(), 0.0);
  }
  return z;
}

/// acc += scale * g, tensor by tensor.
inline void axpy_params(FeatureParams& acc, const FeatureParams& g, double scale) {
  if (acc.layers.size() != g.layers.size())
    throw std::invalid_argument("axpy_params: layer count mismatch");
  for (std::size_t i = 0; i < acc.layers.size(); ++i) {
    auto& a = acc.layers[i];
    const auto& b = g.layers[i];
    if (a.weights.size() != b.weights.size() || a.bias.size() != b.bias.size())
      throw std::invalid_argument("axpy_params: tensor shape mismatch");
    for (std::size_t j = 0; j < a.weights.size(); ++j) a.weights[j] += scale * b.weights[j];
    for (std::size_t j = 0; j < a.bias.size(); ++j) a.bias[j] += scale * b.bias[j];
  }
}

inline void scale_params(FeatureParams& p, double scale) {
  for (auto& l : p.layers) {
    for (double& w : l.weights) w *= scale;
    for (double& b : l.bias) b *= scale;
  }
}

inline double get_parameter(const FeatureParams& params, std::size_t index) {
  for (const auto& l : params.layers) {
    if (index < l.weights.size()) return l.weights[index];
    index -= l.weights.size();
    if (index < l.bias.size()) return l.bias[index];
    index -= l.bias.size();
  }
  throw std::out_of_range("get_parameter: index past end");
}

inline void add_to_parameter(FeatureParams& params, std::size_t index, double delta) {
  for (auto& l : params.layers) {
    if (index < l.weights.size()) {
      l.weights[index] += delta;
      return;
    }
    index -= l.weights.size();
    if (index < l.bias.size()) {
      l.bias[index] += delta;
      return;
    }
    index -= l.bias.size();
  }
  throw std::out_of_range("add_to_parameter: index past end");
}

/// Intermediates retained by feature_forward for the backward pass.
struct FeatureCache {
  Image input;                     // after optional mean subtraction
  std::vector<Image> layer_inputs; // input to each conv layer
  std::vector<Image> preacts;      // conv outputs before activation
};

namespace detail {

inline Image conv_forward(const ConvLayer& layer, const Image& in) {
  if (in.channels != layer.in_channels)
    throw std::invalid_argument("conv_forward: channel mismatch");
  if (in.rows < layer.kernel_size || in.cols < layer.kernel_size)
    throw std::invalid_argument("conv_forward: patch smaller than kernel");
  const int k = layer.kernel_size;
  const int pad = k / 2;
  const int cin = layer.in_channels;
  const int cout = layer.out_channels;
  Image out(in.rows, in.cols, cout);
  for (int y = 0; y < in.rows; ++y) {
    for (int x = 0; x < in.cols; ++x) {
      double* o = &out.data[out.index(y, x, 0)];
      for (int co = 0; co < cout; ++co) o[co] = layer.bias[co];
      for (int dy = 0; dy < k; ++dy) {
        const int yy = y + dy - pad;
        if (yy < 0 || yy >= in.rows) continue;
        for (int dx = 0; dx < k; ++dx) {
          const int xx = x + dx - pad;
          if (xx < 0 || xx >= in.cols) continue;
          const double* ip = &in.data[in.index(yy, xx, 0)];
          const double* wp = &layer.weights[layer.weight_index(dy, dx, 0, 0)];
          for (int ci = 0; ci < cin; ++ci) {
            const double v = ip[ci];
            const double* w = wp + static_cast<std::size_t>(ci) * cout;
            for (int co = 0; co < cout; ++co) o[co] += v * w[co];
          }
        }
      }
    }
  }
  return out;
}

inline Image relu_forward(const Image& preact) {
  Image out = preact;
  for (double& v : out.data) v = v > 0.0 ? v : 0.0;
  return out;
}

inline Image gradchan_forward(const FeatureParams& params, const Image& in) {
  auto [gx, gy] = image_gradients(in);
  const int block = params.gradchan_value ? 3 : 2;
  Image out(in.rows, in.cols, in.channels * block);
  for (int y = 0; y < in.rows; ++y)
    for (int x = 0; x < in.cols; ++x)
      for (int ci = 0; ci < in.channels; ++ci) {
        int c = ci * block;
        if (params.gradchan_value) out.at(y, x, c++) = in.at(y, x, ci);
        out.at(y, x, c++) = gx.at(y, x, ci);
        out.at(y, x, c) = gy.at(y, x, ci);
      }
  return out;
}

}  // namespace detail

/// phi(patch). IDENTITY returns the patch; GRADCHAN stacks (value, d/dx, d/dy)
/// per input channel; CONV runs the layer stack with stride 1 and zero
/// same-padding. Output spatial size always equals the input size.
inline FeatureMap feature_forward(const FeatureParams& params, const Image& patch,
                                  FeatureCache* cache = nullptr) {
  Image in = patch;
  if (params.mean_subtract)
    for (double& v : in.data) v -= 0.5;
  if (cache) {
    *cache = FeatureCache{};
    cache->input = in;
  }
  switch (params.kind) {
    case ExtractorKind::kIdentity:
      return in;
    case ExtractorKind::kGradChannels:
      return detail::gradchan_forward(params, in);
    case ExtractorKind::kConv: {
      Image cur = std::move(in);
      for (const auto& layer : params.layers) {
        if (cache) cache->layer_inputs.push_back(cur);
        Image pre = detail::conv_forward(layer, cur);
        if (cache) cache->preacts.push_back(pre);
        cur = layer.relu ? detail::relu_forward(pre) : std::move(pre);
      }
      return cur;
    }
  }
  throw std::logic_error("feature_forward: bad extractor kind");
}

/// Reverse-mode gradients of a scalar loss through the extractor. Returns the
/// parameter gradients (same shapes as params) and the gradient with respect
/// to the input patch. ReLU passes gradient only where the pre-activation was
/// strictly positive.
inline std::pair<FeatureParams, Image> feature_backward(const FeatureParams& params,
                                                        const FeatureCache& cache,
                                                        const FeatureMap& grad_out) {
  FeatureParams grads = zeros_like(params);
  switch (params.kind) {
    case ExtractorKind::kIdentity: {
      if (!grad_out.same_shape(cache.input))
        throw std::invalid_argument("feature_backward: gradient shape mismatch");
      return {std::move(grads), grad_out};
    }
    case ExtractorKind::kGradChannels: {
      const Image& in = cache.input;
      const int block = params.gradchan_value ? 3 : 2;
      if (grad_out.channels != in.channels * block ||
          grad_out.rows != in.rows || grad_out.cols != in.cols)
        throw std::invalid_argument("feature_backward: gradient shape mismatch");
      Image px(in.rows, in.cols, in.channels), py(in.rows, in.cols, in.channels);
      Image grad_in(in.rows, in.cols, in.channels, 0.0);
      for (int y = 0; y < in.rows; ++y)
        for (int x = 0; x < in.cols; ++x)
          for (int ci = 0; ci < in.channels; ++ci) {
            int c = ci * block;
            if (params.gradchan_value) grad_in.at(y, x, ci) = grad_out.at(y, x, c++);
            px.at(y, x, ci) = grad_out.at(y, x, c++);
            py.at(y, x, ci) = grad_out.at(y, x, c);
          }
      const Image stencil = image_gradients_adjoint(px, py);
      for (std::size_t i = 0; i < grad_in.data.size(); ++i)
        grad_in.data[i] += stencil.data[i];
      return {std::move(grads), std::move(grad_in)};
    }
    case ExtractorKind::kConv: {
      if (cache.layer_inputs.size() != params.layers.size())
        throw std::invalid_argument("feature_backward: cache does not match params");
      Image grad = grad_out;
      for (int li = static_cast<int>(params.layers.size()) - 1; li >= 0; --li) {
        const ConvLayer& layer = params.layers[li];
        const Image& in = cache.layer_inputs[li];
        const Image& pre = cache.preacts[li];
        if (!grad.same_shape(pre))
          throw std::invalid_argument("feature_backward: gradient shape mismatch");
        Image gpre = grad;
        if (layer.relu)
          for (std::size_t i = 0; i < gpre.data.size(); ++i)
            if (pre.data[i] <= 0.0) gpre.data[i] = 0.0;
        ConvLayer& glayer = grads.layers[li];
        Image gin(in.rows, in.cols, in.channels, 0.0);
        const int k = layer.kernel_size;
        const int pad = k / 2;
        const int cin = layer.in_channels;
        const int cout = layer.out_channels;
        for (int y = 0; y < in.rows; ++y) {
          for (int x = 0; x < in.cols; ++x) {
            const double* gp = &gpre.data[gpre.index(y, x, 0)];
            for (int co = 0; co < cout; ++co) glayer.bias[co] += gp[co];
            for (int dy = 0; dy < k; ++dy) {
              const int yy = y + dy - pad;
              if (yy < 0 || yy >= in.rows) continue;
              for (int dx = 0; dx < k; ++dx) {
                const int xx = x + dx - pad;
                if (xx < 0 || xx >= in.cols) continue;
                const double* ip = &in.data[in.index(yy, xx, 0)];
                double* gi = &gin.data[gin.index(yy, xx, 0)];
                const std::size_t wbase = layer.weight_index(dy, dx, 0, 0);
                for (int ci = 0; ci < cin; ++ci) {
                  const double* w = &layer.weights[wbase + static_cast<std::size_t>(ci) * cout];
                  double* gw = &glayer.weights[wbase + static_cast<std::size_t>(ci) * cout];
                  const double v = ip[ci];
                  double acc = 0.0;
                  for (int co = 0; co < cout; ++co) {
                    gw[co] += v * gp[co];
                    acc += w[co] * gp[co];
                  }
                  gi[ci] += acc;
                }
              }
            }
          }
        }
        grad = std::move(gin);
      }
      return {std::move(grads), std::move(grad)};
    }
  }
  throw std::logic_error("feature_backward: bad extractor kind");
}

/// Builds layer parameters. Conv weights are drawn from a zero-mean uniform
/// distribution with half-width sqrt(2 / (k*k*cin)); biases start at zero.
inline FeatureParams feature_init(ExtractorKind kind, int in_channels,
                                  const std::vector<ConvSpec>& spec, Rng& rng) {
  FeatureParams params;
  params.kind = kind;
  if (kind != ExtractorKind::kConv) {
    if (!spec.empty())
      throw std::invalid_argument("feature_init: layer spec only valid for conv");
    return params;
  }
  if (spec.empty()) throw std::invalid_argument("feature_init: empty conv spec");
  int cin = in_channels;
  for (const auto& s : spec) {
    if (s.kernel_size < 1 || s.kernel_size % 2 == 0)
      throw std::invalid_argument("feature_init: kernel size must be odd");
    if (s.out_channels < 1)
      throw std::invalid_argument("feature_init: out_channels must be >= 1");
    ConvLayer layer;
    layer.kernel_size = s.kernel_size;
    layer.in_channels = cin;
    layer.out_channels = s.out_channels;
    layer.relu = s.relu;
    layer.weights.resize(static_cast<std::size_t>(s.kernel_size) * s.kernel_size *
                         cin * s.out_channels);
    layer.bias.assign(s.out_channels, 0.0);
    const double half_width = std::sqrt(2.0 / (s.kernel_size * s.kernel_size * cin));
    for (double& w : layer.weights) w = rng.uniform(-half_width, half_width);
    params.layers.push_back(std::move(layer));
    cin = s.out_channels;
  }
  return params;
}

}  // namespace deeplk
