#pragma once

// Differentiable primitives over NCHW float64 tensors.

#include <cstdint>
#include <vector>

#include "avwnet/tensor.hpp"

namespace avwnet {

// Cross-correlation (no kernel flip). weight is [C_out, C_in, k, k] with k
// odd, bias is [C_out]. padding = k/2 with stride 1 keeps H and W.
Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias, int padding,
              int stride = 1);

// 2x2 window, stride 2. Gradient goes to the first maximum in row-major order.
Tensor max_pool2d(const Tensor& input);
Tensor avg_pool2d(const Tensor& input);

// Factor-2 nearest-neighbour upsampling.
Tensor upsample_nearest(const Tensor& input);

enum class BatchNormMode { train, eval };

struct BatchNormStats {
  std::vector<double> running_mean;
  std::vector<double> running_var;

  static BatchNormStats initial(std::int64_t channels) {
    return {std::vector<double>(static_cast<std::size_t>(channels), 0.0),
            std::vector<double>(static_cast<std::size_t>(channels), 1.0)};
  }
};

struct BatchNormOptions {
  double momentum = 0.1;
  double epsilon = 1e-5;
};

// Per-channel normalisation over (N, H, W). Train mode uses batch statistics
// and updates `stats` (unbiased running variance); eval mode reads `stats`.
Tensor batch_norm(const Tensor& input, const Tensor& gamma, const Tensor& beta,
                  BatchNormStats& stats, BatchNormMode mode, BatchNormOptions options = {});

Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);

// Same-rank broadcasting: on each axis the extents match or one of them is 1.
Tensor add(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double factor);

Tensor concat_channels(const Tensor& a, const Tensor& b);
Tensor slice_channels(const Tensor& x, std::int64_t begin, std::int64_t count);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator*(double s, const Tensor& x) { return scale(x, s); }

}  // namespace avwnet
