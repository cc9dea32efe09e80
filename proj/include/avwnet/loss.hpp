#pragma once

#include "avwnet/raster.hpp"
#include "avwnet/tensor.hpp"

namespace avwnet {

struct FocalConfig {
  double gamma = 2.0;            // focusing exponent
  double alpha_fg = 0.8;         // positive-class weight for the modelled vessel kind
  double alpha_uncertain = 0.9;  // positive-class weight at crossover/uncertain pixels

  void validate() const;
};

// Lower clamp on p_t before the log; the upper clamp is 1 - kProbabilityClamp.
inline constexpr double kProbabilityClamp = 1e-7;

// Binary focal loss averaged over the pixels where mask != 0 (all pixels when
// mask is undefined):
//   p_t = p if target = 1 else 1 - p
//   a_t = w if target = 1 else 1 - w     (w = per-pixel weight raster)
//   loss = -a_t (1 - p_t)^gamma log(p_t)
// All tensors are [N, 1, H, W].
Tensor focal_loss(const Tensor& pred, const Tensor& target, const Tensor& weights,
                  const Tensor& mask, double gamma);

struct BinaryTarget {
  Mask target;             // 1 on the modelled vessel kind and on uncertain pixels
  Grid<double> weights;    // positive-class weight per pixel
};

// Targets and weights for one binary model (artery or vein). Uncertain pixels
// are positives for both models.
BinaryTarget build_weight_raster(const LabelMap& label, VesselKind kind, const FocalConfig& cfg);

}  // namespace avwnet
