#pragma once

#include "avwnet/raster.hpp"

namespace avwnet {

struct FusionConfig {
  double vessel_threshold = 0.5;  // both maps below this -> background
  double uncertainty_band = 0.20; // relative difference at or below this -> uncertain

  void validate() const;
};

// Background if max(pa, pv) < threshold; uncertain if |pa - pv| / max(pa, pv)
// <= band; otherwise the class with the larger activation.
VesselClass fuse_pixel(double p_artery, double p_vein, const FusionConfig& cfg);

LabelMap fuse(const ProbabilityMap& p_artery, const ProbabilityMap& p_vein,
              const FusionConfig& cfg);

// Ground-truth palette: artery red, vein blue, uncertain green, background black.
Rgb class_color(VesselClass c);
RgbImage encode_colors(const LabelMap& label);

}  // namespace avwnet
