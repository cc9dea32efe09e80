#include "avwnet/fuse.hpp"

#include <algorithm>
#include <cmath>

namespace avwnet {

void FusionConfig::validate() const {
  if (!(vessel_threshold > 0 && vessel_threshold < 1)) {
    throw UsageError("fusion vessel_threshold must lie in (0, 1)");
  }
  if (!(uncertainty_band > 0 && uncertainty_band < 1)) {
    throw UsageError("fusion uncertainty_band must lie in (0, 1)");
  }
}

VesselClass fuse_pixel(double p_artery, double p_vein, const FusionConfig& cfg) {
  const double top = std::max(p_artery, p_vein);
  if (top < cfg.vessel_threshold) return VesselClass::background;
  if (std::abs(p_artery - p_vein) / top <= cfg.uncertainty_band) return VesselClass::uncertain;
  return p_artery > p_vein ? VesselClass::artery : VesselClass::vein;
}

LabelMap fuse(const ProbabilityMap& p_artery, const ProbabilityMap& p_vein,
              const FusionConfig& cfg) {
  if (!p_artery.same_extent(p_vein)) {
    throw ShapeError("artery map " + std::to_string(p_artery.rows()) + "x" +
                     std::to_string(p_artery.cols()) + " and vein map " +
                     std::to_string(p_vein.rows()) + "x" + std::to_string(p_vein.cols()) +
                     " differ in extent");
  }
  LabelMap out(p_artery.rows(), p_artery.cols());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fuse_pixel(p_artery[i], p_vein[i], cfg);
  return out;
}

Rgb class_color(VesselClass c) {
  switch (c) {
    case VesselClass::artery: return {255, 0, 0};
    case VesselClass::vein: return {0, 0, 255};
    case VesselClass::uncertain: return {0, 255, 0};
    case VesselClass::background: break;
  }
  return {0, 0, 0};
}

RgbImage encode_colors(const LabelMap& label) {
  RgbImage out(label.rows(), label.cols());
  for (std::size_t i = 0; i < label.size(); ++i) out[i] = class_color(label[i]);
  return out;
}

}  // namespace avwnet
