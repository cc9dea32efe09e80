#include "avwnet/raster.hpp"

namespace avwnet {

VesselKind parse_vessel_kind(const std::string& text) {
  if (text == "artery") return VesselKind::artery;
  if (text == "vein") return VesselKind::vein;
  throw UsageError("vessel kind must be 'artery' or 'vein', got '" + text + "'");
}

void FundusSample::validate() const {
  if (rgb.empty()) throw ShapeError(source_id + ": empty image");
  if (fov_mask && !fov_mask->same_extent(rgb)) {
    throw ShapeError(source_id + ": FOV mask extent differs from image");
  }
  if (label && !label->same_extent(rgb)) {
    throw ShapeError(source_id + ": label extent differs from image");
  }
}

}  // namespace avwnet
