#include <algorithm>
#include <cstdlib>

#include "avwnet/data_io.hpp"
#include "avwnet/fuse.hpp"

namespace avwnet {

LabelMap decode_av_label(const RgbImage& rgb) {
  LabelMap out(rgb.rows(), rgb.cols());
  for (int r = 0; r < rgb.rows(); ++r) {
    for (int c = 0; c < rgb.cols(); ++c) {
      const Rgb& p = rgb(r, c);
      int best_dist = 256;
      VesselClass best = VesselClass::background;
      for (VesselClass k : kAllClasses) {
        const Rgb ref = class_color(k);
        int d = 0;
        for (int ch = 0; ch < 3; ++ch) d = std::max(d, std::abs(int(p[ch]) - int(ref[ch])));
        if (d < best_dist) {
          best_dist = d;
          best = k;
        }
      }
      if (best_dist > kPaletteTolerance) {
        throw DataError("label colour (" + std::to_string(p[0]) + "," + std::to_string(p[1]) +
                        "," + std::to_string(p[2]) + ") at row " + std::to_string(r) +
                        ", col " + std::to_string(c) + " matches no palette entry");
      }
      out(r, c) = best;
    }
  }
  return out;
}

LabelMap read_label(const fs::path& path) {
  try {
    return decode_av_label(read_rgb(path));
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

void write_label(const fs::path& path, const LabelMap& label) {
  write_rgb(path, encode_colors(label));
}

}  // namespace avwnet
