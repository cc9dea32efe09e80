#pragma once

// Fundus image preparation: resize, CLAHE on the green channel, z-score.

#include <optional>
#include <string>

#include "avwnet/raster.hpp"
#include "avwnet/tensor.hpp"

namespace avwnet {

struct PreprocessConfig {
  int target_size = 64;          // square side fed to the network
  double clahe_clip_limit = 2.0; // multiple of the mean histogram bin height
  int clahe_tiles = 8;           // tiles per side
  double epsilon = 1e-8;         // z-score denominator guard

  // target_size must be divisible by 2^pooling_stages.
  void validate(int pooling_stages) const;
};

// Contrast-limited adaptive histogram equalisation. Histograms are clipped at
// clip_limit * (tile area / 256); the excess is spread evenly over the bins
// still below the limit until none remains, so no bin ends above the limit.
// Tile mappings are blended bilinearly between tile centres. A non-positive
// clip_limit disables clipping.
GrayImage clahe(const GrayImage& image, double clip_limit, int tiles);

// Applies clahe() to the green channel; red and blue are copied unchanged.
RgbImage clahe_green(const RgbImage& image, const PreprocessConfig& cfg);

// Bilinear, pixel-centre aligned; results rounded to the nearest level.
RgbImage resize_bilinear(const RgbImage& image, int rows, int cols);
GrayImage resize_bilinear(const GrayImage& image, int rows, int cols);
ProbabilityMap resize_bilinear(const ProbabilityMap& map, int rows, int cols);

// Nearest neighbour; used for label maps and masks so classes never blend.
template <typename T>
Grid<T> resize_nearest(const Grid<T>& grid, int rows, int cols) {
  if (rows <= 0 || cols <= 0) throw ShapeError("resize target must be positive");
  if (grid.same_extent(rows, cols)) return grid;
  Grid<T> out(rows, cols);
  for (int r = 0; r < rows; ++r) {
    int sr = static_cast<int>((r + 0.5) * grid.rows() / rows);
    if (sr > grid.rows() - 1) sr = grid.rows() - 1;
    for (int c = 0; c < cols; ++c) {
      int sc = static_cast<int>((c + 0.5) * grid.cols() / cols);
      if (sc > grid.cols() - 1) sc = grid.cols() - 1;
      out(r, c) = grid(sr, sc);
    }
  }
  return out;
}

// Per-channel (v - mean) / (std + epsilon) as a [1, 3, H, W] tensor. Statistics
// come from FOV pixels when a non-empty mask is given, else the whole image.
Tensor zscore(const RgbImage& image, const Mask* fov, double epsilon);

struct PreparedSample {
  std::string source_id;
  Tensor input;                 // [1, 3, S, S]
  std::optional<Mask> fov_mask; // S x S
  std::optional<LabelMap> label;
  int native_rows = 0;
  int native_cols = 0;
};

// resize -> CLAHE(green) -> z-score.
PreparedSample preprocess(const FundusSample& sample, const PreprocessConfig& cfg);

}  // namespace avwnet
