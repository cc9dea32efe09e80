#include "avwnet/preprocess.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace avwnet {

namespace {

using Histogram = std::array<double, 256>;

void clip_histogram(Histogram& hist, double limit) {
  double excess = 0.0;
  for (auto& h : hist) {
    if (h > limit) {
      excess += h - limit;
      h = limit;
    }
  }
  // Every pass either absorbs the excess or saturates at least one more bin.
  while (excess > 1e-12) {
    int below = 0;
    for (double h : hist) below += h < limit;
    if (below == 0) break;
    const double share = excess / below;
    excess = 0.0;
    for (auto& h : hist) {
      if (h >= limit) continue;
      h += share;
      if (h > limit) {
        excess += h - limit;
        h = limit;
      }
    }
  }
}

std::uint8_t to_level(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
}

// Precomputed bilinear source coordinates along one axis.
struct AxisSample {
  int lo, hi;
  double frac;
};

std::vector<AxisSample> bilinear_axis(int in, int out) {
  std::vector<AxisSample> samples(static_cast<std::size_t>(out));
  const double ratio = static_cast<double>(in) / out;
  for (int i = 0; i < out; ++i) {
    double s = (i + 0.5) * ratio - 0.5;
    s = std::clamp(s, 0.0, static_cast<double>(in - 1));
    const int lo = static_cast<int>(std::floor(s));
    samples[i] = {lo, std::min(lo + 1, in - 1), s - lo};
  }
  return samples;
}

template <typename T, typename Get, typename Put>
void bilinear(const Grid<T>& src, Grid<T>& dst, Get get, Put put) {
  const auto ys = bilinear_axis(src.rows(), dst.rows());
  const auto xs = bilinear_axis(src.cols(), dst.cols());
  for (int r = 0; r < dst.rows(); ++r) {
    const auto& y = ys[r];
    for (int c = 0; c < dst.cols(); ++c) {
      const auto& x = xs[c];
      put(dst(r, c), [&](int channel) {
        const double top = (1 - x.frac) * get(src(y.lo, x.lo), channel) +
                           x.frac * get(src(y.lo, x.hi), channel);
        const double bottom = (1 - x.frac) * get(src(y.hi, x.lo), channel) +
                              x.frac * get(src(y.hi, x.hi), channel);
        return (1 - y.frac) * top + y.frac * bottom;
      });
    }
  }
}

void check_target(int rows, int cols) {
  if (rows <= 0 || cols <= 0) throw ShapeError("resize target must be positive");
}

}  // namespace

void PreprocessConfig::validate(int pooling_stages) const {
  if (target_size <= 0 || target_size % (1 << pooling_stages) != 0) {
    throw UsageError("target_size " + std::to_string(target_size) +
                     " must be a positive multiple of " + std::to_string(1 << pooling_stages));
  }
  if (clahe_tiles <= 0) throw UsageError("clahe_tiles must be positive");
  if (epsilon <= 0) throw UsageError("z-score epsilon must be positive");
}

GrayImage clahe(const GrayImage& image, double clip_limit, int tiles) {
  if (tiles <= 0) throw UsageError("CLAHE tile count must be positive");
  if (image.rows() < tiles || image.cols() < tiles) {
    throw ShapeError("image " + std::to_string(image.rows()) + "x" +
                     std::to_string(image.cols()) + " is smaller than the " +
                     std::to_string(tiles) + "x" + std::to_string(tiles) + " tile grid");
  }
  const int rows = image.rows(), cols = image.cols();
  auto bound = [tiles](int extent, int i) {
    return static_cast<int>(static_cast<long>(extent) * i / tiles);
  };

  // lut[(ty * tiles + tx) * 256 + level], kept in floating point until the blend.
  std::vector<double> lut(static_cast<std::size_t>(tiles * tiles * 256));
  for (int ty = 0; ty < tiles; ++ty) {
    for (int tx = 0; tx < tiles; ++tx) {
      Histogram hist{};
      const int r0 = bound(rows, ty), r1 = bound(rows, ty + 1);
      const int c0 = bound(cols, tx), c1 = bound(cols, tx + 1);
      for (int r = r0; r < r1; ++r) {
        for (int c = c0; c < c1; ++c) hist[image(r, c)] += 1.0;
      }
      const double area = static_cast<double>((r1 - r0) * (c1 - c0));
      if (clip_limit > 0) clip_histogram(hist, clip_limit * area / 256.0);
      double cumulative = 0.0;
      double* tile_lut = lut.data() + static_cast<std::size_t>((ty * tiles + tx) * 256);
      for (int v = 0; v < 256; ++v) {
        cumulative += hist[v];
        tile_lut[v] = 255.0 * cumulative / area;
      }
    }
  }

  const double tile_h = static_cast<double>(rows) / tiles;
  const double tile_w = static_cast<double>(cols) / tiles;
  auto neighbours = [tiles](double g) {
    const int lo = static_cast<int>(std::floor(g));
    const double f = g - lo;
    return AxisSample{std::clamp(lo, 0, tiles - 1), std::clamp(lo + 1, 0, tiles - 1), f};
  };

  GrayImage out(rows, cols);
  for (int r = 0; r < rows; ++r) {
    const auto y = neighbours((r + 0.5) / tile_h - 0.5);
    for (int c = 0; c < cols; ++c) {
      const auto x = neighbours((c + 0.5) / tile_w - 0.5);
      const int v = image(r, c);
      auto at = [&](int ty, int tx) {
        return lut[static_cast<std::size_t>((ty * tiles + tx) * 256 + v)];
      };
      const double top = (1 - x.frac) * at(y.lo, x.lo) + x.frac * at(y.lo, x.hi);
      const double bottom = (1 - x.frac) * at(y.hi, x.lo) + x.frac * at(y.hi, x.hi);
      out(r, c) = to_level((1 - y.frac) * top + y.frac * bottom);
    }
  }
  return out;
}

RgbImage clahe_green(const RgbImage& image, const PreprocessConfig& cfg) {
  GrayImage green(image.rows(), image.cols());
  for (std::size_t i = 0; i < image.size(); ++i) green[i] = image[i][1];
  const GrayImage enhanced = clahe(green, cfg.clahe_clip_limit, cfg.clahe_tiles);
  RgbImage out = image;
  for (std::size_t i = 0; i < out.size(); ++i) out[i][1] = enhanced[i];
  return out;
}

RgbImage resize_bilinear(const RgbImage& image, int rows, int cols) {
  check_target(rows, cols);
  if (image.same_extent(rows, cols)) return image;
  RgbImage out(rows, cols);
  bilinear(image, out, [](const Rgb& p, int ch) { return static_cast<double>(p[ch]); },
           [](Rgb& p, auto&& value) {
             for (int ch = 0; ch < 3; ++ch) p[ch] = to_level(value(ch));
           });
  return out;
}

GrayImage resize_bilinear(const GrayImage& image, int rows, int cols) {
  check_target(rows, cols);
  if (image.same_extent(rows, cols)) return image;
  GrayImage out(rows, cols);
  bilinear(image, out, [](std::uint8_t p, int) { return static_cast<double>(p); },
           [](std::uint8_t& p, auto&& value) { p = to_level(value(0)); });
  return out;
}

ProbabilityMap resize_bilinear(const ProbabilityMap& map, int rows, int cols) {
  check_target(rows, cols);
  if (map.same_extent(rows, cols)) return map;
  ProbabilityMap out(rows, cols);
  bilinear(map, out, [](double p, int) { return p; },
           [](double& p, auto&& value) { p = value(0); });
  return out;
}

Tensor zscore(const RgbImage& image, const Mask* fov, double epsilon) {
  if (fov && !fov->same_extent(image)) throw ShapeError("FOV mask extent differs from image");
  const int rows = image.rows(), cols = image.cols();
  const std::size_t plane = image.size();
  bool use_mask = false;
  if (fov) {
    use_mask = std::any_of(fov->data().begin(), fov->data().end(),
                           [](std::uint8_t v) { return v != 0; });
  }
  std::vector<double> out(3 * plane);
  for (int ch = 0; ch < 3; ++ch) {
    double s = 0.0, n = 0.0;
    for (std::size_t i = 0; i < plane; ++i) {
      if (use_mask && !(*fov)[i]) continue;
      s += image[i][ch];
      n += 1.0;
    }
    const double mu = s / n;
    double ss = 0.0;
    for (std::size_t i = 0; i < plane; ++i) {
      if (use_mask && !(*fov)[i]) continue;
      const double d = image[i][ch] - mu;
      ss += d * d;
    }
    const double denom = std::sqrt(ss / n) + epsilon;
    for (std::size_t i = 0; i < plane; ++i) out[ch * plane + i] = (image[i][ch] - mu) / denom;
  }
  return Tensor::from_values({1, 3, rows, cols}, std::move(out));
}

PreparedSample preprocess(const FundusSample& sample, const PreprocessConfig& cfg) {
  sample.validate();
  const int s = cfg.target_size;
  PreparedSample out;
  out.source_id = sample.source_id;
  out.native_rows = sample.rgb.rows();
  out.native_cols = sample.rgb.cols();
  const RgbImage resized = resize_bilinear(sample.rgb, s, s);
  if (sample.fov_mask) out.fov_mask = resize_nearest(*sample.fov_mask, s, s);
  if (sample.label) out.label = resize_nearest(*sample.label, s, s);
  const RgbImage enhanced = clahe_green(resized, cfg);
  out.input = zscore(enhanced, out.fov_mask ? &*out.fov_mask : nullptr, cfg.epsilon);
  return out;
}

}  // namespace avwnet
