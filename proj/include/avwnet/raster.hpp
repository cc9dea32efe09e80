#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "avwnet/errors.hpp"

namespace avwnet {

// Row-major single-layer raster.
template <typename T>
class Grid {
 public:
  Grid() = default;
  Grid(int rows, int cols, T fill = T{}) : rows_(rows), cols_(cols) {
    if (rows < 0 || cols < 0) throw ShapeError("negative raster extent");
    data_.assign(static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols), fill);
  }

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }
  bool same_extent(int rows, int cols) const { return rows_ == rows && cols_ == cols; }
  template <typename U>
  bool same_extent(const Grid<U>& other) const {
    return rows_ == other.rows() && cols_ == other.cols();
  }

  T& operator()(int r, int c) { return data_[index(r, c)]; }
  const T& operator()(int r, int c) const { return data_[index(r, c)]; }
  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  std::vector<T>& data() { return data_; }
  const std::vector<T>& data() const { return data_; }

  bool operator==(const Grid&) const = default;

 private:
  std::size_t index(int r, int c) const {
    return static_cast<std::size_t>(r) * static_cast<std::size_t>(cols_) +
           static_cast<std::size_t>(c);
  }

  int rows_ = 0;
  int cols_ = 0;
  std::vector<T> data_;
};

using Rgb = std::array<std::uint8_t, 3>;
using RgbImage = Grid<Rgb>;
using GrayImage = Grid<std::uint8_t>;
// Binary raster, 0 or 1.
using Mask = Grid<std::uint8_t>;
using ProbabilityMap = Grid<double>;

enum class VesselClass : std::uint8_t { background = 0, artery = 1, vein = 2, uncertain = 3 };

inline constexpr std::array<VesselClass, 4> kAllClasses = {
    VesselClass::background, VesselClass::artery, VesselClass::vein, VesselClass::uncertain};

inline const char* class_name(VesselClass c) {
  switch (c) {
    case VesselClass::background: return "background";
    case VesselClass::artery: return "artery";
    case VesselClass::vein: return "vein";
    case VesselClass::uncertain: return "uncertain";
  }
  return "?";
}

inline std::size_t class_index(VesselClass c) { return static_cast<std::size_t>(c); }

using LabelMap = Grid<VesselClass>;

inline bool is_vessel(VesselClass c) { return c != VesselClass::background; }

enum class VesselKind { artery, vein };

inline const char* kind_name(VesselKind k) { return k == VesselKind::artery ? "artery" : "vein"; }
VesselKind parse_vessel_kind(const std::string& text);

struct FundusSample {
  std::string source_id;
  RgbImage rgb;
  std::optional<Mask> fov_mask;
  std::optional<LabelMap> label;

  // Throws ShapeError unless mask and label share the image extent.
  void validate() const;
};

}  // namespace avwnet
