#pragma once

// Tiered artery/vein evaluation: whole field of view, vessel centerlines, and
// centerlines of vessels wider than two pixels.

#include <array>
#include <cstdint>
#include <span>
#include <string>

#include "avwnet/raster.hpp"

namespace avwnet {

// Zhang-Suen thinning until stable. Candidates of each sub-iteration are
// re-checked against the partially thinned raster before removal, so a pixel
// is only deleted while it is a simple, non-end point; this keeps every
// 8-connected component (2x2 blocks included) alive.
Mask skeletonize(const Mask& vessel_mask);

// Euclidean distance from each foreground pixel centre to the nearest
// background pixel centre; pixels outside the raster count as background.
// Background pixels get 0.
Grid<double> distance_transform(const Mask& mask);

// Width at each centerline pixel, 2 * (distance - 0.5): the distance measured
// to the vessel boundary rather than to the first background centre. Zero off
// the centerline. Throws DataError if the centerline leaves the mask.
Grid<double> vessel_width(const Mask& vessel_mask, const Mask& centerline);

struct ClassCounts {
  std::int64_t tp = 0, tn = 0, fp = 0, fn = 0;
  std::int64_t total() const { return tp + tn + fp + fn; }
  bool operator==(const ClassCounts&) const = default;
};

struct ConfusionCounts {
  std::array<ClassCounts, 4> per_class{};  // indexed by class_index()
  std::int64_t pixels = 0;
  bool operator==(const ConfusionCounts&) const = default;
};

struct Scores {
  double accuracy = 0;
  double f1 = 0;
};

// F1 = 2TP/(2TP+FP+FN), accuracy = (TP+TN)/total. An empty class
// (TP=FP=FN=0) has F1 1; an empty region has accuracy 1.
Scores accuracy_f1(const ClassCounts& counts);

ConfusionCounts count_confusion(const LabelMap& pred, const LabelMap& truth, const Mask& region);

enum class Tier { all_vessel = 0, centerline = 1, centerline_wide = 2 };
inline constexpr std::array<Tier, 3> kAllTiers = {Tier::all_vessel, Tier::centerline,
                                                  Tier::centerline_wide};
const char* tier_name(Tier t);

struct EvaluationOptions {
  // Keep only centerline pixels the prediction marks as vessel.
  bool restrict_to_discovered = true;
  // Tier 3 keeps centerline pixels with width strictly above this.
  double wide_threshold = 2.0;
};

struct TierRegions {
  Mask all_vessel;       // FOV (whole image without one) plus every ground-truth vessel pixel
  Mask centerline;       // ground-truth skeleton, optionally restricted to discovered pixels
  Mask centerline_wide;  // centerline pixels of vessels wider than the threshold
};

TierRegions build_regions(const LabelMap& pred, const LabelMap& truth, const Mask* fov,
                          const EvaluationOptions& options = {});

struct TierScores {
  ConfusionCounts counts;
  std::array<Scores, 4> per_class{};
  Scores macro;  // mean over artery and vein
};

struct ImageEvaluation {
  std::array<TierScores, 3> tiers;
};

ImageEvaluation evaluate_image(const LabelMap& pred, const LabelMap& truth, const Mask* fov,
                               const EvaluationOptions& options = {});

struct MeanStd {
  double mean = 0;
  double std = 0;  // sample standard deviation, 0 for a single image
};

struct TierSummary {
  std::array<MeanStd, 4> accuracy{};
  std::array<MeanStd, 4> f1{};
  MeanStd macro_accuracy;
  MeanStd macro_f1;
  std::int64_t pixels = 0;  // region size summed over images
  std::size_t images = 0;   // images with a non-empty region
};

struct TieredMetrics {
  std::array<TierSummary, 3> tiers;
  std::size_t images = 0;

  const TierSummary& operator[](Tier t) const { return tiers[static_cast<std::size_t>(t)]; }
};

// Mean +- std over images. Values are summed in sorted order, so the result
// does not depend on image order. Images whose region is empty for a tier are
// left out of that tier unless every image is empty.
TieredMetrics summarize(std::span<const ImageEvaluation> images);

TieredMetrics evaluate(const LabelMap& pred, const LabelMap& truth, const Mask* fov,
                       const EvaluationOptions& options = {});

// One row per tier x class plus one macro row per tier.
std::string metrics_csv(const TieredMetrics& metrics);
std::string metrics_table(const TieredMetrics& metrics);

}  // namespace avwnet
