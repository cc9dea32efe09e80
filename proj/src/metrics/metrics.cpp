#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <vector>

#include "avwnet/metrics.hpp"

namespace avwnet {

namespace {

void require_extent(const LabelMap& pred, const LabelMap& truth, const Mask* fov) {
  if (!pred.same_extent(truth)) {
    throw ShapeError("prediction " + std::to_string(pred.rows()) + "x" +
                     std::to_string(pred.cols()) + " vs truth " + std::to_string(truth.rows()) +
                     "x" + std::to_string(truth.cols()));
  }
  if (fov && !fov->same_extent(truth)) throw ShapeError("FOV mask extent differs from truth");
}

Mask vessel_mask(const LabelMap& label) {
  Mask m(label.rows(), label.cols(), 0);
  for (std::size_t i = 0; i < label.size(); ++i) m[i] = is_vessel(label[i]) ? 1 : 0;
  return m;
}

MeanStd mean_std(std::vector<double> xs) {
  MeanStd out;
  if (xs.empty()) return out;
  std::sort(xs.begin(), xs.end());
  double sum = 0;
  for (double x : xs) sum += x;
  out.mean = sum / static_cast<double>(xs.size());
  if (xs.size() > 1) {
    std::vector<double> sq;
    sq.reserve(xs.size());
    for (double x : xs) sq.push_back((x - out.mean) * (x - out.mean));
    std::sort(sq.begin(), sq.end());
    double ss = 0;
    for (double s : sq) ss += s;
    out.std = std::sqrt(ss / static_cast<double>(xs.size() - 1));
  }
  return out;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

}  // namespace

Scores accuracy_f1(const ClassCounts& k) {
  Scores s;
  const std::int64_t total = k.total();
  s.accuracy = total == 0 ? 1.0 : static_cast<double>(k.tp + k.tn) / static_cast<double>(total);
  const std::int64_t denom = 2 * k.tp + k.fp + k.fn;
  s.f1 = denom == 0 ? 1.0 : static_cast<double>(2 * k.tp) / static_cast<double>(denom);
  return s;
}

ConfusionCounts count_confusion(const LabelMap& pred, const LabelMap& truth, const Mask& region) {
  require_extent(pred, truth, nullptr);
  if (!region.same_extent(truth)) throw ShapeError("region extent differs from truth");
  ConfusionCounts out;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (!region[i]) continue;
    ++out.pixels;
    const auto p = class_index(pred[i]);
    const auto t = class_index(truth[i]);
    if (p > 3 || t > 3) throw DataError("class code out of range at flat index " + std::to_string(i));
    for (std::size_t c = 0; c < 4; ++c) {
      auto& k = out.per_class[c];
      const bool pc = p == c, tc = t == c;
      if (pc && tc) ++k.tp;
      else if (pc) ++k.fp;
      else if (tc) ++k.fn;
      else ++k.tn;
    }
  }
  return out;
}

const char* tier_name(Tier t) {
  switch (t) {
    case Tier::all_vessel: return "all_vessel";
    case Tier::centerline: return "centerline";
    case Tier::centerline_wide: return "centerline_wide";
  }
  return "?";
}

TierRegions build_regions(const LabelMap& pred, const LabelMap& truth, const Mask* fov,
                          const EvaluationOptions& options) {
  require_extent(pred, truth, fov);
  const Mask vessels = vessel_mask(truth);
  TierRegions r;
  r.all_vessel = Mask(truth.rows(), truth.cols(), 0);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    r.all_vessel[i] = (vessels[i] || !fov || (*fov)[i]) ? 1 : 0;
  }
  const Mask skeleton = skeletonize(vessels);
  const Grid<double> width = vessel_width(vessels, skeleton);
  r.centerline = skeleton;
  r.centerline_wide = Mask(truth.rows(), truth.cols(), 0);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (options.restrict_to_discovered && !is_vessel(pred[i])) r.centerline[i] = 0;
    r.centerline_wide[i] = (r.centerline[i] && width[i] > options.wide_threshold) ? 1 : 0;
  }
  return r;
}

ImageEvaluation evaluate_image(const LabelMap& pred, const LabelMap& truth, const Mask* fov,
                               const EvaluationOptions& options) {
  const TierRegions regions = build_regions(pred, truth, fov, options);
  const std::array<const Mask*, 3> masks = {&regions.all_vessel, &regions.centerline,
                                            &regions.centerline_wide};
  ImageEvaluation out;
  for (std::size_t t = 0; t < 3; ++t) {
    TierScores& ts = out.tiers[t];
    ts.counts = count_confusion(pred, truth, *masks[t]);
    for (std::size_t c = 0; c < 4; ++c) ts.per_class[c] = accuracy_f1(ts.counts.per_class[c]);
    const auto& a = ts.per_class[class_index(VesselClass::artery)];
    const auto& v = ts.per_class[class_index(VesselClass::vein)];
    ts.macro = {(a.accuracy + v.accuracy) / 2.0, (a.f1 + v.f1) / 2.0};
  }
  return out;
}

TieredMetrics summarize(std::span<const ImageEvaluation> images) {
  TieredMetrics out;
  out.images = images.size();
  for (std::size_t t = 0; t < 3; ++t) {
    std::vector<const TierScores*> used;
    for (const auto& img : images) {
      if (img.tiers[t].counts.pixels > 0) used.push_back(&img.tiers[t]);
    }
    if (used.empty()) {
      for (const auto& img : images) used.push_back(&img.tiers[t]);
    }
    TierSummary& s = out.tiers[t];
    s.images = 0;
    for (const auto& img : images) {
      s.pixels += img.tiers[t].counts.pixels;
      s.images += img.tiers[t].counts.pixels > 0;
    }
    auto collect = [&](auto getter) {
      std::vector<double> xs;
      xs.reserve(used.size());
      for (const auto* ts : used) xs.push_back(getter(*ts));
      return mean_std(std::move(xs));
    };
    for (std::size_t c = 0; c < 4; ++c) {
      s.accuracy[c] = collect([c](const TierScores& ts) { return ts.per_class[c].accuracy; });
      s.f1[c] = collect([c](const TierScores& ts) { return ts.per_class[c].f1; });
    }
    s.macro_accuracy = collect([](const TierScores& ts) { return ts.macro.accuracy; });
    s.macro_f1 = collect([](const TierScores& ts) { return ts.macro.f1; });
  }
  return out;
}

TieredMetrics evaluate(const LabelMap& pred, const LabelMap& truth, const Mask* fov,
                       const EvaluationOptions& options) {
  const ImageEvaluation one = evaluate_image(pred, truth, fov, options);
  return summarize(std::span<const ImageEvaluation>(&one, 1));
}

std::string metrics_csv(const TieredMetrics& m) {
  std::ostringstream os;
  os << "tier,class,accuracy_mean,accuracy_std,f1_mean,f1_std,pixels,images\n";
  for (Tier tier : kAllTiers) {
    const TierSummary& s = m[tier];
    auto row = [&](const std::string& name, const MeanStd& acc, const MeanStd& f1) {
      os << tier_name(tier) << ',' << name << ',' << fmt(acc.mean) << ',' << fmt(acc.std) << ','
         << fmt(f1.mean) << ',' << fmt(f1.std) << ',' << s.pixels << ',' << s.images << '\n';
    };
    for (VesselClass c : kAllClasses) {
      row(class_name(c), s.accuracy[class_index(c)], s.f1[class_index(c)]);
    }
    row("macro", s.macro_accuracy, s.macro_f1);
  }
  return os.str();
}

std::string metrics_table(const TieredMetrics& m) {
  std::ostringstream os;
  char line[160];
  std::snprintf(line, sizeof line, "%-16s %-11s %-21s %-21s\n", "tier", "class", "accuracy",
                "f1");
  os << line;
  for (Tier tier : kAllTiers) {
    const TierSummary& s = m[tier];
    auto row = [&](const char* name, const MeanStd& acc, const MeanStd& f1) {
      std::snprintf(line, sizeof line, "%-16s %-11s %.3f +- %-12.3f %.3f +- %.3f\n",
                    tier_name(tier), name, acc.mean, acc.std, f1.mean, f1.std);
      os << line;
    };
    for (VesselClass c : kAllClasses) {
      row(class_name(c), s.accuracy[class_index(c)], s.f1[class_index(c)]);
    }
    row("macro", s.macro_accuracy, s.macro_f1);
  }
  os << "images: " << m.images << "\n";
  return os.str();
}

}  // namespace avwnet
