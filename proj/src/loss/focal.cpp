#include <algorithm>
#include <cmath>

#include "avwnet/loss.hpp"

namespace avwnet {

void FocalConfig::validate() const {
  if (!(gamma >= 0)) throw UsageError("focal gamma must be >= 0");
  auto in_unit = [](double w) { return w > 0 && w <= 1; };
  if (!in_unit(alpha_fg) || !in_unit(alpha_uncertain)) {
    throw UsageError("focal alpha weights must lie in (0, 1]");
  }
}

Tensor focal_loss(const Tensor& pred, const Tensor& target, const Tensor& weights,
                  const Tensor& mask, double gamma) {
  if (pred.shape().size() != 4 || pred.dim(1) != 1) {
    throw ShapeError("focal_loss expects [N,1,H,W] predictions, got " + to_string(pred.shape()));
  }
  if (target.shape() != pred.shape() || weights.shape() != pred.shape() ||
      (mask.defined() && mask.shape() != pred.shape())) {
    throw ShapeError("focal_loss operands must share shape " + to_string(pred.shape()));
  }
  const auto p = pred.values();
  const auto y = target.values();
  const auto w = weights.values();
  const std::size_t n = p.size();

  constexpr double kRangeTolerance = 1e-12;
  double count = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!(p[i] >= -kRangeTolerance && p[i] <= 1.0 + kRangeTolerance)) {
      throw NumericError("focal_loss prediction " + std::to_string(p[i]) + " outside (0,1)");
    }
    if (y[i] != 0.0 && y[i] != 1.0) throw UsageError("focal_loss target must be binary");
    if (!mask.defined() || mask.values()[i] != 0.0) count += 1.0;
  }

  // d loss_i / d p_i, already divided by the pixel count.
  std::vector<double> dpred(n, 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (mask.defined() && mask.values()[i] == 0.0) continue;
    const bool positive = y[i] == 1.0;
    const double raw_pt = positive ? p[i] : 1.0 - p[i];
    const double pt = std::clamp(raw_pt, kProbabilityClamp, 1.0 - kProbabilityClamp);
    const double at = positive ? w[i] : 1.0 - w[i];
    const double q = 1.0 - pt;
    const double log_pt = std::log(pt);
    const double focal = gamma == 0.0 ? 1.0 : std::pow(q, gamma);
    total += -at * focal * log_pt;
    if (raw_pt != pt) continue;  // clamped: locally constant
    const double dfocal = gamma == 0.0 ? 0.0 : gamma * std::pow(q, gamma - 1.0);
    const double dpt = at * (dfocal * log_pt - focal / pt);
    dpred[i] = (positive ? dpt : -dpt) / count;
  }
  const double value = count > 0 ? total / count : 0.0;

  return make_result({1}, {value}, {pred},
                     [dpred = std::move(dpred)](std::span<const double> g,
                                                const GradientSinks& sinks) {
                       auto& dx = *sinks[0];
                       for (std::size_t i = 0; i < dpred.size(); ++i) dx[i] += g[0] * dpred[i];
                     });
}

BinaryTarget build_weight_raster(const LabelMap& label, VesselKind kind, const FocalConfig& cfg) {
  cfg.validate();
  const VesselClass own = kind == VesselKind::artery ? VesselClass::artery : VesselClass::vein;
  BinaryTarget out{Mask(label.rows(), label.cols(), 0),
                   Grid<double>(label.rows(), label.cols(), cfg.alpha_fg)};
  for (std::size_t i = 0; i < label.size(); ++i) {
    const auto c = label[i];
    if (static_cast<std::uint8_t>(c) > 3) {
      throw DataError("unknown class code " + std::to_string(static_cast<int>(c)) +
                      " at flat index " + std::to_string(i));
    }
    if (c == own) {
      out.target[i] = 1;
    } else if (c == VesselClass::uncertain) {
      out.target[i] = 1;
      out.weights[i] = cfg.alpha_uncertain;
    }
  }
  return out;
}

}  // namespace avwnet
