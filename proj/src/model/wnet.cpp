#include "avwnet/model.hpp"

namespace avwnet {

WNetConfig WNetConfig::from_block(const UNetConfig& block) {
  WNetConfig cfg{block, block};
  cfg.second.in_channels = block.in_channels + block.out_channels;
  return cfg;
}

void WNetConfig::validate() const {
  first.validate();
  second.validate();
  if (second.in_channels != first.in_channels + first.out_channels) {
    throw UsageError("second block must take image channels plus first-block outputs (" +
                     std::to_string(first.in_channels + first.out_channels) + "), got " +
                     std::to_string(second.in_channels));
  }
  if (first.depth != second.depth) throw UsageError("both W-Net blocks must share a depth");
}

std::int64_t count_parameters(const WNetConfig& cfg) {
  return count_parameters(cfg.first) + count_parameters(cfg.second);
}

WNetModel::WNetModel(const WNetConfig& cfg, const PreprocessConfig& preprocess, std::uint64_t seed)
    : cfg_(cfg), preprocess_(preprocess) {
  cfg_.validate();
  preprocess_.validate(cfg_.first.pooling_stages());
  std::mt19937_64 rng(seed);
  phi1_ = UNet(cfg_.first, rng);
  phi2_ = UNet(cfg_.second, rng);
}

WNetOutput WNetModel::forward(const Tensor& x, BatchNormMode mode) {
  WNetOutput out;
  out.first = phi1_.forward(x, mode);
  out.second = phi2_.forward(concat_channels(x, out.first.probability), mode);
  return out;
}

void WNetModel::visit_parameters(const ParameterVisitor& fn) {
  phi1_.visit_parameters("phi1.", fn);
  phi2_.visit_parameters("phi2.", fn);
}

void WNetModel::visit_batch_norms(const BatchNormVisitor& fn) {
  phi1_.visit_batch_norms("phi1.", fn);
  phi2_.visit_batch_norms("phi2.", fn);
}

std::vector<Tensor> WNetModel::parameters() {
  std::vector<Tensor> out;
  visit_parameters([&out](const std::string&, Tensor& t) { out.push_back(t); });
  return out;
}

std::int64_t WNetModel::parameter_count() {
  return phi1_.parameter_count() + phi2_.parameter_count();
}

}  // namespace avwnet
