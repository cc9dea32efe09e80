#include <cmath>

#include "avwnet/errors.hpp"
#include "avwnet/model.hpp"

namespace avwnet {

namespace {

std::int64_t conv_params(std::int64_t in, std::int64_t out, std::int64_t k) {
  return in * out * k * k + out;
}
std::int64_t cbr_params(std::int64_t in, std::int64_t out) {
  return conv_params(in, out, 3) + 2 * out;
}
std::int64_t block_params(std::int64_t in, std::int64_t out) {
  return cbr_params(in, out) + cbr_params(out, out) + (in != out ? conv_params(in, out, 1) : 0);
}
int gate_inter_channels(int skip_channels) { return std::max(1, skip_channels / 2); }

}  // namespace

void UNetConfig::validate() const {
  if (depth < 1) throw UsageError("U-Net depth must be at least 1");
  if (base_filters < 1) throw UsageError("U-Net base filters must be at least 1");
  if (in_channels < 1 || out_channels < 1) throw UsageError("U-Net channel counts must be positive");
}

std::int64_t count_parameters(const UNetConfig& cfg) {
  cfg.validate();
  std::int64_t total = block_params(cfg.in_channels, cfg.channels_at(0));
  for (int l = 1; l < cfg.depth; ++l) total += block_params(cfg.channels_at(l - 1), cfg.channels_at(l));
  for (int l = cfg.depth - 2; l >= 0; --l) {
    const std::int64_t c = cfg.channels_at(l), coarse = cfg.channels_at(l + 1);
    total += cbr_params(coarse, c) + block_params(2 * c, c);
    if (cfg.use_attention) {
      const std::int64_t f = gate_inter_channels(static_cast<int>(c));
      total += conv_params(c, f, 1) + conv_params(coarse, f, 1) + conv_params(f, 1, 1);
    }
    if (cfg.deep_supervision) total += conv_params(coarse, cfg.out_channels, 1);
  }
  total += conv_params(cfg.channels_at(0), cfg.out_channels, 1);
  return total;
}

Conv Conv::he_uniform(int in_channels, int out_channels, int kernel, std::mt19937_64& rng) {
  const double bound = std::sqrt(6.0 / (in_channels * kernel * kernel));
  std::uniform_real_distribution<double> dist(-bound, bound);
  std::vector<double> w(static_cast<std::size_t>(out_channels * in_channels * kernel * kernel));
  for (auto& v : w) v = dist(rng);
  Conv c;
  c.weight = Tensor::from_values({out_channels, in_channels, kernel, kernel}, std::move(w), true);
  c.bias = Tensor::zeros({out_channels}, true);
  c.padding = kernel / 2;
  return c;
}

void Conv::visit(const std::string& prefix, const ParameterVisitor& fn) {
  fn(prefix + ".weight", weight);
  fn(prefix + ".bias", bias);
}

ConvBnRelu::ConvBnRelu(int in_channels, int out_channels, std::mt19937_64& rng)
    : conv(Conv::he_uniform(in_channels, out_channels, 3, rng)),
      gamma(Tensor::full({out_channels}, 1.0, true)),
      beta(Tensor::zeros({out_channels}, true)),
      stats(BatchNormStats::initial(out_channels)) {}

Tensor ConvBnRelu::forward(const Tensor& x, BatchNormMode mode) {
  return relu(batch_norm(conv.forward(x), gamma, beta, stats, mode));
}

void ConvBnRelu::visit(const std::string& prefix, const ParameterVisitor& fn) {
  conv.visit(prefix + ".conv", fn);
  fn(prefix + ".bn.gamma", gamma);
  fn(prefix + ".bn.beta", beta);
}

void ConvBnRelu::visit_stats(const std::string& prefix, const BatchNormVisitor& fn) {
  fn(prefix + ".bn", stats);
}

ResidualBlock::ResidualBlock(int in_channels, int out_channels, std::mt19937_64& rng)
    : first(in_channels, out_channels, rng), second(out_channels, out_channels, rng) {
  if (in_channels != out_channels) projection = Conv::he_uniform(in_channels, out_channels, 1, rng);
}

Tensor ResidualBlock::forward(const Tensor& x, BatchNormMode mode) {
  const Tensor body = second.forward(first.forward(x, mode), mode);
  return add(body, projection ? projection->forward(x) : x);
}

void ResidualBlock::visit(const std::string& prefix, const ParameterVisitor& fn) {
  first.visit(prefix + ".first", fn);
  second.visit(prefix + ".second", fn);
  if (projection) projection->visit(prefix + ".shortcut", fn);
}

void ResidualBlock::visit_stats(const std::string& prefix, const BatchNormVisitor& fn) {
  first.visit_stats(prefix + ".first", fn);
  second.visit_stats(prefix + ".second", fn);
}

AttentionGate::AttentionGate(int skip_ch, int gating_ch, std::mt19937_64& rng)
    : skip_channels(skip_ch), gating_channels(gating_ch), inter_channels(gate_inter_channels(skip_ch)) {
  skip_proj = Conv::he_uniform(skip_channels, inter_channels, 1, rng);
  gating_proj = Conv::he_uniform(gating_channels, inter_channels, 1, rng);
  psi = Conv::he_uniform(inter_channels, 1, 1, rng);
}

AttentionGate::Output AttentionGate::forward(const Tensor& skip, const Tensor& gating,
                                             bool detach_alpha) const {
  if (skip.shape().size() != 4 || skip.dim(1) != skip_channels) {
    throw ShapeError("attention gate expects " + std::to_string(skip_channels) +
                     " skip channels, got " + to_string(skip.shape()));
  }
  if (gating.shape().size() != 4 || gating.dim(1) != gating_channels) {
    throw ShapeError("attention gate expects " + std::to_string(gating_channels) +
                     " gating channels, got " + to_string(gating.shape()));
  }
  // A 1x1 conv commutes with nearest upsampling, so W_g runs at the coarse scale.
  Tensor g = gating_proj.forward(gating);
  if (g.dim(2) != skip.dim(2)) g = upsample_nearest(g);
  if (g.dim(2) != skip.dim(2) || g.dim(3) != skip.dim(3)) {
    throw ShapeError("gating signal " + to_string(gating.shape()) +
                     " is not at half the resolution of skip " + to_string(skip.shape()));
  }
  Tensor alpha = sigmoid(psi.forward(relu(add(skip_proj.forward(skip), g))));
  const Tensor coeff = detach_alpha ? alpha.detach() : alpha;
  return {mul(coeff, skip), alpha};
}

void AttentionGate::visit(const std::string& prefix, const ParameterVisitor& fn) {
  skip_proj.visit(prefix + ".W_x", fn);
  gating_proj.visit(prefix + ".W_g", fn);
  psi.visit(prefix + ".psi", fn);
}

UNet::UNet(const UNetConfig& cfg, std::mt19937_64& rng) : cfg_(cfg) {
  cfg_.validate();
  encoder_.emplace_back(cfg_.in_channels, cfg_.channels_at(0), rng);
  for (int l = 1; l < cfg_.depth; ++l) {
    encoder_.emplace_back(cfg_.channels_at(l - 1), cfg_.channels_at(l), rng);
  }
  decoder_.resize(static_cast<std::size_t>(std::max(0, cfg_.depth - 1)));
  for (int l = cfg_.depth - 2; l >= 0; --l) {
    const int c = cfg_.channels_at(l), coarse = cfg_.channels_at(l + 1);
    auto& stage = decoder_[l];
    stage.up_conv = ConvBnRelu(coarse, c, rng);
    if (cfg_.use_attention) stage.gate = AttentionGate(c, coarse, rng);
    stage.block = ResidualBlock(2 * c, c, rng);
    if (cfg_.deep_supervision) stage.aux_head = Conv::he_uniform(coarse, cfg_.out_channels, 1, rng);
  }
  head_ = Conv::he_uniform(cfg_.channels_at(0), cfg_.out_channels, 1, rng);
}

UNetOutput UNet::forward(const Tensor& x, BatchNormMode mode) {
  if (x.shape().size() != 4 || x.dim(1) != cfg_.in_channels) {
    throw ShapeError("U-Net expects [N," + std::to_string(cfg_.in_channels) + ",H,W], got " +
                     to_string(x.shape()));
  }
  const std::int64_t multiple = std::int64_t{1} << cfg_.pooling_stages();
  if (x.dim(2) % multiple || x.dim(3) % multiple) {
    throw ShapeError("spatial extent of " + to_string(x.shape()) + " is not divisible by " +
                     std::to_string(multiple));
  }

  UNetOutput out;
  std::vector<Tensor> skips;
  Tensor h = encoder_[0].forward(x, mode);
  for (int l = 1; l < cfg_.depth; ++l) {
    skips.push_back(h);
    h = encoder_[l].forward(max_pool2d(h), mode);
  }
  for (int l = cfg_.depth - 2; l >= 0; --l) {
    auto& stage = decoder_[l];
    if (stage.aux_head) out.auxiliary.push_back(sigmoid(stage.aux_head->forward(h)));
    Tensor up = stage.up_conv.forward(upsample_nearest(h), mode);
    Tensor skip = skips[l];
    if (stage.gate) {
      auto gated = stage.gate->forward(skip, h, cfg_.detach_attention);
      skip = gated.gated;
      out.attention.push_back(gated.alpha);
    }
    h = stage.block.forward(concat_channels(skip, up), mode);
  }
  out.probability = sigmoid(head_.forward(h));
  return out;
}

void UNet::visit_parameters(const std::string& prefix, const ParameterVisitor& fn) {
  for (std::size_t l = 0; l < encoder_.size(); ++l) {
    encoder_[l].visit(prefix + "enc" + std::to_string(l), fn);
  }
  for (int l = cfg_.depth - 2; l >= 0; --l) {
    auto& stage = decoder_[l];
    const std::string p = prefix + "dec" + std::to_string(l);
    stage.up_conv.visit(p + ".up", fn);
    if (stage.gate) stage.gate->visit(p + ".gate", fn);
    stage.block.visit(p + ".block", fn);
    if (stage.aux_head) stage.aux_head->visit(p + ".aux", fn);
  }
  head_.visit(prefix + "head", fn);
}

void UNet::visit_batch_norms(const std::string& prefix, const BatchNormVisitor& fn) {
  for (std::size_t l = 0; l < encoder_.size(); ++l) {
    encoder_[l].visit_stats(prefix + "enc" + std::to_string(l), fn);
  }
  for (int l = cfg_.depth - 2; l >= 0; --l) {
    auto& stage = decoder_[l];
    const std::string p = prefix + "dec" + std::to_string(l);
    stage.up_conv.visit_stats(p + ".up", fn);
    stage.block.visit_stats(p + ".block", fn);
  }
}

std::int64_t UNet::parameter_count() {
  std::int64_t n = 0;
  visit_parameters("", [&n](const std::string&, Tensor& t) { n += t.numel(); });
  return n;
}

}  // namespace avwnet
