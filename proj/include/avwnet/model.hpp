#pragma once

// Attention-gated residual U-Net and its W composition.
//
// A U-Net with depth k and base filters f0 has k resolution levels carrying
// f0 * 2^j channels (j = 0..k-1) and k-1 max-pool stages; the deepest level is
// the bottleneck. With k = 3, f0 = 8 and attention off this is the ~34k
// parameter network; two of them make the ~69k parameter W-Net.

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "avwnet/ops.hpp"
#include "avwnet/preprocess.hpp"
#include "avwnet/tensor.hpp"

namespace avwnet {

struct UNetConfig {
  int depth = 3;
  int base_filters = 8;
  int in_channels = 3;
  int out_channels = 1;
  bool use_attention = true;
  bool deep_supervision = false;
  // Treat gate coefficients as constants in backward (ablation switch).
  bool detach_attention = false;

  int channels_at(int level) const { return base_filters << level; }
  int pooling_stages() const { return depth - 1; }
  void validate() const;

  bool operator==(const UNetConfig&) const = default;
};

struct WNetConfig {
  UNetConfig first;
  UNetConfig second;

  // Both blocks share depth/filters/flags; the second block sees the image
  // channels plus the first block's prediction.
  static WNetConfig from_block(const UNetConfig& block);
  void validate() const;

  bool operator==(const WNetConfig&) const = default;
};

// Exact number of trainable scalars, derived from the configuration alone.
std::int64_t count_parameters(const UNetConfig& cfg);
std::int64_t count_parameters(const WNetConfig& cfg);

using ParameterVisitor = std::function<void(const std::string& name, Tensor& value)>;
using BatchNormVisitor = std::function<void(const std::string& name, BatchNormStats& stats)>;

struct Conv {
  Tensor weight;
  Tensor bias;
  int padding = 0;

  static Conv he_uniform(int in_channels, int out_channels, int kernel, std::mt19937_64& rng);
  Tensor forward(const Tensor& x) const { return conv2d(x, weight, bias, padding); }
  void visit(const std::string& prefix, const ParameterVisitor& fn);
};

// conv3x3 -> batch norm -> relu
struct ConvBnRelu {
  Conv conv;
  Tensor gamma;
  Tensor beta;
  BatchNormStats stats;

  ConvBnRelu() = default;
  ConvBnRelu(int in_channels, int out_channels, std::mt19937_64& rng);
  Tensor forward(const Tensor& x, BatchNormMode mode);
  void visit(const std::string& prefix, const ParameterVisitor& fn);
  void visit_stats(const std::string& prefix, const BatchNormVisitor& fn);
};

// Two ConvBnRelu layers plus an additive shortcut (identity, or a 1x1 conv
// when the channel count changes).
struct ResidualBlock {
  ConvBnRelu first;
  ConvBnRelu second;
  std::optional<Conv> projection;

  ResidualBlock() = default;
  ResidualBlock(int in_channels, int out_channels, std::mt19937_64& rng);
  Tensor forward(const Tensor& x, BatchNormMode mode);
  void visit(const std::string& prefix, const ParameterVisitor& fn);
  void visit_stats(const std::string& prefix, const BatchNormVisitor& fn);
};

// Additive attention gate on a skip connection:
//   alpha = sigmoid(psi(relu(W_x x + up(W_g g)))),  output = alpha * x
// where g is the coarser decoder feature at half the resolution of x.
struct AttentionGate {
  Conv skip_proj;   // W_x, 1x1
  Conv gating_proj; // W_g, 1x1
  Conv psi;         // 1x1 to one channel
  int skip_channels = 0;
  int gating_channels = 0;
  int inter_channels = 0;

  struct Output {
    Tensor gated;
    Tensor alpha; // [N, 1, H, W]
  };

  AttentionGate() = default;
  AttentionGate(int skip_channels, int gating_channels, std::mt19937_64& rng);
  Output forward(const Tensor& skip, const Tensor& gating, bool detach_alpha = false) const;
  void visit(const std::string& prefix, const ParameterVisitor& fn);
};

struct UNetOutput {
  Tensor probability;             // [N, out, H, W], sigmoid
  std::vector<Tensor> auxiliary;  // deep supervision maps, coarsest first
  std::vector<Tensor> attention;  // gate coefficients, coarsest first
};

class UNet {
 public:
  UNet() = default;
  UNet(const UNetConfig& cfg, std::mt19937_64& rng);

  const UNetConfig& config() const { return cfg_; }
  // BatchNorm running statistics are updated in train mode.
  UNetOutput forward(const Tensor& x, BatchNormMode mode);

  void visit_parameters(const std::string& prefix, const ParameterVisitor& fn);
  void visit_batch_norms(const std::string& prefix, const BatchNormVisitor& fn);
  std::int64_t parameter_count();

 private:
  struct UpStage {
    ConvBnRelu up_conv;
    std::optional<AttentionGate> gate;
    ResidualBlock block;
    std::optional<Conv> aux_head;
  };

  UNetConfig cfg_;
  std::vector<ResidualBlock> encoder_;
  std::vector<UpStage> decoder_;  // decoder_[l] produces level l
  Conv head_;
};

struct WNetOutput {
  UNetOutput first;   // phi1(x)
  UNetOutput second;  // phi2(x, phi1(x)), the model output
};

class WNetModel {
 public:
  WNetModel() = default;
  WNetModel(const WNetConfig& cfg, const PreprocessConfig& preprocess, std::uint64_t seed);

  const WNetConfig& config() const { return cfg_; }
  const PreprocessConfig& preprocess_config() const { return preprocess_; }

  WNetOutput forward(const Tensor& x, BatchNormMode mode);

  UNet& first() { return phi1_; }
  UNet& second() { return phi2_; }

  // Visits "phi1.*" then "phi2.*" in a fixed order.
  void visit_parameters(const ParameterVisitor& fn);
  void visit_batch_norms(const BatchNormVisitor& fn);
  std::vector<Tensor> parameters();
  std::int64_t parameter_count();

 private:
  WNetConfig cfg_;
  PreprocessConfig preprocess_;
  UNet phi1_;
  UNet phi2_;
};

}  // namespace avwnet
