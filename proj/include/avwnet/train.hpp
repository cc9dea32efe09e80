#pragma once

// Adam training of one binary W-Net (artery or vein) with early stopping.

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "avwnet/loss.hpp"
#include "avwnet/model.hpp"
#include "avwnet/preprocess.hpp"

namespace avwnet {

struct TrainConfig {
  double learning_rate = 0.01;
  int batch_size = 6;
  int max_epochs = 200;
  int patience = 20;
  std::uint64_t seed = 0;
  VesselKind vessel_kind = VesselKind::artery;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
  double aux_weight = 0.25;  // per auxiliary head, only with deep supervision

  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
};

// Seeded shuffle of 0..n-1; the first floor(ratio * n) go to training (at
// least one each side). Throws UsageError for n < 2.
SplitIndices split_indices(std::size_t n, std::uint64_t seed, double train_ratio = 0.8);

template <typename T>
std::pair<std::vector<T>, std::vector<T>> split_dataset(const std::vector<T>& samples,
                                                        std::uint64_t seed,
                                                        double train_ratio = 0.8) {
  const SplitIndices idx = split_indices(samples.size(), seed, train_ratio);
  std::pair<std::vector<T>, std::vector<T>> out;
  for (auto i : idx.train) out.first.push_back(samples[i]);
  for (auto i : idx.validation) out.second.push_back(samples[i]);
  return out;
}

struct NamedParameter {
  std::string name;
  Tensor value;
};

std::vector<NamedParameter> named_parameters(WNetModel& model);

struct AdamState {
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  std::int64_t step = 0;
};

// One bias-corrected Adam update in place. A missing gradient counts as zero.
// Throws NumericError naming the parameter when a gradient is not finite.
void adam_step(std::span<NamedParameter> params, AdamState& state, const TrainConfig& cfg);

// Network-ready tensors for one image and one vessel kind.
struct TrainingExample {
  std::string source_id;
  Tensor input;   // [1, 3, S, S]
  Tensor target;  // [1, 1, S, S], binary
  Tensor weight;  // [1, 1, S, S], positive-class weight
  Tensor mask;    // [1, 1, S, S], FOV; undefined when the sample has none
  // Coarser copies (nearest) for deep supervision heads, coarsest first.
  std::vector<Tensor> aux_target, aux_weight, aux_mask;
};

TrainingExample make_example(const PreparedSample& sample, VesselKind kind,
                             const FocalConfig& focal, const UNetConfig& block);

struct EpochRecord {
  int epoch = 0;  // 1-based
  double train_loss = 0;
  double val_loss = 0;
  double seconds = 0;
};

struct TrainLog {
  std::vector<std::string> notes;  // written as '#' lines ahead of the table
  std::vector<EpochRecord> epochs;

  // epoch,train_loss,val_loss with full precision; no wall-clock values so
  // that identical runs give identical files.
  std::string csv() const;
  // epoch,seconds
  std::string timing_csv() const;
  // FNV-1a 64 of csv().
  std::uint64_t digest() const;
};

// Deep copy of every weight and batch-norm statistic.
struct WeightSnapshot {
  std::vector<std::vector<double>> parameters;
  std::vector<BatchNormStats> batch_norms;
};

WeightSnapshot take_snapshot(WNetModel& model);
void restore_snapshot(WNetModel& model, const WeightSnapshot& snap);

struct TrainResult {
  TrainLog log;
  int best_epoch = 0;
  double best_val_loss = 0;
  int epochs_run = 0;
  bool early_stopped = false;
};

// focal(p2) + focal(p1) (+ aux_weight * focal(aux) per head), averaged over
// the batch's masked pixels. Works in either batch-norm mode.
Tensor wnet_loss(WNetModel& model, std::span<const TrainingExample* const> batch,
                 const FocalConfig& focal, const TrainConfig& cfg, BatchNormMode mode);

// Mean over examples of focal(p2) + focal(p1) in eval mode, without a graph.
double validation_loss(WNetModel& model, std::span<const TrainingExample> data,
                       const FocalConfig& focal);

using EpochCallback = std::function<void(const EpochRecord&)>;

// Trains until max_epochs or until `patience` consecutive epochs fail to lower
// the validation loss. On return the model holds the best epoch's weights.
TrainResult train_model(const TrainConfig& cfg, const FocalConfig& focal, WNetModel& model,
                        std::span<const TrainingExample> train,
                        std::span<const TrainingExample> validation,
                        const EpochCallback& on_epoch = {});

}  // namespace avwnet
