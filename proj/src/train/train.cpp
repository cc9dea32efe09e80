#include "avwnet/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

namespace avwnet {

namespace {

// Portable Fisher-Yates; std::shuffle's draws differ between standard libraries.
void shuffle_indices(std::vector<std::size_t>& v, std::mt19937_64& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(v[i - 1], v[j]);
  }
}

Tensor mask_tensor(const Mask& m) {
  std::vector<double> v(m.size());
  for (std::size_t i = 0; i < m.size(); ++i) v[i] = m[i] ? 1.0 : 0.0;
  return Tensor::from_values({1, 1, m.rows(), m.cols()}, std::move(v));
}

Tensor grid_tensor(const Grid<double>& g) {
  return Tensor::from_values({1, 1, g.rows(), g.cols()}, g.data());
}

// Concatenates [1, C, H, W] tensors along the batch axis (constants only).
Tensor stack(std::span<const TrainingExample* const> batch, Tensor TrainingExample::*field) {
  const Shape& s = (batch[0]->*field).shape();
  std::vector<double> values;
  values.reserve(static_cast<std::size_t>(element_count(s)) * batch.size());
  for (const auto* ex : batch) {
    const auto v = (ex->*field).values();
    values.insert(values.end(), v.begin(), v.end());
  }
  return Tensor::from_values({static_cast<std::int64_t>(batch.size()), s[1], s[2], s[3]},
                             std::move(values));
}

Tensor stack_aux(std::span<const TrainingExample* const> batch,
                 std::vector<Tensor> TrainingExample::*field, std::size_t level) {
  const Shape& s = (batch[0]->*field)[level].shape();
  std::vector<double> values;
  for (const auto* ex : batch) {
    const auto v = ((ex->*field)[level]).values();
    values.insert(values.end(), v.begin(), v.end());
  }
  return Tensor::from_values({static_cast<std::int64_t>(batch.size()), s[1], s[2], s[3]},
                             std::move(values));
}

bool has_mask(std::span<const TrainingExample* const> batch) {
  for (const auto* ex : batch) {
    if (!ex->mask.defined()) return false;
  }
  return true;
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void TrainConfig::validate() const {
  if (!(learning_rate > 0) || !std::isfinite(learning_rate)) {
    throw UsageError("learning_rate must be positive");
  }
  if (batch_size < 1) throw UsageError("batch_size must be >= 1");
  if (max_epochs < 1) throw UsageError("max_epochs must be >= 1");
  if (patience < 0 || patience >= max_epochs) {
    throw UsageError("patience must lie in [0, max_epochs)");
  }
  if (!(beta1 >= 0 && beta1 < 1) || !(beta2 >= 0 && beta2 < 1)) {
    throw UsageError("adam betas must lie in [0, 1)");
  }
  if (!(adam_epsilon > 0)) throw UsageError("adam epsilon must be positive");
  if (!(aux_weight >= 0)) throw UsageError("aux_weight must be >= 0");
}

SplitIndices split_indices(std::size_t n, std::uint64_t seed, double train_ratio) {
  if (n < 2) throw UsageError("need at least 2 samples to split, got " + std::to_string(n));
  if (!(train_ratio > 0 && train_ratio < 1)) throw UsageError("train ratio must lie in (0, 1)");
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::mt19937_64 rng(seed);
  shuffle_indices(order, rng);
  auto n_train = static_cast<std::size_t>(std::floor(train_ratio * static_cast<double>(n) + 1e-9));
  n_train = std::clamp<std::size_t>(n_train, 1, n - 1);
  SplitIndices out;
  out.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  out.validation.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
  return out;
}

std::vector<NamedParameter> named_parameters(WNetModel& model) {
  std::vector<NamedParameter> out;
  model.visit_parameters([&](const std::string& name, Tensor& t) { out.push_back({name, t}); });
  return out;
}

void adam_step(std::span<NamedParameter> params, AdamState& state, const TrainConfig& cfg) {
  if (state.m.size() != params.size()) {
    state.m.assign(params.size(), {});
    state.v.assign(params.size(), {});
    for (std::size_t i = 0; i < params.size(); ++i) {
      state.m[i].assign(static_cast<std::size_t>(params[i].value.numel()), 0.0);
      state.v[i].assign(static_cast<std::size_t>(params[i].value.numel()), 0.0);
    }
    state.step = 0;
  }
  for (const auto& p : params) {
    if (!p.value.has_grad()) continue;
    for (double g : p.value.grad()) {
      if (!std::isfinite(g)) throw NumericError("non-finite gradient in parameter " + p.name);
    }
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(cfg.beta1, t);
  const double c2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& w = params[i].value;
    auto values = w.mutable_values();
    auto& m = state.m[i];
    auto& v = state.v[i];
    const bool has = w.has_grad();
    const std::span<const double> g = has ? w.grad() : std::span<const double>{};
    for (std::size_t j = 0; j < values.size(); ++j) {
      const double gj = has ? g[j] : 0.0;
      m[j] = cfg.beta1 * m[j] + (1.0 - cfg.beta1) * gj;
      v[j] = cfg.beta2 * v[j] + (1.0 - cfg.beta2) * gj * gj;
      const double mhat = m[j] / c1;
      const double vhat = v[j] / c2;
      values[j] -= cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.adam_epsilon);
    }
  }
}

TrainingExample make_example(const PreparedSample& sample, VesselKind kind,
                             const FocalConfig& focal, const UNetConfig& block) {
  if (!sample.label) throw DataError("sample " + sample.source_id + " has no label");
  const BinaryTarget bt = build_weight_raster(*sample.label, kind, focal);
  TrainingExample ex;
  ex.source_id = sample.source_id;
  ex.input = sample.input;
  ex.target = mask_tensor(bt.target);
  ex.weight = grid_tensor(bt.weights);
  if (sample.fov_mask) ex.mask = mask_tensor(*sample.fov_mask);
  if (block.deep_supervision) {
    const int rows = bt.target.rows(), cols = bt.target.cols();
    for (int level = block.pooling_stages(); level >= 1; --level) {
      const int r = rows >> level, c = cols >> level;
      ex.aux_target.push_back(mask_tensor(resize_nearest(bt.target, r, c)));
      ex.aux_weight.push_back(grid_tensor(resize_nearest(bt.weights, r, c)));
      ex.aux_mask.push_back(sample.fov_mask ? mask_tensor(resize_nearest(*sample.fov_mask, r, c))
                                            : Tensor());
    }
  }
  return ex;
}

std::string TrainLog::csv() const {
  std::ostringstream os;
  for (const auto& n : notes) os << "# " << n << '\n';
  os << "epoch,train_loss,val_loss\n";
  for (const auto& e : epochs) {
    os << e.epoch << ',' << format_double(e.train_loss) << ',' << format_double(e.val_loss)
       << '\n';
  }
  return os.str();
}

std::string TrainLog::timing_csv() const {
  std::ostringstream os;
  os << "epoch,seconds\n";
  for (const auto& e : epochs) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3f", e.seconds);
    os << e.epoch << ',' << buf << '\n';
  }
  return os.str();
}

std::uint64_t TrainLog::digest() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : csv()) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

WeightSnapshot take_snapshot(WNetModel& model) {
  WeightSnapshot s;
  model.visit_parameters([&](const std::string&, Tensor& t) {
    const auto v = t.values();
    s.parameters.emplace_back(v.begin(), v.end());
  });
  model.visit_batch_norms([&](const std::string&, BatchNormStats& st) { s.batch_norms.push_back(st); });
  return s;
}

void restore_snapshot(WNetModel& model, const WeightSnapshot& snap) {
  std::size_t i = 0;
  model.visit_parameters([&](const std::string& name, Tensor& t) {
    if (i >= snap.parameters.size() ||
        snap.parameters[i].size() != static_cast<std::size_t>(t.numel())) {
      throw ShapeError("snapshot does not match parameter " + name);
    }
    auto dst = t.mutable_values();
    std::copy(snap.parameters[i].begin(), snap.parameters[i].end(), dst.begin());
    ++i;
  });
  std::size_t j = 0;
  model.visit_batch_norms([&](const std::string& name, BatchNormStats& st) {
    if (j >= snap.batch_norms.size()) throw ShapeError("snapshot lacks batch norm " + name);
    st = snap.batch_norms[j++];
  });
}

Tensor wnet_loss(WNetModel& model, std::span<const TrainingExample* const> batch,
                 const FocalConfig& focal, const TrainConfig& cfg, BatchNormMode mode) {
  if (batch.empty()) throw UsageError("empty batch");
  const Tensor x = stack(batch, &TrainingExample::input);
  const Tensor y = stack(batch, &TrainingExample::target);
  const Tensor w = stack(batch, &TrainingExample::weight);
  const Tensor m = has_mask(batch) ? stack(batch, &TrainingExample::mask) : Tensor();
  const WNetOutput out = model.forward(x, mode);
  Tensor loss = focal_loss(out.second.probability, y, w, m, focal.gamma) +
                focal_loss(out.first.probability, y, w, m, focal.gamma);
  for (const UNetOutput* net : {&out.first, &out.second}) {
    for (std::size_t level = 0; level < net->auxiliary.size(); ++level) {
      if (batch[0]->aux_target.size() != net->auxiliary.size()) {
        throw ShapeError("examples were built without deep supervision targets");
      }
      const Tensor am = has_mask(batch) && batch[0]->aux_mask[level].defined()
                            ? stack_aux(batch, &TrainingExample::aux_mask, level)
                            : Tensor();
      loss = loss + cfg.aux_weight *
                        focal_loss(net->auxiliary[level],
                                   stack_aux(batch, &TrainingExample::aux_target, level),
                                   stack_aux(batch, &TrainingExample::aux_weight, level), am,
                                   focal.gamma);
    }
  }
  return loss;
}

double validation_loss(WNetModel& model, std::span<const TrainingExample> data,
                       const FocalConfig& focal) {
  if (data.empty()) throw UsageError("empty validation set");
  NoGradGuard no_grad;
  double total = 0.0;
  for (const auto& ex : data) {
    const WNetOutput out = model.forward(ex.input, BatchNormMode::eval);
    total += focal_loss(out.second.probability, ex.target, ex.weight, ex.mask, focal.gamma).item() +
             focal_loss(out.first.probability, ex.target, ex.weight, ex.mask, focal.gamma).item();
  }
  return total / static_cast<double>(data.size());
}

TrainResult train_model(const TrainConfig& cfg, const FocalConfig& focal, WNetModel& model,
                        std::span<const TrainingExample> train,
                        std::span<const TrainingExample> validation,
                        const EpochCallback& on_epoch) {
  cfg.validate();
  focal.validate();
  if (train.empty()) throw UsageError("empty training set");
  if (validation.empty()) throw UsageError("empty validation set");

  TrainResult result;
  {
    double pos = 0, uncertain_w = 0, pixels = 0;
    for (const auto& ex : train) {
      const auto y = ex.target.values();
      const auto w = ex.weight.values();
      for (std::size_t i = 0; i < y.size(); ++i) {
        pos += y[i];
        uncertain_w += (y[i] == 1.0 && w[i] == focal.alpha_uncertain &&
                        focal.alpha_uncertain != focal.alpha_fg);
      }
      pixels += static_cast<double>(y.size());
    }
    char buf[160];
    std::snprintf(buf, sizeof buf, "vessel=%s train=%zu validation=%zu", kind_name(cfg.vessel_kind),
                  train.size(), validation.size());
    result.log.notes.emplace_back(buf);
    std::snprintf(buf, sizeof buf, "target_positive_fraction=%.6f uncertain_fraction=%.6f",
                  pos / pixels, uncertain_w / pixels);
    result.log.notes.emplace_back(buf);
  }

  std::vector<NamedParameter> params = named_parameters(model);
  AdamState adam;
  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> order(train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  double best = std::numeric_limits<double>::infinity();
  int since = 0;
  WeightSnapshot best_weights = take_snapshot(model);

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    shuffle_indices(order, rng);
    double loss_sum = 0.0;
    std::vector<const TrainingExample*> batch;
    for (std::size_t b = 0; b < order.size(); b += static_cast<std::size_t>(cfg.batch_size)) {
      batch.clear();
      for (std::size_t i = b; i < std::min(order.size(), b + static_cast<std::size_t>(cfg.batch_size)); ++i) {
        batch.push_back(&train[order[i]]);
      }
      for (auto& p : params) p.value.zero_grad();
      const Tensor loss = wnet_loss(model, batch, focal, cfg, BatchNormMode::train);
      if (!std::isfinite(loss.item())) {
        throw NumericError("training loss diverged at epoch " + std::to_string(epoch));
      }
      loss.backward();
      adam_step(params, adam, cfg);
      loss_sum += loss.item() * static_cast<double>(batch.size());
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(train.size());
    rec.val_loss = validation_loss(model, validation, focal);
    if (!std::isfinite(rec.val_loss)) {
      throw NumericError("validation loss is not finite at epoch " + std::to_string(epoch));
    }
    rec.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    result.log.epochs.push_back(rec);
    result.epochs_run = epoch;
    if (on_epoch) on_epoch(rec);

    if (rec.val_loss < best) {
      best = rec.val_loss;
      since = 0;
      result.best_epoch = epoch;
      best_weights = take_snapshot(model);
    } else {
      ++since;
      if (since >= cfg.patience) {
        result.early_stopped = epoch < cfg.max_epochs;
        break;
      }
    }
  }
  for (auto& p : params) p.value.zero_grad();
  restore_snapshot(model, best_weights);
  result.best_val_loss = best;
  return result;
}

}  // namespace avwnet
