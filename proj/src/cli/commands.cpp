#include "avwnet/commands.hpp"

#include <fstream>
#include <map>
#include <ostream>
#include <stdexcept>

namespace avwnet {

namespace {

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) throw DataError("cannot write " + path.string());
}

ProbabilityMap to_map(const Tensor& t, std::int64_t channel = 0) {
  const int rows = static_cast<int>(t.dim(2)), cols = static_cast<int>(t.dim(3));
  ProbabilityMap out(rows, cols);
  const auto v = t.values();
  const std::size_t offset = static_cast<std::size_t>(channel) * out.size();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::clamp(v[offset + i], 0.0, 1.0);
  return out;
}

struct Inference {
  ProbabilityMap probability;  // native resolution
  std::vector<ProbabilityMap> attention[2];  // per block, coarsest first
};

Inference infer(WNetModel& model, const FundusSample& sample) {
  const PreparedSample prepared = preprocess(sample, model.preprocess_config());
  NoGradGuard no_grad;
  const WNetOutput out = model.forward(prepared.input, BatchNormMode::eval);
  Inference inf;
  inf.probability = resize_bilinear(to_map(out.second.probability), sample.rgb.rows(),
                                    sample.rgb.cols());
  const UNetOutput* blocks[2] = {&out.first, &out.second};
  for (int b = 0; b < 2; ++b) {
    for (const auto& a : blocks[b]->attention) inf.attention[b].push_back(to_map(a));
  }
  return inf;
}

}  // namespace

int exit_code_for_current_exception() {
  try {
    throw;
  } catch (const UsageError&) {
    return kExitUsage;
  } catch (const NumericError&) {
    return kExitNumeric;
  } catch (const DataError&) {
    return kExitData;
  } catch (const ShapeError&) {
    // Shape clashes at this level come from mismatched files or checkpoints.
    return kExitData;
  } catch (const std::filesystem::filesystem_error&) {
    return kExitData;
  } catch (...) {
    return kExitData;
  }
}

void cmd_synth(const RunConfig& cfg, const fs::path& out_dir, std::ostream& log) {
  cfg.validate();
  const auto samples = generate_synthetic(cfg.synth);
  const DatasetManifest m = write_corpus(out_dir, samples, DatasetKind::synthetic);
  write_run_config(out_dir / "run_config.toml", cfg);
  if (cfg.verbosity > 0) {
    log << "wrote " << m.samples.size() << " synthetic samples to " << out_dir.string() << "\n";
  }
}

TrainArtifacts cmd_train(const RunConfig& cfg, const DataSource& data, const fs::path& out_dir,
                         std::ostream& log) {
  cfg.validate();
  if (cfg.verbosity > 0) log << "# effective configuration\n" << cfg.to_toml() << "\n";
  const DatasetManifest manifest = load_manifest(data.root, data.kind, data.strict);
  const std::vector<FundusSample> samples = load_samples(manifest, data.strict);
  auto [train_raw, val_raw] = split_dataset(samples, cfg.train.seed);

  auto prepare = [&](const std::vector<FundusSample>& set) {
    std::vector<TrainingExample> out;
    for (const auto& s : set) {
      if (!s.label) throw DataError("sample " + s.source_id + " has no artery/vein label");
      out.push_back(make_example(preprocess(s, cfg.preprocess), cfg.train.vessel_kind, cfg.focal,
                                 cfg.model));
    }
    return out;
  };
  const auto train_set = prepare(train_raw);
  const auto val_set = prepare(val_raw);

  UNetConfig block = cfg.model;
  block.in_channels = 3;
  block.out_channels = 1;
  const WNetConfig wcfg = WNetConfig::from_block(block);
  WNetModel model(wcfg, cfg.preprocess, cfg.train.seed);
  if (cfg.verbosity > 0) {
    log << "training " << kind_name(cfg.train.vessel_kind) << " model: "
        << model.parameter_count() << " parameters, " << train_set.size() << " train / "
        << val_set.size() << " validation images\n";
  }
  TrainArtifacts art;
  art.result = train_model(cfg.train, cfg.focal, model, train_set, val_set,
                           [&](const EpochRecord& r) {
                             if (cfg.verbosity > 1) {
                               log << "epoch " << r.epoch << " train " << r.train_loss << " val "
                                   << r.val_loss << "\n";
                             }
                           });

  CheckpointMeta meta;
  meta.wnet = wcfg;
  meta.preprocess = cfg.preprocess;
  meta.train = cfg.train;
  meta.focal = cfg.focal;
  meta.vessel_kind = cfg.train.vessel_kind;
  meta.model_seed = cfg.train.seed;
  meta.log_digest = art.result.log.digest();
  meta.best_epoch = art.result.best_epoch;
  meta.best_val_loss = art.result.best_val_loss;

  fs::create_directories(out_dir);
  art.checkpoint = out_dir / "model.avwn";
  art.log = out_dir / "train_log.csv";
  art.timing = out_dir / "train_timing.csv";
  save_checkpoint(art.checkpoint, model, meta);
  write_text(art.log, art.result.log.csv());
  write_text(art.timing, art.result.log.timing_csv());
  write_run_config(out_dir / "run_config.toml", cfg);
  if (cfg.verbosity > 0) {
    log << "best epoch " << art.result.best_epoch << " of " << art.result.epochs_run
        << " (validation loss " << art.result.best_val_loss << "), checkpoint "
        << art.checkpoint.string() << "\n";
  }
  return art;
}

void cmd_predict(const RunConfig& cfg, const fs::path& artery_checkpoint,
                 const fs::path& vein_checkpoint, const DataSource& data, const fs::path& out_dir,
                 bool dump_activations, std::ostream& log) {
  cfg.fusion.validate();
  LoadedCheckpoint artery = load_checkpoint(artery_checkpoint);
  LoadedCheckpoint vein = load_checkpoint(vein_checkpoint);
  if (artery.meta.vessel_kind != VesselKind::artery) {
    throw UsageError(artery_checkpoint.string() + " holds a vein model");
  }
  if (vein.meta.vessel_kind != VesselKind::vein) {
    throw UsageError(vein_checkpoint.string() + " holds an artery model");
  }
  const DatasetManifest manifest = load_manifest(data.root, data.kind, data.strict);
  for (const auto& entry : manifest.samples) {
    FundusSample sample = load_sample(manifest, entry, data.strict);
    const Inference a = infer(artery.model, sample);
    const Inference v = infer(vein.model, sample);
    const fs::path dir = out_dir / entry.id;
    write_probability(dir / "p_artery.png", a.probability);
    write_probability(dir / "p_vein.png", v.probability);
    write_label(dir / "fused.png", fuse(a.probability, v.probability, cfg.fusion));
    if (dump_activations) {
      const std::pair<const char*, const Inference*> models[2] = {{"artery", &a}, {"vein", &v}};
      for (const auto& [name, inf] : models) {
        for (int b = 0; b < 2; ++b) {
          for (std::size_t l = 0; l < inf->attention[b].size(); ++l) {
            write_probability(dir / ("attention_" + std::string(name) + "_phi" +
                                     std::to_string(b + 1) + "_" + std::to_string(l) + ".png"),
                              inf->attention[b][l]);
          }
        }
      }
    }
    if (cfg.verbosity > 1) log << "predicted " << entry.id << "\n";
  }
  write_run_config(out_dir / "run_config.toml", cfg);
  if (cfg.verbosity > 0) {
    log << "wrote predictions for " << manifest.samples.size() << " images to "
        << out_dir.string() << "\n";
  }
}

TieredMetrics cmd_evaluate(const RunConfig& cfg, const fs::path& pred_dir, const DataSource& truth,
                           const fs::path& out_dir, std::ostream& log) {
  if (!fs::is_directory(pred_dir)) {
    throw DataError("prediction directory " + pred_dir.string() + " does not exist");
  }
  const DatasetManifest manifest = load_manifest(truth.root, truth.kind, truth.strict);
  std::map<std::string, const ManifestEntry*> by_id;
  for (const auto& e : manifest.samples) by_id[e.id] = &e;

  std::vector<std::string> ids;
  for (const auto& d : fs::directory_iterator(pred_dir)) {
    if (d.is_directory() && fs::exists(d.path() / "fused.png")) {
      ids.push_back(d.path().filename().string());
    }
  }
  std::sort(ids.begin(), ids.end());
  if (ids.empty()) throw DataError("no <id>/fused.png predictions under " + pred_dir.string());

  std::vector<ImageEvaluation> evals;
  for (const auto& id : ids) {
    const auto it = by_id.find(id);
    if (it == by_id.end() || it->second->label.empty()) {
      throw DataError("prediction " + id + " has no labelled ground truth in " +
                      truth.root.string());
    }
    const ManifestEntry& e = *it->second;
    const LabelMap pred = read_label(pred_dir / id / "fused.png");
    const LabelMap gt = read_label(manifest.root / e.label);
    std::optional<Mask> fov;
    if (!e.mask.empty()) fov = read_mask(manifest.root / e.mask);
    if (!pred.same_extent(gt)) {
      throw DataError("prediction " + id + " is " + std::to_string(pred.cols()) + "x" +
                      std::to_string(pred.rows()) + " but truth is " + std::to_string(gt.cols()) +
                      "x" + std::to_string(gt.rows()));
    }
    evals.push_back(evaluate_image(pred, gt, fov ? &*fov : nullptr, cfg.evaluate));
  }
  const TieredMetrics metrics = summarize(evals);
  write_text(out_dir / "metrics.csv", metrics_csv(metrics));
  write_text(out_dir / "metrics.txt", metrics_table(metrics));
  write_run_config(out_dir / "run_config.toml", cfg);
  log << metrics_table(metrics);
  return metrics;
}

}  // namespace avwnet
