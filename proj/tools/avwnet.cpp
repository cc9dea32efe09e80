// avwnet: synth | train | predict | evaluate

#include <iostream>
#include <map>
#include <optional>

#include "CLI11.hpp"
#include "avwnet/commands.hpp"

using namespace avwnet;

namespace {

struct Common {
  std::string config_file;
  std::vector<std::string> overrides;  // key=value
  std::optional<std::string> output;
  std::optional<int> verbosity;
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("-c,--config", c.config_file, "TOML-style configuration file");
  sub->add_option("--set", c.overrides, "Override a configuration key (section.key=value)")
      ->take_all();
  sub->add_option("-o,--out", c.output, "Output directory");
  sub->add_option("-v,--verbosity", c.verbosity, "0 quiet, 1 summary, 2 per epoch/image");
}

struct DataFlags {
  std::string root;
  std::string kind = "synthetic";
  bool strict = false;
};

void add_data(CLI::App* sub, DataFlags& d, const std::string& flag, const std::string& help) {
  sub->add_option(flag, d.root, help)->required();
  sub->add_option("--kind", d.kind, "Dataset layout: synthetic, drive or hrf");
  sub->add_flag("--strict", d.strict, "Require the published image count and resolution");
}

DataSource source(const DataFlags& d) {
  return {d.root, parse_dataset_kind(d.kind), d.strict};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Artery/vein segmentation with attention W-Nets"};
  app.require_subcommand(1);

  Common common;
  // Typed shortcuts for the most used keys; anything else goes through --set.
  std::map<std::string, std::string> shortcuts;
  auto shortcut = [&](CLI::App* sub, const std::string& flag, const std::string& key,
                      const std::string& help) {
    sub->add_option_function<std::string>(
        flag, [&shortcuts, key](const std::string& v) { shortcuts[key] = v; }, help);
  };

  auto* synth = app.add_subcommand("synth", "Generate a synthetic fundus corpus");
  add_common(synth, common);
  shortcut(synth, "--seed", "synth.seed", "Generator seed");
  shortcut(synth, "--count", "synth.count", "Number of images");
  shortcut(synth, "--size", "synth.size", "Image side in pixels");

  auto* train = app.add_subcommand("train", "Train one W-Net for arteries or veins");
  add_common(train, common);
  DataFlags train_data;
  add_data(train, train_data, "--data", "Dataset root");
  shortcut(train, "--vessel", "train.vessel_kind", "artery or vein");
  shortcut(train, "--seed", "train.seed", "Training seed");
  shortcut(train, "--epochs", "train.max_epochs", "Maximum epochs");
  shortcut(train, "--patience", "train.patience", "Early-stopping patience");
  shortcut(train, "--batch-size", "train.batch_size", "Mini-batch size");
  shortcut(train, "--size", "preprocess.target_size", "Network input side");

  auto* predict = app.add_subcommand("predict", "Run both models and fuse their maps");
  add_common(predict, common);
  DataFlags predict_data;
  std::string artery_ckpt, vein_ckpt;
  bool dump = false;
  add_data(predict, predict_data, "--data", "Dataset root with the images to segment");
  predict->add_option("--artery", artery_ckpt, "Artery checkpoint")->required();
  predict->add_option("--vein", vein_ckpt, "Vein checkpoint")->required();
  predict->add_flag("--dump-activations", dump, "Also write attention coefficient maps");

  auto* evaluate = app.add_subcommand("evaluate", "Score fused predictions against labels");
  add_common(evaluate, common);
  DataFlags truth_data;
  std::string pred_dir;
  evaluate->add_option("--pred", pred_dir, "Directory of <id>/fused.png predictions")->required();
  add_data(evaluate, truth_data, "--truth", "Dataset root with ground-truth labels");
  evaluate->add_flag(
      "--all-centerline",
      [&shortcuts](std::int64_t) { shortcuts["evaluate.restrict_to_discovered"] = "false"; },
      "Score the whole ground-truth centerline, not only discovered pixels");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    RunConfig cfg =
        common.config_file.empty() ? default_run_config() : load_run_config(common.config_file);
    for (const auto& kv : common.overrides) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw UsageError("--set expects key=value, got " + kv);
      cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    for (const auto& [k, v] : shortcuts) cfg.set(k, v);
    if (common.verbosity) cfg.verbosity = *common.verbosity;
    if (common.output) cfg.output_dir = *common.output;
    cfg.validate();

    const fs::path out = cfg.output_dir;
    if (synth->parsed()) {
      cmd_synth(cfg, out, std::cout);
    } else if (train->parsed()) {
      cmd_train(cfg, source(train_data), out, std::cout);
    } else if (predict->parsed()) {
      cmd_predict(cfg, artery_ckpt, vein_ckpt, source(predict_data), out, dump, std::cout);
    } else if (evaluate->parsed()) {
      cmd_evaluate(cfg, pred_dir, source(truth_data), out, std::cout);
    }
    return kExitOk;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for_current_exception();
  }
}
