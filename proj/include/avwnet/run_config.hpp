#pragma once

// Merged run configuration, read from a TOML-style file:
//
//   # comment
//   output_dir = "runs"
//   [train]
//   learning_rate = 0.01
//   vessel_kind = "artery"
//
// Keys are addressed as "section.key" (top-level keys have no prefix). Flags
// given on the command line are applied after the file.

#include <filesystem>
#include <string>
#include <vector>

#include "avwnet/data_io.hpp"
#include "avwnet/fuse.hpp"
#include "avwnet/loss.hpp"
#include "avwnet/metrics.hpp"
#include "avwnet/model.hpp"
#include "avwnet/preprocess.hpp"
#include "avwnet/train.hpp"

namespace avwnet {

struct RunConfig {
  std::string output_dir = "runs";
  int verbosity = 1;
  PreprocessConfig preprocess;
  UNetConfig model;  // one block; the W-Net uses two of them
  TrainConfig train;
  FocalConfig focal;
  FusionConfig fusion;
  SynthConfig synth;
  EvaluationOptions evaluate;

  // Throws UsageError for unknown keys or unparsable values.
  void set(const std::string& key, const std::string& value);
  std::string get(const std::string& key) const;
  static const std::vector<std::string>& keys();

  void validate() const;
  std::string to_toml() const;
  static RunConfig from_toml(const std::string& text);
};

// Environment variable naming the default output root.
inline constexpr const char* kOutputRootEnv = "AVWNET_OUTPUT_ROOT";

// Defaults, with output_dir taken from the environment when set.
RunConfig default_run_config();
RunConfig load_run_config(const std::filesystem::path& path);
void write_run_config(const std::filesystem::path& path, const RunConfig& cfg);

}  // namespace avwnet
