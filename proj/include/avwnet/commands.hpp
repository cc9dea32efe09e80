#pragma once

// The four pipeline commands as library calls. Each writes its artifacts and
// the effective run_config.toml into its output directory. Failures surface as
// UsageError / DataError / ShapeError / NumericError; tools/avwnet.cpp maps
// them to exit codes.

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

#include "avwnet/run_config.hpp"

namespace avwnet {

namespace fs = std::filesystem;

// Exit codes of the command-line tool.
enum ExitCode : int { kExitOk = 0, kExitUsage = 1, kExitData = 2, kExitNumeric = 3 };

// Maps the current exception to an exit code; call from a catch block.
int exit_code_for_current_exception();

struct DataSource {
  fs::path root;
  DatasetKind kind = DatasetKind::synthetic;
  bool strict = false;
};

// Synthetic corpus: images/, av/, mask/, manifest.json.
void cmd_synth(const RunConfig& cfg, const fs::path& out_dir, std::ostream& log);

struct TrainArtifacts {
  fs::path checkpoint;  // <out>/model.avwn
  fs::path log;         // <out>/train_log.csv
  fs::path timing;      // <out>/train_timing.csv
  TrainResult result;
};

// preprocess -> split -> train_model for cfg.train.vessel_kind.
TrainArtifacts cmd_train(const RunConfig& cfg, const DataSource& data, const fs::path& out_dir,
                         std::ostream& log);

// Writes <out>/<id>/p_artery.png, p_vein.png and fused.png at each image's
// native resolution; with dump_activations also the gate coefficients of both
// models as attention_<kind>_<block>_<level>.png.
void cmd_predict(const RunConfig& cfg, const fs::path& artery_checkpoint,
                 const fs::path& vein_checkpoint, const DataSource& data, const fs::path& out_dir,
                 bool dump_activations, std::ostream& log);

// Scores <pred_dir>/<id>/fused.png against the dataset labels. Every
// prediction needs a labelled counterpart; unpredicted truth entries are
// skipped. Writes metrics.csv and metrics.txt and prints the table.
TieredMetrics cmd_evaluate(const RunConfig& cfg, const fs::path& pred_dir, const DataSource& truth,
                           const fs::path& out_dir, std::ostream& log);

}  // namespace avwnet
