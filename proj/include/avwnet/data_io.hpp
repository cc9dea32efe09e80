#pragma once

// Raster files, ground-truth palette, dataset manifests, synthetic fundus
// corpora and model checkpoints.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "avwnet/loss.hpp"
#include "avwnet/model.hpp"
#include "avwnet/preprocess.hpp"
#include "avwnet/raster.hpp"
#include "avwnet/train.hpp"

namespace avwnet {

namespace fs = std::filesystem;

// ---- rasters --------------------------------------------------------------

// Any format OpenCV decodes (PNG, PPM, TIFF, JPEG). Gray files are expanded.
RgbImage read_rgb(const fs::path& path);
// Extension picks the encoder; PNG is written without metadata so the bytes
// depend on the pixels only.
void write_rgb(const fs::path& path, const RgbImage& image);

// Nonzero -> 1.
Mask read_mask(const fs::path& path);
void write_mask(const fs::path& path, const Mask& mask);  // 0 / 255

// 16-bit files map value/65535, 8-bit files value/255.
ProbabilityMap read_probability(const fs::path& path);
// 16-bit grayscale PNG, round(p * 65535); throws NumericError outside [0,1].
void write_probability(const fs::path& path, const ProbabilityMap& map);

// ---- ground-truth palette ---------------------------------------------------

inline constexpr int kPaletteTolerance = 64;

// Nearest palette colour (red artery, blue vein, green uncertain, black
// background) by max-channel deviation; anything farther than
// kPaletteTolerance from every entry throws DataError with its coordinates.
LabelMap decode_av_label(const RgbImage& rgb);

LabelMap read_label(const fs::path& path);
void write_label(const fs::path& path, const LabelMap& label);

// ---- manifests ------------------------------------------------------------

enum class DatasetKind { drive, hrf, synthetic };
const char* dataset_kind_name(DatasetKind k);
DatasetKind parse_dataset_kind(const std::string& text);  // UsageError

struct ManifestEntry {
  std::string id;
  std::string image;  // relative to the manifest root
  std::string label;  // empty when absent
  std::string mask;   // empty when absent
};

struct DatasetManifest {
  fs::path root;
  DatasetKind kind = DatasetKind::synthetic;
  int native_rows = 0;
  int native_cols = 0;
  std::vector<ManifestEntry> samples;  // sorted by id
};

// Reference resolutions (rows, cols).
inline constexpr int kDriveRows = 584, kDriveCols = 565;
inline constexpr int kHrfRows = 2336, kHrfCols = 3504;
inline constexpr std::size_t kDriveCount = 40, kHrfCount = 45;

// Uses root/manifest.json when present. Otherwise (drive/hrf only) scans
// root/images and pairs each image with the files in root/av and root/mask
// whose stem equals the image stem or extends it after '_' . Strict mode
// requires the published image count for drive/hrf. Every referenced file
// must exist. Throws DataError.
DatasetManifest load_manifest(const fs::path& root, DatasetKind kind, bool strict = false);

// JSON: {"kind", "native_rows", "native_cols", "samples": [{"id", "image",
// "label", "mask"}]}. Unknown fields are ignored on read.
std::string manifest_json(const DatasetManifest& manifest);
DatasetManifest parse_manifest_json(const std::string& text, const fs::path& root);

// Decodes one entry; labels through decode_av_label. In strict mode real
// datasets must match their reference resolution.
FundusSample load_sample(const DatasetManifest& manifest, const ManifestEntry& entry,
                         bool strict = false);
std::vector<FundusSample> load_samples(const DatasetManifest& manifest, bool strict = false);

// ---- synthetic fundus corpus ---------------------------------------------

struct SynthConfig {
  int size = 64;
  int count = 25;
  int trees_per_class = 2;
  int branch_depth = 3;      // segments from root to leaf
  double min_width = 1.0;
  double max_width = 6.0;
  double crossover_probability = 0.5;
  double noise_sigma = 4.0;   // 8-bit levels
  double vessel_contrast = 0.22;  // artery darkening relative to background
  double av_contrast = 0.18;      // extra darkening of veins
  std::uint64_t seed = 0;

  // size must be divisible by 2^pooling_stages.
  void validate(int pooling_stages = 0) const;
  bool operator==(const SynthConfig&) const = default;
};

struct SynthSample {
  FundusSample sample;  // rgb, fov_mask and label all set
  Mask artery;          // union of artery trees
  Mask vein;            // union of vein trees
  std::vector<Mask> trees;  // one raster per kept tree, in generation order
};

std::vector<SynthSample> generate_synthetic_detailed(const SynthConfig& cfg);
std::vector<FundusSample> generate_synthetic(const SynthConfig& cfg);

// Writes images/, av/, mask/ PNGs and manifest.json under root.
DatasetManifest write_corpus(const fs::path& root, const std::vector<FundusSample>& samples,
                             DatasetKind kind = DatasetKind::synthetic);

// ---- checkpoints ----------------------------------------------------------

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointMeta {
  WNetConfig wnet;
  PreprocessConfig preprocess;
  TrainConfig train;
  FocalConfig focal;
  VesselKind vessel_kind = VesselKind::artery;
  std::uint64_t model_seed = 0;
  std::uint64_t log_digest = 0;
  int best_epoch = 0;
  double best_val_loss = 0;
};

// "AVWN", u32 version, u32 length + JSON metadata, u32 tensor count, then per
// tensor: u32 length + name, u32 rank, u64 dims, f64 values; trailing CRC32 of
// everything before it. All integers and floats little-endian. Batch-norm
// running statistics are stored as "<layer>.running_mean" / ".running_var".
std::vector<std::uint8_t> serialize_checkpoint(WNetModel& model, const CheckpointMeta& meta);
void save_checkpoint(const fs::path& path, WNetModel& model, const CheckpointMeta& meta);

struct LoadedCheckpoint {
  CheckpointMeta meta;
  WNetModel model;
};

// DataError on bad magic, checksum or version.
LoadedCheckpoint deserialize_checkpoint(const std::vector<std::uint8_t>& bytes);
LoadedCheckpoint load_checkpoint(const fs::path& path);

// Copies stored tensors into an existing model. Throws ShapeError naming the
// first parameter whose name or shape differs.
void load_weights(const std::vector<std::uint8_t>& bytes, WNetModel& model);

}  // namespace avwnet
