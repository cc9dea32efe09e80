#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

#include "avwnet/data_io.hpp"
#include "json.hpp"

namespace avwnet {

namespace {

using nlohmann::json;

bool is_image_file(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".png" || ext == ".ppm" || ext == ".tif" || ext == ".tiff" || ext == ".jpg" ||
         ext == ".jpeg" || ext == ".bmp" || ext == ".gif";
}

std::vector<fs::path> list_images(const fs::path& dir) {
  std::vector<fs::path> out;
  if (!fs::is_directory(dir)) return out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && is_image_file(e.path())) out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

// File in `candidates` whose stem is `stem` or starts with `stem_`. Exact
// matches win; otherwise the lexicographically first.
std::string match_stem(const std::vector<fs::path>& candidates, const std::string& stem) {
  const fs::path* prefix_hit = nullptr;
  for (const auto& c : candidates) {
    const std::string s = c.stem().string();
    if (s == stem) return c.filename().string();
    if (!prefix_hit && s.size() > stem.size() && s.compare(0, stem.size(), stem) == 0 &&
        s[stem.size()] == '_') {
      prefix_hit = &c;
    }
  }
  return prefix_hit ? prefix_hit->filename().string() : std::string();
}

void reference_extent(DatasetKind kind, int& rows, int& cols) {
  switch (kind) {
    case DatasetKind::drive: rows = kDriveRows; cols = kDriveCols; return;
    case DatasetKind::hrf: rows = kHrfRows; cols = kHrfCols; return;
    case DatasetKind::synthetic: rows = cols = 0; return;
  }
}

void check_files(const DatasetManifest& m) {
  for (const auto& e : m.samples) {
    for (const std::string* rel : {&e.image, &e.label, &e.mask}) {
      if (rel->empty()) continue;
      if (!fs::exists(m.root / *rel)) {
        throw DataError("manifest entry " + e.id + " references missing file " +
                        (m.root / *rel).string());
      }
    }
  }
}

}  // namespace

const char* dataset_kind_name(DatasetKind k) {
  switch (k) {
    case DatasetKind::drive: return "drive";
    case DatasetKind::hrf: return "hrf";
    case DatasetKind::synthetic: return "synthetic";
  }
  return "?";
}

DatasetKind parse_dataset_kind(const std::string& text) {
  if (text == "drive") return DatasetKind::drive;
  if (text == "hrf") return DatasetKind::hrf;
  if (text == "synthetic") return DatasetKind::synthetic;
  throw UsageError("unknown dataset kind '" + text + "' (expected drive, hrf or synthetic)");
}

std::string manifest_json(const DatasetManifest& m) {
  json j;
  j["kind"] = dataset_kind_name(m.kind);
  j["native_rows"] = m.native_rows;
  j["native_cols"] = m.native_cols;
  j["samples"] = json::array();
  for (const auto& e : m.samples) {
    j["samples"].push_back({{"id", e.id}, {"image", e.image}, {"label", e.label}, {"mask", e.mask}});
  }
  return j.dump(2) + "\n";
}

DatasetManifest parse_manifest_json(const std::string& text, const fs::path& root) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw DataError("malformed manifest: " + std::string(e.what()));
  }
  DatasetManifest m;
  m.root = root;
  try {
    m.kind = parse_dataset_kind(j.at("kind").get<std::string>());
    m.native_rows = j.value("native_rows", 0);
    m.native_cols = j.value("native_cols", 0);
    for (const auto& s : j.at("samples")) {
      ManifestEntry e;
      e.id = s.at("id").get<std::string>();
      e.image = s.at("image").get<std::string>();
      e.label = s.value("label", std::string());
      e.mask = s.value("mask", std::string());
      m.samples.push_back(std::move(e));
    }
  } catch (const json::exception& e) {
    throw DataError("malformed manifest: " + std::string(e.what()));
  } catch (const UsageError& e) {
    throw DataError(std::string("malformed manifest: ") + e.what());
  }
  std::sort(m.samples.begin(), m.samples.end(),
            [](const ManifestEntry& a, const ManifestEntry& b) { return a.id < b.id; });
  return m;
}

DatasetManifest load_manifest(const fs::path& root, DatasetKind kind, bool strict) {
  if (!fs::is_directory(root)) throw DataError("dataset root " + root.string() + " is not a directory");
  DatasetManifest m;
  const fs::path json_path = root / "manifest.json";
  if (fs::exists(json_path)) {
    std::ifstream in(json_path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    m = parse_manifest_json(ss.str(), root);
    if (m.kind != kind) {
      throw DataError("manifest kind " + std::string(dataset_kind_name(m.kind)) +
                      " does not match requested " + dataset_kind_name(kind));
    }
  } else {
    if (kind == DatasetKind::synthetic) {
      throw DataError("synthetic root " + root.string() + " has no manifest.json");
    }
    m.root = root;
    m.kind = kind;
    reference_extent(kind, m.native_rows, m.native_cols);
    const auto images = list_images(root / "images");
    const auto labels = list_images(root / "av");
    const auto masks = list_images(root / "mask");
    for (const auto& img : images) {
      ManifestEntry e;
      e.id = img.stem().string();
      e.image = (fs::path("images") / img.filename()).string();
      const std::string l = match_stem(labels, e.id);
      const std::string k = match_stem(masks, e.id);
      if (!l.empty()) e.label = (fs::path("av") / l).string();
      if (!k.empty()) e.mask = (fs::path("mask") / k).string();
      m.samples.push_back(std::move(e));
    }
  }
  if (m.samples.empty()) throw DataError("no samples found under " + root.string());
  check_files(m);
  if (strict) {
    const std::size_t want = kind == DatasetKind::drive ? kDriveCount
                             : kind == DatasetKind::hrf ? kHrfCount
                                                        : m.samples.size();
    if (m.samples.size() != want) {
      throw DataError(std::string(dataset_kind_name(kind)) + " root " + root.string() + " has " +
                      std::to_string(m.samples.size()) + " images, expected " +
                      std::to_string(want));
    }
  }
  return m;
}

FundusSample load_sample(const DatasetManifest& m, const ManifestEntry& e, bool strict) {
  FundusSample s;
  s.source_id = e.id;
  s.rgb = read_rgb(m.root / e.image);
  if (!e.mask.empty()) s.fov_mask = read_mask(m.root / e.mask);
  if (!e.label.empty()) s.label = read_label(m.root / e.label);
  try {
    s.validate();
  } catch (const ShapeError& err) {
    throw DataError("sample " + e.id + ": " + err.what());
  }
  if (strict && m.native_rows > 0 &&
      !s.rgb.same_extent(m.native_rows, m.native_cols)) {
    throw DataError("sample " + e.id + " is " + std::to_string(s.rgb.cols()) + "x" +
                    std::to_string(s.rgb.rows()) + ", expected " + std::to_string(m.native_cols) +
                    "x" + std::to_string(m.native_rows));
  }
  return s;
}

std::vector<FundusSample> load_samples(const DatasetManifest& m, bool strict) {
  std::vector<FundusSample> out;
  out.reserve(m.samples.size());
  for (const auto& e : m.samples) out.push_back(load_sample(m, e, strict));
  return out;
}

DatasetManifest write_corpus(const fs::path& root, const std::vector<FundusSample>& samples,
                             DatasetKind kind) {
  if (samples.empty()) throw UsageError("refusing to write an empty corpus");
  DatasetManifest m;
  m.root = root;
  m.kind = kind;
  m.native_rows = samples.front().rgb.rows();
  m.native_cols = samples.front().rgb.cols();
  fs::create_directories(root);
  for (const auto& s : samples) {
    ManifestEntry e;
    e.id = s.source_id;
    e.image = "images/" + s.source_id + ".png";
    write_rgb(root / e.image, s.rgb);
    if (s.label) {
      e.label = "av/" + s.source_id + ".png";
      write_label(root / e.label, *s.label);
    }
    if (s.fov_mask) {
      e.mask = "mask/" + s.source_id + ".png";
      write_mask(root / e.mask, *s.fov_mask);
    }
    m.samples.push_back(std::move(e));
  }
  std::sort(m.samples.begin(), m.samples.end(),
            [](const ManifestEntry& a, const ManifestEntry& b) { return a.id < b.id; });
  std::ofstream out(root / "manifest.json", std::ios::binary);
  out << manifest_json(m);
  if (!out) throw DataError("cannot write " + (root / "manifest.json").string());
  return m;
}

}  // namespace avwnet
