#include <bit>
#include <cstring>
#include <fstream>
#include <zlib.h>

#include "avwnet/data_io.hpp"
#include "json.hpp"

namespace avwnet {

namespace {

using nlohmann::json;

constexpr char kMagic[4] = {'A', 'V', 'W', 'N'};

json unet_json(const UNetConfig& c) {
  return {{"depth", c.depth},
          {"base_filters", c.base_filters},
          {"in_channels", c.in_channels},
          {"out_channels", c.out_channels},
          {"use_attention", c.use_attention},
          {"deep_supervision", c.deep_supervision},
          {"detach_attention", c.detach_attention}};
}

UNetConfig unet_from(const json& j) {
  UNetConfig c;
  c.depth = j.at("depth");
  c.base_filters = j.at("base_filters");
  c.in_channels = j.at("in_channels");
  c.out_channels = j.at("out_channels");
  c.use_attention = j.at("use_attention");
  c.deep_supervision = j.at("deep_supervision");
  c.detach_attention = j.value("detach_attention", false);
  return c;
}

// Seeds and digests are 64-bit; JSON numbers are not guaranteed to hold them,
// so they travel as decimal strings.
json meta_json(const CheckpointMeta& m) {
  json j;
  j["wnet"] = {{"first", unet_json(m.wnet.first)}, {"second", unet_json(m.wnet.second)}};
  j["preprocess"] = {{"target_size", m.preprocess.target_size},
                     {"clahe_clip_limit", m.preprocess.clahe_clip_limit},
                     {"clahe_tiles", m.preprocess.clahe_tiles},
                     {"epsilon", m.preprocess.epsilon}};
  j["train"] = {{"learning_rate", m.train.learning_rate},
                {"batch_size", m.train.batch_size},
                {"max_epochs", m.train.max_epochs},
                {"patience", m.train.patience},
                {"seed", std::to_string(m.train.seed)},
                {"vessel_kind", kind_name(m.train.vessel_kind)},
                {"beta1", m.train.beta1},
                {"beta2", m.train.beta2},
                {"adam_epsilon", m.train.adam_epsilon},
                {"aux_weight", m.train.aux_weight}};
  j["focal"] = {{"gamma", m.focal.gamma},
                {"alpha_fg", m.focal.alpha_fg},
                {"alpha_uncertain", m.focal.alpha_uncertain}};
  j["vessel_kind"] = kind_name(m.vessel_kind);
  j["model_seed"] = std::to_string(m.model_seed);
  j["log_digest"] = std::to_string(m.log_digest);
  j["best_epoch"] = m.best_epoch;
  j["best_val_loss"] = m.best_val_loss;
  return j;
}

CheckpointMeta meta_from(const json& j) {
  CheckpointMeta m;
  m.wnet.first = unet_from(j.at("wnet").at("first"));
  m.wnet.second = unet_from(j.at("wnet").at("second"));
  const auto& p = j.at("preprocess");
  m.preprocess.target_size = p.at("target_size");
  m.preprocess.clahe_clip_limit = p.at("clahe_clip_limit");
  m.preprocess.clahe_tiles = p.at("clahe_tiles");
  m.preprocess.epsilon = p.at("epsilon");
  const auto& t = j.at("train");
  m.train.learning_rate = t.at("learning_rate");
  m.train.batch_size = t.at("batch_size");
  m.train.max_epochs = t.at("max_epochs");
  m.train.patience = t.at("patience");
  m.train.seed = std::stoull(t.at("seed").get<std::string>());
  m.train.vessel_kind = parse_vessel_kind(t.at("vessel_kind").get<std::string>());
  m.train.beta1 = t.at("beta1");
  m.train.beta2 = t.at("beta2");
  m.train.adam_epsilon = t.at("adam_epsilon");
  m.train.aux_weight = t.value("aux_weight", 0.25);
  const auto& f = j.at("focal");
  m.focal.gamma = f.at("gamma");
  m.focal.alpha_fg = f.at("alpha_fg");
  m.focal.alpha_uncertain = f.at("alpha_uncertain");
  m.vessel_kind = parse_vessel_kind(j.at("vessel_kind").get<std::string>());
  m.model_seed = std::stoull(j.at("model_seed").get<std::string>());
  m.log_digest = std::stoull(j.at("log_digest").get<std::string>());
  m.best_epoch = j.value("best_epoch", 0);
  m.best_val_loss = j.value("best_val_loss", 0.0);
  return m;
}

class Writer {
 public:
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) bytes.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes.insert(bytes.end(), s.begin(), s.end());
  }
  std::vector<std::uint8_t> bytes;
};

class Reader {
 public:
  Reader(const std::vector<std::uint8_t>& b, std::size_t end) : b_(b), end_(end) {}
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b_[pos_++]) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b_[pos_++]) << (8 * i);
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string str() {
    const std::uint32_t n = u32();
    need(n);
    std::string s(b_.begin() + static_cast<std::ptrdiff_t>(pos_),
                  b_.begin() + static_cast<std::ptrdiff_t>(pos_ + n));
    pos_ += n;
    return s;
  }
  void skip(std::size_t n) {
    need(n);
    pos_ += n;
  }
  bool done() const { return pos_ == end_; }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > end_) throw DataError("checkpoint record runs past the end of the file");
  }
  const std::vector<std::uint8_t>& b_;
  std::size_t end_;
  std::size_t pos_ = 0;
};

struct StoredTensor {
  std::string name;
  Shape shape;
  std::vector<double> values;
};

std::uint32_t crc_of(const std::uint8_t* data, std::size_t n) {
  uLong crc = crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed in chunks to stay clear of overflow.
  while (n > 0) {
    const uInt chunk = static_cast<uInt>(std::min<std::size_t>(n, 1u << 30));
    crc = crc32(crc, data, chunk);
    data += chunk;
    n -= chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

struct Parsed {
  CheckpointMeta meta;
  std::vector<StoredTensor> tensors;
};

Parsed parse(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw DataError("not a checkpoint (bad magic or truncated header)");
  }
  const std::size_t body = bytes.size() - 4;
  Reader tail(bytes, bytes.size());
  tail.skip(body);
  const std::uint32_t stored_crc = tail.u32();
  if (crc_of(bytes.data(), body) != stored_crc) {
    throw DataError("checkpoint checksum mismatch (file corrupt or truncated)");
  }
  Reader in(bytes, body);
  in.skip(4);
  const std::uint32_t version = in.u32();
  if (version != kCheckpointVersion) {
    throw DataError("unsupported checkpoint version " + std::to_string(version) + " (expected " +
                    std::to_string(kCheckpointVersion) + ")");
  }
  Parsed out;
  try {
    out.meta = meta_from(json::parse(in.str()));
  } catch (const json::exception& e) {
    throw DataError("checkpoint metadata unreadable: " + std::string(e.what()));
  } catch (const UsageError& e) {
    throw DataError("checkpoint metadata unreadable: " + std::string(e.what()));
  }
  const std::uint32_t count = in.u32();
  for (std::uint32_t t = 0; t < count; ++t) {
    StoredTensor st;
    st.name = in.str();
    const std::uint32_t rank = in.u32();
    for (std::uint32_t d = 0; d < rank; ++d) st.shape.push_back(static_cast<std::int64_t>(in.u64()));
    const auto n = static_cast<std::size_t>(element_count(st.shape));
    st.values.resize(n);
    for (auto& v : st.values) v = in.f64();
    out.tensors.push_back(std::move(st));
  }
  if (!in.done()) throw DataError("trailing bytes after checkpoint tensors");
  return out;
}

void apply_tensors(const std::vector<StoredTensor>& tensors, WNetModel& model) {
  std::size_t i = 0;
  auto next = [&](const std::string& name, const Shape& shape) -> const StoredTensor& {
    if (i >= tensors.size()) {
      throw ShapeError("checkpoint has no tensor for parameter " + name);
    }
    const StoredTensor& st = tensors[i++];
    if (st.name != name || st.shape != shape) {
      throw ShapeError("parameter " + name + " " + to_string(shape) +
                       " does not match checkpoint tensor " + st.name + " " +
                       to_string(st.shape));
    }
    return st;
  };
  model.visit_parameters([&](const std::string& name, Tensor& t) {
    const StoredTensor& st = next(name, t.shape());
    auto dst = t.mutable_values();
    std::copy(st.values.begin(), st.values.end(), dst.begin());
  });
  model.visit_batch_norms([&](const std::string& name, BatchNormStats& s) {
    const Shape shape{static_cast<std::int64_t>(s.running_mean.size())};
    s.running_mean = next(name + ".running_mean", shape).values;
    s.running_var = next(name + ".running_var", shape).values;
  });
  if (i != tensors.size()) {
    throw ShapeError("checkpoint tensor " + tensors[i].name + " has no matching parameter");
  }
}

}  // namespace

std::vector<std::uint8_t> serialize_checkpoint(WNetModel& model, const CheckpointMeta& meta) {
  Writer w;
  w.bytes.insert(w.bytes.end(), kMagic, kMagic + 4);
  w.u32(kCheckpointVersion);
  w.str(meta_json(meta).dump());

  std::vector<StoredTensor> tensors;
  model.visit_parameters([&](const std::string& name, Tensor& t) {
    const auto v = t.values();
    tensors.push_back({name, t.shape(), {v.begin(), v.end()}});
  });
  model.visit_batch_norms([&](const std::string& name, BatchNormStats& s) {
    const Shape shape{static_cast<std::int64_t>(s.running_mean.size())};
    tensors.push_back({name + ".running_mean", shape, s.running_mean});
    tensors.push_back({name + ".running_var", shape, s.running_var});
  });
  w.u32(static_cast<std::uint32_t>(tensors.size()));
  for (const auto& t : tensors) {
    w.str(t.name);
    w.u32(static_cast<std::uint32_t>(t.shape.size()));
    for (auto d : t.shape) w.u64(static_cast<std::uint64_t>(d));
    for (double v : t.values) w.f64(v);
  }
  w.u32(crc_of(w.bytes.data(), w.bytes.size()));
  return std::move(w.bytes);
}

void save_checkpoint(const fs::path& path, WNetModel& model, const CheckpointMeta& meta) {
  const auto bytes = serialize_checkpoint(model, meta);
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("cannot write checkpoint " + path.string());
}

LoadedCheckpoint deserialize_checkpoint(const std::vector<std::uint8_t>& bytes) {
  Parsed p = parse(bytes);
  LoadedCheckpoint out{p.meta, WNetModel(p.meta.wnet, p.meta.preprocess, p.meta.model_seed)};
  apply_tensors(p.tensors, out.model);
  return out;
}

LoadedCheckpoint load_checkpoint(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  try {
    return deserialize_checkpoint(bytes);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

void load_weights(const std::vector<std::uint8_t>& bytes, WNetModel& model) {
  apply_tensors(parse(bytes).tensors, model);
}

}  // namespace avwnet
