#include "avwnet/run_config.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace avwnet {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string unquote(const std::string& v) {
  if (v.size() >= 2 && v.front() == '"' && v.back() == '"') return v.substr(1, v.size() - 2);
  return v;
}

template <typename T>
T parse_number(const std::string& key, const std::string& raw) {
  const std::string v = unquote(trim(raw));
  T out{};
  const auto* end = v.data() + v.size();
  auto res = std::from_chars(v.data(), end, out);
  if (res.ec != std::errc() || res.ptr != end) {
    throw UsageError("invalid value '" + raw + "' for " + key);
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& raw) {
  const std::string v = unquote(trim(raw));
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw UsageError("invalid boolean '" + raw + "' for " + key);
}

std::string fmt_double(double v) {
  // Shortest text that parses back to the same double.
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  std::string s(buf, res.ptr);
  if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
  return s;
}

std::string quote(const std::string& s) { return "\"" + s + "\""; }

struct Field {
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string& key, const std::string&)> set;
};

template <typename T>
Field int_field(T RunConfig::*section, int T::*member) {
  return {[=](const RunConfig& c) { return std::to_string(c.*section.*member); },
          [=](RunConfig& c, const std::string& k, const std::string& v) {
            c.*section.*member = parse_number<int>(k, v);
          }};
}

template <typename T>
Field u64_field(T RunConfig::*section, std::uint64_t T::*member) {
  return {[=](const RunConfig& c) { return std::to_string(c.*section.*member); },
          [=](RunConfig& c, const std::string& k, const std::string& v) {
            c.*section.*member = parse_number<std::uint64_t>(k, v);
          }};
}

template <typename T>
Field double_field(T RunConfig::*section, double T::*member) {
  return {[=](const RunConfig& c) { return fmt_double(c.*section.*member); },
          [=](RunConfig& c, const std::string& k, const std::string& v) {
            c.*section.*member = parse_number<double>(k, v);
          }};
}

template <typename T>
Field bool_field(T RunConfig::*section, bool T::*member) {
  return {[=](const RunConfig& c) { return std::string(c.*section.*member ? "true" : "false"); },
          [=](RunConfig& c, const std::string& k, const std::string& v) {
            c.*section.*member = parse_bool(k, v);
          }};
}

// Ordered so to_toml() groups keys by section.
const std::vector<std::pair<std::string, Field>>& fields() {
  static const std::vector<std::pair<std::string, Field>> table = {
      {"output_dir",
       {[](const RunConfig& c) { return quote(c.output_dir); },
        [](RunConfig& c, const std::string&, const std::string& v) {
          c.output_dir = unquote(trim(v));
        }}},
      {"verbosity",
       {[](const RunConfig& c) { return std::to_string(c.verbosity); },
        [](RunConfig& c, const std::string& k, const std::string& v) {
          c.verbosity = parse_number<int>(k, v);
        }}},
      {"preprocess.target_size", int_field(&RunConfig::preprocess, &PreprocessConfig::target_size)},
      {"preprocess.clahe_clip_limit",
       double_field(&RunConfig::preprocess, &PreprocessConfig::clahe_clip_limit)},
      {"preprocess.clahe_tiles", int_field(&RunConfig::preprocess, &PreprocessConfig::clahe_tiles)},
      {"preprocess.epsilon", double_field(&RunConfig::preprocess, &PreprocessConfig::epsilon)},
      {"model.depth", int_field(&RunConfig::model, &UNetConfig::depth)},
      {"model.base_filters", int_field(&RunConfig::model, &UNetConfig::base_filters)},
      {"model.use_attention", bool_field(&RunConfig::model, &UNetConfig::use_attention)},
      {"model.deep_supervision", bool_field(&RunConfig::model, &UNetConfig::deep_supervision)},
      {"model.detach_attention", bool_field(&RunConfig::model, &UNetConfig::detach_attention)},
      {"train.learning_rate", double_field(&RunConfig::train, &TrainConfig::learning_rate)},
      {"train.batch_size", int_field(&RunConfig::train, &TrainConfig::batch_size)},
      {"train.max_epochs", int_field(&RunConfig::train, &TrainConfig::max_epochs)},
      {"train.patience", int_field(&RunConfig::train, &TrainConfig::patience)},
      {"train.seed", u64_field(&RunConfig::train, &TrainConfig::seed)},
      {"train.vessel_kind",
       {[](const RunConfig& c) { return quote(kind_name(c.train.vessel_kind)); },
        [](RunConfig& c, const std::string&, const std::string& v) {
          c.train.vessel_kind = parse_vessel_kind(unquote(trim(v)));
        }}},
      {"train.beta1", double_field(&RunConfig::train, &TrainConfig::beta1)},
      {"train.beta2", double_field(&RunConfig::train, &TrainConfig::beta2)},
      {"train.adam_epsilon", double_field(&RunConfig::train, &TrainConfig::adam_epsilon)},
      {"train.aux_weight", double_field(&RunConfig::train, &TrainConfig::aux_weight)},
      {"focal.gamma", double_field(&RunConfig::focal, &FocalConfig::gamma)},
      {"focal.alpha_fg", double_field(&RunConfig::focal, &FocalConfig::alpha_fg)},
      {"focal.alpha_uncertain", double_field(&RunConfig::focal, &FocalConfig::alpha_uncertain)},
      {"fusion.vessel_threshold", double_field(&RunConfig::fusion, &FusionConfig::vessel_threshold)},
      {"fusion.uncertainty_band", double_field(&RunConfig::fusion, &FusionConfig::uncertainty_band)},
      {"synth.size", int_field(&RunConfig::synth, &SynthConfig::size)},
      {"synth.count", int_field(&RunConfig::synth, &SynthConfig::count)},
      {"synth.trees_per_class", int_field(&RunConfig::synth, &SynthConfig::trees_per_class)},
      {"synth.branch_depth", int_field(&RunConfig::synth, &SynthConfig::branch_depth)},
      {"synth.min_width", double_field(&RunConfig::synth, &SynthConfig::min_width)},
      {"synth.max_width", double_field(&RunConfig::synth, &SynthConfig::max_width)},
      {"synth.crossover_probability",
       double_field(&RunConfig::synth, &SynthConfig::crossover_probability)},
      {"synth.noise_sigma", double_field(&RunConfig::synth, &SynthConfig::noise_sigma)},
      {"synth.vessel_contrast", double_field(&RunConfig::synth, &SynthConfig::vessel_contrast)},
      {"synth.av_contrast", double_field(&RunConfig::synth, &SynthConfig::av_contrast)},
      {"synth.seed", u64_field(&RunConfig::synth, &SynthConfig::seed)},
      {"evaluate.restrict_to_discovered",
       bool_field(&RunConfig::evaluate, &EvaluationOptions::restrict_to_discovered)},
      {"evaluate.wide_threshold",
       double_field(&RunConfig::evaluate, &EvaluationOptions::wide_threshold)},
  };
  return table;
}

const Field& find(const std::string& key) {
  for (const auto& [k, f] : fields()) {
    if (k == key) return f;
  }
  throw UsageError("unknown configuration key '" + key + "'");
}

}  // namespace

void RunConfig::set(const std::string& key, const std::string& value) {
  find(key).set(*this, key, value);
}

std::string RunConfig::get(const std::string& key) const { return find(key).get(*this); }

const std::vector<std::string>& RunConfig::keys() {
  static const std::vector<std::string> out = [] {
    std::vector<std::string> v;
    for (const auto& [k, f] : fields()) v.push_back(k);
    return v;
  }();
  return out;
}

void RunConfig::validate() const {
  if (verbosity < 0) throw UsageError("verbosity must be >= 0");
  model.validate();
  preprocess.validate(model.pooling_stages());
  train.validate();
  focal.validate();
  fusion.validate();
  synth.validate(model.pooling_stages());
  if (!(evaluate.wide_threshold >= 0)) throw UsageError("evaluate.wide_threshold must be >= 0");
}

std::string RunConfig::to_toml() const {
  std::ostringstream os;
  std::string section;
  for (const auto& [key, field] : fields()) {
    const auto dot = key.find('.');
    const std::string sec = dot == std::string::npos ? "" : key.substr(0, dot);
    const std::string name = dot == std::string::npos ? key : key.substr(dot + 1);
    if (sec != section) {
      os << "\n[" << sec << "]\n";
      section = sec;
    }
    os << name << " = " << field.get(*this) << "\n";
  }
  return os.str();
}

RunConfig RunConfig::from_toml(const std::string& text) {
  RunConfig cfg = default_run_config();
  std::istringstream in(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    // Strip comments outside quotes.
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
      if (line[i] == '"') quoted = !quoted;
      if (line[i] == '#' && !quoted) {
        line.resize(i);
        break;
      }
    }
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw UsageError("line " + std::to_string(lineno) + ": bad section");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw UsageError("line " + std::to_string(lineno) + ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    cfg.set(section.empty() ? key : section + "." + key, value);
  }
  return cfg;
}

RunConfig default_run_config() {
  RunConfig cfg;
  if (const char* root = std::getenv(kOutputRootEnv); root && *root) cfg.output_dir = root;
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return RunConfig::from_toml(ss.str());
}

void write_run_config(const std::filesystem::path& path, const RunConfig& cfg) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << "# effective configuration\n" << cfg.to_toml();
  if (!out) throw DataError("cannot write " + path.string());
}

}  // namespace avwnet
