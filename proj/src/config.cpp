#include "sldcnn/config.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "sldcnn/error.hpp"

namespace sldcnn {

namespace {

const std::map<std::string, std::string>& defaults() {
  static const std::map<std::string, std::string> d = [] {
    std::map<std::string, std::string> m = {
        {"mode", "sldcnn"},
        {"arch", "64C4-4P2-64C4-4P2-64C4-4P2-1500FC-171SM"},
        {"data", ""},
        {"synth", "false"},
        {"synth.classes", "10"},
        {"synth.per_class", "220"},
        {"synth.extent", "28"},
        {"synth.noise", "0.1"},
        {"synth.seed", "1"},
        {"size", "70"},
        {"resize", "bilinear"},
        {"standardize", "global"},
        {"invert", "false"},
        {"batch_size", "100"},
        {"per_layer_iters", "10"},
        {"fine_tune_iters", "20"},
        {"dcnn_iters", "50"},
        {"lrate1", "0.01"},
        {"lrate2", "0.001"},
        {"gamma", "0.9"},
        {"epsilon", "1e-08"},
        {"final_fraction", "0.1"},
        {"decay_unit", "epoch"},
        {"seed", "1"},
        {"freeze_earlier", "false"},
        {"init_scale", "1"},
        {"threads", "1"},
        {"setup", ""},
    };
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", 1.0 / 11.0);
    m["synth.test_fraction"] = buf;
    return m;
  }();
  return d;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* want) {
  throw UsageError("invalid value '" + value + "' for " + key + " (expected " + want + ")");
}

std::string value_of(const RunConfig& c, const std::string& key) {
  const auto v = c.get(key);
  if (!v) throw InternalError("configuration key '" + key + "' was not resolved");
  return *v;
}

std::size_t as_count(const RunConfig& c, const std::string& key, bool allow_zero = true) {
  const std::string v = value_of(c, key);
  std::size_t used = 0;
  unsigned long long n = 0;
  try {
    if (v.empty() || v[0] == '-' || v[0] == '+') throw std::invalid_argument(v);
    n = std::stoull(v, &used);
  } catch (const std::exception&) {
    bad_value(key, v, "a non-negative integer");
  }
  if (used != v.size()) bad_value(key, v, "a non-negative integer");
  if (!allow_zero && n == 0) bad_value(key, v, "a positive integer");
  return static_cast<std::size_t>(n);
}

double as_real(const RunConfig& c, const std::string& key) {
  const std::string v = value_of(c, key);
  std::size_t used = 0;
  double d = 0;
  try {
    d = std::stod(v, &used);
  } catch (const std::exception&) {
    bad_value(key, v, "a number");
  }
  if (used != v.size()) bad_value(key, v, "a number");
  return d;
}

bool as_bool(const RunConfig& c, const std::string& key) {
  const std::string v = value_of(c, key);
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  bad_value(key, v, "true or false");
}

}  // namespace

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const auto& [key, _] : defaults()) k.push_back(key);
    return k;
  }();
  return keys;
}

void RunConfig::set(const std::string& key, const std::string& value) {
  if (!defaults().count(key)) throw UsageError("unknown configuration key '" + key + "'");
  values_[key] = value;
}

std::optional<std::string> RunConfig::get(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  return it->second;
}

void RunConfig::merge_text(const std::string& text, bool override_existing) {
  std::istringstream in(text);
  std::string line;
  for (std::size_t n = 1; std::getline(in, line); ++n) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw UsageError("config line " + std::to_string(n) + ": expected 'key = value'");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (!defaults().count(key)) {
      throw UsageError("config line " + std::to_string(n) + ": unknown key '" + key + "'");
    }
    if (override_existing || !has(key)) values_[key] = value;
  }
}

void RunConfig::merge_file(const std::filesystem::path& path, bool override_existing) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  merge_text(ss.str(), override_existing);
}

std::string RunConfig::render() const {
  std::string out;
  for (const auto& [k, v] : values_) out += k + " = " + v + "\n";
  return out;
}

RunConfig resolve(const RunConfig& config, ResolveScope scope) {
  RunConfig r = config;
  if (!r.has("threads")) {
    if (const char* env = std::getenv("SLDCNN_THREADS"); env && *env) r.set("threads", env);
  }
  const std::string setup = r.get("setup").value_or("");
  if (!setup.empty()) {
    int id = 0;
    if (setup == "1") id = 1;
    else if (setup == "2") id = 2;
    else throw UsageError("unknown setup '" + setup + "' (expected 1 or 2)");
    const SetupPreset p = setup_preset(id);
    if (!r.has("per_layer_iters")) r.set("per_layer_iters", std::to_string(p.per_layer_iters));
    if (!r.has("fine_tune_iters")) r.set("fine_tune_iters", std::to_string(p.fine_tune_iters));
    if (!r.has("dcnn_iters")) r.set("dcnn_iters", std::to_string(p.dcnn_iters));
  }
  if (!r.has("size") && r.has("synth") && as_bool(r, "synth")) {
    r.set("size", r.get("synth.extent").value_or(defaults().at("synth.extent")));
  }
  for (const auto& [k, v] : defaults()) {
    if (!r.has(k)) r.set(k, v);
  }

  // Validate everything up front so that a bad value fails before any work.
  if (scope == ResolveScope::kFull) {
    train_config(r);
    arch_spec(r);
  }
  preprocess_options(r);
  if (uses_synth(r)) {
    synth_options(r);
  } else if (value_of(r, "data").empty()) {
    throw UsageError("no data source: set data to a corpus directory or enable synth");
  }
  return r;
}

TrainConfig train_config(const RunConfig& c) {
  TrainConfig t;
  const std::string mode = value_of(c, "mode");
  if (mode == "dcnn") t.mode = TrainMode::kDcnn;
  else if (mode == "sldcnn") t.mode = TrainMode::kSlDcnn;
  else bad_value("mode", mode, "dcnn or sldcnn");
  t.batch_size = as_count(c, "batch_size", false);
  t.per_layer_iters = as_count(c, "per_layer_iters");
  t.fine_tune_iters = as_count(c, "fine_tune_iters");
  t.dcnn_iters = as_count(c, "dcnn_iters");
  t.lrate1 = as_real(c, "lrate1");
  t.lrate2 = as_real(c, "lrate2");
  t.gamma = as_real(c, "gamma");
  t.epsilon = as_real(c, "epsilon");
  t.final_fraction = as_real(c, "final_fraction");
  const std::string unit = value_of(c, "decay_unit");
  if (unit == "epoch") t.decay_unit = DecayUnit::kEpoch;
  else if (unit == "batch") t.decay_unit = DecayUnit::kBatch;
  else bad_value("decay_unit", unit, "epoch or batch");
  t.seed = as_count(c, "seed");
  t.freeze_earlier = as_bool(c, "freeze_earlier");
  t.init_scale = as_real(c, "init_scale");
  t.threads = as_count(c, "threads", false);
  try {
    t.validate();
  } catch (const ConfigError& e) {
    throw UsageError(e.what());
  }
  return t;
}

ArchSpec arch_spec(const RunConfig& c) {
  const std::size_t size = as_count(c, "size", false);
  try {
    return make_arch(value_of(c, "arch"), InputGeometry{size, size, 1});
  } catch (const ParseError& e) {
    throw UsageError(std::string("arch: ") + e.what());
  } catch (const ShapeError& e) {
    throw UsageError(std::string("arch: ") + e.what());
  }
}

PreprocessOptions preprocess_options(const RunConfig& c) {
  PreprocessOptions p;
  p.size = as_count(c, "size", false);
  const std::string resize = value_of(c, "resize");
  if (resize == "bilinear") p.resize = ResizeMethod::kBilinear;
  else if (resize == "nearest") p.resize = ResizeMethod::kNearest;
  else bad_value("resize", resize, "bilinear or nearest");
  const std::string std_mode = value_of(c, "standardize");
  if (std_mode == "global") p.standardize = StandardizeMode::kGlobal;
  else if (std_mode == "per-image") p.standardize = StandardizeMode::kPerImage;
  else bad_value("standardize", std_mode, "global or per-image");
  p.invert = as_bool(c, "invert");
  return p;
}

SynthOptions synth_options(const RunConfig& c) {
  SynthOptions s;
  s.classes = as_count(c, "synth.classes");
  s.per_class = as_count(c, "synth.per_class");
  s.extent = as_count(c, "synth.extent");
  s.noise = as_real(c, "synth.noise");
  s.seed = as_count(c, "synth.seed");
  s.test_fraction = as_real(c, "synth.test_fraction");
  if (s.classes < 2) bad_value("synth.classes", value_of(c, "synth.classes"), "at least 2");
  if (s.per_class < 2) bad_value("synth.per_class", value_of(c, "synth.per_class"), "at least 2");
  if (s.extent < 4) bad_value("synth.extent", value_of(c, "synth.extent"), "at least 4");
  if (!(s.noise >= 0)) bad_value("synth.noise", value_of(c, "synth.noise"), "a non-negative number");
  if (!(s.test_fraction > 0 && s.test_fraction < 1)) {
    bad_value("synth.test_fraction", value_of(c, "synth.test_fraction"), "a fraction in (0,1)");
  }
  return s;
}

bool uses_synth(const RunConfig& c) { return as_bool(c, "synth"); }

Split load_data(const RunConfig& c) {
  PreprocessOptions pre = preprocess_options(c);
  if (uses_synth(c)) {
    const SynthCorpus corpus = synth_corpus(synth_options(c));
    return preprocess(corpus.train, corpus.test, pre);
  }
  return load_split(value_of(c, "data"), pre);
}

}  // namespace sldcnn
