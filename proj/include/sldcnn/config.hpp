#ifndef SLDCNN_CONFIG_HPP
#define SLDCNN_CONFIG_HPP

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sldcnn/arch.hpp"
#include "sldcnn/data.hpp"
#include "sldcnn/trainer.hpp"

namespace sldcnn {

/// Flat `key = value` run configuration. Only known keys are accepted;
/// values are validated when the configuration is resolved.
class RunConfig {
 public:
  /// UsageError on an unknown key.
  void set(const std::string& key, const std::string& value);
  std::optional<std::string> get(const std::string& key) const;
  bool has(const std::string& key) const { return values_.count(key) != 0; }
  const std::map<std::string, std::string>& values() const { return values_; }

  /// Parses `key = value` lines; `#` starts a comment. Existing keys are kept
  /// unless `override_existing` is set. Throws UsageError naming the line.
  void merge_text(const std::string& text, bool override_existing);
  void merge_file(const std::filesystem::path& path, bool override_existing);

  /// One `key = value` line per key, sorted by key.
  std::string render() const;

 private:
  std::map<std::string, std::string> values_;
};

const std::vector<std::string>& config_keys();

/// What `resolve` validates: everything, or only the corpus and
/// preprocessing keys (for commands that never train).
enum class ResolveScope { kFull, kData };

/// Fills defaults, expands `setup` into iteration counts that were not set
/// explicitly, and validates every value in scope. UsageError on a bad value.
RunConfig resolve(const RunConfig& config, ResolveScope scope = ResolveScope::kFull);

TrainConfig train_config(const RunConfig& resolved);
ArchSpec arch_spec(const RunConfig& resolved);
PreprocessOptions preprocess_options(const RunConfig& resolved);
SynthOptions synth_options(const RunConfig& resolved);
bool uses_synth(const RunConfig& resolved);

/// Synthetic or on-disk corpus per the configuration.
Split load_data(const RunConfig& resolved);

}  // namespace sldcnn

#endif  // SLDCNN_CONFIG_HPP
