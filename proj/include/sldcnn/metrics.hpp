#ifndef SLDCNN_METRICS_HPP
#define SLDCNN_METRICS_HPP

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace sldcnn {

/// One row of a training run's convergence log.
struct EpochRecord {
  std::string phase;  // layer1, layer2, ..., finetune, dcnn
  std::size_t epoch = 0;  // 1-based, counted across the whole run
  double train_loss = 0;
  double train_error = 0;
  double test_error = 0;
  double lr = 0;
  double wall_ms = 0;
};

double error_rate(std::span<const int> predictions, std::span<const int> labels);

/// K x K counts, rows = true class, columns = predicted class.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(std::size_t classes = 0)
      : classes_(classes), counts_(classes * classes, 0) {}

  std::size_t classes() const { return classes_; }
  std::uint64_t at(std::size_t truth, std::size_t predicted) const {
    return counts_[truth * classes_ + predicted];
  }
  std::uint64_t& at(std::size_t truth, std::size_t predicted) {
    return counts_[truth * classes_ + predicted];
  }
  std::uint64_t total() const;
  std::uint64_t trace() const;
  bool operator==(const ConfusionMatrix&) const = default;

 private:
  std::size_t classes_;
  std::vector<std::uint64_t> counts_;
};

ConfusionMatrix confusion(std::span<const int> predictions, std::span<const int> labels,
                          std::size_t classes);

struct ConfusionPair {
  std::size_t truth = 0;
  std::size_t predicted = 0;
  std::uint64_t count = 0;
  bool operator==(const ConfusionPair&) const = default;
};

/// Largest off-diagonal cells, count descending, ties by (truth, predicted).
std::vector<ConfusionPair> top_confusions(const ConfusionMatrix& cm, std::size_t n);

/// Diagonal over row sum; empty for classes with no samples.
std::vector<std::optional<double>> per_class_accuracy(const ConfusionMatrix& cm);

inline constexpr const char* kMetricsHeader = "phase,epoch,train_loss,train_error,test_error,lr,wall_ms";

std::string format_metrics(const std::vector<EpochRecord>& records);
std::vector<EpochRecord> parse_metrics(const std::string& text);
void write_metrics(const std::vector<EpochRecord>& records, const std::filesystem::path& path);
std::vector<EpochRecord> read_metrics(const std::filesystem::path& path);

/// Header row "true\predicted,<names...>", then one row per true class.
void write_confusion(const ConfusionMatrix& cm, const std::vector<std::string>& class_names,
                     const std::filesystem::path& path);
ConfusionMatrix read_confusion(const std::filesystem::path& path,
                               std::vector<std::string>* class_names = nullptr);

std::string format_top_confusions(const std::vector<ConfusionPair>& pairs,
                                  const std::vector<std::string>& class_names);
std::string format_per_class_accuracy(const ConfusionMatrix& cm,
                                      const std::vector<std::string>& class_names);

}  // namespace sldcnn

#endif  // SLDCNN_METRICS_HPP
