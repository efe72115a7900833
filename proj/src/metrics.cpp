#include "sldcnn/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "sldcnn/error.hpp"

namespace sldcnn {

double error_rate(std::span<const int> predictions, std::span<const int> labels) {
  if (predictions.size() != labels.size()) {
    throw ShapeError("error_rate: " + std::to_string(predictions.size()) + " predictions for " +
                     std::to_string(labels.size()) + " labels");
  }
  if (labels.empty()) throw DataError("error_rate: no samples");
  std::size_t wrong = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) wrong += predictions[i] != labels[i];
  return static_cast<double>(wrong) / static_cast<double>(labels.size());
}

std::uint64_t ConfusionMatrix::total() const {
  std::uint64_t t = 0;
  for (std::uint64_t c : counts_) t += c;
  return t;
}

std::uint64_t ConfusionMatrix::trace() const {
  std::uint64_t t = 0;
  for (std::size_t k = 0; k < classes_; ++k) t += at(k, k);
  return t;
}

ConfusionMatrix confusion(std::span<const int> predictions, std::span<const int> labels,
                          std::size_t classes) {
  if (predictions.size() != labels.size()) throw ShapeError("confusion: length mismatch");
  ConfusionMatrix cm(classes);
  auto check = [&](int v) {
    if (v < 0 || static_cast<std::size_t>(v) >= classes) {
      throw LabelError("confusion: class index " + std::to_string(v) + " outside [0," +
                       std::to_string(classes) + ")");
    }
    return static_cast<std::size_t>(v);
  };
  for (std::size_t i = 0; i < labels.size(); ++i) ++cm.at(check(labels[i]), check(predictions[i]));
  return cm;
}

std::vector<ConfusionPair> top_confusions(const ConfusionMatrix& cm, std::size_t n) {
  std::vector<ConfusionPair> pairs;
  for (std::size_t t = 0; t < cm.classes(); ++t) {
    for (std::size_t p = 0; p < cm.classes(); ++p) {
      if (t != p && cm.at(t, p) > 0) pairs.push_back({t, p, cm.at(t, p)});
    }
  }
  std::stable_sort(pairs.begin(), pairs.end(),
                   [](const ConfusionPair& a, const ConfusionPair& b) { return a.count > b.count; });
  if (pairs.size() > n) pairs.resize(n);
  return pairs;
}

std::vector<std::optional<double>> per_class_accuracy(const ConfusionMatrix& cm) {
  std::vector<std::optional<double>> out(cm.classes());
  for (std::size_t t = 0; t < cm.classes(); ++t) {
    std::uint64_t row = 0;
    for (std::size_t p = 0; p < cm.classes(); ++p) row += cm.at(t, p);
    if (row) out[t] = static_cast<double>(cm.at(t, t)) / static_cast<double>(row);
  }
  return out;
}

namespace {

std::string g6(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << text;
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> fields;
  std::istringstream ss(line);
  std::string f;
  while (std::getline(ss, f, ',')) fields.push_back(f);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

double to_double(const std::string& s, std::size_t line) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw FormatError("line " + std::to_string(line) + ": bad number '" + s + "'");
  }
}

}  // namespace

std::string format_metrics(const std::vector<EpochRecord>& records) {
  std::string out = std::string(kMetricsHeader) + "\n";
  for (const EpochRecord& r : records) {
    out += r.phase + "," + std::to_string(r.epoch) + "," + g6(r.train_loss) + "," +
           g6(r.train_error) + "," + g6(r.test_error) + "," + g6(r.lr) + "," + g6(r.wall_ms) + "\n";
  }
  return out;
}

std::vector<EpochRecord> parse_metrics(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kMetricsHeader) {
    throw FormatError("metrics: missing or unexpected header");
  }
  std::vector<EpochRecord> out;
  for (std::size_t n = 2; std::getline(in, line); ++n) {
    if (line.empty()) continue;
    const std::vector<std::string> f = split_csv(line);
    if (f.size() != 7) throw FormatError("metrics line " + std::to_string(n) + ": expected 7 fields");
    EpochRecord r;
    r.phase = f[0];
    r.epoch = static_cast<std::size_t>(to_double(f[1], n));
    r.train_loss = to_double(f[2], n);
    r.train_error = to_double(f[3], n);
    r.test_error = to_double(f[4], n);
    r.lr = to_double(f[5], n);
    r.wall_ms = to_double(f[6], n);
    out.push_back(std::move(r));
  }
  return out;
}

void write_metrics(const std::vector<EpochRecord>& records, const std::filesystem::path& path) {
  write_file(path, format_metrics(records));
}

std::vector<EpochRecord> read_metrics(const std::filesystem::path& path) {
  return parse_metrics(read_file(path));
}

void write_confusion(const ConfusionMatrix& cm, const std::vector<std::string>& class_names,
                     const std::filesystem::path& path) {
  if (class_names.size() != cm.classes()) throw ShapeError("write_confusion: class name count");
  std::string out = "true\\predicted";
  for (const std::string& n : class_names) out += "," + n;
  out += "\n";
  for (std::size_t t = 0; t < cm.classes(); ++t) {
    out += class_names[t];
    for (std::size_t p = 0; p < cm.classes(); ++p) out += "," + std::to_string(cm.at(t, p));
    out += "\n";
  }
  write_file(path, out);
}

ConfusionMatrix read_confusion(const std::filesystem::path& path,
                               std::vector<std::string>* class_names) {
  std::istringstream in(read_file(path));
  std::string line;
  if (!std::getline(in, line)) throw FormatError("confusion: empty file");
  std::vector<std::string> header = split_csv(line);
  if (header.size() < 2) throw FormatError("confusion: header has no classes");
  const std::size_t k = header.size() - 1;
  ConfusionMatrix cm(k);
  for (std::size_t t = 0; t < k; ++t) {
    if (!std::getline(in, line)) throw FormatError("confusion: truncated at row " + std::to_string(t + 1));
    const std::vector<std::string> f = split_csv(line);
    if (f.size() != k + 1 || f[0] != header[t + 1]) {
      throw FormatError("confusion: malformed row " + std::to_string(t + 1));
    }
    for (std::size_t p = 0; p < k; ++p) {
      const double v = to_double(f[p + 1], t + 2);
      if (v < 0 || v != static_cast<double>(static_cast<std::uint64_t>(v))) {
        throw FormatError("confusion: count must be a non-negative integer");
      }
      cm.at(t, p) = static_cast<std::uint64_t>(v);
    }
  }
  if (class_names) class_names->assign(header.begin() + 1, header.end());
  return cm;
}

std::string format_top_confusions(const std::vector<ConfusionPair>& pairs,
                                  const std::vector<std::string>& class_names) {
  std::ostringstream os;
  os << "rank  true        predicted   count\n";
  if (pairs.empty()) os << "(no misclassifications)\n";
  char buf[128];
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const ConfusionPair& p = pairs[i];
    std::snprintf(buf, sizeof buf, "%-5zu %-11s %-11s %llu\n", i + 1,
                  class_names.at(p.truth).c_str(), class_names.at(p.predicted).c_str(),
                  static_cast<unsigned long long>(p.count));
    os << buf;
  }
  return os.str();
}

std::string format_per_class_accuracy(const ConfusionMatrix& cm,
                                      const std::vector<std::string>& class_names) {
  const auto acc = per_class_accuracy(cm);
  std::ostringstream os;
  os << "class       samples  accuracy\n";
  char buf[128];
  for (std::size_t t = 0; t < cm.classes(); ++t) {
    std::uint64_t row = 0;
    for (std::size_t p = 0; p < cm.classes(); ++p) row += cm.at(t, p);
    if (acc[t]) {
      std::snprintf(buf, sizeof buf, "%-11s %7llu  %.4f\n", class_names.at(t).c_str(),
                    static_cast<unsigned long long>(row), *acc[t]);
    } else {
      std::snprintf(buf, sizeof buf, "%-11s %7llu  -\n", class_names.at(t).c_str(),
                    static_cast<unsigned long long>(row));
    }
    os << buf;
  }
  return os.str();
}

}  // namespace sldcnn
