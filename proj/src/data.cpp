#include "sldcnn/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>

#include <opencv2/core.hpp>
#include <opencv2/core/utils/logger.hpp>
#include <opencv2/imgcodecs.hpp>

#include "sldcnn/error.hpp"

namespace fs = std::filesystem;

namespace sldcnn {

RawImage decode_image(const fs::path& path) {
  // decode failures are reported through DataError, not OpenCV's logger
  static const bool quiet = [] {
    cv::utils::logging::setLogLevel(cv::utils::logging::LOG_LEVEL_SILENT);
    return true;
  }();
  (void)quiet;
  cv::Mat m;
  try {
    m = cv::imread(path.string(), cv::IMREAD_UNCHANGED);
  } catch (const cv::Exception& e) {
    throw DataError("cannot decode '" + path.string() + "': " + e.what());
  }
  if (m.empty()) throw DataError("cannot decode '" + path.string() + "'");

  Real full_scale = 255.0;
  switch (m.depth()) {
    case CV_8U: break;
    case CV_16U: full_scale = 65535.0; break;
    case CV_32F: full_scale = 1.0; break;
    default: throw DataError("unsupported pixel depth in '" + path.string() + "'");
  }
  cv::Mat f;
  m.convertTo(f, CV_64F, 255.0 / full_scale);

  RawImage img{static_cast<std::size_t>(f.rows), static_cast<std::size_t>(f.cols), {}};
  img.pixels.resize(img.height * img.width);
  const int ch = f.channels();
  for (int y = 0; y < f.rows; ++y) {
    const double* row = f.ptr<double>(y);
    for (int x = 0; x < f.cols; ++x) {
      const double* px = row + x * ch;
      Real v;
      if (ch >= 3) {
        v = luminance(px[2], px[1], px[0]);  // OpenCV stores BGR(A)
      } else {
        v = px[0];  // gray, or gray + alpha
      }
      img.pixels[static_cast<std::size_t>(y) * img.width + static_cast<std::size_t>(x)] =
          std::clamp(v, 0.0, 255.0);
    }
  }
  return img;
}

namespace {

std::vector<fs::path> sorted_entries(const fs::path& dir, bool want_dirs) {
  std::vector<fs::path> out;
  for (const fs::directory_entry& e : fs::directory_iterator(dir)) {
    const std::string name = e.path().filename().string();
    if (name.empty() || name[0] == '.') continue;
    if (want_dirs ? e.is_directory() : e.is_regular_file()) out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

RawCorpus load_classes(const fs::path& root, const std::vector<fs::path>& class_dirs,
                       const std::map<std::string, int>& index) {
  RawCorpus corpus;
  corpus.class_names.resize(index.size());
  for (const auto& [name, i] : index) corpus.class_names[static_cast<std::size_t>(i)] = name;

  std::vector<std::string> failures;
  for (const fs::path& dir : class_dirs) {
    const std::string name = dir.filename().string();
    const auto it = index.find(name);
    if (it == index.end()) {
      throw DataError("class directory '" + name + "' under '" + root.string() +
                      "' is not a known class");
    }
    const std::vector<fs::path> files = sorted_entries(dir, false);
    if (files.empty()) throw DataError("class directory '" + dir.string() + "' is empty");
    for (const fs::path& file : files) {
      try {
        corpus.images.push_back(decode_image(file));
        corpus.labels.push_back(it->second);
      } catch (const DataError& e) {
        failures.push_back(e.what());
      }
    }
  }
  if (!failures.empty()) {
    std::string report = std::to_string(failures.size()) + " undecodable file(s) under '" +
                         root.string() + "':";
    for (const std::string& f : failures) report += "\n  " + f;
    throw DataError(report);
  }
  return corpus;
}

void require_dir(const fs::path& root) {
  std::error_code ec;
  if (!fs::is_directory(root, ec)) throw IoError("corpus root '" + root.string() + "' not found");
}

}  // namespace

RawCorpus load_corpus(const fs::path& root) {
  require_dir(root);
  const std::vector<fs::path> dirs = sorted_entries(root, true);
  if (dirs.empty()) throw DataError("no class directories under '" + root.string() + "'");
  std::map<std::string, int> index;
  for (const fs::path& d : dirs) {
    index.emplace(d.filename().string(), static_cast<int>(index.size()));
  }
  return load_classes(root, dirs, index);
}

RawCorpus load_corpus(const fs::path& root, const std::vector<std::string>& class_names) {
  require_dir(root);
  std::map<std::string, int> index;
  for (std::size_t i = 0; i < class_names.size(); ++i) {
    index.emplace(class_names[i], static_cast<int>(i));
  }
  return load_classes(root, sorted_entries(root, true), index);
}

RawImage resize(const RawImage& image, std::size_t target, ResizeMethod method) {
  if (image.height == 0 || image.width == 0 || target == 0) {
    throw ShapeError("resize: empty image or target");
  }
  RawImage out{target, target, std::vector<Real>(target * target)};
  const Real sy = static_cast<Real>(image.height) / static_cast<Real>(target);
  const Real sx = static_cast<Real>(image.width) / static_cast<Real>(target);

  if (method == ResizeMethod::kNearest) {
    for (std::size_t y = 0; y < target; ++y) {
      const std::size_t iy =
          std::min(static_cast<std::size_t>((static_cast<Real>(y) + 0.5) * sy), image.height - 1);
      for (std::size_t x = 0; x < target; ++x) {
        const std::size_t ix =
            std::min(static_cast<std::size_t>((static_cast<Real>(x) + 0.5) * sx), image.width - 1);
        out.pixels[y * target + x] = image.at(iy, ix);
      }
    }
    return out;
  }

  // Source coordinate of a destination pixel center, clamped to the
  // outermost source centers.
  auto source = [](std::size_t d, Real scale, std::size_t n, std::size_t& lo, std::size_t& hi,
                   Real& frac) {
    Real s = (static_cast<Real>(d) + 0.5) * scale - 0.5;
    s = std::clamp(s, Real{0}, static_cast<Real>(n - 1));
    lo = static_cast<std::size_t>(std::floor(s));
    hi = std::min(lo + 1, n - 1);
    frac = s - static_cast<Real>(lo);
  };
  for (std::size_t y = 0; y < target; ++y) {
    std::size_t y0, y1;
    Real fy;
    source(y, sy, image.height, y0, y1, fy);
    for (std::size_t x = 0; x < target; ++x) {
      std::size_t x0, x1;
      Real fx;
      source(x, sx, image.width, x0, x1, fx);
      const Real top = image.at(y0, x0) * (1 - fx) + image.at(y0, x1) * fx;
      const Real bottom = image.at(y1, x0) * (1 - fx) + image.at(y1, x1) * fx;
      out.pixels[y * target + x] = top * (1 - fy) + bottom * fy;
    }
  }
  return out;
}

Standardizer fit_standardizer(const Tensor& images) {
  if (images.empty()) throw DataError("fit_standardizer: no training pixels");
  const Real n = static_cast<Real>(images.size());
  Real mean = 0;
  for (Real v : images.values()) mean += v;
  mean /= n;
  Real var = 0;
  for (Real v : images.values()) var += (v - mean) * (v - mean);
  var /= n;
  const Real sd = std::sqrt(var);
  if (!(sd > 0)) throw DataError("fit_standardizer: training pixels have zero variance");
  return {mean, sd};
}

void apply_standardizer(const Standardizer& s, Tensor& images) {
  if (!(s.std > 0)) throw DataError("apply_standardizer: non-positive deviation");
  for (Real& v : images.values()) v = (v - s.mean) / s.std;
}

void standardize_per_image(Tensor& images) {
  if (images.empty()) return;
  const std::size_t n = images.dim(0);
  const std::size_t len = images.size() / n;
  for (std::size_t i = 0; i < n; ++i) {
    Real* p = images.data() + i * len;
    Real mean = 0;
    for (std::size_t j = 0; j < len; ++j) mean += p[j];
    mean /= static_cast<Real>(len);
    Real var = 0;
    for (std::size_t j = 0; j < len; ++j) var += (p[j] - mean) * (p[j] - mean);
    const Real sd = std::sqrt(var / static_cast<Real>(len));
    for (std::size_t j = 0; j < len; ++j) p[j] = sd > 0 ? (p[j] - mean) / sd : p[j] - mean;
  }
}

namespace {

Dataset to_dataset(const RawCorpus& raw, const std::vector<std::string>& class_names,
                   const PreprocessOptions& opt) {
  if (raw.images.empty()) throw DataError("corpus contains no images");
  const std::size_t s = opt.size;
  Tensor images({raw.images.size(), 1, s, s});
  for (std::size_t i = 0; i < raw.images.size(); ++i) {
    const RawImage r = resize(raw.images[i], s, opt.resize);
    Real* dst = images.data() + i * s * s;
    for (std::size_t j = 0; j < s * s; ++j) dst[j] = opt.invert ? 255 - r.pixels[j] : r.pixels[j];
  }
  for (int label : raw.labels) {
    if (label < 0 || static_cast<std::size_t>(label) >= class_names.size()) {
      throw LabelError("corpus label " + std::to_string(label) + " outside class table");
    }
  }
  return Dataset{std::move(images), raw.labels, class_names, {}};
}

}  // namespace

Split preprocess(const RawCorpus& train, const RawCorpus& test, const PreprocessOptions& opt) {
  if (opt.size == 0) throw ConfigError("preprocess: target size must be >= 1");
  Split split{to_dataset(train, train.class_names, opt), to_dataset(test, train.class_names, opt)};

  std::vector<std::size_t> seen(train.class_names.size(), 0);
  for (int l : split.train.labels) ++seen[static_cast<std::size_t>(l)];
  for (std::size_t c = 0; c < seen.size(); ++c) {
    if (seen[c] == 0) {
      throw DataError("class '" + train.class_names[c] + "' has no training samples");
    }
  }

  if (opt.standardize == StandardizeMode::kGlobal) {
    const Standardizer s = fit_standardizer(split.train.images);
    apply_standardizer(s, split.train.images);
    apply_standardizer(s, split.test.images);
    split.train.stats = split.test.stats = s;
  } else {
    standardize_per_image(split.train.images);
    standardize_per_image(split.test.images);
  }
  return split;
}

Split load_split(const fs::path& root, const PreprocessOptions& options) {
  require_dir(root);
  const RawCorpus train = load_corpus(root / "train");
  const RawCorpus test = load_corpus(root / "test", train.class_names);
  return preprocess(train, test, options);
}

std::vector<std::size_t> shuffled_order(std::size_t n, Rng& rng) {
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
  return order;
}

Batch gather(const Dataset& data, std::span<const std::size_t> indices) {
  if (indices.empty()) throw ShapeError("gather: empty index list");
  const std::size_t row = data.images.size() / data.images.dim(0);
  Shape shape = data.images.shape();
  shape[0] = indices.size();
  std::vector<Real> values(indices.size() * row);
  Batch b{Tensor{}, std::vector<int>(indices.size())};
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const std::size_t src = indices[i];
    if (src >= data.size()) throw RangeError("gather: index out of range");
    std::copy_n(data.images.data() + src * row, row, values.begin() + static_cast<std::ptrdiff_t>(i * row));
    b.labels[i] = data.labels[src];
  }
  b.images = Tensor(std::move(shape), std::move(values));
  return b;
}

Dataset shuffle(const Dataset& data, std::uint64_t seed) {
  Rng rng(seed);
  const std::vector<std::size_t> order = shuffled_order(data.size(), rng);
  Batch b = gather(data, order);
  return Dataset{std::move(b.images), std::move(b.labels), data.class_names, data.stats};
}

std::vector<Batch> batches(const Dataset& data, std::size_t size) {
  if (size == 0) throw RangeError("batches: size must be >= 1");
  std::vector<Batch> out;
  std::vector<std::size_t> idx;
  for (std::size_t begin = 0; begin < data.size(); begin += size) {
    const std::size_t end = std::min(begin + size, data.size());
    idx.resize(end - begin);
    for (std::size_t i = begin; i < end; ++i) idx[i - begin] = i;
    out.push_back(gather(data, idx));
  }
  return out;
}

void write_pgm(const RawImage& image, const fs::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << "P5\n" << image.width << ' ' << image.height << "\n255\n";
  std::vector<unsigned char> bytes(image.pixels.size());
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    bytes[i] = static_cast<unsigned char>(std::clamp(std::round(image.pixels[i]), 0.0, 255.0));
  }
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

}  // namespace sldcnn
