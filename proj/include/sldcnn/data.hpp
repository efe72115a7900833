#ifndef SLDCNN_DATA_HPP
#define SLDCNN_DATA_HPP

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "sldcnn/rng.hpp"
#include "sldcnn/tensor.hpp"

namespace sldcnn {

/// Single-channel image with intensities in [0, 255], row-major.
struct RawImage {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<Real> pixels;

  Real at(std::size_t y, std::size_t x) const { return pixels[y * width + x]; }
  bool operator==(const RawImage&) const = default;
};

struct RawCorpus {
  std::vector<RawImage> images;
  std::vector<int> labels;
  std::vector<std::string> class_names;  // index -> directory name
};

struct Standardizer {
  Real mean = 0;
  Real std = 1;
};

/// Images [N, 1, H, W] after preprocessing, with integer labels.
struct Dataset {
  Tensor images;
  std::vector<int> labels;
  std::vector<std::string> class_names;
  Standardizer stats;

  std::size_t size() const { return labels.size(); }
  std::size_t classes() const { return class_names.size(); }
};

struct Split {
  Dataset train;
  Dataset test;
};

/// ITU-R BT.601 luma weights.
inline Real luminance(Real r, Real g, Real b) { return 0.299 * r + 0.587 * g + 0.114 * b; }

/// Decodes any raster format OpenCV reads into luminance in [0, 255].
/// Throws DataError when the file cannot be decoded.
RawImage decode_image(const std::filesystem::path& path);

/// Reads `root/<class>/<image>`. Classes are indexed in lexicographic
/// directory order, files are read in lexicographic order. Throws IoError for
/// a missing root, DataError for an empty class directory and DataError
/// listing every undecodable file.
RawCorpus load_corpus(const std::filesystem::path& root);

/// As above, but classes are named up front (e.g. from the training split);
/// an unknown class directory is a DataError.
RawCorpus load_corpus(const std::filesystem::path& root,
                      const std::vector<std::string>& class_names);

enum class ResizeMethod { kBilinear, kNearest };
enum class StandardizeMode { kGlobal, kPerImage };

/// Resamples to target x target with pixel-center alignment; aspect ratio
/// is not preserved.
RawImage resize(const RawImage& image, std::size_t target,
                ResizeMethod method = ResizeMethod::kBilinear);

/// Global mean and population standard deviation over every element.
/// Throws DataError when the deviation is zero.
Standardizer fit_standardizer(const Tensor& images);
void apply_standardizer(const Standardizer& s, Tensor& images);
/// Standardizes each image by its own statistics; constant images are
/// only centered.
void standardize_per_image(Tensor& images);

struct PreprocessOptions {
  std::size_t size = 70;
  ResizeMethod resize = ResizeMethod::kBilinear;
  StandardizeMode standardize = StandardizeMode::kGlobal;
  bool invert = false;
};

/// Resizes, optionally inverts, and standardizes both splits with
/// statistics fitted on `train` alone.
Split preprocess(const RawCorpus& train, const RawCorpus& test, const PreprocessOptions& options);

/// Loads `root/train` and `root/test` and preprocesses them.
Split load_split(const std::filesystem::path& root, const PreprocessOptions& options);

/// Fisher-Yates permutation of [0, n).
std::vector<std::size_t> shuffled_order(std::size_t n, Rng& rng);

/// Permuted copy of `data`, images and labels moved together.
Dataset shuffle(const Dataset& data, std::uint64_t seed);

struct Batch {
  Tensor images;
  std::vector<int> labels;
};

/// Rows `indices` of `data`, in that order.
Batch gather(const Dataset& data, std::span<const std::size_t> indices);

/// Consecutive chunks of `size`; the last chunk keeps its true size.
std::vector<Batch> batches(const Dataset& data, std::size_t size);

struct SynthOptions {
  std::size_t classes = 10;
  std::size_t per_class = 220;
  std::size_t extent = 28;
  std::uint64_t seed = 1;
  Real noise = 0.1;                 // pixel noise sigma, as a fraction of full scale
  Real test_fraction = 1.0 / 11.0;  // per class, rounded, at least one sample each side
};

struct SynthCorpus {
  RawCorpus train;
  RawCorpus test;
};

/// Class-specific stroke glyphs (bars, crosses, arcs, rings) placed with
/// random translation and scale, plus Gaussian pixel noise. Pixels are
/// quantized to 8 bits so that a corpus written to disk reloads exactly.
SynthCorpus synth_corpus(const SynthOptions& options);

/// synth_corpus followed by preprocess at the generator's own extent.
Split synth_dataset(const SynthOptions& options, PreprocessOptions preprocess = {});

/// Writes `<root>/train/<class>/NNNNN.pgm` and the same under test/.
void write_corpus(const SynthCorpus& corpus, const std::filesystem::path& root);

/// Binary 8-bit PGM; pixel values are rounded and clamped to [0, 255].
void write_pgm(const RawImage& image, const std::filesystem::path& path);

}  // namespace sldcnn

#endif  // SLDCNN_DATA_HPP
